//! Orchestration: resolve configured images, run robot sessions in
//! parallel, assemble study sets from directories, and sweep parameter
//! grids.
//!
//! Sessions are the unit of parallelism. Each session's output depends
//! only on its inputs and seeds, never on scheduling, so runs are
//! byte-reproducible under any thread count. The `ANNOSIM_THREADS`
//! environment variable caps the worker pool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::clicklog::{read_clicklog, write_clicklog};
use crate::io::config::{resolve, ImageEntry, PredictorConfig, RunConfig};
use crate::io::native::{write_binary, write_scalar};
use crate::io::report::SweepRow;
use crate::io::{atomic_write, read_volume};
use crate::metrics::{
    m6_user_shift, m7_dice_difference, metrics_vector, MetricsVector, StudySet,
};
use crate::morphology::Connectivity;
use crate::phantom::generate;
use crate::predictor::{NullPredictor, OracleGrowConfig, OracleGrowPredictor, Predictor, ReplayPredictor};
use crate::robots::{run_session, ClickLog, RobotConfig};
use crate::volume::{BinaryVolume, ScalarVolume};

/// One image ready for simulation.
pub struct ResolvedImage {
    pub id: String,
    pub image: ScalarVolume,
    pub label: BinaryVolume,
    /// Manifest JSON for phantom-sourced images, written beside the volumes.
    pub manifest_json: Option<Vec<u8>>,
}

/// Loads an image entry from disk or generates its phantom.
pub fn resolve_image(entry: &ImageEntry, base: &Path) -> Result<ResolvedImage> {
    match (&entry.image, &entry.label, &entry.phantom) {
        (Some(image_path), Some(label_path), None) => {
            let image = read_volume(&resolve(base, image_path))?.into_scalar()?;
            let label = read_volume(&resolve(base, label_path))?.into_binary()?;
            if image.dims() != label.dims() {
                return Err(Error::DimMismatch(image.dims(), label.dims()));
            }
            Ok(ResolvedImage { id: entry.id.clone(), image, label, manifest_json: None })
        }
        (None, None, Some(spec)) => {
            let (image, label, manifest) = generate(spec)?;
            let mut json = serde_json::to_vec_pretty(&manifest)
                .map_err(|e| Error::json("phantom manifest", e))?;
            json.push(b'\n');
            Ok(ResolvedImage { id: entry.id.clone(), image, label, manifest_json: Some(json) })
        }
        _ => Err(Error::Config(format!(
            "image '{}' must provide either image+label paths or a phantom spec",
            entry.id
        ))),
    }
}

/// Builds the configured predictor for one session.
pub fn make_predictor(
    config: &PredictorConfig,
    label: &BinaryVolume,
    master_seed: u64,
    base: &Path,
) -> Result<Box<dyn Predictor + Send>> {
    match config {
        PredictorConfig::Null => Ok(Box::new(NullPredictor)),
        PredictorConfig::OracleGrow { reveal_radius, noise, seed } => {
            let cfg = OracleGrowConfig {
                reveal_radius: *reveal_radius,
                noise: *noise,
                seed: seed.unwrap_or(master_seed),
            };
            Ok(Box::new(OracleGrowPredictor::new(label.clone(), cfg)?))
        }
        PredictorConfig::Replay { dir } => Ok(Box::new(ReplayPredictor::new(resolve(base, dir)))),
    }
}

/// Worker cap from `ANNOSIM_THREADS`; unset means the rayon default.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("ANNOSIM_THREADS") {
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                Error::Config(format!("ANNOSIM_THREADS must be a positive integer, got '{raw}'"))
            })?;
            if n == 0 {
                return Err(Error::Config("ANNOSIM_THREADS must be >= 1".into()));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn session_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Log file name for one (image, user) pair.
pub fn log_file_name(image_id: &str, user_id: &str) -> String {
    format!("{image_id}__{user_id}.json")
}

/// Runs every configured robot on every configured image and writes the
/// logs (plus generated phantom volumes) under the config's output
/// directory: `logs/<image>__<robot>.json`, `volumes/<image>_{image,label}.bin`.
pub fn simulate(config: &RunConfig, base: &Path) -> Result<()> {
    let output_dir = resolve(base, &config.output_dir);
    let images: Vec<ResolvedImage> = config
        .images
        .iter()
        .map(|entry| resolve_image(entry, base))
        .collect::<Result<_>>()?;

    let volumes_dir = output_dir.join("volumes");
    for resolved in &images {
        if let Some(manifest) = &resolved.manifest_json {
            write_scalar(&volumes_dir.join(format!("{}_image.bin", resolved.id)), &resolved.image)?;
            write_binary(&volumes_dir.join(format!("{}_label.bin", resolved.id)), &resolved.label)?;
            atomic_write(&volumes_dir.join(format!("{}_manifest.json", resolved.id)), manifest)?;
        }
    }

    let logs_dir = output_dir.join("logs");
    let tasks: Vec<(&ResolvedImage, RobotConfig, String)> = images
        .iter()
        .flat_map(|image| {
            config.robots.iter().map(move |robot| {
                (image, robot.to_robot_config(config.master_seed), robot.id.clone())
            })
        })
        .collect();

    let pool = session_pool()?;
    let logs: Vec<(ClickLog, RobotConfig)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(image, robot_cfg, robot_id)| {
                let mut predictor =
                    make_predictor(&config.predictor, &image.label, config.master_seed, base)?;
                let log = run_session(
                    &image.image,
                    &image.label,
                    predictor.as_mut(),
                    robot_cfg,
                    config.iterations,
                    &image.id,
                    robot_id,
                    config.connectivity_enum(),
                )?;
                Ok((log, *robot_cfg))
            })
            .collect::<Result<_>>()
    })?;

    for (log, robot_cfg) in &logs {
        let path = logs_dir.join(log_file_name(&log.image_id, &log.user_id));
        write_clicklog(log, Some(robot_cfg), &path)?;
    }
    Ok(())
}

/// Label volume for `image_id` inside a labels directory; tries the native
/// format first, then the NIfTI variants.
pub fn find_label(labels_dir: &Path, image_id: &str) -> Result<BinaryVolume> {
    let candidates = [
        format!("{image_id}_label.bin"),
        format!("{image_id}_label.nii"),
        format!("{image_id}_label.nii.gz"),
    ];
    for name in &candidates {
        let path = labels_dir.join(name);
        if path.exists() {
            return read_volume(&path)?.into_binary();
        }
    }
    Err(Error::MissingFile(labels_dir.join(&candidates[0])))
}

/// Loads every `.json` click log in `logs_dir` and the labels they
/// reference, producing a ready study set.
pub fn load_study_set(
    logs_dir: &Path,
    labels_dir: &Path,
    connectivity: Connectivity,
) -> Result<StudySet> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(logs_dir)
        .map_err(|e| Error::io(logs_dir.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Config(format!("no .json click logs in {}", logs_dir.display())));
    }
    let mut set = StudySet::new(connectivity);
    let mut labels_seen: BTreeMap<String, ()> = BTreeMap::new();
    let mut logs = Vec::new();
    for path in &names {
        let log = read_clicklog(path)?;
        if !labels_seen.contains_key(&log.image_id) {
            set.add_label(log.image_id.clone(), find_label(labels_dir, &log.image_id)?)?;
            labels_seen.insert(log.image_id.clone(), ());
        }
        logs.push(log);
    }
    for log in logs {
        set.add_log(log)?;
    }
    Ok(set)
}

/// A parameter grid evaluation against fixed reference annotators.
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
}

/// Sweeps robot configurations over the grid: for every point a synthetic
/// robot runs all configured images, and its user shift and Dice
/// difference against the reference annotators are recorded.
pub fn sweep(
    config: &RunConfig,
    base: &Path,
    grid_points: &[(f64, f64, u32)],
    reference_logs: Vec<ClickLog>,
) -> Result<SweepOutcome> {
    use crate::robots::RobotKind;

    if reference_logs.is_empty() {
        return Err(Error::Config("sweep needs at least one reference log".into()));
    }
    let images: Vec<ResolvedImage> = config
        .images
        .iter()
        .map(|entry| resolve_image(entry, base))
        .collect::<Result<_>>()?;

    let mut set = StudySet::new(config.connectivity_enum());
    for image in &images {
        set.add_label(image.id.clone(), image.label.clone())?;
    }
    let mut annotator_ids: Vec<String> = Vec::new();
    for log in reference_logs {
        if !annotator_ids.contains(&log.user_id) {
            annotator_ids.push(log.user_id.clone());
        }
        set.add_log(log)?;
    }
    annotator_ids.sort();
    let annotator_vectors: Vec<MetricsVector> = annotator_ids
        .iter()
        .map(|id| metrics_vector(&set, id))
        .collect::<Result<_>>()?;

    // Robot ids encode the grid point so every point gets its own streams.
    let point_id = |pp: f64, ps: f64, a: u32| format!("sweep_pp{pp:.4}_ps{ps:.4}_a{a}");
    let tasks: Vec<(usize, &ResolvedImage)> = grid_points
        .iter()
        .enumerate()
        .flat_map(|(gi, _)| images.iter().map(move |img| (gi, img)))
        .collect();

    let pool = session_pool()?;
    let logs: Vec<ClickLog> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(gi, image)| {
                let (pp, ps, a) = grid_points[gi];
                let robot = RobotConfig {
                    kind: RobotKind::ROurs,
                    p_perturb: pp,
                    p_system: ps,
                    amplitude: a,
                    seed: config.master_seed,
                };
                let mut predictor =
                    make_predictor(&config.predictor, &image.label, config.master_seed, base)?;
                run_session(
                    &image.image,
                    &image.label,
                    predictor.as_mut(),
                    &robot,
                    config.iterations,
                    &image.id,
                    &point_id(pp, ps, a),
                    config.connectivity_enum(),
                )
            })
            .collect::<Result<_>>()
    })?;
    for log in logs {
        set.add_log(log)?;
    }

    let mut rows = Vec::with_capacity(grid_points.len());
    for &(pp, ps, a) in grid_points {
        let robot_id = point_id(pp, ps, a);
        let robot_vector = metrics_vector(&set, &robot_id)?;
        let m6 = m6_user_shift(&robot_vector, &annotator_vectors)?;
        let m7 = m7_dice_difference(&set, &robot_id, &annotator_ids)?;
        rows.push(SweepRow { p_perturb: pp, p_system: ps, amplitude: a, m6, m7 });
    }
    Ok(SweepOutcome { rows })
}
