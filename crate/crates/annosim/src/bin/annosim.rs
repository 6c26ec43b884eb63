//! Command-line surface: phantom generation, simulation, metrics,
//! robot-vs-annotator comparison, parameter sweeps, and correlation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use annosim::error::{Error, Result};
use annosim::io::clicklog::read_clicklog;
use annosim::io::config::{load_run_config, SweepGrid};
use annosim::io::native::{write_binary, write_scalar};
use annosim::io::report::{
    round4, sweep_to_csv_bytes, CompareReport, CorrelateReport, MetricsReport, UserMetricsRow,
};
use annosim::io::{atomic_write, read_file};
use annosim::metrics::{
    m6_user_shift, m7_dice_difference, metrics_vector, pearson_correlation,
};
use annosim::morphology::Connectivity;
use annosim::phantom::{generate, PhantomSpec};
use annosim::robots::UserKind;
use annosim::runner::{load_study_set, simulate, sweep};

#[derive(Parser)]
#[command(name = "annosim", version, about = "Click simulation and evaluation for interactive 3D lesion segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom volume pair from a spec file.
    GenPhantom {
        /// Phantom spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for <id>_image.bin, <id>_label.bin, <id>_manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configured robot on every configured image.
    Simulate {
        /// Run config JSON (see schemas/run-config.schema.json).
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the per-user behaviour metrics over a log directory.
    Metrics {
        /// Directory of click-log JSON files.
        #[arg(long)]
        logs: PathBuf,
        /// Directory holding <image_id>_label.{bin,nii,nii.gz}.
        #[arg(long)]
        labels: PathBuf,
        /// Report stem; writes <stem>.json and <stem>.csv.
        #[arg(long)]
        out: PathBuf,
        /// Component connectivity: 6 or 26.
        #[arg(long, default_value_t = 26)]
        connectivity: u8,
    },
    /// Compare one robot's logs against annotator logs.
    Compare {
        #[arg(long)]
        robot: String,
        /// Comma-separated annotator user ids.
        #[arg(long, value_delimiter = ',')]
        annotators: Vec<String>,
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 26)]
        connectivity: u8,
    },
    /// Evaluate a grid of human-factor robot configs against reference logs.
    Sweep {
        /// Run config providing images, predictor, seeds, iterations.
        #[arg(long)]
        config: PathBuf,
        /// Grid spec: "p_perturb=0,0.134;p_system=0,0.134;a=0,35".
        #[arg(long)]
        grid: String,
        /// Zip the probability axes instead of taking their product.
        #[arg(long)]
        diagonal: bool,
        /// Directory of reference annotator logs.
        #[arg(long)]
        reference: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pearson correlation between the m6 and m7 columns of a sweep CSV.
    Correlate {
        #[arg(long)]
        sweep: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_connectivity(value: u8) -> Result<Connectivity> {
    match value {
        6 => Ok(Connectivity::Six),
        26 => Ok(Connectivity::TwentySix),
        other => Err(Error::Config(format!("connectivity must be 6 or 26, got {other}"))),
    }
}

fn cmd_gen_phantom(spec_path: &PathBuf, out: &PathBuf) -> Result<()> {
    let spec = PhantomSpec::from_json(&read_file(spec_path)?)?;
    let (image, label, manifest) = generate(&spec)?;
    write_scalar(&out.join(format!("{}_image.bin", spec.id)), &image)?;
    write_binary(&out.join(format!("{}_label.bin", spec.id)), &label)?;
    let mut manifest_json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| Error::json("phantom manifest", e))?;
    manifest_json.push(b'\n');
    atomic_write(&out.join(format!("{}_manifest.json", spec.id)), &manifest_json)?;
    Ok(())
}

fn cmd_metrics(logs: &PathBuf, labels: &PathBuf, out: &PathBuf, connectivity: u8) -> Result<()> {
    let conn = parse_connectivity(connectivity)?;
    let set = load_study_set(logs, labels, conn)?;
    let mut rows = Vec::new();
    for user_id in set.user_ids() {
        let vector = metrics_vector(&set, &user_id)?;
        let kind = set.user_kind(&user_id).unwrap_or(UserKind::Human);
        rows.push(UserMetricsRow::new(user_id.clone(), kind, set.image_count(&user_id), &vector));
    }
    MetricsReport::new(connectivity, rows).write(out)
}

fn cmd_compare(
    robot: &str,
    annotators: &[String],
    logs: &PathBuf,
    labels: &PathBuf,
    out: Option<&PathBuf>,
    connectivity: u8,
) -> Result<()> {
    if annotators.is_empty() {
        return Err(Error::Config("compare needs at least one annotator id".into()));
    }
    let conn = parse_connectivity(connectivity)?;
    let set = load_study_set(logs, labels, conn)?;
    let robot_vector = metrics_vector(&set, robot)?;
    let mut annotator_rows = Vec::new();
    let mut annotator_vectors = Vec::new();
    for id in annotators {
        let vector = metrics_vector(&set, id)?;
        let kind = set.user_kind(id).unwrap_or(UserKind::Human);
        annotator_rows.push(UserMetricsRow::new(id.clone(), kind, set.image_count(id), &vector));
        annotator_vectors.push(vector);
    }
    let m6 = m6_user_shift(&robot_vector, &annotator_vectors)?;
    let m7 = m7_dice_difference(&set, robot, annotators)?;
    let report = CompareReport {
        version: 1,
        robot: robot.to_string(),
        annotators: annotators.to_vec(),
        m6_user_shift: round4(m6),
        m7_dice_difference: round4(m7),
        robot_metrics: UserMetricsRow::new(
            robot.to_string(),
            set.user_kind(robot).unwrap_or(UserKind::Robot),
            set.image_count(robot),
            &robot_vector,
        ),
        annotator_metrics: annotator_rows,
    };
    let bytes = report.to_json_bytes()?;
    match out {
        Some(path) => atomic_write(path, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn cmd_sweep(
    config_path: &PathBuf,
    grid: &str,
    diagonal: bool,
    reference: &PathBuf,
    out: &PathBuf,
) -> Result<()> {
    let config = load_run_config(config_path)?;
    let base = config_path.parent().unwrap_or(std::path::Path::new("."));
    let points = SweepGrid::parse(grid)?.points(diagonal)?;
    let mut reference_logs = Vec::new();
    let mut names: Vec<PathBuf> = std::fs::read_dir(reference)
        .map_err(|e| Error::io(reference.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    names.sort();
    for path in names {
        reference_logs.push(read_clicklog(&path)?);
    }
    let outcome = sweep(&config, base, &points, reference_logs)?;
    atomic_write(out, &sweep_to_csv_bytes(&outcome.rows))
}

fn cmd_correlate(sweep_path: &PathBuf, out: Option<&PathBuf>) -> Result<()> {
    let rows = annosim::io::report::read_sweep_csv(sweep_path)?;
    let m6: Vec<f64> = rows.iter().map(|r| r.m6).collect();
    let m7: Vec<f64> = rows.iter().map(|r| r.m7).collect();
    let rho = pearson_correlation(&m6, &m7)?;
    let report = CorrelateReport { version: 1, rho: round4(rho), points: rows.len() };
    let bytes = report.to_json_bytes()?;
    match out {
        Some(path) => atomic_write(path, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenPhantom { spec, out } => cmd_gen_phantom(spec, out),
        Command::Simulate { config } => {
            let parsed = load_run_config(config)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            simulate(&parsed, base)
        }
        Command::Metrics { logs, labels, out, connectivity } => {
            cmd_metrics(logs, labels, out, *connectivity)
        }
        Command::Compare { robot, annotators, logs, labels, out, connectivity } => {
            cmd_compare(robot, annotators, logs, labels, out.as_ref(), *connectivity)
        }
        Command::Sweep { config, grid, diagonal, reference, out } => {
            cmd_sweep(config, grid, *diagonal, reference, out)
        }
        Command::Correlate { sweep, out } => cmd_correlate(sweep, out.as_ref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
