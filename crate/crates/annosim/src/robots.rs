//! Click policies and the iterative simulation loop.
//!
//! Five policies produce the per-iteration click pair. The first four are
//! idealized: their lesion clicks always land inside the ground truth, on
//! the error of the previous prediction. The fifth mixes in human factors:
//! bounded spatial perturbation and systematic clicks on high-uptake
//! regions outside the label, each gated by an independent per-iteration
//! probability.
//!
//! Every iteration emits one lesion click and one background click where
//! the corresponding error region exists; iteration 1 has no prediction to
//! correct yet, so it places only the label-derived lesion click.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{component_center, edt, largest_component, Connectivity};
use crate::predictor::Predictor;
use crate::sampling::{
    perturb, sample_uniform, sample_weighted, suv_weights, ClickClass, RngStream,
};
use crate::volume::{dice, error_masks, BinaryVolume, ScalarVolume, Voxel};

/// How a click was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "plain")]
    Plain,
    #[serde(rename = "perturbed")]
    Perturbed,
    #[serde(rename = "systematic")]
    Systematic,
    #[serde(rename = "systematic+perturbed")]
    SystematicPerturbed,
    #[serde(rename = "human")]
    Human,
}

impl Provenance {
    pub fn is_systematic(self) -> bool {
        matches!(self, Provenance::Systematic | Provenance::SystematicPerturbed)
    }

    pub fn is_perturbed(self) -> bool {
        matches!(self, Provenance::Perturbed | Provenance::SystematicPerturbed)
    }
}

/// One simulated or recorded interaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Click {
    pub voxel: Voxel,
    pub class: ClickClass,
    /// 1-based loop iteration that produced the click.
    pub iteration: u32,
    pub provenance: Provenance,
}

/// Click policy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RobotKind {
    R1,
    R2,
    R3,
    R4,
    #[serde(rename = "Rours")]
    ROurs,
}

/// Full configuration of one robot user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub kind: RobotKind,
    /// Probability of displacing the lesion click; consulted only by `ROurs`.
    #[serde(default)]
    pub p_perturb: f64,
    /// Probability of replacing the lesion click with an uptake-driven one;
    /// consulted only by `ROurs`.
    #[serde(default)]
    pub p_system: f64,
    /// Maximal per-axis perturbation amplitude in voxels.
    #[serde(default)]
    pub amplitude: u32,
    pub seed: u64,
}

impl RobotConfig {
    pub fn new(kind: RobotKind, seed: u64) -> Self {
        RobotConfig { kind, p_perturb: 0.0, p_system: 0.0, amplitude: 0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_perturb", self.p_perturb), ("p_system", self.p_system)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Who produced a click log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserKind {
    Robot,
    Human,
}

/// A complete interaction session: the ordered clicks for one image and one
/// user plus the Dice value after every iteration (`dice[0]` is the
/// pre-click baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct ClickLog {
    pub image_id: String,
    pub user_id: String,
    pub user_kind: UserKind,
    pub clicks: Vec<Click>,
    pub dice: Vec<f64>,
}

impl ClickLog {
    pub fn clicks_of_class(&self, class: ClickClass) -> impl Iterator<Item = &Click> {
        self.clicks.iter().filter(move |c| c.class == class)
    }

    /// Structural checks shared by the simulator and the log reader.
    pub fn validate(&self) -> Result<()> {
        for class in [ClickClass::Lesion, ClickClass::Background] {
            let mut last = 0u32;
            for c in self.clicks_of_class(class) {
                if c.iteration <= last {
                    return Err(Error::Config(format!(
                        "click iterations must strictly increase per class; saw {} after {last}",
                        c.iteration
                    )));
                }
                last = c.iteration;
            }
        }
        if let Some(bad) = self.dice.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::Config(format!("dice value {bad} outside [0,1]")));
        }
        Ok(())
    }
}

fn center_click(mask: &BinaryVolume, connectivity: Connectivity) -> Option<Voxel> {
    if mask.is_mask_empty() {
        return None;
    }
    let comp = largest_component(mask, connectivity).expect("non-empty mask");
    Some(component_center(&comp, mask))
}

/// Center-click policy: the interior center of the largest label component
/// on the first iteration, of the largest per-class error component after.
pub fn r1_next(
    label: &BinaryVolume,
    prev_under: &BinaryVolume,
    prev_over: &BinaryVolume,
    iteration: u32,
    connectivity: Connectivity,
) -> Result<(Option<Click>, Option<Click>)> {
    let lesion_voxel = if iteration == 1 {
        if label.is_mask_empty() {
            return Err(Error::EmptyMask("label has no foreground"));
        }
        center_click(label, connectivity)
    } else {
        center_click(prev_under, connectivity)
    };
    let background_voxel =
        if iteration == 1 { None } else { center_click(prev_over, connectivity) };
    Ok((
        lesion_voxel.map(|voxel| Click {
            voxel,
            class: ClickClass::Lesion,
            iteration,
            provenance: Provenance::Plain,
        }),
        background_voxel.map(|voxel| Click {
            voxel,
            class: ClickClass::Background,
            iteration,
            provenance: Provenance::Plain,
        }),
    ))
}

/// Weighted draw from `weights` restricted to the foreground of `region`;
/// falls back to a uniform draw over the region when the restricted mass
/// vanishes (degenerate uncertainty maps).
fn sample_restricted(
    weights: &ScalarVolume,
    region: &BinaryVolume,
    rng: &mut RngStream,
) -> Result<Voxel> {
    let mut restricted = ScalarVolume::zeros(region.dims());
    let mut mass = 0.0f64;
    for (i, o) in restricted.data_mut().iter_mut().enumerate() {
        if region.data()[i] == 1 {
            *o = weights.data()[i];
            mass += weights.data()[i] as f64;
        }
    }
    if mass > 0.0 {
        sample_weighted(&restricted, rng)
    } else {
        sample_uniform(region, rng)
    }
}

/// Uncertainty-sampling policy: uniform over the label first, then draws
/// from the model uncertainty restricted to the per-class error region.
pub fn r2_next(
    label: &BinaryVolume,
    uncertainty: Option<&ScalarVolume>,
    prev_under: &BinaryVolume,
    prev_over: &BinaryVolume,
    iteration: u32,
    rng_lesion: &mut RngStream,
    rng_background: &mut RngStream,
) -> Result<(Option<Click>, Option<Click>)> {
    if iteration == 1 {
        let voxel = sample_uniform(label, rng_lesion)?;
        return Ok((
            Some(Click {
                voxel,
                class: ClickClass::Lesion,
                iteration,
                provenance: Provenance::Plain,
            }),
            None,
        ));
    }
    let unc = uncertainty.ok_or(Error::UncertaintyUnsupported)?;
    let lesion = if prev_under.is_mask_empty() {
        None
    } else {
        Some(sample_restricted(unc, prev_under, rng_lesion)?)
    };
    let background = if prev_over.is_mask_empty() {
        None
    } else {
        Some(sample_restricted(unc, prev_over, rng_background)?)
    };
    Ok((
        lesion.map(|voxel| Click {
            voxel,
            class: ClickClass::Lesion,
            iteration,
            provenance: Provenance::Plain,
        }),
        background.map(|voxel| Click {
            voxel,
            class: ClickClass::Background,
            iteration,
            provenance: Provenance::Plain,
        }),
    ))
}

/// Distance-transform policy: clicks drawn with probability proportional to
/// the normalized distance transform of the per-class error region, so
/// interior error voxels are favoured.
pub fn r3_next(
    label: &BinaryVolume,
    prev_under: &BinaryVolume,
    prev_over: &BinaryVolume,
    iteration: u32,
    rng_lesion: &mut RngStream,
    rng_background: &mut RngStream,
) -> Result<(Option<Click>, Option<Click>)> {
    if iteration == 1 {
        let voxel = sample_uniform(label, rng_lesion)?;
        return Ok((
            Some(Click {
                voxel,
                class: ClickClass::Lesion,
                iteration,
                provenance: Provenance::Plain,
            }),
            None,
        ));
    }
    let draw = |mask: &BinaryVolume, rng: &mut RngStream| -> Result<Option<Voxel>> {
        if mask.is_mask_empty() {
            return Ok(None);
        }
        Ok(Some(sample_weighted(&edt(mask), rng)?))
    };
    let lesion = draw(prev_under, rng_lesion)?;
    let background = draw(prev_over, rng_background)?;
    Ok((
        lesion.map(|voxel| Click {
            voxel,
            class: ClickClass::Lesion,
            iteration,
            provenance: Provenance::Plain,
        }),
        background.map(|voxel| Click {
            voxel,
            class: ClickClass::Background,
            iteration,
            provenance: Provenance::Plain,
        }),
    ))
}

/// Uniform policy: clicks drawn uniformly from the per-class error region.
pub fn r4_next(
    label: &BinaryVolume,
    prev_under: &BinaryVolume,
    prev_over: &BinaryVolume,
    iteration: u32,
    rng_lesion: &mut RngStream,
    rng_background: &mut RngStream,
) -> Result<(Option<Click>, Option<Click>)> {
    if iteration == 1 {
        let voxel = sample_uniform(label, rng_lesion)?;
        return Ok((
            Some(Click {
                voxel,
                class: ClickClass::Lesion,
                iteration,
                provenance: Provenance::Plain,
            }),
            None,
        ));
    }
    let draw = |mask: &BinaryVolume, rng: &mut RngStream| -> Result<Option<Voxel>> {
        if mask.is_mask_empty() {
            return Ok(None);
        }
        Ok(Some(sample_uniform(mask, rng)?))
    };
    let lesion = draw(prev_under, rng_lesion)?;
    let background = draw(prev_over, rng_background)?;
    Ok((
        lesion.map(|voxel| Click {
            voxel,
            class: ClickClass::Lesion,
            iteration,
            provenance: Provenance::Plain,
        }),
        background.map(|voxel| Click {
            voxel,
            class: ClickClass::Background,
            iteration,
            provenance: Provenance::Plain,
        }),
    ))
}

/// Human-factor policy built on the center-click rule.
///
/// Per iteration two probabilities are drawn for the lesion click: with
/// `p_system` the click is replaced by a draw over normalized uptake
/// outside the label, and with `p_perturb` it is displaced by a uniform
/// offset from `[-a, a]^3`. The two gates are independent, so both can fire
/// at once. Background clicks follow the center-click rule unchanged: only
/// lesion clicks carry the non-conformity signal the behaviour metrics
/// measure.
///
/// `uptake_weights` is `suv_weights(image, label)`, precomputed once per
/// session. The probability draws happen every iteration, even when the
/// base click is omitted, so the stream position depends only on the
/// iteration count.
pub fn r_ours_next(
    uptake_weights: &ScalarVolume,
    label: &BinaryVolume,
    prev_under: &BinaryVolume,
    prev_over: &BinaryVolume,
    iteration: u32,
    cfg: &RobotConfig,
    rng_lesion: &mut RngStream,
    connectivity: Connectivity,
) -> Result<(Option<Click>, Option<Click>)> {
    let (base_lesion, background) =
        r1_next(label, prev_under, prev_over, iteration, connectivity)?;

    let p1 = rng_lesion.gen_f64();
    let p2 = rng_lesion.gen_f64();
    let perturbed = p1 < cfg.p_perturb;
    let systematic = p2 < cfg.p_system;

    let dims = label.dims();
    let lesion = if systematic {
        let s = sample_weighted(uptake_weights, rng_lesion)?;
        let (voxel, provenance) = if perturbed {
            (perturb(s, cfg.amplitude, dims, rng_lesion), Provenance::SystematicPerturbed)
        } else {
            (s, Provenance::Systematic)
        };
        Some(Click { voxel, class: ClickClass::Lesion, iteration, provenance })
    } else {
        base_lesion.map(|base| {
            if perturbed {
                Click {
                    voxel: perturb(base.voxel, cfg.amplitude, dims, rng_lesion),
                    provenance: Provenance::Perturbed,
                    ..base
                }
            } else {
                base
            }
        })
    };
    Ok((lesion, background))
}

/// Runs the full interactive loop: predict, derive the per-class error,
/// click, re-predict, record Dice. Returns the complete log.
///
/// Deterministic given (image, label, predictor state, config, ids): the
/// per-class random streams are derived from `cfg.seed`, `image_id`,
/// `user_id`.
pub fn run_session(
    image: &ScalarVolume,
    label: &BinaryVolume,
    predictor: &mut dyn Predictor,
    cfg: &RobotConfig,
    n_iter: u32,
    image_id: &str,
    user_id: &str,
    connectivity: Connectivity,
) -> Result<ClickLog> {
    cfg.validate()?;
    if image.dims() != label.dims() {
        return Err(Error::DimMismatch(image.dims(), label.dims()));
    }
    if label.is_mask_empty() {
        return Err(Error::EmptyMask("label has no foreground"));
    }
    if cfg.kind == RobotKind::R2 && predictor.uncertainty(image, &[])?.is_none() {
        return Err(Error::UncertaintyUnsupported);
    }
    let uptake = if cfg.kind == RobotKind::ROurs {
        let weights = suv_weights(image, label)?;
        if cfg.p_system > 0.0 && weights.data().iter().all(|&w| w == 0.0) {
            return Err(Error::Config(
                "p_system > 0 but the image has no uptake outside the label".into(),
            ));
        }
        Some(weights)
    } else {
        None
    };

    let mut rng_lesion = RngStream::for_task(cfg.seed, image_id, user_id, ClickClass::Lesion);
    let mut rng_background =
        RngStream::for_task(cfg.seed, image_id, user_id, ClickClass::Background);

    let mut clicks: Vec<Click> = Vec::new();
    let mut pred = predictor.predict(image, &clicks)?;
    if pred.dims() != image.dims() {
        return Err(Error::InvalidVolume(format!(
            "predictor returned dims {} for image dims {}",
            pred.dims(),
            image.dims()
        )));
    }
    let mut dice_curve = vec![dice(&pred, label)?];

    for iteration in 1..=n_iter {
        let (under, over) = error_masks(&pred, label)?;
        let (lesion, background) = match cfg.kind {
            RobotKind::R1 => r1_next(label, &under, &over, iteration, connectivity)?,
            RobotKind::R2 => {
                let unc = if iteration > 1 {
                    predictor.uncertainty(image, &clicks)?
                } else {
                    None
                };
                r2_next(
                    label,
                    unc.as_ref(),
                    &under,
                    &over,
                    iteration,
                    &mut rng_lesion,
                    &mut rng_background,
                )?
            }
            RobotKind::R3 => {
                r3_next(label, &under, &over, iteration, &mut rng_lesion, &mut rng_background)?
            }
            RobotKind::R4 => {
                r4_next(label, &under, &over, iteration, &mut rng_lesion, &mut rng_background)?
            }
            RobotKind::ROurs => r_ours_next(
                uptake.as_ref().expect("uptake weights prepared for ROurs"),
                label,
                &under,
                &over,
                iteration,
                cfg,
                &mut rng_lesion,
                connectivity,
            )?,
        };
        clicks.extend(lesion);
        clicks.extend(background);
        pred = predictor.predict(image, &clicks)?;
        dice_curve.push(dice(&pred, label)?);
    }

    let log = ClickLog {
        image_id: image_id.to_string(),
        user_id: user_id.to_string(),
        user_kind: UserKind::Robot,
        clicks,
        dice: dice_curve,
    };
    log.validate()?;
    Ok(log)
}
