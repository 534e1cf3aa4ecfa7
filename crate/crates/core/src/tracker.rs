//! Beampattern-based AoA tracking.
//!
//! Each alignment trains the current beam plus four probes displaced by
//! `±step` along the virtual azimuth and virtual elevation axes. The gain
//! of a probe relative to the current beam is `ι(γ + Δ, N) / ι(γ, N)`,
//! where `γ` is the virtual offset of the current beam from the AoA. That
//! ratio is strictly monotone in `γ` over the main lobe, so each measured
//! ratio is inverted by bisection and the beam is moved by the recovered
//! offset. Five training symbols are consumed per alignment.

use std::f64::consts::PI;

use rand::Rng;

use crate::arrays::{quantized_response, Angle, QuantizerConfig, UpaGeometry, WeightVector};
use crate::channel::GainEstimate;
use crate::error::{Error, Result};
use crate::training::Trainer;
use crate::virtual_angle::{from_virtual, iota, to_virtual, weights_from_virtual, VirtualAngle};

/// Default probe displacement in virtual-angle units (a quarter of the
/// half-power beamwidth).
pub const DEFAULT_STEP: f64 = 0.7;

/// Number of times a probe offset is halved before falling back to the
/// largest feasible offset along its axis.
const MAX_HALVINGS: usize = 6;

/// Kernel values below this are treated as an exact null.
const SINGULAR_KERNEL: f64 = 1e-12;

const BISECTION_WIDTH: f64 = 1e-13;
const BISECTION_MAX_ITERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub geom: UpaGeometry,
    pub quant: QuantizerConfig,
    pub step: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            geom: UpaGeometry::default_ms(),
            quant: QuantizerConfig::default(),
            step: DEFAULT_STEP,
        }
    }
}

/// Current MS beam: focus angle, its virtual coordinates and the quantized
/// weights loaded into the phase shifters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub beam_angle: Angle,
    pub beam_virtual: VirtualAngle,
    pub weights: WeightVector,
    pub block_index: usize,
}

impl TrackerState {
    pub fn new(geom: &UpaGeometry, beam_angle: Angle, quant: QuantizerConfig) -> Self {
        Self {
            beam_angle,
            beam_virtual: to_virtual(geom, &beam_angle),
            weights: quantized_response(geom, &beam_angle, quant),
            block_index: 0,
        }
    }

    /// State steered to a virtual-angle focus. The block index is left at 0.
    pub fn from_virtual(geom: &UpaGeometry, psi: VirtualAngle, quant: QuantizerConfig) -> Result<Self> {
        let beam_angle = from_virtual(geom, &psi)?;
        Ok(Self {
            beam_angle,
            beam_virtual: psi,
            weights: quantized_response(geom, &beam_angle, quant),
            block_index: 0,
        })
    }
}

/// The four probes: `+x`, `-x`, `+y`, `-y` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet {
    pub deltas: [VirtualAngle; 4],
    pub perturbed_virtual: [VirtualAngle; 4],
    pub perturbed_weights: [WeightVector; 4],
}

impl PerturbationSet {
    /// Signed displacement of probe `k` along its own axis.
    pub fn axis_delta(&self, k: usize) -> f64 {
        if k < 2 {
            self.deltas[k].psi_x
        } else {
            self.deltas[k].psi_y
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioObservation {
    pub original_gain: GainEstimate,
    pub perturbed_gains: [GainEstimate; 4],
    pub ratios: [f64; 4],
}

impl RatioObservation {
    /// Forms `|η̂_probe| / |η̂_original|` for each probe.
    ///
    /// A zero original estimate (possible only without noise) maps to ratio
    /// 1 when the probe is also zero and to `f64::MAX` otherwise, so every
    /// ratio stays finite.
    pub fn new(original_gain: GainEstimate, perturbed_gains: [GainEstimate; 4]) -> Self {
        let den = original_gain.value.norm();
        let ratios = perturbed_gains.map(|g| {
            let num = g.value.norm();
            if den > 0.0 {
                (num / den).min(f64::MAX)
            } else if num > 0.0 {
                f64::MAX
            } else {
                1.0
            }
        });
        Self {
            original_gain,
            perturbed_gains,
            ratios,
        }
    }
}

/// Builds the four probe beams around `state.beam_virtual`.
///
/// A probe that would leave the feasible virtual-angle disc has its offset
/// halved, up to six times. If it is still infeasible the offset is cut to
/// the distance to the disc edge along that axis, which may be zero for a
/// beam sitting on the edge.
pub fn design_perturbations(
    state: &TrackerState,
    step: f64,
    geom: &UpaGeometry,
    q: QuantizerConfig,
) -> Result<PerturbationSet> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", format!("must be positive and finite, got {step}")));
    }
    let beam = state.beam_virtual;
    if !beam.is_feasible(geom) {
        return Err(Error::InvalidState(format!(
            "beam virtual angle [{}, {}] is outside the feasible disc",
            beam.psi_x, beam.psi_y
        )));
    }

    let r = geom.virtual_radius();
    let axis_offset = |along_x: bool, sign: f64| -> VirtualAngle {
        let make = |d: f64| {
            if along_x {
                VirtualAngle::new(d, 0.0)
            } else {
                VirtualAngle::new(0.0, d)
            }
        };
        let mut d = sign * step;
        for _ in 0..=MAX_HALVINGS {
            if (beam + make(d)).is_feasible(geom) {
                return make(d);
            }
            d *= 0.5;
        }
        let (along, across) = if along_x {
            (beam.psi_x, beam.psi_y)
        } else {
            (beam.psi_y, beam.psi_x)
        };
        let reach = ((r * r - across * across).max(0.0).sqrt() - sign * along).max(0.0);
        make(sign * reach)
    };

    let deltas = [
        axis_offset(true, 1.0),
        axis_offset(true, -1.0),
        axis_offset(false, 1.0),
        axis_offset(false, -1.0),
    ];
    let perturbed_virtual = deltas.map(|d| (beam + d).project_feasible(geom));
    let perturbed_weights = [
        weights_from_virtual(geom, &perturbed_virtual[0], q)?,
        weights_from_virtual(geom, &perturbed_virtual[1], q)?,
        weights_from_virtual(geom, &perturbed_virtual[2], q)?,
        weights_from_virtual(geom, &perturbed_virtual[3], q)?,
    ];
    Ok(PerturbationSet {
        deltas,
        perturbed_virtual,
        perturbed_weights,
    })
}

/// Noiseless probe-to-original gain ratio `ι(γ + Δ, n) / ι(γ, n)`.
pub fn gain_ratio_equation(gamma: f64, delta: f64, n: usize) -> Result<f64> {
    let base = iota(gamma, n);
    if base.abs() < SINGULAR_KERNEL {
        return Err(Error::SingularRatio { gamma });
    }
    Ok(iota(gamma + delta, n) / base)
}

/// Inverts [`gain_ratio_equation`] for `γ` on `[-π + |Δ|, π - |Δ|]`.
///
/// On that interval the ratio decreases in `γ` for `Δ > 0` and increases
/// for `Δ < 0`. Ratios outside the attainable range (noise) return the
/// endpoint with the smallest residual.
pub fn solve_offset(ratio: f64, delta: f64, n: usize) -> Result<f64> {
    if !ratio.is_finite() {
        return Err(Error::invalid("ratio", format!("must be finite, got {ratio}")));
    }
    if !(delta.is_finite() && delta != 0.0 && delta.abs() < PI) {
        return Err(Error::invalid("delta", format!("must be nonzero with |delta| < pi, got {delta}")));
    }
    if n < 2 {
        return Err(Error::invalid("n", "the pattern is flat for a single element"));
    }

    let lo = -PI + delta.abs();
    let hi = PI - delta.abs();
    let f = |g: f64| gain_ratio_equation(g, delta, n);
    let decreasing = delta > 0.0;

    // `top` is where the ratio is largest, `bottom` where it is smallest.
    let (top, bottom) = if decreasing { (lo, hi) } else { (hi, lo) };
    if ratio >= f(top)? {
        return Ok(top);
    }
    if ratio <= f(bottom)? {
        return Ok(bottom);
    }

    let (mut a, mut b) = (lo, hi);
    for _ in 0..BISECTION_MAX_ITERS {
        if b - a < BISECTION_WIDTH {
            break;
        }
        let mid = 0.5 * (a + b);
        if (f(mid)? > ratio) == decreasing {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Picks the stronger probe on each axis and converts its ratio into a
/// virtual-angle offset `beam - AoA`.
///
/// Ties go to the positive probe. Probes whose offset collapsed to zero at
/// the disc edge carry no information and are skipped; if both probes on an
/// axis are unusable that axis reports zero offset.
pub fn estimate_virtual_offset(
    obs: &RatioObservation,
    pert: &PerturbationSet,
    n_side: usize,
) -> Result<VirtualAngle> {
    let axis = |first: usize| -> Result<f64> {
        let mut best: Option<usize> = None;
        for k in [first, first + 1] {
            if pert.axis_delta(k) == 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => obs.perturbed_gains[k].value.norm() > obs.perturbed_gains[b].value.norm(),
            };
            if better {
                best = Some(k);
            }
        }
        match best {
            Some(k) => solve_offset(obs.ratios[k], pert.axis_delta(k), n_side),
            None => Ok(0.0),
        }
    };
    Ok(VirtualAngle::new(axis(0)?, axis(2)?))
}

/// One MS beam alignment: original training, four probe trainings, ratio
/// inversion and beam update.
pub fn tracking_step<R: Rng + ?Sized>(
    state: &TrackerState,
    trainer: &mut Trainer<'_, R>,
    cfg: &TrackerConfig,
) -> Result<TrackerState> {
    let original = trainer.train(&state.weights)?;
    let pert = design_perturbations(state, cfg.step, &cfg.geom, cfg.quant)?;
    let perturbed = [
        trainer.train(&pert.perturbed_weights[0])?,
        trainer.train(&pert.perturbed_weights[1])?,
        trainer.train(&pert.perturbed_weights[2])?,
        trainer.train(&pert.perturbed_weights[3])?,
    ];
    let obs = RatioObservation::new(original, perturbed);
    let offset = estimate_virtual_offset(&obs, &pert, cfg.geom.side())?;

    let updated = (state.beam_virtual - offset).project_feasible(&cfg.geom);
    let mut next = TrackerState::from_virtual(&cfg.geom, updated, cfg.quant)?;
    next.block_index = state.block_index + 1;
    Ok(next)
}
