//! Comparison methods: exhaustive codebook search and nine-beam
//! perturbation tracking.

use std::f64::consts::TAU;

use rand::Rng;

use crate::arrays::{quantize_weights, QuantizerConfig, UpaGeometry, WeightVector};
use crate::error::{Error, Result};
use crate::tracker::TrackerState;
use crate::training::Trainer;
use crate::virtual_angle::VirtualAngle;

pub const DEFAULT_AZIMUTH_CODEWORDS: usize = 16;
pub const DEFAULT_ELEVATION_CODEWORDS: usize = 8;

/// UPA codebook built as the Kronecker product of an azimuth and an
/// elevation ULA generalized-DFT codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codewords: Vec<WeightVector>,
    pub focus_virtuals: Vec<VirtualAngle>,
    pub azimuth_size: usize,
    pub elevation_size: usize,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Virtual-angle spacing of the codeword grid along (x, y).
    pub fn grid_spacing(&self, geom: &UpaGeometry) -> (f64, f64) {
        let r = geom.virtual_radius();
        (
            2.0 * r / self.azimuth_size as f64,
            2.0 * r / self.elevation_size as f64,
        )
    }
}

/// Default 16 × 8 = 128-codeword book.
pub fn build_codebook(geom: &UpaGeometry, q: QuantizerConfig) -> Codebook {
    build_codebook_sized(geom, q, DEFAULT_AZIMUTH_CODEWORDS, DEFAULT_ELEVATION_CODEWORDS)
        .expect("default codebook sizes are nonzero")
}

/// Codeword `(k, l)` applies phase `2π (d/λ) (m u_k + n v_l)` at element
/// `(m, n)` with `u_k = (2k - K + 1) / K` and likewise `v_l`, so the
/// direction cosines sit at the centers of `K` equal cells of `[-1, 1]`.
/// Codewords are stored at index `k * elevation_size + l`.
///
/// Corner codewords may focus outside the feasible virtual-angle disc;
/// they are still valid phase-shifter settings.
pub fn build_codebook_sized(
    geom: &UpaGeometry,
    q: QuantizerConfig,
    azimuth_size: usize,
    elevation_size: usize,
) -> Result<Codebook> {
    if azimuth_size == 0 || elevation_size == 0 {
        return Err(Error::invalid("codebook size", "both dimensions must be nonzero"));
    }
    let side = geom.side();
    let r = geom.virtual_radius();
    let centre = |k: usize, size: usize| (2.0 * k as f64 - size as f64 + 1.0) / size as f64;

    let mut codewords = Vec::with_capacity(azimuth_size * elevation_size);
    let mut focus_virtuals = Vec::with_capacity(azimuth_size * elevation_size);
    for k in 0..azimuth_size {
        let u = centre(k, azimuth_size);
        for l in 0..elevation_size {
            let v = centre(l, elevation_size);
            let mut phases = Vec::with_capacity(side * side);
            for m in 0..side {
                for n in 0..side {
                    phases.push(TAU * geom.spacing_wl() * (m as f64 * u + n as f64 * v));
                }
            }
            let w = WeightVector::from_phases(side, &phases)?;
            codewords.push(quantize_weights(&w, q));
            focus_virtuals.push(VirtualAngle::new(r * u, r * v));
        }
    }
    Ok(Codebook {
        codewords,
        focus_virtuals,
        azimuth_size,
        elevation_size,
    })
}

/// Trains every codeword once and returns the index of the strongest
/// (lowest index on ties).
pub fn codebook_align<R: Rng + ?Sized>(book: &Codebook, trainer: &mut Trainer<'_, R>) -> Result<usize> {
    let mut best = 0;
    let mut best_mag = f64::NEG_INFINITY;
    for (k, w) in book.codewords.iter().enumerate() {
        let mag = trainer.train(w)?.value.norm();
        if mag > best_mag {
            best = k;
            best_mag = mag;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NineBeamConfig {
    /// Spacing `δ` of the 3×3 probe grid in virtual-angle units.
    pub grid_step: f64,
}

impl NineBeamConfig {
    pub fn new(grid_step: f64) -> Result<Self> {
        if !(grid_step > 0.0 && grid_step.is_finite()) {
            return Err(Error::invalid("grid_step", format!("must be positive, got {grid_step}")));
        }
        Ok(Self { grid_step })
    }

    /// Probe offsets, center first.
    pub fn offsets(&self) -> [VirtualAngle; 9] {
        let d = self.grid_step;
        [
            VirtualAngle::new(0.0, 0.0),
            VirtualAngle::new(-d, -d),
            VirtualAngle::new(-d, 0.0),
            VirtualAngle::new(-d, d),
            VirtualAngle::new(0.0, -d),
            VirtualAngle::new(0.0, d),
            VirtualAngle::new(d, -d),
            VirtualAngle::new(d, 0.0),
            VirtualAngle::new(d, d),
        ]
    }
}

impl Default for NineBeamConfig {
    fn default() -> Self {
        Self { grid_step: 0.22 }
    }
}

/// Probes the 3×3 grid `{-δ, 0, δ}²` around the current beam and moves to
/// the strongest probe. Ties keep the center.
pub fn nine_beam_align<R: Rng + ?Sized>(
    cfg: &NineBeamConfig,
    state: &TrackerState,
    trainer: &mut Trainer<'_, R>,
    geom: &UpaGeometry,
    q: QuantizerConfig,
) -> Result<TrackerState> {
    let mut best: Option<(f64, TrackerState)> = None;
    for offset in cfg.offsets() {
        let psi = (state.beam_virtual + offset).project_feasible(geom);
        let probe = TrackerState::from_virtual(geom, psi, q)?;
        let mag = trainer.train(&probe.weights)?.value.norm();
        if best.as_ref().map_or(true, |(m, _)| mag > *m) {
            best = Some((mag, probe));
        }
    }
    let (_, mut next) = best.expect("nine probes were trained");
    next.block_index = state.block_index + 1;
    Ok(next)
}
