//! Virtual-angle coordinates for a square UPA.
//!
//! A direction `(az, el)` maps to
//! `ψx = π (d/λ) N cos(el) sin(az)`, `ψy = π (d/λ) N sin(el)`.
//! In these coordinates the magnitude of the unquantized array gain
//! separates into one kernel per axis, `ι(Δψx, N) · ι(Δψy, N)`, and the
//! half-power beamwidth is close to 2.8 regardless of `N`.

use crate::arrays::{array_response, quantize_weights, Angle, QuantizerConfig, UpaGeometry, WeightVector};
use crate::error::{Error, Result};

/// Slack allowed on arcsin arguments before a point counts as infeasible.
const ARCSIN_TOLERANCE: f64 = 1e-9;

/// Below this `|γ|` the kernel is evaluated from its Taylor series.
const SMALL_GAMMA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VirtualAngle {
    pub psi_x: f64,
    pub psi_y: f64,
}

impl VirtualAngle {
    pub fn new(psi_x: f64, psi_y: f64) -> Self {
        Self { psi_x, psi_y }
    }

    pub fn norm(&self) -> f64 {
        self.psi_x.hypot(self.psi_y)
    }

    /// `ψx² + ψy² ≤ (π (d/λ) N)²`, boundary included.
    pub fn is_feasible(&self, geom: &UpaGeometry) -> bool {
        let r = geom.virtual_radius();
        self.psi_x * self.psi_x + self.psi_y * self.psi_y <= r * r
    }

    /// Radial projection onto the feasible disc; feasible points are returned
    /// unchanged.
    pub fn project_feasible(&self, geom: &UpaGeometry) -> Self {
        if self.is_feasible(geom) {
            return *self;
        }
        let scale = geom.virtual_radius() / self.norm();
        Self {
            psi_x: self.psi_x * scale,
            psi_y: self.psi_y * scale,
        }
    }

    /// Largest-magnitude component difference.
    pub fn max_abs_diff(&self, other: &VirtualAngle) -> f64 {
        (self.psi_x - other.psi_x)
            .abs()
            .max((self.psi_y - other.psi_y).abs())
    }
}

impl std::ops::Add for VirtualAngle {
    type Output = VirtualAngle;
    fn add(self, rhs: VirtualAngle) -> VirtualAngle {
        VirtualAngle::new(self.psi_x + rhs.psi_x, self.psi_y + rhs.psi_y)
    }
}

impl std::ops::Sub for VirtualAngle {
    type Output = VirtualAngle;
    fn sub(self, rhs: VirtualAngle) -> VirtualAngle {
        VirtualAngle::new(self.psi_x - rhs.psi_x, self.psi_y - rhs.psi_y)
    }
}

pub fn to_virtual(geom: &UpaGeometry, angle: &Angle) -> VirtualAngle {
    let r = geom.virtual_radius();
    VirtualAngle {
        psi_x: r * angle.elevation.cos() * angle.azimuth.sin(),
        psi_y: r * angle.elevation.sin(),
    }
}

/// Inverse of [`to_virtual`] on the feasible disc.
pub fn from_virtual(geom: &UpaGeometry, psi: &VirtualAngle) -> Result<Angle> {
    let r = geom.virtual_radius();
    let infeasible = |reason| Error::InfeasibleAngle {
        psi_x: psi.psi_x,
        psi_y: psi.psi_y,
        reason,
    };
    if !(psi.psi_x.is_finite() && psi.psi_y.is_finite()) {
        return Err(infeasible("non-finite component"));
    }

    let sin_el = clamp_unit(psi.psi_y / r).ok_or_else(|| infeasible("|psi_y| exceeds the array radius"))?;
    let elevation = sin_el.asin();

    let denom = r * elevation.cos();
    let sin_az = if denom == 0.0 {
        // Zenith: azimuth is undetermined, so only psi_x = 0 is consistent.
        if psi.psi_x.abs() <= ARCSIN_TOLERANCE * r {
            0.0
        } else {
            return Err(infeasible("psi_x nonzero at elevation +-pi/2"));
        }
    } else {
        clamp_unit(psi.psi_x / denom).ok_or_else(|| infeasible("outside the feasible disc"))?
    };

    Ok(Angle {
        azimuth: sin_az.asin(),
        elevation,
    })
}

fn clamp_unit(x: f64) -> Option<f64> {
    if x.abs() <= 1.0 {
        Some(x)
    } else if x.abs() <= 1.0 + ARCSIN_TOLERANCE {
        Some(x.signum())
    } else {
        None
    }
}

/// One-axis pattern kernel `ι(γ, n) = sin(γ) / (n sin(γ/n))`.
///
/// The removable singularities are filled in by their limits, so
/// `iota(0, n) == 1`.
pub fn iota(gamma: f64, n: usize) -> f64 {
    assert!(n >= 1, "iota: n must be positive");
    if n == 1 {
        return 1.0;
    }
    let nf = n as f64;
    if gamma.abs() < SMALL_GAMMA {
        return 1.0 - gamma * gamma * (1.0 - 1.0 / (nf * nf)) / 6.0;
    }
    let inner = (gamma / nf).sin();
    if inner.abs() < 1e-8 {
        // γ near a nonzero multiple of nπ: both sines vanish together.
        return gamma.cos() / (gamma / nf).cos();
    }
    gamma.sin() / (nf * inner)
}

/// Magnitude of the array gain of a beam steered to `psi_beam` toward a
/// plane wave arriving from `psi_arrival`, using the separable kernel.
pub fn pattern_gain(psi_beam: &VirtualAngle, psi_arrival: &VirtualAngle, geom: &UpaGeometry) -> f64 {
    let n = geom.side();
    (iota(psi_beam.psi_x - psi_arrival.psi_x, n) * iota(psi_beam.psi_y - psi_arrival.psi_y, n)).abs()
}

/// Quantized steering weights for a virtual-angle beam focus.
pub fn weights_from_virtual(geom: &UpaGeometry, psi: &VirtualAngle, q: QuantizerConfig) -> Result<WeightVector> {
    let angle = from_virtual(geom, psi)?;
    Ok(quantize_weights(&array_response(geom, &angle), q))
}
