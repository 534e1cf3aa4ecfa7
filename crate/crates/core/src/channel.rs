//! Geometric multipath channel, pilot reception and gain estimation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::arrays::{combined_gain, Angle, UpaGeometry, WeightVector};
use crate::error::{Error, Result};

/// One propagation path: complex gain plus departure/arrival directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gain: Complex64,
    pub aod: Angle,
    pub aoa: Angle,
}

/// Instantaneous channel `H = Σ g_k a_R(aoa_k) a_Tᴴ(aod_k)`.
///
/// Path 0 is the tracked path.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    paths: Vec<PathParams>,
    tx_geom: UpaGeometry,
    rx_geom: UpaGeometry,
}

impl ChannelSnapshot {
    pub fn new(paths: Vec<PathParams>, tx_geom: UpaGeometry, rx_geom: UpaGeometry) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("paths", "a channel needs at least one path"));
        }
        for p in &paths {
            if !p.aod.in_front_hemisphere() || !p.aoa.in_front_hemisphere() {
                return Err(Error::invalid("paths", format!("path angles out of range: {p:?}")));
            }
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(Error::invalid("paths", "path gain must be finite"));
            }
        }
        Ok(Self {
            paths,
            tx_geom,
            rx_geom,
        })
    }

    pub fn paths(&self) -> &[PathParams] {
        &self.paths
    }

    pub fn tracked(&self) -> &PathParams {
        &self.paths[0]
    }

    pub fn tx_geom(&self) -> &UpaGeometry {
        &self.tx_geom
    }

    pub fn rx_geom(&self) -> &UpaGeometry {
        &self.rx_geom
    }

    /// Same channel restricted to the tracked path.
    pub fn tracked_only(&self) -> ChannelSnapshot {
        ChannelSnapshot {
            paths: vec![self.paths[0]],
            tx_geom: self.tx_geom,
            rx_geom: self.rx_geom,
        }
    }
}

/// Pilot layout and noise level of one training OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSignal {
    num_subcarriers: usize,
    pilot_indices: Vec<usize>,
    pilot_symbols: Vec<Complex64>,
    noise_std: f64,
}

impl TrainingSignal {
    pub fn new(
        num_subcarriers: usize,
        pilot_indices: Vec<usize>,
        pilot_symbols: Vec<Complex64>,
        noise_std: f64,
    ) -> Result<Self> {
        if pilot_indices.is_empty() {
            return Err(Error::EmptyPilots);
        }
        if pilot_indices.len() != pilot_symbols.len() {
            return Err(Error::DimensionMismatch {
                expected: pilot_indices.len(),
                actual: pilot_symbols.len(),
            });
        }
        let mut seen = vec![false; num_subcarriers];
        for &f in &pilot_indices {
            if f >= num_subcarriers {
                return Err(Error::invalid("pilot_indices", format!("subcarrier {f} >= {num_subcarriers}")));
            }
            if std::mem::replace(&mut seen[f], true) {
                return Err(Error::invalid("pilot_indices", format!("subcarrier {f} repeated")));
            }
        }
        if pilot_symbols.iter().any(|s| (s.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::invalid("pilot_symbols", "pilots must have unit magnitude"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::invalid("noise_std", format!("must be finite and >= 0, got {noise_std}")));
        }
        Ok(Self {
            num_subcarriers,
            pilot_indices,
            pilot_symbols,
            noise_std,
        })
    }

    /// `num_pilots` all-ones pilots spaced evenly (every `F / num_pilots`-th
    /// subcarrier, starting at 0).
    pub fn evenly_spaced(num_subcarriers: usize, num_pilots: usize, noise_std: f64) -> Result<Self> {
        if num_pilots == 0 {
            return Err(Error::EmptyPilots);
        }
        if num_pilots > num_subcarriers {
            return Err(Error::invalid(
                "num_pilots",
                format!("{num_pilots} pilots do not fit in {num_subcarriers} subcarriers"),
            ));
        }
        let stride = num_subcarriers / num_pilots;
        let indices = (0..num_pilots).map(|k| k * stride).collect();
        Self::new(
            num_subcarriers,
            indices,
            vec![Complex64::new(1.0, 0.0); num_pilots],
            noise_std,
        )
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn pilot_indices(&self) -> &[usize] {
        &self.pilot_indices
    }

    pub fn pilot_symbols(&self) -> &[Complex64] {
        &self.pilot_symbols
    }

    pub fn num_pilots(&self) -> usize {
        self.pilot_symbols.len()
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_std * self.noise_std
    }
}

impl Default for TrainingSignal {
    /// 2048 subcarriers, 341 unit pilots, unit noise variance.
    fn default() -> Self {
        Self::evenly_spaced(2048, 341, 1.0).expect("default pilot layout is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate {
    pub value: Complex64,
    pub num_pilots_used: usize,
}

/// Circularly-symmetric complex Gaussian sample with total variance `var`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Received pilots `r(f) = η s(f) + z(f)` for one training symbol, with
/// `η = rx_wᴴ H tx_w` and `z` of variance `σ² ‖rx_w‖²`.
pub fn simulate_training<R: Rng + ?Sized>(
    chan: &ChannelSnapshot,
    tx_w: &WeightVector,
    rx_w: &WeightVector,
    sig: &TrainingSignal,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let eta = combined_gain(rx_w, tx_w, chan)?;
    let var = sig.noise_var() * rx_w.norm_sqr();
    Ok(sig
        .pilot_symbols()
        .iter()
        .map(|&s| {
            let z = if var > 0.0 {
                complex_gaussian(rng, var)
            } else {
                Complex64::new(0.0, 0.0)
            };
            eta * s + z
        })
        .collect())
}

/// Maximum-likelihood estimate of a flat gain from pilot observations:
/// `Σ s*(f) r(f) / Σ |s(f)|²`.
pub fn estimate_gain(received: &[Complex64], sig: &TrainingSignal) -> Result<GainEstimate> {
    if received.is_empty() || sig.num_pilots() == 0 {
        return Err(Error::EmptyPilots);
    }
    if received.len() != sig.num_pilots() {
        return Err(Error::DimensionMismatch {
            expected: sig.num_pilots(),
            actual: received.len(),
        });
    }
    let (num, den) = sig
        .pilot_symbols()
        .iter()
        .zip(received)
        .fold((Complex64::new(0.0, 0.0), 0.0), |(num, den), (s, r)| {
            (num + s.conj() * r, den + s.norm_sqr())
        });
    Ok(GainEstimate {
        value: num / den,
        num_pilots_used: received.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::{array_response, quantized_response, QuantizerConfig};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn los() -> PathParams {
        PathParams {
            gain: Complex64::new(1.5, -0.4),
            aod: Angle::new(0.1244, -0.1235).unwrap(),
            aoa: Angle::new(-0.7483, 0.1235).unwrap(),
        }
    }

    fn chan(paths: Vec<PathParams>) -> ChannelSnapshot {
        ChannelSnapshot::new(paths, UpaGeometry::default_bs(), UpaGeometry::default_ms()).unwrap()
    }

    #[test]
    fn default_pilot_layout() {
        let sig = TrainingSignal::default();
        assert_eq!(sig.num_subcarriers(), 2048);
        assert_eq!(sig.num_pilots(), 341);
        assert_eq!(sig.pilot_indices()[1], 6);
        assert_eq!(*sig.pilot_indices().last().unwrap(), 340 * 6);
        assert_eq!(sig.noise_var(), 1.0);
    }

    #[test]
    fn signal_validation() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(TrainingSignal::new(8, vec![], vec![], 1.0), Err(Error::EmptyPilots));
        assert!(TrainingSignal::new(8, vec![8], vec![one], 1.0).is_err());
        assert!(TrainingSignal::new(8, vec![1, 1], vec![one, one], 1.0).is_err());
        assert!(TrainingSignal::new(8, vec![1], vec![one * 2.0], 1.0).is_err());
        assert!(TrainingSignal::new(8, vec![1], vec![one], -1.0).is_err());
        assert!(ChannelSnapshot::new(vec![], UpaGeometry::default_bs(), UpaGeometry::default_ms()).is_err());
    }

    #[test]
    fn noiseless_training_is_exact() {
        let c = chan(vec![los()]);
        let sig = TrainingSignal::evenly_spaced(2048, 341, 0.0).unwrap();
        let tx = array_response(c.tx_geom(), &los().aod);
        let rx = array_response(c.rx_geom(), &los().aoa);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = simulate_training(&c, &tx, &rx, &sig, &mut rng).unwrap();
        assert_eq!(r.len(), 341);
        for v in &r {
            assert_abs_diff_eq!(v.re, los().gain.re, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, los().gain.im, epsilon = 1e-12);
        }
        let est = estimate_gain(&r, &sig).unwrap();
        assert_eq!(est.num_pilots_used, 341);
        assert_abs_diff_eq!(est.value.re, los().gain.re, epsilon = 1e-12);
    }

    #[test]
    fn noise_only_variance() {
        let mut zero = los();
        zero.gain = Complex64::new(0.0, 0.0);
        let c = chan(vec![zero]);
        let sig = TrainingSignal::default();
        let q = QuantizerConfig::default();
        let tx = quantized_response(c.tx_geom(), &zero.aod, q);
        let rx = quantized_response(c.rx_geom(), &Angle::new(0.3, 0.2).unwrap(), q);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut total = 0.0;
        let seeds = 20;
        for _ in 0..seeds {
            let r = simulate_training(&c, &tx, &rx, &sig, &mut rng).unwrap();
            let var = r.iter().map(|z| z.norm_sqr()).sum::<f64>() / r.len() as f64;
            assert!((var - 1.0).abs() < 0.2, "per-symbol variance {var}");
            total += var;
        }
        assert!((total / seeds as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn estimator_examples() {
        let sig = TrainingSignal::evenly_spaced(64, 10, 0.0).unwrap();
        let eta = Complex64::new(0.5, 0.2);
        let r = vec![eta; 10];
        let est = estimate_gain(&r, &sig).unwrap().value;
        assert_abs_diff_eq!(est.re, eta.re, epsilon = 1e-15);
        assert_abs_diff_eq!(est.im, eta.im, epsilon = 1e-15);
        assert_eq!(estimate_gain(&[], &sig), Err(Error::EmptyPilots));
        assert!(matches!(
            estimate_gain(&r[..3], &sig),
            Err(Error::DimensionMismatch { .. })
        ));

        // Non-trivial pilots: the estimator removes the pilot phase.
        let pilots: Vec<_> = (0..4).map(|k| Complex64::from_polar(1.0, 0.7 * k as f64)).collect();
        let sig = TrainingSignal::new(16, vec![0, 3, 7, 11], pilots.clone(), 0.0).unwrap();
        let r: Vec<_> = pilots.iter().map(|s| eta * s).collect();
        let est = estimate_gain(&r, &sig).unwrap().value;
        assert_abs_diff_eq!(est.re, eta.re, epsilon = 1e-15);
        assert_abs_diff_eq!(est.im, eta.im, epsilon = 1e-15);
    }

    #[test]
    fn combining_noise_power_is_direction_independent() {
        let q = QuantizerConfig::default();
        for (az, el) in [(0.0, 0.0), (-1.2, 0.4), (0.9, -1.3)] {
            let w = quantized_response(&UpaGeometry::default_ms(), &Angle::new(az, el).unwrap(), q);
            assert_abs_diff_eq!(w.norm_sqr(), 1.0, epsilon = 1e-12);
        }
    }
}
