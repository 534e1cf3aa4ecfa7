//! Uniform planar array geometry, steering vectors and Q-bit phase
//! quantization.
//!
//! Elements are addressed by `(m, n)` with `m` the horizontal and `n` the
//! vertical index, both in `0..side`. Weight vectors are stored m-major, so
//! element `(m, n)` lives at `m * side + n`. Every inner product in the crate
//! runs over that same order.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;

use crate::channel::ChannelSnapshot;
use crate::error::{Error, Result};

/// Square uniform planar array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaGeometry {
    side: usize,
    spacing_wl: f64,
}

impl UpaGeometry {
    /// `side` elements per edge, spaced `spacing_wl` wavelengths apart.
    pub fn new(side: usize, spacing_wl: f64) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("side", "must be at least 1"));
        }
        if !(spacing_wl > 0.0 && spacing_wl.is_finite()) {
            return Err(Error::invalid(
                "spacing_wl",
                format!("must be positive and finite, got {spacing_wl}"),
            ));
        }
        Ok(Self { side, spacing_wl })
    }

    /// 8×8 half-wavelength array used at the MS.
    pub fn default_ms() -> Self {
        Self {
            side: 8,
            spacing_wl: 0.5,
        }
    }

    /// 16×16 half-wavelength array used at the BS.
    pub fn default_bs() -> Self {
        Self {
            side: 16,
            spacing_wl: 0.5,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing_wl(&self) -> f64 {
        self.spacing_wl
    }

    pub fn num_elements(&self) -> usize {
        self.side * self.side
    }

    /// Phase progression per element per unit direction cosine, `2π d/λ`.
    pub fn phase_constant(&self) -> f64 {
        TAU * self.spacing_wl
    }

    /// Radius of the feasible virtual-angle disc, `π (d/λ) side`.
    pub fn virtual_radius(&self) -> f64 {
        PI * self.spacing_wl * self.side as f64
    }

    pub(crate) fn index(&self, m: usize, n: usize) -> usize {
        m * self.side + n
    }
}

/// Physical direction as (azimuth, elevation) in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Angle {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angle {
    /// Checked constructor; both components must lie in `[-π/2, π/2]`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        let angle = Self { azimuth, elevation };
        if angle.in_front_hemisphere() {
            Ok(angle)
        } else {
            Err(Error::invalid(
                "angle",
                format!("[{azimuth}, {elevation}] outside [-pi/2, pi/2]^2"),
            ))
        }
    }

    pub fn in_front_hemisphere(&self) -> bool {
        (-FRAC_PI_2..=FRAC_PI_2).contains(&self.azimuth)
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&self.elevation)
    }
}

/// Phase-shifter resolution in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizerConfig {
    bits: u32,
}

impl QuantizerConfig {
    pub fn new(bits: u32) -> Result<Self> {
        // 2^bits levels must fit comfortably in the grid index arithmetic.
        if !(1..=24).contains(&bits) {
            return Err(Error::invalid("bits", format!("must be in 1..=24, got {bits}")));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }

    /// Spacing of the phase grid, `2π / 2^Q`.
    pub fn step(&self) -> f64 {
        TAU / self.levels() as f64
    }

    /// Index of the grid point closest to `phase` on the circle.
    ///
    /// The phase is wrapped into `[0, 2π)` first. An exact midpoint between
    /// two levels resolves to the smaller index.
    pub fn nearest_level(&self, phase: f64) -> u64 {
        let levels = self.levels();
        let x = phase.rem_euclid(TAU) / self.step();
        let k = (x - 0.5).ceil() as i64;
        k.rem_euclid(levels as i64) as u64
    }

    pub fn level_phase(&self, k: u64) -> f64 {
        k as f64 * self.step()
    }
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self { bits: 4 }
    }
}

/// Phase-shifter weights for one array: `side²` entries of magnitude
/// `1/side`, in m-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    entries: Vec<Complex64>,
    side: usize,
    quant_bits: Option<u32>,
}

impl WeightVector {
    /// Builds a weight vector from per-element phases (m-major order).
    pub fn from_phases(side: usize, phases: &[f64]) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("side", "must be at least 1"));
        }
        if phases.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                actual: phases.len(),
            });
        }
        let scale = 1.0 / side as f64;
        Ok(Self {
            entries: phases.iter().map(|&ph| Complex64::from_polar(scale, ph)).collect(),
            side,
            quant_bits: None,
        })
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `None` for an unquantized vector, otherwise the bit width `Q`.
    pub fn quant_bits(&self) -> Option<u32> {
        self.quant_bits
    }

    /// Hermitian inner product `selfᴴ · other`.
    pub fn inner(&self, other: &[Complex64]) -> Result<Complex64> {
        if other.len() != self.entries.len() {
            return Err(Error::DimensionMismatch {
                expected: self.entries.len(),
                actual: other.len(),
            });
        }
        Ok(self
            .entries
            .iter()
            .zip(other)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(Complex64::norm_sqr).sum()
    }
}

/// Array response (steering vector) of `geom` toward `angle`.
///
/// Element `(m, n)` is `exp(j p (m cos(el) sin(az) + n sin(el))) / side`
/// with `p = 2π d/λ`.
pub fn array_response(geom: &UpaGeometry, angle: &Angle) -> WeightVector {
    let side = geom.side();
    let p = geom.phase_constant();
    let u = angle.elevation.cos() * angle.azimuth.sin();
    let v = angle.elevation.sin();
    let scale = 1.0 / side as f64;

    let mut entries = vec![Complex64::new(0.0, 0.0); geom.num_elements()];
    for m in 0..side {
        for n in 0..side {
            let phase = p * (m as f64 * u + n as f64 * v);
            entries[geom.index(m, n)] = Complex64::from_polar(scale, phase);
        }
    }
    WeightVector {
        entries,
        side,
        quant_bits: None,
    }
}

/// Snaps every entry's phase to the nearest point of the `2^Q` grid,
/// keeping the `1/side` magnitude.
pub fn quantize_weights(w: &WeightVector, q: QuantizerConfig) -> WeightVector {
    let scale = 1.0 / w.side as f64;
    let entries = w
        .entries
        .iter()
        .map(|z| Complex64::from_polar(scale, q.level_phase(q.nearest_level(z.arg()))))
        .collect();
    WeightVector {
        entries,
        side: w.side,
        quant_bits: Some(q.bits()),
    }
}

/// Quantized steering weights toward `angle`.
pub fn quantized_response(geom: &UpaGeometry, angle: &Angle, q: QuantizerConfig) -> WeightVector {
    quantize_weights(&array_response(geom, angle), q)
}

/// Equivalent scalar channel `rx_wᴴ H tx_w` between the two RF chains.
///
/// Each path contributes `g (rx_wᴴ a_R) (a_Tᴴ tx_w)`; the channel matrix is
/// never formed.
pub fn combined_gain(
    rx_w: &WeightVector,
    tx_w: &WeightVector,
    channel: &ChannelSnapshot,
) -> Result<Complex64> {
    check_len(rx_w, channel.rx_geom().num_elements())?;
    check_len(tx_w, channel.tx_geom().num_elements())?;

    let mut total = Complex64::new(0.0, 0.0);
    for path in channel.paths() {
        if path.gain == Complex64::new(0.0, 0.0) {
            continue;
        }
        let a_r = array_response(channel.rx_geom(), &path.aoa);
        let a_t = array_response(channel.tx_geom(), &path.aod);
        let rx_gain = rx_w.inner(a_r.entries())?;
        let tx_gain = a_t.inner(tx_w.entries())?;
        total += path.gain * rx_gain * tx_gain;
    }
    Ok(total)
}

fn check_len(w: &WeightVector, expected: usize) -> Result<()> {
    if w.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual: w.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PathParams;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ms() -> UpaGeometry {
        UpaGeometry::default_ms()
    }

    /// Brute-force nearest grid point by circular distance, smaller index on ties.
    fn nearest_by_scan(phase: f64, bits: u32) -> u64 {
        let levels = 1u64 << bits;
        let step = TAU / levels as f64;
        let circ = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(TAU);
            d.min(TAU - d)
        };
        (0..levels)
            .min_by(|&a, &b| {
                circ(phase, a as f64 * step)
                    .partial_cmp(&circ(phase, b as f64 * step))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap()
    }

    #[test]
    fn broadside_response_is_flat() {
        let w = array_response(&ms(), &Angle::default());
        assert_eq!(w.len(), 64);
        for z in w.entries() {
            assert_abs_diff_eq!(z.re, 0.125, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
        assert_eq!(w.quant_bits(), None);
    }

    #[test]
    fn response_phase_at_element_one_zero() {
        let angle = Angle::new(-0.7483, 0.1235).unwrap();
        let w = array_response(&ms(), &angle);
        // m = 1, n = 0 sits at index side * 1 + 0.
        let expected = PI * 0.1235f64.cos() * (-0.7483f64).sin();
        assert_abs_diff_eq!(w.entries()[8].arg(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, -2.1212, epsilon = 1e-3);
    }

    #[test]
    fn single_element_array() {
        let geom = UpaGeometry::new(1, 0.37).unwrap();
        let w = array_response(&geom, &Angle::new(0.4, -1.1).unwrap());
        assert_eq!(w.entries(), &[Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn geometry_rejects_bad_input() {
        assert!(UpaGeometry::new(0, 0.5).is_err());
        assert!(UpaGeometry::new(4, 0.0).is_err());
        assert!(UpaGeometry::new(4, f64::NAN).is_err());
        assert!(QuantizerConfig::new(0).is_err());
        assert!(Angle::new(2.0, 0.0).is_err());
    }

    #[test]
    fn quantize_examples() {
        let q4 = QuantizerConfig::new(4).unwrap();
        assert_eq!(q4.nearest_level(0.0), 0);

        let k = q4.nearest_level(-2.1212);
        assert_eq!(k, nearest_by_scan(-2.1212, 4));
        assert_eq!(k, 11);
        assert_abs_diff_eq!(q4.level_phase(k), 4.3197, epsilon = 1e-4);

        let q1 = QuantizerConfig::new(1).unwrap();
        assert_eq!(q1.nearest_level(1.5), 0);
        assert_eq!(q1.nearest_level(1.7), 1);
        // Exact midpoint goes to the smaller index.
        assert_eq!(q1.nearest_level(FRAC_PI_2), 0);
    }

    #[test]
    fn quantize_keeps_magnitude_and_grid() {
        let q = QuantizerConfig::default();
        let w = quantize_weights(&array_response(&ms(), &Angle::new(0.3, -0.2).unwrap()), q);
        assert_eq!(w.quant_bits(), Some(4));
        for z in w.entries() {
            assert_abs_diff_eq!(z.norm(), 0.125, epsilon = 1e-15);
            let k = z.arg().rem_euclid(TAU) / q.step();
            assert_abs_diff_eq!(k, k.round(), epsilon = 1e-9);
        }
    }

    #[test]
    fn quantization_loss_is_small_for_four_bits() {
        let q = QuantizerConfig::default();
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                let az = -1.4 + 2.8 * i as f64 / 9.0;
                let el = -1.4 + 2.8 * j as f64 / 9.0;
                let a = array_response(&ms(), &Angle::new(az, el).unwrap());
                let loss = 1.0 - quantize_weights(&a, q).inner(a.entries()).unwrap().norm();
                worst = worst.max(loss);
            }
        }
        assert!(worst < 0.02, "worst quantization loss {worst}");
    }

    fn dense_oracle(rx: &WeightVector, tx: &WeightVector, chan: &ChannelSnapshot) -> Complex64 {
        let nr = chan.rx_geom().num_elements();
        let nt = chan.tx_geom().num_elements();
        let mut h = vec![Complex64::new(0.0, 0.0); nr * nt];
        for path in chan.paths() {
            let ar = array_response(chan.rx_geom(), &path.aoa);
            let at = array_response(chan.tx_geom(), &path.aod);
            for r in 0..nr {
                for t in 0..nt {
                    h[r * nt + t] += path.gain * ar.entries()[r] * at.entries()[t].conj();
                }
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..nr {
            let mut row = Complex64::new(0.0, 0.0);
            for t in 0..nt {
                row += h[r * nt + t] * tx.entries()[t];
            }
            acc += rx.entries()[r].conj() * row;
        }
        acc
    }

    #[test]
    fn aligned_single_path_returns_path_gain() {
        let g = Complex64::new(1.2, -0.7);
        let aod = Angle::new(0.1244, -0.1235).unwrap();
        let aoa = Angle::new(-0.7483, 0.1235).unwrap();
        let chan = ChannelSnapshot::new(
            vec![PathParams { gain: g, aod, aoa }],
            UpaGeometry::default_bs(),
            ms(),
        )
        .unwrap();
        let eta = combined_gain(
            &array_response(&ms(), &aoa),
            &array_response(&UpaGeometry::default_bs(), &aod),
            &chan,
        )
        .unwrap();
        assert_abs_diff_eq!(eta.re, g.re, epsilon = 1e-12);
        assert_abs_diff_eq!(eta.im, g.im, epsilon = 1e-12);

        let zero = ChannelSnapshot::new(
            vec![PathParams {
                gain: Complex64::new(0.0, 0.0),
                aod,
                aoa,
            }],
            UpaGeometry::default_bs(),
            ms(),
        )
        .unwrap();
        let eta0 = combined_gain(
            &array_response(&ms(), &aoa),
            &array_response(&UpaGeometry::default_bs(), &aod),
            &zero,
        )
        .unwrap();
        assert_eq!(eta0, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn two_path_leakage_matches_dense_product() {
        let tx_geom = UpaGeometry::new(4, 0.5).unwrap();
        let rx_geom = UpaGeometry::new(3, 0.5).unwrap();
        let p1 = PathParams {
            gain: Complex64::new(1.0, 0.3),
            aod: Angle::new(0.2, 0.1).unwrap(),
            aoa: Angle::new(-0.4, 0.2).unwrap(),
        };
        let p2 = PathParams {
            gain: Complex64::new(-0.2, 0.25),
            aod: Angle::new(0.9, -0.3).unwrap(),
            aoa: Angle::new(0.6, -0.5).unwrap(),
        };
        let chan = ChannelSnapshot::new(vec![p1, p2], tx_geom, rx_geom).unwrap();
        let rx = array_response(&rx_geom, &p1.aoa);
        let tx = array_response(&tx_geom, &p1.aod);
        let eta = combined_gain(&rx, &tx, &chan).unwrap();
        let dense = dense_oracle(&rx, &tx, &chan);
        assert!((eta - dense).norm() <= 1e-12 * dense.norm());

        let leak = rx.inner(array_response(&rx_geom, &p2.aoa).entries()).unwrap()
            * array_response(&tx_geom, &p2.aod).inner(tx.entries()).unwrap();
        assert!((eta - p1.gain).norm() <= p2.gain.norm() * leak.norm() + 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let chan = ChannelSnapshot::new(
            vec![PathParams {
                gain: Complex64::new(1.0, 0.0),
                aod: Angle::default(),
                aoa: Angle::default(),
            }],
            UpaGeometry::new(4, 0.5).unwrap(),
            UpaGeometry::new(3, 0.5).unwrap(),
        )
        .unwrap();
        let wrong = array_response(&UpaGeometry::new(4, 0.5).unwrap(), &Angle::default());
        let tx = wrong.clone();
        assert_eq!(
            combined_gain(&wrong, &tx, &chan),
            Err(Error::DimensionMismatch {
                expected: 9,
                actual: 16
            })
        );
    }

    fn angle_strategy() -> impl Strategy<Value = Angle> {
        (-FRAC_PI_2..=FRAC_PI_2, -FRAC_PI_2..=FRAC_PI_2)
            .prop_map(|(azimuth, elevation)| Angle { azimuth, elevation })
    }

    proptest! {
        #[test]
        fn response_has_unit_norm(side in 1usize..10, spacing in 0.1f64..1.0, angle in angle_strategy()) {
            let geom = UpaGeometry::new(side, spacing).unwrap();
            let a = array_response(&geom, &angle);
            prop_assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((a.inner(a.entries()).unwrap().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn constrained_weights_never_beat_matched(
            angle in angle_strategy(),
            other in angle_strategy(),
            bits in 1u32..6,
        ) {
            let a = array_response(&ms(), &angle);
            let w = quantize_weights(&array_response(&ms(), &other), QuantizerConfig::new(bits).unwrap());
            prop_assert!(w.inner(a.entries()).unwrap().norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn quantization_is_idempotent(angle in angle_strategy(), bits in 1u32..8) {
            let q = QuantizerConfig::new(bits).unwrap();
            let once = quantize_weights(&array_response(&ms(), &angle), q);
            let twice = quantize_weights(&once, q);
            for (a, b) in once.entries().iter().zip(twice.entries()) {
                prop_assert!((a - b).norm() < 1e-15);
            }
        }

        #[test]
        fn nearest_level_matches_scan(phase in -20.0f64..20.0, bits in 1u32..7) {
            let q = QuantizerConfig::new(bits).unwrap();
            prop_assert_eq!(q.nearest_level(phase), nearest_by_scan(phase, bits));
        }

        #[test]
        fn factorized_gain_matches_dense(
            ts in 1usize..5, rs in 1usize..5,
            aod in angle_strategy(), aoa in angle_strategy(),
            aod2 in angle_strategy(), aoa2 in angle_strategy(),
            beam_t in angle_strategy(), beam_r in angle_strategy(),
            g1 in (-2.0f64..2.0, -2.0f64..2.0), g2 in (-2.0f64..2.0, -2.0f64..2.0),
        ) {
            let tx_geom = UpaGeometry::new(ts, 0.5).unwrap();
            let rx_geom = UpaGeometry::new(rs, 0.5).unwrap();
            let chan = ChannelSnapshot::new(vec![
                PathParams { gain: Complex64::new(g1.0, g1.1), aod, aoa },
                PathParams { gain: Complex64::new(g2.0, g2.1), aod: aod2, aoa: aoa2 },
            ], tx_geom, rx_geom).unwrap();
            let rx = quantize_weights(&array_response(&rx_geom, &beam_r), QuantizerConfig::default());
            let tx = array_response(&tx_geom, &beam_t);
            let fast = combined_gain(&rx, &tx, &chan).unwrap();
            let dense = dense_oracle(&rx, &tx, &chan);
            prop_assert!((fast - dense).norm() <= 1e-12 * dense.norm().max(1e-300) + 1e-14);
        }
    }
}
