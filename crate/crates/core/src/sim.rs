//! Rotating-handset scenario: channel-block schedule, beam alignment per
//! block and throughput sampling.
//!
//! Timeline. Block `b` (0-based) starts at `b * T`. Alignment happens
//! instantaneously at the block start on the channel frozen at that instant,
//! and the new MS weights are held until the next block start. Throughput is
//! sampled every `sample_interval_s` from `0` to `duration_s` inclusive; the
//! final sample at `t = duration_s` belongs to the last block. The sample at
//! each block start is therefore the post-update throughput of that block.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arrays::{array_response, combined_gain, quantized_response, Angle, QuantizerConfig, UpaGeometry, WeightVector};
use crate::baselines::{build_codebook_sized, codebook_align, nine_beam_align, NineBeamConfig};
use crate::channel::{ChannelSnapshot, PathParams, TrainingSignal};
use crate::error::{Error, Result};
use crate::tracker::{tracking_step, TrackerConfig, TrackerState, DEFAULT_STEP};
use crate::training::Trainer;
use crate::virtual_angle::{to_virtual, VirtualAngle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Beampattern,
    Codebook,
    Perturbation,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Beampattern, Method::Codebook, Method::Perturbation];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Beampattern => "beampattern",
            Method::Codebook => "codebook",
            Method::Perturbation => "perturbation",
        }
    }

    /// Gain estimations consumed by one alignment with the given codebook size.
    pub fn trainings_per_alignment(&self, codebook_len: usize) -> usize {
        match self {
            Method::Beampattern => 5,
            Method::Codebook => codebook_len,
            Method::Perturbation => 9,
        }
    }

    fn stream_tag(&self) -> u64 {
        match self {
            Method::Beampattern => 1,
            Method::Codebook => 2,
            Method::Perturbation => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beampattern" => Ok(Method::Beampattern),
            "codebook" => Ok(Method::Codebook),
            "perturbation" => Ok(Method::Perturbation),
            other => Err(Error::invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Full description of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub bs_geom: UpaGeometry,
    pub ms_geom: UpaGeometry,
    pub quant: QuantizerConfig,
    pub block_period_s: f64,
    pub duration_s: f64,
    pub angular_speed_deg_s: f64,
    pub sample_interval_s: f64,
    pub num_subcarriers: usize,
    pub num_pilots: usize,
    pub noise_var: f64,
    /// Aligned SNR of the LOS path with unit noise variance, in dB.
    pub los_snr_db: f64,
    /// Aligned SNR of the NLOS path; `None` drops the path.
    pub nlos_snr_db: Option<f64>,
    pub los_aod: Angle,
    pub los_aoa: Angle,
    pub nlos_aod: Angle,
    pub nlos_aoa: Angle,
    pub method: Method,
    pub seed: u64,
    pub tracker_step: f64,
    pub nine_beam_step: f64,
    pub codebook_azimuth: usize,
    pub codebook_elevation: usize,
    /// Recorded only; the flat-channel model does not depend on them.
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            bs_geom: UpaGeometry::default_bs(),
            ms_geom: UpaGeometry::default_ms(),
            quant: QuantizerConfig::default(),
            block_period_s: 0.01,
            duration_s: 0.1,
            angular_speed_deg_s: 100.0,
            sample_interval_s: 0.001,
            num_subcarriers: 2048,
            num_pilots: 341,
            noise_var: 1.0,
            los_snr_db: 5.0,
            nlos_snr_db: Some(-8.0),
            los_aod: Angle {
                azimuth: 0.1244,
                elevation: -0.1235,
            },
            los_aoa: Angle {
                azimuth: -0.7483,
                elevation: 0.1235,
            },
            nlos_aod: Angle {
                azimuth: 0.9,
                elevation: -0.3,
            },
            nlos_aoa: Angle {
                azimuth: 0.6,
                elevation: -0.5,
            },
            method: Method::Beampattern,
            seed: 0,
            tracker_step: DEFAULT_STEP,
            nine_beam_step: NineBeamConfig::default().grid_step,
            codebook_azimuth: crate::baselines::DEFAULT_AZIMUTH_CODEWORDS,
            codebook_elevation: crate::baselines::DEFAULT_ELEVATION_CODEWORDS,
            carrier_hz: 73e9,
            bandwidth_hz: 2.5e9,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        positive("block_period_s", self.block_period_s)?;
        positive("duration_s", self.duration_s)?;
        positive("sample_interval_s", self.sample_interval_s)?;
        if self.sample_interval_s > self.block_period_s {
            return Err(Error::invalid("sample_interval_s", "must not exceed block_period_s"));
        }
        if !(self.angular_speed_deg_s >= 0.0 && self.angular_speed_deg_s.is_finite()) {
            return Err(Error::invalid(
                "angular_speed_deg_s",
                format!("must be finite and >= 0, got {}", self.angular_speed_deg_s),
            ));
        }
        positive("noise_var", self.noise_var)?;
        positive("tracker_step", self.tracker_step)?;
        positive("nine_beam_step", self.nine_beam_step)?;
        if !self.los_snr_db.is_finite() {
            return Err(Error::invalid("los_snr_db", "must be finite"));
        }
        if let Some(s) = self.nlos_snr_db {
            if !s.is_finite() {
                return Err(Error::invalid("nlos_snr_db", "must be finite"));
            }
        }
        if self.codebook_azimuth == 0 || self.codebook_elevation == 0 {
            return Err(Error::invalid("codebook_azimuth", "codebook dimensions must be nonzero"));
        }
        for (name, a) in [
            ("los_aod", self.los_aod),
            ("los_aoa", self.los_aoa),
            ("nlos_aod", self.nlos_aod),
            ("nlos_aoa", self.nlos_aoa),
        ] {
            if !a.in_front_hemisphere() {
                return Err(Error::invalid(name, format!("{a:?} outside [-pi/2, pi/2]^2")));
            }
        }
        self.training_signal()?;
        // The trajectory must stay in the front hemisphere for the whole run.
        aoa_at(self, self.duration_s)?;
        Ok(())
    }

    pub fn training_signal(&self) -> Result<TrainingSignal> {
        TrainingSignal::evenly_spaced(self.num_subcarriers, self.num_pilots, self.noise_var.sqrt())
    }

    pub fn num_blocks(&self) -> usize {
        ((self.duration_s / self.block_period_s - 1e-9).ceil() as usize).max(1)
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s / self.sample_interval_s + 1e-9).floor() as usize + 1
    }

    /// Block (0-based) whose weights are active at `t`.
    pub fn block_of(&self, t: f64) -> usize {
        ((t / self.block_period_s + 1e-9).floor() as usize).min(self.num_blocks() - 1)
    }

    pub fn los_gain_magnitude(&self) -> f64 {
        10f64.powf(self.los_snr_db / 20.0)
    }

    /// Seed of this scenario's private random stream.
    ///
    /// SplitMix64 finalizer folded over `(seed, method tag, speed bits)`, so
    /// every (seed, method, speed) combination gets an independent stream.
    pub fn stream_seed(&self) -> u64 {
        let mut h = splitmix64(self.seed);
        h = splitmix64(h ^ self.method.stream_tag());
        splitmix64(h ^ self.angular_speed_deg_s.to_bits())
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// AoA of the tracked path at time `t`: azimuth advances at the angular
/// speed, elevation is fixed.
pub fn aoa_at(config: &ScenarioConfig, t: f64) -> Result<Angle> {
    let azimuth = config.los_aoa.azimuth + config.angular_speed_deg_s.to_radians() * t;
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&azimuth) {
        return Err(Error::ScenarioExhausted { t_s: t, azimuth });
    }
    Ok(Angle {
        azimuth,
        elevation: config.los_aoa.elevation,
    })
}

/// Available throughput `log2(1 + |rx_wᴴ H tx_w|² / σ²)` in bits/s/Hz.
pub fn throughput(chan: &ChannelSnapshot, tx_w: &WeightVector, rx_w: &WeightVector, noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise_var", format!("must be positive, got {noise_var}")));
    }
    let eta = combined_gain(rx_w, tx_w, chan)?;
    Ok((1.0 + eta.norm_sqr() / noise_var).log2())
}

/// Throughput with perfect unquantized alignment on the LOS path.
pub fn upper_bound(config: &ScenarioConfig) -> f64 {
    let g = config.los_gain_magnitude();
    (1.0 + g * g / config.noise_var).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputSample {
    pub t_s: f64,
    pub throughput_bps_hz: f64,
    pub beam_virtual: VirtualAngle,
    pub aoa_virtual: VirtualAngle,
    /// 1-based channel-block index.
    pub block_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub method: Method,
    pub speed_deg_s: f64,
    pub seed: u64,
    pub upper_bound: f64,
    /// Throughput at each block start right after the weight update.
    pub post_update_tput: Vec<f64>,
    /// Euclidean virtual-angle distance between beam and AoA after each update.
    pub post_update_error: Vec<f64>,
    pub mean_post_update_tput: f64,
    pub min_tput: f64,
    pub frac_above_90pct: f64,
    pub trainings_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub samples: Vec<ThroughputSample>,
    pub summary: ScenarioSummary,
}

/// Per-method beam state carried across blocks.
enum Aligner {
    Beampattern(TrackerConfig, TrackerState),
    Perturbation(NineBeamConfig, TrackerState),
    Codebook(crate::baselines::Codebook, WeightVector, VirtualAngle),
}

impl Aligner {
    fn new(config: &ScenarioConfig) -> Result<Self> {
        let initial = TrackerState::new(&config.ms_geom, config.los_aoa, config.quant);
        Ok(match config.method {
            Method::Beampattern => Aligner::Beampattern(
                TrackerConfig {
                    geom: config.ms_geom,
                    quant: config.quant,
                    step: config.tracker_step,
                },
                initial,
            ),
            Method::Perturbation => Aligner::Perturbation(NineBeamConfig::new(config.nine_beam_step)?, initial),
            Method::Codebook => Aligner::Codebook(
                build_codebook_sized(
                    &config.ms_geom,
                    config.quant,
                    config.codebook_azimuth,
                    config.codebook_elevation,
                )?,
                initial.weights,
                initial.beam_virtual,
            ),
        })
    }

    fn align<R: Rng + ?Sized>(&mut self, trainer: &mut Trainer<'_, R>, config: &ScenarioConfig) -> Result<()> {
        match self {
            Aligner::Beampattern(cfg, state) => {
                *state = tracking_step(state, trainer, cfg)?;
            }
            Aligner::Perturbation(cfg, state) => {
                *state = nine_beam_align(cfg, state, trainer, &config.ms_geom, config.quant)?;
            }
            Aligner::Codebook(book, weights, focus) => {
                let k = codebook_align(book, trainer)?;
                *weights = book.codewords[k].clone();
                *focus = book.focus_virtuals[k];
            }
        }
        Ok(())
    }

    fn weights(&self) -> &WeightVector {
        match self {
            Aligner::Beampattern(_, s) | Aligner::Perturbation(_, s) => &s.weights,
            Aligner::Codebook(_, w, _) => w,
        }
    }

    fn beam_virtual(&self) -> VirtualAngle {
        match self {
            Aligner::Beampattern(_, s) | Aligner::Perturbation(_, s) => s.beam_virtual,
            Aligner::Codebook(_, _, v) => *v,
        }
    }
}

fn channel_at(config: &ScenarioConfig, t: f64, nlos_gain: Option<Complex64>) -> Result<ChannelSnapshot> {
    let mut paths = vec![PathParams {
        gain: Complex64::new(config.los_gain_magnitude(), 0.0),
        aod: config.los_aod,
        aoa: aoa_at(config, t)?,
    }];
    if let Some(gain) = nlos_gain {
        paths.push(PathParams {
            gain,
            aod: config.nlos_aod,
            aoa: config.nlos_aoa,
        });
    }
    ChannelSnapshot::new(paths, config.bs_geom, config.ms_geom)
}

/// Runs one scenario. Deterministic for a fixed configuration.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.stream_seed());
    let nlos_gain = config
        .nlos_snr_db
        .map(|db| Complex64::from_polar(10f64.powf(db / 20.0), rng.gen_range(0.0..TAU)));

    let sig = config.training_signal()?;
    let tx_w = quantized_response(&config.bs_geom, &config.los_aod, config.quant);
    let mut aligner = Aligner::new(config)?;
    let ub = upper_bound(config);

    let num_blocks = config.num_blocks();
    let num_samples = config.num_samples();
    let mut samples = Vec::with_capacity(num_samples);
    let mut post_update_tput = Vec::with_capacity(num_blocks);
    let mut post_update_error = Vec::with_capacity(num_blocks);
    let mut trainings_used = 0;

    let mut k = 0;
    for block in 0..num_blocks {
        let t_start = block as f64 * config.block_period_s;
        let chan = channel_at(config, t_start, nlos_gain)?;
        {
            let mut trainer = Trainer::new(&chan, &tx_w, &sig, &mut rng);
            aligner.align(&mut trainer, config)?;
            trainings_used += trainer.trainings();
        }
        let aoa_virtual = to_virtual(&config.ms_geom, &chan.tracked().aoa);
        post_update_tput.push(throughput(&chan, &tx_w, aligner.weights(), config.noise_var)?);
        post_update_error.push((aligner.beam_virtual() - aoa_virtual).norm());

        while k < num_samples {
            let t = k as f64 * config.sample_interval_s;
            if config.block_of(t) != block {
                break;
            }
            let chan = channel_at(config, t, nlos_gain)?;
            samples.push(ThroughputSample {
                t_s: t,
                throughput_bps_hz: throughput(&chan, &tx_w, aligner.weights(), config.noise_var)?,
                beam_virtual: aligner.beam_virtual(),
                aoa_virtual: to_virtual(&config.ms_geom, &chan.tracked().aoa),
                block_index: block + 1,
            });
            k += 1;
        }
    }

    let min_tput = samples.iter().map(|s| s.throughput_bps_hz).fold(f64::INFINITY, f64::min);
    let above = samples.iter().filter(|s| s.throughput_bps_hz >= 0.9 * ub).count();
    let summary = ScenarioSummary {
        method: config.method,
        speed_deg_s: config.angular_speed_deg_s,
        seed: config.seed,
        upper_bound: ub,
        mean_post_update_tput: post_update_tput.iter().sum::<f64>() / num_blocks as f64,
        post_update_tput,
        post_update_error,
        min_tput,
        frac_above_90pct: above as f64 / samples.len() as f64,
        trainings_used,
    };
    Ok(ScenarioResult { samples, summary })
}

/// Runs independent scenarios in parallel. Results come back in input order.
pub fn run_batch(configs: &[ScenarioConfig]) -> Vec<Result<ScenarioResult>> {
    configs.par_iter().map(run_scenario).collect()
}

/// Aligned unquantized throughput through explicit matched beams; used to
/// cross-check [`upper_bound`].
pub fn matched_throughput(config: &ScenarioConfig, t: f64) -> Result<f64> {
    let chan = channel_at(config, t, None)?;
    let tx = array_response(&config.bs_geom, &config.los_aod);
    let rx = array_response(&config.ms_geom, &chan.tracked().aoa);
    throughput(&chan, &tx, &rx, config.noise_var)
}
