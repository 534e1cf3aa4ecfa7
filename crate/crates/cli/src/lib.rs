//! Configuration loading, batch execution and CSV output for the
//! `beamtrack` command.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use beamtrack::sim::{run_batch, upper_bound, Method, ScenarioConfig, ScenarioResult, ThroughputSample};
use beamtrack::{Angle, QuantizerConfig, UpaGeometry};
use serde::Deserialize;
use thiserror::Error;

pub const SAMPLE_HEADER: &str =
    "t_s,throughput_bps_hz,upper_bound_bps_hz,beam_psi_x,beam_psi_y,aoa_psi_x,aoa_psi_y,block_index";
pub const SUMMARY_HEADER: &str =
    "method,speed_deg_s,seed,mean_post_update_tput,min_tput,frac_above_90pct,trainings_used";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("scenario {name} failed: {source}")]
    Scenario {
        name: String,
        source: beamtrack::Error,
    },
}

impl CliError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<beamtrack::Error> for CliError {
    fn from(e: beamtrack::Error) -> Self {
        match e {
            beamtrack::Error::InvalidArgument { name, reason } => CliError::invalid(name, reason),
            other => CliError::invalid("scenario", other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// On-disk manifest. Every key is optional; missing keys take the
/// scenario defaults.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub output_dir: Option<PathBuf>,
    pub emit_per_seed: Option<bool>,

    /// `"beampattern"`, `"codebook"`, `"perturbation"`, `"all"` or a list.
    pub method: Option<OneOrMany<String>>,
    pub angular_speed_deg_s: Option<OneOrMany<f64>>,
    pub seed: Option<OneOrMany<u64>>,
    /// Expands a single `seed` into `seed, seed + 1, ...`.
    pub num_seeds: Option<u64>,

    pub bs_side: Option<usize>,
    pub bs_spacing_wl: Option<f64>,
    pub ms_side: Option<usize>,
    pub ms_spacing_wl: Option<f64>,
    pub quant_bits: Option<u32>,

    pub block_period_s: Option<f64>,
    pub duration_s: Option<f64>,
    pub sample_interval_s: Option<f64>,
    pub num_subcarriers: Option<usize>,
    pub num_pilots: Option<usize>,
    pub noise_var: Option<f64>,
    pub los_snr_db: Option<f64>,
    /// Set `nlos_enabled = false` to drop the reflected path.
    pub nlos_snr_db: Option<f64>,
    pub nlos_enabled: Option<bool>,
    /// `[azimuth, elevation]` in radians.
    pub los_aod: Option<[f64; 2]>,
    pub los_aoa: Option<[f64; 2]>,
    pub nlos_aod: Option<[f64; 2]>,
    pub nlos_aoa: Option<[f64; 2]>,

    pub tracker_step: Option<f64>,
    pub nine_beam_step: Option<f64>,
    pub codebook_azimuth: Option<usize>,
    pub codebook_elevation: Option<usize>,
    pub carrier_hz: Option<f64>,
    pub bandwidth_hz: Option<f64>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub scenarios: Vec<ScenarioConfig>,
    pub output_dir: PathBuf,
    pub emit_per_seed: bool,
}

pub fn parse_config(path: &Path) -> Result<RunManifest> {
    build_manifest(&load_file(path)?, &Overrides::default())
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text).map_err(|message| CliError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_str(text: &str) -> std::result::Result<FileConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(Method::ALL);
        } else {
            out.push(name.parse()?);
        }
    }
    if out.is_empty() {
        return Err(CliError::invalid("method", "no method given"));
    }
    Ok(out)
}

fn angle(field: &str, v: Option<[f64; 2]>, default: Angle) -> Result<Angle> {
    match v {
        None => Ok(default),
        Some([az, el]) => Angle::new(az, el).map_err(|e| CliError::invalid(field, e.to_string())),
    }
}

fn geometry(field: &str, side: Option<usize>, spacing: Option<f64>, default: UpaGeometry) -> Result<UpaGeometry> {
    UpaGeometry::new(
        side.unwrap_or(default.side()),
        spacing.unwrap_or(default.spacing_wl()),
    )
    .map_err(|e| CliError::invalid(field, e.to_string()))
}

/// Expands the file and overrides into one validated scenario per
/// (method, speed, seed), in that nesting order.
pub fn build_manifest(file: &FileConfig, overrides: &Overrides) -> Result<RunManifest> {
    let d = ScenarioConfig::default();

    let method_names = match (&overrides.method, &file.method) {
        (Some(m), _) => vec![m.clone()],
        (None, Some(m)) => m.to_vec(),
        (None, None) => vec![d.method.name().to_string()],
    };
    let methods = parse_methods(&method_names)?;

    let speeds = match (overrides.speed, &file.angular_speed_deg_s) {
        (Some(s), _) => vec![s],
        (None, Some(s)) => s.to_vec(),
        (None, None) => vec![d.angular_speed_deg_s],
    };
    if speeds.is_empty() {
        return Err(CliError::invalid("angular_speed_deg_s", "no speed given"));
    }

    let seeds = match (overrides.seed, &file.seed, file.num_seeds) {
        (Some(s), _, _) => vec![s],
        (None, Some(OneOrMany::Many(_)), Some(_)) => {
            return Err(CliError::invalid("num_seeds", "cannot be combined with a seed list"));
        }
        (None, seed, Some(n)) => {
            let base = match seed {
                Some(OneOrMany::One(s)) => *s,
                _ => d.seed,
            };
            (0..n).map(|i| base + i).collect()
        }
        (None, Some(s), None) => s.to_vec(),
        (None, None, None) => vec![d.seed],
    };
    if seeds.is_empty() {
        return Err(CliError::invalid("seed", "no seed given"));
    }

    let quant = match file.quant_bits {
        Some(b) => QuantizerConfig::new(b).map_err(|e| CliError::invalid("quant_bits", e.to_string()))?,
        None => d.quant,
    };
    let nlos_snr_db = match file.nlos_enabled {
        Some(false) => None,
        _ => file.nlos_snr_db.or(d.nlos_snr_db),
    };

    let base = ScenarioConfig {
        bs_geom: geometry("bs_side", file.bs_side, file.bs_spacing_wl, d.bs_geom)?,
        ms_geom: geometry("ms_side", file.ms_side, file.ms_spacing_wl, d.ms_geom)?,
        quant,
        block_period_s: file.block_period_s.unwrap_or(d.block_period_s),
        duration_s: file.duration_s.unwrap_or(d.duration_s),
        sample_interval_s: file.sample_interval_s.unwrap_or(d.sample_interval_s),
        num_subcarriers: file.num_subcarriers.unwrap_or(d.num_subcarriers),
        num_pilots: file.num_pilots.unwrap_or(d.num_pilots),
        noise_var: file.noise_var.unwrap_or(d.noise_var),
        los_snr_db: file.los_snr_db.unwrap_or(d.los_snr_db),
        nlos_snr_db,
        los_aod: angle("los_aod", file.los_aod, d.los_aod)?,
        los_aoa: angle("los_aoa", file.los_aoa, d.los_aoa)?,
        nlos_aod: angle("nlos_aod", file.nlos_aod, d.nlos_aod)?,
        nlos_aoa: angle("nlos_aoa", file.nlos_aoa, d.nlos_aoa)?,
        tracker_step: file.tracker_step.unwrap_or(d.tracker_step),
        nine_beam_step: file.nine_beam_step.unwrap_or(d.nine_beam_step),
        codebook_azimuth: file.codebook_azimuth.unwrap_or(d.codebook_azimuth),
        codebook_elevation: file.codebook_elevation.unwrap_or(d.codebook_elevation),
        carrier_hz: file.carrier_hz.unwrap_or(d.carrier_hz),
        bandwidth_hz: file.bandwidth_hz.unwrap_or(d.bandwidth_hz),
        ..d
    };

    let mut scenarios = Vec::with_capacity(methods.len() * speeds.len() * seeds.len());
    for &method in &methods {
        for &speed in &speeds {
            for &seed in &seeds {
                let cfg = ScenarioConfig {
                    method,
                    angular_speed_deg_s: speed,
                    seed,
                    ..base.clone()
                };
                cfg.validate()?;
                scenarios.push(cfg);
            }
        }
    }

    Ok(RunManifest {
        scenarios,
        output_dir: overrides
            .output_dir
            .clone()
            .or_else(|| file.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        emit_per_seed: file.emit_per_seed.unwrap_or(true),
    })
}

/// `printf("%.9g")`: 9 significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-4, 1e9)`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn scenario_name(cfg: &ScenarioConfig) -> String {
    format!("{}_{}deg_{}", cfg.method, cfg.angular_speed_deg_s, cfg.seed)
}

pub fn samples_csv(samples: &[ThroughputSample], upper: f64) -> String {
    let mut out = String::with_capacity(80 * (samples.len() + 1));
    out.push_str(SAMPLE_HEADER);
    out.push('\n');
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_sig9(s.t_s),
            format_sig9(s.throughput_bps_hz),
            format_sig9(upper),
            format_sig9(s.beam_virtual.psi_x),
            format_sig9(s.beam_virtual.psi_y),
            format_sig9(s.aoa_virtual.psi_x),
            format_sig9(s.aoa_virtual.psi_y),
            s.block_index
        )
        .expect("writing to a String");
    }
    out
}

/// One parsed row of a per-scenario CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t_s: f64,
    pub throughput_bps_hz: f64,
    pub upper_bound_bps_hz: f64,
    pub beam_psi: [f64; 2],
    pub aoa_psi: [f64; 2],
    pub block_index: usize,
}

pub fn parse_samples_csv(text: &str) -> std::result::Result<Vec<CsvRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(SAMPLE_HEADER) => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(format!("row {}: expected 8 fields, got {}", i + 1, fields.len()));
            }
            let num = |k: usize| {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| format!("row {} field {k}: {e}", i + 1))
            };
            Ok(CsvRow {
                t_s: num(0)?,
                throughput_bps_hz: num(1)?,
                upper_bound_bps_hz: num(2)?,
                beam_psi: [num(3)?, num(4)?],
                aoa_psi: [num(5)?, num(6)?],
                block_index: fields[7]
                    .parse()
                    .map_err(|e| format!("row {} block_index: {e}", i + 1))?,
            })
        })
        .collect()
}

/// Per-block mean over seeds of scenarios that share method and speed.
fn averaged_samples(results: &[&ScenarioResult]) -> Vec<ThroughputSample> {
    let n = results.len() as f64;
    let mut avg = results[0].samples.clone();
    for (k, s) in avg.iter_mut().enumerate() {
        let mean = |f: &dyn Fn(&ThroughputSample) -> f64| results.iter().map(|r| f(&r.samples[k])).sum::<f64>() / n;
        s.throughput_bps_hz = mean(&|x| x.throughput_bps_hz);
        s.beam_virtual.psi_x = mean(&|x| x.beam_virtual.psi_x);
        s.beam_virtual.psi_y = mean(&|x| x.beam_virtual.psi_y);
    }
    avg
}

pub fn summary_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in results {
        let s = &r.summary;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.method,
            format_sig9(s.speed_deg_s),
            s.seed,
            format_sig9(s.mean_post_update_tput),
            format_sig9(s.min_tput),
            format_sig9(s.frac_above_90pct),
            s.trainings_used
        )
        .expect("writing to a String");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub written: Vec<PathBuf>,
    pub scenarios_ok: usize,
    pub scenarios_failed: usize,
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

/// Runs every scenario and writes the CSVs. All scenarios are attempted;
/// the first failure is returned after the successful ones are written.
pub fn run(manifest: &RunManifest) -> Result<RunReport> {
    if manifest.scenarios.is_empty() {
        return Err(CliError::invalid("scenarios", "manifest has no scenarios"));
    }
    fs::create_dir_all(&manifest.output_dir).map_err(|source| CliError::Write {
        path: manifest.output_dir.clone(),
        source,
    })?;

    let mut ok = Vec::new();
    let mut first_err = None;
    let mut failed = 0;
    for (cfg, res) in manifest.scenarios.iter().zip(run_batch(&manifest.scenarios)) {
        match res {
            Ok(r) => ok.push((cfg, r)),
            Err(source) => {
                failed += 1;
                first_err.get_or_insert(CliError::Scenario {
                    name: scenario_name(cfg),
                    source,
                });
            }
        }
    }

    let mut written = Vec::new();
    if manifest.emit_per_seed {
        for (cfg, r) in &ok {
            let path = manifest.output_dir.join(format!("{}.csv", scenario_name(cfg)));
            write(path, &samples_csv(&r.samples, upper_bound(cfg)), &mut written)?;
        }
    } else {
        let mut groups: Vec<(Method, f64, Vec<&ScenarioResult>, &ScenarioConfig)> = Vec::new();
        for (cfg, r) in &ok {
            match groups
                .iter_mut()
                .find(|g| g.0 == cfg.method && g.1 == cfg.angular_speed_deg_s)
            {
                Some(g) => g.2.push(r),
                None => groups.push((cfg.method, cfg.angular_speed_deg_s, vec![r], cfg)),
            }
        }
        for (method, speed, results, cfg) in groups {
            let path = manifest.output_dir.join(format!("{method}_{speed}deg_mean.csv"));
            write(path, &samples_csv(&averaged_samples(&results), upper_bound(cfg)), &mut written)?;
        }
    }

    let results: Vec<ScenarioResult> = ok.into_iter().map(|(_, r)| r).collect();
    write(
        manifest.output_dir.join("summary.csv"),
        &summary_csv(&results),
        &mut written,
    )?;

    match first_err {
        Some(e) => Err(e),
        None => Ok(RunReport {
            written,
            scenarios_ok: results.len(),
            scenarios_failed: failed,
        }),
    }
}
