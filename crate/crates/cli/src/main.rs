use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use beamtrack_cli::{build_manifest, load_file, run, FileConfig, Overrides};
use clap::Parser;

/// Simulate beam tracking for a rotating handset and write throughput traces.
#[derive(Debug, Parser)]
#[command(name = "beamtrack", version)]
struct Args {
    /// TOML manifest; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory (overrides the manifest).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Run a single seed (overrides the manifest).
    #[arg(long)]
    seed: Option<u64>,

    /// beampattern, codebook, perturbation or all.
    #[arg(long)]
    method: Option<String>,

    /// Angular speed in deg/s.
    #[arg(long)]
    speed: Option<f64>,

    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match real_main(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(args: &Args) -> anyhow::Result<()> {
    let file = match &args.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let overrides = Overrides {
        output_dir: args.out.clone(),
        seed: args.seed,
        method: args.method.clone(),
        speed: args.speed,
    };
    let manifest = build_manifest(&file, &overrides)?;
    if !args.quiet {
        eprintln!(
            "running {} scenario(s) into {}",
            manifest.scenarios.len(),
            manifest.output_dir.display()
        );
    }
    let report = run(&manifest).context("simulation run failed")?;
    if !args.quiet {
        eprintln!("wrote {} file(s)", report.written.len());
    }
    Ok(())
}
