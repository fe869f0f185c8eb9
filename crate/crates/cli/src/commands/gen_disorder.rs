//! `gen-disorder`: draw a coupling realization and store it.

use std::path::PathBuf;

use clap::Args;

use glassflow_core::spinglass::{DisorderRealization, ShiftedCoupling};

use crate::commands::ensure_out_dir;
use crate::config::{pick, pick_required, DisorderSection, ExperimentConfig, FORMAT_VERSION};
use crate::errors::{CliError, Result};
use crate::formats;
use crate::provenance::Provenance;

#[derive(Debug, Args)]
pub struct GenDisorderArgs {
    /// Number of spins.
    #[arg(long)]
    pub n: Option<usize>,
    /// Coupling standard deviation scale (the matrix entries get scale^2/n).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Seed for the coupling draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smallest eigenvalue the shifted coupling matrix is allowed.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &GenDisorderArgs, config: &ExperimentConfig) -> Result<()> {
    let section = config.disorder();
    let n = pick_required(args.n, section.n, "--n")?;
    let scale = pick(args.scale, section.scale, 1.0);
    let seed = pick(args.seed, section.seed, 0);
    let epsilon = pick(args.epsilon, section.epsilon, 0.01);
    if n < 2 {
        return Err(CliError::usage("--n must be at least 2"));
    }

    let d = DisorderRealization::sample_sk(n, scale, seed)?;
    let sc = ShiftedCoupling::new(&d, epsilon)?;

    ensure_out_dir(&args.out)?;
    let file = args.out.join("disorder.sgd");
    formats::write_disorder(&file, &d, epsilon)?;

    let resolved = ExperimentConfig {
        format_version: Some(FORMAT_VERSION),
        disorder: Some(DisorderSection {
            n: Some(n),
            scale: Some(scale),
            seed: Some(seed),
            epsilon: Some(epsilon),
        }),
        output_dir: Some(args.out.clone()),
        ..ExperimentConfig::default()
    };
    crate::config::write_resolved(&args.out, &resolved)?;
    Provenance::new("gen-disorder").write(&args.out)?;

    println!("wrote {}", file.display());
    println!(
        "n {} scale {} id {} shift {} lambda_min {} lambda_max {}",
        n,
        scale,
        d.content_id(),
        sc.shift(),
        sc.lambda_min(),
        sc.lambda_max(),
    );
    Ok(())
}
