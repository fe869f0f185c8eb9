//! `convert`: decorate recorded spin samples with continuous rows.

use std::path::PathBuf;

use clap::Args;

use glassflow_core::pt::build_continuous_dataset;
use glassflow_core::rng::stream_rng;
use glassflow_core::spinglass::ShiftedCoupling;

use crate::commands::{ensure_out_dir, STREAM_DECORATE_BASE};
use crate::config::ExperimentConfig;
use crate::errors::{CliError, Result};
use crate::formats;
use crate::provenance::Provenance;

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Disorder file the samples were recorded against.
    #[arg(long)]
    pub disorder: PathBuf,
    /// Sample files to decorate, processed in order.
    #[arg(long, num_args = 1.., required = true)]
    pub samples: Vec<PathBuf>,
    /// Seed for the conditional draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; converted files keep their base names.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &ConvertArgs, config: &ExperimentConfig) -> Result<()> {
    let _ = config;
    let mut prov = Provenance::new("convert");
    prov.record(&args.disorder)?;
    let (d, epsilon) = formats::read_disorder(&args.disorder)?;
    let sc = ShiftedCoupling::new(&d, epsilon)?;

    ensure_out_dir(&args.out)?;
    for (slot, input) in args.samples.iter().enumerate() {
        prov.record(input)?;
        let set = formats::read_sample_set(input)?;
        let mut rng = stream_rng(args.seed, STREAM_DECORATE_BASE + slot as u64);
        let decorated = build_continuous_dataset(&set, &sc, &mut rng)?;
        let name = input
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("{}: not a file path", input.display())))?;
        let file = args.out.join(name);
        formats::write_sample_set(&file, &decorated)?;
        println!("wrote {} beta {} samples {}", file.display(), decorated.beta, decorated.n_samples);
    }
    prov.write(&args.out)?;
    crate::config::write_resolved(&args.out, &resolved_config(args))?;
    Ok(())
}

fn resolved_config(args: &ConvertArgs) -> ExperimentConfig {
    ExperimentConfig {
        format_version: Some(crate::config::FORMAT_VERSION),
        output_dir: Some(args.out.clone()),
        ..ExperimentConfig::default()
    }
}
