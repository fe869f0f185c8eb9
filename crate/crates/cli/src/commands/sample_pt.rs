//! `sample-pt`: record equilibrium samples with parallel tempering.

use std::path::PathBuf;

use clap::Args;

use glassflow_core::pt::{build_continuous_dataset, run_pt, TemperatureLadder};
use glassflow_core::rng::stream_rng;
use glassflow_core::spinglass::ShiftedCoupling;
use glassflow_core::Executor;

use crate::commands::{ensure_out_dir, STREAM_DECORATE_BASE};
use crate::config::{
    pick, pick_required, ExperimentConfig, LadderSection, PtSection, FORMAT_VERSION,
};
use crate::errors::{CliError, Result};
use crate::formats;
use crate::provenance::Provenance;

#[derive(Debug, Args)]
pub struct SamplePtArgs {
    /// Disorder file the chain samples from.
    #[arg(long)]
    pub disorder: PathBuf,
    /// Coldest ladder temperature.
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Hottest ladder temperature.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Ladder size for the geometric ladder.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Explicit inverse temperatures, ascending; replaces the geometric
    /// ladder.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Recorded samples per temperature (one per sweep).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Discarded equilibration sweeps.
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Seed for the whole run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also draw the continuous row for every recorded sample.
    #[arg(long)]
    pub emit_x: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SamplePtArgs, config: &ExperimentConfig, exec: &impl Executor) -> Result<()> {
    let ladder_cfg = config.ladder();
    let pt_cfg = config.pt();

    let mut prov = Provenance::new("sample-pt");
    prov.record(&args.disorder)?;
    let (d, epsilon) = formats::read_disorder(&args.disorder)?;

    let samples = pick_required(args.samples, pt_cfg.samples, "--samples")?;
    if samples == 0 {
        return Err(CliError::usage("--samples must be positive"));
    }
    let burn_in = pick(args.burn_in, pt_cfg.burn_in, 10 * d.n_spins() as u64);
    let seed = pick(args.seed, pt_cfg.seed, 0);
    let emit_x = args.emit_x || pt_cfg.emit_x.unwrap_or(false);

    let betas = args.betas.clone().or(ladder_cfg.betas.clone());
    let (ladder, resolved_ladder) = match betas {
        Some(betas) => {
            let ladder = TemperatureLadder::from_betas(betas.clone())?;
            (ladder, LadderSection { betas: Some(betas), ..LadderSection::default() })
        }
        None => {
            let t_min = pick(args.t_min, ladder_cfg.t_min, 0.2 * d.scale());
            let t_max = pick(args.t_max, ladder_cfg.t_max, 5.0 * d.scale());
            let count = pick(args.replicas, ladder_cfg.count, 8);
            let ladder = TemperatureLadder::geometric(t_min, t_max, count)?;
            let section = LadderSection {
                t_min: Some(t_min),
                t_max: Some(t_max),
                count: Some(count),
                betas: Some(ladder.betas().to_vec()),
            };
            (ladder, section)
        }
    };

    let mut sets = run_pt(&d, &ladder, burn_in, samples, seed, exec)?;
    if emit_x {
        let sc = ShiftedCoupling::new(&d, epsilon)?;
        for (slot, set) in sets.iter_mut().enumerate() {
            let mut rng = stream_rng(seed, STREAM_DECORATE_BASE + slot as u64);
            *set = build_continuous_dataset(set, &sc, &mut rng)?;
        }
    }

    ensure_out_dir(&args.out)?;
    for (slot, set) in sets.iter().enumerate() {
        let file = args.out.join(format!("pt_{slot:02}.sgs"));
        formats::write_sample_set(&file, set)?;
        let mean_energy = {
            let mut acc = 0.0;
            for i in 0..set.n_samples {
                acc += d.energy(set.row(i))?;
            }
            acc / set.n_samples as f64
        };
        println!(
            "wrote {} beta {} t {} mean_energy {}",
            file.display(),
            set.beta,
            1.0 / set.beta,
            mean_energy,
        );
    }

    let resolved = ExperimentConfig {
        format_version: Some(FORMAT_VERSION),
        ladder: Some(resolved_ladder),
        pt: Some(PtSection {
            burn_in: Some(burn_in),
            samples: Some(samples),
            seed: Some(seed),
            emit_x: Some(emit_x),
        }),
        output_dir: Some(args.out.clone()),
        ..ExperimentConfig::default()
    };
    crate::config::write_resolved(&args.out, &resolved)?;
    prov.write(&args.out)?;
    Ok(())
}
