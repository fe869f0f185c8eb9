//! `train`: fit a flow to a stored disorder realization.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;

use glassflow_core::flow::FlowModel;
use glassflow_core::spinglass::ShiftedCoupling;
use glassflow_core::train::{train, LossKind, TrainConfig, TrainObserver};
use glassflow_core::Executor;

use crate::commands::ensure_out_dir;
use crate::config::{pick, pick_required, ExperimentConfig, TrainSection, FORMAT_VERSION};
use crate::errors::{CliError, Result};
use crate::formats::{self, TrainMeta};
use crate::provenance::Provenance;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Disorder file defining the target density.
    #[arg(long)]
    pub disorder: PathBuf,
    /// Objective: "reverse" draws from the model, "forward" needs --data.
    #[arg(long)]
    pub loss: Option<String>,
    /// Target temperature; exactly one of --temp and --beta.
    #[arg(long)]
    pub temp: Option<f64>,
    /// Target inverse temperature.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sample file with continuous rows (forward objective only).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Optimizer steps.
    #[arg(long)]
    pub updates: Option<u64>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Average the model density over the global sign flip (reverse only).
    #[arg(long)]
    pub symmetrize: Option<bool>,
    /// Seed for batch draws and evaluation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for parameter and mask initialization; defaults to --seed.
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Coupling layer count.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Evaluation cadence in updates; 0 disables snapshots.
    #[arg(long)]
    pub snapshot_every: Option<u64>,
    /// Fresh-sample count per evaluation snapshot.
    #[arg(long)]
    pub eval_batch: Option<usize>,
    /// Checkpoint cadence in updates; 0 keeps only the final model.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Rescale gradients above this norm.
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes periodic checkpoints as training progresses. Write failures are
/// stashed and surfaced after the run; the trait offers no error channel.
struct CheckpointWriter<'a> {
    dir: &'a Path,
    meta: TrainMeta,
    started: Instant,
    failure: Option<CliError>,
}

impl TrainObserver for CheckpointWriter<'_> {
    fn now(&mut self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn on_checkpoint(&mut self, update_index: u64, model: &FlowModel) {
        if self.failure.is_some() {
            return;
        }
        let mut meta = self.meta.clone();
        meta.update_index = update_index;
        let path = self.dir.join(format!("ckpt_{update_index:08}.sgf"));
        if let Err(e) = formats::write_checkpoint(&path, model, Some(&meta)) {
            self.failure = Some(e);
        }
    }
}

pub fn run(args: &TrainArgs, config: &ExperimentConfig, exec: &impl Executor) -> Result<()> {
    let section = config.train();

    let loss_name = pick_required(args.loss.clone(), section.loss.clone(), "--loss")?;
    let loss_kind = match loss_name.as_str() {
        "reverse" => LossKind::Reverse,
        "forward" => LossKind::Forward,
        other => return Err(CliError::Usage(format!("unknown loss '{other}'"))),
    };
    let beta = resolve_beta(args.temp, args.beta, &section)?;
    let updates = pick_required(args.updates, section.updates, "--updates")?;
    let seed = pick(args.seed, section.seed, 0);

    let mut cfg = TrainConfig::new(loss_kind, beta, updates, seed);
    cfg.learning_rate = pick(args.lr, section.learning_rate, cfg.learning_rate);
    cfg.batch_size = pick(args.batch, section.batch_size, cfg.batch_size);
    cfg.symmetrize = pick(args.symmetrize, section.symmetrize, cfg.symmetrize);
    cfg.snapshot_every = pick(args.snapshot_every, section.snapshot_every, cfg.snapshot_every);
    cfg.eval_batch_size = pick(args.eval_batch, section.eval_batch, cfg.eval_batch_size);
    cfg.checkpoint_every =
        pick(args.checkpoint_every, section.checkpoint_every, cfg.checkpoint_every);
    cfg.max_grad_norm = args.max_grad_norm.or(section.max_grad_norm);
    let layers = pick(args.layers, section.layers, 4);
    let init_seed = pick(args.init_seed, section.init_seed, seed);

    let mut prov = Provenance::new("train");
    prov.record(&args.disorder)?;
    let (d, epsilon) = formats::read_disorder(&args.disorder)?;
    let sc = ShiftedCoupling::new(&d, epsilon)?;

    let dataset = match (loss_kind, &args.data) {
        (LossKind::Forward, Some(path)) => {
            prov.record(path)?;
            Some(formats::read_sample_set(path)?)
        }
        (LossKind::Forward, None) => {
            return Err(CliError::usage("forward training needs --data"));
        }
        (LossKind::Reverse, Some(_)) => {
            return Err(CliError::usage("reverse training takes no --data"));
        }
        (LossKind::Reverse, None) => None,
    };

    let model = FlowModel::init(d.n_spins(), layers, init_seed)?;

    ensure_out_dir(&args.out)?;
    let meta = TrainMeta {
        loss: loss_name.clone(),
        beta,
        update_index: 0,
        n_updates: updates,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        symmetrize: cfg.symmetrize,
        seed,
    };
    let mut observer = CheckpointWriter {
        dir: &args.out,
        meta: meta.clone(),
        started: Instant::now(),
        failure: None,
    };

    let (trained, trace) = train(model, &cfg, &sc, dataset.as_ref(), exec, &mut observer)?;
    let elapsed = observer.started.elapsed().as_secs_f64();
    if let Some(failure) = observer.failure {
        return Err(failure);
    }

    let mut final_meta = meta;
    final_meta.update_index = updates;
    let model_file = args.out.join("model.sgf");
    formats::write_checkpoint(&model_file, &trained, Some(&final_meta))?;
    formats::write_loss_csv(&args.out.join("loss.csv"), &trace.losses)?;
    formats::write_snapshot_csv(&args.out.join("snapshots.csv"), &trace.snapshots)?;

    let resolved = ExperimentConfig {
        format_version: Some(FORMAT_VERSION),
        train: Some(TrainSection {
            loss: Some(loss_name),
            temp: Some(1.0 / beta),
            beta: Some(beta),
            updates: Some(updates),
            learning_rate: Some(cfg.learning_rate),
            batch_size: Some(cfg.batch_size),
            symmetrize: Some(cfg.symmetrize),
            seed: Some(seed),
            init_seed: Some(init_seed),
            layers: Some(layers),
            snapshot_every: Some(cfg.snapshot_every),
            eval_batch: Some(cfg.eval_batch_size),
            checkpoint_every: Some(cfg.checkpoint_every),
            max_grad_norm: cfg.max_grad_norm,
        }),
        output_dir: Some(args.out.clone()),
        ..ExperimentConfig::default()
    };
    crate::config::write_resolved(&args.out, &resolved)?;
    prov.write(&args.out)?;

    println!("wrote {}", model_file.display());
    match trace.snapshots.last() {
        Some(s) => println!(
            "updates {} loss {} std_error {}",
            s.update_index, s.loss, s.std_error
        ),
        None => println!("updates {}", updates),
    }
    eprintln!("trained in {elapsed:.1}s");
    Ok(())
}

fn resolve_beta(temp: Option<f64>, beta: Option<f64>, section: &TrainSection) -> Result<f64> {
    // A flag pair replaces the config pair wholesale so a --temp cannot
    // collide with a configured beta.
    let (temp, beta) = match (temp, beta) {
        (None, None) => (section.temp, section.beta),
        pair => pair,
    };
    let value = match (temp, beta) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage("pass --temp or --beta, not both"));
        }
        (Some(t), None) => {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::usage("--temp must be positive and finite"));
            }
            1.0 / t
        }
        (None, Some(b)) => b,
        (None, None) => return Err(CliError::usage("missing required value: --temp or --beta")),
    };
    if !(value > 0.0) || !value.is_finite() {
        return Err(CliError::usage("inverse temperature must be positive and finite"));
    }
    Ok(value)
}
