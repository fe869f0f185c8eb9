//! Training loop and the two variational objectives.
//!
//! Reverse mode draws latent batches through the flow and minimizes the
//! batch mean of `beta H_beta(G(z)) + ln p_G(G(z))`, which equals `beta`
//! times the Gibbs free energy of the model and is bounded below by
//! `beta F_x`, the true Helmholtz value. Forward mode minimizes the negative
//! log-likelihood of recorded samples, bounded below by the Shannon entropy
//! of the data distribution. Both bounds tighten exactly when the model
//! matches the target, which turns the loss curve itself into a free-energy
//! or entropy estimator.
//!
//! Batches are split into [`BATCH_LANES`] fixed lanes; each lane walks its
//! slice in order and lanes reduce in lane order, so losses and gradients
//! are bitwise reproducible for a given seed no matter how the lanes are
//! scheduled.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{
    flatten_params, flow_forward_backward, flow_forward_traced, flow_inverse_backward,
    flow_inverse_traced, set_params, FlowGrads,
};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flow::FlowModel;
use crate::pt::SampleSet;
use crate::rng::{fill_standard_normal, stream_rng, ChaCha8Rng};
use crate::spinglass::{ln_2pi, ShiftedCoupling};

use rand::Rng;

/// Which variational objective drives the updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Latent draws through the model against the target density.
    Reverse,
    /// Negative log-likelihood of a recorded dataset.
    Forward,
}

/// First/second-moment optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Full training run description.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_updates: u64,
    /// Inverse temperature of the target density.
    pub beta: f64,
    /// Averages the model density over the global sign flip. Only
    /// meaningful against the reverse objective, where it spares the model
    /// from having to break the +-x symmetry of a zero-field target.
    pub symmetrize: bool,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Evaluation cadence in updates; 0 disables snapshots.
    pub snapshot_every: u64,
    /// Fresh-sample count per evaluation snapshot.
    pub eval_batch_size: usize,
    /// Checkpoint cadence in updates; 0 disables checkpoints.
    pub checkpoint_every: u64,
    /// Rescales gradients above this norm; off by default.
    pub max_grad_norm: Option<f64>,
}

impl TrainConfig {
    pub fn new(loss_kind: LossKind, beta: f64, n_updates: u64, seed: u64) -> Self {
        TrainConfig {
            loss_kind,
            learning_rate: 1e-4,
            batch_size: 50,
            n_updates,
            beta,
            symmetrize: loss_kind == LossKind::Reverse,
            seed,
            adam: AdamConfig::default(),
            snapshot_every: 1000,
            eval_batch_size: 1000,
            checkpoint_every: 1000,
            max_grad_norm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument("beta must be positive and finite"));
        }
        if self.symmetrize && self.loss_kind != LossKind::Reverse {
            return Err(Error::InvalidArgument("symmetrize applies to reverse training only"));
        }
        if self.eval_batch_size == 0 {
            return Err(Error::InvalidArgument("evaluation batch size must be positive"));
        }
        let a = &self.adam;
        if !(a.beta1 > 0.0 && a.beta1 < 1.0 && a.beta2 > 0.0 && a.beta2 < 1.0 && a.epsilon > 0.0) {
            return Err(Error::InvalidArgument("optimizer moments must lie in (0, 1)"));
        }
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument("gradient norm cap must be positive"));
            }
        }
        Ok(())
    }
}

/// One periodic evaluation of the loss on fresh samples, with its Monte
/// Carlo standard error. `wall_time` comes from the observer's clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub update_index: u64,
    pub loss: f64,
    pub std_error: f64,
    pub wall_time: f64,
}

/// Everything measured during a run: one training-loss value per completed
/// update plus the evaluation snapshots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossTrace {
    pub losses: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

/// Side-channel for concerns the training loop cannot own itself: wall
/// clocks and checkpoint persistence.
pub trait TrainObserver {
    /// Seconds since an arbitrary origin.
    fn now(&mut self) -> f64;
    /// Called when a checkpoint falls due, with the current parameters.
    fn on_checkpoint(&mut self, update_index: u64, model: &FlowModel);
}

/// Observer with no clock and no checkpoint sink.
pub struct NullObserver;

impl TrainObserver for NullObserver {
    fn now(&mut self) -> f64 {
        0.0
    }
    fn on_checkpoint(&mut self, _update_index: u64, _model: &FlowModel) {}
}

/// Lane count for batch splitting. Fixed so results never depend on how
/// many threads the executor actually has.
pub const BATCH_LANES: usize = 8;

const STREAM_BATCH: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_SHUFFLE_BASE: u64 = 16;

enum Objective<'a> {
    Reverse { sc: &'a ShiftedCoupling, beta: f64, symmetrize: bool },
    Forward,
}

struct Lane {
    start: usize,
    end: usize,
    loss: Vec<f64>,
    grads: Option<FlowGrads>,
    failed: bool,
}

/// Per-sample losses (in batch order) and, when requested, the batch-summed
/// gradients. `rows` is row-major `count x n_sites`: latent draws for the
/// reverse objective, data points for the forward one.
fn batch_objective(
    model: &FlowModel,
    objective: &Objective,
    rows: &[f64],
    want_grads: bool,
    exec: &impl Executor,
) -> Result<(Vec<f64>, Option<FlowGrads>)> {
    let n = model.n_sites();
    if rows.is_empty() || rows.len() % n != 0 {
        return Err(Error::InvalidArgument("batch must hold a positive number of full rows"));
    }
    let count = rows.len() / n;
    if let Objective::Reverse { sc, .. } = objective {
        if sc.n_spins() != n {
            return Err(Error::DimensionMismatch { expected: n, got: sc.n_spins() });
        }
    }

    let per_lane = count.div_ceil(BATCH_LANES);
    let mut lanes: Vec<Lane> = (0..BATCH_LANES)
        .map(|l| {
            let start = (l * per_lane).min(count);
            Lane {
                start,
                end: ((l + 1) * per_lane).min(count),
                loss: Vec::new(),
                grads: if want_grads { Some(FlowGrads::zeros(model)) } else { None },
                failed: false,
            }
        })
        .collect();

    exec.map_inplace(&mut lanes, |lane| {
        for i in lane.start..lane.end {
            let row = &rows[i * n..(i + 1) * n];
            match sample_objective(model, objective, row, lane.grads.as_mut()) {
                Ok(v) if v.is_finite() => lane.loss.push(v),
                _ => {
                    lane.failed = true;
                    return;
                }
            }
        }
    });

    let mut losses = Vec::with_capacity(count);
    let mut grads = want_grads.then(|| FlowGrads::zeros(model));
    for lane in &lanes {
        if lane.failed {
            return Err(Error::NumericFailure("loss became non-finite"));
        }
        losses.extend_from_slice(&lane.loss);
        if let (Some(total), Some(part)) = (grads.as_mut(), lane.grads.as_ref()) {
            total.accumulate(part);
        }
    }
    Ok((losses, grads))
}

fn sample_objective(
    model: &FlowModel,
    objective: &Objective,
    row: &[f64],
    grads: Option<&mut FlowGrads>,
) -> Result<f64> {
    let n = model.n_sites() as f64;
    let half_ln_norm = 0.5 * n * ln_2pi();
    match *objective {
        Objective::Forward => {
            let (z, log_det_inv, tape) = flow_inverse_traced(model, row)?;
            let sq: f64 = z.iter().map(|v| v * v).sum();
            let loss = 0.5 * sq + half_ln_norm - log_det_inv;
            if let Some(g) = grads {
                flow_inverse_backward(model, &tape, &z, -1.0, g);
            }
            Ok(loss)
        }
        Objective::Reverse { sc, beta, symmetrize } => {
            let (x, log_det_fwd, tape) = flow_forward_traced(model, row)?;
            let h = sc.hamiltonian_density(&x, beta)?;
            let zsq: f64 = row.iter().map(|v| v * v).sum();
            let log_p_here = -0.5 * zsq - half_ln_norm - log_det_fwd;
            if !symmetrize {
                let loss = beta * h + log_p_here;
                if let Some(g) = grads {
                    let mut d_x = sc.grad_hamiltonian_density(&x, beta)?;
                    for v in &mut d_x {
                        *v *= beta;
                    }
                    flow_forward_backward(model, &tape, &d_x, -1.0, g);
                }
                return Ok(loss);
            }
            // Density averaged with its mirror image: both evaluations are
            // exact, one through the tape already in hand, the other by
            // pulling back the reflected point.
            let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
            let (z_mirror, log_det_inv, inv_tape) = flow_inverse_traced(model, &neg_x)?;
            let msq: f64 = z_mirror.iter().map(|v| v * v).sum();
            let log_p_mirror = -0.5 * msq - half_ln_norm + log_det_inv;
            let m = log_p_here.max(log_p_mirror);
            let log_sum = m + libm::log(libm::exp(log_p_here - m) + libm::exp(log_p_mirror - m));
            let log_p_sym = log_sum - libm::log(2.0);
            let loss = beta * h + log_p_sym;
            if let Some(g) = grads {
                let w_here = libm::exp(log_p_here - log_sum);
                let w_mirror = libm::exp(log_p_mirror - log_sum);
                let d_z_mirror: Vec<f64> = z_mirror.iter().map(|v| -w_mirror * v).collect();
                let d_neg_x = flow_inverse_backward(model, &inv_tape, &d_z_mirror, w_mirror, g);
                let grad_h = sc.grad_hamiltonian_density(&x, beta)?;
                let d_x: Vec<f64> = grad_h
                    .iter()
                    .zip(d_neg_x.iter())
                    .map(|(gh, dnx)| beta * gh - dnx)
                    .collect();
                flow_forward_backward(model, &tape, &d_x, -w_here, g);
            }
            Ok(loss)
        }
    }
}

fn mean_and_grads(
    model: &FlowModel,
    objective: &Objective,
    rows: &[f64],
    exec: &impl Executor,
) -> Result<(f64, FlowGrads)> {
    let (losses, grads) = batch_objective(model, objective, rows, true, exec)?;
    let count = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / count;
    let mut grads = grads.expect("gradients requested");
    grads.scale(1.0 / count);
    Ok((mean, grads))
}

/// Reverse objective on a batch of latent rows: mean per-sample loss and
/// its parameter gradient.
pub fn reverse_kl_loss(
    model: &FlowModel,
    sc: &ShiftedCoupling,
    beta: f64,
    latent_rows: &[f64],
    symmetrize: bool,
    exec: &impl Executor,
) -> Result<(f64, FlowGrads)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument("beta must be positive and finite"));
    }
    mean_and_grads(model, &Objective::Reverse { sc, beta, symmetrize }, latent_rows, exec)
}

/// Forward objective on a batch of data rows: mean negative log-likelihood
/// and its parameter gradient.
pub fn forward_kl_loss(
    model: &FlowModel,
    data_rows: &[f64],
    exec: &impl Executor,
) -> Result<(f64, FlowGrads)> {
    mean_and_grads(model, &Objective::Forward, data_rows, exec)
}

/// One bias-corrected moment update over flat parameter vectors.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    first_moment: &mut [f64],
    second_moment: &mut [f64],
    step_index: u64,
    learning_rate: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let len = params.len();
    if grads.len() != len || first_moment.len() != len || second_moment.len() != len {
        return Err(Error::DimensionMismatch { expected: len, got: grads.len() });
    }
    if step_index == 0 {
        return Err(Error::InvalidArgument("step index starts at one"));
    }
    let b1 = cfg.beta1;
    let b2 = cfg.beta2;
    let bias1 = 1.0 - libm::pow(b1, step_index as f64);
    let bias2 = 1.0 - libm::pow(b2, step_index as f64);
    for i in 0..len {
        let g = grads[i];
        first_moment[i] = b1 * first_moment[i] + (1.0 - b1) * g;
        second_moment[i] = b2 * second_moment[i] + (1.0 - b2) * g * g;
        let m_hat = first_moment[i] / bias1;
        let v_hat = second_moment[i] / bias2;
        params[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
    }
    Ok(())
}

struct EvalPlan {
    /// Row-major eval inputs, fixed for the whole run so snapshots share
    /// their randomness and the loss curve is smooth in the parameters.
    rows: Vec<f64>,
}

impl EvalPlan {
    fn build(
        cfg: &TrainConfig,
        n: usize,
        dataset: Option<&SampleSet>,
        rng: &mut ChaCha8Rng,
    ) -> EvalPlan {
        let count = cfg.eval_batch_size;
        let mut rows = vec![0.0; count * n];
        match cfg.loss_kind {
            LossKind::Reverse => fill_standard_normal(rng, &mut rows),
            LossKind::Forward => {
                let ds = dataset.expect("validated");
                let xs = ds.xs.as_ref().expect("validated");
                for chunk in rows.chunks_mut(n) {
                    let pick = rng.gen_range(0..ds.n_samples);
                    chunk.copy_from_slice(&xs[pick * n..(pick + 1) * n]);
                }
            }
        }
        EvalPlan { rows }
    }
}

fn snapshot(
    model: &FlowModel,
    objective: &Objective,
    plan: &EvalPlan,
    update_index: u64,
    exec: &impl Executor,
    observer: &mut impl TrainObserver,
) -> Result<Snapshot> {
    let (losses, _) = batch_objective(model, objective, &plan.rows, false, exec)?;
    let count = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / count;
    let var = losses.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    Ok(Snapshot {
        update_index,
        loss: mean,
        std_error: libm::sqrt(var / count),
        wall_time: observer.now(),
    })
}

/// Runs `cfg.n_updates` optimizer steps from `model` and returns the
/// trained model with its trace. Forward mode requires a dataset carrying
/// continuous samples for this disorder realization; reverse mode draws its
/// own batches and takes no dataset.
pub fn train(
    model: FlowModel,
    cfg: &TrainConfig,
    sc: &ShiftedCoupling,
    dataset: Option<&SampleSet>,
    exec: &impl Executor,
    observer: &mut impl TrainObserver,
) -> Result<(FlowModel, LossTrace)> {
    cfg.validate()?;
    let n = model.n_sites();
    if sc.n_spins() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sc.n_spins() });
    }
    match cfg.loss_kind {
        LossKind::Forward => {
            let ds = dataset.ok_or(Error::InvalidArgument("forward training needs a dataset"))?;
            let xs_present = ds.xs.is_some();
            if !xs_present {
                return Err(Error::InvalidArgument("dataset lacks continuous samples"));
            }
            if ds.n_spins != n {
                return Err(Error::DimensionMismatch { expected: n, got: ds.n_spins });
            }
            if ds.disorder_id != sc.base().content_id() {
                return Err(Error::InvalidArgument("dataset belongs to another realization"));
            }
            if (ds.beta - cfg.beta).abs() > 1e-12 * cfg.beta.abs() {
                return Err(Error::InvalidArgument("dataset temperature differs from target"));
            }
            if ds.n_samples < cfg.batch_size {
                return Err(Error::InvalidArgument("dataset smaller than one batch"));
            }
        }
        LossKind::Reverse => {
            if dataset.is_some() {
                return Err(Error::InvalidArgument("reverse training takes no dataset"));
            }
        }
    }

    let objective = match cfg.loss_kind {
        LossKind::Reverse => {
            Objective::Reverse { sc, beta: cfg.beta, symmetrize: cfg.symmetrize }
        }
        LossKind::Forward => Objective::Forward,
    };

    let mut eval_rng = stream_rng(cfg.seed, STREAM_EVAL);
    let plan = (cfg.snapshot_every > 0)
        .then(|| EvalPlan::build(cfg, n, dataset, &mut eval_rng));

    let mut model = model;
    let mut trace = LossTrace::default();
    if let Some(plan) = &plan {
        trace.snapshots.push(snapshot(&model, &objective, plan, 0, exec, observer)?);
    }
    if cfg.n_updates == 0 {
        return Ok((model, trace));
    }

    let mut params = flatten_params(&model);
    let mut first_moment = vec![0.0; params.len()];
    let mut second_moment = vec![0.0; params.len()];

    let mut batch_rng = stream_rng(cfg.seed, STREAM_BATCH);
    let mut batch = vec![0.0; cfg.batch_size * n];

    // Forward mode walks a reshuffled epoch order; indices refill lazily.
    let mut epoch: u64 = 0;
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0usize;

    for update in 1..=cfg.n_updates {
        match cfg.loss_kind {
            LossKind::Reverse => fill_standard_normal(&mut batch_rng, &mut batch),
            LossKind::Forward => {
                let ds = dataset.expect("validated");
                let xs = ds.xs.as_ref().expect("validated");
                for b in 0..cfg.batch_size {
                    if cursor >= order.len() {
                        order = shuffled_indices(ds.n_samples, cfg.seed, epoch);
                        epoch += 1;
                        cursor = 0;
                    }
                    let pick = order[cursor];
                    cursor += 1;
                    batch[b * n..(b + 1) * n].copy_from_slice(&xs[pick * n..(pick + 1) * n]);
                }
            }
        }

        let (loss, mut grads) = mean_and_grads(&model, &objective, &batch, exec)?;
        if let Some(cap) = cfg.max_grad_norm {
            let norm = grads.norm();
            if norm > cap {
                grads.scale(cap / norm);
            }
        }
        adam_step(
            &mut params,
            &grads.flatten(),
            &mut first_moment,
            &mut second_moment,
            update,
            cfg.learning_rate,
            &cfg.adam,
        )?;
        set_params(&mut model, &params)?;
        trace.losses.push(loss);

        if cfg.snapshot_every > 0 && (update % cfg.snapshot_every == 0 || update == cfg.n_updates)
        {
            let plan = plan.as_ref().expect("snapshots enabled");
            trace.snapshots.push(snapshot(&model, &objective, plan, update, exec, observer)?);
        }
        if cfg.checkpoint_every > 0
            && (update % cfg.checkpoint_every == 0 || update == cfg.n_updates)
        {
            observer.on_checkpoint(update, &model);
        }
    }
    Ok((model, trace))
}

fn shuffled_indices(count: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = stream_rng(seed, STREAM_SHUFFLE_BASE + epoch);
    for i in (1..count).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}
