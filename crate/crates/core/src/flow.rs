//! Real NVP normalizing flows.
//!
//! The flow is a stack of affine coupling layers. Each layer splits sites
//! into an active set and its complement by a binary mask, rescales and
//! shifts the active coordinates by functions of the complement, and passes
//! the complement through untouched:
//!
//! `y'_a = t(u)_a + y_a * exp(s(u)_a)` for active `a`, where `u` is the
//! input with active entries zeroed.
//!
//! Both `s` and `t` are width-N multilayer perceptrons taking the masked
//! full-width vector, so the transform is invertible in closed form and its
//! Jacobian log-determinant is just `sum_a s(u)_a`. The latent prior is the
//! standard normal, which fixes the flow normalizer at `(2 pi)^{N/2}`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{fill_standard_normal, stream_rng};
use crate::spinglass::ln_2pi;

/// Activation applied by the last dense layer of a conditioner network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalActivation {
    /// Bounds log-scales; used by the `s` network.
    Tanh,
    /// Unconstrained shifts; used by the `t` network.
    Identity,
}

/// Negative slope of the leaky rectifier on hidden layers.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Hidden dense layers per conditioner network, before the final layer.
pub const HIDDEN_LAYERS: usize = 3;

/// Fully connected network, all layers width `n`, leaky-rectified hidden
/// layers and a configurable final activation. Weights are row-major
/// `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    width: usize,
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
    final_activation: FinalActivation,
}

impl Mlp {
    /// Uniform `+-1/sqrt(fan_in)` weights, zero biases.
    pub fn init<R: Rng + ?Sized>(width: usize, final_activation: FinalActivation, rng: &mut R) -> Self {
        let bound = 1.0 / libm::sqrt(width as f64);
        let n_dense = HIDDEN_LAYERS + 1;
        let weights = (0..n_dense)
            .map(|_| (0..width * width).map(|_| rng.gen_range(-bound..bound)).collect())
            .collect();
        let biases = (0..n_dense).map(|_| vec![0.0; width]).collect();
        Mlp { width, weights, biases, final_activation }
    }

    /// All-zero parameters; the network output is identically zero, which
    /// makes the enclosing coupling layer the identity map.
    pub fn zeros(width: usize, final_activation: FinalActivation) -> Self {
        let n_dense = HIDDEN_LAYERS + 1;
        Mlp {
            width,
            weights: (0..n_dense).map(|_| vec![0.0; width * width]).collect(),
            biases: (0..n_dense).map(|_| vec![0.0; width]).collect(),
            final_activation,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_dense(&self) -> usize {
        self.weights.len()
    }

    pub fn final_activation(&self) -> FinalActivation {
        self.final_activation
    }

    fn dense(&self, k: usize, input: &[f64], out: &mut [f64]) {
        let n = self.width;
        let w = &self.weights[k];
        let b = &self.biases[k];
        for i in 0..n {
            let row = &w[i * n..(i + 1) * n];
            let mut acc = b[i];
            for (wv, xv) in row.iter().zip(input.iter()) {
                acc += wv * xv;
            }
            out[i] = acc;
        }
    }

    /// Plain evaluation into `out`.
    pub fn forward(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.width);
        let mut cur = input.to_vec();
        let mut next = vec![0.0; self.width];
        for k in 0..self.n_dense() {
            self.dense(k, &cur, &mut next);
            apply_activation(self.activation_at(k), &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        out.copy_from_slice(&cur);
    }

    /// Evaluation that keeps pre-activations for the backward pass.
    pub fn forward_traced(&self, input: &[f64]) -> MlpTrace {
        debug_assert_eq!(input.len(), self.width);
        let mut pre = Vec::with_capacity(self.n_dense());
        let mut post = Vec::with_capacity(self.n_dense());
        let mut cur = input.to_vec();
        for k in 0..self.n_dense() {
            let mut z = vec![0.0; self.width];
            self.dense(k, &cur, &mut z);
            pre.push(z.clone());
            apply_activation(self.activation_at(k), &mut z);
            post.push(z.clone());
            cur = z;
        }
        MlpTrace { input: input.to_vec(), pre, post }
    }

    pub(crate) fn activation_at(&self, k: usize) -> Activation {
        if k + 1 == self.n_dense() {
            match self.final_activation {
                FinalActivation::Tanh => Activation::Tanh,
                FinalActivation::Identity => Activation::Identity,
            }
        } else {
            Activation::LeakyRelu
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Activation {
    LeakyRelu,
    Tanh,
    Identity,
}

fn apply_activation(act: Activation, values: &mut [f64]) {
    match act {
        Activation::LeakyRelu => {
            for v in values {
                if *v < 0.0 {
                    *v *= LEAKY_SLOPE;
                }
            }
        }
        Activation::Tanh => {
            for v in values {
                *v = libm::tanh(*v);
            }
        }
        Activation::Identity => {}
    }
}

/// Saved intermediates of one conditioner evaluation.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub(crate) input: Vec<f64>,
    pub(crate) pre: Vec<Vec<f64>>,
    pub(crate) post: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("at least one dense layer")
    }
}

/// One affine coupling layer: a mask plus its two conditioner networks.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingLayer {
    pub(crate) mask: Vec<bool>,
    pub(crate) s_net: Mlp,
    pub(crate) t_net: Mlp,
}

impl CouplingLayer {
    pub fn new(mask: Vec<bool>, s_net: Mlp, t_net: Mlp) -> Result<Self> {
        let n = mask.len();
        if s_net.width() != n || t_net.width() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s_net.width() });
        }
        if mask.iter().all(|&m| m) || mask.iter().all(|&m| !m) {
            return Err(Error::InvalidArgument("mask must split sites into two non-empty sets"));
        }
        if s_net.final_activation() != FinalActivation::Tanh
            || t_net.final_activation() != FinalActivation::Identity
        {
            return Err(Error::InvalidArgument(
                "scale net must end in tanh and shift net in identity",
            ));
        }
        Ok(CouplingLayer { mask, s_net, t_net })
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Input as seen by the conditioners: active entries zeroed.
    pub(crate) fn masked_input(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.mask.iter())
            .map(|(&v, &active)| if active { 0.0 } else { v })
            .collect()
    }

    /// Forward transform; returns the layer's log |det Jacobian|.
    pub fn forward(&self, y: &[f64], out: &mut [f64]) -> f64 {
        let u = self.masked_input(y);
        let n = y.len();
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        self.s_net.forward(&u, &mut s);
        self.t_net.forward(&u, &mut t);
        let mut log_det = 0.0;
        for i in 0..n {
            if self.mask[i] {
                out[i] = t[i] + y[i] * libm::exp(s[i]);
                log_det += s[i];
            } else {
                out[i] = y[i];
            }
        }
        log_det
    }

    /// Inverse transform; returns the log |det Jacobian| of the inverse map,
    /// which is the negated forward value at the matching point.
    pub fn inverse(&self, y: &[f64], out: &mut [f64]) -> f64 {
        // The conditioners read only complement entries, which the forward
        // map passes through, so the same masked vector reproduces s and t.
        let u = self.masked_input(y);
        let n = y.len();
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        self.s_net.forward(&u, &mut s);
        self.t_net.forward(&u, &mut t);
        let mut log_det = 0.0;
        for i in 0..n {
            if self.mask[i] {
                out[i] = (y[i] - t[i]) * libm::exp(-s[i]);
                log_det -= s[i];
            } else {
                out[i] = y[i];
            }
        }
        log_det
    }
}

/// A full normalizing flow: latent standard normal pushed through `L`
/// coupling layers.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    n_sites: usize,
    layers: Vec<CouplingLayer>,
    seed: u64,
}

impl FlowModel {
    /// Random initialization. Even layers draw each mask bit fair-coin
    /// (redrawn if degenerate); odd layers complement the previous mask.
    /// Weights are uniform `+-1/sqrt(N)`, biases zero, so a fresh model is a
    /// mild perturbation of the identity.
    pub fn init(n_sites: usize, n_layers: usize, seed: u64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidArgument("need at least two sites"));
        }
        if n_layers == 0 {
            return Err(Error::InvalidArgument("need at least one coupling layer"));
        }
        let mut rng = stream_rng(seed, 0);
        let mut layers = Vec::with_capacity(n_layers);
        let mut prev_mask: Vec<bool> = Vec::new();
        for l in 0..n_layers {
            let mask = if l % 2 == 0 {
                loop {
                    let m: Vec<bool> = (0..n_sites).map(|_| rng.gen::<bool>()).collect();
                    if m.iter().any(|&b| b) && m.iter().any(|&b| !b) {
                        break m;
                    }
                }
            } else {
                prev_mask.iter().map(|&b| !b).collect()
            };
            prev_mask = mask.clone();
            let s_net = Mlp::init(n_sites, FinalActivation::Tanh, &mut rng);
            let t_net = Mlp::init(n_sites, FinalActivation::Identity, &mut rng);
            layers.push(CouplingLayer::new(mask, s_net, t_net)?);
        }
        Ok(FlowModel { n_sites, layers, seed })
    }

    /// Assembles a model from explicit layers (used by checkpoint loading).
    pub fn from_layers(layers: Vec<CouplingLayer>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("need at least one coupling layer"));
        }
        let n_sites = layers[0].mask.len();
        if layers.iter().any(|l| l.mask.len() != n_sites) {
            return Err(Error::InvalidArgument("all layers must share one width"));
        }
        Ok(FlowModel { n_sites, layers, seed })
    }

    /// Identity flow (all conditioner parameters zero) for oracles and tests.
    pub fn identity(n_sites: usize, n_layers: usize) -> Result<Self> {
        if n_sites < 2 || n_layers == 0 {
            return Err(Error::InvalidArgument("need two sites and one layer"));
        }
        let layers = (0..n_layers)
            .map(|l| {
                let mask: Vec<bool> = (0..n_sites).map(|i| (i + l) % 2 == 0).collect();
                CouplingLayer::new(
                    mask,
                    Mlp::zeros(n_sites, FinalActivation::Tanh),
                    Mlp::zeros(n_sites, FinalActivation::Identity),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FlowModel { n_sites, layers, seed: 0 })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[CouplingLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [CouplingLayer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_width(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_sites {
            return Err(Error::DimensionMismatch { expected: self.n_sites, got: v.len() });
        }
        Ok(())
    }

    /// Pushes latent `z` through the first `n_layers` layers (the full flow
    /// by default via [`FlowModel::forward`]); returns the image and the log
    /// |det Jacobian| of the partial map.
    pub fn forward_partial(&self, z: &[f64], n_layers: usize) -> Result<(Vec<f64>, f64)> {
        self.check_width(z)?;
        if n_layers > self.layers.len() {
            return Err(Error::InvalidArgument("layer index out of range"));
        }
        let mut cur = z.to_vec();
        let mut next = vec![0.0; self.n_sites];
        let mut log_det = 0.0;
        for layer in &self.layers[..n_layers] {
            log_det += layer.forward(&cur, &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        Ok((cur, log_det))
    }

    pub fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.forward_partial(z, self.layers.len())
    }

    /// Pulls `x` back through the last `n_layers` layers; the full inverse
    /// by default via [`FlowModel::inverse`]. Returns the preimage and the
    /// log |det Jacobian| of the inverse map.
    pub fn inverse_partial(&self, x: &[f64], n_layers: usize) -> Result<(Vec<f64>, f64)> {
        self.check_width(x)?;
        if n_layers > self.layers.len() {
            return Err(Error::InvalidArgument("layer index out of range"));
        }
        let mut cur = x.to_vec();
        let mut next = vec![0.0; self.n_sites];
        let mut log_det = 0.0;
        for layer in self.layers[..n_layers].iter().rev() {
            log_det += layer.inverse(&cur, &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        Ok((cur, log_det))
    }

    pub fn inverse(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.inverse_partial(x, self.layers.len())
    }

    /// Exact model log-density
    /// `ln p(x) = ln p_z(inverse(x)) + log |det d inverse / dx|`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let (z, log_det_inv) = self.inverse(x)?;
        let sq: f64 = z.iter().map(|v| v * v).sum();
        Ok(-0.5 * sq - 0.5 * self.n_sites as f64 * ln_2pi() + log_det_inv)
    }

    /// Hamiltonian of the distribution after `n_layers` layers:
    /// `H_l(y) = |G_l^{-1}(y)|^2 / 2 - log |det d G_l^{-1} / dy|`,
    /// normalized by `(2 pi)^{N/2}` independently of `l`.
    pub fn internal_hamiltonian(&self, y: &[f64], n_layers: usize) -> Result<f64> {
        let (z, log_det_inv) = self.inverse_partial(y, n_layers)?;
        let sq: f64 = z.iter().map(|v| v * v).sum();
        Ok(0.5 * sq - log_det_inv)
    }

    /// Draws `count` samples from the distribution after `n_layers` layers
    /// (`n_layers = 0` is the latent prior, `n_layers = L` the model itself).
    /// Returns rows flattened row-major.
    pub fn sample_partial<R: Rng + ?Sized>(
        &self,
        count: usize,
        n_layers: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if n_layers > self.layers.len() {
            return Err(Error::InvalidArgument("layer index out of range"));
        }
        let n = self.n_sites;
        let mut out = Vec::with_capacity(count * n);
        let mut z = vec![0.0; n];
        for _ in 0..count {
            fill_standard_normal(rng, &mut z);
            let (y, _) = self.forward_partial(&z, n_layers)?;
            out.extend_from_slice(&y);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_point(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 90);
        let mut x = vec![0.0; n];
        fill_standard_normal(&mut rng, &mut x);
        x
    }

    #[test]
    fn identity_flow_is_the_identity() {
        let model = FlowModel::identity(6, 4).unwrap();
        let x = random_point(6, 1);
        let (y, ld) = model.forward(&x).unwrap();
        assert_eq!(ld, 0.0);
        for (a, b) in y.iter().zip(x.iter()) {
            assert_abs_diff_eq!(a, b);
        }
    }

    #[test]
    fn masks_alternate_and_are_never_degenerate() {
        for seed in 0..20 {
            let model = FlowModel::init(8, 4, seed).unwrap();
            for (l, layer) in model.layers().iter().enumerate() {
                let actives = layer.mask().iter().filter(|&&b| b).count();
                assert!(actives > 0 && actives < 8);
                if l % 2 == 1 {
                    let prev = model.layers()[l - 1].mask();
                    for (a, b) in layer.mask().iter().zip(prev) {
                        assert_eq!(*a, !*b);
                    }
                }
            }
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = FlowModel::init(16, 4, 5).unwrap();
        let b = FlowModel::init(16, 4, 5).unwrap();
        assert_eq!(a, b);
        let c = FlowModel::init(16, 4, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn complement_passes_through_unchanged() {
        let model = FlowModel::init(10, 1, 3).unwrap();
        let x = random_point(10, 2);
        let (y, _) = model.forward(&x).unwrap();
        let mask = model.layers()[0].mask();
        for i in 0..10 {
            if !mask[i] {
                assert_eq!(y[i], x[i]);
            }
        }
    }

    #[test]
    fn roundtrip_is_exact_across_widths() {
        for &n in &[4usize, 64, 256] {
            let model = FlowModel::init(n, 4, 11).unwrap();
            let x = random_point(n, n as u64);
            let (y, ld_f) = model.forward(&x).unwrap();
            let (back, ld_i) = model.inverse(&y).unwrap();
            let mut worst = 0.0f64;
            for (a, b) in back.iter().zip(x.iter()) {
                worst = worst.max((a - b).abs());
            }
            assert!(worst < 1e-9, "n={n} roundtrip error {worst}");
            assert_abs_diff_eq!(ld_f + ld_i, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn fresh_model_log_det_is_small() {
        let model = FlowModel::init(64, 4, 9).unwrap();
        let z = random_point(64, 3);
        let (_, ld) = model.forward(&z).unwrap();
        assert!(ld.abs() < 10.0, "log det {ld}");
    }

    #[test]
    fn log_det_matches_numerical_jacobian() {
        let n = 6;
        let model = FlowModel::init(n, 4, 21).unwrap();
        let x = random_point(n, 4);
        let (_, ld) = model.forward(&x).unwrap();
        // Central-difference Jacobian, then determinant by Gaussian
        // elimination with partial pivoting.
        let h = 1e-6;
        let mut jac = vec![0.0; n * n];
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, _) = model.forward(&xp).unwrap();
            let (fm, _) = model.forward(&xm).unwrap();
            for i in 0..n {
                jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let mut det: f64 = 1.0;
        let mut m = jac;
        for col in 0..n {
            let mut p = col;
            for r in (col + 1)..n {
                if m[r * n + col].abs() > m[p * n + col].abs() {
                    p = r;
                }
            }
            if p != col {
                for c in 0..n {
                    m.swap(col * n + c, p * n + c);
                }
                det = -det;
            }
            det *= m[col * n + col];
            for r in (col + 1)..n {
                let f = m[r * n + col] / m[col * n + col];
                for c in col..n {
                    m[r * n + c] -= f * m[col * n + c];
                }
            }
        }
        let rel = (ld - det.abs().ln()).abs() / ld.abs().max(1.0);
        assert!(rel < 1e-5, "log det {ld} vs numerical {}", det.abs().ln());
    }

    #[test]
    fn log_density_agrees_with_change_of_variables() {
        let n = 8;
        let model = FlowModel::init(n, 4, 33).unwrap();
        let z = random_point(n, 5);
        let (x, ld_f) = model.forward(&z).unwrap();
        let lp = model.log_density(&x).unwrap();
        let sq: f64 = z.iter().map(|v| v * v).sum();
        let expect = -0.5 * sq - 0.5 * n as f64 * ln_2pi() - ld_f;
        assert_abs_diff_eq!(lp, expect, epsilon = 1e-9);
    }

    #[test]
    fn identity_flow_log_density_is_the_prior() {
        let model = FlowModel::identity(4, 2).unwrap();
        let x = [0.3, -1.0, 0.5, 2.0];
        let sq: f64 = x.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(
            model.log_density(&x).unwrap(),
            -0.5 * sq - 2.0 * ln_2pi(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn internal_hamiltonian_at_layer_zero_is_quadratic() {
        let model = FlowModel::init(5, 4, 40).unwrap();
        let y = random_point(5, 6);
        let sq: f64 = y.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(model.internal_hamiltonian(&y, 0).unwrap(), 0.5 * sq);
    }

    #[test]
    fn internal_hamiltonian_at_top_matches_log_density() {
        let model = FlowModel::init(5, 4, 41).unwrap();
        let y = random_point(5, 7);
        let h = model.internal_hamiltonian(&y, 4).unwrap();
        let lp = model.log_density(&y).unwrap();
        assert_abs_diff_eq!(h, -lp - 2.5 * ln_2pi(), epsilon = 1e-10);
    }

    #[test]
    fn internal_density_normalizes_by_importance_sampling() {
        // E_{z~N}[exp(-H_l(z) + |z|^2/2)] == 1 for every layer count l.
        let n = 4;
        let model = FlowModel::init(n, 4, 55).unwrap();
        let mut rng = stream_rng(8, 0);
        let m = 200_000;
        for l in [1usize, 4] {
            let mut acc = 0.0;
            let mut acc_sq = 0.0;
            let mut z = vec![0.0; n];
            for _ in 0..m {
                fill_standard_normal(&mut rng, &mut z);
                let sq: f64 = z.iter().map(|v| v * v).sum();
                let w = libm::exp(-model.internal_hamiltonian(&z, l).unwrap() + 0.5 * sq);
                acc += w;
                acc_sq += w * w;
            }
            let mean = acc / m as f64;
            let se = ((acc_sq / m as f64 - mean * mean) / m as f64).sqrt();
            assert!(
                (mean - 1.0).abs() < (5.0 * se).max(0.02),
                "layer {l}: ratio {mean} +- {se}"
            );
        }
    }

    #[test]
    fn sampling_layer_zero_is_the_prior() {
        let model = FlowModel::init(6, 4, 60).unwrap();
        let mut rng = stream_rng(9, 0);
        let rows = model.sample_partial(50_000, 0, &mut rng).unwrap();
        let m = rows.len() as f64;
        let mean: f64 = rows.iter().sum::<f64>() / m;
        let var: f64 = rows.iter().map(|v| v * v).sum::<f64>() / m - mean * mean;
        assert!(mean.abs() < 5.0 / m.sqrt());
        assert!((var - 1.0).abs() < 5.0 * (2.0 / m).sqrt());
    }

    #[test]
    fn sampling_zero_rows_is_empty() {
        let model = FlowModel::init(6, 2, 61).unwrap();
        let mut rng = stream_rng(10, 0);
        assert!(model.sample_partial(0, 2, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn width_and_layer_bounds_are_checked() {
        let model = FlowModel::init(6, 2, 62).unwrap();
        assert!(matches!(
            model.forward(&[0.0; 5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            model.forward_partial(&[0.0; 6], 3),
            Err(Error::InvalidArgument(_))
        ));
        let mut rng = stream_rng(11, 0);
        assert!(model.sample_partial(1, 3, &mut rng).is_err());
        assert!(FlowModel::init(1, 2, 0).is_err());
        assert!(FlowModel::init(6, 0, 0).is_err());
    }
}
