//! Reverse-mode differentiation for the flow.
//!
//! Training needs exact gradients of objectives that mix the flow map, its
//! log-determinant, and closed-form densities, with respect to every
//! conditioner weight and to the flow's input. Instead of a generic scalar
//! tape, each pass records exactly the intermediates its backward pass
//! consumes: per-dense pre-activations inside the conditioners, plus the
//! layer input of each coupling step. Backward functions accumulate into
//! caller-owned gradient buffers so one buffer can absorb a whole batch.
//!
//! Parameter order everywhere (gradients, flattening, checkpoints): layers
//! in flow order; within a layer the scale net then the shift net; within a
//! net dense layers in order; within a dense layer row-major weights then
//! the bias.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::{Activation, CouplingLayer, FlowModel, Mlp, MlpTrace, LEAKY_SLOPE};

/// Gradient buffer shaped like one [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn accumulate(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(other.weights.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(other.biases.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= factor;
            }
        }
    }
}

fn activation_derivative(act: Activation, pre: f64, post: f64) -> f64 {
    match act {
        Activation::LeakyRelu => {
            if pre < 0.0 {
                LEAKY_SLOPE
            } else {
                1.0
            }
        }
        Activation::Tanh => 1.0 - post * post,
        Activation::Identity => 1.0,
    }
}

/// Backpropagates `d_out` through a traced conditioner evaluation.
/// Accumulates parameter gradients into `grads` and returns the gradient
/// with respect to the network input.
pub fn mlp_backward(net: &Mlp, trace: &MlpTrace, d_out: &[f64], grads: &mut MlpGrads) -> Vec<f64> {
    let n = net.width();
    debug_assert_eq!(d_out.len(), n);
    let mut d_post = d_out.to_vec();
    let mut d_pre = vec![0.0; n];
    for k in (0..net.n_dense()).rev() {
        let act = net.activation_at(k);
        let pre = &trace.pre[k];
        let post = &trace.post[k];
        for i in 0..n {
            d_pre[i] = d_post[i] * activation_derivative(act, pre[i], post[i]);
        }
        let input: &[f64] = if k == 0 { &trace.input } else { &trace.post[k - 1] };
        let gw = &mut grads.weights[k];
        let gb = &mut grads.biases[k];
        for i in 0..n {
            let g = d_pre[i];
            gb[i] += g;
            let row = &mut gw[i * n..(i + 1) * n];
            for (gv, xv) in row.iter_mut().zip(input.iter()) {
                *gv += g * xv;
            }
        }
        let w = &net.weights[k];
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += w[i * n + j] * d_pre[i];
            }
            d_post[j] = acc;
        }
    }
    d_post
}

/// Intermediates of one coupling step, either direction. `input` is the
/// point fed to the step; the conditioner traces share the masked vector.
#[derive(Debug, Clone)]
pub struct CouplingTrace {
    pub(crate) input: Vec<f64>,
    pub(crate) s_trace: MlpTrace,
    pub(crate) t_trace: MlpTrace,
}

/// Forward coupling step that records its tape. Returns the image, the
/// layer's log |det Jacobian|, and the trace.
pub fn coupling_forward_traced(layer: &CouplingLayer, y: &[f64]) -> (Vec<f64>, f64, CouplingTrace) {
    let u = layer.masked_input(y);
    let s_trace = layer.s_net.forward_traced(&u);
    let t_trace = layer.t_net.forward_traced(&u);
    let s = s_trace.output();
    let t = t_trace.output();
    let n = y.len();
    let mut out = vec![0.0; n];
    let mut log_det = 0.0;
    for i in 0..n {
        if layer.mask[i] {
            out[i] = t[i] + y[i] * libm::exp(s[i]);
            log_det += s[i];
        } else {
            out[i] = y[i];
        }
    }
    (out, log_det, CouplingTrace { input: y.to_vec(), s_trace, t_trace })
}

/// Backward pass of the forward coupling step. `d_out` is the gradient at
/// the step's output, `d_log_det` the gradient at its log-determinant
/// contribution. Returns the gradient at the step's input.
pub fn coupling_forward_backward(
    layer: &CouplingLayer,
    trace: &CouplingTrace,
    d_out: &[f64],
    d_log_det: f64,
    s_grads: &mut MlpGrads,
    t_grads: &mut MlpGrads,
) -> Vec<f64> {
    let n = trace.input.len();
    let s = trace.s_trace.output();
    let mut d_s = vec![0.0; n];
    let mut d_t = vec![0.0; n];
    for i in 0..n {
        if layer.mask[i] {
            d_s[i] = d_out[i] * trace.input[i] * libm::exp(s[i]) + d_log_det;
            d_t[i] = d_out[i];
        }
    }
    let d_u_s = mlp_backward(&layer.s_net, &trace.s_trace, &d_s, s_grads);
    let d_u_t = mlp_backward(&layer.t_net, &trace.t_trace, &d_t, t_grads);
    let mut d_in = vec![0.0; n];
    for i in 0..n {
        // Masked entries reach the conditioners as zeros, so their only
        // path is the affine transform; complement entries pass through
        // and also feed both conditioners.
        if layer.mask[i] {
            d_in[i] = d_out[i] * libm::exp(s[i]);
        } else {
            d_in[i] = d_out[i] + d_u_s[i] + d_u_t[i];
        }
    }
    d_in
}

/// Inverse coupling step that records its tape. Returns the preimage, the
/// inverse map's log |det Jacobian| contribution, and the trace.
pub fn coupling_inverse_traced(layer: &CouplingLayer, y: &[f64]) -> (Vec<f64>, f64, CouplingTrace) {
    let u = layer.masked_input(y);
    let s_trace = layer.s_net.forward_traced(&u);
    let t_trace = layer.t_net.forward_traced(&u);
    let s = s_trace.output();
    let t = t_trace.output();
    let n = y.len();
    let mut out = vec![0.0; n];
    let mut log_det = 0.0;
    for i in 0..n {
        if layer.mask[i] {
            out[i] = (y[i] - t[i]) * libm::exp(-s[i]);
            log_det -= s[i];
        } else {
            out[i] = y[i];
        }
    }
    (out, log_det, CouplingTrace { input: y.to_vec(), s_trace, t_trace })
}

/// Backward pass of the inverse coupling step, mirroring
/// [`coupling_forward_backward`].
pub fn coupling_inverse_backward(
    layer: &CouplingLayer,
    trace: &CouplingTrace,
    d_out: &[f64],
    d_log_det: f64,
    s_grads: &mut MlpGrads,
    t_grads: &mut MlpGrads,
) -> Vec<f64> {
    let n = trace.input.len();
    let s = trace.s_trace.output();
    let t = trace.t_trace.output();
    let mut d_s = vec![0.0; n];
    let mut d_t = vec![0.0; n];
    for i in 0..n {
        if layer.mask[i] {
            let e = libm::exp(-s[i]);
            let out_i = (trace.input[i] - t[i]) * e;
            d_s[i] = -d_out[i] * out_i - d_log_det;
            d_t[i] = -d_out[i] * e;
        }
    }
    let d_u_s = mlp_backward(&layer.s_net, &trace.s_trace, &d_s, s_grads);
    let d_u_t = mlp_backward(&layer.t_net, &trace.t_trace, &d_t, t_grads);
    let mut d_in = vec![0.0; n];
    for i in 0..n {
        if layer.mask[i] {
            d_in[i] = d_out[i] * libm::exp(-s[i]);
        } else {
            d_in[i] = d_out[i] + d_u_s[i] + d_u_t[i];
        }
    }
    d_in
}

/// Gradient buffer for one coupling layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub(crate) s: MlpGrads,
    pub(crate) t: MlpGrads,
}

/// Gradient buffer shaped like a whole [`FlowModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGrads {
    pub(crate) layers: Vec<LayerGrads>,
}

impl FlowGrads {
    pub fn zeros(model: &FlowModel) -> Self {
        FlowGrads {
            layers: model
                .layers()
                .iter()
                .map(|l| LayerGrads {
                    s: MlpGrads::zeros_like(&l.s_net),
                    t: MlpGrads::zeros_like(&l.t_net),
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &FlowGrads) {
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            a.s.accumulate(&b.s);
            a.t.accumulate(&b.t);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.s.scale(factor);
            l.t.scale(factor);
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| [&l.s, &l.t])
            .map(|g| {
                g.weights.iter().map(Vec::len).sum::<usize>()
                    + g.biases.iter().map(Vec::len).sum::<usize>()
            })
            .sum()
    }

    /// Canonical flat view; same order as [`flatten_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            for g in [&l.s, &l.t] {
                for (w, b) in g.weights.iter().zip(g.biases.iter()) {
                    out.extend_from_slice(w);
                    out.extend_from_slice(b);
                }
            }
        }
        out
    }

    /// Euclidean norm of the flattened gradient.
    pub fn norm(&self) -> f64 {
        let mut sq = 0.0;
        for l in &self.layers {
            for g in [&l.s, &l.t] {
                for w in &g.weights {
                    for v in w {
                        sq += v * v;
                    }
                }
                for b in &g.biases {
                    for v in b {
                        sq += v * v;
                    }
                }
            }
        }
        libm::sqrt(sq)
    }
}

fn for_each_param_slice(net: &mut Mlp, f: &mut impl FnMut(&mut [f64])) {
    for k in 0..net.weights.len() {
        f(&mut net.weights[k]);
        f(&mut net.biases[k]);
    }
}

/// Every trainable parameter in canonical order.
pub fn flatten_params(model: &FlowModel) -> Vec<f64> {
    let mut out = Vec::new();
    for l in model.layers() {
        for net in [&l.s_net, &l.t_net] {
            for (w, b) in net.weights.iter().zip(net.biases.iter()) {
                out.extend_from_slice(w);
                out.extend_from_slice(b);
            }
        }
    }
    out
}

/// Writes a canonical flat vector back into the model.
pub fn set_params(model: &mut FlowModel, values: &[f64]) -> Result<()> {
    let expected: usize = flatten_params(model).len();
    if values.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: values.len() });
    }
    let mut cursor = 0usize;
    for l in model.layers_mut() {
        for net in [&mut l.s_net, &mut l.t_net] {
            for_each_param_slice(net, &mut |slice: &mut [f64]| {
                slice.copy_from_slice(&values[cursor..cursor + slice.len()]);
                cursor += slice.len();
            });
        }
    }
    Ok(())
}

/// Whole-flow forward tape: one trace per layer, in flow order.
#[derive(Debug, Clone)]
pub struct FlowForwardTape {
    pub(crate) traces: Vec<CouplingTrace>,
}

/// Forward pass through every layer, recording the tape.
pub fn flow_forward_traced(model: &FlowModel, z: &[f64]) -> Result<(Vec<f64>, f64, FlowForwardTape)> {
    if z.len() != model.n_sites() {
        return Err(Error::DimensionMismatch { expected: model.n_sites(), got: z.len() });
    }
    let mut traces = Vec::with_capacity(model.n_layers());
    let mut cur = z.to_vec();
    let mut log_det = 0.0;
    for layer in model.layers() {
        let (next, ld, trace) = coupling_forward_traced(layer, &cur);
        traces.push(trace);
        log_det += ld;
        cur = next;
    }
    Ok((cur, log_det, FlowForwardTape { traces }))
}

/// Backpropagates through a recorded forward pass. `d_x` is the gradient at
/// the flow output, `d_log_det` at the total forward log-determinant.
/// Accumulates into `grads` and returns the gradient at the latent input.
pub fn flow_forward_backward(
    model: &FlowModel,
    tape: &FlowForwardTape,
    d_x: &[f64],
    d_log_det: f64,
    grads: &mut FlowGrads,
) -> Vec<f64> {
    debug_assert_eq!(tape.traces.len(), model.n_layers());
    let mut d_cur = d_x.to_vec();
    for (l, layer) in model.layers().iter().enumerate().rev() {
        let lg = &mut grads.layers[l];
        d_cur = coupling_forward_backward(layer, &tape.traces[l], &d_cur, d_log_det, &mut lg.s, &mut lg.t);
    }
    d_cur
}

/// Whole-flow inverse tape. `traces[j]` belongs to layer `L - 1 - j`, the
/// order the inverse applies them.
#[derive(Debug, Clone)]
pub struct FlowInverseTape {
    pub(crate) traces: Vec<CouplingTrace>,
}

/// Inverse pass through every layer, recording the tape. Returns the
/// preimage and the inverse map's total log |det Jacobian|.
pub fn flow_inverse_traced(model: &FlowModel, x: &[f64]) -> Result<(Vec<f64>, f64, FlowInverseTape)> {
    if x.len() != model.n_sites() {
        return Err(Error::DimensionMismatch { expected: model.n_sites(), got: x.len() });
    }
    let mut traces = Vec::with_capacity(model.n_layers());
    let mut cur = x.to_vec();
    let mut log_det = 0.0;
    for layer in model.layers().iter().rev() {
        let (next, ld, trace) = coupling_inverse_traced(layer, &cur);
        traces.push(trace);
        log_det += ld;
        cur = next;
    }
    Ok((cur, log_det, FlowInverseTape { traces }))
}

/// Backpropagates through a recorded inverse pass. `d_z` is the gradient at
/// the preimage, `d_log_det` at the inverse log-determinant. Returns the
/// gradient at the point that was pulled back.
pub fn flow_inverse_backward(
    model: &FlowModel,
    tape: &FlowInverseTape,
    d_z: &[f64],
    d_log_det: f64,
    grads: &mut FlowGrads,
) -> Vec<f64> {
    let n_layers = model.n_layers();
    debug_assert_eq!(tape.traces.len(), n_layers);
    let mut d_cur = d_z.to_vec();
    for j in (0..n_layers).rev() {
        let l = n_layers - 1 - j;
        let layer = &model.layers()[l];
        let lg = &mut grads.layers[l];
        d_cur =
            coupling_inverse_backward(layer, &tape.traces[j], &d_cur, d_log_det, &mut lg.s, &mut lg.t);
    }
    d_cur
}
