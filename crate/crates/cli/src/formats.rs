//! Container file formats.
//!
//! Every artifact is a single file: one line of JSON (the manifest,
//! terminated by `\n`) followed by raw little-endian payloads in the order
//! the manifest declares. Laid out field by field in docs/FORMATS.md.
//! Writers are deterministic, so rewriting an unchanged value reproduces
//! the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use glassflow_core::flow::{CouplingLayer, FinalActivation, FlowModel, Mlp, HIDDEN_LAYERS};
use glassflow_core::autodiff::{flatten_params, set_params};
use glassflow_core::linalg::Matrix;
use glassflow_core::pt::{SampleMeta, SampleSet};
use glassflow_core::spinglass::DisorderRealization;
use glassflow_core::train::Snapshot;
use glassflow_core::analytics::{OverlapHistogram, TriangleStats};

use crate::errors::{CliError, Result};

pub const DISORDER_VERSION: u32 = 1;
pub const SAMPLES_VERSION: u32 = 1;
pub const CHECKPOINT_VERSION: u32 = 1;

/// Splits a container into its manifest line and payload bytes.
fn split_container(bytes: &[u8], path: &Path) -> Result<(String, Vec<u8>)> {
    let pos = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CliError::Io(format!("{}: missing manifest line", path.display())))?;
    let manifest = String::from_utf8(bytes[..pos].to_vec())
        .map_err(|_| CliError::Io(format!("{}: manifest is not utf-8", path.display())))?;
    Ok((manifest, bytes[pos + 1..].to_vec()))
}

fn manifest_bytes<T: Serialize>(manifest: &T) -> Vec<u8> {
    let mut line = serde_json::to_vec(manifest).expect("manifest serialization cannot fail");
    line.push(b'\n');
    line
}

fn parse_manifest<'a, T: Deserialize<'a>>(line: &'a str, path: &Path) -> Result<T> {
    serde_json::from_str(line)
        .map_err(|e| CliError::Io(format!("{}: bad manifest: {e}", path.display())))
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    buf.reserve(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn take_f64s(payload: &[u8], cursor: &mut usize, count: usize, path: &Path) -> Result<Vec<f64>> {
    let bytes = count * 8;
    let end = *cursor + bytes;
    if payload.len() < end {
        return Err(CliError::Io(format!("{}: payload truncated", path.display())));
    }
    let out = payload[*cursor..end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks are 8 bytes")))
        .collect();
    *cursor = end;
    Ok(out)
}

fn expect_consumed(payload: &[u8], cursor: usize, path: &Path) -> Result<()> {
    if payload.len() != cursor {
        return Err(CliError::Io(format!("{}: trailing bytes after payload", path.display())));
    }
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io_at(path, e))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io_at(path, e))
}

// --- disorder files -------------------------------------------------------

/// Manifest of a coupling-realization file. Payload: couplings (n*n f64),
/// then fields (n f64), row-major little-endian.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisorderManifest {
    version: u32,
    n: usize,
    scale: f64,
    seed: u64,
    epsilon: f64,
    format: String,
}

pub fn write_disorder(path: &Path, d: &DisorderRealization, epsilon: f64) -> Result<()> {
    let manifest = DisorderManifest {
        version: DISORDER_VERSION,
        n: d.n_spins(),
        scale: d.scale(),
        seed: d.seed(),
        epsilon,
        format: "f64le".to_string(),
    };
    let mut buf = manifest_bytes(&manifest);
    push_f64s(&mut buf, d.couplings().data());
    push_f64s(&mut buf, d.fields());
    write_atomic(path, &buf)
}

/// Reads a coupling realization and the positive-definite floor stored with
/// it.
pub fn read_disorder(path: &Path) -> Result<(DisorderRealization, f64)> {
    let bytes = read_all(path)?;
    let (line, payload) = split_container(&bytes, path)?;
    let m: DisorderManifest = parse_manifest(&line, path)?;
    if m.version != DISORDER_VERSION {
        return Err(CliError::Io(format!("{}: unsupported version {}", path.display(), m.version)));
    }
    if m.format != "f64le" {
        return Err(CliError::Io(format!("{}: unsupported payload format", path.display())));
    }
    let mut cursor = 0;
    let couplings = take_f64s(&payload, &mut cursor, m.n * m.n, path)?;
    let fields = take_f64s(&payload, &mut cursor, m.n, path)?;
    expect_consumed(&payload, cursor, path)?;
    let couplings = Matrix::from_vec(m.n, m.n, couplings)?;
    let d = DisorderRealization::from_parts(couplings, fields, m.scale, m.seed)?;
    Ok((d, m.epsilon))
}

// --- sample files ---------------------------------------------------------

/// Manifest of a recorded sample batch at one temperature. Payload: spins
/// (m*n int8, values +-1), then continuous rows (m*n f64) when `has_xs`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleManifest {
    version: u32,
    disorder_id: String,
    beta: f64,
    m: usize,
    n: usize,
    has_xs: bool,
    seed: u64,
    sweeps: u32,
    burn_in: u64,
}

pub fn write_sample_set(path: &Path, set: &SampleSet) -> Result<()> {
    set.validate()?;
    let manifest = SampleManifest {
        version: SAMPLES_VERSION,
        disorder_id: set.disorder_id.clone(),
        beta: set.beta,
        m: set.n_samples,
        n: set.n_spins,
        has_xs: set.xs.is_some(),
        seed: set.meta.seed,
        sweeps: set.meta.sweeps_per_sample,
        burn_in: set.meta.burn_in,
    };
    let mut buf = manifest_bytes(&manifest);
    buf.extend(set.spins.iter().map(|&s| s as u8));
    if let Some(xs) = &set.xs {
        push_f64s(&mut buf, xs);
    }
    write_atomic(path, &buf)
}

pub fn read_sample_set(path: &Path) -> Result<SampleSet> {
    let bytes = read_all(path)?;
    let (line, payload) = split_container(&bytes, path)?;
    let m: SampleManifest = parse_manifest(&line, path)?;
    if m.version != SAMPLES_VERSION {
        return Err(CliError::Io(format!("{}: unsupported version {}", path.display(), m.version)));
    }
    let count = m.m * m.n;
    if payload.len() < count {
        return Err(CliError::Io(format!("{}: payload truncated", path.display())));
    }
    let spins: Vec<i8> = payload[..count].iter().map(|&b| b as i8).collect();
    let mut cursor = count;
    let xs = if m.has_xs { Some(take_f64s(&payload, &mut cursor, count, path)?) } else { None };
    expect_consumed(&payload, cursor, path)?;
    let set = SampleSet {
        disorder_id: m.disorder_id,
        beta: m.beta,
        n_spins: m.n,
        n_samples: m.m,
        spins,
        xs,
        meta: SampleMeta { sweeps_per_sample: m.sweeps, burn_in: m.burn_in, seed: m.seed },
    };
    set.validate()?;
    Ok(set)
}

// --- checkpoint files -----------------------------------------------------

/// Training provenance stored inside a checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainMeta {
    pub loss: String,
    pub beta: f64,
    pub update_index: u64,
    pub n_updates: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub symmetrize: bool,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Activations {
    hidden: String,
    s_final: String,
    t_final: String,
}

/// Manifest of a flow checkpoint. Payload: every parameter as f64, layers
/// in flow order, scale net before shift net, dense stages in order, each
/// stage weights (row-major) then biases.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointManifest {
    version: u32,
    n: usize,
    l: usize,
    /// One string per layer, '1' marking the transformed sites.
    masks: Vec<String>,
    /// Output width of each dense stage inside one conditioner.
    layer_dims: Vec<usize>,
    activations: Activations,
    seed: u64,
    n_params: usize,
    training: Option<TrainMeta>,
    format: String,
}

pub fn write_checkpoint(path: &Path, model: &FlowModel, training: Option<&TrainMeta>) -> Result<()> {
    let params = flatten_params(model);
    let masks = model
        .layers()
        .iter()
        .map(|l| l.mask().iter().map(|&a| if a { '1' } else { '0' }).collect())
        .collect();
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        n: model.n_sites(),
        l: model.n_layers(),
        masks,
        layer_dims: vec![model.n_sites(); HIDDEN_LAYERS + 1],
        activations: Activations {
            hidden: "leaky_relu".to_string(),
            s_final: "tanh".to_string(),
            t_final: "identity".to_string(),
        },
        seed: model.seed(),
        n_params: params.len(),
        training: training.cloned(),
        format: "f64le".to_string(),
    };
    let mut buf = manifest_bytes(&manifest);
    push_f64s(&mut buf, &params);
    write_atomic(path, &buf)
}

pub fn read_checkpoint(path: &Path) -> Result<(FlowModel, Option<TrainMeta>)> {
    let bytes = read_all(path)?;
    let (line, payload) = split_container(&bytes, path)?;
    let m: CheckpointManifest = parse_manifest(&line, path)?;
    if m.version != CHECKPOINT_VERSION {
        return Err(CliError::Io(format!("{}: unsupported version {}", path.display(), m.version)));
    }
    if m.format != "f64le" {
        return Err(CliError::Io(format!("{}: unsupported payload format", path.display())));
    }
    if m.layer_dims != vec![m.n; HIDDEN_LAYERS + 1]
        || m.activations.hidden != "leaky_relu"
        || m.activations.s_final != "tanh"
        || m.activations.t_final != "identity"
    {
        return Err(CliError::Io(format!(
            "{}: checkpoint architecture not supported by this build",
            path.display()
        )));
    }
    if m.masks.len() != m.l {
        return Err(CliError::Io(format!("{}: mask count disagrees with layer count", path.display())));
    }
    let mut layers = Vec::with_capacity(m.l);
    for text in &m.masks {
        if text.len() != m.n || text.bytes().any(|b| b != b'0' && b != b'1') {
            return Err(CliError::Io(format!("{}: malformed mask string", path.display())));
        }
        let mask = text.bytes().map(|b| b == b'1').collect();
        let s_net = Mlp::zeros(m.n, FinalActivation::Tanh);
        let t_net = Mlp::zeros(m.n, FinalActivation::Identity);
        layers.push(CouplingLayer::new(mask, s_net, t_net)?);
    }
    let mut model = FlowModel::from_layers(layers, m.seed)?;
    let mut cursor = 0;
    let params = take_f64s(&payload, &mut cursor, m.n_params, path)?;
    expect_consumed(&payload, cursor, path)?;
    set_params(&mut model, &params)?;
    Ok((model, m.training))
}

// --- tabular emissions ----------------------------------------------------

pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let mut out = String::from("update_index,loss\n");
    for (i, loss) in losses.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, loss));
    }
    write_atomic(path, out.as_bytes())
}

/// Snapshot rows carry no wall-clock column; reruns must reproduce the file
/// exactly.
pub fn write_snapshot_csv(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut out = String::from("update_index,loss,std_error\n");
    for s in snapshots {
        out.push_str(&format!("{},{},{}\n", s.update_index, s.loss, s.std_error));
    }
    write_atomic(path, out.as_bytes())
}

/// Returns the last snapshot row as `(loss, std_error)`.
pub fn read_final_snapshot(path: &Path) -> Result<(f64, f64)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io_at(path, e))?;
    let mut last = None;
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != "update_index,loss,std_error" {
                return Err(CliError::Io(format!("{}: not a snapshot table", path.display())));
            }
            continue;
        }
        let mut cols = line.split(',');
        let _ = cols.next();
        let loss = cols.next().and_then(|v| v.parse::<f64>().ok());
        let se = cols.next().and_then(|v| v.parse::<f64>().ok());
        match (loss, se) {
            (Some(l), Some(s)) => last = Some((l, s)),
            _ => return Err(CliError::Io(format!("{}: malformed row {}", path.display(), idx))),
        }
    }
    last.ok_or_else(|| CliError::Io(format!("{}: no snapshot rows", path.display())))
}

pub fn write_histogram_csv(path: &Path, hist: &OverlapHistogram) -> Result<()> {
    let mut out = String::from("bin_left,bin_right,count\n");
    for k in 0..hist.n_bins() {
        out.push_str(&format!("{},{},{}\n", hist.bin_edges[k], hist.bin_edges[k + 1], hist.counts[k]));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_triangle_csv(path: &Path, stats: &TriangleStats) -> Result<()> {
    let mut out = String::from("d_max_minus_d_mid,d_mid_minus_d_min\n");
    for (long_gap, short_gap) in &stats.raw_points {
        out.push_str(&format!("{},{}\n", long_gap, short_gap));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
