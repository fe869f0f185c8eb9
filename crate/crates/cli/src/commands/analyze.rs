//! `analyze`: diagnostics over recorded samples and trained flows.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::Serialize;

use glassflow_core::analytics::{
    discretize_samples, kl_report, layer_probe, overlap_histogram, triangle_stats,
    HistogramSource, KlInputs, LogZsMethod, ProbeConfig, TriangleStats,
    DEFAULT_OVERLAP_BINS, DEFAULT_OVERLAP_PAIRS, DEFAULT_TRIANGLE_TOLERANCE,
};
use glassflow_core::analytics::Estimate;
use glassflow_core::pt::SampleSet;
use glassflow_core::rng::stream_rng;
use glassflow_core::spinglass::ShiftedCoupling;

use crate::commands::{ensure_out_dir, STREAM_ANALYZE_BASE};
use crate::config::{pick, AnalysisSection, ExperimentConfig, FORMAT_VERSION};
use crate::errors::{CliError, Result};
use crate::formats::{self, TrainMeta};
use crate::provenance::Provenance;
use crate::svg;

const DEFAULT_FLOW_DRAWS: usize = 10_000;
const DEFAULT_TRIPLES: usize = 50_000;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub command: AnalyzeCommand,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Overlap distribution of a sample source.
    Overlap(OverlapArgs),
    /// Triangle census over sample-to-sample distances.
    Triangles(TrianglesArgs),
    /// Free energies and KL estimates against the target density.
    FreeEnergy(FreeEnergyArgs),
    /// Overlap and triangle diagnostics after each coupling layer.
    Layers(LayersArgs),
}

pub fn run(args: &AnalyzeArgs, config: &ExperimentConfig) -> Result<()> {
    match &args.command {
        AnalyzeCommand::Overlap(a) => overlap_cmd(a, config),
        AnalyzeCommand::Triangles(a) => triangles_cmd(a, config),
        AnalyzeCommand::FreeEnergy(a) => free_energy_cmd(a, config),
        AnalyzeCommand::Layers(a) => layers_cmd(a, config),
    }
}

// --- shared spin source ----------------------------------------------------

/// Where overlap and triangle suites get their spin rows: recorded sample
/// files, or draws from a trained flow mapped back to spins.
#[derive(Debug, Args)]
pub struct SpinSourceArgs {
    /// Recorded sample files; with several, --temp or --beta picks one.
    #[arg(long, num_args = 1..)]
    pub samples: Option<Vec<PathBuf>>,
    /// Flow checkpoint to draw from instead of recorded samples.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Disorder file; required with --checkpoint.
    #[arg(long)]
    pub disorder: Option<PathBuf>,
    /// Source label: pt, flow-forward, or flow-reverse.
    #[arg(long)]
    pub source: Option<String>,
    /// Temperature selecting among sample files or for flow discretization.
    #[arg(long)]
    pub temp: Option<f64>,
    /// Inverse-temperature form of --temp.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Draw count when the source is a flow.
    #[arg(long)]
    pub count: Option<usize>,
    /// Seed for draws and pair/triple sampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

struct ResolvedSpins {
    spins: Vec<i8>,
    n_spins: usize,
    beta: f64,
    source: HistogramSource,
    source_name: &'static str,
    seed: u64,
    count: Option<usize>,
}

fn target_beta(temp: Option<f64>, beta: Option<f64>) -> Result<Option<f64>> {
    match (temp, beta) {
        (Some(_), Some(_)) => Err(CliError::usage("pass --temp or --beta, not both")),
        (Some(t), None) => {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::usage("--temp must be positive and finite"));
            }
            Ok(Some(1.0 / t))
        }
        (None, Some(b)) => {
            if !(b > 0.0) || !b.is_finite() {
                return Err(CliError::usage("--beta must be positive and finite"));
            }
            Ok(Some(b))
        }
        (None, None) => Ok(None),
    }
}

/// Picks the sample file whose temperature matches the request, within a
/// 1e-3 relative window.
fn select_sample_set(sets: Vec<SampleSet>, want: Option<f64>) -> Result<SampleSet> {
    if sets.len() == 1 && want.is_none() {
        return Ok(sets.into_iter().next().expect("one element"));
    }
    let want = want.ok_or_else(|| {
        CliError::usage("several sample files; pick one with --temp or --beta")
    })?;
    let mut best: Option<(f64, SampleSet)> = None;
    for set in sets {
        let rel = (set.beta - want).abs() / want;
        if best.as_ref().map_or(true, |(b, _)| rel < *b) {
            best = Some((rel, set));
        }
    }
    let (rel, set) = best.expect("at least one sample file");
    if rel > 1e-3 {
        return Err(CliError::Usage(format!(
            "no sample file at beta {want}; nearest is beta {}",
            set.beta
        )));
    }
    Ok(set)
}

impl SpinSourceArgs {
    fn resolve(
        &self,
        section: &AnalysisSection,
        prov: &mut Provenance,
    ) -> Result<ResolvedSpins> {
        let want_beta = target_beta(self.temp, self.beta)?;
        let seed = pick(self.seed, section.seed, 0);
        match (&self.samples, &self.checkpoint) {
            (Some(paths), None) => {
                if let Some(label) = &self.source {
                    if label != "pt" {
                        return Err(CliError::Usage(format!(
                            "--source {label} does not match a --samples input"
                        )));
                    }
                }
                let mut sets = Vec::with_capacity(paths.len());
                for path in paths {
                    prov.record(path)?;
                    sets.push(formats::read_sample_set(path)?);
                }
                if sets.iter().any(|s| s.n_spins != sets[0].n_spins) {
                    return Err(CliError::usage("sample files disagree on spin count"));
                }
                if sets.iter().any(|s| s.disorder_id != sets[0].disorder_id) {
                    return Err(CliError::usage("sample files belong to different realizations"));
                }
                let set = select_sample_set(sets, want_beta)?;
                Ok(ResolvedSpins {
                    n_spins: set.n_spins,
                    beta: set.beta,
                    spins: set.spins,
                    source: HistogramSource::Pt,
                    source_name: "pt",
                    seed,
                    count: None,
                })
            }
            (None, Some(ckpt)) => {
                let disorder = self.disorder.as_ref().ok_or_else(|| {
                    CliError::usage("--checkpoint needs --disorder for discretization")
                })?;
                prov.record(ckpt)?;
                prov.record(disorder)?;
                let (model, meta) = formats::read_checkpoint(ckpt)?;
                let (d, epsilon) = formats::read_disorder(disorder)?;
                let sc = ShiftedCoupling::new(&d, epsilon)?;
                let beta = want_beta
                    .or(meta.as_ref().map(|m| m.beta))
                    .ok_or_else(|| {
                        CliError::usage("checkpoint carries no temperature; pass --temp or --beta")
                    })?;
                let (source, source_name) = flow_source_label(self.source.as_deref(), &meta)?;
                let count = pick(self.count, section.count, DEFAULT_FLOW_DRAWS);
                let mut rng = stream_rng(seed, STREAM_ANALYZE_BASE);
                let xs = model.sample_partial(count, model.n_layers(), &mut rng)?;
                let spins = discretize_samples(&sc, beta, &xs, &mut rng)?;
                Ok(ResolvedSpins {
                    spins,
                    n_spins: model.n_sites(),
                    beta,
                    source,
                    source_name,
                    seed,
                    count: Some(count),
                })
            }
            (Some(_), Some(_)) => {
                Err(CliError::usage("pass --samples or --checkpoint, not both"))
            }
            (None, None) => Err(CliError::usage("need a source: --samples or --checkpoint")),
        }
    }
}

fn flow_source_label(
    label: Option<&str>,
    meta: &Option<TrainMeta>,
) -> Result<(HistogramSource, &'static str)> {
    let name = match label {
        Some("flow-forward") => "forward",
        Some("flow-reverse") => "reverse",
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown --source '{other}' for a checkpoint (flow-forward or flow-reverse)"
            )))
        }
        None => match meta.as_ref().map(|m| m.loss.as_str()) {
            Some("reverse") => "reverse",
            _ => "forward",
        },
    };
    Ok(match name {
        "reverse" => (HistogramSource::FlowReverseKl, "flow-reverse"),
        _ => (HistogramSource::FlowForwardKl, "flow-forward"),
    })
}

// --- overlap ----------------------------------------------------------------

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[command(flatten)]
    pub source: SpinSourceArgs,
    /// Histogram bins over [-1, 1].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Random sample pairs entering the histogram.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Also render the histogram as SVG.
    #[arg(long)]
    pub svg: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn overlap_cmd(args: &OverlapArgs, config: &ExperimentConfig) -> Result<()> {
    let section = config.analysis();
    let mut prov = Provenance::new("analyze overlap");
    let resolved = args.source.resolve(&section, &mut prov)?;
    let bins = pick(args.bins, section.bins, DEFAULT_OVERLAP_BINS);
    let pairs = pick(args.pairs, section.pairs, DEFAULT_OVERLAP_PAIRS);

    let mut rng = stream_rng(resolved.seed, STREAM_ANALYZE_BASE + 1);
    let hist = overlap_histogram(
        &resolved.spins,
        resolved.n_spins,
        pairs,
        bins,
        resolved.beta,
        resolved.source,
        &mut rng,
    )?;

    ensure_out_dir(&args.out)?;
    let csv = args.out.join("overlap.csv");
    formats::write_histogram_csv(&csv, &hist)?;
    if args.svg {
        let title = format!("P(q) {} beta {:.4}", resolved.source_name, resolved.beta);
        formats::write_atomic(
            &args.out.join("overlap.svg"),
            svg::histogram_svg(&hist, &title).as_bytes(),
        )?;
    }

    write_analysis_config(
        &args.out,
        AnalysisSection {
            bins: Some(bins),
            pairs: Some(pairs),
            triples: None,
            tolerance: None,
            count: resolved.count,
            seed: Some(resolved.seed),
        },
    )?;
    prov.write(&args.out)?;
    println!(
        "wrote {} source {} beta {} pairs {}",
        csv.display(),
        resolved.source_name,
        resolved.beta,
        pairs,
    );
    Ok(())
}

// --- triangles ---------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrianglesArgs {
    #[command(flatten)]
    pub source: SpinSourceArgs,
    /// Random triples entering the census.
    #[arg(long)]
    pub triples: Option<usize>,
    /// Side-length tolerance for calling two distances equal.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Also render the gap scatter as SVG.
    #[arg(long)]
    pub svg: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct TriangleReport<'a> {
    source: &'a str,
    beta: f64,
    n_triples: usize,
    tolerance: f64,
    equilateral_fraction: f64,
    acute_isosceles_fraction: f64,
    other_fraction: f64,
}

fn triangle_report<'a>(stats: &TriangleStats, source: &'a str, beta: f64) -> TriangleReport<'a> {
    TriangleReport {
        source,
        beta,
        n_triples: stats.n_triples,
        tolerance: stats.tolerance,
        equilateral_fraction: stats.equilateral_fraction,
        acute_isosceles_fraction: stats.acute_isosceles_fraction,
        other_fraction: stats.other_fraction,
    }
}

fn triangles_cmd(args: &TrianglesArgs, config: &ExperimentConfig) -> Result<()> {
    let section = config.analysis();
    let mut prov = Provenance::new("analyze triangles");
    let resolved = args.source.resolve(&section, &mut prov)?;
    let triples = pick(args.triples, section.triples, DEFAULT_TRIPLES);
    let tolerance = pick(args.tolerance, section.tolerance, DEFAULT_TRIANGLE_TOLERANCE);

    let mut rng = stream_rng(resolved.seed, STREAM_ANALYZE_BASE + 2);
    let stats =
        triangle_stats(&resolved.spins, resolved.n_spins, triples, tolerance, &mut rng)?;

    ensure_out_dir(&args.out)?;
    let report = args.out.join("triangles.json");
    formats::write_json(&report, &triangle_report(&stats, resolved.source_name, resolved.beta))?;
    formats::write_triangle_csv(&args.out.join("triangle_points.csv"), &stats)?;
    if args.svg {
        let title = format!("triangle gaps {} beta {:.4}", resolved.source_name, resolved.beta);
        formats::write_atomic(
            &args.out.join("triangles.svg"),
            svg::scatter_svg(&stats.raw_points, tolerance, &title).as_bytes(),
        )?;
    }

    write_analysis_config(
        &args.out,
        AnalysisSection {
            bins: None,
            pairs: None,
            triples: Some(triples),
            tolerance: Some(tolerance),
            count: resolved.count,
            seed: Some(resolved.seed),
        },
    )?;
    prov.write(&args.out)?;
    println!(
        "wrote {} equilateral {} acute_isosceles {} other {}",
        report.display(),
        stats.equilateral_fraction,
        stats.acute_isosceles_fraction,
        stats.other_fraction,
    );
    Ok(())
}

// --- free energy --------------------------------------------------------------

#[derive(Debug, Args)]
pub struct FreeEnergyArgs {
    /// Disorder file defining the target density.
    #[arg(long)]
    pub disorder: PathBuf,
    /// Report temperature; exactly one of --temp and --beta.
    #[arg(long)]
    pub temp: Option<f64>,
    /// Report inverse temperature.
    #[arg(long)]
    pub beta: Option<f64>,
    /// snapshots.csv of a reverse run; the final row enters the report.
    #[arg(long)]
    pub reverse_snapshots: Option<PathBuf>,
    /// snapshots.csv of a forward run.
    #[arg(long)]
    pub forward_snapshots: Option<PathBuf>,
    /// Sample file with continuous rows at the report temperature, for the
    /// entropy estimate.
    #[arg(long)]
    pub x_samples: Option<PathBuf>,
    /// Sample files whose mean energies feed thermodynamic integration of
    /// the discrete log partition sum.
    #[arg(long, num_args = 1..)]
    pub pt_energies: Option<Vec<PathBuf>>,
    /// Enumerate the discrete partition sum exactly (small systems).
    #[arg(long)]
    pub exact: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct EstimateJson {
    value: f64,
    std_error: f64,
    negative: bool,
}

impl From<&Estimate> for EstimateJson {
    fn from(e: &Estimate) -> Self {
        EstimateJson { value: e.value, std_error: e.std_error, negative: e.negative }
    }
}

#[derive(Debug, Serialize)]
struct FreeEnergyJson {
    beta: f64,
    temp: f64,
    log_z_s: f64,
    log_z_s_method: &'static str,
    log_z_x: f64,
    helmholtz_x: f64,
    gibbs_x: Option<EstimateJson>,
    reverse_kl: Option<EstimateJson>,
    forward_loss: Option<EstimateJson>,
    shannon_entropy_x: Option<EstimateJson>,
    forward_kl: Option<EstimateJson>,
}

fn free_energy_cmd(args: &FreeEnergyArgs, config: &ExperimentConfig) -> Result<()> {
    let _ = config;
    let beta = target_beta(args.temp, args.beta)?
        .ok_or_else(|| CliError::usage("missing required value: --temp or --beta"))?;

    let mut prov = Provenance::new("analyze free-energy");
    prov.record(&args.disorder)?;
    let (d, epsilon) = formats::read_disorder(&args.disorder)?;
    let sc = ShiftedCoupling::new(&d, epsilon)?;

    let reverse_snapshot = match &args.reverse_snapshots {
        Some(path) => {
            prov.record(path)?;
            Some(formats::read_final_snapshot(path)?)
        }
        None => None,
    };
    let forward_snapshot = match &args.forward_snapshots {
        Some(path) => {
            prov.record(path)?;
            Some(formats::read_final_snapshot(path)?)
        }
        None => None,
    };

    let x_rows = match &args.x_samples {
        Some(path) => {
            prov.record(path)?;
            let set = formats::read_sample_set(path)?;
            if set.disorder_id != d.content_id() {
                return Err(CliError::usage("--x-samples belong to another realization"));
            }
            if (set.beta - beta).abs() > 1e-9 * beta {
                return Err(CliError::Usage(format!(
                    "--x-samples recorded at beta {}, report wants {beta}",
                    set.beta
                )));
            }
            Some(set.xs.ok_or_else(|| {
                CliError::usage("--x-samples file lacks continuous rows; run convert first")
            })?)
        }
        None => None,
    };

    let mean_energies = match &args.pt_energies {
        Some(paths) => {
            let mut ladder = Vec::with_capacity(paths.len());
            for path in paths {
                prov.record(path)?;
                let set = formats::read_sample_set(path)?;
                if set.disorder_id != d.content_id() {
                    return Err(CliError::usage("--pt-energies belong to another realization"));
                }
                let mut acc = 0.0;
                for i in 0..set.n_samples {
                    acc += d.energy(set.row(i))?;
                }
                ladder.push((set.beta, acc / set.n_samples as f64));
            }
            ladder.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite betas"));
            Some(ladder)
        }
        None => None,
    };

    let exact_log_z_s = if args.exact { Some(d.enumerate_exact(beta)?.log_z_s) } else { None };

    let inputs = KlInputs {
        reverse_snapshot,
        forward_snapshot,
        x_rows: x_rows.as_deref(),
        exact_log_z_s,
        mean_energies: mean_energies.as_deref(),
    };
    let report = kl_report(&sc, beta, &inputs)?;

    let json = FreeEnergyJson {
        beta: report.beta,
        temp: 1.0 / report.beta,
        log_z_s: report.log_z_s,
        log_z_s_method: match report.log_z_s_method {
            LogZsMethod::Exact => "exact",
            LogZsMethod::ThermoIntegration => "thermo_integration",
            LogZsMethod::ReplicaSymmetric => "replica_symmetric",
        },
        log_z_x: -report.beta * report.helmholtz_x,
        helmholtz_x: report.helmholtz_x,
        gibbs_x: report.gibbs_x.as_ref().map(EstimateJson::from),
        reverse_kl: report.reverse_kl.as_ref().map(EstimateJson::from),
        forward_loss: report.forward_loss.as_ref().map(EstimateJson::from),
        shannon_entropy_x: report.shannon_entropy_x.as_ref().map(EstimateJson::from),
        forward_kl: report.forward_kl.as_ref().map(EstimateJson::from),
    };

    ensure_out_dir(&args.out)?;
    let file = args.out.join("free_energy.json");
    formats::write_json(&file, &json)?;
    crate::config::write_resolved(
        &args.out,
        &ExperimentConfig {
            format_version: Some(FORMAT_VERSION),
            output_dir: Some(args.out.clone()),
            ..ExperimentConfig::default()
        },
    )?;
    prov.write(&args.out)?;
    println!(
        "wrote {} log_z_s {} ({}) helmholtz_x {}",
        file.display(),
        json.log_z_s,
        json.log_z_s_method,
        json.helmholtz_x,
    );
    Ok(())
}

// --- layers ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct LayersArgs {
    /// Flow checkpoint to probe.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Disorder file for discretization.
    #[arg(long)]
    pub disorder: PathBuf,
    /// Probe temperature; defaults to the checkpoint's training value.
    #[arg(long)]
    pub temp: Option<f64>,
    /// Inverse-temperature form of --temp.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Draws per layer.
    #[arg(long)]
    pub count: Option<usize>,
    /// Random sample pairs per histogram.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Histogram bins over [-1, 1].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Random triples per census.
    #[arg(long)]
    pub triples: Option<usize>,
    /// Side-length tolerance for the census.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Seed for all probe draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also render per-layer SVGs.
    #[arg(long)]
    pub svg: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct LayerRow {
    layer: usize,
    n_triples: usize,
    equilateral_fraction: f64,
    acute_isosceles_fraction: f64,
    other_fraction: f64,
}

#[derive(Debug, Serialize)]
struct LayersReport {
    beta: f64,
    n_layers: usize,
    count: usize,
    layers: Vec<LayerRow>,
}

fn layers_cmd(args: &LayersArgs, config: &ExperimentConfig) -> Result<()> {
    let section = config.analysis();
    let mut prov = Provenance::new("analyze layers");
    prov.record(&args.checkpoint)?;
    prov.record(&args.disorder)?;
    let (model, meta) = formats::read_checkpoint(&args.checkpoint)?;
    let (d, epsilon) = formats::read_disorder(&args.disorder)?;
    let sc = ShiftedCoupling::new(&d, epsilon)?;
    let beta = target_beta(args.temp, args.beta)?
        .or(meta.as_ref().map(|m| m.beta))
        .ok_or_else(|| {
            CliError::usage("checkpoint carries no temperature; pass --temp or --beta")
        })?;

    let probe = ProbeConfig {
        n_samples: pick(args.count, section.count, ProbeConfig::default().n_samples),
        n_pairs: pick(args.pairs, section.pairs, DEFAULT_OVERLAP_PAIRS),
        bins: pick(args.bins, section.bins, DEFAULT_OVERLAP_BINS),
        n_triples: pick(args.triples, section.triples, DEFAULT_TRIPLES),
        tolerance: pick(args.tolerance, section.tolerance, DEFAULT_TRIANGLE_TOLERANCE),
    };
    let seed = pick(args.seed, section.seed, 0);

    ensure_out_dir(&args.out)?;
    let mut rows = Vec::with_capacity(model.n_layers() + 1);
    for layer in 0..=model.n_layers() {
        let mut rng = stream_rng(seed, STREAM_ANALYZE_BASE + layer as u64);
        let (hist, stats) = layer_probe(&model, &sc, beta, layer, &probe, &mut rng)?;
        formats::write_histogram_csv(
            &args.out.join(format!("layer_{layer:02}_overlap.csv")),
            &hist,
        )?;
        formats::write_triangle_csv(
            &args.out.join(format!("layer_{layer:02}_triangles.csv")),
            &stats,
        )?;
        if args.svg {
            formats::write_atomic(
                &args.out.join(format!("layer_{layer:02}_overlap.svg")),
                svg::histogram_svg(&hist, &format!("P(q) after layer {layer} beta {beta:.4}"))
                    .as_bytes(),
            )?;
            formats::write_atomic(
                &args.out.join(format!("layer_{layer:02}_triangles.svg")),
                svg::scatter_svg(
                    &stats.raw_points,
                    probe.tolerance,
                    &format!("triangle gaps after layer {layer} beta {beta:.4}"),
                )
                .as_bytes(),
            )?;
        }
        println!(
            "layer {layer} equilateral {} acute_isosceles {} other {}",
            stats.equilateral_fraction, stats.acute_isosceles_fraction, stats.other_fraction,
        );
        rows.push(LayerRow {
            layer,
            n_triples: stats.n_triples,
            equilateral_fraction: stats.equilateral_fraction,
            acute_isosceles_fraction: stats.acute_isosceles_fraction,
            other_fraction: stats.other_fraction,
        });
    }
    let report =
        LayersReport { beta, n_layers: model.n_layers(), count: probe.n_samples, layers: rows };
    formats::write_json(&args.out.join("layers.json"), &report)?;

    write_analysis_config(
        &args.out,
        AnalysisSection {
            bins: Some(probe.bins),
            pairs: Some(probe.n_pairs),
            triples: Some(probe.n_triples),
            tolerance: Some(probe.tolerance),
            count: Some(probe.n_samples),
            seed: Some(seed),
        },
    )?;
    prov.write(&args.out)?;
    Ok(())
}

fn write_analysis_config(out: &Path, section: AnalysisSection) -> Result<()> {
    crate::config::write_resolved(
        out,
        &ExperimentConfig {
            format_version: Some(FORMAT_VERSION),
            analysis: Some(section),
            output_dir: Some(out.to_path_buf()),
            ..ExperimentConfig::default()
        },
    )
}
