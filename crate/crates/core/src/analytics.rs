//! Order-parameter and information-theoretic diagnostics.
//!
//! Overlaps between sampled spin configurations, their histogram, the
//! ultrametric triangle census over Hamming distances, magnetizations,
//! thermodynamic integration for the discrete log-partition sum, entropy
//! estimation for the continuous density, and KL reports comparing trained
//! flows against ground truth. Samples from a flow are discretized first,
//! so every diagnostic runs on spin configurations regardless of source.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::flow::FlowModel;
use crate::spinglass::{replica_symmetric_free_energy, ShiftedCoupling};

/// Where a histogram's samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramSource {
    Pt,
    FlowForwardKl,
    FlowReverseKl,
    FlowLayer(usize),
}

/// Binned distribution of pairwise overlaps over [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_pairs: usize,
    pub beta: f64,
    pub source: HistogramSource,
}

impl OverlapHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        0.5 * (self.bin_edges[k] + self.bin_edges[k + 1])
    }
}

pub const DEFAULT_OVERLAP_BINS: usize = 81;
pub const DEFAULT_OVERLAP_PAIRS: usize = 100_000;
pub const DEFAULT_TRIANGLE_TOLERANCE: f64 = 0.02;

/// Triangle shape classes over sample-to-sample Hamming distances. In an
/// ultrametric space every triangle is equilateral or has its two longest
/// sides equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangleClass {
    Equilateral,
    AcuteIsosceles,
    Other,
}

/// Census of sampled triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleStats {
    pub n_triples: usize,
    pub equilateral_fraction: f64,
    pub acute_isosceles_fraction: f64,
    pub other_fraction: f64,
    /// One (d_max - d_mid, d_mid - d_min) point per sampled triple. An
    /// ultrametric sample cloud hugs the first axis near zero.
    pub raw_points: Vec<(f64, f64)>,
    pub tolerance: f64,
}

/// Overlap of two spin configurations, in [-1, 1].
pub fn overlap(a: &[i8], b: &[i8]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let sum: i64 = a.iter().zip(b.iter()).map(|(&x, &y)| (x as i64) * (y as i64)).sum();
    Ok(sum as f64 / a.len() as f64)
}

/// Hamming distance per site implied by an overlap.
pub fn overlap_to_distance(q: f64) -> f64 {
    0.5 * (1.0 - q)
}

fn check_spin_matrix(spins: &[i8], n_spins: usize) -> Result<usize> {
    if n_spins == 0 || spins.is_empty() || spins.len() % n_spins != 0 {
        return Err(Error::InvalidArgument("spin matrix must hold full rows"));
    }
    Ok(spins.len() / n_spins)
}

/// Histograms the overlap of `n_pairs` random distinct sample pairs.
pub fn overlap_histogram<R: Rng + ?Sized>(
    spins: &[i8],
    n_spins: usize,
    n_pairs: usize,
    bins: usize,
    beta: f64,
    source: HistogramSource,
    rng: &mut R,
) -> Result<OverlapHistogram> {
    let n_samples = check_spin_matrix(spins, n_spins)?;
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples to pair"));
    }
    if n_pairs == 0 || bins == 0 {
        return Err(Error::InvalidArgument("need at least one pair and one bin"));
    }
    let bin_edges: Vec<f64> = (0..=bins).map(|k| 2.0 * k as f64 / bins as f64 - 1.0).collect();
    let mut counts = vec![0u64; bins];
    for _ in 0..n_pairs {
        let i = rng.gen_range(0..n_samples);
        let mut j = rng.gen_range(0..n_samples - 1);
        if j >= i {
            j += 1;
        }
        let q = overlap(
            &spins[i * n_spins..(i + 1) * n_spins],
            &spins[j * n_spins..(j + 1) * n_spins],
        )?;
        let idx = (((q + 1.0) * 0.5 * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(OverlapHistogram { bin_edges, counts, n_pairs, beta, source })
}

/// Shape of one distance triple under a resolution tolerance.
pub fn classify_triangle(d1: f64, d2: f64, d3: f64, tolerance: f64) -> TriangleClass {
    let mut d = [d1, d2, d3];
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    if d[2] - d[0] <= tolerance {
        TriangleClass::Equilateral
    } else if d[2] - d[1] <= tolerance {
        TriangleClass::AcuteIsosceles
    } else {
        TriangleClass::Other
    }
}

/// Samples `n_triples` random distinct triples and classifies their
/// distance triangles.
pub fn triangle_stats<R: Rng + ?Sized>(
    spins: &[i8],
    n_spins: usize,
    n_triples: usize,
    tolerance: f64,
    rng: &mut R,
) -> Result<TriangleStats> {
    let n_samples = check_spin_matrix(spins, n_spins)?;
    if n_samples < 3 {
        return Err(Error::InvalidArgument("need at least three samples"));
    }
    if n_triples == 0 {
        return Err(Error::InvalidArgument("need at least one triple"));
    }
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidArgument("tolerance must be nonnegative"));
    }
    let row = |i: usize| &spins[i * n_spins..(i + 1) * n_spins];
    let mut tallies = [0usize; 3];
    let mut raw_points = Vec::with_capacity(n_triples);
    for _ in 0..n_triples {
        let (a, b, c) = loop {
            let a = rng.gen_range(0..n_samples);
            let b = rng.gen_range(0..n_samples);
            let c = rng.gen_range(0..n_samples);
            if a != b && b != c && a != c {
                break (a, b, c);
            }
        };
        let mut d = [
            overlap_to_distance(overlap(row(a), row(b))?),
            overlap_to_distance(overlap(row(a), row(c))?),
            overlap_to_distance(overlap(row(b), row(c))?),
        ];
        d.sort_by(|x, y| x.partial_cmp(y).expect("finite distances"));
        raw_points.push((d[2] - d[1], d[1] - d[0]));
        let class = classify_triangle(d[0], d[1], d[2], tolerance);
        tallies[match class {
            TriangleClass::Equilateral => 0,
            TriangleClass::AcuteIsosceles => 1,
            TriangleClass::Other => 2,
        }] += 1;
    }
    let frac = |k: usize| tallies[k] as f64 / n_triples as f64;
    Ok(TriangleStats {
        n_triples,
        equilateral_fraction: frac(0),
        acute_isosceles_fraction: frac(1),
        other_fraction: frac(2),
        raw_points,
        tolerance,
    })
}

/// Total and per-site sample-mean spin.
pub fn magnetization(spins: &[i8], n_spins: usize) -> Result<(f64, Vec<f64>)> {
    let n_samples = check_spin_matrix(spins, n_spins)?;
    let mut per_site = vec![0.0; n_spins];
    for r in 0..n_samples {
        for (acc, &s) in per_site.iter_mut().zip(&spins[r * n_spins..(r + 1) * n_spins]) {
            *acc += s as f64;
        }
    }
    for v in &mut per_site {
        *v /= n_samples as f64;
    }
    Ok((per_site.iter().sum(), per_site))
}

/// Discrete log-partition sum by integrating measured mean energies down
/// the temperature ladder, anchored at the exact infinite-temperature
/// endpoint where every state is equally likely and the mean energy of a
/// zero-diagonal coupling matrix vanishes.
pub fn log_z_s_thermo_integration(
    mean_energies: &[(f64, f64)],
    n_spins: usize,
    beta_target: f64,
) -> Result<f64> {
    if n_spins == 0 {
        return Err(Error::InvalidArgument("need at least one spin"));
    }
    if !(beta_target >= 0.0 && beta_target.is_finite()) {
        return Err(Error::InvalidArgument("target beta must be nonnegative"));
    }
    let mut points: Vec<(f64, f64)> = mean_energies.to_vec();
    for &(b, e) in &points {
        if !(b >= 0.0 && b.is_finite() && e.is_finite()) {
            return Err(Error::InvalidArgument("ladder points must be finite, beta nonnegative"));
        }
    }
    if points.iter().all(|&(b, _)| b > 0.0) {
        points.push((0.0, 0.0));
    }
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite betas"));
    if points.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("duplicate ladder betas"));
    }
    let max_beta = points.last().expect("nonempty").0;
    if beta_target > max_beta {
        return Err(Error::InvalidArgument("target beta outside the ladder range"));
    }
    let mut integral = 0.0;
    for w in points.windows(2) {
        let (b0, e0) = w[0];
        let (b1, e1) = w[1];
        if beta_target <= b0 {
            break;
        }
        if beta_target >= b1 {
            integral += 0.5 * (e0 + e1) * (b1 - b0);
        } else {
            let frac = (beta_target - b0) / (b1 - b0);
            let e_t = e0 + frac * (e1 - e0);
            integral += 0.5 * (e0 + e_t) * (beta_target - b0);
        }
    }
    Ok(n_spins as f64 * libm::log(2.0) - integral)
}

/// A Monte Carlo estimate with its standard error. `negative` marks
/// quantities that came out below zero, which for KL estimates signals the
/// statistical error exceeding the true value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub negative: bool,
}

impl Estimate {
    pub fn new(value: f64, std_error: f64) -> Self {
        Estimate { value, std_error, negative: value < 0.0 }
    }
}

fn mean_and_se(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("need at least two values"));
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    Ok((mean, libm::sqrt(var / count)))
}

/// Entropy of a density `exp(-beta H) / Z` from energy samples of its own
/// draws: `H(p) = beta <H> + ln Z`.
pub fn entropy_from_energies(energies: &[f64], beta: f64, log_z: f64) -> Result<Estimate> {
    let (mean, se) = mean_and_se(energies)?;
    Ok(Estimate::new(beta * mean + log_z, beta * se))
}

/// Shannon entropy of the continuous dual density from recorded samples.
pub fn shannon_entropy_x(
    sc: &ShiftedCoupling,
    beta: f64,
    x_rows: &[f64],
    log_z_x: f64,
) -> Result<Estimate> {
    let n = sc.n_spins();
    if x_rows.is_empty() || x_rows.len() % n != 0 {
        return Err(Error::InvalidArgument("sample matrix must hold full rows"));
    }
    let energies: Vec<f64> = x_rows
        .chunks(n)
        .map(|row| sc.hamiltonian_density(row, beta))
        .collect::<Result<_>>()?;
    entropy_from_energies(&energies, beta, log_z_x)
}

/// How the discrete log-partition sum entering a report was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogZsMethod {
    Exact,
    ThermoIntegration,
    ReplicaSymmetric,
}

/// Free energies of the continuous dual plus the KL estimates that compare
/// a trained flow against it.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergyReport {
    pub beta: f64,
    pub log_z_s: f64,
    pub log_z_s_method: LogZsMethod,
    pub helmholtz_x: f64,
    pub gibbs_x: Option<Estimate>,
    /// `loss - beta F_x`, an estimate of `beta (G_x - F_x)`.
    pub reverse_kl: Option<Estimate>,
    pub forward_loss: Option<Estimate>,
    pub shannon_entropy_x: Option<Estimate>,
    /// `forward_loss - H(p(x))`.
    pub forward_kl: Option<Estimate>,
}

/// Everything a [`kl_report`] may draw on. Loss snapshots are
/// `(mean, standard error)` pairs from evaluation on the trained model.
#[derive(Debug, Clone, Copy, Default)]
pub struct KlInputs<'a> {
    pub reverse_snapshot: Option<(f64, f64)>,
    pub forward_snapshot: Option<(f64, f64)>,
    /// Continuous samples of the target at the report temperature.
    pub x_rows: Option<&'a [f64]>,
    /// Exact discrete log-partition sum, if enumerable.
    pub exact_log_z_s: Option<f64>,
    /// Measured `(beta, <H>)` ladder for thermodynamic integration.
    pub mean_energies: Option<&'a [(f64, f64)]>,
}

/// Assembles free energies and KL estimates at inverse temperature `beta`.
/// The discrete log-partition sum comes from the first applicable source:
/// exact enumeration when supplied, the replica-symmetric expression above
/// the transition temperature, and thermodynamic integration of ladder
/// energies below it.
pub fn kl_report(
    sc: &ShiftedCoupling,
    beta: f64,
    inputs: &KlInputs,
) -> Result<FreeEnergyReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument("beta must be positive and finite"));
    }
    let n = sc.n_spins();
    let scale = sc.base().scale();
    let (log_z_s, log_z_s_method) = if let Some(v) = inputs.exact_log_z_s {
        (v, LogZsMethod::Exact)
    } else if beta * scale < 1.0 {
        let f_s = replica_symmetric_free_energy(n, scale, beta);
        (-beta * f_s, LogZsMethod::ReplicaSymmetric)
    } else {
        let energies = inputs.mean_energies.ok_or(Error::InvalidArgument(
            "below the transition the report needs ladder energies or an exact log partition sum",
        ))?;
        (log_z_s_thermo_integration(energies, n, beta)?, LogZsMethod::ThermoIntegration)
    };
    let log_z_x = sc.log_partition_x_from_s(log_z_s, beta)?;
    let helmholtz_x = -log_z_x / beta;

    let gibbs_x = inputs
        .reverse_snapshot
        .map(|(loss, se)| Estimate::new(loss / beta, se / beta));
    let reverse_kl = inputs
        .reverse_snapshot
        .map(|(loss, se)| Estimate::new(loss + log_z_x, se));

    let shannon = match inputs.x_rows {
        Some(rows) => Some(shannon_entropy_x(sc, beta, rows, log_z_x)?),
        None => None,
    };
    let forward_loss = inputs.forward_snapshot.map(|(l, se)| Estimate::new(l, se));
    let forward_kl = match (inputs.forward_snapshot, &shannon) {
        (Some((loss, se)), Some(h)) => Some(Estimate::new(
            loss - h.value,
            libm::sqrt(se * se + h.std_error * h.std_error),
        )),
        (Some(_), None) => {
            return Err(Error::InvalidArgument(
                "forward KL needs target samples for the entropy",
            ))
        }
        _ => None,
    };

    Ok(FreeEnergyReport {
        beta,
        log_z_s,
        log_z_s_method,
        helmholtz_x,
        gibbs_x,
        reverse_kl,
        forward_loss,
        shannon_entropy_x: shannon,
        forward_kl,
    })
}

/// Maps continuous rows back to spin rows by one conditional draw each.
pub fn discretize_samples<R: Rng + ?Sized>(
    sc: &ShiftedCoupling,
    beta: f64,
    x_rows: &[f64],
    rng: &mut R,
) -> Result<Vec<i8>> {
    let n = sc.n_spins();
    if x_rows.is_empty() || x_rows.len() % n != 0 {
        return Err(Error::InvalidArgument("sample matrix must hold full rows"));
    }
    let mut spins = Vec::with_capacity(x_rows.len());
    for row in x_rows.chunks(n) {
        spins.extend_from_slice(sc.sample_s_given_x(row, beta, rng)?.as_slice());
    }
    Ok(spins)
}

/// Sizes and tolerances for one internal-layer probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub n_samples: usize,
    pub n_pairs: usize,
    pub bins: usize,
    pub n_triples: usize,
    pub tolerance: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            n_samples: 10_000,
            n_pairs: DEFAULT_OVERLAP_PAIRS,
            bins: DEFAULT_OVERLAP_BINS,
            n_triples: 50_000,
            tolerance: DEFAULT_TRIANGLE_TOLERANCE,
        }
    }
}

/// Samples the distribution a flow induces after its first `layer` coupling
/// layers, discretizes, and runs the overlap and triangle diagnostics on
/// the result. `layer = 0` probes the latent prior; `layer = L` the model.
pub fn layer_probe<R: Rng + ?Sized>(
    model: &FlowModel,
    sc: &ShiftedCoupling,
    beta: f64,
    layer: usize,
    cfg: &ProbeConfig,
    rng: &mut R,
) -> Result<(OverlapHistogram, TriangleStats)> {
    if model.n_sites() != sc.n_spins() {
        return Err(Error::DimensionMismatch { expected: sc.n_spins(), got: model.n_sites() });
    }
    let xs = model.sample_partial(cfg.n_samples, layer, rng)?;
    let spins = discretize_samples(sc, beta, &xs, rng)?;
    let hist = overlap_histogram(
        &spins,
        sc.n_spins(),
        cfg.n_pairs,
        cfg.bins,
        beta,
        HistogramSource::FlowLayer(layer),
        rng,
    )?;
    let triangles = triangle_stats(&spins, sc.n_spins(), cfg.n_triples, cfg.tolerance, rng)?;
    Ok((hist, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_standard_normal, stream_rng};
    use crate::spinglass::DisorderRealization;
    use approx::assert_abs_diff_eq;

    #[test]
    fn overlap_hand_values() {
        let s = [1i8, -1, 1, 1];
        let neg: Vec<i8> = s.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(overlap(&s, &s).unwrap(), 1.0);
        assert_abs_diff_eq!(overlap(&s, &neg).unwrap(), -1.0);
        let a = [1i8, 1, 1, 1];
        let b = [1i8, 1, -1, -1];
        assert_abs_diff_eq!(overlap(&a, &b).unwrap(), 0.0);
        assert_abs_diff_eq!(overlap(&a, &b).unwrap(), overlap(&b, &a).unwrap());
        assert!(overlap(&a, &b[..3]).is_err());
        assert_abs_diff_eq!(overlap_to_distance(1.0), 0.0);
        assert_abs_diff_eq!(overlap_to_distance(-1.0), 1.0);
    }

    #[test]
    fn histogram_of_identical_samples_spikes_at_one() {
        let spins: Vec<i8> = core::iter::repeat([1i8, -1, 1, -1]).take(10).flatten().collect();
        let mut rng = stream_rng(1, 0);
        let h =
            overlap_histogram(&spins, 4, 500, 9, 1.0, HistogramSource::Pt, &mut rng).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 500);
        assert_eq!(*h.counts.last().unwrap(), 500);
        assert_abs_diff_eq!(h.bin_edges[0], -1.0);
        assert_abs_diff_eq!(*h.bin_edges.last().unwrap(), 1.0);
    }

    #[test]
    fn histogram_rejects_degenerate_inputs() {
        let mut rng = stream_rng(2, 0);
        let spins = [1i8, 1, 1, 1];
        assert!(overlap_histogram(&spins, 4, 10, 9, 1.0, HistogramSource::Pt, &mut rng).is_err());
        assert!(overlap_histogram(&spins, 3, 10, 9, 1.0, HistogramSource::Pt, &mut rng).is_err());
        let two = [1i8, 1, -1, -1];
        assert!(overlap_histogram(&two, 2, 0, 9, 1.0, HistogramSource::Pt, &mut rng).is_err());
    }

    #[test]
    fn histogram_of_paired_flips_is_mirror_symmetric() {
        // Rows come in +-s pairs, so q and -q are equally likely.
        let n = 6;
        let mut rng = stream_rng(3, 0);
        let mut spins: Vec<i8> = Vec::new();
        for _ in 0..200 {
            let row: Vec<i8> =
                (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            spins.extend(row.iter().map(|v| -v));
            spins.extend(row);
        }
        let h = overlap_histogram(&spins, n, 40_000, 41, 1.0, HistogramSource::Pt, &mut rng)
            .unwrap();
        let below: u64 = h.counts[..20].iter().sum();
        let above: u64 = h.counts[21..].iter().sum();
        let total = (below + above) as f64;
        let gap = (below as f64 - above as f64).abs();
        assert!(gap < 5.0 * total.sqrt(), "asymmetry {below} vs {above}");
    }

    #[test]
    fn triangle_classification_matches_hand_cases() {
        let tol = 0.02;
        assert_eq!(classify_triangle(0.1, 0.1, 0.1, tol), TriangleClass::Equilateral);
        assert_eq!(classify_triangle(0.1, 0.3, 0.3, tol), TriangleClass::AcuteIsosceles);
        assert_eq!(classify_triangle(0.3, 0.3, 0.1, tol), TriangleClass::AcuteIsosceles);
        // Two shortest sides equal violates the ultrametric pattern.
        assert_eq!(classify_triangle(0.1, 0.1, 0.3, tol), TriangleClass::Other);
        // Permutation invariance.
        for perm in [(0.3, 0.1, 0.3), (0.3, 0.3, 0.1), (0.1, 0.3, 0.3)] {
            assert_eq!(
                classify_triangle(perm.0, perm.1, perm.2, tol),
                TriangleClass::AcuteIsosceles
            );
        }
    }

    #[test]
    fn triangle_stats_sees_an_isosceles_cluster_pair() {
        // Two nearby rows plus one equally far from both: the far pair of
        // sides is equal, so every triple lands in the isosceles class.
        let a = [1i8, 1, 1, 1, 1, 1, 1, 1];
        let b = [1i8, 1, 1, 1, 1, 1, -1, -1];
        let c = [-1i8, -1, -1, -1, 1, 1, 1, -1];
        let mut spins = Vec::new();
        spins.extend_from_slice(&a);
        spins.extend_from_slice(&b);
        spins.extend_from_slice(&c);
        let mut rng = stream_rng(4, 0);
        let stats = triangle_stats(&spins, 8, 50, 0.02, &mut rng).unwrap();
        assert_abs_diff_eq!(stats.acute_isosceles_fraction, 1.0);
        assert_abs_diff_eq!(
            stats.equilateral_fraction + stats.acute_isosceles_fraction + stats.other_fraction,
            1.0
        );
        for &(gap_top, gap_bottom) in &stats.raw_points {
            assert_abs_diff_eq!(gap_top, 0.0);
            assert_abs_diff_eq!(gap_bottom, 0.375);
        }
    }

    #[test]
    fn triangle_stats_flags_non_ultrametric_geometry() {
        // Two far rows plus one midway between them: the two SHORT sides
        // are equal, which an ultrametric space forbids.
        let a = [1i8; 8];
        let b = [-1i8; 8];
        let c = [1i8, 1, 1, 1, -1, -1, -1, -1];
        let mut spins = Vec::new();
        spins.extend_from_slice(&a);
        spins.extend_from_slice(&b);
        spins.extend_from_slice(&c);
        let mut rng = stream_rng(5, 0);
        let stats = triangle_stats(&spins, 8, 20, 0.02, &mut rng).unwrap();
        assert_abs_diff_eq!(stats.other_fraction, 1.0);
    }

    #[test]
    fn identical_rows_make_equilateral_triangles() {
        let spins: Vec<i8> = core::iter::repeat([1i8, -1, 1, -1]).take(5).flatten().collect();
        let mut rng = stream_rng(6, 0);
        let stats = triangle_stats(&spins, 4, 30, 0.02, &mut rng).unwrap();
        assert_abs_diff_eq!(stats.equilateral_fraction, 1.0);
        assert!(stats.raw_points.iter().all(|&(x, y)| x == 0.0 && y == 0.0));
    }

    #[test]
    fn magnetization_cancels_for_flip_pairs() {
        let s = [1i8, -1, 1, -1, 1, 1];
        let mut spins = Vec::new();
        spins.extend_from_slice(&s);
        spins.extend(s.iter().map(|v| -v));
        let (m, per_site) = magnetization(&spins, 6).unwrap();
        assert_abs_diff_eq!(m, 0.0);
        assert!(per_site.iter().all(|&v| v == 0.0));

        let (m, per_site) = magnetization(&s, 6).unwrap();
        assert_abs_diff_eq!(m, 2.0);
        assert_abs_diff_eq!(per_site[0], 1.0);
        assert_abs_diff_eq!(per_site[1], -1.0);
    }

    #[test]
    fn thermo_integration_at_zero_beta_is_free_spins() {
        let points = [(0.5, -2.0), (1.0, -3.0)];
        let v = log_z_s_thermo_integration(&points, 8, 0.0).unwrap();
        assert_abs_diff_eq!(v, 8.0 * libm::log(2.0), epsilon = 1e-12);
    }

    #[test]
    fn thermo_integration_tracks_exact_enumeration() {
        let n = 8;
        let d = DisorderRealization::sample_sk(n, 1.0, 7).unwrap();
        let mut points = Vec::new();
        let betas: Vec<f64> = (1..=16).map(|k| 5.0 * k as f64 / 16.0).collect();
        for &b in &betas {
            let ex = d.enumerate_exact(b).unwrap();
            points.push((b, ex.mean_energy));
        }
        let target = 5.0;
        let exact = d.enumerate_exact(target).unwrap().log_z_s;
        let est = log_z_s_thermo_integration(&points, n, target).unwrap();
        assert!(
            (est - exact).abs() / exact.abs() < 0.005,
            "thermo {est} vs exact {exact}"
        );
        // More negative mean energies at larger beta only grow the sum.
        let at_half = log_z_s_thermo_integration(&points, n, 2.5).unwrap();
        assert!(exact > at_half && at_half > 8.0 * libm::log(2.0) - 1e-9);
    }

    #[test]
    fn thermo_integration_rejects_out_of_range_targets() {
        let points = [(0.5, -1.0), (1.0, -2.0)];
        assert!(log_z_s_thermo_integration(&points, 4, 2.0).is_err());
        assert!(log_z_s_thermo_integration(&points, 4, -0.5).is_err());
        let dup = [(0.5, -1.0), (0.5, -1.1)];
        assert!(log_z_s_thermo_integration(&dup, 4, 0.5).is_err());
    }

    #[test]
    fn entropy_estimator_recovers_the_gaussian_value() {
        let n = 6;
        let m = 100_000;
        let mut rng = stream_rng(8, 0);
        let mut row = vec![0.0; n];
        let mut energies = Vec::with_capacity(m);
        for _ in 0..m {
            fill_standard_normal(&mut rng, &mut row);
            energies.push(0.5 * row.iter().map(|v| v * v).sum::<f64>());
        }
        let log_z = 0.5 * n as f64 * crate::spinglass::ln_2pi();
        let est = entropy_from_energies(&energies, 1.0, log_z).unwrap();
        let expect = 0.5 * n as f64 * (1.0 + crate::spinglass::ln_2pi());
        assert!(
            (est.value - expect).abs() / expect < 0.01,
            "entropy {} vs {expect}",
            est.value
        );
        assert!(est.std_error > 0.0 && !est.negative);
    }

    /// Draws exact continuous samples for a small instance by enumerating
    /// the discrete distribution and decorating each draw with its
    /// conditional Gaussian.
    fn exact_x_rows(
        d: &DisorderRealization,
        sc: &ShiftedCoupling,
        beta: f64,
        count: usize,
        seed: u64,
    ) -> Vec<f64> {
        let n = d.n_spins();
        let n_states = 1usize << n;
        let mut weights = Vec::with_capacity(n_states);
        let mut max_w = f64::NEG_INFINITY;
        let mut spins_of = Vec::with_capacity(n_states);
        for code in 0..n_states {
            let spins: Vec<i8> =
                (0..n).map(|i| if code >> i & 1 == 1 { 1i8 } else { -1 }).collect();
            let w = -beta * d.energy(&spins).unwrap();
            max_w = max_w.max(w);
            weights.push(w);
            spins_of.push(spins);
        }
        let mut cumulative = Vec::with_capacity(n_states);
        let mut total = 0.0;
        for w in &weights {
            total += libm::exp(w - max_w);
            cumulative.push(total);
        }
        let mut rng = stream_rng(seed, 0);
        let mut rows = Vec::with_capacity(count * n);
        for _ in 0..count {
            let u: f64 = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c < u).min(n_states - 1);
            let x = sc.sample_x_given_s(&spins_of[idx], beta, &mut rng).unwrap();
            rows.extend_from_slice(&x);
        }
        rows
    }

    #[test]
    fn kl_report_vanishes_for_a_perfect_model() {
        let n = 4;
        let beta = 1.5;
        let d = DisorderRealization::sample_sk(n, 1.0, 9).unwrap();
        let sc = ShiftedCoupling::new(&d, 0.01).unwrap();
        let exact = d.enumerate_exact(beta).unwrap();
        let log_z_x = sc.log_partition_x_from_s(exact.log_z_s, beta).unwrap();

        let rows = exact_x_rows(&d, &sc, beta, 20_000, 10);
        // A perfect model's likelihood is the target density itself, so
        // its forward loss is beta <H> + ln Z_x evaluated on target draws,
        // and its reverse loss is exactly beta F_x with zero variance.
        let losses: Vec<f64> = rows
            .chunks(n)
            .map(|r| beta * sc.hamiltonian_density(r, beta).unwrap() + log_z_x)
            .collect();
        let count = losses.len() as f64;
        let fwd_mean = losses.iter().sum::<f64>() / count;
        let fwd_var =
            losses.iter().map(|v| (v - fwd_mean) * (v - fwd_mean)).sum::<f64>() / (count - 1.0);
        let fwd_se = (fwd_var / count).sqrt();

        let inputs = KlInputs {
            reverse_snapshot: Some((-log_z_x, 0.0)),
            forward_snapshot: Some((fwd_mean, fwd_se)),
            x_rows: Some(&rows),
            exact_log_z_s: Some(exact.log_z_s),
            mean_energies: None,
        };
        let report = kl_report(&sc, beta, &inputs).unwrap();
        assert_eq!(report.log_z_s_method, LogZsMethod::Exact);
        assert_abs_diff_eq!(report.helmholtz_x, -log_z_x / beta, epsilon = 1e-12);

        let rev = report.reverse_kl.unwrap();
        assert_abs_diff_eq!(rev.value, 0.0, epsilon = 1e-12);
        let fwd = report.forward_kl.unwrap();
        assert!(
            fwd.value.abs() <= 2.0 * fwd.std_error,
            "forward KL {} +- {}",
            fwd.value,
            fwd.std_error
        );
        let gibbs = report.gibbs_x.unwrap();
        assert_abs_diff_eq!(gibbs.value, report.helmholtz_x, epsilon = 1e-12);
    }

    #[test]
    fn kl_report_switches_log_partition_methods() {
        let n = 6;
        let d = DisorderRealization::sample_sk(n, 1.0, 11).unwrap();
        let sc = ShiftedCoupling::new(&d, 0.01).unwrap();

        // Above the transition the replica-symmetric value applies.
        let hot = kl_report(&sc, 0.5, &KlInputs::default()).unwrap();
        assert_eq!(hot.log_z_s_method, LogZsMethod::ReplicaSymmetric);
        let f_s = replica_symmetric_free_energy(n, 1.0, 0.5);
        assert_abs_diff_eq!(hot.log_z_s, -0.5 * f_s, epsilon = 1e-12);

        // Below it the report refuses to guess without data.
        assert!(kl_report(&sc, 2.0, &KlInputs::default()).is_err());

        let points: Vec<(f64, f64)> = (1..=12)
            .map(|k| {
                let b = 2.5 * k as f64 / 12.0;
                (b, d.enumerate_exact(b).unwrap().mean_energy)
            })
            .collect();
        let cold = kl_report(
            &sc,
            2.0,
            &KlInputs { mean_energies: Some(&points), ..KlInputs::default() },
        )
        .unwrap();
        assert_eq!(cold.log_z_s_method, LogZsMethod::ThermoIntegration);
        let exact = d.enumerate_exact(2.0).unwrap().log_z_s;
        assert!((cold.log_z_s - exact).abs() / exact.abs() < 0.01);

        // Exact input wins over both.
        let forced = kl_report(
            &sc,
            0.5,
            &KlInputs { exact_log_z_s: Some(1.23), ..KlInputs::default() },
        )
        .unwrap();
        assert_eq!(forced.log_z_s_method, LogZsMethod::Exact);
        assert_abs_diff_eq!(forced.log_z_s, 1.23);
    }

    #[test]
    fn negative_kl_estimates_are_flagged_not_clamped() {
        let n = 4;
        let beta = 0.5;
        let d = DisorderRealization::sample_sk(n, 1.0, 12).unwrap();
        let sc = ShiftedCoupling::new(&d, 0.01).unwrap();
        let exact = d.enumerate_exact(beta).unwrap();
        let log_z_x = sc.log_partition_x_from_s(exact.log_z_s, beta).unwrap();
        let report = kl_report(
            &sc,
            beta,
            &KlInputs {
                reverse_snapshot: Some((-log_z_x - 0.05, 0.01)),
                exact_log_z_s: Some(exact.log_z_s),
                ..KlInputs::default()
            },
        )
        .unwrap();
        let rev = report.reverse_kl.unwrap();
        assert!(rev.negative);
        assert_abs_diff_eq!(rev.value, -0.05, epsilon = 1e-12);
    }

    #[test]
    fn forward_kl_without_samples_is_refused() {
        let d = DisorderRealization::sample_sk(4, 1.0, 13).unwrap();
        let sc = ShiftedCoupling::new(&d, 0.01).unwrap();
        let err = kl_report(
            &sc,
            0.5,
            &KlInputs { forward_snapshot: Some((3.0, 0.1)), ..KlInputs::default() },
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn layer_zero_probe_is_unimodal_around_zero_overlap() {
        let n = 8;
        let d = DisorderRealization::sample_sk(n, 1.0, 14).unwrap();
        let sc = ShiftedCoupling::new(&d, 0.01).unwrap();
        let model = FlowModel::init(n, 4, 15).unwrap();
        let mut rng = stream_rng(16, 0);
        let cfg = ProbeConfig {
            n_samples: 2000,
            n_pairs: 20_000,
            bins: 21,
            n_triples: 1000,
            tolerance: 0.02,
        };
        let (hist, stats) = layer_probe(&model, &sc, 1.0, 0, &cfg, &mut rng).unwrap();
        assert_eq!(hist.counts.iter().sum::<u64>() as usize, hist.n_pairs);
        assert_eq!(hist.source, HistogramSource::FlowLayer(0));
        let mean_q: f64 = (0..hist.n_bins())
            .map(|k| hist.bin_center(k) * hist.counts[k] as f64)
            .sum::<f64>()
            / hist.n_pairs as f64;
        assert!(mean_q.abs() < 0.2, "latent overlap mean {mean_q}");
        assert_abs_diff_eq!(
            stats.equilateral_fraction + stats.acute_isosceles_fraction + stats.other_fraction,
            1.0
        );
    }

    #[test]
    fn discretize_rejects_ragged_rows() {
        let d = DisorderRealization::sample_sk(4, 1.0, 17).unwrap();
        let sc = ShiftedCoupling::new(&d, 0.01).unwrap();
        let mut rng = stream_rng(18, 0);
        assert!(discretize_samples(&sc, 1.0, &[0.0; 6], &mut rng).is_err());
        let spins = discretize_samples(&sc, 1.0, &[0.1; 8], &mut rng).unwrap();
        assert_eq!(spins.len(), 8);
        assert!(spins.iter().all(|&s| s == 1 || s == -1));
    }
}
