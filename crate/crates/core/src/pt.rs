//! Parallel tempering over a temperature ladder.
//!
//! One replica per ladder slot runs sequential-scan single-spin-flip
//! Metropolis sweeps; adjacent slots periodically attempt to exchange their
//! configurations. Replica sweeps use per-slot random streams derived from
//! `(seed, slot)` and the exchange step has a stream of its own, so a run is
//! reproducible byte for byte no matter how sweeps are scheduled.

use alloc::string::String;

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::{stream_rng, ChaCha8Rng};
use crate::spinglass::{DisorderRealization, ShiftedCoupling, SpinConfig};

/// Inverse temperatures, strictly increasing (hottest first).
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureLadder {
    betas: Vec<f64>,
}

impl TemperatureLadder {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::InvalidArgument("ladder needs at least two temperatures"));
        }
        if betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidArgument("inverse temperatures must be positive and finite"));
        }
        if betas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("inverse temperatures must be strictly increasing"));
        }
        Ok(TemperatureLadder { betas })
    }

    /// Geometric ladder of `count` temperatures covering `[t_min, t_max]`.
    pub fn geometric(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0) || !(t_max > t_min) || !t_max.is_finite() {
            return Err(Error::InvalidArgument("need 0 < t_min < t_max"));
        }
        if count < 2 {
            return Err(Error::InvalidArgument("ladder needs at least two temperatures"));
        }
        let ratio = t_max / t_min;
        let betas = (0..count)
            .map(|k| {
                // Hot end (t_max) first in temperature means beta ascending.
                let t = t_max / libm::pow(ratio, k as f64 / (count - 1) as f64);
                1.0 / t
            })
            .collect();
        TemperatureLadder::from_betas(betas)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

/// One replica pinned to a ladder slot. `energy` is maintained incrementally
/// across flips and refreshed from scratch periodically.
#[derive(Debug, Clone)]
pub struct ReplicaState {
    pub config: SpinConfig,
    pub energy: f64,
    pub beta_index: usize,
}

/// One full sequential-scan Metropolis sweep: proposes flipping each spin in
/// index order and accepts with probability `min(1, exp(-beta dH))`.
pub fn metropolis_sweep<R: Rng + ?Sized>(
    state: &mut ReplicaState,
    beta: f64,
    d: &DisorderRealization,
    rng: &mut R,
) {
    let n = d.n_spins();
    for i in 0..n {
        let s = state.config.as_slice()[i] as f64;
        let dh = 2.0 * s * d.local_field(state.config.as_slice(), i);
        // One uniform per proposal regardless of sign(dh) keeps stream
        // consumption fixed; exp(-beta dh) >= 1 accepts unconditionally.
        let u: f64 = rng.gen();
        if u < libm::exp(-beta * dh) {
            state.config.flip(i);
            state.energy += dh;
        }
    }
}

/// Exchange acceptance probability for adjacent slots: `min(1, exp((beta_i -
/// beta_j)(H_i - H_j)))`.
#[inline]
pub fn exchange_accept_probability(beta_i: f64, beta_j: f64, e_i: f64, e_j: f64) -> f64 {
    libm::exp((beta_i - beta_j) * (e_i - e_j)).min(1.0)
}

/// One exchange phase: attempts swaps of configurations between slot pairs
/// `(offset, offset+1), (offset+2, offset+3), ...`. Callers alternate
/// `offset` between 0 and 1. Returns the number of accepted swaps.
pub fn replica_exchange_step<R: Rng + ?Sized>(
    replicas: &mut [ReplicaState],
    betas: &[f64],
    offset: usize,
    rng: &mut R,
) -> usize {
    debug_assert_eq!(replicas.len(), betas.len());
    debug_assert!(offset <= 1);
    let mut accepted = 0;
    let mut i = offset;
    while i + 1 < replicas.len() {
        let p = exchange_accept_probability(
            betas[i],
            betas[i + 1],
            replicas[i].energy,
            replicas[i + 1].energy,
        );
        let u: f64 = rng.gen();
        if u < p {
            let (a, b) = replicas.split_at_mut(i + 1);
            core::mem::swap(&mut a[i].config, &mut b[0].config);
            core::mem::swap(&mut a[i].energy, &mut b[0].energy);
            accepted += 1;
        }
        i += 2;
    }
    accepted
}

/// Provenance and shape of one recorded sample batch at a single
/// temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeta {
    pub sweeps_per_sample: u32,
    pub burn_in: u64,
    pub seed: u64,
}

/// Recorded equilibrium samples at one temperature: `n_samples` rows of
/// `n_spins` entries, row-major, plus the matching continuous rows once
/// they have been generated.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub disorder_id: String,
    pub beta: f64,
    pub n_spins: usize,
    pub n_samples: usize,
    pub spins: Vec<i8>,
    pub xs: Option<Vec<f64>>,
    pub meta: SampleMeta,
}

impl SampleSet {
    pub fn row(&self, i: usize) -> &[i8] {
        &self.spins[i * self.n_spins..(i + 1) * self.n_spins]
    }

    pub fn x_row(&self, i: usize) -> Option<&[f64]> {
        self.xs.as_ref().map(|xs| &xs[i * self.n_spins..(i + 1) * self.n_spins])
    }

    /// Consistency check for sets read back from storage.
    pub fn validate(&self) -> Result<()> {
        if self.spins.len() != self.n_samples * self.n_spins {
            return Err(Error::DimensionMismatch {
                expected: self.n_samples * self.n_spins,
                got: self.spins.len(),
            });
        }
        if self.spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("spin entries must be +1 or -1"));
        }
        if let Some(xs) = &self.xs {
            if xs.len() != self.n_samples * self.n_spins {
                return Err(Error::DimensionMismatch {
                    expected: self.n_samples * self.n_spins,
                    got: xs.len(),
                });
            }
            if xs.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("continuous samples must be finite"));
            }
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be positive and finite"));
        }
        Ok(())
    }
}

/// Refresh cadence for the incrementally maintained energies.
const ENERGY_REFRESH_SWEEPS: u64 = 1024;

/// Runs parallel tempering and records one sample per sweep per temperature
/// after `burn_in_sweeps`. Returns one [`SampleSet`] per ladder slot, in
/// ladder order. Exchanges alternate even and odd pairings every step,
/// including during burn-in.
pub fn run_pt<E: Executor>(
    d: &DisorderRealization,
    ladder: &TemperatureLadder,
    burn_in_sweeps: u64,
    n_samples: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<SampleSet>> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample"));
    }
    let n = d.n_spins();
    let disorder_id = d.content_id();

    // Slot r draws everything it needs (initial configuration, then sweep
    // uniforms) from stream r+1; stream 0 is reserved for exchanges.
    let mut rngs: Vec<ChaCha8Rng> =
        (0..ladder.len()).map(|r| stream_rng(seed, r as u64 + 1)).collect();
    let mut states: Vec<ReplicaState> = rngs
        .iter_mut()
        .enumerate()
        .map(|(r, rng)| {
            let config = SpinConfig::random(n, rng);
            let energy = d.energy(config.as_slice()).expect("matching sizes");
            ReplicaState { config, energy, beta_index: r }
        })
        .collect();
    let mut exchange_rng = stream_rng(seed, 0);

    let mut sets: Vec<SampleSet> = ladder
        .betas()
        .iter()
        .map(|&beta| SampleSet {
            disorder_id: disorder_id.clone(),
            beta,
            n_spins: n,
            n_samples,
            spins: Vec::with_capacity(n_samples * n),
            xs: None,
            meta: SampleMeta { sweeps_per_sample: 1, burn_in: burn_in_sweeps, seed },
        })
        .collect();

    let total = burn_in_sweeps + n_samples as u64;
    for step in 0..total {
        let mut sweeps: Vec<(&mut ReplicaState, &mut ChaCha8Rng, f64)> = states
            .iter_mut()
            .zip(rngs.iter_mut())
            .zip(ladder.betas())
            .map(|((state, rng), &beta)| (state, rng, beta))
            .collect();
        exec.map_inplace(&mut sweeps, |(state, rng, beta)| {
            metropolis_sweep(state, *beta, d, rng);
        });
        drop(sweeps);
        replica_exchange_step(
            &mut states,
            ladder.betas(),
            (step % 2) as usize,
            &mut exchange_rng,
        );

        if step % ENERGY_REFRESH_SWEEPS == ENERGY_REFRESH_SWEEPS - 1 {
            for state in states.iter_mut() {
                state.energy = d.energy(state.config.as_slice())?;
            }
        }

        if step >= burn_in_sweeps {
            for (set, state) in sets.iter_mut().zip(states.iter()) {
                set.spins.extend_from_slice(state.config.as_slice());
            }
        }
    }
    Ok(sets)
}

/// Converts recorded spins to continuous rows by drawing `x | s` once per
/// sample, in row order, from `rng`. Fails if the set already has continuous
/// rows or belongs to a different disorder realization.
pub fn build_continuous_dataset<R: Rng + ?Sized>(
    set: &SampleSet,
    sc: &ShiftedCoupling,
    rng: &mut R,
) -> Result<SampleSet> {
    if set.xs.is_some() {
        return Err(Error::InvalidState("continuous rows are already present"));
    }
    if set.disorder_id != sc.base().content_id() {
        return Err(Error::InvalidArgument("sample set belongs to a different realization"));
    }
    set.validate()?;
    let mut xs = Vec::with_capacity(set.spins.len());
    for i in 0..set.n_samples {
        let x = sc.sample_x_given_s(set.row(i), set.beta, rng)?;
        xs.extend_from_slice(&x);
    }
    let mut out = set.clone();
    out.xs = Some(xs);
    Ok(out)
}
