//! Discrete spin-glass Hamiltonians and their continuous duals.
//!
//! A disorder realization fixes couplings `J` (symmetric, zero diagonal) and
//! per-site fields `h` for the energy `H(s) = -sum_i h_i s_i - sum_{i<j}
//! J_ij s_i s_j` over `s in {-1,+1}^N`. Shifting the couplings to `Jt = J +
//! shift * I` makes them positive definite, which turns the Boltzmann weight
//! into a smooth density over `R^N` with Hamiltonian density
//!
//! `Hd(x) = x^T Jt x / 2 - (1/beta) * sum_i ln 2cosh(beta * (Jt x + h)_i)`
//!
//! whose normalizer relates back to the discrete partition function exactly.
//! Both directions of the duality are sampleable: `x | s` is Gaussian and
//! `s | x` factorizes over sites.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{fill_standard_normal, stream_rng};

/// `ln(2*pi)`, as computed by the same math library the rest of the crate
/// uses.
#[inline]
pub fn ln_2pi() -> f64 {
    libm::log(core::f64::consts::TAU)
}

/// Overflow-safe `ln(2 cosh(a))`.
#[inline]
pub fn ln_2cosh(a: f64) -> f64 {
    let t = libm::fabs(a);
    t + libm::log1p(libm::exp(-2.0 * t))
}

/// Numerically stable logistic function `1 / (1 + e^{-t})`.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// Overflow-safe `sech(a) = 1 / cosh(a)`.
#[inline]
fn sech(a: f64) -> f64 {
    let t = libm::fabs(a);
    2.0 * libm::exp(-t) / (1.0 + libm::exp(-2.0 * t))
}

/// One spin configuration; entries are exactly +1 or -1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("spin entries must be +1 or -1"));
        }
        Ok(SpinConfig { spins })
    }

    /// Uniformly random configuration of `n` spins.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let spins = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        SpinConfig { spins }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }
}

/// Couplings and fields of one quenched disorder sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    n_spins: usize,
    couplings: Matrix,
    fields: Vec<f64>,
    scale: f64,
    seed: u64,
}

/// Guard for exhaustive enumeration; `2^20` states is the largest sum worth
/// waiting for.
pub const MAX_ENUMERATION_SPINS: usize = 20;

impl DisorderRealization {
    /// Draws Sherrington-Kirkpatrick couplings: `J_ij ~ N(0, scale^2 / n)`
    /// independently for `i < j`, mirrored to `J_ji`, zero diagonal, zero
    /// fields.
    pub fn sample_sk(n_spins: usize, scale: f64, seed: u64) -> Result<Self> {
        if n_spins < 2 {
            return Err(Error::InvalidArgument("need at least two spins"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument("coupling scale must be positive and finite"));
        }
        let mut rng = stream_rng(seed, 0);
        let sd = scale / libm::sqrt(n_spins as f64);
        let mut couplings = Matrix::zeros(n_spins, n_spins);
        for i in 0..n_spins {
            for j in (i + 1)..n_spins {
                let mut pair = [0.0];
                fill_standard_normal(&mut rng, &mut pair);
                let x = sd * pair[0];
                *couplings.at_mut(i, j) = x;
                *couplings.at_mut(j, i) = x;
            }
        }
        Ok(DisorderRealization {
            n_spins,
            couplings,
            fields: vec![0.0; n_spins],
            scale,
            seed,
        })
    }

    /// Builds a realization from explicit couplings and fields, validating
    /// symmetry and the zero diagonal.
    pub fn from_parts(couplings: Matrix, fields: Vec<f64>, scale: f64, seed: u64) -> Result<Self> {
        let n = couplings.rows();
        if couplings.cols() != n {
            return Err(Error::InvalidArgument("coupling matrix must be square"));
        }
        if fields.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: fields.len() });
        }
        if n < 2 {
            return Err(Error::InvalidArgument("need at least two spins"));
        }
        if couplings.max_asymmetry() > 0.0 {
            return Err(Error::InvalidArgument("coupling matrix must be symmetric"));
        }
        if (0..n).any(|i| couplings.at(i, i) != 0.0) {
            return Err(Error::InvalidArgument("coupling diagonal must be zero"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument("coupling scale must be positive and finite"));
        }
        Ok(DisorderRealization { n_spins: n, couplings, fields, scale, seed })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn couplings(&self) -> &Matrix {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `H(s) = -h.s - sum_{i<j} J_ij s_i s_j`.
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n_spins {
            return Err(Error::DimensionMismatch { expected: self.n_spins, got: spins.len() });
        }
        let mut h = 0.0;
        for i in 0..self.n_spins {
            let si = spins[i] as f64;
            h -= self.fields[i] * si;
            let row = self.couplings.row(i);
            let mut acc = 0.0;
            for j in (i + 1)..self.n_spins {
                acc += row[j] * spins[j] as f64;
            }
            h -= si * acc;
        }
        Ok(h)
    }

    /// Local field `h_i + sum_j J_ij s_j` at site `i`.
    #[inline]
    pub fn local_field(&self, spins: &[i8], i: usize) -> f64 {
        let row = self.couplings.row(i);
        let mut acc = self.fields[i];
        for (j, &s) in spins.iter().enumerate() {
            acc += row[j] * s as f64;
        }
        acc
    }

    /// Stable fingerprint of the realization contents, independent of how it
    /// was constructed or stored.
    pub fn content_id(&self) -> String {
        let mut h = Fnv1a::new();
        h.write_u64(self.n_spins as u64);
        h.write_u64(self.scale.to_bits());
        h.write_u64(self.seed);
        for &x in self.couplings.data() {
            h.write_u64(x.to_bits());
        }
        for &x in &self.fields {
            h.write_u64(x.to_bits());
        }
        format!("{:016x}", h.finish())
    }

    /// Exact Boltzmann summary by exhaustive enumeration. Walks states in
    /// Gray-code order so each step is an `O(N)` energy update. Refused above
    /// [`MAX_ENUMERATION_SPINS`].
    pub fn enumerate_exact(&self, beta: f64) -> Result<ExactSummary> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be finite and non-negative"));
        }
        if self.n_spins > MAX_ENUMERATION_SPINS {
            return Err(Error::ResourceLimit("exhaustive enumeration is capped at 20 spins"));
        }
        let n = self.n_spins;
        let states: u64 = 1 << n;

        // Pass 1: energies of all states, Gray-code incremental.
        let mut energies = Vec::with_capacity(states as usize);
        let mut spins = vec![1i8; n];
        let mut energy = self.energy(&spins)?;
        let mut max_weight = f64::NEG_INFINITY;
        for k in 0..states {
            energies.push(energy);
            if -beta * energy > max_weight {
                max_weight = -beta * energy;
            }
            if k + 1 < states {
                let b = (k + 1).trailing_zeros() as usize;
                energy += 2.0 * spins[b] as f64 * self.local_field(&spins, b);
                spins[b] = -spins[b];
            }
        }

        // Pass 2: normalizer, marginals, and mean energy against the shifted
        // weights.
        let mut z_scaled = 0.0;
        let mut mean_energy = 0.0;
        let mut marginals = vec![0.0; n];
        spins.iter_mut().for_each(|s| *s = 1);
        for (k, &e) in energies.iter().enumerate() {
            let w = libm::exp(-beta * e - max_weight);
            z_scaled += w;
            mean_energy += w * e;
            for (m, &s) in marginals.iter_mut().zip(spins.iter()) {
                *m += w * s as f64;
            }
            if (k as u64) + 1 < states {
                let b = (k as u64 + 1).trailing_zeros() as usize;
                spins[b] = -spins[b];
            }
        }
        for m in marginals.iter_mut() {
            *m /= z_scaled;
        }
        Ok(ExactSummary {
            beta,
            log_z_s: max_weight + libm::log(z_scaled),
            mean_energy: mean_energy / z_scaled,
            marginals,
        })
    }
}

/// Exact thermodynamics of one realization at one temperature.
#[derive(Debug, Clone)]
pub struct ExactSummary {
    pub beta: f64,
    pub log_z_s: f64,
    pub mean_energy: f64,
    /// Per-site means `<s_i>`.
    pub marginals: Vec<f64>,
}

/// Replica-symmetric discrete free energy `F_s = -N beta scale^2 / 4 -
/// N ln2 / beta`. A good description of the paramagnetic phase, i.e.
/// temperatures above the glass transition at `T = scale`.
pub fn replica_symmetric_free_energy(n_spins: usize, scale: f64, beta: f64) -> f64 {
    let n = n_spins as f64;
    -n * beta * scale * scale / 4.0 - n * libm::log(2.0) / beta
}

/// Diagonal shift that makes the couplings positive definite with smallest
/// eigenvalue at least `epsilon`.
#[inline]
pub fn shift_amount(lambda_min: f64, epsilon: f64) -> f64 {
    (epsilon - lambda_min).max(0.0)
}

/// Couplings after the positive-definite diagonal shift, with the spectral
/// data and Cholesky factor every dual-space operation needs.
#[derive(Debug, Clone)]
pub struct ShiftedCoupling {
    base: DisorderRealization,
    epsilon: f64,
    shift: f64,
    lambda_min: f64,
    lambda_max: f64,
    shifted: Matrix,
    chol: Matrix,
    chol_log_det: f64,
}

impl ShiftedCoupling {
    pub fn new(base: &DisorderRealization, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument("epsilon must be positive and finite"));
        }
        let eig = linalg::symmetric_eigen(base.couplings(), false)?;
        let lambda_min = eig.values[0];
        let lambda_max = *eig.values.last().unwrap();
        let shift = shift_amount(lambda_min, epsilon);
        let shifted = base.couplings().add_scaled_identity(shift);
        let chol = linalg::cholesky_lower(&shifted)?;
        let chol_log_det = linalg::cholesky_log_det(&chol);
        Ok(ShiftedCoupling {
            base: base.clone(),
            epsilon,
            shift,
            lambda_min,
            lambda_max,
            shifted,
            chol,
            chol_log_det,
        })
    }

    #[cfg(test)]
    pub(crate) fn from_raw(shifted: Matrix, fields: Vec<f64>, epsilon: f64) -> Self {
        let n = shifted.rows();
        let eig = linalg::symmetric_eigen(&shifted, false).unwrap();
        let chol = linalg::cholesky_lower(&shifted).unwrap();
        let chol_log_det = linalg::cholesky_log_det(&chol);
        // A stand-in base with empty couplings; only fields and size matter
        // for the density operations under test.
        let base = DisorderRealization {
            n_spins: n,
            couplings: Matrix::zeros(n, n),
            fields,
            scale: 1.0,
            seed: 0,
        };
        ShiftedCoupling {
            base,
            epsilon,
            shift: 0.0,
            lambda_min: eig.values[0],
            lambda_max: *eig.values.last().unwrap(),
            shifted,
            chol,
            chol_log_det,
        }
    }

    pub fn base(&self) -> &DisorderRealization {
        &self.base
    }

    pub fn n_spins(&self) -> usize {
        self.base.n_spins
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Diagonal shift applied to the couplings.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// The shifted coupling matrix `Jt = J + shift * I`.
    pub fn shifted(&self) -> &Matrix {
        &self.shifted
    }

    /// `log det Jt`.
    pub fn log_det(&self) -> f64 {
        self.chol_log_det
    }

    fn check_input(&self, x: &[f64], beta: f64) -> Result<()> {
        if x.len() != self.n_spins() {
            return Err(Error::DimensionMismatch { expected: self.n_spins(), got: x.len() });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be positive and finite"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("input vector must be finite"));
        }
        Ok(())
    }

    /// Local continuous field `a = Jt x + h`.
    fn dual_field(&self, x: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; x.len()];
        self.shifted.matvec(x, &mut a);
        for (ai, hi) in a.iter_mut().zip(self.base.fields.iter()) {
            *ai += hi;
        }
        a
    }

    /// Hamiltonian density
    /// `x^T Jt x / 2 - (1/beta) sum_i ln 2cosh(beta (Jt x + h)_i)`.
    pub fn hamiltonian_density(&self, x: &[f64], beta: f64) -> Result<f64> {
        self.check_input(x, beta)?;
        let a = self.dual_field(x);
        let mut quad = 0.0;
        for (xi, ai) in x.iter().zip(a.iter()) {
            // x.(Jt x + h) = x.Jt.x + x.h; subtract x.h below.
            quad += xi * ai;
        }
        for (xi, hi) in x.iter().zip(self.base.fields.iter()) {
            quad -= xi * hi;
        }
        let mut soft = 0.0;
        for &ai in &a {
            soft += ln_2cosh(beta * ai);
        }
        Ok(0.5 * quad - soft / beta)
    }

    /// Gradient of the Hamiltonian density: `Jt x - Jt tanh(beta (Jt x + h))`.
    pub fn grad_hamiltonian_density(&self, x: &[f64], beta: f64) -> Result<Vec<f64>> {
        self.check_input(x, beta)?;
        let a = self.dual_field(x);
        let mut inner = vec![0.0; x.len()];
        for (t, (&xi, &ai)) in inner.iter_mut().zip(x.iter().zip(a.iter())) {
            *t = xi - libm::tanh(beta * ai);
        }
        let mut g = vec![0.0; x.len()];
        self.shifted.matvec(&inner, &mut g);
        Ok(g)
    }

    /// Hessian of the Hamiltonian density:
    /// `Jt - beta Jt diag(sech^2(beta (Jt x + h))) Jt`.
    pub fn hessian_hamiltonian_density(&self, x: &[f64], beta: f64) -> Result<Matrix> {
        self.check_input(x, beta)?;
        let n = self.n_spins();
        let a = self.dual_field(x);
        let d: Vec<f64> = a
            .iter()
            .map(|&ai| {
                let s = sech(beta * ai);
                s * s
            })
            .collect();
        let mut hess = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.shifted.at(i, k) * d[k] * self.shifted.at(k, j);
                }
                *hess.at_mut(i, j) = self.shifted.at(i, j) - beta * acc;
            }
        }
        Ok(hess)
    }

    /// Draws `x | s ~ N(s, (beta Jt)^{-1})` using the cached Cholesky factor.
    pub fn sample_x_given_s<R: Rng + ?Sized>(
        &self,
        spins: &[i8],
        beta: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if spins.len() != self.n_spins() {
            return Err(Error::DimensionMismatch { expected: self.n_spins(), got: spins.len() });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be positive and finite"));
        }
        let n = self.n_spins();
        let mut xi = vec![0.0; n];
        fill_standard_normal(rng, &mut xi);
        // L L^T = Jt, so (sqrt(beta) L)^-T xi has covariance (beta Jt)^{-1}.
        let mut x = vec![0.0; n];
        linalg::solve_lower_transpose(&self.chol, &xi, &mut x);
        let inv_sqrt_beta = 1.0 / libm::sqrt(beta);
        for (xv, &s) in x.iter_mut().zip(spins.iter()) {
            *xv = s as f64 + inv_sqrt_beta * *xv;
        }
        Ok(x)
    }

    /// Draws `s | x`, which factorizes per site with
    /// `p(s_i = +1) = sigmoid(2 beta (Jt x + h)_i)`.
    pub fn sample_s_given_x<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        beta: f64,
        rng: &mut R,
    ) -> Result<Vec<i8>> {
        self.check_input(x, beta)?;
        let a = self.dual_field(x);
        Ok(a
            .iter()
            .map(|&ai| {
                let p = sigmoid(2.0 * beta * ai);
                if rng.gen::<f64>() < p {
                    1
                } else {
                    -1
                }
            })
            .collect())
    }

    /// Exact relation between the continuous and discrete normalizers:
    /// `ln Z_x = (N/2) ln 2pi - (1/2) ln det(beta Jt) + N beta shift / 2 + ln Z_s`.
    pub fn log_partition_x_from_s(&self, log_z_s: f64, beta: f64) -> Result<f64> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be positive and finite"));
        }
        let n = self.n_spins() as f64;
        let log_det_beta_jt = n * libm::log(beta) + self.chol_log_det;
        Ok(0.5 * n * ln_2pi() - 0.5 * log_det_beta_jt + 0.5 * n * beta * self.shift + log_z_s)
    }
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    fn write_u64(&mut self, x: u64) {
        for b in x.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
