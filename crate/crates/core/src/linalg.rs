//! Dense linear algebra for small symmetric systems.
//!
//! Coupling matrices here are dense, symmetric, and rarely larger than a few
//! hundred rows, so a flat row-major buffer plus textbook algorithms (cyclic
//! Jacobi for eigenvalues, unpivoted Cholesky for factorization) covers every
//! need without pulling a linear-algebra stack into a `no_std` crate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major matrix. Entry `(i, j)` lives at `data[i * cols + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out = self * x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    /// Returns `self + c * I`. Square matrices only.
    pub fn add_scaled_identity(&self, c: f64) -> Matrix {
        debug_assert_eq!(self.rows, self.cols);
        let mut m = self.clone();
        for i in 0..self.rows {
            *m.at_mut(i, i) += c;
        }
        m
    }

    /// Largest `|a_ij - a_ji|`; zero for exactly symmetric matrices.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max(libm::fabs(self.at(i, j) - self.at(j, i)));
            }
        }
        worst
    }
}

/// Lower-triangular Cholesky factor `L` with `L * L^T = a`. Fails on
/// non-positive-definite input.
pub fn cholesky_lower(a: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidArgument("cholesky requires a square matrix"));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.at(i, j);
            for k in 0..j {
                sum -= l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::NumericFailure("matrix is not positive definite"));
                }
                *l.at_mut(i, j) = libm::sqrt(sum);
            } else {
                *l.at_mut(i, j) = sum / l.at(j, j);
            }
        }
    }
    Ok(l)
}

/// `log det(L * L^T) = 2 * sum(ln L_ii)` for a Cholesky factor `L`.
pub fn cholesky_log_det(l: &Matrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..l.rows() {
        acc += libm::log(l.at(i, i));
    }
    2.0 * acc
}

/// Solves `L y = b` by forward substitution; `L` lower triangular.
pub fn solve_lower(l: &Matrix, b: &[f64], out: &mut [f64]) {
    let n = l.rows();
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.at(i, k) * out[k];
        }
        out[i] = sum / l.at(i, i);
    }
}

/// Solves `L^T x = b` by back substitution; `L` lower triangular.
pub fn solve_lower_transpose(l: &Matrix, b: &[f64], out: &mut [f64]) {
    let n = l.rows();
    debug_assert_eq!(b.len(), n);
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in (i + 1)..n {
            sum -= l.at(k, i) * out[k];
        }
        out[i] = sum / l.at(i, i);
    }
}

/// Eigenvalues (ascending) and, on request, the matching orthonormal
/// eigenvectors of a symmetric matrix. `vectors` stores eigenvector `k` in
/// column `k`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Matrix>,
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi diagonalization. Quadratically convergent for symmetric
/// input; a handful of sweeps reaches machine precision at the sizes used
/// here.
pub fn symmetric_eigen(a: &Matrix, want_vectors: bool) -> Result<SymmetricEigen> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidArgument("eigensolver requires a square matrix"));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = if want_vectors { Some(Matrix::identity(n)) } else { None };

    let mut norm = 0.0;
    for x in m.data() {
        norm += x * x;
    }
    let tol = 1e-28 * norm.max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let x = m.at(i, j);
                off += 2.0 * x * x;
            }
        }
        if off <= tol {
            let mut values: Vec<(f64, usize)> =
                (0..n).map(|i| (m.at(i, i), i)).collect();
            values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let vectors = v.map(|v| {
                let mut sorted = Matrix::zeros(n, n);
                for (k, &(_, src)) in values.iter().enumerate() {
                    for i in 0..n {
                        *sorted.at_mut(i, k) = v.at(i, src);
                    }
                }
                sorted
            });
            return Ok(SymmetricEigen {
                values: values.into_iter().map(|(x, _)| x).collect(),
                vectors,
            });
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                // Smaller-magnitude root of t^2 + 2*theta*t - 1 = 0 keeps the
                // rotation angle under pi/4, which is what makes Jacobi stable.
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;

                for k in 0..n {
                    let mkp = m.at(k, p);
                    let mkq = m.at(k, q);
                    *m.at_mut(k, p) = c * mkp - s * mkq;
                    *m.at_mut(k, q) = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m.at(p, k);
                    let mqk = m.at(q, k);
                    *m.at_mut(p, k) = c * mpk - s * mqk;
                    *m.at_mut(q, k) = s * mpk + c * mqk;
                }
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v.at(k, p);
                        let vkq = v.at(k, q);
                        *v.at_mut(k, p) = c * vkp - s * vkq;
                        *v.at_mut(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    Err(Error::NumericFailure("jacobi eigensolver did not converge"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sym3() -> Matrix {
        Matrix::from_vec(3, 3, vec![4.0, 1.0, -2.0, 1.0, 2.0, 0.0, -2.0, 0.0, 3.0]).unwrap()
    }

    #[test]
    fn cholesky_reconstructs_input() {
        let a = sym3();
        let l = cholesky_lower(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += l.at(i, k) * l.at(j, k);
                }
                assert_abs_diff_eq!(acc, a.at(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(cholesky_lower(&a), Err(Error::NumericFailure(_))));
    }

    #[test]
    fn triangular_solves_invert_cholesky() {
        let a = sym3();
        let l = cholesky_lower(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let mut y = [0.0; 3];
        let mut x = [0.0; 3];
        solve_lower(&l, &b, &mut y);
        solve_lower_transpose(&l, &y, &mut x);
        let mut ax = [0.0; 3];
        a.matvec(&x, &mut ax);
        for i in 0..3 {
            assert_abs_diff_eq!(ax[i], b[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn log_det_matches_direct_determinant() {
        let a = sym3();
        // det computed by cofactor expansion by hand: 4*(6-0) - 1*(3-0) + (-2)*(0+4) = 13.
        let l = cholesky_lower(&a).unwrap();
        assert_abs_diff_eq!(cholesky_log_det(&l), 13.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_matches_analytic_2x2() {
        // Eigenvalues of [[2, 1], [1, 2]] are 1 and 3.
        let a = Matrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = symmetric_eigen(&a, false).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.gen_range(-1.0..1.0);
                *a.at_mut(i, j) = x;
                *a.at_mut(j, i) = x;
            }
        }
        let e = symmetric_eigen(&a, true).unwrap();
        let v = e.vectors.unwrap();
        // V D V^T == A and V^T V == I.
        for i in 0..n {
            for j in 0..n {
                let mut rec = 0.0;
                let mut dot = 0.0;
                for k in 0..n {
                    rec += v.at(i, k) * e.values[k] * v.at(j, k);
                    dot += v.at(k, i) * v.at(k, j);
                }
                assert_abs_diff_eq!(rec, a.at(i, j), epsilon = 1e-10);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, expect, epsilon = 1e-10);
            }
        }
        // Eigenvalues come out ascending.
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix_are_sorted_diagonal() {
        let a = Matrix::from_vec(3, 3, vec![5.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0])
            .unwrap();
        let e = symmetric_eigen(&a, false).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 5.0]);
    }
}
