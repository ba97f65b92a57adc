//! Regularized Gram/covariance state shared by the optimistic agents.
//!
//! [`GramState`] maintains `M = lambda*I + sum_i phi_i phi_i^T` together with
//! its inverse, updated per sample by the Sherman-Morrison identity and
//! refactorized from scratch whenever `||M M^{-1} - I||_max` drifts past
//! 1e-8. It also accumulates the elliptical potential
//! `sum_i phi_i^T (M_{i-1})^{-1} phi_i`, which for unit-norm inputs and
//! `lambda >= 1` is bounded by `2 d ln((lambda + k) / lambda)`.

use serde::{Deserialize, Serialize};

/// Maximum tolerated `||M M^{-1} - I||_max` before a full refactorization.
pub const INVERSE_DRIFT_LIMIT: f64 = 1e-8;

/// Quadratic forms this far below zero are treated as rounding noise.
pub const NEGATIVE_FORM_SLACK: f64 = 1e-12;

/// Regularized Gram matrix with maintained inverse and potential accumulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramState {
    dim: usize,
    lambda: f64,
    /// `lambda*I + sum phi phi^T`, row-major `dim x dim`.
    mat: Vec<f64>,
    /// Maintained inverse of `mat`.
    inv: Vec<f64>,
    /// Number of rank-1 updates applied.
    count: u64,
    /// Accumulated `sum_i phi_i^T (M_{i-1})^{-1} phi_i`.
    potential: f64,
    /// Largest `||phi||_2` seen so far.
    max_feature_norm: f64,
    /// Number of full refactorizations triggered by drift.
    refactorizations: u64,
}

impl GramState {
    /// Fresh state `lambda * I`. `lambda` must be positive and finite.
    pub fn new(dim: usize, lambda: f64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        assert!(
            lambda.is_finite() && lambda > 0.0,
            "regularizer must be positive and finite, got {lambda}"
        );
        let mut mat = vec![0.0; dim * dim];
        let mut inv = vec![0.0; dim * dim];
        for i in 0..dim {
            mat[i * dim + i] = lambda;
            inv[i * dim + i] = 1.0 / lambda;
        }
        GramState {
            dim,
            lambda,
            mat,
            inv,
            count: 0,
            potential: 0.0,
            max_feature_norm: 0.0,
            refactorizations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of rank-1 updates applied so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Accumulated elliptical potential `sum_i phi_i^T (M_{i-1})^{-1} phi_i`.
    pub fn potential(&self) -> f64 {
        self.potential
    }

    pub fn refactorizations(&self) -> u64 {
        self.refactorizations
    }

    pub fn max_feature_norm(&self) -> f64 {
        self.max_feature_norm
    }

    /// Row-major view of the Gram matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.mat
    }

    /// Row-major view of the maintained inverse.
    pub fn inverse(&self) -> &[f64] {
        &self.inv
    }

    /// `phi^T M^{-1} phi`, clamped to zero when within rounding slack below it.
    ///
    /// Panics on dimension mismatch, non-finite input, or a quadratic form
    /// below `-1e-12` (which would indicate a corrupted inverse).
    pub fn quadratic_form(&self, phi: &[f64]) -> f64 {
        self.check_input(phi);
        let v = self.inv_mul(phi);
        let q = dot(phi, &v);
        assert!(
            q >= -NEGATIVE_FORM_SLACK,
            "quadratic form {q} below negative-slack limit"
        );
        q.max(0.0)
    }

    /// `x^T M x` (the Gram-weighted squared norm, used by confidence-set checks).
    pub fn weighted_norm_sq(&self, x: &[f64]) -> f64 {
        self.check_input(x);
        let mut acc = 0.0;
        for i in 0..self.dim {
            let row = &self.mat[i * self.dim..(i + 1) * self.dim];
            acc += x[i] * dot(row, x);
        }
        acc.max(0.0)
    }

    /// `M^{-1} b`: the ridge-regression solution for accumulated targets `b`.
    pub fn ridge_solve(&self, b: &[f64]) -> Vec<f64> {
        self.check_input(b);
        self.inv_mul(b)
    }

    /// `M <- M + phi phi^T`, maintaining the inverse and the potential.
    ///
    /// The pre-update quadratic form is added to the potential accumulator
    /// before the matrix changes.
    pub fn rank1_update(&mut self, phi: &[f64]) {
        self.check_input(phi);
        let norm = dot(phi, phi).sqrt();
        if norm > self.max_feature_norm {
            self.max_feature_norm = norm;
        }

        let inv_phi = self.inv_mul(phi);
        let q = dot(phi, &inv_phi).max(0.0);
        self.potential += q;

        for i in 0..self.dim {
            for j in 0..self.dim {
                self.mat[i * self.dim + j] += phi[i] * phi[j];
            }
        }
        // Sherman-Morrison: (M + pp^T)^{-1} = M^{-1} - (M^{-1}p)(M^{-1}p)^T / (1 + p^T M^{-1} p)
        let denom = 1.0 + q;
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.inv[i * self.dim + j] -= inv_phi[i] * inv_phi[j] / denom;
            }
        }
        self.count += 1;

        if self.inverse_drift() > INVERSE_DRIFT_LIMIT {
            self.refactorize();
        }
    }

    /// `||M M^{-1} - I||_max` for the maintained inverse.
    pub fn inverse_drift(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            let row = &self.mat[i * d..(i + 1) * d];
            for j in 0..d {
                let mut acc = 0.0;
                for (l, &r) in row.iter().enumerate() {
                    acc += r * self.inv[l * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                let dev = (acc - target).abs();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        worst
    }

    /// Discard the maintained inverse and recompute it by Cholesky factorization.
    pub fn refactorize(&mut self) {
        self.inv = cholesky_inverse(&self.mat, self.dim)
            .expect("Gram matrix must stay positive definite");
        self.refactorizations += 1;
    }

    /// Log-determinant bound on the accumulated potential:
    /// `2 d ln((lambda + k L^2) / lambda)` with `L` the largest feature norm
    /// seen. Only valid when `lambda >= max(1, L^2)`; returns `None` otherwise.
    pub fn potential_bound(&self) -> Option<f64> {
        let l = self.max_feature_norm;
        if self.lambda < 1.0f64.max(l * l) {
            return None;
        }
        let k = self.count as f64;
        Some(2.0 * self.dim as f64 * ((self.lambda + k * l * l) / self.lambda).ln())
    }

    fn inv_mul(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            out[i] = dot(&self.inv[i * d..(i + 1) * d], x);
        }
        out
    }

    fn check_input(&self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "vector length {} != dimension {}", x.len(), self.dim);
        assert!(x.iter().all(|v| v.is_finite()), "non-finite entry in input vector");
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse of a symmetric positive-definite matrix via Cholesky factorization.
///
/// Returns `None` if the matrix is not numerically positive definite.
pub fn cholesky_inverse(mat: &[f64], dim: usize) -> Option<Vec<f64>> {
    assert_eq!(mat.len(), dim * dim);
    // Lower-triangular factor L with M = L L^T.
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut acc = mat[i * dim + j];
            for k in 0..j {
                acc -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if acc <= 0.0 {
                    return None;
                }
                l[i * dim + j] = acc.sqrt();
            } else {
                l[i * dim + j] = acc / l[j * dim + j];
            }
        }
    }
    // Invert L in place (forward substitution per column).
    let mut linv = vec![0.0; dim * dim];
    for j in 0..dim {
        linv[j * dim + j] = 1.0 / l[j * dim + j];
        for i in (j + 1)..dim {
            let mut acc = 0.0;
            for k in j..i {
                acc -= l[i * dim + k] * linv[k * dim + j];
            }
            linv[i * dim + j] = acc / l[i * dim + i];
        }
    }
    // M^{-1} = L^{-T} L^{-1}.
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in i.max(j)..dim {
                acc += linv[k * dim + i] * linv[k * dim + j];
            }
            out[i * dim + j] = acc;
        }
    }
    Some(out)
}

/// Solve `M x = b` for symmetric positive-definite `M` by Cholesky.
///
/// Independent of any maintained inverse; used by tests and diagnostics as
/// the reference route.
pub fn solve_spd(mat: &[f64], dim: usize, b: &[f64]) -> Option<Vec<f64>> {
    let inv = cholesky_inverse(mat, dim)?;
    let mut out = vec![0.0; dim];
    for i in 0..dim {
        out[i] = dot(&inv[i * dim..(i + 1) * dim], b);
    }
    Some(out)
}
