//! Exact references: dense truncated power series, an unpreconditioned
//! conjugate-gradient solver for `(I - γA) x = b`, and the Gershgorin choice
//! of `γ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::CoefficientStream;
use crate::sparsemat::SparseMatrix;

/// Largest dimension accepted by the dense oracle.
pub const MAX_DENSE_N: usize = 2048;

/// Default number of series terms for the exponential.
pub const DEFAULT_EXP_TERMS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!("expected {} values, got {}", n * n, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dense matrix entries must be finite"));
        }
        Ok(DenseMatrix { n, data })
    }

    pub fn from_sparse(a: &SparseMatrix) -> Self {
        let mut m = Self::zeros(a.n());
        for (i, j, v) in a.triplets() {
            m.data[i * a.n() + j] = v;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * n..(i + 1) * n];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += a * s);
            }
        }
        out
    }

    /// `self · A` for sparse `A`.
    pub fn mul_sparse(&self, a: &SparseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let p = self.get(i, k);
                if p == 0.0 {
                    continue;
                }
                let (cols, vals) = a.row(k);
                for (&j, &v) in cols.iter().zip(vals) {
                    out.data[i * n + j] += p * v;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone)]
pub struct DenseFunm {
    pub matrix: DenseMatrix,
    /// Bound on the neglected tail `Σ_{k>terms} ζ_k ‖A‖∞^k`, when the
    /// geometric majorant converges.
    pub tail_bound: Option<f64>,
}

/// `Σ_{k=0}^{terms} ζ_k A^k` by repeated dense-times-sparse products.
pub fn dense_funm<S: CoefficientStream>(a: &SparseMatrix, coeffs: &S, terms: usize) -> Result<DenseFunm> {
    let n = a.n();
    if n > MAX_DENSE_N {
        return Err(Error::Resource(format!(
            "dense oracle limited to n <= {MAX_DENSE_N}, got {n}"
        )));
    }
    let mut power = DenseMatrix::identity(n);
    let mut result = DenseMatrix::identity(n);
    result.data.iter_mut().for_each(|v| *v *= coeffs.coeff(0));
    let mut zeta = coeffs.cursor(0);
    for _ in 1..=terms {
        zeta.advance();
        power = power.mul_sparse(a);
        let z = zeta.value();
        if z == 0.0 {
            break;
        }
        result.data.iter_mut().zip(&power.data).for_each(|(r, p)| *r += z * p);
    }

    let norm = a.norm_inf();
    zeta.advance();
    let ratio = coeffs.ratio(terms + 1);
    let tail_bound = (ratio * norm < 1.0).then(|| zeta.value() * norm.powi(terms as i32 + 1) / (1.0 - ratio * norm));
    Ok(DenseFunm {
        matrix: result,
        tail_bound,
    })
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b - (I - γA) x‖₂`.
    pub residual_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn shifted_apply(a: &SparseMatrix, gamma: f64, x: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    x.iter().zip(ax).map(|(xi, axi)| xi - gamma * axi).collect()
}

/// Unpreconditioned CG for `(I - γA) x = b`, stopping on
/// `‖b - (I - γA) x‖₂ <= tol ‖b‖₂`.
pub fn cg_solve(a: &SparseMatrix, gamma: f64, b: &[f64], tol: f64, max_iter: usize) -> Result<CgSolution> {
    if b.len() != a.n() {
        return Err(Error::invalid(format!(
            "right-hand side has length {}, expected {}",
            b.len(),
            a.n()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("CG tolerance must be positive"));
    }
    let b_norm = dot(b, b).sqrt();
    let n = a.n();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual_norm: 0.0,
        });
    }
    let target = tol * b_norm;
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for iter in 1..=max_iter {
        let ap = shifted_apply(a, gamma, &p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::invalid("I - γA is not positive definite; reduce γ"));
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= target {
            // Confirm on the true residual; restart from it if drift crept in.
            let true_r: Vec<f64> = b
                .iter()
                .zip(shifted_apply(a, gamma, &x))
                .map(|(bi, ai)| bi - ai)
                .collect();
            let true_norm = dot(&true_r, &true_r).sqrt();
            if true_norm <= target {
                return Ok(CgSolution {
                    x,
                    iterations: iter,
                    residual_norm: true_norm,
                });
            }
            r = true_r;
            p = r.clone();
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_next / rr;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = rr_next;
    }
    let true_r: Vec<f64> = b
        .iter()
        .zip(shifted_apply(a, gamma, &x))
        .map(|(bi, ai)| bi - ai)
        .collect();
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: dot(&true_r, &true_r).sqrt() / b_norm,
    })
}

/// `fraction / max_i Σ_k |a_ik|`, which keeps `ρ(γA) <= fraction`.
pub fn gershgorin_gamma(a: &SparseMatrix, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "Gershgorin fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let norm = a.norm_inf();
    if norm == 0.0 {
        return Err(Error::invalid("zero matrix has no Gershgorin scaling"));
    }
    Ok(fraction / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::MatrixFunction;

    fn pair(gamma: f64) -> SparseMatrix {
        SparseMatrix::from_dense(&[vec![0., gamma], vec![gamma, 0.]]).unwrap()
    }

    fn cycle(n: usize) -> SparseMatrix {
        SparseMatrix::from_triplets(n, (0..n).flat_map(|i| [(i, (i + 1) % n, 1.0), ((i + 1) % n, i, 1.0)])).unwrap()
    }

    #[test]
    fn zero_matrix_exponential_is_identity() {
        let f = dense_funm(&SparseMatrix::zeros(3), &MatrixFunction::Exponential, 64).unwrap();
        assert_eq!(f.matrix, DenseMatrix::identity(3));
    }

    #[test]
    fn involutory_exponential_closed_form() {
        let f = dense_funm(&pair(0.1), &MatrixFunction::Exponential, 30).unwrap();
        let (c, s) = (0.1f64.cosh(), 0.1f64.sinh());
        assert!((f.matrix.get(0, 0) - c).abs() < 1e-14);
        assert!((f.matrix.get(1, 1) - c).abs() < 1e-14);
        assert!((f.matrix.get(0, 1) - s).abs() < 1e-14);
        assert!(f.tail_bound.unwrap() < 1e-40);
    }

    #[test]
    fn resolvent_geometric_series() {
        let f = dense_funm(&pair(0.5), &MatrixFunction::Resolvent, 60).unwrap();
        assert!((f.matrix.get(0, 0) - 4.0 / 3.0).abs() < 1e-9);
        assert!((f.matrix.get(0, 1) - 2.0 / 3.0).abs() < 1e-9);
        let tail = f.tail_bound.unwrap();
        assert!(tail > 0.0 && tail < 1e-17);
        // Divergent majorant: no bound reported.
        assert!(dense_funm(&pair(1.5), &MatrixFunction::Resolvent, 5)
            .unwrap()
            .tail_bound
            .is_none());
    }

    #[test]
    fn exponential_semigroup_spot_check() {
        let a = SparseMatrix::from_triplets(
            4,
            vec![
                (0, 1, 0.7),
                (1, 0, 0.7),
                (1, 2, -0.3),
                (2, 1, -0.3),
                (2, 3, 1.1),
                (3, 3, 0.4),
            ],
        )
        .unwrap();
        let neg = SparseMatrix::from_triplets(4, a.triplets().map(|(i, j, v)| (i, j, -v))).unwrap();
        let e = MatrixFunction::Exponential;
        let prod = dense_funm(&a, &e, 64)
            .unwrap()
            .matrix
            .matmul(&dense_funm(&neg, &e, 64).unwrap().matrix);
        assert!(prod.max_abs_diff(&DenseMatrix::identity(4)) < 1e-10);
    }

    #[test]
    fn oracle_size_guard() {
        let big = SparseMatrix::zeros(MAX_DENSE_N + 1);
        assert!(matches!(
            dense_funm(&big, &MatrixFunction::Exponential, 2),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn cg_identity_system() {
        let a = cycle(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let s = cg_solve(&a, 0.0, &b, 1e-12, 10).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.x, b);
    }

    #[test]
    fn cg_two_node_path() {
        let a = SparseMatrix::from_dense(&[vec![0., 1.], vec![1., 0.]]).unwrap();
        let s = cg_solve(&a, 0.5, &[1.0, 1.0], 1e-12, 10).unwrap();
        assert!(s.x.iter().all(|x| (x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn cg_residual_meets_tolerance() {
        let a = cycle(50);
        let gamma = gershgorin_gamma(&a, 0.85).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let s = cg_solve(&a, gamma, &b, 1e-10, 500).unwrap();
        let r: Vec<f64> = b
            .iter()
            .zip(shifted_apply(&a, gamma, &s.x))
            .map(|(x, y)| x - y)
            .collect();
        assert!(dot(&r, &r).sqrt() <= 1e-10 * dot(&b, &b).sqrt());
    }

    #[test]
    fn cg_non_convergence_reports_residual() {
        let a = cycle(64);
        let gamma = gershgorin_gamma(&a, 0.99).unwrap();
        let b: Vec<f64> = (0..64).map(|i| (i * i % 7) as f64).collect();
        match cg_solve(&a, gamma, &b, 1e-14, 2) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gershgorin_examples() {
        assert_eq!(gershgorin_gamma(&cycle(4), 0.85).unwrap(), 0.425);
        let star = SparseMatrix::from_triplets(4, (1..4).flat_map(|j| [(0, j, 1.0), (j, 0, 1.0)])).unwrap();
        assert_eq!(gershgorin_gamma(&star, 0.5).unwrap(), 0.5 / 3.0);
        let unit = cycle(4).scale(0.5).unwrap();
        assert_eq!(gershgorin_gamma(&unit, 0.85).unwrap(), 0.85);
        assert!(gershgorin_gamma(&SparseMatrix::zeros(2), 0.5).is_err());
        assert!(gershgorin_gamma(&unit, 1.0).is_err());
    }
}
