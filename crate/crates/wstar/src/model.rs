//! Finite-dimensional W*-probability spaces `(M_n(C), rho)`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;

pub const FAITHFULNESS_FLOOR: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest singular value.
pub fn opnorm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// An element of the algebra with a lazily cached operator norm.
#[derive(Clone, Debug)]
pub struct Operator {
    mat: Mat,
    norm: OnceLock<f64>,
}

impl PartialEq for Operator {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl Operator {
    pub fn new(mat: Mat) -> Self {
        assert!(mat.is_square(), "operators are square matrices");
        Operator { mat, norm: OnceLock::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Mat::identity(n, n))
    }

    pub fn zero(n: usize) -> Self {
        Self::new(Mat::zeros(n, n))
    }

    /// Matrix unit e_{ij} (0-indexed).
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        m[(i, j)] = c(1.0, 0.0);
        Self::new(m)
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let n = d.len();
        Self::new(Mat::from_fn(n, n, |i, j| if i == j { c(d[i], 0.0) } else { C64::default() }))
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn opnorm(&self) -> f64 {
        *self.norm.get_or_init(|| opnorm(&self.mat))
    }

    pub fn adjoint(&self) -> Operator {
        Operator::new(self.mat.adjoint())
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator::new(self.mat.map(|z| z * s))
    }

    pub fn add(&self, other: &Operator) -> Operator {
        Operator::new(&self.mat + &other.mat)
    }

    pub fn sub(&self, other: &Operator) -> Operator {
        Operator::new(&self.mat - &other.mat)
    }

    pub fn mul(&self, other: &Operator) -> Operator {
        Operator::new(&self.mat * &other.mat)
    }

    /// Membership in the ball D_m.
    pub fn in_domain(&self, m: f64) -> bool {
        self.opnorm() <= m + 1e-12
    }
}

pub fn in_domain(x: &Operator, m: u32) -> bool {
    x.in_domain(m as f64)
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::add(self, rhs)
    }
}

impl std::ops::Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::sub(self, rhs)
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::mul(self, rhs)
    }
}

/// JSON encoding of a complex number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CJson {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<C64> for CJson {
    fn from(z: C64) -> Self {
        CJson { re: z.re, im: z.im }
    }
}

impl From<CJson> for C64 {
    fn from(z: CJson) -> Self {
        c(z.re, z.im)
    }
}

pub fn mat_to_json(m: &Mat) -> Vec<Vec<CJson>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

pub fn mat_from_json(rows: &[Vec<CJson>]) -> Result<Mat> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::BadDimension("empty matrix".into()));
    }
    for r in rows {
        if r.len() != n {
            return Err(Error::BadDimension(format!("row of length {} in {}x{} matrix", r.len(), n, n)));
        }
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j].into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoSpec {
    Eigenvalues(Vec<f64>),
    Matrix(Vec<Vec<CJson>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dim: usize,
    pub rho: RhoSpec,
}

/// A full-rank density matrix on C^n together with its eigen-data.
#[derive(Clone, Debug)]
pub struct WStarModel {
    rho: Mat,
    p: Vec<f64>,
    basis: Mat,
    diagonal: bool,
}

impl WStarModel {
    pub fn from_eigenvalues(p: &[f64]) -> Result<Self> {
        let n = p.len();
        if n == 0 {
            return Err(Error::BadDimension("dimension must be at least 1".into()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadParameters("non-finite eigenvalue".into()));
        }
        let rho = Mat::from_fn(n, n, |i, j| if i == j { c(p[i], 0.0) } else { C64::default() });
        Self::from_matrix(rho)
    }

    pub fn from_matrix(rho: Mat) -> Result<Self> {
        let n = rho.nrows();
        if n == 0 || !rho.is_square() {
            return Err(Error::BadDimension(format!("{}x{}", rho.nrows(), rho.ncols())));
        }
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                dev = dev.max((rho[(i, j)] - rho[(j, i)].conj()).norm());
            }
        }
        if dev > HERMITIAN_TOL || dev.is_nan() {
            return Err(Error::NotHermitian(dev));
        }
        let tr: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotUnitTrace(tr));
        }
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || rho[(i, j)] == C64::default()));
        let (p, basis) = if diagonal {
            // Exact permutation basis: no roundoff enters through basis changes.
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| rho[(b, b)].re.partial_cmp(&rho[(a, a)].re).unwrap());
            let p: Vec<f64> = idx.iter().map(|&k| rho[(k, k)].re).collect();
            let mut u = Mat::zeros(n, n);
            for (col, &k) in idx.iter().enumerate() {
                u[(k, col)] = c(1.0, 0.0);
            }
            (p, u)
        } else {
            let herm = (&rho + rho.adjoint()).map(|z| z * 0.5);
            let eig = herm.symmetric_eigen();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
            let p: Vec<f64> = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
            let u = Mat::from_fn(n, n, |r, col| eig.eigenvectors[(r, idx[col])]);
            (p, u)
        };
        let pmin = p[n - 1];
        if pmin <= FAITHFULNESS_FLOOR {
            return Err(Error::NotFaithful(pmin, FAITHFULNESS_FLOOR));
        }
        Ok(WStarModel { rho, p, basis, diagonal })
    }

    pub fn build(spec: &ModelSpec) -> Result<Self> {
        let model = match &spec.rho {
            RhoSpec::Eigenvalues(p) => Self::from_eigenvalues(p)?,
            RhoSpec::Matrix(rows) => Self::from_matrix(mat_from_json(rows)?)?,
        };
        if model.dim() != spec.dim {
            return Err(Error::BadDimension(format!("declared dim {} but rho is {}x{}", spec.dim, model.dim(), model.dim())));
        }
        Ok(model)
    }

    /// Serializes back to a model spec; diagonal densities are written as eigenvalue lists.
    pub fn to_spec(&self) -> ModelSpec {
        let n = self.dim();
        let rho = if self.diagonal {
            RhoSpec::Eigenvalues((0..n).map(|i| self.rho[(i, i)].re).collect())
        } else {
            RhoSpec::Matrix(mat_to_json(&self.rho))
        };
        ModelSpec { dim: n, rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &Mat {
        &self.rho
    }

    /// Eigenvalues of rho in decreasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.p
    }

    /// Unitary whose columns are the eigenvectors, ordered as `eigenvalues()`.
    pub fn eigenbasis(&self) -> &Mat {
        &self.basis
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    fn check(&self, x: &Operator) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        Ok(())
    }

    /// phi(x) = Tr(rho x).
    pub fn state(&self, x: &Operator) -> Result<C64> {
        self.check(x)?;
        Ok((&self.rho * x.mat()).trace())
    }

    /// phi(x* y): conjugate-linear in x, linear in y.
    pub fn gns_inner(&self, x: &Operator, y: &Operator) -> Result<C64> {
        self.check(x)?;
        self.check(y)?;
        Ok((&self.rho * x.mat().adjoint() * y.mat()).trace())
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.dim())
    }

    pub fn zero(&self) -> Operator {
        Operator::zero(self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tracial_qubit() {
        let m = WStarModel::from_eigenvalues(&[0.5, 0.5]).unwrap();
        assert_eq!(m.eigenvalues(), &[0.5, 0.5]);
        assert_eq!(m.state(&Operator::unit(2, 0, 1)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_trace_and_faithfulness() {
        assert!(matches!(WStarModel::from_eigenvalues(&[0.7, 0.3, 0.1]), Err(Error::NotUnitTrace(_))));
        assert!(matches!(WStarModel::from_eigenvalues(&[1.0, 0.0]), Err(Error::NotFaithful(..))));
        let mut m = Mat::identity(2, 2).map(|z| z * 0.5);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(WStarModel::from_matrix(m), Err(Error::NotHermitian(_))));
        assert!(matches!(WStarModel::from_eigenvalues(&[]), Err(Error::BadDimension(_))));
    }

    #[test]
    fn state_and_inner_on_two_thirds() {
        let m = WStarModel::from_eigenvalues(&[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert_relative_eq!(m.state(&Operator::unit(2, 0, 0)).unwrap().re, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(m.state(&m.identity()).unwrap().re, 1.0, epsilon = 1e-15);
        let e12 = Operator::unit(2, 0, 1);
        // e21 e12 = e22
        assert_relative_eq!(m.gns_inner(&e12, &e12).unwrap().re, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn eigen_reconstruction_for_dense_rho() {
        let rho = Mat::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)]);
        let m = WStarModel::from_matrix(rho.clone()).unwrap();
        let u = m.eigenbasis();
        let d = Mat::from_fn(2, 2, |i, j| if i == j { c(m.eigenvalues()[i], 0.0) } else { C64::default() });
        assert!(opnorm(&(u * d * u.adjoint() - rho)) < 1e-10);
        assert!(m.eigenvalues()[0] >= m.eigenvalues()[1]);
    }

    #[test]
    fn domains() {
        assert!(in_domain(&Operator::identity(3), 1));
        assert!(!in_domain(&Operator::unit(2, 0, 1).scale(c(3.0, 0.0)), 2));
        assert!(in_domain(&Operator::unit(2, 0, 1).scale(c(2.0, 0.0)), 2));
    }

    #[test]
    fn spec_round_trip() {
        let m = WStarModel::from_eigenvalues(&[0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&m.to_spec()).unwrap();
        let back = WStarModel::build(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back.eigenvalues(), m.eigenvalues());
        assert_eq!(back.eigenvalues(), &[0.75, 0.25]);
    }
}
