//! Exact modular data: in the eigenbasis of rho, `Delta` acts on the component
//! (i,j) of x by `p_i/p_j`, so every Borel function of `ln Delta` is a Schur multiplier.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{c, Mat, Operator, WStarModel, C64};

#[derive(Clone, Debug)]
pub struct ModularCalculus {
    model: WStarModel,
    log_ratios: DMatrix<f64>,
}

impl ModularCalculus {
    pub fn new(model: WStarModel) -> Self {
        let n = model.dim();
        let lp: Vec<f64> = model.eigenvalues().iter().map(|p| p.ln()).collect();
        let log_ratios = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { lp[i] - lp[j] });
        ModularCalculus { model, log_ratios }
    }

    pub fn model(&self) -> &WStarModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn p(&self) -> &[f64] {
        self.model.eigenvalues()
    }

    /// r_ij = ln(p_i/p_j).
    pub fn log_ratios(&self) -> &DMatrix<f64> {
        &self.log_ratios
    }

    pub fn check(&self, x: &Operator) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        Ok(())
    }

    /// U* x U.
    pub fn to_eigen(&self, x: &Operator) -> Mat {
        let u = self.model.eigenbasis();
        u.adjoint() * x.mat() * u
    }

    /// U x~ U*.
    pub fn from_eigen(&self, xe: Mat) -> Operator {
        let u = self.model.eigenbasis();
        Operator::new(u * xe * u.adjoint())
    }

    /// Samples `f` on the log-ratio matrix.
    pub fn multiplier_matrix(&self, f: impl Fn(f64) -> C64) -> Result<Mat> {
        let n = self.dim();
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let r = self.log_ratios[(i, j)];
                let v = f(r);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFiniteMultiplier(r));
                }
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// Multiplier application in the eigen frame.
    pub fn multiply_eigen(&self, xe: &Mat, f: impl Fn(f64) -> C64) -> Result<Mat> {
        let m = self.multiplier_matrix(f)?;
        Ok(xe.component_mul(&m))
    }

    pub fn apply_multiplier(&self, f: impl Fn(f64) -> C64, x: &Operator) -> Result<Operator> {
        self.check(x)?;
        let xe = self.to_eigen(x);
        Ok(self.from_eigen(self.multiply_eigen(&xe, f)?))
    }

    /// sigma_t(x) = rho^{it} x rho^{-it}.
    pub fn modular_flow(&self, t: f64, x: &Operator) -> Result<Operator> {
        self.apply_multiplier(|r| C64::from_polar(1.0, t * r), x)
    }

    /// G_s, multiplier 2 e^{s/2} e^{r/2} / (e^r + e^s) = sech((r - s)/2).
    pub fn g_map(&self, s: f64, x: &Operator) -> Result<Operator> {
        self.apply_multiplier(|r| c(g_hat(s, r), 0.0), x)
    }

    /// E_alpha(x, y) = <Delta^alpha x xi, y xi>, conjugate-linear in x.
    pub fn form_alpha(&self, alpha: f64, x: &Operator, y: &Operator) -> Result<C64> {
        self.check(x)?;
        self.check(y)?;
        let xe = self.to_eigen(x);
        let ye = self.to_eigen(y);
        Ok(self.form_eigen(alpha, &xe, &ye))
    }

    pub fn form_eigen(&self, alpha: f64, xe: &Mat, ye: &Mat) -> C64 {
        let n = self.dim();
        let p = self.p();
        let mut acc = C64::default();
        for i in 0..n {
            for j in 0..n {
                let w = (alpha * self.log_ratios[(i, j)]).exp() * p[j];
                acc += xe[(i, j)].conj() * ye[(i, j)] * w;
            }
        }
        acc
    }

    /// phi(x) in the eigen frame.
    pub fn state_eigen(&self, xe: &Mat) -> C64 {
        self.p().iter().enumerate().map(|(i, &pi)| xe[(i, i)] * pi).sum()
    }

    /// phi(x* y) in the eigen frame.
    pub fn inner_eigen(&self, xe: &Mat, ye: &Mat) -> C64 {
        self.form_eigen(0.0, xe, ye)
    }

    /// ||x||_phi in the eigen frame.
    pub fn l2_eigen(&self, xe: &Mat) -> f64 {
        let p = self.p();
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += xe[(i, j)].norm_sqr() * p[j];
            }
        }
        s.sqrt()
    }

    /// ||x||_phi^* in the eigen frame: sum |x_ij|^2 p_i p_j / (p_i + p_j).
    pub fn star_eigen(&self, xe: &Mat) -> f64 {
        let p = self.p();
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += xe[(i, j)].norm_sqr() * p[i] * p[j] / (p[i] + p[j]);
            }
        }
        s.sqrt()
    }

    /// Sp(sigma): all log ratios, merged within 1e-9, sorted.
    pub fn flow_spectrum(&self) -> Vec<f64> {
        merge(self.log_ratios.iter().copied().collect())
    }

    /// Arveson spectrum of x: log ratios carrying a component above `tol * ||x||`.
    pub fn arveson_spectrum(&self, x: &Operator, tol: f64) -> Vec<f64> {
        let xe = self.to_eigen(x);
        let thr = tol * x.opnorm();
        let n = self.dim();
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = xe[(i, j)].norm();
                if a > thr && a > 0.0 {
                    v.push(self.log_ratios[(i, j)]);
                }
            }
        }
        merge(v)
    }

    /// Projection onto M(sigma, [-a, a]).
    pub fn spectral_truncate(&self, a: f64, x: &Operator) -> Result<Operator> {
        if !(a >= 0.0) {
            return Err(Error::BadRange(format!("truncation radius {a} must be >= 0")));
        }
        self.apply_multiplier(|r| if r.abs() <= a { c(1.0, 0.0) } else { C64::default() }, x)
    }
}

pub fn g_hat(s: f64, r: f64) -> f64 {
    1.0 / ((r - s) / 2.0).cosh()
}

fn merge(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        match out.last() {
            Some(&last) if (x - last).abs() <= 1e-9 => {}
            _ => out.push(x),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::opnorm;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn two_thirds() -> ModularCalculus {
        ModularCalculus::new(WStarModel::from_eigenvalues(&[2.0 / 3.0, 1.0 / 3.0]).unwrap())
    }

    /// rho^{it} computed independently by diagonalizing rho (oracle for the flow).
    fn rho_power(m: &WStarModel, z: C64) -> Mat {
        let eig = m.rho().clone().symmetric_eigen();
        let n = m.dim();
        let d = Mat::from_fn(n, n, |i, j| if i == j { C64::from(eig.eigenvalues[i]).powc(z) } else { C64::default() });
        &eig.eigenvectors * d * eig.eigenvectors.adjoint()
    }

    #[test]
    fn flow_on_e12_matches_conjugation() {
        let mc = two_thirds();
        let e12 = Operator::unit(2, 0, 1);
        for &s in &[0.3, -1.2, 2.5] {
            let got = mc.modular_flow(s, &e12).unwrap();
            let oracle = rho_power(mc.model(), c(0.0, s)) * e12.mat() * rho_power(mc.model(), c(0.0, -s));
            assert!(opnorm(&(got.mat() - &oracle)) < 1e-12);
            let expected = e12.scale(C64::from_polar(1.0, s * LN_2));
            assert!(opnorm(&(got.mat() - expected.mat())) < 1e-14);
        }
    }

    #[test]
    fn flow_on_dense_rho() {
        let rho = Mat::from_row_slice(3, 3, &[
            c(0.5, 0.0), c(0.05, 0.1), c(0.0, 0.02),
            c(0.05, -0.1), c(0.3, 0.0), c(0.04, 0.0),
            c(0.0, -0.02), c(0.04, 0.0), c(0.2, 0.0),
        ]);
        let mc = ModularCalculus::new(WStarModel::from_matrix(rho).unwrap());
        let x = Operator::new(Mat::from_fn(3, 3, |i, j| c((i + 2 * j) as f64 * 0.3 - 0.5, (i as f64) - 0.7 * j as f64)));
        let t = 0.77;
        let got = mc.modular_flow(t, &x).unwrap();
        let oracle = rho_power(mc.model(), c(0.0, t)) * x.mat() * rho_power(mc.model(), c(0.0, -t));
        assert!(opnorm(&(got.mat() - &oracle)) < 1e-11);
    }

    #[test]
    fn log_ratio_invariants_and_identity() {
        let mc = two_thirds();
        let r = mc.log_ratios();
        assert_eq!(r[(0, 1)], -r[(1, 0)]);
        assert_eq!(r[(0, 0)], 0.0);
        let one = mc.model().identity();
        let d = mc.apply_multiplier(|r| c(r.exp(), 0.0), &one).unwrap();
        assert_eq!(d, one);
        assert_eq!(mc.flow_spectrum().len(), 3);
    }

    #[test]
    fn tracial_multiplier_is_f0() {
        let mc = ModularCalculus::new(WStarModel::from_eigenvalues(&[0.25; 4]).unwrap());
        let x = Operator::unit(4, 1, 3);
        let y = mc.apply_multiplier(|r| c(2.0 + r, 1.0), &x).unwrap();
        assert_eq!(y, x.scale(c(2.0, 1.0)));
    }

    #[test]
    fn g_map_examples() {
        let mc = two_thirds();
        let g = mc.g_map(0.0, &Operator::unit(2, 0, 1)).unwrap();
        assert_relative_eq!(g.mat()[(0, 1)].re, 2.0 * 2f64.sqrt() / 3.0, epsilon = 1e-15);
        let tr = ModularCalculus::new(WStarModel::from_eigenvalues(&[0.5, 0.5]).unwrap());
        let x = Operator::unit(2, 1, 0);
        let s = 0.8;
        let gx = tr.g_map(s, &x).unwrap();
        let k = 2.0 * (s / 2.0f64).exp() / (1.0 + s.exp());
        assert_relative_eq!(gx.mat()[(1, 0)].re, k, epsilon = 1e-15);
    }

    #[test]
    fn g_map_by_quadrature() {
        // Oracle: integrate g_0(t) sigma_t(e12) dt numerically.
        let mc = two_thirds();
        let e12 = Operator::unit(2, 0, 1);
        let h = 1e-3;
        let mut acc = C64::default();
        let mut t = -40.0;
        while t < 40.0 {
            let g = 2.0 / ((std::f64::consts::PI * t).exp() + (-std::f64::consts::PI * t).exp());
            acc += C64::from_polar(g * h, t * LN_2);
            t += h;
        }
        let exact = mc.g_map(0.0, &e12).unwrap().mat()[(0, 1)];
        assert!((acc - exact).norm() < 1e-6);
    }

    #[test]
    fn forms() {
        let mc = two_thirds();
        let e12 = Operator::unit(2, 0, 1);
        assert_relative_eq!(mc.form_alpha(1.0, &e12, &e12).unwrap().re, 2.0 / 3.0, epsilon = 1e-15);
        // E_1(x, y) = phi(y x*)
        let x = Operator::new(Mat::from_row_slice(2, 2, &[c(0.1, 0.2), c(1.0, -0.3), c(0.4, 0.0), c(-0.5, 0.9)]));
        let y = Operator::new(Mat::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.2, 0.1), c(-0.3, 0.6), c(0.5, 0.5)]));
        let lhs = mc.form_alpha(1.0, &x, &y).unwrap();
        let rhs = mc.model().state(&(&y * &x.adjoint())).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
        let e0 = mc.form_alpha(0.0, &x, &y).unwrap();
        assert!((e0 - mc.model().gns_inner(&x, &y).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn spectra_and_truncation() {
        let mc = two_thirds();
        assert_eq!(mc.arveson_spectrum(&mc.model().identity(), 1e-12), vec![0.0]);
        assert!(mc.arveson_spectrum(&mc.model().zero(), 1e-12).is_empty());
        let x = Operator::unit(2, 0, 1).add(&Operator::unit(2, 0, 0));
        assert_eq!(mc.spectral_truncate(0.5, &x).unwrap(), Operator::unit(2, 0, 0));
        assert_eq!(mc.spectral_truncate(1.0, &x).unwrap(), x);
        let sp = mc.arveson_spectrum(&Operator::unit(2, 0, 1), 1e-12);
        assert_eq!(sp.len(), 1);
        assert_relative_eq!(sp[0], LN_2, epsilon = 1e-15);
        assert!(mc.spectral_truncate(-1.0, &x).is_err());
    }

    #[test]
    fn non_finite_multiplier() {
        let mc = two_thirds();
        let r = mc.apply_multiplier(|r| c(1.0 / r, 0.0), &mc.model().identity());
        assert!(matches!(r, Err(Error::NonFiniteMultiplier(_))));
    }
}
