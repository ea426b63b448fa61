//! Fejér and de la Vallée Poussin smearing, smeared products and smeared polynomials.
//!
//! Everything here is an exact Schur multiplier in the eigenbasis of rho; time
//! quadrature only appears in `discretization`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{c, Mat, Operator, C64};
use crate::modular::{g_hat, ModularCalculus};

/// Fourier transform of f_{m,l}: the hat of half-width m centred at l.
/// Vanishes at the kink |t - l| = m.
pub fn fejer_hat(m: f64, l: f64, t: f64) -> f64 {
    let d = (t - l).abs();
    if d >= m {
        0.0
    } else {
        1.0 - d / m
    }
}

/// Fourier transform of h_K.
pub fn dlvp_hat(k: f64, t: f64) -> f64 {
    (k + 1.0 - t.abs()).min(1.0).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Fejer { m: f64, l: f64 },
    Dlvp { k: f64 },
    G { s: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Fejer { m, .. } if !(m > 0.0) => Err(Error::NonPositiveBandwidth(m)),
            KernelSpec::Dlvp { k } if !(k >= 0.0) => Err(Error::BadParameters(format!("dlvp index {k} < 0"))),
            _ => Ok(()),
        }
    }

    pub fn hat(&self, t: f64) -> f64 {
        match *self {
            KernelSpec::Fejer { m, l } => fejer_hat(m, l, t),
            KernelSpec::Dlvp { k } => dlvp_hat(k, t),
            KernelSpec::G { s } => g_hat(s, t),
        }
    }

    /// L1 norm of the time-domain kernel (bounds the map's operator norm).
    pub fn l1_norm(&self) -> f64 {
        match *self {
            KernelSpec::Fejer { .. } | KernelSpec::G { .. } => 1.0,
            KernelSpec::Dlvp { k } => 2.0 * k + 1.0,
        }
    }

    pub fn apply_eigen(&self, mc: &ModularCalculus, xe: &Mat) -> Result<Mat> {
        self.validate()?;
        mc.multiply_eigen(xe, |r| c(self.hat(r), 0.0))
    }

    pub fn apply(&self, mc: &ModularCalculus, x: &Operator) -> Result<Operator> {
        mc.check(x)?;
        Ok(mc.from_eigen(self.apply_eigen(mc, &mc.to_eigen(x))?))
    }
}

/// F_{m,l}(x).
pub fn fejer_map(mc: &ModularCalculus, m: f64, l: f64, x: &Operator) -> Result<Operator> {
    KernelSpec::Fejer { m, l }.apply(mc, x)
}

/// H_K(x) = (K+1) F_{K+1}(x) - K F_K(x).
pub fn dlvp_map(mc: &ModularCalculus, k: f64, x: &Operator) -> Result<Operator> {
    KernelSpec::Dlvp { k }.apply(mc, x)
}

// Eigen-frame building blocks shared with the formula evaluator.

pub fn fejer_e(mc: &ModularCalculus, m: f64, l: f64, xe: &Mat) -> Result<Mat> {
    KernelSpec::Fejer { m, l }.apply_eigen(mc, xe)
}

pub fn dlvp_e(mc: &ModularCalculus, k: f64, xe: &Mat) -> Result<Mat> {
    KernelSpec::Dlvp { k }.apply_eigen(mc, xe)
}

/// m_{K,L}(x, y) = F_K(x) F_L(y).
pub fn smeared_product_e(mc: &ModularCalculus, k: f64, l: f64, xe: &Mat, ye: &Mat) -> Result<Mat> {
    Ok(fejer_e(mc, k, 0.0, xe)? * fejer_e(mc, l, 0.0, ye)?)
}

/// M_{(K,L)}(a, b) as the four-term combination of smeared products.
pub fn big_smeared_product_e(mc: &ModularCalculus, k: f64, l: f64, a: &Mat, b: &Mat) -> Result<Mat> {
    let t1 = smeared_product_e(mc, k + 1.0, l + 1.0, a, b)?.map(|z| z * ((k + 1.0) * (l + 1.0)));
    let t2 = smeared_product_e(mc, k + 2.0, l + 2.0, a, b)?.map(|z| z * ((k + 2.0) * (l + 2.0)));
    let t3 = smeared_product_e(mc, k + 1.0, l + 2.0, a, b)?.map(|z| z * ((k + 1.0) * (l + 2.0)));
    let t4 = smeared_product_e(mc, k + 2.0, l + 1.0, a, b)?.map(|z| z * ((k + 2.0) * (l + 1.0)));
    Ok(t1 + t2 - t3 - t4)
}

fn lift2(
    mc: &ModularCalculus,
    x: &Operator,
    y: &Operator,
    f: impl Fn(&Mat, &Mat) -> Result<Mat>,
) -> Result<Operator> {
    mc.check(x)?;
    mc.check(y)?;
    Ok(mc.from_eigen(f(&mc.to_eigen(x), &mc.to_eigen(y))?))
}

pub fn smeared_product(mc: &ModularCalculus, k: f64, l: f64, x: &Operator, y: &Operator) -> Result<Operator> {
    if !(k > 0.0) || !(l > 0.0) {
        return Err(Error::NonPositiveBandwidth(k.min(l)));
    }
    lift2(mc, x, y, |a, b| smeared_product_e(mc, k, l, a, b))
}

pub fn big_smeared_product(mc: &ModularCalculus, k: f64, l: f64, a: &Operator, b: &Operator) -> Result<Operator> {
    if !(k >= 0.0) || !(l >= 0.0) {
        return Err(Error::BadParameters("M_(K,L) needs K, L >= 0".into()));
    }
    lift2(mc, a, b, |a, b| big_smeared_product_e(mc, k, l, a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Letter {
    X,
    XStar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: (f64, f64),
    pub word: Vec<Letter>,
}

/// A *-polynomial in one non-commuting variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarPoly {
    pub terms: Vec<Monomial>,
}

impl StarPoly {
    pub fn new(terms: Vec<(C64, Vec<Letter>)>) -> Self {
        StarPoly { terms: terms.into_iter().map(|(z, w)| Monomial { coef: (z.re, z.im), word: w }).collect() }
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.word.len()).max().unwrap_or(0)
    }

    /// Evaluates p(y) with true products.
    pub fn eval(&self, y: &Mat) -> Mat {
        let n = y.nrows();
        let ys = y.adjoint();
        let mut acc = Mat::zeros(n, n);
        for t in &self.terms {
            let mut m = Mat::identity(n, n);
            for l in &t.word {
                m = match l {
                    Letter::X => m * y,
                    Letter::XStar => m * &ys,
                };
            }
            acc += m.map(|z| z * c(t.coef.0, t.coef.1));
        }
        acc
    }

    /// Triangle-inequality upper bound for sup ||p(a)|| over ||a|| <= n.
    pub fn norm_bound(&self, n: f64) -> f64 {
        self.terms.iter().map(|t| c(t.coef.0, t.coef.1).norm() * n.powi(t.word.len() as i32)).sum()
    }
}

fn check_weights(lambda: &[f64], bands: &[f64]) -> Result<()> {
    if lambda.len() != bands.len() {
        return Err(Error::LengthMismatch(lambda.len(), bands.len()));
    }
    if lambda.is_empty() {
        return Err(Error::BadWeights("empty weight list".into()));
    }
    if lambda.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
        return Err(Error::BadWeights(format!("{lambda:?} not in [0,1]")));
    }
    let s: f64 = lambda.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::BadWeights(format!("weights sum to {s}")));
    }
    if bands.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::NonPositiveBandwidth(bands.iter().cloned().fold(f64::INFINITY, f64::min)));
    }
    Ok(())
}

/// The dotted expansion of p(sum_i lambda_i F_{N_i}(x)) through nested M-products.
pub fn smeared_polynomial_e(mc: &ModularCalculus, p: &StarPoly, lambda: &[f64], bands: &[f64], xe: &Mat) -> Result<Mat> {
    check_weights(lambda, bands)?;
    let n = xe.nrows();
    let xs = xe.adjoint();
    let r = lambda.len();
    // F_{N_i}(x^eps) for every i and eps.
    let mut fx = Vec::with_capacity(r);
    for &nb in bands {
        fx.push([fejer_e(mc, nb, 0.0, xe)?, fejer_e(mc, nb, 0.0, &xs)?]);
    }
    let pick = |i: usize, l: Letter| -> &Mat {
        match l {
            Letter::X => &fx[i][0],
            Letter::XStar => &fx[i][1],
        }
    };
    let mut acc = Mat::zeros(n, n);
    for t in &p.terms {
        let coef = c(t.coef.0, t.coef.1);
        let k = t.word.len();
        if k == 0 {
            acc += Mat::identity(n, n).map(|z| z * coef);
            continue;
        }
        let mut idx = vec![0usize; k];
        loop {
            let weight: f64 = idx.iter().map(|&i| lambda[i]).product();
            let term = if k == 1 {
                pick(idx[0], t.word[0]).clone()
            } else {
                // m_{N_{k-1}, N_k}(x^{e_{k-1}}, x^{e_k}) = F(.) F(.)
                let mut inner = pick(idx[k - 2], t.word[k - 2]) * pick(idx[k - 1], t.word[k - 1]);
                let mut tail = bands[idx[k - 2]] + bands[idx[k - 1]];
                for j in (0..k - 2).rev() {
                    let nj = bands[idx[j]];
                    inner = big_smeared_product_e(mc, nj, tail, pick(idx[j], t.word[j]), &inner)?;
                    tail += nj;
                }
                inner
            };
            acc += term.map(|z| z * coef * weight);
            // next index tuple
            let mut pos = k;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < r {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX {
                break;
            }
        }
    }
    Ok(acc)
}

pub fn smeared_polynomial(mc: &ModularCalculus, p: &StarPoly, lambda: &[f64], bands: &[f64], x: &Operator) -> Result<Operator> {
    mc.check(x)?;
    Ok(mc.from_eigen(smeared_polynomial_e(mc, p, lambda, bands, &mc.to_eigen(x))?))
}

/// p(sum_i lambda_i F_{N_i}(x)) with true products (the interpretation of tau_{p,lambda,N}).
pub fn tau_direct_e(mc: &ModularCalculus, p: &StarPoly, lambda: &[f64], bands: &[f64], xe: &Mat) -> Result<Mat> {
    check_weights(lambda, bands)?;
    let n = xe.nrows();
    let mut y = Mat::zeros(n, n);
    for (&l, &nb) in lambda.iter().zip(bands) {
        y += fejer_e(mc, nb, 0.0, xe)?.map(|z| z * l);
    }
    Ok(p.eval(&y))
}

/// Decides x in M(sigma, [-K, K]) through the vanishing of F_{K,±L}(x), L = 2K..=L_max.
///
/// For K = 0 the family degenerates; half-width 1/2 hats centred at ±1/2, ±1, ... are
/// used instead, which cover R \ {0} in the same way.
pub fn spectral_membership_test(mc: &ModularCalculus, k: u32, x: &Operator, l_max: u32) -> Result<bool> {
    if l_max < 2 * k {
        return Err(Error::BadRange(format!("L_max = {l_max} < 2K = {}", 2 * k)));
    }
    mc.check(x)?;
    let xe = mc.to_eigen(x);
    let thr = 1e-10 * x.opnorm();
    let (width, centres): (f64, Vec<f64>) = if k == 0 {
        (0.5, (1..=2 * l_max.max(1)).map(|j| j as f64 * 0.5).collect())
    } else {
        (k as f64, (2 * k..=l_max).map(|l| l as f64).collect())
    };
    for l in centres {
        for sign in [1.0, -1.0] {
            let y = fejer_e(mc, width, sign * l, &xe)?;
            if crate::model::opnorm(&y) > thr {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{opnorm, WStarModel};
    use crate::sampling::{random_model, random_operator};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn two_thirds() -> ModularCalculus {
        ModularCalculus::new(WStarModel::from_eigenvalues(&[2.0 / 3.0, 1.0 / 3.0]).unwrap())
    }

    fn close(a: &Operator, b: &Operator, tol: f64) -> bool {
        opnorm(&(a.mat() - b.mat())) <= tol
    }

    #[test]
    fn hats() {
        assert_eq!(fejer_hat(1.0, 0.0, 1.0), 0.0);
        assert_eq!(fejer_hat(2.0, 1.0, 1.0), 1.0);
        assert_eq!(dlvp_hat(2.0, 2.5), 0.5);
        assert_eq!(dlvp_hat(0.0, 0.25), 0.75);
        for &t in &[-3.1, -1.0, 0.0, 0.4, 1.7, 2.2] {
            for &k in &[1.0, 2.0, 4.0] {
                let comb = (k + 1.0) * fejer_hat(k + 1.0, 0.0, t) - k * fejer_hat(k, 0.0, t);
                assert_relative_eq!(dlvp_hat(k, t), comb, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn fejer_examples() {
        let mc = two_thirds();
        let e12 = Operator::unit(2, 0, 1);
        let f = fejer_map(&mc, 1.0, 0.0, &e12).unwrap();
        assert_relative_eq!(f.mat()[(0, 1)].re, 1.0 - LN_2, epsilon = 1e-15);
        // ]l - N, l + N[ misses ln 2
        assert_eq!(fejer_map(&mc, 0.3, 1.0, &e12).unwrap(), mc.model().zero());
        assert!(fejer_map(&mc, 0.0, 0.0, &e12).is_err());
        let tr = ModularCalculus::new(WStarModel::from_eigenvalues(&[0.25; 4]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_operator(4, &mut rng);
        assert_eq!(fejer_map(&tr, 0.7, 0.0, &x).unwrap(), x);
        assert_eq!(dlvp_map(&tr, 3.0, &x).unwrap(), x);
    }

    #[test]
    fn fejer_adjoint_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mc = ModularCalculus::new(random_model(3, &mut rng));
        let x = random_operator(3, &mut rng);
        let lhs = fejer_map(&mc, 1.5, 0.4, &x.adjoint()).unwrap();
        let rhs = fejer_map(&mc, 1.5, -0.4, &x).unwrap().adjoint();
        assert!(close(&lhs, &rhs, 1e-12));
        assert!(close(&fejer_map(&mc, 2.0, 0.0, &mc.model().identity()).unwrap(), &mc.model().identity(), 1e-12));
    }

    #[test]
    fn dlvp_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mc = ModularCalculus::new(random_model(4, &mut rng));
        let x = random_operator(4, &mut rng);
        for (k, l) in [(1.0, 1.0), (2.0, 1.0), (1.0, 3.0)] {
            let fk = fejer_map(&mc, k, 0.0, &x).unwrap();
            assert!(close(&dlvp_map(&mc, k + l, &fk).unwrap(), &fk, 1e-12));
        }
        let a = 0.8;
        let t = mc.spectral_truncate(a, &x).unwrap();
        assert!(close(&dlvp_map(&mc, 1.0, &t).unwrap(), &t, 1e-12));
    }

    #[test]
    fn big_product_matches_dlvp_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mc = ModularCalculus::new(random_model(4, &mut rng));
        let a = random_operator(4, &mut rng);
        let b = random_operator(4, &mut rng);
        for (k, l) in [(0.0, 0.0), (1.0, 2.0), (2.0, 4.0)] {
            let lhs = big_smeared_product(&mc, k, l, &a, &b).unwrap();
            let rhs = dlvp_map(&mc, k + 1.0, &a).unwrap().mul(&dlvp_map(&mc, l + 1.0, &b).unwrap());
            assert!(close(&lhs, &rhs, 1e-11 * (1.0 + rhs.opnorm())));
        }
        let one = mc.model().identity();
        assert!(close(&big_smeared_product(&mc, 1.0, 1.0, &one, &one).unwrap(), &one, 1e-12));
    }

    #[test]
    fn smeared_product_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mc = ModularCalculus::new(random_model(3, &mut rng));
        let x = random_operator(3, &mut rng);
        let y = random_operator(3, &mut rng);
        let lhs = smeared_product(&mc, 1.0, 2.0, &x, &y).unwrap().adjoint();
        let rhs = smeared_product(&mc, 2.0, 1.0, &y.adjoint(), &x.adjoint()).unwrap();
        assert!(close(&lhs, &rhs, 1e-12));
        let one = mc.model().identity();
        let fx = fejer_map(&mc, 2.0, 0.0, &x).unwrap();
        assert!(close(&smeared_product(&mc, 4.0, 2.0, &one, &x).unwrap(), &fx, 1e-12));
        assert!(close(&smeared_product(&mc, 2.0, 4.0, &x, &one).unwrap(), &fx, 1e-12));
    }

    #[test]
    fn associativity_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mc = ModularCalculus::new(random_model(4, &mut rng));
        let (x1, x2, x3) = (random_operator(4, &mut rng), random_operator(4, &mut rng), random_operator(4, &mut rng));
        let (k1, k2, k3) = (1.0, 2.0, 1.0);
        let m12 = smeared_product(&mc, k1, k2, &x1, &x2).unwrap();
        let m23 = smeared_product(&mc, k2, k3, &x2, &x3).unwrap();
        let s = k1 + k2;
        let lhs = smeared_product(&mc, s + 2.0, k3, &m12, &x3).unwrap().scale(c(s + 2.0, 0.0))
            .sub(&smeared_product(&mc, s + 1.0, k3, &m12, &x3).unwrap().scale(c(s + 1.0, 0.0)));
        let s = k2 + k3;
        let rhs = smeared_product(&mc, k1, s + 2.0, &x1, &m23).unwrap().scale(c(s + 2.0, 0.0))
            .sub(&smeared_product(&mc, k1, s + 1.0, &x1, &m23).unwrap().scale(c(s + 1.0, 0.0)));
        assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn polynomial_expansion_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mc = ModularCalculus::new(random_model(3, &mut rng));
        let x = random_operator(3, &mut rng);
        let p = StarPoly::new(vec![
            (c(0.5, 0.0), vec![]),
            (c(1.0, -1.0), vec![Letter::X]),
            (c(0.3, 0.2), vec![Letter::XStar, Letter::X]),
            (c(-0.7, 0.0), vec![Letter::X, Letter::XStar, Letter::X]),
        ]);
        let lam = [0.2, 0.5, 0.3];
        let bands = [1.0, 2.0, 4.0];
        let dotted = smeared_polynomial(&mc, &p, &lam, &bands, &x).unwrap();
        let direct = mc.from_eigen(tau_direct_e(&mc, &p, &lam, &bands, &mc.to_eigen(&x)).unwrap());
        assert!(close(&dotted, &direct, 1e-10 * (1.0 + direct.opnorm())));
        assert!(dotted.opnorm() <= p.norm_bound(x.opnorm()) + 1e-9);
        assert!(matches!(smeared_polynomial(&mc, &p, &[0.5, 0.6], &[1.0, 2.0], &x), Err(Error::BadWeights(_))));
    }

    #[test]
    fn polynomial_trivial_cases() {
        let tr = ModularCalculus::new(WStarModel::from_eigenvalues(&[0.5, 0.5]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_operator(2, &mut rng);
        let p = StarPoly::new(vec![(c(1.0, 0.0), vec![Letter::XStar, Letter::X])]);
        let got = smeared_polynomial(&tr, &p, &[1.0], &[1.0], &x).unwrap();
        assert!(close(&got, &x.adjoint().mul(&x), 1e-12));
        let mc = two_thirds();
        let lin = StarPoly::new(vec![(c(1.0, 0.0), vec![Letter::X])]);
        let got = smeared_polynomial(&mc, &lin, &[1.0], &[2.0], &x).unwrap();
        assert!(close(&got, &fejer_map(&mc, 2.0, 0.0, &x).unwrap(), 1e-12));
    }

    #[test]
    fn membership() {
        let mc = two_thirds();
        let e12 = Operator::unit(2, 0, 1);
        assert!(!spectral_membership_test(&mc, 0, &e12, 4).unwrap());
        assert!(spectral_membership_test(&mc, 1, &e12, 4).unwrap());
        assert!(spectral_membership_test(&mc, 0, &mc.model().identity(), 2).unwrap());
        assert!(spectral_membership_test(&mc, 2, &e12, 3).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mc = ModularCalculus::new(random_model(4, &mut rng));
        let y = random_operator(4, &mut rng);
        let x = mc.spectral_truncate(1.0, &y).unwrap();
        assert!(spectral_membership_test(&mc, 1, &x, 12).unwrap());
    }
}
