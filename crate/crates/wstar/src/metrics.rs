//! The phi-norms and the metric d(x, y) = ||x - y||_phi^*.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{c, Mat, Operator, C64};
use crate::modular::ModularCalculus;
use crate::smearing::{fejer_map, smeared_product};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub l2: f64,
    pub sharp: f64,
    pub star: f64,
}

pub fn norm_bundle(mc: &ModularCalculus, x: &Operator) -> Result<NormBundle> {
    mc.check(x)?;
    let xe = mc.to_eigen(x);
    let l2 = mc.l2_eigen(&xe);
    let l2s = mc.l2_eigen(&xe.adjoint());
    Ok(NormBundle { l2, sharp: (l2 * l2 + l2s * l2s).sqrt(), star: mc.star_eigen(&xe) })
}

/// ||x||_phi = phi(x* x)^{1/2}.
pub fn norm_phi(mc: &ModularCalculus, x: &Operator) -> Result<f64> {
    mc.check(x)?;
    Ok(mc.l2_eigen(&mc.to_eigen(x)))
}

/// ||x||^# = (||x||_phi^2 + ||x*||_phi^2)^{1/2}.
pub fn norm_sharp(mc: &ModularCalculus, x: &Operator) -> Result<f64> {
    Ok(norm_bundle(mc, x)?.sharp)
}

/// ||Delta^{1/2} (1 + Delta)^{-1/2} x xi||.
pub fn norm_star_spectral(mc: &ModularCalculus, x: &Operator) -> Result<f64> {
    mc.check(x)?;
    Ok(mc.star_eigen(&mc.to_eigen(x)))
}

pub fn metric(mc: &ModularCalculus, x: &Operator, y: &Operator) -> Result<f64> {
    norm_star_spectral(mc, &x.sub(y))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VariationalMode {
    ExactMinimizer,
    /// Gradient descent with step halving from `starts` random points.
    NumericSearch { starts: usize, max_iters: usize, seed: u64 },
}

/// phi(y* y) + phi((x - y)(x - y)*), computed with rho directly (no eigenbasis).
pub fn variational_objective(mc: &ModularCalculus, x: &Mat, y: &Mat) -> f64 {
    let rho = mc.model().rho();
    let d = x - y;
    let a = (rho * y.adjoint() * y).trace().re;
    let b = (rho * &d * d.adjoint()).trace().re;
    a + b
}

/// The closed-form minimizer y with y xi = Delta (1 + Delta)^{-1} x xi.
pub fn variational_minimizer(mc: &ModularCalculus, x: &Operator) -> Result<Operator> {
    mc.apply_multiplier(|r| c(1.0 / (1.0 + (-r).exp()), 0.0), x)
}

pub fn norm_star_variational(mc: &ModularCalculus, x: &Operator, mode: VariationalMode) -> Result<(f64, Operator)> {
    mc.check(x)?;
    match mode {
        VariationalMode::ExactMinimizer => {
            let y = variational_minimizer(mc, x)?;
            let v = variational_objective(mc, x.mat(), y.mat()).max(0.0).sqrt();
            Ok((v, y))
        }
        VariationalMode::NumericSearch { starts, max_iters, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = mc.model().rho();
            let pmax = mc.p()[0];
            let xm = x.mat();
            let rx = rho * xm;
            let mut best: Option<(f64, Mat)> = None;
            for _ in 0..starts.max(1) {
                let mut y = crate::sampling::gaussian_mat(mc.dim(), &mut rng);
                let mut f = variational_objective(mc, xm, &y);
                let mut eta = 1.0 / (2.0 * pmax);
                for _ in 0..max_iters {
                    // gradient with respect to conj(y): y rho + rho y - rho x
                    let g = &y * rho + rho * &y - &rx;
                    if g.norm() < 1e-14 {
                        break;
                    }
                    let mut accepted = false;
                    for _ in 0..40 {
                        let cand = &y - g.map(|z| z * eta);
                        let fc = variational_objective(mc, xm, &cand);
                        if fc <= f {
                            y = cand;
                            f = fc;
                            accepted = true;
                            break;
                        }
                        eta *= 0.5;
                    }
                    if !accepted {
                        break;
                    }
                }
                if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
                    best = Some((f, y));
                }
            }
            let (f, y) = best.expect("at least one start");
            Ok((f.max(0.0).sqrt(), Operator::new(y)))
        }
    }
}

/// (2||x||^*, ||G_0(x)||^#).
pub fn normg_identity_check(mc: &ModularCalculus, x: &Operator) -> Result<(f64, f64)> {
    let lhs = 2.0 * norm_star_spectral(mc, x)?;
    let g = mc.g_map(0.0, x)?;
    Ok((lhs, norm_sharp(mc, &g)?))
}

/// Both sides of the polarized identity behind axiom (17).
pub fn axiom17_identity(mc: &ModularCalculus, lambda: &[C64], ks: &[f64], xs: &[Operator]) -> Result<(f64, f64)> {
    if lambda.len() != ks.len() {
        return Err(Error::LengthMismatch(lambda.len(), ks.len()));
    }
    if lambda.len() != xs.len() {
        return Err(Error::LengthMismatch(lambda.len(), xs.len()));
    }
    let n = mc.dim();
    let mut sum = Operator::zero(n);
    for ((l, &k), x) in lambda.iter().zip(ks).zip(xs) {
        sum = sum.add(&fejer_map(mc, k, 0.0, x)?.scale(*l));
    }
    let s = norm_star_spectral(mc, &sum)?;
    let lhs = 4.0 * s * s;
    let g: Vec<Operator> = xs.iter().map(|x| mc.g_map(0.0, x)).collect::<Result<_>>()?;
    let phi = |o: &Operator| mc.model().state(o);
    let mut rhs = C64::default();
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            let a = phi(&smeared_product(mc, ks[i], ks[j], &g[i].adjoint(), &g[j])?)?;
            let b = phi(&smeared_product(mc, ks[j], ks[i], &g[j], &g[i].adjoint())?)?;
            rhs += lambda[i].conj() * lambda[j] * (a + b);
        }
    }
    Ok((lhs, rhs.re))
}

/// x = y + z with ||y||_phi^2 + ||z*||_phi^2 = ||x||^*^2 (so at most (2 d(x,0))^2).
pub fn step5_decomposition(mc: &ModularCalculus, x: &Operator) -> Result<(Operator, Operator)> {
    let y = variational_minimizer(mc, x)?;
    let z = x.sub(&y);
    Ok((y, z))
}
