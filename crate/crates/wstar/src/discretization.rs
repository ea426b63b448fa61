//! Riemann-sum schemes on the grid k/n^2, k = -n^3 .. n^3 - 1, and their closed-form bounds.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::metrics::{metric, norm_bundle};
use crate::model::{c, Mat, Operator, C64};
use crate::modular::{g_hat, ModularCalculus};
use crate::smearing::{fejer_e, KernelSpec};

/// Grid nodes t_k = k/n^2 with weight 1/n^2, left endpoints of [-n, n).
pub fn grid(n: u32) -> impl Iterator<Item = f64> {
    let n = n as i64;
    let n2 = (n * n) as f64;
    (-n * n * n..n * n * n).map(move |k| k as f64 / n2)
}

/// f_m(t) = (1 - cos(mt)) / (pi m t^2), with f_m(0) = m / (2 pi).
pub fn fejer_time(m: f64, t: f64) -> f64 {
    if t == 0.0 {
        m / (2.0 * PI)
    } else {
        let s = (m * t / 2.0).sin();
        2.0 * s * s / (PI * m * t * t)
    }
}

/// Time-domain kernel whose Fourier transform `∫ f(t) e^{ity} dt` is the multiplier of `spec`.
pub fn kernel_time(spec: &KernelSpec, t: f64) -> Result<C64> {
    match *spec {
        // hat centred at +l  <=>  f_m(t) e^{-ilt}
        KernelSpec::Fejer { m, l } => Ok(C64::from_polar(fejer_time(m, t), -l * t)),
        KernelSpec::G { s } => Ok(C64::from_polar(2.0 / ((PI * t).exp() + (-PI * t).exp()), -s * t)),
        KernelSpec::Dlvp { .. } => Err(Error::UnsupportedKernel("dlvp".into())),
    }
}

/// (tail mass outside [-n, n], sup |f'|, ||f||_1) as used in the closed-form bound.
pub fn kernel_constants(spec: &KernelSpec, n: u32) -> Result<(f64, f64, f64)> {
    let nf = n as f64;
    match *spec {
        KernelSpec::Fejer { m, l } => Ok((8.0 / (PI * m * nf.powi(3)), m * m / PI + l.abs() * m / (2.0 * PI), 1.0)),
        KernelSpec::G { s } => Ok((4.0 * (-PI * nf).exp() / PI, s.abs() + PI / 2.0, 1.0)),
        KernelSpec::Dlvp { .. } => Err(Error::UnsupportedKernel("dlvp".into())),
    }
}

/// Per-component weights (1/n^2) sum_k f(t_k) e^{i t_k r_ij}.
fn riemann_weights(mc: &ModularCalculus, n: u32, f: impl Fn(f64) -> C64) -> Mat {
    let nodes: Vec<(f64, C64)> = grid(n).map(|t| (t, f(t))).collect();
    let h = 1.0 / (n as f64 * n as f64);
    let r = mc.log_ratios();
    let d = mc.dim();
    Mat::from_fn(d, d, |i, j| {
        let rij = r[(i, j)];
        let mut acc = C64::default();
        for &(t, w) in &nodes {
            acc += w * C64::from_polar(1.0, t * rij);
        }
        acc * h
    })
}

/// Riemann approximation of sigma_f(x) together with the lemma's closed-form bound.
pub fn riemann_sigma_f(mc: &ModularCalculus, spec: &KernelSpec, n: u32, x: &Operator) -> Result<(Operator, f64)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::BadParameters("n must be positive".into()));
    }
    mc.check(x)?;
    let (tail, deriv, l1) = kernel_constants(spec, n)?;
    let w = riemann_weights(mc, n, |t| kernel_time(spec, t).unwrap());
    let approx = mc.from_eigen(mc.to_eigen(x).component_mul(&w));
    let b = norm_bundle(mc, x)?;
    let nf = n as f64;
    let bound = tail * b.star + 2.0 * l1 / (nf * nf) * b.sharp + deriv / nf * b.star;
    Ok((approx, bound))
}

/// Closed-form bound of axiom (16).
pub fn axiom16_bound(s: f64, n: u32, m: f64) -> f64 {
    let nf = n as f64;
    8.0 * (-PI * nf).exp() * m / PI + 4.0 * m / (nf * nf) + 4.0 * (PI + s) * m / nf
}

/// The axiom-(16) sum approximating G_s(x).
pub fn axiom16_sum(mc: &ModularCalculus, s: f64, n: u32, xe: &Mat) -> Mat {
    let w = riemann_weights(mc, n, |t| C64::from_polar(2.0 / ((PI * t).exp() + (-PI * t).exp()), -s * t));
    xe.component_mul(&w)
}

/// max(0, d(G_s(x), sum) - bound) for x in D_m.
pub fn axiom16_check(mc: &ModularCalculus, s: f64, n: u32, m: f64, x: &Operator) -> Result<f64> {
    mc.check(x)?;
    let approx = mc.from_eigen(axiom16_sum(mc, s, n, &mc.to_eigen(x)));
    let exact = mc.g_map(s, x)?;
    Ok((metric(mc, &exact, &approx)? - axiom16_bound(s, n, m)).max(0.0))
}

/// Closed-form bound of axiom (18).
pub fn axiom18_bound(big_n: f64, l: f64, n: u32, m: f64) -> f64 {
    let nf = n as f64;
    4.0 * m / (nf * nf) + 16.0 * m / (PI * big_n * nf.powi(3)) + l.abs() * big_n * m / (nf * PI)
        + 2.0 * m * big_n * big_n / (PI * nf)
}

/// The axiom-(18) sum approximating F_{N,l}(x) (the k = 0 node carries N/(2 pi n^2)).
pub fn axiom18_sum(mc: &ModularCalculus, big_n: f64, l: f64, n: u32, xe: &Mat) -> Mat {
    let w = riemann_weights(mc, n, |t| C64::from_polar(fejer_time(big_n, t), -l * t));
    xe.component_mul(&w)
}

pub fn axiom18_check(mc: &ModularCalculus, big_n: f64, l: f64, n: u32, m: f64, x: &Operator) -> Result<f64> {
    mc.check(x)?;
    let xe = mc.to_eigen(x);
    let approx = mc.from_eigen(axiom18_sum(mc, big_n, l, n, &xe));
    let exact = mc.from_eigen(fejer_e(mc, big_n, l, &xe)?);
    Ok((metric(mc, &exact, &approx)? - axiom18_bound(big_n, l, n, m)).max(0.0))
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::BadExponents(format!("alpha = {alpha} not in (0, 1/2)")));
    }
    if !(beta >= 0.0) || alpha + beta >= 1.0 {
        return Err(Error::BadExponents(format!("need beta >= 0 and alpha + beta < 1 (alpha = {alpha}, beta = {beta})")));
    }
    Ok(())
}

/// Per-component weight e^{beta r} (1/n^2) (cos(alpha pi)/2pi) sum_k e^{alpha t_k} ghat_{t_k}(r).
fn form_weights(mc: &ModularCalculus, alpha: f64, beta: f64, n: u32) -> Mat {
    let nodes: Vec<f64> = grid(n).collect();
    let h = 1.0 / (n as f64 * n as f64);
    let pre = (alpha * PI).cos() / (2.0 * PI);
    let r = mc.log_ratios();
    let d = mc.dim();
    Mat::from_fn(d, d, |i, j| {
        let rij = r[(i, j)];
        let mut acc = 0.0;
        for &t in &nodes {
            acc += (alpha * t).exp() * g_hat(t, rij);
        }
        c(acc * h * pre * (beta * rij).exp(), 0.0)
    })
}

fn weighted_inner(mc: &ModularCalculus, w: &Mat, ae: &Mat, be: &Mat) -> C64 {
    let p = mc.p();
    let d = mc.dim();
    let mut acc = C64::default();
    for i in 0..d {
        for j in 0..d {
            acc += w[(i, j)] * ae[(i, j)].conj() * be[(i, j)] * p[j];
        }
    }
    acc
}

pub fn axiom19_bound(alpha: f64, beta: f64, n: u32, m: f64) -> f64 {
    let eps = (0.5 - alpha).min(1.0 - beta - alpha);
    let delta = eps.min(alpha);
    let nf = n as f64;
    let h = 1.0 / (nf * nf);
    4.0 * (-nf * delta).exp() * m * m / (PI * delta)
        + (1.0 - h.exp()).abs() * 2.0 * (3.0 + (eps * h).exp()) * m * m / (PI * delta)
}

pub fn axiom20_bound(alpha: f64, k: f64, n: u32, m: f64) -> f64 {
    let mu = 0.5 - alpha;
    let nf = n as f64;
    let h = 1.0 / (nf * nf);
    let g = 1.0 + (1.5 * k).exp();
    2.0 * (-nf * mu).exp() * g * m * m / (PI * mu) + (1.0 - h.exp()).abs() * (3.0 + (mu * h).exp()) * g * m * m / (PI * mu)
}

/// Eigen-frame sum of the discretized form identity, applied to a = F_K x, b = F_L y.
pub fn form_sum_eigen(mc: &ModularCalculus, alpha: f64, beta: f64, n: u32, ae: &Mat, be: &Mat) -> C64 {
    weighted_inner(mc, &form_weights(mc, alpha, beta, n), ae, be)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormCheck {
    pub approx: C64,
    pub exact: C64,
    pub bound: f64,
}

impl FormCheck {
    pub fn error(&self) -> f64 {
        (self.approx - self.exact).norm()
    }

    pub fn margin(&self) -> f64 {
        (self.error() - self.bound).max(0.0)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn form_recursion(
    mc: &ModularCalculus,
    alpha: f64,
    beta: f64,
    n: u32,
    k: f64,
    l: f64,
    m: f64,
    x: &Operator,
    y: &Operator,
) -> Result<FormCheck> {
    check_alpha_beta(alpha, beta)?;
    mc.check(x)?;
    mc.check(y)?;
    let ae = fejer_e(mc, k, 0.0, &mc.to_eigen(x))?;
    let be = fejer_e(mc, l, 0.0, &mc.to_eigen(y))?;
    let approx = form_sum_eigen(mc, alpha, beta, n, &ae, &be);
    let exact = mc.form_eigen(alpha + beta, &ae, &be);
    Ok(FormCheck { approx, exact, bound: axiom19_bound(alpha, beta, n, m) })
}

/// The alpha + beta = 1 case, compared against phi(m_{L,K}(y, x*)).
#[allow(clippy::too_many_arguments)]
pub fn form_top_level(
    mc: &ModularCalculus,
    alpha: f64,
    n: u32,
    k: f64,
    l: f64,
    m: f64,
    x: &Operator,
    y: &Operator,
) -> Result<FormCheck> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::BadExponents(format!("alpha = {alpha} not in (0, 1/2)")));
    }
    if l > k {
        return Err(Error::BadParameters(format!("need L <= K (K = {k}, L = {l})")));
    }
    mc.check(x)?;
    mc.check(y)?;
    let ae = fejer_e(mc, k, 0.0, &mc.to_eigen(x))?;
    let be = fejer_e(mc, l, 0.0, &mc.to_eigen(y))?;
    let approx = form_sum_eigen(mc, alpha, 1.0 - alpha, n, &ae, &be);
    let prod = crate::smearing::smeared_product(mc, l, k, y, &x.adjoint())?;
    let exact = mc.model().state(&prod)?;
    Ok(FormCheck { approx, exact, bound: axiom20_bound(alpha, k, n, m) })
}

/// sin(alpha pi)/pi ∫_0^∞ s^{-alpha} (lam + eps + s)^{-1} ds by composite Simpson on a
/// log-uniform grid over [1e-8, 1e8](1 + eps), plus convergent series for both tails.
pub fn resolvent_power_quad(lam: f64, alpha: f64, eps: f64, quad_points: usize) -> f64 {
    let cc = lam + eps;
    let s0 = 1e-8 * (1.0 + eps);
    let s1 = 1e8 * (1.0 + eps);
    let (a, b) = (s0.ln(), s1.ln());
    let n = (quad_points.max(2) + 1) & !1; // even number of panels
    let h = (b - a) / n as f64;
    let f = |u: f64| ((1.0 - alpha) * u).exp() / (cc + u.exp());
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    let mut total = acc * h / 3.0;
    // ∫_0^{s0} s^{-alpha}/(c+s) = sum_k (-1)^k s0^{k+1-alpha} / ((k+1-alpha) c^{k+1})
    let mut lower = 0.0;
    for k in 0..60 {
        let term = (s0 / cc).powi(k) * s0.powf(1.0 - alpha) / ((k as f64 + 1.0 - alpha) * cc);
        lower += if k % 2 == 0 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    // ∫_{s1}^∞ s^{-alpha}/(c+s) = sum_k (-1)^k c^k s1^{-alpha-k} / (alpha + k)
    let mut upper = 0.0;
    for k in 0..60 {
        let term = (cc / s1).powi(k) * s1.powf(-alpha) / (alpha + k as f64);
        upper += if k % 2 == 0 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    total += lower + upper;
    (alpha * PI).sin() / PI * total
}

/// Max over the Delta-spectrum of |quadrature - (lambda + eps)^{-alpha}|.
pub fn resolvent_power_formula(mc: &ModularCalculus, alpha: f64, eps: f64, quad_points: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadExponents(format!("alpha = {alpha} not in (0, 1)")));
    }
    if !(eps > 0.0) {
        return Err(Error::BadParameters(format!("eps = {eps} must be positive")));
    }
    let mut worst = 0.0f64;
    for r in mc.flow_spectrum() {
        let lam = r.exp();
        let exact = (lam + eps).powf(-alpha);
        worst = worst.max((resolvent_power_quad(lam, alpha, eps, quad_points) - exact).abs());
    }
    Ok(worst)
}
