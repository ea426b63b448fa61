//! Randomized certification batteries for the norm, continuity, spectral and form lemmas.
//!
//! Every battery draws `samples` operators per parameter point from a seeded RNG and
//! reports, per check, the number of violations and the worst-case slack.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{form_recursion, form_top_level, riemann_sigma_f};
use crate::error::{Error, Result};
use crate::metrics::{norm_bundle, norm_star_spectral, norm_star_variational, normg_identity_check, VariationalMode};
use crate::model::Operator;
use crate::modular::ModularCalculus;
use crate::sampling::random_operator;
use crate::smearing::{spectral_membership_test, KernelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lemma {
    ContProd,
    NormG,
    ContMod,
    Spectral,
    Forms,
}

impl Lemma {
    pub const ALL: [Lemma; 5] = [Lemma::ContProd, Lemma::NormG, Lemma::ContMod, Lemma::Spectral, Lemma::Forms];

    pub fn name(&self) -> &'static str {
        match self {
            Lemma::ContProd => "contprod",
            Lemma::NormG => "normg",
            Lemma::ContMod => "contmod",
            Lemma::Spectral => "spectral",
            Lemma::Forms => "forms",
        }
    }
}

impl std::str::FromStr for Lemma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::BadParameters(format!("unknown lemma {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaOptions {
    pub samples: usize,
    pub seed: u64,
    /// Restricts the forms battery to one exponent pair; both must be given together.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions { samples: 32, seed: 42, alpha: None, beta: None }
    }
}

/// One inequality or identity checked over many trials.
///
/// `worst_margin` is min over trials of (allowed − observed); negative means violated.
/// `worst_ratio` is max over trials of observed / allowed (0 when allowed is 0 and observed is 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub worst_ratio: f64,
}

impl CheckSummary {
    fn new(name: impl Into<String>) -> Self {
        CheckSummary { name: name.into(), trials: 0, violations: 0, worst_margin: f64::INFINITY, worst_ratio: 0.0 }
    }

    /// Records `observed <= allowed`.
    fn record(&mut self, observed: f64, allowed: f64) {
        self.trials += 1;
        let margin = allowed - observed;
        if !(margin >= 0.0) {
            self.violations += 1;
        }
        self.worst_margin = self.worst_margin.min(if margin.is_nan() { f64::NEG_INFINITY } else { margin });
        let ratio = if allowed > 0.0 {
            observed / allowed
        } else if observed > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        self.worst_ratio = self.worst_ratio.max(ratio);
    }

    /// Records a yes/no agreement.
    fn record_bool(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 }, 0.0);
    }

    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: Lemma,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<CheckSummary>,
    pub pass: bool,
}

impl LemmaReport {
    pub fn worst_margin(&self) -> f64 {
        self.checks.iter().map(|c| c.worst_margin).fold(f64::INFINITY, f64::min)
    }
}

fn sample(mc: &ModularCalculus, rng: &mut ChaCha8Rng) -> Operator {
    random_operator(mc.dim(), rng)
}

pub fn verify_lemma(mc: &ModularCalculus, lemma: Lemma, opts: &LemmaOptions) -> Result<LemmaReport> {
    if opts.samples == 0 {
        return Err(Error::BadParameters("samples must be positive".into()));
    }
    if lemma != Lemma::Forms && (opts.alpha.is_some() || opts.beta.is_some()) {
        return Err(Error::BadParameters("--alpha/--beta only apply to the forms lemma".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let checks = match lemma {
        Lemma::NormG => normg(mc, opts.samples, &mut rng)?,
        Lemma::ContProd => contprod(mc, opts.samples, &mut rng)?,
        Lemma::ContMod => contmod(mc, opts.samples, &mut rng)?,
        Lemma::Spectral => spectral(mc, opts.samples, &mut rng, opts.seed)?,
        Lemma::Forms => forms(mc, opts, &mut rng)?,
    };
    let pass = checks.iter().all(CheckSummary::pass);
    Ok(LemmaReport { lemma, samples: opts.samples, seed: opts.seed, checks, pass })
}

fn normg(mc: &ModularCalculus, samples: usize, rng: &mut ChaCha8Rng) -> Result<Vec<CheckSummary>> {
    let mut c = CheckSummary::new("2||x||* = ||G_0(x)||#");
    for _ in 0..samples {
        let x = sample(mc, rng);
        let (lhs, rhs) = normg_identity_check(mc, &x)?;
        c.record((lhs - rhs).abs(), 1e-10 * (1.0 + lhs / 2.0));
    }
    Ok(vec![c])
}

fn contprod(mc: &ModularCalculus, samples: usize, rng: &mut ChaCha8Rng) -> Result<Vec<CheckSummary>> {
    let mut out = Vec::new();
    for a in [0.5, 1.0, 2.0_f64] {
        let mut c = CheckSummary::new(format!("||x'y||* <= C_a ||x'|| ||y||*, a = {a}"));
        let ca = 2.0 * a.exp() + (a / 2.0).exp();
        for _ in 0..samples {
            let x = mc.spectral_truncate(a, &sample(mc, rng))?;
            let y = sample(mc, rng);
            let lhs = norm_star_spectral(mc, &x.mul(&y))?;
            let rhs = ca * x.opnorm() * norm_star_spectral(mc, &y)?;
            c.record(lhs, rhs * (1.0 + 1e-12));
        }
        out.push(c);
    }
    Ok(out)
}

/// Kernels exercised by the Riemann-sum check.
pub const RIEMANN_KERNELS: [KernelSpec; 4] = [
    KernelSpec::Fejer { m: 1.0, l: 0.0 },
    KernelSpec::Fejer { m: 2.0, l: 1.0 },
    KernelSpec::G { s: 0.0 },
    KernelSpec::G { s: 0.5 },
];

fn contmod(mc: &ModularCalculus, samples: usize, rng: &mut ChaCha8Rng) -> Result<Vec<CheckSummary>> {
    let mut out = Vec::new();
    for t in [0.01, 0.1, 1.0_f64] {
        let mut c = CheckSummary::new(format!("||sigma_t(x) - x||* <= 2|t| ||x||#, t = {t}"));
        for _ in 0..samples {
            let x = sample(mc, rng);
            let lhs = norm_star_spectral(mc, &mc.modular_flow(t, &x)?.sub(&x))?;
            let rhs = 2.0 * t.abs() * norm_bundle(mc, &x)?.sharp;
            c.record(lhs, rhs * (1.0 + 1e-12));
        }
        out.push(c);
    }
    let mut c = CheckSummary::new("Riemann sigma_f(x), n = 2..6");
    for _ in 0..samples {
        let x = sample(mc, rng);
        for spec in &RIEMANN_KERNELS {
            let exact = spec.apply(mc, &x)?;
            for n in 2..=6 {
                let (approx, bound) = riemann_sigma_f(mc, spec, n, &x)?;
                c.record(norm_star_spectral(mc, &approx.sub(&exact))?, bound);
            }
        }
    }
    out.push(c);
    Ok(out)
}

fn spectral(mc: &ModularCalculus, samples: usize, rng: &mut ChaCha8Rng, seed: u64) -> Result<Vec<CheckSummary>> {
    let mut exact = CheckSummary::new("|variational(exact) - spectral| <= 1e-10 (1 + ||x||*)");
    let mut numeric = CheckSummary::new("spectral - variational(numeric) <= 1e-9");
    let mut member = CheckSummary::new("membership test agrees with Arveson spectrum");
    let spread = mc.flow_spectrum().iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    for i in 0..samples {
        let x = sample(mc, rng);
        let s = norm_star_spectral(mc, &x)?;
        let (v, _) = norm_star_variational(mc, &x, VariationalMode::ExactMinimizer)?;
        exact.record((v - s).abs(), 1e-10 * (1.0 + s));
        let mode = VariationalMode::NumericSearch { starts: 2, max_iters: 200, seed: seed.wrapping_add(i as u64) };
        let (vn, _) = norm_star_variational(mc, &x, mode)?;
        numeric.record(s - vn, 1e-9);
        for k in 0..=2u32 {
            let l_max = 2 * k + spread.ceil() as u32 + 2;
            // One generic element and one truncated to [-K, K].
            for y in [x.clone(), mc.spectral_truncate(k as f64, &x)?] {
                let inside = mc.arveson_spectrum(&y, 1e-10).iter().all(|r| r.abs() <= k as f64 + 1e-9);
                member.record_bool(spectral_membership_test(mc, k, &y, l_max)? == inside);
            }
        }
    }
    Ok(vec![exact, numeric, member])
}

/// Default exponent sweep of the forms battery.
pub const FORM_ALPHAS: [f64; 2] = [0.25, 1.0 / 3.0];
pub const FORM_BETAS: [f64; 2] = [0.0, 1.0 / 3.0];

fn forms(mc: &ModularCalculus, opts: &LemmaOptions, rng: &mut ChaCha8Rng) -> Result<Vec<CheckSummary>> {
    let pairs: Vec<(f64, f64)> = match (opts.alpha, opts.beta) {
        (None, None) => FORM_ALPHAS.iter().flat_map(|&a| FORM_BETAS.iter().map(move |&b| (a, b))).collect(),
        (Some(a), Some(b)) => vec![(a, b)],
        (Some(a), None) => vec![(a, 0.0)],
        (None, Some(_)) => return Err(Error::BadParameters("--beta requires --alpha".into())),
    };
    let m = 1.0;
    let (k, l) = (1.0, 2.0);
    let mut out = Vec::new();
    for &(alpha, beta) in &pairs {
        let mut c = CheckSummary::new(format!("form recursion, alpha = {alpha:.4}, beta = {beta:.4}"));
        for _ in 0..opts.samples {
            let x = crate::sampling::random_in_ball(mc.dim(), m, rng);
            let y = crate::sampling::random_in_ball(mc.dim(), m, rng);
            for n in 2..=5 {
                let fc = form_recursion(mc, alpha, beta, n, k, l, m, &x, &y)?;
                c.record(fc.error(), fc.bound);
            }
        }
        out.push(c);
    }
    let alphas: Vec<f64> = match opts.alpha {
        Some(a) => vec![a],
        None => FORM_ALPHAS.to_vec(),
    };
    for alpha in alphas {
        let mut c = CheckSummary::new(format!("form top level, alpha = {alpha:.4}"));
        for _ in 0..opts.samples {
            let x = crate::sampling::random_in_ball(mc.dim(), m, rng);
            let y = crate::sampling::random_in_ball(mc.dim(), m, rng);
            for n in 2..=5 {
                let fc = form_top_level(mc, alpha, n, l, k, m, &x, &y)?;
                c.record(fc.error(), fc.bound);
            }
        }
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WStarModel;
    use crate::sampling::random_model;
    use proptest::prelude::*;

    fn mc(p: &[f64]) -> ModularCalculus {
        ModularCalculus::new(WStarModel::from_eigenvalues(p).unwrap())
    }

    fn opts(samples: usize) -> LemmaOptions {
        LemmaOptions { samples, ..Default::default() }
    }

    #[test]
    fn every_battery_passes_on_a_non_tracial_qutrit() {
        let m = mc(&[0.6, 0.3, 0.1]);
        for lemma in Lemma::ALL {
            let r = verify_lemma(&m, lemma, &opts(6)).unwrap();
            assert!(r.pass, "{:?}: {:?}", lemma, r.checks);
            assert!(r.checks.iter().all(|c| c.trials > 0));
        }
    }

    #[test]
    fn batteries_are_deterministic() {
        let m = mc(&[2.0 / 3.0, 1.0 / 3.0]);
        let a = verify_lemma(&m, Lemma::ContMod, &opts(4)).unwrap();
        let b = verify_lemma(&m, Lemma::ContMod, &opts(4)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn exponent_misuse_is_rejected() {
        let m = mc(&[0.5, 0.5]);
        let bad = LemmaOptions { alpha: Some(0.4), beta: Some(0.7), ..opts(2) };
        assert!(matches!(verify_lemma(&m, Lemma::Forms, &bad), Err(Error::BadExponents(_))));
        let stray = LemmaOptions { alpha: Some(0.25), ..opts(2) };
        assert!(matches!(verify_lemma(&m, Lemma::NormG, &stray), Err(Error::BadParameters(_))));
        assert!(verify_lemma(&m, Lemma::Forms, &stray).unwrap().pass);
    }

    #[test]
    fn lemma_names_round_trip() {
        for l in Lemma::ALL {
            assert_eq!(l.name().parse::<Lemma>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{}\"", l.name()));
        }
        assert!("nope".parse::<Lemma>().is_err());
    }

    #[test]
    fn summary_tracks_violations() {
        let mut c = CheckSummary::new("t");
        c.record(0.5, 1.0);
        c.record(2.0, 1.0);
        assert_eq!((c.trials, c.violations), (2, 1));
        assert_eq!(c.worst_margin, -1.0);
        assert_eq!(c.worst_ratio, 2.0);
        c.record(f64::NAN, 1.0);
        assert_eq!(c.violations, 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn normg_and_contprod_hold_on_random_dense_models(seed in any::<u64>(), n in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = ModularCalculus::new(random_model(n, &mut rng));
            let o = LemmaOptions { samples: 3, seed, ..Default::default() };
            for lemma in [Lemma::NormG, Lemma::ContProd] {
                let r = verify_lemma(&m, lemma, &o).unwrap();
                prop_assert!(r.pass, "{:?}", r.checks);
            }
        }
    }
}
