//! Evaluation of terms and conditions in a matrix model, with sup/inf estimated
//! by searching operator-norm balls.
//!
//! All evaluation happens in the eigenframe of rho, where every smearing map is a
//! Schur multiplier; multipliers are cached per interpretation.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ast::{ConstName, Condition, Scalar, Term};
use crate::error::{Error, Result};
use crate::model::{c, opnorm, Mat, Operator, C64};
use crate::modular::{g_hat, ModularCalculus};
use crate::sampling::{gaussian_mat, random_hermitian};
use crate::smearing::{dlvp_hat, fejer_hat, tau_direct_e};

const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Sigma(u64),
    G(u64),
    Fejer(u64, u64),
    Dlvp(u64),
    Form(u64),
}

/// A model together with the interpretation of the constant symbols.
pub struct Interpretation {
    mc: ModularCalculus,
    consts: HashMap<(usize, usize), Mat>,
    cache: RefCell<HashMap<Key, Rc<Mat>>>,
}

/// Interpretation data that can cross threads; [`attach`](Self::attach) rebuilds a cache.
#[derive(Clone, Debug)]
pub struct DetachedInterpretation {
    mc: ModularCalculus,
    consts: HashMap<(usize, usize), Mat>,
}

impl DetachedInterpretation {
    pub fn attach(&self) -> Interpretation {
        Interpretation { mc: self.mc.clone(), consts: self.consts.clone(), cache: RefCell::new(HashMap::new()) }
    }
}

impl Clone for Interpretation {
    fn clone(&self) -> Self {
        Interpretation { mc: self.mc.clone(), consts: self.consts.clone(), cache: RefCell::new(HashMap::new()) }
    }
}

impl Interpretation {
    pub fn new(mc: ModularCalculus) -> Self {
        Interpretation { mc, consts: HashMap::new(), cache: RefCell::new(HashMap::new()) }
    }

    /// Adds matrix-unit constants w_{ij} (given in the standard frame).
    pub fn with_constants(mc: ModularCalculus, consts: &BTreeMap<(usize, usize), Operator>) -> Result<Self> {
        let mut out = Self::new(mc);
        for (&k, op) in consts {
            out.mc.check(op)?;
            let e = out.mc.to_eigen(op);
            out.consts.insert(k, e);
        }
        Ok(out)
    }

    /// A thread-safe copy without the multiplier cache.
    pub fn detach(&self) -> DetachedInterpretation {
        DetachedInterpretation { mc: self.mc.clone(), consts: self.consts.clone() }
    }

    pub fn mc(&self) -> &ModularCalculus {
        &self.mc
    }

    pub fn dim(&self) -> usize {
        self.mc.dim()
    }

    pub fn constant_names(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.consts.keys().copied().collect();
        v.sort();
        v
    }

    fn constant_e(&self, name: ConstName) -> Result<Mat> {
        let d = self.dim();
        match name {
            ConstName::Zero => Ok(Mat::zeros(d, d)),
            ConstName::One => Ok(Mat::identity(d, d)),
            ConstName::W(i, j) => {
                self.consts.get(&(i, j)).cloned().ok_or_else(|| Error::UnknownConstant(format!("w_{{{i},{j}}}")))
            }
        }
    }

    fn mult(&self, key: Key) -> Result<Rc<Mat>> {
        if let Some(m) = self.cache.borrow().get(&key) {
            return Ok(m.clone());
        }
        let mc = &self.mc;
        let m = match key {
            Key::Sigma(t) => {
                let t = f64::from_bits(t);
                mc.multiplier_matrix(|r| C64::from_polar(1.0, t * r))?
            }
            Key::G(s) => {
                let s = f64::from_bits(s);
                mc.multiplier_matrix(|r| c(g_hat(s, r), 0.0))?
            }
            Key::Fejer(m, l) => {
                let (m, l) = (f64::from_bits(m), f64::from_bits(l));
                if !(m > 0.0) {
                    return Err(Error::NonPositiveBandwidth(m));
                }
                mc.multiplier_matrix(|r| c(fejer_hat(m, l, r), 0.0))?
            }
            Key::Dlvp(k) => {
                let k = f64::from_bits(k);
                if !(k >= 0.0) {
                    return Err(Error::BadParameters(format!("H_K needs K >= 0, got {k}")));
                }
                mc.multiplier_matrix(|r| c(dlvp_hat(k, r), 0.0))?
            }
            Key::Form(a) => {
                let a = f64::from_bits(a);
                let p = mc.p().to_vec();
                let r = mc.log_ratios().clone();
                let d = mc.dim();
                Mat::from_fn(d, d, |i, j| c((a * r[(i, j)]).exp() * p[j], 0.0))
            }
        };
        let m = Rc::new(m);
        self.cache.borrow_mut().insert(key, m.clone());
        Ok(m)
    }

    fn fejer(&self, m: f64, l: f64, x: &Mat) -> Result<Mat> {
        Ok(x.component_mul(&*self.mult(Key::Fejer(m.to_bits(), l.to_bits()))?))
    }
}

/// Search strategy for sup/inf over D_m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    MultiStartDescent { starts: usize, iters: usize, step: f64 },
    RandomSampling { count: usize },
    StructuredWitness,
}

#[derive(Clone, Debug)]
pub struct BallSearch {
    pub strategy: Strategy,
    pub seed: u64,
    /// Evaluate the built-in structured elements (0, 1, matrix units, unitaries, truncations).
    pub structured: bool,
    /// Additional user-supplied witnesses (standard frame), clamped into each ball.
    pub extra_witnesses: Vec<Operator>,
}

impl Default for BallSearch {
    fn default() -> Self {
        BallSearch {
            strategy: Strategy::MultiStartDescent { starts: 32, iters: 200, step: 0.25 },
            seed: 42,
            structured: true,
            extra_witnesses: Vec::new(),
        }
    }
}

impl BallSearch {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn method(&self) -> &'static str {
        match self.strategy {
            Strategy::MultiStartDescent { .. } => "multi_start_descent",
            Strategy::RandomSampling { .. } => "random_sampling",
            Strategy::StructuredWitness => "structured_witness",
        }
    }
}

/// Result of evaluating a closed condition.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// For a Sup this is the best lower bound found, for an Inf the best upper bound.
    pub value: f64,
    /// Assignment of the outermost quantifier block achieving `value` (standard frame).
    pub witness: Option<Vec<(usize, Operator)>>,
    pub method: &'static str,
    pub evaluations: u64,
}

pub type Assignment = BTreeMap<usize, (Operator, f64)>;

/// Evaluates a term under an assignment of operators with declared radii.
pub fn eval_term(interp: &Interpretation, term: &Term, assignment: &Assignment) -> Result<Operator> {
    let mc = interp.mc();
    let mut env = Env::default();
    for (&i, (op, r)) in assignment {
        mc.check(op)?;
        let norm = op.opnorm();
        if norm > r + DOMAIN_SLACK {
            return Err(Error::DomainViolation { index: i, norm, radius: *r });
        }
        env.set(i, mc.to_eigen(op));
    }
    let search = BallSearch::default();
    let ev = Evaluator::new(interp, &search);
    Ok(mc.from_eigen(ev.term(term, &env)?))
}

/// Evaluates a closed condition; quantifiers are estimated with `search`.
pub fn eval_condition(interp: &Interpretation, cond: &Condition, search: &BallSearch) -> Result<Evaluation> {
    if let Some(&v) = cond.free_vars().iter().next() {
        return Err(Error::UnboundVariable(v));
    }
    let mut ev = Evaluator::new(interp, search);
    let mut env = Env::default();
    let (value, witness) = match cond {
        Condition::Sup { .. } | Condition::Inf { .. } => {
            let (v, w) = ev.quantifier(cond, &mut env, 0)?;
            let mc = interp.mc();
            (v, Some(w.into_iter().map(|(i, m)| (i, mc.from_eigen(m))).collect()))
        }
        _ => (ev.cond(cond, &mut env, 0)?, None),
    };
    Ok(Evaluation { value, witness, method: search.method(), evaluations: ev.evaluations })
}

#[derive(Clone, Debug, Default)]
struct Env {
    vals: Vec<Option<Mat>>,
}

impl Env {
    fn set(&mut self, i: usize, m: Mat) {
        if self.vals.len() <= i {
            self.vals.resize(i + 1, None);
        }
        self.vals[i] = Some(m);
    }

    fn take(&mut self, i: usize) -> Option<Mat> {
        self.vals.get_mut(i).and_then(|v| v.take())
    }

    fn restore(&mut self, i: usize, m: Option<Mat>) {
        if let Some(m) = m {
            self.set(i, m);
        } else if let Some(v) = self.vals.get_mut(i) {
            *v = None;
        }
    }

    fn get(&self, i: usize) -> Result<&Mat> {
        self.vals.get(i).and_then(|v| v.as_ref()).ok_or(Error::UnboundVariable(i))
    }
}

struct Budget {
    starts: usize,
    iters: usize,
    step: f64,
    samples: usize,
    full_structured: bool,
}

struct Evaluator<'a> {
    interp: &'a Interpretation,
    search: &'a BallSearch,
    evaluations: u64,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [a, b] {
        h ^= v.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    }
    h
}

fn clamp_ball(x: Mat, m: f64) -> Mat {
    let s = opnorm(&x);
    if s > m && s > 0.0 {
        x * c(m / s, 0.0)
    } else {
        x
    }
}

fn random_ball_e<R: Rng>(d: usize, m: f64, rng: &mut R) -> Mat {
    let g = gaussian_mat(d, rng);
    let s = opnorm(&g);
    let target = m * rng.gen_range(0.05..=1.0);
    if s > 0.0 {
        g * c(target / s, 0.0)
    } else {
        g
    }
}

fn unitary_e<R: Rng>(d: usize, rng: &mut R) -> Mat {
    let h = random_hermitian(d, rng);
    let eig = h.symmetric_eigen();
    let phases = Mat::from_diagonal(&eig.eigenvalues.map(|v| C64::from_polar(1.0, v)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

impl<'a> Evaluator<'a> {
    fn new(interp: &'a Interpretation, search: &'a BallSearch) -> Self {
        Evaluator { interp, search, evaluations: 0 }
    }

    fn term(&self, t: &Term, env: &Env) -> Result<Mat> {
        let it = self.interp;
        Ok(match t {
            Term::Var(i) => env.get(*i)?.clone(),
            Term::Const(name) => it.constant_e(*name)?,
            Term::Scale(z, a) => self.term(a, env)? * *z,
            Term::Add(a, b) => self.term(a, env)? + self.term(b, env)?,
            Term::Lin(v) => {
                let d = it.dim();
                let mut acc = Mat::zeros(d, d);
                for (z, a) in v {
                    acc += self.term(a, env)? * *z;
                }
                acc
            }
            Term::Star(a) => self.term(a, env)?.adjoint(),
            Term::Sigma(s, a) => self.term(a, env)?.component_mul(&*it.mult(Key::Sigma(s.to_bits()))?),
            Term::Gmap(s, a) => self.term(a, env)?.component_mul(&*it.mult(Key::G(s.to_bits()))?),
            Term::Fejer(m, l, a) => it.fejer(*m, *l, &self.term(a, env)?)?,
            Term::Dlvp(k, a) => self.term(a, env)?.component_mul(&*it.mult(Key::Dlvp(k.to_bits()))?),
            Term::SmearProd(k, l, a, b) => {
                let x = it.fejer(*k, 0.0, &self.term(a, env)?)?;
                let y = it.fejer(*l, 0.0, &self.term(b, env)?)?;
                x * y
            }
            Term::BigSmearProd(k, l, a, b) => {
                let (k, l) = (*k, *l);
                if !(k >= 0.0 && l >= 0.0) {
                    return Err(Error::BadParameters("M_(K,L) needs K, L >= 0".into()));
                }
                // M_(K,L)(a, b) = H_{K+1}(a) H_{L+1}(b)
                let x = self.term(a, env)?;
                let y = self.term(b, env)?;
                let hx = x.component_mul(&*it.mult(Key::Dlvp((k + 1.0).to_bits()))?);
                let hy = y.component_mul(&*it.mult(Key::Dlvp((l + 1.0).to_bits()))?);
                hx * hy
            }
            Term::TauPoly(spec, a) => tau_direct_e(it.mc(), &spec.poly, &spec.lambda, &spec.bands, &self.term(a, env)?)?,
        })
    }

    fn scalar(&mut self, s: &Scalar, env: &mut Env, depth: usize) -> Result<C64> {
        let it = self.interp;
        Ok(match s {
            Scalar::Phi(t) => it.mc().state_eigen(&self.term(t, env)?),
            Scalar::Form { alpha, k, l, x, y } => {
                let a = it.fejer(*k, 0.0, &self.term(x, env)?)?;
                let b = it.fejer(*l, 0.0, &self.term(y, env)?)?;
                let w = it.mult(Key::Form(alpha.to_bits()))?;
                let mut acc = C64::default();
                for ((wa, xa), yb) in w.iter().zip(a.iter()).zip(b.iter()) {
                    acc += xa.conj() * yb * wa;
                }
                acc
            }
            Scalar::Const(z) => *z,
            Scalar::Lin(v) => {
                let mut acc = C64::default();
                for (z, x) in v {
                    acc += z * self.scalar(x, env, depth)?;
                }
                acc
            }
            Scalar::Conj(x) => self.scalar(x, env, depth)?.conj(),
            Scalar::Mul(a, b) => self.scalar(a, env, depth)? * self.scalar(b, env, depth)?,
            Scalar::Real(cnd) => c(self.cond(cnd, env, depth)?, 0.0),
        })
    }

    fn cond(&mut self, cnd: &Condition, env: &mut Env, depth: usize) -> Result<f64> {
        Ok(match cnd {
            Condition::Re(s) => self.scalar(s, env, depth)?.re,
            Condition::Im(s) => self.scalar(s, env, depth)?.im,
            Condition::Modulus(s) => self.scalar(s, env, depth)?.norm(),
            Condition::Dist(a, b) => {
                let d = self.term(a, env)? - self.term(b, env)?;
                self.interp.mc().star_eigen(&d)
            }
            Condition::Const(v) => *v,
            Condition::Affine(c0, v) => {
                let mut acc = *c0;
                for (w, x) in v {
                    acc += w * self.cond(x, env, depth)?;
                }
                acc
            }
            Condition::Max(v) => {
                let mut acc = f64::NEG_INFINITY;
                for x in v {
                    acc = acc.max(self.cond(x, env, depth)?);
                }
                acc
            }
            Condition::Min(v) => {
                let mut acc = f64::INFINITY;
                for x in v {
                    acc = acc.min(self.cond(x, env, depth)?);
                }
                acc
            }
            Condition::Abs(a) => self.cond(a, env, depth)?.abs(),
            Condition::Sqrt(a) => self.cond(a, env, depth)?.max(0.0).sqrt(),
            Condition::Mul(a, b) => self.cond(a, env, depth)? * self.cond(b, env, depth)?,
            Condition::GramDefect(rows) => {
                let n = rows.len();
                let mut g = Mat::zeros(n, n);
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::LengthMismatch(n, row.len()));
                    }
                    for (j, s) in row.iter().enumerate() {
                        g[(i, j)] = self.scalar(s, env, depth)?;
                    }
                }
                let h = (&g + g.adjoint()) * c(0.5, 0.0);
                let lmin = h.symmetric_eigenvalues().min();
                (-lmin).max(0.0)
            }
            Condition::Sup { .. } | Condition::Inf { .. } => self.quantifier(cnd, env, depth)?.0,
        })
    }

    fn budget(&self, depth: usize) -> Budget {
        let nested = depth >= 1;
        let (starts, iters, step, samples) = match self.search.strategy {
            Strategy::MultiStartDescent { starts, iters, step } => (starts, iters, step, 0),
            Strategy::RandomSampling { count } => (0, 0, 0.0, count),
            Strategy::StructuredWitness => (0, 0, 0.0, 0),
        };
        if nested {
            Budget {
                starts: if starts > 0 { (starts / 16).max(1) } else { 0 },
                iters: if iters > 0 { (iters / 20).max(8) } else { 0 },
                step,
                samples: if samples > 0 { (samples / 16).max(2) } else { 0 },
                full_structured: false,
            }
        } else {
            Budget { starts, iters, step, samples, full_structured: true }
        }
    }

    fn structured(&self, m: f64, rng: &mut ChaCha8Rng, full: bool) -> Vec<Mat> {
        let d = self.interp.dim();
        let mut out = vec![Mat::zeros(d, d), Mat::identity(d, d) * c(m, 0.0)];
        for i in 0..d {
            for j in 0..d {
                if full || i == j {
                    let mut e = Mat::zeros(d, d);
                    e[(i, j)] = c(m, 0.0);
                    out.push(e);
                }
            }
        }
        for i in 0..d {
            for j in i + 1..d {
                let mut e = Mat::zeros(d, d);
                e[(i, j)] = c(m, 0.0);
                e[(j, i)] = c(m, 0.0);
                out.push(e);
            }
        }
        for k in self.interp.constant_names() {
            if let Ok(w) = self.interp.constant_e(ConstName::W(k.0, k.1)) {
                out.push(clamp_ball(w * c(m, 0.0), m));
            }
        }
        let reps = if full { 3 } else { 1 };
        for _ in 0..reps {
            out.push(unitary_e(d, rng) * c(m, 0.0));
            let phases: Vec<C64> = (0..d).map(|_| C64::from_polar(m, rng.gen_range(0.0..std::f64::consts::TAU))).collect();
            out.push(Mat::from_diagonal(&nalgebra::DVector::from_vec(phases)));
        }
        if full {
            let r = self.interp.mc().log_ratios().clone();
            for a in [0.0, std::f64::consts::LN_2 + 1e-9] {
                let x = gaussian_mat(d, rng);
                let t = Mat::from_fn(d, d, |i, j| if r[(i, j)].abs() <= a { x[(i, j)] } else { C64::default() });
                let s = opnorm(&t);
                if s > 0.0 {
                    out.push(t * c(m / s, 0.0));
                }
            }
        }
        out
    }

    fn eval_at(
        &mut self,
        vars: &[(usize, f64)],
        pts: &[Mat],
        body: &Condition,
        env: &mut Env,
        depth: usize,
        sign: f64,
    ) -> Result<f64> {
        for (&(v, _), p) in vars.iter().zip(pts) {
            env.set(v, p.clone());
        }
        self.evaluations += 1;
        let val = self.cond(body, env, depth + 1)?;
        Ok(if val.is_nan() { f64::NEG_INFINITY } else { sign * val })
    }

    /// Evaluates a maximal block of like quantifiers; returns the value and the block's best point.
    fn quantifier(&mut self, cnd: &Condition, env: &mut Env, depth: usize) -> Result<(f64, Vec<(usize, Mat)>)> {
        let is_sup = matches!(cnd, Condition::Sup { .. });
        let mut vars = Vec::new();
        let mut cur = cnd;
        loop {
            match cur {
                Condition::Sup { var, radius, body } if is_sup => {
                    vars.push((*var, *radius));
                    cur = body;
                }
                Condition::Inf { var, radius, body } if !is_sup => {
                    vars.push((*var, *radius));
                    cur = body;
                }
                _ => break,
            }
        }
        for &(v, r) in &vars {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::BadRange(format!("radius {r} for x{v}")));
            }
        }
        let body = cur;
        let sign = if is_sup { 1.0 } else { -1.0 };
        let saved: Vec<Option<Mat>> = vars.iter().map(|&(v, _)| env.take(v)).collect();
        let res = self.search_block(&vars, body, env, depth, sign);
        for (&(v, _), s) in vars.iter().zip(saved) {
            env.restore(v, s);
        }
        let (best, pts) = res?;
        Ok((sign * best, vars.iter().map(|&(v, _)| v).zip(pts).collect()))
    }

    fn search_block(
        &mut self,
        vars: &[(usize, f64)],
        body: &Condition,
        env: &mut Env,
        depth: usize,
        sign: f64,
    ) -> Result<(f64, Vec<Mat>)> {
        let d = self.interp.dim();
        let budget = self.budget(depth);
        let seed = self.search.seed;
        let mut rng_struct = ChaCha8Rng::seed_from_u64(mix(seed, depth as u64, 1));
        let mut rng_rand = ChaCha8Rng::seed_from_u64(mix(seed, depth as u64, 2));
        let k = vars.len();

        let mut best = f64::NEG_INFINITY;
        let mut best_pts: Vec<Mat> = vars.iter().map(|_| Mat::zeros(d, d)).collect();
        let consider = |val: f64, pts: &[Mat], best: &mut f64, best_pts: &mut Vec<Mat>| {
            if val > *best {
                *best = val;
                *best_pts = pts.to_vec();
            }
        };

        // Structured witnesses.
        let mut struct_best = f64::NEG_INFINITY;
        let mut struct_pts: Option<Vec<Mat>> = None;
        let use_structured = self.search.structured || matches!(self.search.strategy, Strategy::StructuredWitness);
        if use_structured {
            let lists: Vec<Vec<Mat>> =
                vars.iter().map(|&(_, m)| self.structured(m, &mut rng_struct, budget.full_structured)).collect();
            let len = lists[0].len();
            let mut tuples: Vec<Vec<Mat>> = (0..len).map(|i| lists.iter().map(|l| l[i.min(l.len() - 1)].clone()).collect()).collect();
            if k > 1 {
                let extra = if budget.full_structured { 64 } else { 8 };
                for _ in 0..extra {
                    tuples.push(lists.iter().map(|l| l[rng_struct.gen_range(0..l.len())].clone()).collect());
                }
            }
            for t in tuples {
                let v = self.eval_at(vars, &t, body, env, depth, sign)?;
                if v > struct_best {
                    struct_best = v;
                    struct_pts = Some(t.clone());
                }
                consider(v, &t, &mut best, &mut best_pts);
            }
        }

        // Random sampling.
        for _ in 0..budget.samples {
            let t: Vec<Mat> = vars.iter().map(|&(_, m)| random_ball_e(d, m, &mut rng_rand)).collect();
            let v = self.eval_at(vars, &t, body, env, depth, sign)?;
            consider(v, &t, &mut best, &mut best_pts);
        }

        // Multi-start descent: random starts, then a refinement from the best structured witness.
        if budget.iters > 0 {
            let mut starts: Vec<Vec<Mat>> = (0..budget.starts)
                .map(|_| vars.iter().map(|&(_, m)| random_ball_e(d, m, &mut rng_rand)).collect())
                .collect();
            if let Some(p) = struct_pts.clone() {
                starts.push(p);
            }
            for start in starts {
                let (v, p) = self.descend(vars, start, body, env, depth, sign, &budget, &mut rng_rand)?;
                consider(v, &p, &mut best, &mut best_pts);
            }
        }

        // User-supplied witnesses are only evaluated, so adding them can only improve the estimate.
        if !self.search.extra_witnesses.is_empty() {
            let mc = self.interp.mc();
            let extra: Vec<Mat> = self
                .search
                .extra_witnesses
                .iter()
                .filter(|w| w.dim() == d)
                .map(|w| mc.to_eigen(w))
                .collect();
            for w in extra {
                let t: Vec<Mat> = vars.iter().map(|&(_, m)| clamp_ball(w.clone(), m)).collect();
                let v = self.eval_at(vars, &t, body, env, depth, sign)?;
                consider(v, &t, &mut best, &mut best_pts);
            }
        }
        Ok((best, best_pts))
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &mut self,
        vars: &[(usize, f64)],
        start: Vec<Mat>,
        body: &Condition,
        env: &mut Env,
        depth: usize,
        sign: f64,
        budget: &Budget,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<Mat>)> {
        let d = self.interp.dim();
        let mut cur = start;
        let mut fcur = self.eval_at(vars, &cur, body, env, depth, sign)?;
        let scale = vars.iter().map(|v| v.1).fold(0.0, f64::max).max(1e-12);
        let mut h = budget.step * scale;
        for _ in 0..budget.iters {
            if h < 1e-7 * scale {
                break;
            }
            let dir: Vec<Mat> = vars
                .iter()
                .map(|_| {
                    let g = gaussian_mat(d, rng);
                    let n = g.norm();
                    if n > 0.0 {
                        g * c(1.0 / n, 0.0)
                    } else {
                        g
                    }
                })
                .collect();
            let plus: Vec<Mat> =
                cur.iter().zip(&dir).zip(vars).map(|((x, e), &(_, m))| clamp_ball(x + e * c(h * m / scale, 0.0), m)).collect();
            let fp = self.eval_at(vars, &plus, body, env, depth, sign)?;
            let minus: Vec<Mat> =
                cur.iter().zip(&dir).zip(vars).map(|((x, e), &(_, m))| clamp_ball(x - e * c(h * m / scale, 0.0), m)).collect();
            let fm = self.eval_at(vars, &minus, body, env, depth, sign)?;
            if fp > fcur && fp >= fm {
                cur = plus;
                fcur = fp;
                h *= 1.5;
            } else if fm > fcur {
                cur = minus;
                fcur = fm;
                h *= 1.5;
            } else {
                h *= 0.5;
            }
        }
        Ok((fcur, cur))
    }
}
