//! Axioms (1)–(27) as finite families of closed conditions.
//!
//! Every schema is instantiated over the parameter tuples of an [`Instantiation`]. A
//! universal axiom holds when its condition evaluates to 0; an existential one when a
//! witness drives its infimum to 0.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use super::ast::{Condition, Scalar, TauSpec, Term};
use crate::discretization::{axiom16_bound, axiom18_bound, axiom19_bound, axiom20_bound, fejer_time, grid};
use crate::error::{Error, Result};
use crate::model::{c, C64};
use crate::smearing::{Letter, StarPoly};

pub const AXIOM_COUNT: u32 = 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomKind {
    /// sup-type or quantifier-free: passes when the value is at most the tolerance.
    Universal,
    /// inf-type: passes when a witness with value at most the threshold is found.
    Existential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomInstance {
    pub id: String,
    pub axiom: u32,
    pub kind: AxiomKind,
    pub condition: Condition,
    /// True for instances no finite-dimensional model can satisfy.
    pub finite_obstruction: bool,
}

/// Which members of each axiom schema to instantiate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instantiation {
    pub times: Vec<f64>,
    pub bands: Vec<f64>,
    pub riemann_n: Vec<u32>,
    pub scalars: Vec<(f64, f64)>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Radius m of the quantified balls.
    pub radius: f64,
    /// Spacing of the lattice Gamma = gamma * Z for axioms (21)–(23).
    pub gamma: Option<f64>,
    /// Explicit N for axiom (23); defaults to gamma / 2.
    pub n23: Option<f64>,
    /// Number of matrix-unit levels for axioms (24)–(27); 0 disables them.
    pub levels: usize,
    /// Truncation renormalization c: phi(w_jj) = c 2^{-j-1}.
    pub renorm: f64,
    /// Band N of the corner shorthand w_kk F_N(x) w_jj.
    pub corner_band: f64,
}

impl Default for Instantiation {
    fn default() -> Self {
        Instantiation {
            times: vec![0.0, 0.25, -0.25, 1.0, -1.0],
            bands: vec![1.0, 2.0, 4.0],
            riemann_n: vec![2, 3],
            scalars: vec![(0.5, 0.3), (-1.2, 0.0), (0.0, 1.0)],
            alphas: vec![0.25, 1.0 / 3.0],
            betas: vec![0.0, 1.0 / 3.0],
            radius: 1.0,
            gamma: None,
            n23: None,
            levels: 0,
            renorm: 1.0,
            corner_band: 1.0,
        }
    }
}

fn x(i: usize) -> Term {
    Term::var(i)
}

fn d(a: Term, b: Term) -> Condition {
    Condition::dist(a, b)
}

fn phi(t: Term) -> Scalar {
    Scalar::phi(t)
}

fn sc(z: C64) -> Scalar {
    Scalar::Const(z)
}

fn modulus(s: Scalar) -> Condition {
    Condition::modulus(s)
}

/// `|a - b|` for scalars.
fn mod_diff(a: Scalar, b: Scalar) -> Condition {
    modulus(a.minus(b))
}

fn fmt_f(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if (r - r.round()).abs() < 1e-12 {
        format!("{}", r.round() as i64)
    } else {
        format!("{r}")
    }
}

fn fmt_list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|&x| fmt_f(x)).collect::<Vec<_>>().join(","))
}

fn fmt_c(z: C64) -> String {
    if z.im == 0.0 {
        fmt_f(z.re)
    } else {
        format!("{}{}{}i", fmt_f(z.re), if z.im < 0.0 { "-" } else { "+" }, fmt_f(z.im.abs()))
    }
}

struct Builder {
    axiom: u32,
    out: Vec<AxiomInstance>,
}

impl Builder {
    fn new(axiom: u32) -> Self {
        Builder { axiom, out: Vec::new() }
    }

    fn push(&mut self, params: &str, condition: Condition) {
        let kind = if condition.is_inf_type() { AxiomKind::Existential } else { AxiomKind::Universal };
        let id = if params.is_empty() { format!("A{}", self.axiom) } else { format!("A{}[{}]", self.axiom, params) };
        self.out.push(AxiomInstance { id, axiom: self.axiom, kind, condition, finite_obstruction: false });
    }

    fn obstructed(mut self) -> Self {
        for i in &mut self.out {
            i.finite_obstruction = true;
        }
        self
    }
}

impl Instantiation {
    fn scalars_c(&self) -> Vec<C64> {
        self.scalars.iter().map(|&(a, b)| c(a, b)).collect()
    }

    fn band(&self, i: usize) -> f64 {
        self.bands[i % self.bands.len()]
    }

    fn validate(&self) -> Result<()> {
        if self.bands.is_empty() || self.scalars.is_empty() || self.times.is_empty() {
            return Err(Error::BadInstantiation("bands, scalars and times must be non-empty".into()));
        }
        if self.bands.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::BadInstantiation("bands must be positive".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::BadInstantiation("radius must be positive".into()));
        }
        Ok(())
    }

    fn gamma(&self, axiom: u32) -> Result<f64> {
        match self.gamma {
            Some(g) if g > 0.0 && g.is_finite() => Ok(g),
            Some(g) => Err(Error::BadInstantiation(format!("axiom ({axiom}) needs gamma > 0, got {g}"))),
            None => Err(Error::BadInstantiation(format!("axiom ({axiom}) needs the lattice spacing gamma"))),
        }
    }

    fn levels(&self, axiom: u32) -> Result<usize> {
        if self.levels < 1 {
            return Err(Error::BadInstantiation(format!("axiom ({axiom}) needs matrix-unit levels >= 1")));
        }
        if !(self.renorm > 0.0) {
            return Err(Error::BadInstantiation("renormalization must be positive".into()));
        }
        Ok(self.levels)
    }
}

/// The Riemann sum (1/n^2) sum_k w(t_k) sigma_{t_k}(x) as a linear-combination term.
fn riemann_term(n: u32, x: Term, w: impl Fn(f64) -> C64) -> Term {
    let h = 1.0 / (n as f64 * n as f64);
    Term::Lin(grid(n).map(|t| (w(t) * h, x.clone().sigma(t))).collect())
}

/// (1/n^2)(cos(alpha pi)/2pi) sum_k e^{alpha t_k} E_{beta,K,L}(G_{t_k}(x), y).
fn form_sum(alpha: f64, beta: f64, k: f64, l: f64, n: u32, xx: Term, yy: Term) -> Scalar {
    let h = 1.0 / (n as f64 * n as f64);
    let pre = (alpha * PI).cos() / (2.0 * PI);
    Scalar::Lin(
        grid(n)
            .map(|t| (c(h * pre * (alpha * t).exp(), 0.0), Scalar::form(beta, k, l, xx.clone().g(t), yy.clone())))
            .collect(),
    )
}

/// The dotted polynomial p^.(sum_i lambda_i F_{N_i}(x)) built from nested M-products.
pub fn dotted_polynomial(p: &StarPoly, lambda: &[f64], bands: &[f64], xx: &Term) -> Term {
    let letter = |l: Letter| if l == Letter::X { xx.clone() } else { xx.clone().star() };
    let r = lambda.len();
    let mut terms = Vec::new();
    for m in &p.terms {
        let coef = c(m.coef.0, m.coef.1);
        let k = m.word.len();
        if k == 0 {
            terms.push((coef, Term::one()));
            continue;
        }
        let total = r.pow(k as u32);
        for mut code in 0..total {
            let mut idx = vec![0usize; k];
            for slot in idx.iter_mut().rev() {
                *slot = code % r;
                code /= r;
            }
            let weight: f64 = idx.iter().map(|&i| lambda[i]).product();
            let t = if k == 1 {
                letter(m.word[0]).fejer(bands[idx[0]])
            } else {
                let mut inner = Term::m(bands[idx[k - 2]], bands[idx[k - 1]], letter(m.word[k - 2]), letter(m.word[k - 1]));
                let mut tail = bands[idx[k - 2]] + bands[idx[k - 1]];
                for j in (0..k - 2).rev() {
                    let nj = bands[idx[j]];
                    inner = Term::big_m(nj, tail, letter(m.word[j]).fejer(nj), inner);
                    tail += nj;
                }
                inner
            };
            terms.push((coef * weight, t));
        }
    }
    Term::Lin(terms)
}

/// xi_K(a) = sqrt(phi(M_(K,K)(a*, a)) - |phi(a)|^2).
pub fn xi(k: f64, a: &Term) -> Condition {
    let sq = Condition::Re(phi(Term::big_m(k, k, a.clone().star(), a.clone())));
    let m = modulus(phi(a.clone()));
    Condition::Sqrt(Box::new(Condition::sub(sq, Condition::Mul(Box::new(m.clone()), Box::new(m)))))
}

/// Com_K(a, b) = m_{K,K}(b, a) - m_{K,K}(a, b).
pub fn com(k: f64, a: &Term, b: &Term) -> Term {
    Term::m(k, k, b.clone(), a.clone()).minus(Term::m(k, k, a.clone(), b.clone()))
}

/// eta_K(a) = sup_{y in D_1} phi(M_(2K,2K)(Com_K(a,y)*, Com_K(a,y))), y bound to `yvar`.
pub fn eta(k: f64, a: &Term, yvar: usize) -> Condition {
    let cm = com(k, a, &x(yvar));
    Condition::sup(yvar, 1.0, Condition::Re(phi(Term::big_m(2.0 * k, 2.0 * k, cm.clone().star(), cm))))
}

/// Proj_K(a) = m_{K,K}(a, a*) - m_{2K,2K}(m_{K,K}(a, a*), m_{K,K}(a, a*)*).
pub fn proj(k: f64, a: &Term) -> Term {
    let b = Term::m(k, k, a.clone(), a.clone().star());
    b.clone().minus(Term::m(2.0 * k, 2.0 * k, b.clone(), b.star()))
}

/// The corner shorthand w_kk F_N(x) w_jj = M_(N,0)(M_(0,N)(w_kk, F_N(x)), w_jj).
pub fn corner(n: f64, k: usize, j: usize, a: Term) -> Term {
    Term::big_m(n, 0.0, Term::big_m(0.0, n, Term::w(k, k), a.fejer(n)), Term::w(j, j))
}

/// II_1-factor conditions on the element `a` (axioms (23) and (26)): sup part and inf part.
fn factor_pair(k: f64, a: &Term, avar_star: &Term, yvar: usize) -> (Condition, Condition) {
    let sup_body = Condition::pos(Condition::sub(xi(k, a), eta(k, a, yvar)));
    let p = proj(k, a);
    let inf_body = Condition::Affine(
        0.0,
        vec![
            (1.0, Condition::Re(phi(Term::m(4.0 * k, 4.0 * k, p.clone().star(), p)))),
            (1.0, mod_diff(phi(Term::big_m(k, k, a.clone(), avar_star.clone())), sc(c(1.0 / PI, 0.0)))),
        ],
    );
    (sup_body, inf_body)
}

/// All instances of axiom `n` under `inst`.
pub fn axiom_instances(n: u32, inst: &Instantiation) -> Result<Vec<AxiomInstance>> {
    inst.validate()?;
    let m = inst.radius;
    let lams = inst.scalars_c();
    let mut b = Builder::new(n);
    match n {
        1 => {
            for (i, &lam) in lams.iter().enumerate() {
                let mu = lams[(i + 1) % lams.len()];
                let items = vec![
                    d(x(0).plus(x(1).plus(x(2))), x(0).plus(x(1)).plus(x(2))),
                    d(x(0).plus(Term::zero()), x(0)),
                    d(x(0).plus(x(0).scale_re(-1.0)), Term::zero()),
                    d(x(0).plus(x(1)), x(1).plus(x(0))),
                    d(x(0).scale(mu).scale(lam), x(0).scale(lam * mu)),
                    d(x(0).plus(x(1)).scale(lam), x(0).scale(lam).plus(x(1).scale(lam))),
                    d(x(0).scale(lam + mu), x(0).scale(lam).plus(x(0).scale(mu))),
                    d(x(0).scale(c(1.0, 0.0)), x(0)),
                ];
                b.push(
                    &format!("lam={},mu={}", fmt_c(lam), fmt_c(mu)),
                    Condition::sup_all(&[(0, m), (1, m), (2, m)], Condition::max(items)),
                );
            }
        }
        2 => {
            let tuples = [(0, 0, 0, 1, 0), (1, 2, 0, 0, 1), (2, 0, 1, 2, 0)];
            for (t, &(k, l, k1, k2, k3)) in tuples.iter().enumerate() {
                let (k, l, k1, k2, k3) = (inst.band(k), inst.band(l), inst.band(k1), inst.band(k2), inst.band(k3));
                let lam = lams[t % lams.len()];
                let m12 = Term::m(k1, k2, x(0), x(1));
                let m23 = Term::m(k2, k3, x(1), x(2));
                let lhs = Term::m(k1 + k2 + 2.0, k3, m12.clone(), x(2))
                    .scale_re(k1 + k2 + 2.0)
                    .minus(Term::m(k1 + k2 + 1.0, k3, m12.clone(), x(2)).scale_re(k1 + k2 + 1.0));
                let rhs = Term::m(k1, k2 + 2.0 + k3, x(0), m23.clone())
                    .scale_re(k3 + k2 + 2.0)
                    .minus(Term::m(k1, k2 + 1.0 + k3, x(0), m23).scale_re(k3 + k2 + 1.0));
                let items = vec![
                    d(
                        Term::m(k, l, x(0), x(1)).scale(lam).plus(Term::m(k, l, x(0), x(2))),
                        Term::m(k, l, x(0), x(1).scale(lam).plus(x(2))),
                    ),
                    d(Term::m(k1, l, x(0).fejer(k2), x(1)), Term::m(k2, l, x(0).fejer(k1), x(1))),
                    d(x(0).fejer(k).h(k + l), x(0).fejer(k)),
                    d(m12.clone().h(k1 + k2 + l), m12),
                    d(lhs, rhs),
                ];
                b.push(
                    &format!("K={},L={},K1={},K2={},K3={},lam={}", fmt_f(k), fmt_f(l), fmt_f(k1), fmt_f(k2), fmt_f(k3), fmt_c(lam)),
                    Condition::sup_all(&[(0, m), (1, m), (2, m)], Condition::max(items)),
                );
            }
        }
        3 => {
            for &lam in &lams {
                let items = vec![
                    d(x(0).star().star(), x(0)),
                    d(x(0).plus(x(1)).star(), x(0).star().plus(x(1).star())),
                    d(x(0).scale(lam).star(), x(0).star().scale(lam.conj())),
                ];
                b.push(&format!("lam={}", fmt_c(lam)), Condition::sup_all(&[(0, m), (1, m)], Condition::max(items)));
            }
        }
        4 => {
            for t in 0..3 {
                let (k, l, nn) = (inst.band(t), inst.band(t + 1), inst.band(t));
                let items = vec![
                    d(Term::m(k, l, x(0), x(1)).star(), Term::m(l, k, x(1).star(), x(0).star())),
                    d(x(0).star().fejer(nn), x(0).fejer(nn).star()),
                    Condition::Abs(Box::new(Condition::sub(d(x(0), Term::zero()), d(x(0).star(), Term::zero())))),
                ];
                b.push(
                    &format!("K={},L={},N={}", fmt_f(k), fmt_f(l), fmt_f(nn)),
                    Condition::sup_all(&[(0, m), (1, m)], Condition::max(items)),
                );
            }
        }
        5 => {
            let body = Condition::Abs(Box::new(Condition::sub(d(x(0), x(1)), d(x(0).minus(x(1)), Term::zero()))));
            b.push("", Condition::sup_all(&[(0, m), (1, m)], body));
        }
        6 => {
            for t in 0..3 {
                let (k, nn) = (inst.band(t), inst.band(t + 1));
                let items = vec![
                    d(Term::one().fejer(nn), Term::one()),
                    d(Term::m(k, nn, Term::one(), x(0)), x(0).fejer(nn)),
                    d(x(0).fejer(nn), Term::m(nn, k, x(0), Term::one())),
                ];
                b.push(&format!("K={},N={}", fmt_f(k), fmt_f(nn)), Condition::sup(0, m, Condition::max(items)));
            }
        }
        7 => {
            let body = modulus(phi(x(0).plus(x(1))).minus(phi(x(0))).minus(phi(x(1))));
            b.push("", Condition::sup_all(&[(0, m), (1, m)], body));
        }
        8 => {
            for &lam in &lams {
                let items = vec![
                    mod_diff(phi(x(0).star()), phi(x(0)).conj()),
                    mod_diff(phi(x(0).scale(lam)), sc(lam).times(phi(x(0)))),
                    mod_diff(phi(Term::one()), sc(c(1.0, 0.0))),
                ];
                b.push(&format!("lam={}", fmt_c(lam)), Condition::sup(0, m, Condition::max(items)));
            }
        }
        9 => {
            for count in [2usize, 3] {
                let ks: Vec<f64> = (0..count).map(|i| inst.band(i)).collect();
                let rows = (0..count)
                    .map(|i| (0..count).map(|j| phi(Term::m(ks[i], ks[j], x(i).star(), x(j)))).collect())
                    .collect();
                let vars: Vec<(usize, f64)> = (0..count).map(|i| (i, m)).collect();
                b.push(&format!("K={}", fmt_list(&ks)), Condition::sup_all(&vars, Condition::GramDefect(rows)));
            }
        }
        10 => {
            let cases = [(1.0, 0usize, vec![0usize, 1]), (2.0, 1, vec![0, 2])];
            for (na, kk, kis) in cases {
                let k = inst.band(kk);
                let ks: Vec<f64> = kis.iter().map(|&i| inst.band(i)).collect();
                let cnt = ks.len();
                let a = x(0);
                let xi_ = |i: usize| x(i + 1);
                let rows = (0..cnt)
                    .map(|i| {
                        (0..cnt)
                            .map(|j| {
                                let lhs = phi(Term::m(ks[i], ks[j], xi_(i).star(), xi_(j)));
                                let ai = Term::m(k, ks[i], a.clone(), xi_(i));
                                let aj = Term::m(k, ks[j], a.clone(), xi_(j));
                                let rhs = phi(Term::big_m(k + ks[i], k + ks[j], ai.star(), aj));
                                Scalar::Lin(vec![(c(na * na, 0.0), lhs), (c(-1.0, 0.0), rhs)])
                            })
                            .collect()
                    })
                    .collect();
                let mut vars = vec![(0usize, na)];
                vars.extend((0..cnt).map(|i| (i + 1, m)));
                b.push(
                    &format!("n={},m={},K={},Ki={}", fmt_f(na), fmt_f(m), fmt_f(k), fmt_list(&ks)),
                    Condition::sup_all(&vars, Condition::GramDefect(rows)),
                );
            }
        }
        11 => {
            let polys = [
                (StarPoly::new(vec![(c(1.0, 0.0), vec![Letter::XStar, Letter::X])]), vec![1.0], vec![inst.band(1)], "x*x"),
                (
                    StarPoly::new(vec![
                        (c(0.5, 0.0), vec![]),
                        (c(1.0, 0.0), vec![Letter::X]),
                        (c(-0.3, 0.2), vec![Letter::X, Letter::XStar, Letter::X]),
                    ]),
                    vec![0.3, 0.7],
                    vec![inst.band(0), inst.band(1)],
                    "0.5+x-(0.3-0.2i)xx*x",
                ),
            ];
            for (p, lambda, bands, name) in polys {
                let spec = TauSpec { poly: p.clone(), lambda: lambda.clone(), bands: bands.clone() };
                let body = d(Term::tau(spec, x(0)), dotted_polynomial(&p, &lambda, &bands, &x(0)));
                b.push(&format!("p={name},lam={},N={}", fmt_list(&lambda), fmt_list(&bands)), Condition::sup(0, m, body));
            }
        }
        12 => {
            let cases = [(1.0, 0usize, vec![0usize]), (2.0, 1, vec![0, 1])];
            for (mm, kk, kis) in cases {
                let k = inst.band(kk);
                let ks: Vec<f64> = kis.iter().map(|&i| inst.band(i)).collect();
                let mut lhs = x(0).fejer(k);
                let mut rhs = Term::one();
                for (i, &ki) in ks.iter().enumerate() {
                    lhs = lhs.plus(Term::m(ki, k, x(i + 1), x(0)));
                    rhs = rhs.plus(x(i + 1).fejer(ki));
                }
                let body = Condition::pos(Condition::Affine(
                    0.0,
                    vec![(1.0, d(lhs, Term::zero())), (-3.0 * mm * k.exp(), d(rhs, Term::zero()))],
                ));
                let mut vars = vec![(0usize, mm)];
                vars.extend((0..ks.len()).map(|i| (i + 1, 1.0)));
                b.push(&format!("m={},K={},Ki={},l=1", fmt_f(mm), fmt_f(k), fmt_list(&ks)), Condition::sup_all(&vars, body));
            }
        }
        13 => {
            let nt = inst.times.len();
            for i in 0..nt.min(4) {
                let t = inst.times[(i + 1) % nt];
                let s = inst.times[(i + 3) % nt];
                let lam = lams[i % lams.len()];
                let items = vec![
                    d(x(0).sigma(s).sigma(t), x(0).sigma(t + s)),
                    d(x(0).scale(lam).plus(x(1)).sigma(t), x(0).sigma(t).scale(lam).plus(x(1).sigma(t))),
                    d(x(0).sigma(0.0), x(0)),
                    d(x(0).star().sigma(t), x(0).sigma(t).star()),
                    mod_diff(phi(x(0).sigma(t)), phi(x(0))),
                ];
                b.push(
                    &format!("t={},s={},lam={}", fmt_f(t), fmt_f(s), fmt_c(lam)),
                    Condition::sup_all(&[(0, m), (1, m)], Condition::max(items)),
                );
            }
        }
        14 => {
            for (i, &t) in inst.times.iter().enumerate().filter(|(_, &t)| t != 0.0) {
                let (k, l, nn) = (inst.band(i), inst.band(i + 1), inst.band(i + 2));
                let items = vec![
                    d(Term::m(k, l, x(0), x(1)).sigma(t), Term::m(k, l, x(0).sigma(t), x(1).sigma(t))),
                    d(x(0).fejer(nn).sigma(t), x(0).sigma(t).fejer(nn)),
                ];
                b.push(
                    &format!("t={},K={},L={},N={}", fmt_f(t), fmt_f(k), fmt_f(l), fmt_f(nn)),
                    Condition::sup_all(&[(0, m), (1, m)], Condition::max(items)),
                );
            }
        }
        15 => {
            for &t in inst.times.iter().filter(|&&t| t != 0.0) {
                for nn in [1.0, 2.0] {
                    let body = Condition::pos(Condition::Affine(-4.0 * t.abs() * nn, vec![(1.0, d(x(0).sigma(t), x(0)))]));
                    b.push(&format!("t={},n={}", fmt_f(t), fmt_f(nn)), Condition::sup(0, nn, body));
                }
            }
        }
        16 => {
            for &s in &inst.times {
                for &n in &inst.riemann_n {
                    let sum = riemann_term(n, x(0), |t| C64::from_polar(2.0 / ((PI * t).exp() + (-PI * t).exp()), -s * t));
                    let body = Condition::pos(Condition::Affine(-axiom16_bound(s, n, m), vec![(1.0, d(x(0).g(s), sum))]));
                    b.push(&format!("s={},n={},m={}", fmt_f(s), n, fmt_f(m)), Condition::sup(0, m, body));
                }
            }
        }
        17 => {
            let cases: [&[usize]; 2] = [&[0, 1], &[0, 1, 2]];
            for (ci, idx) in cases.iter().enumerate() {
                let cnt = idx.len();
                let ks: Vec<f64> = idx.iter().map(|&i| inst.band(i)).collect();
                let ls: Vec<C64> = (0..cnt).map(|i| lams[(i + ci) % lams.len()]).collect();
                let sum = Term::Lin((0..cnt).map(|i| (ls[i], x(i).fejer(ks[i]))).collect());
                let nrm = d(sum, Term::zero());
                let lhs = Scalar::real(Condition::Mul(Box::new(nrm.clone()), Box::new(nrm)));
                let mut rhs = Vec::new();
                for i in 0..cnt {
                    for j in 0..cnt {
                        let w = ls[i].conj() * ls[j];
                        let gi = x(i).g(0.0);
                        let gj = x(j).g(0.0);
                        rhs.push((w, phi(Term::m(ks[i], ks[j], gi.clone().star(), gj.clone()))));
                        rhs.push((w, phi(Term::m(ks[j], ks[i], gj, gi.star()))));
                    }
                }
                let body = modulus(Scalar::Lin(vec![(c(4.0, 0.0), lhs), (c(-1.0, 0.0), Scalar::Lin(rhs))]));
                let vars: Vec<(usize, f64)> = (0..cnt).map(|i| (i, m)).collect();
                b.push(
                    &format!("n={},K={},lam=[{}]", cnt, fmt_list(&ks), ls.iter().map(|&z| fmt_c(z)).collect::<Vec<_>>().join(",")),
                    Condition::sup_all(&vars, body),
                );
            }
        }
        18 => {
            let cases = [(inst.band(0), 0.0), (inst.band(1), 1.0), (inst.band(2), -0.5)];
            for (bn, l) in cases {
                for &n in &inst.riemann_n {
                    // hat centred at +l  <=>  time kernel f_N(t) e^{-ilt}
                    let sum = riemann_term(n, x(0), |t| C64::from_polar(fejer_time(bn, t), -l * t));
                    let body = Condition::pos(Condition::Affine(
                        -axiom18_bound(bn, l, n, m),
                        vec![(1.0, d(x(0).fejer_l(bn, l), sum))],
                    ));
                    b.push(&format!("N={},l={},n={},m={}", fmt_f(bn), fmt_f(l), n, fmt_f(m)), Condition::sup(0, m, body));
                }
            }
        }
        19 => {
            let (k, l) = (inst.band(0), inst.band(1));
            for &alpha in &inst.alphas {
                for &beta in &inst.betas {
                    if !(alpha > 0.0 && alpha < 0.5 && beta >= 0.0 && alpha + beta < 1.0) {
                        return Err(Error::BadInstantiation(format!("(19) needs 0<alpha<1/2, alpha+beta<1 (alpha={alpha}, beta={beta})")));
                    }
                    for &n in &inst.riemann_n {
                        let zero_form = mod_diff(Scalar::form(0.0, k, l, x(0), x(1)), phi(Term::m(k, l, x(0).star(), x(1))));
                        let approx = form_sum(alpha, beta, k, l, n, x(0), x(1));
                        let err = mod_diff(Scalar::form(alpha + beta, k, l, x(0), x(1)), approx);
                        let body = Condition::max(vec![
                            zero_form,
                            Condition::pos(Condition::Affine(-axiom19_bound(alpha, beta, n, m), vec![(1.0, err)])),
                        ]);
                        b.push(
                            &format!("alpha={},beta={},K={},L={},n={},m={}", fmt_f(alpha), fmt_f(beta), fmt_f(k), fmt_f(l), n, fmt_f(m)),
                            Condition::sup_all(&[(0, m), (1, m)], body),
                        );
                    }
                }
            }
        }
        20 => {
            let (k, l) = (inst.band(1), inst.band(0));
            if l > k {
                return Err(Error::BadInstantiation("(20) needs L <= K".into()));
            }
            for &alpha in &inst.alphas {
                if !(alpha > 0.0 && alpha < 0.5) {
                    return Err(Error::BadInstantiation(format!("(20) needs 0<alpha<1/2, got {alpha}")));
                }
                for &n in &inst.riemann_n {
                    let approx = form_sum(alpha, 1.0 - alpha, k, l, n, x(0), x(1));
                    let err = mod_diff(phi(Term::m(l, k, x(1), x(0).star())), approx);
                    let body = Condition::pos(Condition::Affine(-axiom20_bound(alpha, k, n, m), vec![(1.0, err)]));
                    b.push(
                        &format!("alpha={},K={},L={},n={},m={}", fmt_f(alpha), fmt_f(k), fmt_f(l), n, fmt_f(m)),
                        Condition::sup_all(&[(0, m), (1, m)], body),
                    );
                }
            }
        }
        21 => {
            let g = inst.gamma(21)?;
            let cases = [(g / 2.0, g / 2.0), (g / 2.0, -g / 2.0), (g / 2.0, 1.5 * g), (g / 4.0, g / 2.0)];
            for (bn, l) in cases {
                let body = d(x(0).fejer_l(bn, l), Term::zero());
                b.push(&format!("gamma={},N={},l={},m={}", fmt_f(g), fmt_f(bn), fmt_f(l), fmt_f(m)), Condition::sup(0, m, body));
            }
        }
        22 => {
            let g = inst.gamma(22)?;
            for l in [g, -g] {
                let bn = g / 2.0;
                let cc = (l.abs() + bn).ceil() + 1.0;
                let body = Condition::max(vec![
                    d(Term::big_m(cc, cc, x(0).star(), x(0)), Term::one()),
                    d(x(0).fejer_l(bn, l).scale_re(2.0).minus(x(0).fejer_l(bn / 2.0, l)), x(0)),
                ]);
                b.push(&format!("gamma={},N={},l={}", fmt_f(g), fmt_f(bn), fmt_f(l)), Condition::inf(0, 1.0, body));
            }
            b = b.obstructed();
        }
        23 => {
            let g = inst.gamma(23)?;
            let bn = inst.n23.unwrap_or(g / 2.0);
            if !(bn > 0.0) || bn >= g {
                return Err(Error::BadInstantiation(format!("(23) needs 0 < N < |log lambda| = {g}, got N = {bn}")));
            }
            let k = bn.ceil().max(1.0);
            let a = x(0).fejer(bn);
            let (sup_body, inf_body) = factor_pair(k, &a, &x(0).star().fejer(bn), 1);
            b.push(&format!("sup,N={},K={}", fmt_f(bn), fmt_f(k)), Condition::sup(0, 1.0, sup_body));
            b.push(&format!("inf,N={},K={}", fmt_f(bn), fmt_f(k)), Condition::inf(0, 1.0, inf_body));
            b = b.obstructed();
        }
        24 => {
            let lv = inst.levels(24)?;
            let cr = inst.renorm;
            let mut values = Vec::new();
            let mut adj = Vec::new();
            let mut prods = Vec::new();
            let band = |j: usize, k: usize| ((j as f64 - k as f64).abs() * LN_2).ceil();
            for j in 0..lv {
                for k in 0..lv {
                    let target = if j == k { cr * 0.5f64.powi(j as i32 + 1) } else { 0.0 };
                    values.push(mod_diff(phi(Term::w(j, k)), sc(c(target, 0.0))));
                    adj.push(d(Term::w(k, j).star(), Term::w(j, k)));
                    adj.push(d(Term::w(j, k).h(band(j, k) + 1.0), Term::w(j, k)));
                    for l in 0..lv {
                        for mm in 0..lv {
                            let rhs = if k == l { Term::w(j, mm) } else { Term::zero() };
                            prods.push(d(Term::big_m(band(j, k), band(l, mm), Term::w(j, k), Term::w(l, mm)), rhs));
                        }
                    }
                }
            }
            b.push(&format!("values,levels={lv},c={}", fmt_f(cr)), Condition::max(values));
            b.push(&format!("adjoint,levels={lv}"), Condition::max(adj));
            b.push(&format!("products,levels={lv}"), Condition::max(prods));
        }
        25 => {
            inst.levels(25)?;
            let nn = inst.corner_band;
            let cx = corner(nn, 0, 0, x(0));
            let cy = corner(nn, 0, 0, x(1));
            b.push(&format!("H,N={}", fmt_f(nn)), Condition::sup(0, m, d(cx.clone().h(1.0), cx.clone())));
            let body = mod_diff(
                phi(Term::big_m(0.0, 0.0, cx.clone(), cy.clone())),
                phi(Term::big_m(0.0, 0.0, cy, cx)),
            );
            b.push(&format!("trace,N={}", fmt_f(nn)), Condition::sup_all(&[(0, m), (1, m)], body));
        }
        26 => {
            inst.levels(26)?;
            let nn = inst.corner_band;
            let cx = corner(nn, 0, 0, x(0));
            let cxs = corner(nn, 0, 0, x(0).star());
            let (sup_body, inf_body) = factor_pair(1.0, &cx, &cxs, 1);
            b.push(&format!("sup,K=1,N={}", fmt_f(nn)), Condition::sup(0, 1.0, sup_body));
            b.push(&format!("inf,K=1,N={}", fmt_f(nn)), Condition::inf(0, 1.0, inf_body));
            b = b.obstructed();
        }
        27 => {
            inst.levels(27)?;
            let nn = inst.corner_band;
            let cx = corner(nn, 0, 0, x(0));
            let cy = corner(nn, 0, 0, x(1));
            // 2 = 1/phi(w_00) for the exact geometric state; c/2 on a truncation.
            let factor = 2.0 / inst.renorm;
            let body = mod_diff(
                phi(Term::big_m(0.0, 0.0, cx.clone(), cy.clone())),
                sc(c(factor, 0.0)).times(phi(cx)).times(phi(cy)),
            );
            b.push(&format!("N={},c={}", fmt_f(nn), fmt_f(inst.renorm)), Condition::sup_all(&[(0, m), (1, m)], body));
        }
        _ => return Err(Error::BadInstantiation(format!("no axiom ({n}); valid range is 1-{AXIOM_COUNT}"))),
    }
    Ok(b.out)
}

/// Every instantiable axiom (those needing gamma or matrix units are skipped when absent).
pub fn axiom_library(inst: &Instantiation) -> Result<BTreeMap<u32, Vec<AxiomInstance>>> {
    let mut out = BTreeMap::new();
    for n in 1..=AXIOM_COUNT {
        match axiom_instances(n, inst) {
            Ok(v) => {
                out.insert(n, v);
            }
            Err(Error::BadInstantiation(_)) if (21..=23).contains(&n) && inst.gamma.is_none() => {}
            Err(Error::BadInstantiation(_)) if n >= 24 && inst.levels == 0 => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Parses an axiom selection like "1-20", "21", "1-8,13,24-25".
pub fn parse_axiom_range(s: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::BadRange(format!("bad axiom range '{part}'"));
        let (a, b) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse::<u32>().map_err(|_| bad())?, b.trim().parse::<u32>().map_err(|_| bad())?),
            None => {
                let v = part.parse::<u32>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if a == 0 || b > AXIOM_COUNT || a > b {
            return Err(Error::BadRange(format!("axiom range '{part}' outside 1-{AXIOM_COUNT}")));
        }
        out.extend(a..=b);
    }
    if out.is_empty() {
        return Err(Error::BadRange("empty axiom selection".into()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clogic::eval::{eval_term, Assignment, Interpretation};
    use crate::model::{Operator, WStarModel};
    use crate::modular::ModularCalculus;
    use crate::sampling::random_in_ball;
    use crate::smearing::smeared_polynomial;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranges() {
        assert_eq!(parse_axiom_range("1-3,5").unwrap(), vec![1, 2, 3, 5]);
        assert!(parse_axiom_range("0-3").is_err());
        assert!(parse_axiom_range("20-30").is_err());
        assert!(parse_axiom_range("a").is_err());
    }

    #[test]
    fn library_shapes() {
        let lib = axiom_library(&Instantiation::default()).unwrap();
        assert_eq!(lib.len(), 20);
        for (n, v) in &lib {
            assert!(!v.is_empty(), "axiom {n}");
            for i in v {
                assert!(i.condition.is_closed(), "{}", i.id);
                assert_eq!(i.kind, AxiomKind::Universal);
            }
        }
        let inst = Instantiation { gamma: Some(LN_2), levels: 3, ..Default::default() };
        let lib = axiom_library(&inst).unwrap();
        assert_eq!(lib.len(), 27);
        assert!(lib[&22].iter().all(|i| i.kind == AxiomKind::Existential));
        assert!(lib[&23].iter().any(|i| i.kind == AxiomKind::Existential));
    }

    #[test]
    fn bad_instantiations() {
        assert!(matches!(axiom_instances(21, &Instantiation::default()), Err(Error::BadInstantiation(_))));
        let inst = Instantiation { gamma: Some(LN_2), n23: Some(1.0), ..Default::default() };
        assert!(matches!(axiom_instances(23, &inst), Err(Error::BadInstantiation(_))));
        assert!(matches!(axiom_instances(24, &Instantiation::default()), Err(Error::BadInstantiation(_))));
        assert!(matches!(axiom_instances(28, &Instantiation::default()), Err(Error::BadInstantiation(_))));
    }

    #[test]
    fn dotted_polynomial_matches_smearing_module() {
        let model = WStarModel::from_eigenvalues(&[0.5, 0.3, 0.2]).unwrap();
        let mc = ModularCalculus::new(model);
        let it = Interpretation::new(mc.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = StarPoly::new(vec![
            (c(0.5, 0.0), vec![]),
            (c(1.0, -1.0), vec![Letter::X, Letter::XStar, Letter::X]),
            (c(0.2, 0.0), vec![Letter::XStar, Letter::X, Letter::X, Letter::XStar]),
        ]);
        let a = random_in_ball(3, 1.0, &mut rng);
        let mut asg = Assignment::new();
        asg.insert(0, (a.clone(), 1.0));
        let t = dotted_polynomial(&p, &[0.4, 0.6], &[1.0, 2.0], &x(0));
        let v = eval_term(&it, &t, &asg).unwrap();
        let w: Operator = smeared_polynomial(&mc, &p, &[0.4, 0.6], &[1.0, 2.0], &a).unwrap();
        assert!((v.mat() - w.mat()).norm() < 1e-10);
        let bound = t.domain_bound(&|_| Some(1.0)).unwrap();
        assert!(v.opnorm() <= bound + 1e-9);
    }
}
