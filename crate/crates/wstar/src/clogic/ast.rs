//! Terms, scalar relations and conditions of the continuous-logic language.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{c, C64};
use crate::smearing::StarPoly;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstName {
    Zero,
    One,
    /// Matrix-unit constant w_{ij}.
    W(usize, usize),
}

/// Parameters of the function symbol tau_{p, lambda, N}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSpec {
    pub poly: StarPoly,
    pub lambda: Vec<f64>,
    pub bands: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Term {
    Var(usize),
    Const(ConstName),
    Scale(C64, Box<Term>),
    Add(Box<Term>, Box<Term>),
    /// n-ary linear combination; shorthand for nested Scale/Add.
    Lin(Vec<(C64, Term)>),
    Star(Box<Term>),
    Sigma(f64, Box<Term>),
    Gmap(f64, Box<Term>),
    Fejer(f64, f64, Box<Term>),
    Dlvp(f64, Box<Term>),
    /// m_{K,L}(a, b).
    SmearProd(f64, f64, Box<Term>, Box<Term>),
    /// M_{(K,L)}(a, b).
    BigSmearProd(f64, f64, Box<Term>, Box<Term>),
    TauPoly(Box<TauSpec>, Box<Term>),
}

/// Complex-valued atomic and derived quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Scalar {
    Phi(Term),
    /// E_{alpha,K,L}(x, y) = E_alpha(F_K x, F_L y).
    Form { alpha: f64, k: f64, l: f64, x: Term, y: Term },
    Const(C64),
    Lin(Vec<(C64, Scalar)>),
    Conj(Box<Scalar>),
    Mul(Box<Scalar>, Box<Scalar>),
    Real(Box<Condition>),
}

/// Real-valued formulas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    Re(Scalar),
    Im(Scalar),
    Modulus(Scalar),
    Dist(Term, Term),
    Const(f64),
    /// c + sum w_i * cond_i.
    Affine(f64, Vec<(f64, Condition)>),
    Max(Vec<Condition>),
    Min(Vec<Condition>),
    Abs(Box<Condition>),
    /// sqrt(max(0, .)).
    Sqrt(Box<Condition>),
    Mul(Box<Condition>, Box<Condition>),
    /// max(0, -lambda_min) of the Hermitian part of the matrix of scalars.
    GramDefect(Vec<Vec<Scalar>>),
    Sup { var: usize, radius: f64, body: Box<Condition> },
    Inf { var: usize, radius: f64, body: Box<Condition> },
}

impl Term {
    pub fn var(i: usize) -> Term {
        Term::Var(i)
    }
    pub fn zero() -> Term {
        Term::Const(ConstName::Zero)
    }
    pub fn one() -> Term {
        Term::Const(ConstName::One)
    }
    pub fn w(i: usize, j: usize) -> Term {
        Term::Const(ConstName::W(i, j))
    }
    pub fn scale(self, z: C64) -> Term {
        Term::Scale(z, Box::new(self))
    }
    pub fn scale_re(self, r: f64) -> Term {
        self.scale(c(r, 0.0))
    }
    pub fn plus(self, o: Term) -> Term {
        Term::Add(Box::new(self), Box::new(o))
    }
    pub fn minus(self, o: Term) -> Term {
        self.plus(o.scale_re(-1.0))
    }
    pub fn lin(v: Vec<(C64, Term)>) -> Term {
        Term::Lin(v)
    }
    pub fn star(self) -> Term {
        Term::Star(Box::new(self))
    }
    pub fn sigma(self, t: f64) -> Term {
        Term::Sigma(t, Box::new(self))
    }
    pub fn g(self, s: f64) -> Term {
        Term::Gmap(s, Box::new(self))
    }
    pub fn fejer(self, n: f64) -> Term {
        Term::Fejer(n, 0.0, Box::new(self))
    }
    pub fn fejer_l(self, n: f64, l: f64) -> Term {
        Term::Fejer(n, l, Box::new(self))
    }
    pub fn h(self, k: f64) -> Term {
        Term::Dlvp(k, Box::new(self))
    }
    pub fn m(k: f64, l: f64, a: Term, b: Term) -> Term {
        Term::SmearProd(k, l, Box::new(a), Box::new(b))
    }
    pub fn big_m(k: f64, l: f64, a: Term, b: Term) -> Term {
        Term::BigSmearProd(k, l, Box::new(a), Box::new(b))
    }
    pub fn tau(spec: TauSpec, x: Term) -> Term {
        Term::TauPoly(Box::new(spec), Box::new(x))
    }

    pub fn free_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Term::Var(i) => {
                out.insert(*i);
            }
            Term::Const(_) => {}
            Term::Scale(_, a)
            | Term::Star(a)
            | Term::Sigma(_, a)
            | Term::Gmap(_, a)
            | Term::Fejer(_, _, a)
            | Term::Dlvp(_, a)
            | Term::TauPoly(_, a) => a.free_vars(out),
            Term::Add(a, b) | Term::SmearProd(_, _, a, b) | Term::BigSmearProd(_, _, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Term::Lin(v) => v.iter().for_each(|(_, t)| t.free_vars(out)),
        }
    }

    /// Radius of the domain the language assigns to the term, given variable radii.
    pub fn domain_bound(&self, radius: &dyn Fn(usize) -> Option<f64>) -> Option<f64> {
        Some(match self {
            Term::Var(i) => radius(*i)?,
            Term::Const(ConstName::Zero) => 0.0,
            Term::Const(_) => 1.0,
            Term::Scale(z, a) => z.norm() * a.domain_bound(radius)?,
            Term::Add(a, b) => a.domain_bound(radius)? + b.domain_bound(radius)?,
            Term::Lin(v) => {
                let mut s = 0.0;
                for (z, t) in v {
                    s += z.norm() * t.domain_bound(radius)?;
                }
                s
            }
            Term::Star(a) | Term::Sigma(_, a) | Term::Gmap(_, a) | Term::Fejer(_, _, a) => a.domain_bound(radius)?,
            Term::Dlvp(k, a) => (2.0 * k + 1.0) * a.domain_bound(radius)?,
            Term::SmearProd(_, _, a, b) => a.domain_bound(radius)? * b.domain_bound(radius)?,
            Term::BigSmearProd(k, l, a, b) => {
                (2.0 * k + 3.0) * (2.0 * l + 3.0) * a.domain_bound(radius)? * b.domain_bound(radius)?
            }
            Term::TauPoly(spec, a) => spec.poly.norm_bound(a.domain_bound(radius)?),
        })
    }
}

impl Scalar {
    pub fn phi(t: Term) -> Scalar {
        Scalar::Phi(t)
    }
    pub fn form(alpha: f64, k: f64, l: f64, x: Term, y: Term) -> Scalar {
        Scalar::Form { alpha, k, l, x, y }
    }
    pub fn minus(self, o: Scalar) -> Scalar {
        Scalar::Lin(vec![(c(1.0, 0.0), self), (c(-1.0, 0.0), o)])
    }
    pub fn conj(self) -> Scalar {
        Scalar::Conj(Box::new(self))
    }
    pub fn times(self, o: Scalar) -> Scalar {
        Scalar::Mul(Box::new(self), Box::new(o))
    }
    pub fn real(cond: Condition) -> Scalar {
        Scalar::Real(Box::new(cond))
    }

    pub fn free_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Scalar::Phi(t) => t.free_vars(out),
            Scalar::Form { x, y, .. } => {
                x.free_vars(out);
                y.free_vars(out);
            }
            Scalar::Const(_) => {}
            Scalar::Lin(v) => v.iter().for_each(|(_, s)| s.free_vars(out)),
            Scalar::Conj(s) => s.free_vars(out),
            Scalar::Mul(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Scalar::Real(cnd) => cnd.free_vars_into(out),
        }
    }
}

impl Condition {
    pub fn dist(a: Term, b: Term) -> Condition {
        Condition::Dist(a, b)
    }
    pub fn modulus(s: Scalar) -> Condition {
        Condition::Modulus(s)
    }
    pub fn sub(a: Condition, b: Condition) -> Condition {
        Condition::Affine(0.0, vec![(1.0, a), (-1.0, b)])
    }
    /// max(0, a).
    pub fn pos(a: Condition) -> Condition {
        Condition::Max(vec![Condition::Const(0.0), a])
    }
    pub fn max(v: Vec<Condition>) -> Condition {
        Condition::Max(v)
    }
    pub fn sup(var: usize, radius: f64, body: Condition) -> Condition {
        Condition::Sup { var, radius, body: Box::new(body) }
    }
    pub fn inf(var: usize, radius: f64, body: Condition) -> Condition {
        Condition::Inf { var, radius, body: Box::new(body) }
    }
    /// Nested sups over the listed (var, radius) pairs, outermost first.
    pub fn sup_all(vars: &[(usize, f64)], body: Condition) -> Condition {
        vars.iter().rev().fold(body, |b, &(v, r)| Condition::sup(v, r, b))
    }

    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        self.free_vars_into(&mut s);
        s
    }

    fn free_vars_into(&self, out: &mut BTreeSet<usize>) {
        match self {
            Condition::Re(s) | Condition::Im(s) | Condition::Modulus(s) => s.free_vars(out),
            Condition::Dist(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Condition::Const(_) => {}
            Condition::Affine(_, v) => v.iter().for_each(|(_, cnd)| cnd.free_vars_into(out)),
            Condition::Max(v) | Condition::Min(v) => v.iter().for_each(|cnd| cnd.free_vars_into(out)),
            Condition::Abs(a) | Condition::Sqrt(a) => a.free_vars_into(out),
            Condition::Mul(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            Condition::GramDefect(rows) => rows.iter().flatten().for_each(|s| s.free_vars(out)),
            Condition::Sup { var, body, .. } | Condition::Inf { var, body, .. } => {
                let mut inner = BTreeSet::new();
                body.free_vars_into(&mut inner);
                inner.remove(var);
                out.extend(inner);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// True when the outermost quantifier is an infimum.
    pub fn is_inf_type(&self) -> bool {
        matches!(self, Condition::Inf { .. })
    }

    /// Number of quantifier nodes, at any depth.
    pub fn quantifier_count(&self) -> usize {
        match self {
            Condition::Sup { body, .. } | Condition::Inf { body, .. } => 1 + body.quantifier_count(),
            Condition::Affine(_, v) => v.iter().map(|(_, x)| x.quantifier_count()).sum(),
            Condition::Max(v) | Condition::Min(v) => v.iter().map(|x| x.quantifier_count()).sum(),
            Condition::Abs(a) | Condition::Sqrt(a) => a.quantifier_count(),
            Condition::Mul(a, b) => a.quantifier_count() + b.quantifier_count(),
            Condition::Re(s) | Condition::Im(s) | Condition::Modulus(s) => scalar_quantifiers(s),
            Condition::GramDefect(rows) => rows.iter().flatten().map(scalar_quantifiers).sum(),
            Condition::Dist(..) | Condition::Const(_) => 0,
        }
    }
}

fn scalar_quantifiers(s: &Scalar) -> usize {
    match s {
        Scalar::Real(cnd) => cnd.quantifier_count(),
        Scalar::Lin(v) => v.iter().map(|(_, x)| scalar_quantifiers(x)).sum(),
        Scalar::Conj(x) => scalar_quantifiers(x),
        Scalar::Mul(a, b) => scalar_quantifiers(a) + scalar_quantifiers(b),
        _ => 0,
    }
}
