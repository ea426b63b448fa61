//! Prefix (S-expression) syntax for terms and conditions.
//!
//! Terms: `x3`, `0`, `1`, `(w i j)`, `(scale re im T)`, `(+ T T)`, `(lin (re im T) ...)`,
//! `(star T)`, `(sigma t T)`, `(g s T)`, `(fejer m l T)`, `(h K T)`, `(m K L T T)`,
//! `(M K L T T)`, `(tau (poly (re im word) ...) (lambda ...) (bands ...) T)` where a word
//! is a string over `x` and `s` (for x*), or `e` for the empty word.
//!
//! Scalars: `(phi T)`, `(E alpha K L T T)`, `(c re im)`, `(slin (re im S) ...)`, `(conj S)`,
//! `(smul S S)`, `(real C)`.
//!
//! Conditions: a number, `(re S)`, `(im S)`, `(mod S)`, `(d T T)`, `(affine c (w C) ...)`,
//! `(max C ...)`, `(min C ...)`, `(abs C)`, `(sqrt C)`, `(mul C C)`, `(gram (S ...) ...)`,
//! `(sup i r C)`, `(inf i r C)`.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::{ConstName, Condition, Scalar, TauSpec, Term};
use crate::error::{Error, Result};
use crate::model::{c, C64};
use crate::smearing::{Letter, Monomial, StarPoly};

#[derive(Clone, Debug, PartialEq)]
enum Sx {
    Atom(String, usize),
    List(Vec<Sx>, usize),
}

impl Sx {
    fn pos(&self) -> usize {
        match self {
            Sx::Atom(_, p) | Sx::List(_, p) => *p,
        }
    }
}

fn perr<T>(pos: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { pos, msg: msg.into() })
}

fn read_sx(src: &str) -> Result<Sx> {
    let bytes: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    let out = read_one(&bytes, &mut i)?;
    skip_ws(&bytes, &mut i);
    if i < bytes.len() {
        return perr(bytes[i].0, "trailing input");
    }
    Ok(out)
}

fn skip_ws(b: &[(usize, char)], i: &mut usize) {
    while *i < b.len() && b[*i].1.is_whitespace() {
        *i += 1;
    }
}

fn read_one(b: &[(usize, char)], i: &mut usize) -> Result<Sx> {
    skip_ws(b, i);
    if *i >= b.len() {
        return perr(b.last().map(|x| x.0 + 1).unwrap_or(0), "unexpected end of input");
    }
    let (pos, ch) = b[*i];
    match ch {
        '(' => {
            *i += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(b, i);
                if *i >= b.len() {
                    return perr(pos, "unclosed parenthesis");
                }
                if b[*i].1 == ')' {
                    *i += 1;
                    return Ok(Sx::List(items, pos));
                }
                items.push(read_one(b, i)?);
            }
        }
        ')' => perr(pos, "unexpected ')'"),
        _ => {
            let start = *i;
            while *i < b.len() && !b[*i].1.is_whitespace() && b[*i].1 != '(' && b[*i].1 != ')' {
                *i += 1;
            }
            Ok(Sx::Atom(b[start..*i].iter().map(|x| x.1).collect(), pos))
        }
    }
}

fn num(s: &Sx) -> Result<f64> {
    match s {
        Sx::Atom(a, p) => a.parse::<f64>().or_else(|_| perr(*p, format!("expected number, got '{a}'"))),
        Sx::List(_, p) => perr(*p, "expected number"),
    }
}

fn index(s: &Sx) -> Result<usize> {
    match s {
        Sx::Atom(a, p) => a.parse::<usize>().or_else(|_| perr(*p, format!("expected index, got '{a}'"))),
        Sx::List(_, p) => perr(*p, "expected index"),
    }
}

fn head(items: &[Sx], pos: usize) -> Result<&str> {
    match items.first() {
        Some(Sx::Atom(h, _)) => Ok(h.as_str()),
        _ => perr(pos, "expected operator name"),
    }
}

fn arity(items: &[Sx], n: usize, pos: usize) -> Result<()> {
    if items.len() != n + 1 {
        return perr(pos, format!("'{}' expects {n} arguments, got {}", head(items, pos)?, items.len() - 1));
    }
    Ok(())
}

fn list(s: &Sx) -> Result<&[Sx]> {
    match s {
        Sx::List(v, _) => Ok(v),
        Sx::Atom(_, p) => perr(*p, "expected list"),
    }
}

fn term(s: &Sx) -> Result<Term> {
    match s {
        Sx::Atom(a, p) => match a.as_str() {
            "0" => Ok(Term::zero()),
            "1" => Ok(Term::one()),
            _ if a.starts_with('x') => {
                a[1..].parse::<usize>().map(Term::Var).or_else(|_| perr(*p, format!("bad variable '{a}'")))
            }
            _ => perr(*p, format!("unknown term atom '{a}'")),
        },
        Sx::List(items, p) => {
            let p = *p;
            let h = head(items, p)?;
            let bx = |i: usize| -> Result<Box<Term>> { Ok(Box::new(term(&items[i])?)) };
            match h {
                "w" => {
                    arity(items, 2, p)?;
                    Ok(Term::Const(ConstName::W(index(&items[1])?, index(&items[2])?)))
                }
                "scale" => {
                    arity(items, 3, p)?;
                    Ok(Term::Scale(c(num(&items[1])?, num(&items[2])?), bx(3)?))
                }
                "+" => {
                    arity(items, 2, p)?;
                    Ok(Term::Add(bx(1)?, bx(2)?))
                }
                "lin" => {
                    let mut v = Vec::new();
                    for it in &items[1..] {
                        let l = list(it)?;
                        if l.len() != 3 {
                            return perr(it.pos(), "lin entries are (re im T)");
                        }
                        v.push((c(num(&l[0])?, num(&l[1])?), term(&l[2])?));
                    }
                    Ok(Term::Lin(v))
                }
                "star" => {
                    arity(items, 1, p)?;
                    Ok(Term::Star(bx(1)?))
                }
                "sigma" => {
                    arity(items, 2, p)?;
                    Ok(Term::Sigma(num(&items[1])?, bx(2)?))
                }
                "g" => {
                    arity(items, 2, p)?;
                    Ok(Term::Gmap(num(&items[1])?, bx(2)?))
                }
                "fejer" => {
                    arity(items, 3, p)?;
                    Ok(Term::Fejer(num(&items[1])?, num(&items[2])?, bx(3)?))
                }
                "h" => {
                    arity(items, 2, p)?;
                    Ok(Term::Dlvp(num(&items[1])?, bx(2)?))
                }
                "m" => {
                    arity(items, 4, p)?;
                    Ok(Term::SmearProd(num(&items[1])?, num(&items[2])?, bx(3)?, bx(4)?))
                }
                "M" => {
                    arity(items, 4, p)?;
                    Ok(Term::BigSmearProd(num(&items[1])?, num(&items[2])?, bx(3)?, bx(4)?))
                }
                "tau" => {
                    arity(items, 4, p)?;
                    let spec = TauSpec { poly: poly(&items[1])?, lambda: numlist(&items[2], "lambda")?, bands: numlist(&items[3], "bands")? };
                    Ok(Term::TauPoly(Box::new(spec), bx(4)?))
                }
                _ => perr(p, format!("unknown term operator '{h}'")),
            }
        }
    }
}

fn numlist(s: &Sx, name: &str) -> Result<Vec<f64>> {
    let l = list(s)?;
    if head(l, s.pos())? != name {
        return perr(s.pos(), format!("expected ({name} ...)"));
    }
    l[1..].iter().map(num).collect()
}

fn poly(s: &Sx) -> Result<StarPoly> {
    let l = list(s)?;
    if head(l, s.pos())? != "poly" {
        return perr(s.pos(), "expected (poly ...)");
    }
    let mut terms = Vec::new();
    for it in &l[1..] {
        let m = list(it)?;
        if m.len() != 3 {
            return perr(it.pos(), "monomials are (re im word)");
        }
        let word = match &m[2] {
            Sx::Atom(w, _) if w == "e" => Vec::new(),
            Sx::Atom(w, p) => w
                .chars()
                .map(|ch| match ch {
                    'x' => Ok(Letter::X),
                    's' => Ok(Letter::XStar),
                    _ => perr(*p, format!("bad letter '{ch}' in word")),
                })
                .collect::<Result<Vec<_>>>()?,
            Sx::List(_, p) => return perr(*p, "expected word"),
        };
        terms.push(Monomial { coef: (num(&m[0])?, num(&m[1])?), word });
    }
    Ok(StarPoly { terms })
}

fn scalar(s: &Sx) -> Result<Scalar> {
    let (items, p) = match s {
        Sx::List(v, p) => (v, *p),
        Sx::Atom(a, p) => return perr(*p, format!("expected scalar, got '{a}'")),
    };
    match head(items, p)? {
        "phi" => {
            arity(items, 1, p)?;
            Ok(Scalar::Phi(term(&items[1])?))
        }
        "E" => {
            arity(items, 5, p)?;
            Ok(Scalar::Form {
                alpha: num(&items[1])?,
                k: num(&items[2])?,
                l: num(&items[3])?,
                x: term(&items[4])?,
                y: term(&items[5])?,
            })
        }
        "c" => {
            arity(items, 2, p)?;
            Ok(Scalar::Const(c(num(&items[1])?, num(&items[2])?)))
        }
        "slin" => {
            let mut v = Vec::new();
            for it in &items[1..] {
                let l = list(it)?;
                if l.len() != 3 {
                    return perr(it.pos(), "slin entries are (re im S)");
                }
                v.push((c(num(&l[0])?, num(&l[1])?), scalar(&l[2])?));
            }
            Ok(Scalar::Lin(v))
        }
        "conj" => {
            arity(items, 1, p)?;
            Ok(Scalar::Conj(Box::new(scalar(&items[1])?)))
        }
        "smul" => {
            arity(items, 2, p)?;
            Ok(Scalar::Mul(Box::new(scalar(&items[1])?), Box::new(scalar(&items[2])?)))
        }
        "real" => {
            arity(items, 1, p)?;
            Ok(Scalar::Real(Box::new(condition(&items[1])?)))
        }
        h => perr(p, format!("unknown scalar operator '{h}'")),
    }
}

fn condition(s: &Sx) -> Result<Condition> {
    let (items, p) = match s {
        Sx::Atom(..) => return Ok(Condition::Const(num(s)?)),
        Sx::List(v, p) => (v, *p),
    };
    let bx = |i: usize| -> Result<Box<Condition>> { Ok(Box::new(condition(&items[i])?)) };
    match head(items, p)? {
        "re" => {
            arity(items, 1, p)?;
            Ok(Condition::Re(scalar(&items[1])?))
        }
        "im" => {
            arity(items, 1, p)?;
            Ok(Condition::Im(scalar(&items[1])?))
        }
        "mod" => {
            arity(items, 1, p)?;
            Ok(Condition::Modulus(scalar(&items[1])?))
        }
        "d" => {
            arity(items, 2, p)?;
            Ok(Condition::Dist(term(&items[1])?, term(&items[2])?))
        }
        "affine" => {
            if items.len() < 2 {
                return perr(p, "affine needs a constant");
            }
            let mut v = Vec::new();
            for it in &items[2..] {
                let l = list(it)?;
                if l.len() != 2 {
                    return perr(it.pos(), "affine entries are (w C)");
                }
                v.push((num(&l[0])?, condition(&l[1])?));
            }
            Ok(Condition::Affine(num(&items[1])?, v))
        }
        "max" => Ok(Condition::Max(items[1..].iter().map(condition).collect::<Result<_>>()?)),
        "min" => Ok(Condition::Min(items[1..].iter().map(condition).collect::<Result<_>>()?)),
        "abs" => {
            arity(items, 1, p)?;
            Ok(Condition::Abs(bx(1)?))
        }
        "sqrt" => {
            arity(items, 1, p)?;
            Ok(Condition::Sqrt(bx(1)?))
        }
        "mul" => {
            arity(items, 2, p)?;
            Ok(Condition::Mul(bx(1)?, bx(2)?))
        }
        "gram" => {
            let mut rows = Vec::new();
            for it in &items[1..] {
                rows.push(list(it)?.iter().map(scalar).collect::<Result<Vec<_>>>()?);
            }
            Ok(Condition::GramDefect(rows))
        }
        q @ ("sup" | "inf") => {
            arity(items, 3, p)?;
            let var = index(&items[1])?;
            let radius = num(&items[2])?;
            let body = bx(3)?;
            Ok(if q == "sup" { Condition::Sup { var, radius, body } } else { Condition::Inf { var, radius, body } })
        }
        h => perr(p, format!("unknown condition operator '{h}'")),
    }
}

pub fn parse_term(src: &str) -> Result<Term> {
    term(&read_sx(src)?)
}

pub fn parse_scalar(src: &str) -> Result<Scalar> {
    scalar(&read_sx(src)?)
}

pub fn parse_condition(src: &str) -> Result<Condition> {
    condition(&read_sx(src)?)
}

// Printing uses `{:?}` for floats, which round-trips exactly.

fn cz(f: &mut Formatter<'_>, z: &C64) -> fmt::Result {
    write!(f, "{:?} {:?}", z.re, z.im)
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(i) => write!(f, "x{i}"),
            Term::Const(ConstName::Zero) => f.write_str("0"),
            Term::Const(ConstName::One) => f.write_str("1"),
            Term::Const(ConstName::W(i, j)) => write!(f, "(w {i} {j})"),
            Term::Scale(z, a) => {
                f.write_str("(scale ")?;
                cz(f, z)?;
                write!(f, " {a})")
            }
            Term::Add(a, b) => write!(f, "(+ {a} {b})"),
            Term::Lin(v) => {
                f.write_str("(lin")?;
                for (z, t) in v {
                    f.write_str(" (")?;
                    cz(f, z)?;
                    write!(f, " {t})")?;
                }
                f.write_char(')')
            }
            Term::Star(a) => write!(f, "(star {a})"),
            Term::Sigma(t, a) => write!(f, "(sigma {t:?} {a})"),
            Term::Gmap(s, a) => write!(f, "(g {s:?} {a})"),
            Term::Fejer(m, l, a) => write!(f, "(fejer {m:?} {l:?} {a})"),
            Term::Dlvp(k, a) => write!(f, "(h {k:?} {a})"),
            Term::SmearProd(k, l, a, b) => write!(f, "(m {k:?} {l:?} {a} {b})"),
            Term::BigSmearProd(k, l, a, b) => write!(f, "(M {k:?} {l:?} {a} {b})"),
            Term::TauPoly(spec, a) => {
                f.write_str("(tau (poly")?;
                for m in &spec.poly.terms {
                    let w: String = if m.word.is_empty() {
                        "e".into()
                    } else {
                        m.word.iter().map(|l| if *l == Letter::X { 'x' } else { 's' }).collect()
                    };
                    write!(f, " ({:?} {:?} {w})", m.coef.0, m.coef.1)?;
                }
                f.write_str(") (lambda")?;
                for l in &spec.lambda {
                    write!(f, " {l:?}")?;
                }
                f.write_str(") (bands")?;
                for b in &spec.bands {
                    write!(f, " {b:?}")?;
                }
                write!(f, ") {a})")
            }
        }
    }
}

impl Display for Scalar {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Phi(t) => write!(f, "(phi {t})"),
            Scalar::Form { alpha, k, l, x, y } => write!(f, "(E {alpha:?} {k:?} {l:?} {x} {y})"),
            Scalar::Const(z) => {
                f.write_str("(c ")?;
                cz(f, z)?;
                f.write_char(')')
            }
            Scalar::Lin(v) => {
                f.write_str("(slin")?;
                for (z, s) in v {
                    f.write_str(" (")?;
                    cz(f, z)?;
                    write!(f, " {s})")?;
                }
                f.write_char(')')
            }
            Scalar::Conj(s) => write!(f, "(conj {s})"),
            Scalar::Mul(a, b) => write!(f, "(smul {a} {b})"),
            Scalar::Real(cnd) => write!(f, "(real {cnd})"),
        }
    }
}

impl Display for Condition {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let seq = |f: &mut Formatter<'_>, name: &str, v: &[Condition]| -> fmt::Result {
            write!(f, "({name}")?;
            for x in v {
                write!(f, " {x}")?;
            }
            f.write_char(')')
        };
        match self {
            Condition::Re(s) => write!(f, "(re {s})"),
            Condition::Im(s) => write!(f, "(im {s})"),
            Condition::Modulus(s) => write!(f, "(mod {s})"),
            Condition::Dist(a, b) => write!(f, "(d {a} {b})"),
            Condition::Const(v) => write!(f, "{v:?}"),
            Condition::Affine(c0, v) => {
                write!(f, "(affine {c0:?}")?;
                for (w, x) in v {
                    write!(f, " ({w:?} {x})")?;
                }
                f.write_char(')')
            }
            Condition::Max(v) => seq(f, "max", v),
            Condition::Min(v) => seq(f, "min", v),
            Condition::Abs(a) => write!(f, "(abs {a})"),
            Condition::Sqrt(a) => write!(f, "(sqrt {a})"),
            Condition::Mul(a, b) => write!(f, "(mul {a} {b})"),
            Condition::GramDefect(rows) => {
                f.write_str("(gram")?;
                for r in rows {
                    f.write_str(" (")?;
                    for (i, s) in r.iter().enumerate() {
                        if i > 0 {
                            f.write_char(' ')?;
                        }
                        write!(f, "{s}")?;
                    }
                    f.write_char(')')?;
                }
                f.write_char(')')
            }
            Condition::Sup { var, radius, body } => write!(f, "(sup {var} {radius:?} {body})"),
            Condition::Inf { var, radius, body } => write!(f, "(inf {var} {radius:?} {body})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_examples() {
        let t = parse_term("(m 2 1 1 x0)").unwrap();
        assert_eq!(t, Term::m(2.0, 1.0, Term::one(), Term::var(0)));
        let cnd = parse_condition("(sup 0 1 (max 0 (affine -0.5 (1 (d (star (star x0)) x0)))))").unwrap();
        assert!(cnd.is_closed());
        let t = parse_term("(tau (poly (1 0 sx) (0.5 0 e)) (lambda 0.5 0.5) (bands 1 2) x1)").unwrap();
        assert!(matches!(t, Term::TauPoly(..)));
    }

    #[test]
    fn reports_positions() {
        match parse_condition("(sup 0 1 (frob x0))") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 9),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_term("(+ x0"), Err(Error::Parse { .. })));
        assert!(matches!(parse_term("x0 x1"), Err(Error::Parse { .. })));
    }

    fn arb_f() -> impl Strategy<Value = f64> {
        prop_oneof![(-4i32..5).prop_map(|k| k as f64 * 0.25), -10.0f64..10.0]
    }

    fn arb_term() -> BoxedStrategy<Term> {
        let leaf = prop_oneof![
            (0usize..4).prop_map(Term::Var),
            Just(Term::zero()),
            Just(Term::one()),
            (0usize..3, 0usize..3).prop_map(|(i, j)| Term::w(i, j)),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (arb_f(), arb_f(), inner.clone()).prop_map(|(a, b, t)| t.scale(c(a, b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.plus(b)),
                inner.clone().prop_map(Term::star),
                (arb_f(), inner.clone()).prop_map(|(t, a)| a.sigma(t)),
                (arb_f(), inner.clone()).prop_map(|(t, a)| a.g(t)),
                (1u32..5, arb_f(), inner.clone()).prop_map(|(m, l, a)| a.fejer_l(m as f64, l)),
                (1u32..5, 1u32..5, inner.clone(), inner.clone())
                    .prop_map(|(k, l, a, b)| Term::m(k as f64, l as f64, a, b)),
                (0u32..3, 0u32..3, inner.clone(), inner.clone())
                    .prop_map(|(k, l, a, b)| Term::big_m(k as f64, l as f64, a, b)),
                prop::collection::vec((arb_f(), inner.clone()), 1..3)
                    .prop_map(|v| Term::Lin(v.into_iter().map(|(z, t)| (c(z, -z), t)).collect())),
                inner.clone().prop_map(|a| Term::tau(
                    TauSpec {
                        poly: StarPoly::new(vec![(c(1.0, 0.5), vec![Letter::X, Letter::XStar]), (c(-0.25, 0.0), vec![])]),
                        lambda: vec![0.25, 0.75],
                        bands: vec![1.0, 2.0]
                    },
                    a
                )),
            ]
        })
        .boxed()
    }

    fn arb_cond() -> impl Strategy<Value = Condition> {
        let t = arb_term();
        let leaf = prop_oneof![
            (t.clone(), t.clone()).prop_map(|(a, b)| Condition::dist(a, b)),
            t.clone().prop_map(|a| Condition::Re(Scalar::phi(a))),
            (arb_f(), t.clone(), t.clone()).prop_map(|(al, a, b)| Condition::Modulus(Scalar::form(al, 1.0, 2.0, a, b))),
            arb_f().prop_map(Condition::Const),
        ];
        leaf.prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 1..3).prop_map(Condition::Max),
                prop::collection::vec(inner.clone(), 1..3).prop_map(Condition::Min),
                (arb_f(), prop::collection::vec((arb_f(), inner.clone()), 0..3)).prop_map(|(a, v)| Condition::Affine(a, v)),
                inner.clone().prop_map(|a| Condition::Sqrt(Box::new(a))),
                (0usize..4, 1u32..3, inner.clone()).prop_map(|(v, r, b)| Condition::sup(v, r as f64, b)),
                (0usize..4, 1u32..3, inner.clone()).prop_map(|(v, r, b)| Condition::inf(v, r as f64, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Condition::Modulus(
                    Scalar::real(a).minus(Scalar::real(b).conj()).times(Scalar::Const(c(0.5, -1.0)))
                )),
            ]
        })
    }

    proptest! {
        #[test]
        fn term_round_trip(t in arb_term()) {
            let s = t.to_string();
            prop_assert_eq!(parse_term(&s).unwrap(), t);
        }

        #[test]
        fn condition_round_trip(cnd in arb_cond()) {
            let s = cnd.to_string();
            prop_assert_eq!(parse_condition(&s).unwrap(), cnd);
        }
    }
}
