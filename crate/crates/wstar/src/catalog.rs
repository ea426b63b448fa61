//! Named model families used as positive and negative fixtures for the axiom suite.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::clogic::axioms::Instantiation;
use crate::error::{Error, Result};
use crate::model::{c, Mat, ModelSpec, Operator, WStarModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelRecipe {
    /// M_n with the normalized trace.
    Tracial { n: usize },
    /// Diagonal density with the given (normalized) weights.
    Diagonal { p: Vec<f64> },
    /// tr_{n0} ⊗ diag(c 2^{-j-1}), j < levels, with matrix units of the second factor.
    GeometricTruncation { n0: usize, levels: usize },
    /// Eigenvalues proportional to lambda^j, j < levels.
    Periodic { lambda: f64, levels: usize },
    Tensor { left: Box<ModelRecipe>, right: Box<ModelRecipe> },
}

/// A model together with its constant symbols and the data the axiom suite needs.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub model: WStarModel,
    /// Matrix units w_{ij} (standard frame); empty when the family has none.
    pub constants: BTreeMap<(usize, usize), Operator>,
    /// Number of matrix-unit levels (0 if none).
    pub levels: usize,
    /// Renormalization c of the truncated geometric weights (1 if exact).
    pub renorm: f64,
    /// A lattice spacing gamma with Sp(sigma) ⊆ gamma Z, when one is known.
    pub gamma: Option<f64>,
}

impl BuiltModel {
    fn plain(model: WStarModel, gamma: Option<f64>) -> Self {
        BuiltModel { model, constants: BTreeMap::new(), levels: 0, renorm: 1.0, gamma }
    }

    /// Deviations |c 2^{-j-1} - 2^{-j-1}| of phi(w_jj) from the untruncated values.
    pub fn renormalization_deltas(&self) -> Vec<f64> {
        (0..self.levels).map(|j| ((self.renorm - 1.0) * 0.5f64.powi(j as i32 + 1)).abs()).collect()
    }

    /// Default instantiation for this model: carries gamma, levels and renormalization.
    pub fn instantiation(&self) -> Instantiation {
        Instantiation { gamma: self.gamma, levels: self.levels, renorm: self.renorm, ..Default::default() }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadParameters(msg.into())
}

fn diag_mat(p: &[f64]) -> Mat {
    let n = p.len();
    Mat::from_fn(n, n, |i, j| if i == j { c(p[i], 0.0) } else { c(0.0, 0.0) })
}

fn weights(recipe: &ModelRecipe) -> Result<Vec<f64>> {
    Ok(match recipe {
        ModelRecipe::Tracial { n } => {
            if *n == 0 {
                return Err(bad("tracial dimension must be >= 1"));
            }
            vec![1.0 / *n as f64; *n]
        }
        ModelRecipe::Diagonal { p } => {
            if p.is_empty() || p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(bad("diagonal weights must be positive and finite"));
            }
            let s: f64 = p.iter().sum();
            p.iter().map(|v| v / s).collect()
        }
        ModelRecipe::GeometricTruncation { n0, levels } => {
            if *n0 == 0 || *levels < 2 {
                return Err(bad("geometric truncation needs n0 >= 1 and levels >= 2"));
            }
            let cr = geometric_renorm(*levels);
            let mut out = Vec::with_capacity(n0 * levels);
            for _ in 0..*n0 {
                for j in 0..*levels {
                    out.push(cr * 0.5f64.powi(j as i32 + 1) / *n0 as f64);
                }
            }
            out
        }
        ModelRecipe::Periodic { lambda, levels } => {
            if !(*lambda > 0.0 && *lambda < 1.0) || *levels < 2 {
                return Err(bad("periodic needs lambda in (0,1) and levels >= 2"));
            }
            let raw: Vec<f64> = (0..*levels).map(|j| lambda.powi(j as i32)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        }
        ModelRecipe::Tensor { left, right } => {
            let a = weights(left)?;
            let b = weights(right)?;
            a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
        }
    })
}

/// c = 1 / (1 - 2^{-levels}).
pub fn geometric_renorm(levels: usize) -> f64 {
    1.0 / (1.0 - 0.5f64.powi(levels as i32))
}

fn gamma_of(recipe: &ModelRecipe) -> Option<f64> {
    match recipe {
        ModelRecipe::Tracial { .. } => None,
        ModelRecipe::Diagonal { .. } => None,
        ModelRecipe::GeometricTruncation { .. } => Some(LN_2),
        ModelRecipe::Periodic { lambda, .. } => Some(-lambda.ln()),
        ModelRecipe::Tensor { left, right } => match (left.as_ref(), right.as_ref()) {
            (ModelRecipe::Tracial { .. }, r) => gamma_of(r),
            (l, ModelRecipe::Tracial { .. }) => gamma_of(l),
            (l, r) => match (gamma_of(l), gamma_of(r)) {
                (Some(a), Some(b)) if (a - b).abs() < 1e-12 => Some(a),
                _ => None,
            },
        },
    }
}

/// Builds the model; matrix units come from the geometric factor (the right one in a tensor).
pub fn build_recipe(recipe: &ModelRecipe) -> Result<BuiltModel> {
    let p = weights(recipe)?;
    let n = p.len();
    let model = WStarModel::from_matrix(diag_mat(&p))?;
    let gamma = gamma_of(recipe);
    let (outer, levels) = match recipe {
        ModelRecipe::GeometricTruncation { n0, levels } => (*n0, *levels),
        ModelRecipe::Tensor { left, right } => match right.as_ref() {
            ModelRecipe::GeometricTruncation { n0, levels } => (weights(left)?.len() * n0, *levels),
            _ => return Ok(BuiltModel::plain(model, gamma)),
        },
        _ => return Ok(BuiltModel::plain(model, gamma)),
    };
    let mut constants = BTreeMap::new();
    for i in 0..levels {
        for j in 0..levels {
            let mut m = Mat::zeros(n, n);
            for a in 0..outer {
                m[(a * levels + i, a * levels + j)] = c(1.0, 0.0);
            }
            constants.insert((i, j), Operator::new(m));
        }
    }
    Ok(BuiltModel { model, constants, levels, renorm: geometric_renorm(levels), gamma })
}

/// A model file: either an explicit density or a recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelFile {
    Recipe { recipe: ModelRecipe },
    Spec(ModelSpec),
}

impl ModelFile {
    pub fn build(&self) -> Result<BuiltModel> {
        match self {
            ModelFile::Recipe { recipe } => build_recipe(recipe),
            ModelFile::Spec(spec) => Ok(BuiltModel::plain(WStarModel::build(spec)?, None)),
        }
    }
}

pub fn load_model_json(text: &str) -> Result<BuiltModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.build()
}

#[derive(Clone, Debug)]
pub struct NegativeFixture {
    pub label: String,
    pub recipe: ModelRecipe,
    pub axiom: u32,
    pub instantiation: Instantiation,
}

/// Model/axiom pairs on which the axiom is designed to fail.
pub fn negative_fixtures() -> Vec<NegativeFixture> {
    let mut out = Vec::new();
    let finite = [
        ModelRecipe::Tracial { n: 2 },
        ModelRecipe::Tracial { n: 4 },
        ModelRecipe::Diagonal { p: vec![2.0 / 3.0, 1.0 / 3.0] },
        ModelRecipe::Periodic { lambda: 0.5, levels: 4 },
        ModelRecipe::GeometricTruncation { n0: 1, levels: 3 },
    ];
    for r in finite {
        out.push(NegativeFixture {
            label: format!("(23) on {}", recipe_label(&r)),
            instantiation: Instantiation { gamma: Some(gamma_of(&r).unwrap_or(LN_2)), ..Default::default() },
            recipe: r,
            axiom: 23,
        });
    }
    out.push(NegativeFixture {
        label: "(21) with gamma = ln 3 on periodic(1/2, 4)".into(),
        recipe: ModelRecipe::Periodic { lambda: 0.5, levels: 4 },
        axiom: 21,
        instantiation: Instantiation { gamma: Some(3f64.ln()), ..Default::default() },
    });
    let geo = ModelRecipe::GeometricTruncation { n0: 2, levels: 2 };
    out.push(NegativeFixture {
        label: "(27) on geometric_truncation(2, 2)".into(),
        instantiation: Instantiation {
            gamma: Some(LN_2),
            levels: 2,
            renorm: geometric_renorm(2),
            ..Default::default()
        },
        recipe: geo,
        axiom: 27,
    });
    out
}

pub fn recipe_label(r: &ModelRecipe) -> String {
    match r {
        ModelRecipe::Tracial { n } => format!("tracial({n})"),
        ModelRecipe::Diagonal { p } => {
            format!("diagonal({})", p.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(","))
        }
        ModelRecipe::GeometricTruncation { n0, levels } => format!("geometric_truncation({n0}, {levels})"),
        ModelRecipe::Periodic { lambda, levels } => format!("periodic({lambda}, {levels})"),
        ModelRecipe::Tensor { left, right } => format!("{} ⊗ {}", recipe_label(left), recipe_label(right)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::ModularCalculus;
    use proptest::prelude::*;

    #[test]
    fn tracial_qubit() {
        let b = build_recipe(&ModelRecipe::Tracial { n: 2 }).unwrap();
        assert_eq!(b.model.eigenvalues(), &[0.5, 0.5]);
        assert!(b.constants.is_empty());
    }

    #[test]
    fn geometric_state_values() {
        let b = build_recipe(&ModelRecipe::GeometricTruncation { n0: 1, levels: 3 }).unwrap();
        let v = b.model.state(&b.constants[&(0, 0)]).unwrap();
        assert!((v.re - 4.0 / 7.0).abs() < 1e-15);
        let d = b.renormalization_deltas();
        assert!((d[0] - (4.0 / 7.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn matrix_unit_relations() {
        let b = build_recipe(&ModelRecipe::GeometricTruncation { n0: 2, levels: 3 }).unwrap();
        let n = b.model.dim();
        let mut sum = Operator::zero(n);
        for i in 0..3 {
            sum = sum.add(&b.constants[&(i, i)]);
            for j in 0..3 {
                let w = &b.constants[&(i, j)];
                assert_eq!(w.adjoint(), b.constants[&(j, i)]);
                for k in 0..3 {
                    for l in 0..3 {
                        let prod = w.mul(&b.constants[&(k, l)]);
                        let want = if j == k { b.constants[&(i, l)].clone() } else { Operator::zero(n) };
                        assert_eq!(prod, want);
                    }
                }
            }
        }
        assert_eq!(sum, Operator::identity(n));
    }

    #[test]
    fn periodic_spectrum_is_dyadic() {
        let b = build_recipe(&ModelRecipe::Periodic { lambda: 0.5, levels: 4 }).unwrap();
        let mc = ModularCalculus::new(b.model.clone());
        for r in mc.flow_spectrum() {
            // independent oracle: ratios 2^k for |k| <= 3
            let k = r / LN_2;
            assert!((k - k.round()).abs() < 1e-12 && k.round().abs() <= 3.0, "{r}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        for r in [
            ModelRecipe::Tracial { n: 0 },
            ModelRecipe::Periodic { lambda: 1.5, levels: 4 },
            ModelRecipe::GeometricTruncation { n0: 1, levels: 1 },
            ModelRecipe::Diagonal { p: vec![0.5, -0.5] },
        ] {
            assert!(matches!(build_recipe(&r), Err(Error::BadParameters(_))), "{r:?}");
        }
    }

    #[test]
    fn model_files() {
        let b = load_model_json(r#"{"recipe":{"kind":"periodic","lambda":0.5,"levels":3}}"#).unwrap();
        assert_eq!(b.model.dim(), 3);
        assert!((b.gamma.unwrap() - LN_2).abs() < 1e-15);
        let b = load_model_json(r#"{"dim":2,"rho":{"eigenvalues":[0.75,0.25]}}"#).unwrap();
        assert_eq!(b.model.dim(), 2);
        assert!(load_model_json("{").is_err());
    }

    #[test]
    fn fixtures_cover_the_three_obstructions() {
        let f = negative_fixtures();
        for ax in [21, 23, 27] {
            assert!(f.iter().any(|x| x.axiom == ax));
        }
        assert!(f.iter().all(|x| x.axiom > 8));
    }

    proptest! {
        #[test]
        fn tensor_weights_are_a_state(n in 1usize..4, lambda in 0.1f64..0.9, levels in 2usize..4) {
            let r = ModelRecipe::Tensor {
                left: Box::new(ModelRecipe::Tracial { n }),
                right: Box::new(ModelRecipe::Periodic { lambda, levels }),
            };
            let b = build_recipe(&r).unwrap();
            let s: f64 = b.model.eigenvalues().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert_eq!(b.model.dim(), n * levels);
            prop_assert!((b.gamma.unwrap() + lambda.ln()).abs() < 1e-12);
        }
    }
}
