//! The finite-model behaviour of axiom (23), checked against closed-form witnesses.

use std::f64::consts::{LN_2, PI};

use wstar::clogic::{axiom_instances, eval_condition, AxiomKind, BallSearch, Instantiation, Interpretation, Strategy};
use wstar::{ModularCalculus, Operator, WStarModel, C64};

fn only(witness: Operator) -> BallSearch {
    BallSearch { strategy: Strategy::StructuredWitness, structured: false, extra_witnesses: vec![witness], ..Default::default() }
}

/// On diag(2/3, 1/3) the scaled projection a = t e22 with t^2 = 3/pi makes the inf part of (23)
/// equal to t^4 (1 - t^2)^2 phi(e22) = (3/pi^2)(1 - 3/pi)^2 < 0.01, so the inf part alone cannot
/// separate finite models from the axiomatized class at that threshold.
#[test]
fn inf_part_of_23_has_a_small_scaled_projection_witness() {
    let it = Interpretation::new(ModularCalculus::new(WStarModel::from_eigenvalues(&[2.0 / 3.0, 1.0 / 3.0]).unwrap()));
    let inst = Instantiation { gamma: Some(LN_2), ..Default::default() };
    let inf = axiom_instances(23, &inst).unwrap().into_iter().find(|i| i.kind == AxiomKind::Existential).unwrap();
    let t = (3.0 / PI).sqrt();
    let a = Operator::unit(2, 1, 1).scale(C64::new(t, 0.0));
    let got = eval_condition(&it, &inf.condition, &only(a)).unwrap().value;
    let oracle = 3.0 / (PI * PI) * (1.0 - 3.0 / PI).powi(2);
    assert!((got - oracle).abs() < 1e-12, "value {got} vs closed form {oracle}");
    assert!(got < 0.01);
}

/// The sup part is what every finite model violates: for a = 0 it reduces to 0, but the
/// search over D_1 finds a non-central element of the (type I) centralizer.
#[test]
fn sup_part_of_23_is_positive_on_finite_models() {
    for p in [vec![0.5, 0.5], vec![2.0 / 3.0, 1.0 / 3.0]] {
        let it = Interpretation::new(ModularCalculus::new(WStarModel::from_eigenvalues(&p).unwrap()));
        let inst = Instantiation { gamma: Some(LN_2), ..Default::default() };
        let sup = axiom_instances(23, &inst).unwrap().into_iter().find(|i| i.kind == AxiomKind::Universal).unwrap();
        assert!(sup.finite_obstruction);
        let v = eval_condition(&it, &sup.condition, &BallSearch::default()).unwrap().value;
        assert!(v > 0.01, "{p:?}: sup part {v}");
    }
}
