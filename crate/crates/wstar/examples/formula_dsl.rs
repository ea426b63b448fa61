//! Writing conditions in the prefix syntax and evaluating them on a model.

use wstar::clogic::dsl::parse_condition;
use wstar::clogic::{eval_condition, BallSearch, Interpretation};
use wstar::{ModularCalculus, WStarModel};

fn main() -> wstar::Result<()> {
    let it = Interpretation::new(ModularCalculus::new(WStarModel::from_eigenvalues(&[0.7, 0.3])?));
    let formulas = [
        // The involution is isometric for d (the weight p_i p_j / (p_i + p_j) is symmetric).
        "(sup 0 1 (abs (affine 0 (1 (d (star x0) 0)) (-1 (d x0 0)))))",
        // phi is sigma-invariant: identically zero.
        "(sup 0 1 (mod (slin (1 0 (phi (sigma 0.7 x0))) (-1 0 (phi x0)))))",
        // Some element of the unit ball is at distance >= 1/2 from 0.
        "(inf 0 1 (max 0 (affine 0.5 (-1 (d x0 0)))))",
    ];
    let search = BallSearch::default();
    for f in formulas {
        let cond = parse_condition(f)?;
        let ev = eval_condition(&it, &cond, &search)?;
        println!("{:>12.4e}  [{}]  {f}", ev.value, ev.method);
    }
    Ok(())
}
