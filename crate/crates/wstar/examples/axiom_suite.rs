//! Runs axioms (1)–(20) plus the model-specific axioms on the catalog models.

use std::time::Instant;

use wstar::catalog::{build_recipe, recipe_label, ModelRecipe};
use wstar::clogic::{axiom_library, report::tally, run_suite, Interpretation, SuiteConfig};
use wstar::ModularCalculus;

fn main() -> wstar::Result<()> {
    let recipes = [
        ModelRecipe::Tracial { n: 2 },
        ModelRecipe::Tracial { n: 4 },
        ModelRecipe::Diagonal { p: vec![2.0 / 3.0, 1.0 / 3.0] },
        ModelRecipe::Periodic { lambda: 0.5, levels: 4 },
        ModelRecipe::GeometricTruncation { n0: 1, levels: 3 },
    ];
    let verbose = std::env::args().any(|a| a == "-v");
    let cfg = SuiteConfig::default();
    for r in &recipes {
        let built = build_recipe(r)?;
        let interp = Interpretation::with_constants(ModularCalculus::new(built.model.clone()), &built.constants)?;
        let insts: Vec<_> = axiom_library(&built.instantiation())?.into_values().flatten().collect();
        let t0 = Instant::now();
        let reps = run_suite(&interp, &insts, &cfg)?;
        let (pass, bad, expected) = tally(&reps);
        println!(
            "{:<28} {:>3} instances  pass {:>3}  unexpected fail {:>2}  expected fail {:>2}  {:>6} ms",
            recipe_label(r),
            reps.len(),
            pass,
            bad,
            expected,
            t0.elapsed().as_millis()
        );
        for rep in reps.iter().filter(|x| verbose || !x.pass) {
            println!("    {:<60} {:>12.3e} {:>6} {:>6}ms", rep.id, rep.value, if rep.pass { "PASS" } else { "FAIL" }, rep.wall_time_ms);
        }
    }
    Ok(())
}
