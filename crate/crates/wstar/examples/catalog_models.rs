//! Builds the catalog models and runs the negative fixtures (axioms designed to fail).

use wstar::catalog::{build_recipe, negative_fixtures, recipe_label, ModelRecipe};
use wstar::clogic::{axiom_instances, run_suite, Interpretation, SuiteConfig};
use wstar::ModularCalculus;

fn main() -> wstar::Result<()> {
    for r in [
        ModelRecipe::Tracial { n: 2 },
        ModelRecipe::Periodic { lambda: 0.5, levels: 4 },
        ModelRecipe::GeometricTruncation { n0: 1, levels: 3 },
        ModelRecipe::Tensor {
            left: Box::new(ModelRecipe::Tracial { n: 2 }),
            right: Box::new(ModelRecipe::GeometricTruncation { n0: 1, levels: 2 }),
        },
    ] {
        let b = build_recipe(&r)?;
        let mc = ModularCalculus::new(b.model.clone());
        println!("{}: dim {}, Sp(sigma) = {:?}", recipe_label(&r), b.model.dim(), mc.flow_spectrum());
        if b.levels > 0 {
            println!("  renormalization c = {:.6}, deltas {:?}", b.renorm, b.renormalization_deltas());
        }
    }
    println!("\nnegative fixtures:");
    for f in negative_fixtures() {
        let b = build_recipe(&f.recipe)?;
        let interp = Interpretation::with_constants(ModularCalculus::new(b.model.clone()), &b.constants)?;
        let insts = axiom_instances(f.axiom, &f.instantiation)?;
        for rep in run_suite(&interp, &insts, &SuiteConfig::default())? {
            println!("  {:<45} {:<45} {:>10.3e} {}", f.label, rep.id, rep.value, if rep.pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(())
}
