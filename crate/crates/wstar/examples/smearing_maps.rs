//! Fejér and de la Vallée Poussin smearing as Schur multipliers: band-limiting and the
//! spectral membership test on a periodic model.

use wstar::catalog::{build_recipe, ModelRecipe};
use wstar::sampling::random_operator;
use wstar::smearing::{dlvp_map, fejer_map, spectral_membership_test};
use wstar::ModularCalculus;

fn main() -> wstar::Result<()> {
    let b = build_recipe(&ModelRecipe::Periodic { lambda: 0.5, levels: 4 })?;
    let mc = ModularCalculus::new(b.model);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    let x = random_operator(mc.dim(), &mut rng);
    println!("Spec(x)          = {:?}", mc.arveson_spectrum(&x, 1e-12));
    let f = fejer_map(&mc, 1.0, 0.0, &x)?;
    println!("Spec(F_1(x))     = {:?}", mc.arveson_spectrum(&f, 1e-12));
    let h = dlvp_map(&mc, 1.0, &x)?;
    println!("Spec(H_1(x))     = {:?}", mc.arveson_spectrum(&h, 1e-12));
    for k in 0..=2u32 {
        let t = mc.spectral_truncate(k as f64, &x)?;
        println!(
            "K = {k}: x in M(sigma,[-K,K])? {:<5}  truncation in it? {}",
            spectral_membership_test(&mc, k, &x, 2 * k + 4)?,
            spectral_membership_test(&mc, k, &t, 2 * k + 4)?
        );
    }
    Ok(())
}
