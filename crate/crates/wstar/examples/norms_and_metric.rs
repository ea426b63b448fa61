//! The three phi-norms of random operators and the two characterizations of ||x||*.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wstar::metrics::{norm_bundle, norm_star_variational, normg_identity_check, VariationalMode};
use wstar::sampling::{random_model, random_operator};
use wstar::ModularCalculus;

fn main() -> wstar::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mc = ModularCalculus::new(random_model(4, &mut rng));
    println!("{:>10} {:>10} {:>10} {:>12} {:>12} {:>12}", "||x||phi", "||x||#", "||x||*", "variational", "numeric", "|2*-G0#|");
    for _ in 0..6 {
        let x = random_operator(4, &mut rng);
        let b = norm_bundle(&mc, &x)?;
        let (exact, _) = norm_star_variational(&mc, &x, VariationalMode::ExactMinimizer)?;
        let (num, _) = norm_star_variational(&mc, &x, VariationalMode::NumericSearch { starts: 2, max_iters: 200, seed: 3 })?;
        let (lhs, rhs) = normg_identity_check(&mc, &x)?;
        println!("{:>10.6} {:>10.6} {:>10.6} {:>12.9} {:>12.9} {:>12.2e}", b.l2, b.sharp, b.star, exact, num, (lhs - rhs).abs());
    }
    Ok(())
}
