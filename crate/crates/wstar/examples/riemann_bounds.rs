//! Riemann-sum approximations of sigma_f(x) against their closed-form error bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wstar::discretization::riemann_sigma_f;
use wstar::lemmas::RIEMANN_KERNELS;
use wstar::metrics::norm_star_spectral;
use wstar::sampling::random_operator;
use wstar::{ModularCalculus, WStarModel};

fn main() -> wstar::Result<()> {
    let mc = ModularCalculus::new(WStarModel::from_eigenvalues(&[0.5, 0.3, 0.2])?);
    let x = random_operator(3, &mut ChaCha8Rng::seed_from_u64(2));
    println!("{:<28} {:>3} {:>12} {:>12} {:>8}", "kernel", "n", "error", "bound", "ratio");
    for spec in &RIEMANN_KERNELS {
        let exact = spec.apply(&mc, &x)?;
        for n in [2, 4, 8, 16] {
            let (approx, bound) = riemann_sigma_f(&mc, spec, n, &x)?;
            let err = norm_star_spectral(&mc, &approx.sub(&exact))?;
            println!("{:<28} {n:>3} {err:>12.4e} {bound:>12.4e} {:>8.4}", format!("{spec:?}"), err / bound);
        }
    }
    Ok(())
}
