//! The stage-by-stage definability chain on one model, printed as a table.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wstar::cli::stage_table;
use wstar::definability::{run_chain, ChainOptions, Sweep};
use wstar::sampling::random_in_ball;
use wstar::{ModularCalculus, WStarModel};

fn main() -> wstar::Result<()> {
    let mc = ModularCalculus::new(WStarModel::from_eigenvalues(&[2.0 / 3.0, 1.0 / 3.0])?);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = random_in_ball(2, 1.0, &mut rng);
    let y = random_in_ball(2, 1.0, &mut rng);
    let sweep = Sweep { us: vec![0.1], ts: vec![0.25], ks: vec![1.0] };
    let rows = run_chain(&mc, &sweep, &x, &y, &ChainOptions::default())?;
    print!("{}", stage_table(&rows));
    println!("{} rows, {} failed", rows.len(), rows.iter().filter(|r| !r.pass).count());
    Ok(())
}
