//! The modular flow on a qubit: sigma_t(e12) = 2^{it} e12, the KMS-type identity
//! phi(sigma_t(x)) = phi(x), and the spectrum of the flow.

use wstar::{ModularCalculus, Operator, WStarModel, C64};

fn main() -> wstar::Result<()> {
    let mc = ModularCalculus::new(WStarModel::from_eigenvalues(&[2.0 / 3.0, 1.0 / 3.0])?);
    let e12 = Operator::unit(2, 0, 1);
    println!("Sp(sigma) = {:?}", mc.flow_spectrum());
    println!("Spec_sigma(e12) = {:?}", mc.arveson_spectrum(&e12, 1e-12));
    println!("{:>6} {:>24} {:>24}", "t", "sigma_t(e12)[0,1]", "2^{it}");
    for t in [0.0, 0.5, 1.0, 2.0] {
        let s = mc.modular_flow(t, &e12)?;
        let z = s.mat()[(0, 1)];
        let w = C64::from_polar(1.0, t * std::f64::consts::LN_2);
        println!("{t:>6.2} {:>24} {:>24}", format!("{:.6}{:+.6}i", z.re, z.im), format!("{:.6}{:+.6}i", w.re, w.im));
    }
    let x = Operator::new(wstar::model::Mat::from_fn(2, 2, |i, j| C64::new(1.0 + i as f64, j as f64 - 0.5)));
    let state = |y: &Operator| mc.model().state(y);
    println!("phi(x) = {:.12}, phi(sigma_1.3(x)) = {:.12}", state(&x)?, state(&mc.modular_flow(1.3, &x)?)?);
    Ok(())
}
