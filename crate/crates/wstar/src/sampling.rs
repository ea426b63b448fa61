//! Random operators and models used by searches, examples and tests.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{c, Mat, Operator, WStarModel, C64};

pub fn gaussian_mat<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    Mat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im) / (2.0 * n as f64).sqrt()
    })
}

/// Complex Gaussian matrix with operator norm about 2.
pub fn random_operator<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Operator {
    Operator::new(gaussian_mat(n, rng).map(|z| z * 1.4))
}

/// Random element of D_m with norm drawn uniformly from (0, m].
pub fn random_in_ball<R: Rng + ?Sized>(n: usize, m: f64, rng: &mut R) -> Operator {
    let g = gaussian_mat(n, rng);
    let nm = crate::model::opnorm(&g);
    let target = m * rng.gen_range(0.05..=1.0);
    Operator::new(g.map(|z| z * (target / nm)))
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    let g = gaussian_mat(n, rng);
    (&g + g.adjoint()).map(|z| z * 0.5)
}

/// e^{iH} for a random Hermitian H.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Operator {
    let h = random_hermitian(n, rng).map(|z| z * 3.0);
    let eig = h.symmetric_eigen();
    let d = Mat::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, eig.eigenvalues[i]) } else { C64::default() });
    Operator::new(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// A dense, well-conditioned density matrix: a Wishart draw mixed with the trace.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    let g = gaussian_mat(n, rng);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    let mut rho = w.map(|z| z * (0.9 / tr));
    for i in 0..n {
        rho[(i, i)] += c(0.1 / n as f64, 0.0);
    }
    // Exact Hermitian symmetry and unit trace.
    let rho = (&rho + rho.adjoint()).map(|z| z * 0.5);
    let tr = rho.trace().re;
    rho.map(|z| z / tr)
}

pub fn random_model<R: Rng + ?Sized>(n: usize, rng: &mut R) -> WStarModel {
    WStarModel::from_matrix(random_density(n, rng)).expect("random density is a valid model")
}
