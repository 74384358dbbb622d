//! Random-model generators shared by unit tests.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bvar::VarCoefficients;
use crate::irf;

fn normal(rng: &mut ChaCha12Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws a random VAR and rescales its lag blocks so the companion
/// spectral radius lands on `target` (scaling lag p by s^p scales every
/// companion eigenvalue by s).
pub(crate) fn random_stable_var(
    m: usize,
    p: usize,
    target: f64,
    rng: &mut ChaCha12Rng,
) -> VarCoefficients {
    let mut phis: Vec<DMatrix<f64>> = (0..p)
        .map(|lag| DMatrix::from_fn(m, m, |_, _| 0.5 * normal(rng) / (lag + 1) as f64))
        .collect();
    let probe = VarCoefficients {
        intercept: DVector::zeros(m),
        lag_matrices: phis.clone(),
        trend: None,
    };
    let rho = irf::companion(&probe).spectral_radius();
    if rho > 1e-12 {
        let s = target / rho;
        for (lag, phi) in phis.iter_mut().enumerate() {
            *phi *= s.powi(lag as i32 + 1);
        }
    }
    VarCoefficients {
        intercept: DVector::from_fn(m, |_, _| 0.1 * normal(rng)),
        lag_matrices: phis,
        trend: None,
    }
}

/// Random lower-triangular impact matrix from Σ = B·Bᵀ + I.
pub(crate) fn random_impact(m: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(m, m, |_, _| normal(rng));
    let sigma = &b * b.transpose() + DMatrix::identity(m, m);
    Cholesky::new(sigma).expect("positive definite by construction").l()
}
