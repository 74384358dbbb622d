//! Recursive (Cholesky) identification of structural shocks.
//!
//! The reduced-form residual covariance is factored as Σ_u = C·Cᵀ with C
//! lower-triangular and positive on the diagonal, so that u_t = C·ε_t maps
//! unit-variance orthogonal shocks into the correlated residuals. The
//! variable ordering of the panel decides which contemporaneous channels
//! are open; permuting it and re-identifying is the standard robustness
//! exercise.

use nalgebra::{Cholesky, DMatrix};

use crate::bvar::VarCoefficients;
use crate::error::{Error, Result};
use crate::panel::{TimeSeriesPanel, VariableSpec};

/// One identified draw: reduced-form coefficients plus the impact matrix.
#[derive(Clone, Debug)]
pub struct StructuralModel {
    pub coeffs: VarCoefficients,
    /// Lower-triangular impact matrix C with C·Cᵀ = Σ_u.
    pub impact: DMatrix<f64>,
}

impl StructuralModel {
    pub fn new(coeffs: VarCoefficients, impact: DMatrix<f64>) -> Result<Self> {
        let m = coeffs.m();
        if impact.nrows() != m || impact.ncols() != m {
            return Err(Error::invalid("impact matrix not conformable"));
        }
        for i in 0..m {
            if !(impact[(i, i)] > 0.0) {
                return Err(Error::invalid(
                    "impact matrix must have a strictly positive diagonal",
                ));
            }
            for j in (i + 1)..m {
                if impact[(i, j)] != 0.0 {
                    return Err(Error::invalid("impact matrix must be lower-triangular"));
                }
            }
        }
        Ok(Self { coeffs, impact })
    }

    /// Identifies a draw against a residual covariance.
    pub fn identify(coeffs: VarCoefficients, sigma_u: &DMatrix<f64>) -> Result<Self> {
        let impact = cholesky_identify(sigma_u)?;
        Self::new(coeffs, impact)
    }

    pub fn m(&self) -> usize {
        self.coeffs.m()
    }
}

/// Lower-triangular C with C·Cᵀ = Σ_u and positive diagonal. Errors on a
/// non-positive-definite input, reporting its smallest eigenvalue.
pub fn cholesky_identify(sigma_u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma_u.nrows() != sigma_u.ncols() {
        return Err(Error::invalid("covariance matrix must be square"));
    }
    match Cholesky::new(sigma_u.clone()) {
        Some(chol) => Ok(chol.l()),
        None => {
            let min_eig = sigma_u.clone().symmetric_eigen().eigenvalues.min();
            Err(Error::NotPositiveDefinite { min_eig })
        }
    }
}

/// Recovers structural shocks from reduced-form residuals by forward
/// substitution of u_t = C·ε_t. `residuals` has one row per period.
pub fn recover_shocks(impact: &DMatrix<f64>, residuals: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if residuals.ncols() != impact.nrows() {
        return Err(Error::invalid("residual width does not match impact matrix"));
    }
    let stacked = residuals.transpose();
    let shocks = impact
        .solve_lower_triangular(&stacked)
        .ok_or_else(|| Error::Singular("impact matrix has a zero diagonal entry".into()))?;
    Ok(shocks.transpose())
}

/// Permutes panel columns into the requested name order. Downstream
/// estimation and identification must be re-run by the caller.
pub fn apply_ordering(panel: &TimeSeriesPanel, order: &[String]) -> Result<TimeSeriesPanel> {
    if order.len() != panel.width() {
        return Err(Error::InvalidOrdering(format!(
            "ordering lists {} names for {} variables",
            order.len(),
            panel.width()
        )));
    }
    let mut sources = Vec::with_capacity(order.len());
    for name in order {
        let idx = panel.var_index(name)?;
        if sources.contains(&idx) {
            return Err(Error::InvalidOrdering(format!("`{name}` listed twice")));
        }
        sources.push(idx);
    }
    let values = DMatrix::from_fn(panel.len(), panel.width(), |i, j| {
        panel.values()[(i, sources[j])]
    });
    let variables = sources
        .iter()
        .enumerate()
        .map(|(k, &src)| {
            let v = &panel.variables()[src];
            VariableSpec::new(v.name.clone(), v.units.clone(), k)
        })
        .collect();
    TimeSeriesPanel::new(panel.start(), values, variables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_factorizes_to_identity() {
        let c = cholesky_identify(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(c, DMatrix::identity(4, 4));
    }

    #[test]
    fn two_by_two_hand_example() {
        let sigma = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let c = cholesky_identify(&sigma).unwrap();
        assert_abs_diff_eq!(c[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[(1, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[(1, 1)], 2.0, epsilon = 1e-12);
        assert_eq!(c[(0, 1)], 0.0);
        let rebuilt = &c * c.transpose();
        assert!((rebuilt - sigma).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_definite() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky_identify(&sigma) {
            Err(Error::NotPositiveDefinite { min_eig }) => {
                assert_abs_diff_eq!(min_eig, -1.0, epsilon = 1e-10)
            }
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn recovers_generating_shocks_exactly() {
        let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, -0.3, 0.1, -0.3, 1.0]);
        let c = cholesky_identify(&sigma).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let eps = DMatrix::from_fn(50, 3, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let residuals = &eps * c.transpose(); // rows u_t = C ε_t
        let recovered = recover_shocks(&c, &residuals).unwrap();
        assert!((recovered - eps).amax() < 1e-10);
    }

    #[test]
    fn recovered_shocks_have_identity_covariance() {
        let t = 5000;
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
        let c = cholesky_identify(&sigma).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let eps = DMatrix::from_fn(t, 2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let residuals = &eps * c.transpose();
        let recovered = recover_shocks(&c, &residuals).unwrap();
        let cov = recovered.transpose() * &recovered / t as f64;
        let tol = 3.0 / (t as f64).sqrt();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - expect).abs() < tol, "cov {cov}");
            }
        }
    }

    #[test]
    fn identity_impact_passes_residuals_through() {
        let residuals = DMatrix::from_row_slice(2, 2, &[0.3, -0.1, 0.5, 0.2]);
        let recovered = recover_shocks(&DMatrix::identity(2, 2), &residuals).unwrap();
        assert_eq!(recovered, residuals);
    }

    fn named_panel(names: &[&str]) -> TimeSeriesPanel {
        let t = 6;
        let values = DMatrix::from_fn(t, names.len(), |i, j| (i * names.len() + j) as f64);
        let variables = names
            .iter()
            .enumerate()
            .map(|(k, n)| VariableSpec::new(*n, "", k))
            .collect();
        TimeSeriesPanel::new("2000-01".parse().unwrap(), values, variables).unwrap()
    }

    #[test]
    fn reordering_matches_requested_names() {
        let base = ["CO2", "TCC", "PR", "AT", "SST", "SIE", "SIT", "Albedo"];
        let panel = named_panel(&base);
        // Robustness orderings: temperatures early, then Albedo second.
        for target in [
            ["CO2", "AT", "SST", "TCC", "PR", "SIE", "SIT", "Albedo"],
            ["CO2", "Albedo", "TCC", "PR", "AT", "SST", "SIE", "SIT"],
        ] {
            let order: Vec<String> = target.iter().map(|s| s.to_string()).collect();
            let permuted = apply_ordering(&panel, &order).unwrap();
            assert_eq!(permuted.names(), target.to_vec());
            for (j, name) in target.iter().enumerate() {
                let src = base.iter().position(|b| b == name).unwrap();
                for i in 0..panel.len() {
                    assert_eq!(permuted.values()[(i, j)], panel.values()[(i, src)]);
                }
            }
        }
    }

    #[test]
    fn identity_ordering_is_a_no_op() {
        let panel = named_panel(&["a", "b", "c"]);
        let order: Vec<String> = panel.names().iter().map(|s| s.to_string()).collect();
        let same = apply_ordering(&panel, &order).unwrap();
        assert_eq!(&same, &panel);
    }

    #[test]
    fn rejects_invalid_permutations() {
        let panel = named_panel(&["a", "b", "c"]);
        let twice: Vec<String> = ["a", "a", "b"].iter().map(|s| s.to_string()).collect();
        assert!(apply_ordering(&panel, &twice).is_err());
        let short: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert!(apply_ordering(&panel, &short).is_err());
        let unknown: Vec<String> = ["a", "b", "z"].iter().map(|s| s.to_string()).collect();
        assert!(apply_ordering(&panel, &unknown).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cholesky_reconstructs_random_pd_matrices(
            m in 2usize..=18,
            seed in 0u64..1000,
        ) {
            // Σ = B·Bᵀ + I is comfortably positive definite.
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let b = DMatrix::from_fn(m, m, |_, _| {
                let x: f64 = StandardNormal.sample(&mut rng);
                x
            });
            let sigma = &b * b.transpose() + DMatrix::identity(m, m);
            let c = cholesky_identify(&sigma).unwrap();
            let rebuilt = &c * c.transpose();
            let rel = (&rebuilt - &sigma).norm() / sigma.norm();
            prop_assert!(rel < 1e-12, "relative error {rel}");
            for i in 0..m {
                prop_assert!(c[(i, i)] > 0.0);
                for j in (i + 1)..m {
                    prop_assert_eq!(c[(i, j)], 0.0);
                }
            }
        }
    }
}
