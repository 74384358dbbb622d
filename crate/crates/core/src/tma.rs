//! Transmission-mechanism analysis: counterfactual impulse responses in
//! which selected variables are prevented from responding to a shock.
//!
//! At every horizon an artificial structural shock is injected into each
//! shut channel so that its counterfactual response is exactly zero — the
//! defining property. With several channels shut the offsets interact
//! contemporaneously, so each horizon solves one |Z|×|Z| linear system in
//! the restricted impact sub-matrix, which is lower-triangular whenever
//! the impact matrix comes from a Cholesky factorization.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bvar::CoefficientDraws;
use crate::error::{Error, Result};
use crate::svar::StructuralModel;

/// The artificial shocks that keep a set of channels shut.
#[derive(Clone, Debug)]
pub struct ShockSchedule {
    /// Structural shock source the experiment responds to.
    pub source: usize,
    /// Shut channels, ascending.
    pub shut: Vec<usize>,
    /// (H+1)×|Z| artificial structural shocks, columns matching `shut`.
    pub shocks: DMatrix<f64>,
}

/// Counterfactual responses of all variables to a one-standard-deviation
/// shock in `shock`, holding every variable in `shut` at exactly zero
/// response. Returns the (H+1)×M response matrix and the shock schedule
/// that enforces it.
pub fn shutdown_irf(
    model: &StructuralModel,
    shock: usize,
    shut: &[usize],
    horizons: usize,
) -> Result<(DMatrix<f64>, ShockSchedule)> {
    let m = model.m();
    if shock >= m {
        return Err(Error::invalid(format!("shock index {shock} out of range")));
    }
    let mut shut: Vec<usize> = shut.to_vec();
    shut.sort_unstable();
    shut.dedup();
    if shut.iter().any(|&z| z >= m) {
        return Err(Error::invalid("shut channel out of range"));
    }
    if shut.contains(&shock) {
        return Err(Error::invalid(
            "the shocked variable cannot be a shut channel",
        ));
    }
    let impact = &model.impact;
    // Restricted impact sub-matrix; inherits lower-triangularity from C.
    let z_len = shut.len();
    let restricted = DMatrix::from_fn(z_len, z_len, |r, c| impact[(shut[r], shut[c])]);
    for d in 0..z_len {
        if restricted[(d, d)].abs() < 1e-300 {
            return Err(Error::Singular(format!(
                "restricted impact sub-matrix has zero diagonal at channel {}",
                shut[d]
            )));
        }
    }

    let coeffs = &model.coeffs;
    let p = coeffs.lags();
    let mut responses = DMatrix::zeros(horizons + 1, m);
    let mut schedule = DMatrix::zeros(horizons + 1, z_len);
    let mut total = DVector::zeros(m);

    for h in 0..=horizons {
        // Homogeneous propagation of the counterfactual path so far, plus
        // the original impulse at h = 0.
        total.fill(0.0);
        for lag in 1..=p.min(h) {
            let past = responses.row(h - lag).transpose();
            total.gemv(1.0, &coeffs.lag_matrices[lag - 1], &past, 1.0);
        }
        if h == 0 {
            total += impact.column(shock);
        }
        // Artificial shocks that zero the shut channels this horizon.
        let rhs = DVector::from_fn(z_len, |r, _| -total[shut[r]]);
        let artificial = restricted
            .solve_lower_triangular(&rhs)
            .ok_or_else(|| Error::Singular("restricted impact sub-matrix".into()))?;
        for (col, &z) in shut.iter().enumerate() {
            schedule[(h, col)] = artificial[col];
            total += impact.column(z) * artificial[col];
        }
        for &z in &shut {
            total[z] = 0.0; // defining property, enforced exactly
        }
        responses.row_mut(h).copy_from(&total.transpose());
    }
    Ok((
        responses,
        ShockSchedule { source: shock, shut, shocks: schedule },
    ))
}

/// Counterfactual responses per posterior draw with a common impact
/// matrix; reduced in draw order.
pub fn shutdown_irf_draws(
    draws: &CoefficientDraws,
    impact: &DMatrix<f64>,
    shock: usize,
    shut: &[usize],
    horizons: usize,
) -> Result<Vec<DMatrix<f64>>> {
    draws
        .draws
        .par_iter()
        .map(|coeffs| {
            let model = StructuralModel::new(coeffs.clone(), impact.clone())?;
            shutdown_irf(&model, shock, shut, horizons).map(|(r, _)| r)
        })
        .collect()
}

/// Share of the cumulative baseline response generated by the shut
/// channels: `(baseline − counterfactual) / baseline` at `horizon` for
/// `variable`. `None` when the baseline is too small to divide by.
pub fn amplification_share(
    baseline_cumulative: &DMatrix<f64>,
    counterfactual_cumulative: &DMatrix<f64>,
    variable: usize,
    horizon: usize,
) -> Option<f64> {
    let baseline = baseline_cumulative[(horizon, variable)];
    let scale = baseline_cumulative.amax().max(1e-300);
    if baseline.abs() < 1e-10 * scale {
        return None;
    }
    let counterfactual = counterfactual_cumulative[(horizon, variable)];
    Some((baseline - counterfactual) / baseline)
}
