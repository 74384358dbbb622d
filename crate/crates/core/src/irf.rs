//! Companion form and impulse responses.
//!
//! The response of the system to a one-standard-deviation structural shock
//! lands as the corresponding column of the impact matrix at horizon 0 and
//! then propagates through the homogeneous VAR recursion
//! `r_h = Σ_p Φ_p r_{h-p}` — the companion map applied to the stacked
//! response, never a dense matrix power. Posterior bands are pointwise
//! quantiles across coefficient draws; with Σ_u held fixed the impact
//! column is common to every draw, so band width reflects coefficient
//! uncertainty only.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bvar::{CoefficientDraws, VarCoefficients};
use crate::stats::Band;
use crate::svar::StructuralModel;

/// Default band levels: 90% of the posterior draws.
pub const BAND_LEVELS: (f64, f64) = (0.05, 0.95);

/// Stacked VAR(1) form of a VAR(P).
#[derive(Clone, Debug)]
pub struct CompanionForm {
    /// (M·P)×(M·P) block matrix: `[Φ_1 … Φ_P]` on top, identity blocks on
    /// the sub-diagonal, zeros elsewhere.
    pub matrix: DMatrix<f64>,
    /// Stacked intercept: c in the first M entries, zeros below.
    pub intercept: DVector<f64>,
    pub m: usize,
    pub lags: usize,
}

impl CompanionForm {
    pub fn dim(&self) -> usize {
        self.m * self.lags
    }

    /// Largest eigenvalue modulus; ≥ 1 flags an explosive draw.
    pub fn spectral_radius(&self) -> f64 {
        self.matrix
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Builds the companion form of a coefficient set. The optional trend
/// loading does not enter: it shifts the deterministic path and cancels
/// from every impulse-response difference.
pub fn companion(coeffs: &VarCoefficients) -> CompanionForm {
    let m = coeffs.m();
    let p = coeffs.lags();
    let dim = m * p;
    let mut matrix = DMatrix::zeros(dim, dim);
    for (block, phi) in coeffs.lag_matrices.iter().enumerate() {
        matrix.view_mut((0, block * m), (m, m)).copy_from(phi);
    }
    for block in 1..p {
        for i in 0..m {
            matrix[(block * m + i, (block - 1) * m + i)] = 1.0;
        }
    }
    let mut intercept = DVector::zeros(dim);
    intercept.rows_mut(0, m).copy_from(&coeffs.intercept);
    CompanionForm { matrix, intercept, m, lags: p }
}

/// Responses of all M variables over horizons 0..=H to a one-standard-
/// deviation structural shock in `shock`. Row h is the response at
/// horizon h.
pub fn irf(model: &StructuralModel, shock: usize, horizons: usize) -> DMatrix<f64> {
    let impact = model.impact.column(shock).into_owned();
    irf_from_impact(&model.coeffs, &impact, horizons)
}

/// Propagates an arbitrary horizon-0 impulse through the VAR recursion.
pub fn irf_from_impact(
    coeffs: &VarCoefficients,
    impact: &DVector<f64>,
    horizons: usize,
) -> DMatrix<f64> {
    let m = coeffs.m();
    let p = coeffs.lags();
    let mut responses = DMatrix::zeros(horizons + 1, m);
    responses.row_mut(0).copy_from(&impact.transpose());
    let mut next = DVector::zeros(m);
    for h in 1..=horizons {
        next.fill(0.0);
        for lag in 1..=p.min(h) {
            let past = responses.row(h - lag).transpose();
            next.gemv(1.0, &coeffs.lag_matrices[lag - 1], &past, 1.0);
        }
        responses.row_mut(h).copy_from(&next.transpose());
    }
    responses
}

/// Per-draw responses with pointwise posterior quantile bands.
#[derive(Clone, Debug)]
pub struct IrfResult {
    pub shock: usize,
    /// One (H+1)×M response matrix per posterior draw.
    pub responses: Vec<DMatrix<f64>>,
    pub bands: Band,
}

impl IrfResult {
    pub fn horizons(&self) -> usize {
        self.bands.mean.nrows() - 1
    }

    /// Bands of the running-sum responses.
    pub fn cumulative_bands(&self) -> Band {
        let cumulated: Vec<DMatrix<f64>> = self.responses.iter().map(cumulative).collect();
        Band::from_samples(&cumulated, self.bands.levels)
    }
}

/// IRFs across posterior draws with a common impact matrix (Σ_u fixed).
/// Draws are processed in parallel and reduced in draw order, so the
/// result is run-to-run identical.
pub fn irf_bands(
    draws: &CoefficientDraws,
    impact: &DMatrix<f64>,
    shock: usize,
    horizons: usize,
    levels: (f64, f64),
) -> IrfResult {
    let column = impact.column(shock).into_owned();
    let responses: Vec<DMatrix<f64>> = draws
        .draws
        .par_iter()
        .map(|coeffs| irf_from_impact(coeffs, &column, horizons))
        .collect();
    let bands = Band::from_samples(&responses, levels);
    IrfResult { shock, responses, bands }
}

/// Running sums along the horizon axis.
pub fn cumulative(responses: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = responses.clone();
    for h in 1..out.nrows() {
        let prev = out.row(h - 1).into_owned();
        let mut row = out.row_mut(h);
        row += prev;
    }
    out
}
