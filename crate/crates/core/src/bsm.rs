//! Stochastic deseasonalization via the basic structural model.
//!
//! A univariate series is split into stochastic trend, drift, seasonal and
//! noise components:
//!
//! ```text
//! y_t = μ_t + γ_t + η_t            observation
//! μ_t = μ_{t-1} + β_{t-1} + u_t    level, random walk with drift
//! β_t = β_{t-1} + v_t              drift, random walk
//! γ_t = −Σ_{m=1..s-1} γ_{t-m} + w_t   seasonal, sums to noise over a cycle
//! ```
//!
//! with independent Gaussian innovations. Everything runs through a
//! standard Kalman filter/smoother on the stacked state
//! `(μ, β, γ_t, …, γ_{t-s+2})`; innovation variances are estimated by
//! maximum likelihood in log-variance space.

use nalgebra::{DMatrix, DVector};

use crate::date::MonthDate;
use crate::error::{Error, Result};
use crate::optim;

/// Approximate-diffuse initial state variance, as a multiple of the series
/// variance. Smoothed components are insensitive to the exact constant.
pub const DIFFUSE_SCALE: f64 = 1e7;

/// Innovation variances of the four structural components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsmSpec {
    /// Seasonal period `s` (12 for monthly data).
    pub seasonal_period: usize,
    /// Observation-noise variance σ²_ηη.
    pub noise_var: f64,
    /// Level-innovation variance σ²_uu.
    pub level_var: f64,
    /// Drift-innovation variance σ²_vv.
    pub drift_var: f64,
    /// Seasonal-innovation variance σ²_ww.
    pub seasonal_var: f64,
}

impl BsmSpec {
    pub fn new(
        seasonal_period: usize,
        noise_var: f64,
        level_var: f64,
        drift_var: f64,
        seasonal_var: f64,
    ) -> Result<Self> {
        let spec = Self {
            seasonal_period,
            noise_var,
            level_var,
            drift_var,
            seasonal_var,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.seasonal_period < 2 {
            return Err(Error::invalid("seasonal period must be at least 2"));
        }
        let vars = [
            self.noise_var,
            self.level_var,
            self.drift_var,
            self.seasonal_var,
        ];
        if vars.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("variances must be finite and non-negative"));
        }
        if vars.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("at least one variance must be positive"));
        }
        Ok(())
    }
}

/// Linear-Gaussian state-space system for one structural model.
#[derive(Clone, Debug)]
pub struct StateSpace {
    /// State transition matrix, `dim × dim`.
    pub transition: DMatrix<f64>,
    /// Observation loading `z`, so `y_t = zᵀ α_t + η_t`.
    pub observation: DVector<f64>,
    /// State innovation covariance (diagonal).
    pub state_cov: DMatrix<f64>,
    /// Observation noise variance σ²_ηη.
    pub obs_var: f64,
    pub period: usize,
}

impl StateSpace {
    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }
}

/// Builds the state space for a [`BsmSpec`]. State dimension is
/// `2 + (period − 1)`: level, drift, and `period − 1` seasonal lags.
pub fn build_state_space(spec: &BsmSpec) -> Result<StateSpace> {
    spec.validate()?;
    let s = spec.seasonal_period;
    let dim = 2 + (s - 1);
    let mut transition = DMatrix::zeros(dim, dim);
    // Level picks up the previous drift; drift is a random walk.
    transition[(0, 0)] = 1.0;
    transition[(0, 1)] = 1.0;
    transition[(1, 1)] = 1.0;
    // Seasonal: γ_t = −(γ_{t-1} + … + γ_{t-s+1}) + w_t, lags shift down.
    for j in 0..(s - 1) {
        transition[(2, 2 + j)] = -1.0;
    }
    for j in 1..(s - 1) {
        transition[(2 + j, 2 + j - 1)] = 1.0;
    }
    let mut observation = DVector::zeros(dim);
    observation[0] = 1.0;
    observation[2] = 1.0;
    let mut state_cov = DMatrix::zeros(dim, dim);
    state_cov[(0, 0)] = spec.level_var;
    state_cov[(1, 1)] = spec.drift_var;
    state_cov[(2, 2)] = spec.seasonal_var;
    Ok(StateSpace {
        transition,
        observation,
        state_cov,
        obs_var: spec.noise_var,
        period: s,
    })
}

/// Filter pass output: per-step predicted and filtered moments plus the
/// prediction-error log-likelihood.
#[derive(Clone, Debug)]
pub struct FilterResult {
    pub predicted_mean: Vec<DVector<f64>>,
    pub predicted_cov: Vec<DMatrix<f64>>,
    pub filtered_mean: Vec<DVector<f64>>,
    pub filtered_cov: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

/// Runs the Kalman filter with the default diffuse initialization:
/// level seeded at the first observation, all state variances at
/// [`DIFFUSE_SCALE`] times the series variance.
pub fn kalman_filter(system: &StateSpace, series: &[f64]) -> Result<FilterResult> {
    kalman_filter_with_diffuse(system, series, DIFFUSE_SCALE)
}

/// Same as [`kalman_filter`] with an explicit diffuse constant, exposed so
/// the insensitivity of results to the approximation can be checked.
pub fn kalman_filter_with_diffuse(
    system: &StateSpace,
    series: &[f64],
    diffuse_scale: f64,
) -> Result<FilterResult> {
    if series.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    if series.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let dim = system.dim();
    let t_len = series.len();
    let z = &system.observation;

    let mean = series.iter().sum::<f64>() / t_len as f64;
    let var = series.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / t_len as f64;
    // Floor keeps the first innovation variance positive on constant series.
    let p0 = diffuse_scale * var.max(1e-8 * (1.0 + mean * mean) / diffuse_scale);

    let mut a_pred = DVector::zeros(dim);
    a_pred[0] = series[0];
    let mut p_pred = DMatrix::identity(dim, dim) * p0;

    let mut out = FilterResult {
        predicted_mean: Vec::with_capacity(t_len),
        predicted_cov: Vec::with_capacity(t_len),
        filtered_mean: Vec::with_capacity(t_len),
        filtered_cov: Vec::with_capacity(t_len),
        loglik: 0.0,
    };

    for (t, &y) in series.iter().enumerate() {
        let innovation = y - z.dot(&a_pred);
        let pz = &p_pred * z;
        let f = z.dot(&pz) + system.obs_var;
        if !f.is_finite() || f <= 0.0 {
            return Err(Error::DegenerateFilter(t));
        }
        out.loglik -=
            0.5 * ((2.0 * std::f64::consts::PI).ln() + f.ln() + innovation * innovation / f);

        let gain = &pz / f;
        let a_filt = &a_pred + &gain * innovation;
        let mut p_filt = &p_pred - &gain * pz.transpose();
        symmetrize(&mut p_filt);

        out.predicted_mean.push(a_pred.clone());
        out.predicted_cov.push(p_pred.clone());
        out.filtered_mean.push(a_filt.clone());
        out.filtered_cov.push(p_filt.clone());

        a_pred = &system.transition * a_filt;
        p_pred = &system.transition * p_filt * system.transition.transpose() + &system.state_cov;
        symmetrize(&mut p_pred);
    }
    Ok(out)
}

/// Smoothed components of one series.
#[derive(Clone, Debug)]
pub struct BsmComponents {
    pub trend: Vec<f64>,
    pub drift: Vec<f64>,
    pub seasonal: Vec<f64>,
    /// Observation noise, `y_t − μ_t − γ_t`.
    pub noise: Vec<f64>,
    pub loglik: f64,
    /// Smoothed state covariance per step (symmetrized, PSD-clamped).
    pub smoothed_cov: Vec<DMatrix<f64>>,
    period: usize,
}

/// Fixed-interval smoother; extracts the component sequences by state
/// position. Singular predicted covariances (degenerate variance specs)
/// are handled through a pseudo-inverse.
pub fn kalman_smoother(system: &StateSpace, series: &[f64]) -> Result<BsmComponents> {
    let filter = kalman_filter(system, series)?;
    smooth_filtered(system, series, &filter)
}

fn smooth_filtered(
    system: &StateSpace,
    series: &[f64],
    filter: &FilterResult,
) -> Result<BsmComponents> {
    let t_len = series.len();
    let mut smoothed_mean = filter.filtered_mean.clone();
    let mut smoothed_cov = filter.filtered_cov.clone();

    for t in (0..t_len.saturating_sub(1)).rev() {
        let p_pred_next = &filter.predicted_cov[t + 1];
        let scale = p_pred_next.amax();
        let pinv = p_pred_next
            .clone()
            .pseudo_inverse(1e-13 * scale.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Singular(e.to_string()))?;
        let j = &filter.filtered_cov[t] * system.transition.transpose() * pinv;
        smoothed_mean[t] = &filter.filtered_mean[t]
            + &j * (&smoothed_mean[t + 1] - &filter.predicted_mean[t + 1]);
        let mut cov = &filter.filtered_cov[t]
            + &j * (&smoothed_cov[t + 1] - p_pred_next) * j.transpose();
        symmetrize(&mut cov);
        clamp_psd(&mut cov);
        smoothed_cov[t] = cov;
    }

    let mut components = BsmComponents {
        trend: Vec::with_capacity(t_len),
        drift: Vec::with_capacity(t_len),
        seasonal: Vec::with_capacity(t_len),
        noise: Vec::with_capacity(t_len),
        loglik: filter.loglik,
        smoothed_cov,
        period: system.period,
    };
    for (t, &y) in series.iter().enumerate() {
        let state = &smoothed_mean[t];
        components.trend.push(state[0]);
        components.drift.push(state[1]);
        components.seasonal.push(state[2]);
        components.noise.push(y - state[0] - state[2]);
    }
    Ok(components)
}

/// Estimates the four innovation variances by maximum likelihood and
/// returns the smoothed components at the optimum. Optimization runs in
/// log-variance space from a few heuristic starts; variances are floored
/// at `1e-12 ×` the series variance.
pub fn estimate_bsm(series: &[f64]) -> Result<(BsmSpec, BsmComponents)> {
    estimate_bsm_with_period(series, 12)
}

pub fn estimate_bsm_with_period(series: &[f64], period: usize) -> Result<(BsmSpec, BsmComponents)> {
    let t_len = series.len();
    if t_len < 3 * period {
        return Err(Error::invalid(format!(
            "need at least {} observations to estimate a period-{period} structural model",
            3 * period
        )));
    }
    let mean = series.iter().sum::<f64>() / t_len as f64;
    let raw_var = series.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / t_len as f64;
    // Constant series have zero variance; floor on the level scale instead
    // so log-variances stay in a numerically sane range.
    let var = raw_var.max(1e-10 * (1.0 + mean * mean));
    let floor = 1e-12 * var;

    let objective = |theta: &[f64]| -> f64 {
        let spec = spec_from_log(theta, period, floor);
        match build_state_space(&spec).and_then(|ss| kalman_filter(&ss, series)) {
            Ok(f) => f.loglik,
            Err(_) => f64::NEG_INFINITY,
        }
    };

    // Heuristic starts: noise-dominant, trend-dominant, and balanced splits
    // of the sample variance.
    let starts: [[f64; 4]; 3] = [
        [0.5 * var, 1e-2 * var, 1e-6 * var, 1e-4 * var],
        [1e-2 * var, 0.5 * var, 1e-5 * var, 1e-3 * var],
        [0.1 * var, 0.1 * var, 1e-4 * var, 0.1 * var],
    ];
    let mut best: Option<optim::Maximum> = None;
    for start in &starts {
        let theta0: Vec<f64> = start.iter().map(|v| v.max(floor).ln()).collect();
        let result = optim::maximize(objective, &theta0, 500, 1e-8)?;
        if best.as_ref().is_none_or(|b| result.value > b.value) {
            best = Some(result);
        }
    }
    let best = best.expect("at least one start");
    if !best.value.is_finite() {
        return Err(Error::invalid("likelihood not finite at the optimum"));
    }
    let spec = spec_from_log(&best.x, period, floor);
    let system = build_state_space(&spec)?;
    let components = kalman_smoother(&system, series)?;
    Ok((spec, components))
}

fn spec_from_log(theta: &[f64], period: usize, floor: f64) -> BsmSpec {
    BsmSpec {
        seasonal_period: period,
        noise_var: theta[0].exp().max(floor),
        level_var: theta[1].exp().max(floor),
        drift_var: theta[2].exp().max(floor),
        seasonal_var: theta[3].exp().max(floor),
    }
}

/// How the seasonal adjustment enters a month-specific series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticMode {
    /// Add the time-average of the month's smoothed seasonal to the trend.
    Static,
    /// Add the year-specific smoothed seasonal, letting the pattern evolve.
    Evolving,
}

/// Extracts a one-value-per-year series for a given calendar month:
/// the smoothed trend plus a seasonal adjustment for that month.
pub fn synthetic_month(
    components: &BsmComponents,
    start: MonthDate,
    month: u32,
    mode: SyntheticMode,
) -> Result<Vec<(i32, f64)>> {
    if components.period != 12 {
        return Err(Error::invalid(
            "synthetic months require a period-12 model",
        ));
    }
    if !(1..=12).contains(&month) {
        return Err(Error::invalid(format!("month {month} out of range 1..=12")));
    }
    let hits: Vec<usize> = (0..components.trend.len())
        .filter(|&t| start.add_months(t as i64).month == month)
        .collect();
    if hits.is_empty() {
        return Err(Error::invalid("series does not cover the requested month"));
    }
    let mean_gamma =
        hits.iter().map(|&t| components.seasonal[t]).sum::<f64>() / hits.len() as f64;
    Ok(hits
        .into_iter()
        .map(|t| {
            let adjustment = match mode {
                SyntheticMode::Static => mean_gamma,
                SyntheticMode::Evolving => components.seasonal[t],
            };
            (start.add_months(t as i64).year, components.trend[t] + adjustment)
        })
        .collect())
}

/// Stochastic deseasonalization of a panel: each non-skipped column is
/// replaced by its smoothed trend μ_t from an independently estimated
/// structural model. The seasonal fit records per-calendar-month means of
/// the smoothed seasonal so month-specific levels can be added back;
/// under the evolving variant the year-specific seasonal is available
/// from the returned components. Skipped columns pass through unchanged.
pub fn deseason_panel(
    panel: &crate::panel::TimeSeriesPanel,
    skip: &std::collections::HashSet<String>,
    method: crate::panel::SeasonalMethod,
) -> Result<(
    crate::panel::TimeSeriesPanel,
    crate::panel::SeasonalFit,
    Vec<Option<(BsmSpec, BsmComponents)>>,
)> {
    use crate::panel::SeasonalMethod;
    use rayon::prelude::*;

    if method == SeasonalMethod::Dummy {
        return Err(Error::invalid(
            "dummy deseasonalization is handled by the panel module",
        ));
    }
    for name in skip {
        panel.var_index(name)?;
    }
    let t = panel.len();
    let m = panel.width();
    let fits: Result<Vec<Option<(BsmSpec, BsmComponents)>>> = (0..m)
        .into_par_iter()
        .map(|j| {
            if skip.contains(&panel.variables()[j].name) {
                return Ok(None);
            }
            let series: Vec<f64> = panel.values().column(j).iter().copied().collect();
            estimate_bsm(&series).map(Some)
        })
        .collect();
    let fits = fits?;

    let mut values = panel.values().clone();
    let mut monthly_means = DMatrix::zeros(12, m);
    for (j, fit) in fits.iter().enumerate() {
        let Some((_, components)) = fit else { continue };
        let mut sums = [0.0f64; 12];
        let mut counts = [0usize; 12];
        for i in 0..t {
            values[(i, j)] = components.trend[i];
            let month = panel.date_at(i).month0();
            sums[month] += components.seasonal[i];
            counts[month] += 1;
        }
        for month in 0..12 {
            if counts[month] > 0 {
                monthly_means[(month, j)] = sums[month] / counts[month] as f64;
            }
        }
    }
    let deseasoned = crate::panel::TimeSeriesPanel::new(
        panel.start(),
        values,
        panel.variables().to_vec(),
    )?;
    let fit = crate::panel::SeasonalFit { monthly_means, method };
    Ok((deseasoned, fit, fits))
}

/// Writes components as tabular text: date, trend, drift, seasonal, noise.
pub fn write_components<W: std::io::Write>(
    components: &BsmComponents,
    start: MonthDate,
    sink: W,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["date", "trend", "drift", "seasonal", "noise"])?;
    for t in 0..components.trend.len() {
        writer.write_record(&[
            start.add_months(t as i64).to_string(),
            components.trend[t].to_string(),
            components.drift[t].to_string(),
            components.seasonal[t].to_string(),
            components.noise[t].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let transposed = m.transpose();
    *m += transposed;
    *m *= 0.5;
}

/// Projects tiny negative eigenvalues (filter round-off) back to zero.
fn clamp_psd(m: &mut DMatrix<f64>) {
    if m.clone().cholesky().is_some() {
        return;
    }
    let eig = m.clone().symmetric_eigen();
    let clamped = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    *m = &eig.eigenvectors * clamped * eig.eigenvectors.transpose();
    symmetrize(m);
}
