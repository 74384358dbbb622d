//! Reduced-form Bayesian VAR under the Minnesota prior.
//!
//! The residual covariance Σ_u is fixed at its OLS estimate, which makes
//! the coefficient posterior Gaussian in closed form and the marginal
//! likelihood available analytically — the property the hyperparameter
//! grid search relies on. Coefficients are stacked equation-major:
//! for each equation, all own/cross coefficients of lag 1, lag 2, …,
//! then the constant (and optional linear trend), giving `M²P + M`
//! parameters in the trendless case.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::irf;

const LN_2PI: f64 = 1.8378770664093453;

/// Minnesota-prior hyperparameters.
///
/// `b_ar` is the prior mean of each equation's first own lag; `lambda1`
/// scales the overall prior tightness, `lambda2` the cross-variable
/// shrinkage, `lambda3` the lag-decay rate, and `lambda4` the looseness on
/// deterministic terms (constant, trend).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinnesotaHyper {
    pub b_ar: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// Lag order P.
    pub lags: usize,
}

impl MinnesotaHyper {
    pub fn new(b_ar: f64, lambda1: f64, lambda2: f64, lambda3: f64, lambda4: f64, lags: usize) -> Result<Self> {
        let hyper = Self { b_ar, lambda1, lambda2, lambda3, lambda4, lags };
        hyper.validate()?;
        Ok(hyper)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.b_ar) {
            return Err(Error::invalid("b_ar must lie in [0, 1]"));
        }
        for (name, l) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
        ] {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.lags == 0 {
            return Err(Error::invalid("lag order must be at least 1"));
        }
        Ok(())
    }
}

/// One set of reduced-form VAR coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct VarCoefficients {
    /// Intercept c, length M.
    pub intercept: DVector<f64>,
    /// Lag matrices Φ_1..Φ_P, each M×M; `lag_matrices[p][(i, j)]` is the
    /// effect of variable j at lag p+1 on equation i.
    pub lag_matrices: Vec<DMatrix<f64>>,
    /// Optional linear-trend loadings, length M.
    pub trend: Option<DVector<f64>>,
}

impl VarCoefficients {
    pub fn m(&self) -> usize {
        self.intercept.len()
    }

    pub fn lags(&self) -> usize {
        self.lag_matrices.len()
    }

    /// Unpacks an equation-major stacked coefficient vector.
    pub fn from_flat(beta: &DVector<f64>, m: usize, lags: usize, trend: bool) -> Self {
        let k = m * lags + 1 + usize::from(trend);
        assert_eq!(beta.len(), m * k, "flat coefficient length mismatch");
        let mut intercept = DVector::zeros(m);
        let mut lag_matrices = vec![DMatrix::zeros(m, m); lags];
        let mut trend_coef = trend.then(|| DVector::zeros(m));
        for i in 0..m {
            let eq = beta.rows(i * k, k);
            for p in 0..lags {
                for j in 0..m {
                    lag_matrices[p][(i, j)] = eq[p * m + j];
                }
            }
            intercept[i] = eq[m * lags];
            if let Some(tc) = trend_coef.as_mut() {
                tc[i] = eq[m * lags + 1];
            }
        }
        Self { intercept, lag_matrices, trend: trend_coef }
    }

    /// Inverse of [`VarCoefficients::from_flat`].
    pub fn to_flat(&self) -> DVector<f64> {
        let m = self.m();
        let lags = self.lags();
        let k = m * lags + 1 + usize::from(self.trend.is_some());
        let mut beta = DVector::zeros(m * k);
        for i in 0..m {
            for p in 0..lags {
                for j in 0..m {
                    beta[i * k + p * m + j] = self.lag_matrices[p][(i, j)];
                }
            }
            beta[i * k + m * lags] = self.intercept[i];
            if let Some(tc) = &self.trend {
                beta[i * k + m * lags + 1] = tc[i];
            }
        }
        beta
    }
}

/// Lagged regression design for a VAR(P): one row per usable period with
/// the P stacked lags, a constant, and optionally a linear trend.
#[derive(Clone, Debug)]
pub struct VarDesign {
    /// n × k regressor matrix.
    pub regressors: DMatrix<f64>,
    /// n × M matrix of left-hand-side observations.
    pub targets: DMatrix<f64>,
    pub m: usize,
    pub lags: usize,
    pub trend: bool,
}

impl VarDesign {
    pub fn n(&self) -> usize {
        self.targets.nrows()
    }

    /// Regressors per equation.
    pub fn k(&self) -> usize {
        self.regressors.ncols()
    }

    /// Stacked coefficient dimension M·k (= M²P + M without trend).
    pub fn dim(&self) -> usize {
        self.m * self.k()
    }
}

/// Builds the design from a T×M data matrix.
pub fn build_design(values: &DMatrix<f64>, lags: usize, trend: bool) -> Result<VarDesign> {
    let t = values.nrows();
    let m = values.ncols();
    if lags == 0 {
        return Err(Error::invalid("lag order must be at least 1"));
    }
    if t <= lags {
        return Err(Error::invalid(format!(
            "{t} observations cannot support {lags} lags"
        )));
    }
    let n = t - lags;
    let k = m * lags + 1 + usize::from(trend);
    let mut regressors = DMatrix::zeros(n, k);
    let mut targets = DMatrix::zeros(n, m);
    for row in 0..n {
        let time = lags + row;
        for p in 0..lags {
            for j in 0..m {
                regressors[(row, p * m + j)] = values[(time - 1 - p, j)];
            }
        }
        regressors[(row, m * lags)] = 1.0;
        if trend {
            regressors[(row, m * lags + 1)] = (time + 1) as f64;
        }
        for j in 0..m {
            targets[(row, j)] = values[(time, j)];
        }
    }
    Ok(VarDesign { regressors, targets, m, lags, trend })
}

/// OLS coefficient matrix (k×M); errors on a rank-deficient design.
pub fn ols_coefficients(design: &VarDesign) -> Result<DMatrix<f64>> {
    let xtx = design.regressors.transpose() * &design.regressors;
    let xty = design.regressors.transpose() * &design.targets;
    let chol = Cholesky::new(xtx).ok_or(Error::RankDeficient)?;
    Ok(chol.solve(&xty))
}

/// Residual covariance of the OLS VAR(P) fit, divisor `n = T − P`,
/// with a diagonal jitter escalated until the matrix factorizes.
pub fn estimate_sigma(design: &VarDesign) -> Result<DMatrix<f64>> {
    if design.n() <= design.k() {
        return Err(Error::invalid(format!(
            "need more than {} observations for {} regressors",
            design.k(),
            design.k()
        )));
    }
    let beta = ols_coefficients(design)?;
    let residuals = &design.targets - &design.regressors * beta;
    let mut sigma = residuals.transpose() * &residuals / design.n() as f64;
    let scale = (sigma.trace() / design.m as f64).max(f64::MIN_POSITIVE);
    let mut jitter = 1e-12 * scale;
    for _ in 0..8 {
        if Cholesky::new(sigma.clone()).is_some() {
            return Ok(sigma);
        }
        for i in 0..design.m {
            sigma[(i, i)] += jitter;
        }
        jitter *= 10.0;
    }
    Err(min_eig_error(&sigma))
}

fn min_eig_error(sigma: &DMatrix<f64>) -> Error {
    let min_eig = sigma.clone().symmetric_eigen().eigenvalues.min();
    Error::NotPositiveDefinite { min_eig }
}

/// Per-variable scale constants σ_i: residual standard deviations of
/// univariate AR(P) fits with intercept, used to weigh the cross-variable
/// prior variances.
pub fn ar_residual_scales(values: &DMatrix<f64>, lags: usize) -> Result<Vec<f64>> {
    let t = values.nrows();
    if t <= lags + 2 {
        return Err(Error::invalid("series too short for AR scale estimation"));
    }
    let n = t - lags;
    let mut scales = Vec::with_capacity(values.ncols());
    for j in 0..values.ncols() {
        let mut x = DMatrix::zeros(n, lags + 1);
        let mut y = DVector::zeros(n);
        for row in 0..n {
            for p in 0..lags {
                x[(row, p)] = values[(lags + row - 1 - p, j)];
            }
            x[(row, lags)] = 1.0;
            y[row] = values[(lags + row, j)];
        }
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let coeffs = match Cholesky::new(xtx) {
            Some(chol) => chol.solve(&xty),
            None => return Err(Error::RankDeficient),
        };
        let resid = &y - &x * coeffs;
        let var = resid.dot(&resid) / n as f64;
        scales.push(var.sqrt());
    }
    if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid(
            "an AR residual scale is zero; the prior is undefined",
        ));
    }
    Ok(scales)
}

/// Independent-Gaussian prior on the stacked coefficient vector.
#[derive(Clone, Debug)]
pub struct MinnesotaPrior {
    pub mean: DVector<f64>,
    /// Per-coefficient prior standard deviations (the prior covariance is
    /// diagonal).
    pub std: DVector<f64>,
    pub hyper: MinnesotaHyper,
    pub trend: bool,
}

/// Lays out the prior over an M-variable VAR(P) design:
/// own lag p gets std λ1/p^λ3, cross coefficients λ1·λ2/p^λ3 · σ_i/σ_j,
/// deterministic terms λ1·λ4·σ_i, and the only nonzero mean is `b_ar` on
/// each equation's first own lag.
pub fn build_minnesota_prior(
    hyper: &MinnesotaHyper,
    scales: &[f64],
    trend: bool,
) -> Result<MinnesotaPrior> {
    hyper.validate()?;
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("zero scale constant"));
    }
    let m = scales.len();
    let p_total = hyper.lags;
    let k = m * p_total + 1 + usize::from(trend);
    let mut mean = DVector::zeros(m * k);
    let mut std = DVector::zeros(m * k);
    for i in 0..m {
        for p in 1..=p_total {
            for j in 0..m {
                let idx = i * k + (p - 1) * m + j;
                let decay = (p as f64).powf(hyper.lambda3);
                std[idx] = if i == j {
                    hyper.lambda1 / decay
                } else {
                    hyper.lambda1 * hyper.lambda2 / decay * (scales[i] / scales[j])
                };
            }
        }
        mean[i * k + i] = hyper.b_ar; // first own lag
        std[i * k + m * p_total] = hyper.lambda1 * hyper.lambda4 * scales[i];
        if trend {
            std[i * k + m * p_total + 1] = hyper.lambda1 * hyper.lambda4 * scales[i];
        }
    }
    Ok(MinnesotaPrior { mean, std, hyper: *hyper, trend })
}

/// Gaussian coefficient posterior with Σ_u held fixed.
#[derive(Clone, Debug)]
pub struct BvarPosterior {
    pub beta_mean: DVector<f64>,
    /// Upper-triangular Lᵀ with posterior precision H = L·Lᵀ; sampling
    /// solves Lᵀx = z so that x has covariance H⁻¹.
    sampling_factor: DMatrix<f64>,
    pub sigma_u: DMatrix<f64>,
    pub hyper: MinnesotaHyper,
    pub log_marginal: f64,
    pub m: usize,
    pub lags: usize,
    pub trend: bool,
}

impl BvarPosterior {
    /// Stacked coefficient dimension, M²P + M without trend.
    pub fn dim(&self) -> usize {
        self.beta_mean.len()
    }

    /// Materializes the posterior covariance. Quadratic memory in the
    /// coefficient count; intended for diagnostics and tests.
    pub fn beta_cov(&self) -> DMatrix<f64> {
        let d = self.dim();
        let identity = DMatrix::identity(d, d);
        let inv_t = self
            .sampling_factor
            .solve_upper_triangular(&identity)
            .expect("factor has positive diagonal");
        &inv_t * inv_t.transpose()
    }

    /// Posterior standard deviation of each coefficient.
    pub fn beta_std(&self) -> DVector<f64> {
        let cov = self.beta_cov();
        DVector::from_fn(self.dim(), |i, _| cov[(i, i)].sqrt())
    }

    pub fn mean_coefficients(&self) -> VarCoefficients {
        VarCoefficients::from_flat(&self.beta_mean, self.m, self.lags, self.trend)
    }
}

/// Closed-form Gaussian posterior and log marginal likelihood for the
/// conjugate fixed-Σ model.
pub fn posterior(
    prior: &MinnesotaPrior,
    design: &VarDesign,
    sigma_u: &DMatrix<f64>,
) -> Result<BvarPosterior> {
    let m = design.m;
    let k = design.k();
    let d = m * k;
    if prior.mean.len() != d {
        return Err(Error::invalid(format!(
            "prior dimension {} does not match design dimension {d}",
            prior.mean.len()
        )));
    }
    if sigma_u.nrows() != m || sigma_u.ncols() != m {
        return Err(Error::invalid("sigma_u not conformable with the design"));
    }
    let n = design.n() as f64;

    let sigma_chol = Cholesky::new(sigma_u.clone()).ok_or_else(|| min_eig_error(sigma_u))?;
    let sigma_inv = sigma_chol.inverse();
    let log_det_sigma = 2.0 * sigma_chol.l().diagonal().map(f64::ln).sum();

    let xtx = design.regressors.transpose() * &design.regressors;
    let xty = design.regressors.transpose() * &design.targets;

    // H = Σ_u⁻¹ ⊗ XᵀX + diag(prior precision), blocked by equation.
    let mut precision = DMatrix::zeros(d, d);
    for bi in 0..m {
        for bj in 0..m {
            let weight = sigma_inv[(bi, bj)];
            if weight != 0.0 {
                let mut block = precision.view_mut((bi * k, bj * k), (k, k));
                block += &xtx * weight;
            }
        }
    }
    let mut rhs = DVector::zeros(d);
    // vec(XᵀY Σ_u⁻¹), equation-major.
    let xty_weighted = &xty * &sigma_inv;
    for j in 0..m {
        rhs.rows_mut(j * k, k).copy_from(&xty_weighted.column(j));
    }
    let mut log_det_prior = 0.0;
    for i in 0..d {
        let variance = prior.std[i] * prior.std[i];
        precision[(i, i)] += 1.0 / variance;
        rhs[i] += prior.mean[i] / variance;
        log_det_prior += variance.ln();
    }

    let chol = match Cholesky::new(precision.clone()) {
        Some(c) => c,
        None => return Err(min_eig_error(&precision)),
    };
    let beta_mean = chol.solve(&rhs);
    let log_det_precision = 2.0 * chol.l().diagonal().map(f64::ln).sum();

    // log m(y) = −(nM/2)·ln2π − (n/2)·ln|Σ| − ½ln|Σ₀| − ½ln|H| − ½Q with
    // Q = tr(Σ⁻¹YᵀY) + β₀ᵀΣ₀⁻¹β₀ − β̄ᵀHβ̄.
    let yty = design.targets.transpose() * &design.targets;
    let data_quad = (&sigma_inv * yty).trace();
    let prior_quad: f64 = (0..d)
        .map(|i| prior.mean[i] * prior.mean[i] / (prior.std[i] * prior.std[i]))
        .sum();
    let posterior_quad = beta_mean.dot(&rhs);
    let log_marginal = -0.5
        * (n * m as f64 * LN_2PI
            + n * log_det_sigma
            + log_det_prior
            + log_det_precision
            + data_quad
            + prior_quad
            - posterior_quad);

    Ok(BvarPosterior {
        beta_mean,
        sampling_factor: chol.l().transpose(),
        sigma_u: sigma_u.clone(),
        hyper: prior.hyper,
        log_marginal,
        m,
        lags: design.lags,
        trend: design.trend,
    })
}

/// Posterior coefficient draws, each tagged with its companion spectral
/// radius. Explosive draws are kept; the flag is informational.
#[derive(Clone, Debug)]
pub struct CoefficientDraws {
    pub draws: Vec<VarCoefficients>,
    pub seed: u64,
    pub spectral_radii: Vec<f64>,
    pub m: usize,
    pub lags: usize,
}

impl CoefficientDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn stable(&self, idx: usize) -> bool {
        self.spectral_radii[idx] < 1.0
    }

    /// Point coefficients at the mean of the stored draws.
    pub fn mean_coefficients(&self) -> VarCoefficients {
        let flat: Vec<DVector<f64>> = self.draws.iter().map(|c| c.to_flat()).collect();
        let mut mean = DVector::zeros(flat[0].len());
        for f in &flat {
            mean += f;
        }
        mean /= flat.len() as f64;
        VarCoefficients::from_flat(&mean, self.m, self.lags, self.draws[0].trend.is_some())
    }
}

/// Draws `n` independent samples from the posterior. Each draw uses its own
/// counter-derived RNG stream (master seed, draw index), so results are
/// reproducible and independent of scheduling.
pub fn draw_posterior(posterior: &BvarPosterior, n: usize, seed: u64) -> CoefficientDraws {
    let d = posterior.dim();
    let results: Vec<(VarCoefficients, f64)> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let noise = posterior
                .sampling_factor
                .solve_upper_triangular(&z)
                .expect("factor has positive diagonal");
            let beta = &posterior.beta_mean + noise;
            let coeffs =
                VarCoefficients::from_flat(&beta, posterior.m, posterior.lags, posterior.trend);
            let radius = irf::companion(&coeffs).spectral_radius();
            (coeffs, radius)
        })
        .collect();
    let (draws, spectral_radii) = results.into_iter().unzip();
    CoefficientDraws {
        draws,
        seed,
        spectral_radii,
        m: posterior.m,
        lags: posterior.lags,
    }
}

/// One evaluated hyperparameter point.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub hyper: MinnesotaHyper,
    /// `None` when estimation failed at this point.
    pub log_marginal: Option<f64>,
}

/// Evaluates the log marginal likelihood over a hyperparameter grid and
/// returns the argmax plus the full table. Grid points are independent and
/// evaluated in parallel; ties break toward the earlier grid entry.
pub fn grid_search_hyper(
    grid: &[MinnesotaHyper],
    values: &DMatrix<f64>,
    trend: bool,
) -> Result<(MinnesotaHyper, Vec<GridPoint>)> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let table: Vec<GridPoint> = grid
        .par_iter()
        .map(|hyper| {
            let log_marginal = evaluate_point(hyper, values, trend).ok();
            GridPoint { hyper: *hyper, log_marginal }
        })
        .collect();
    let best = table
        .iter()
        .filter(|p| p.log_marginal.is_some_and(f64::is_finite))
        .max_by(|a, b| {
            a.log_marginal
                .partial_cmp(&b.log_marginal)
                .expect("finite by filter")
        })
        .ok_or_else(|| Error::invalid("no grid point could be estimated"))?;
    Ok((best.hyper, table))
}

fn evaluate_point(hyper: &MinnesotaHyper, values: &DMatrix<f64>, trend: bool) -> Result<f64> {
    let design = build_design(values, hyper.lags, trend)?;
    let sigma_u = estimate_sigma(&design)?;
    let scales = ar_residual_scales(values, hyper.lags)?;
    let prior = build_minnesota_prior(hyper, &scales, trend)?;
    Ok(posterior(&prior, &design, &sigma_u)?.log_marginal)
}

/// Gaussian VAR log-likelihood at fixed Σ_u.
pub fn var_loglik(design: &VarDesign, sigma_u: &DMatrix<f64>, coeffs: &VarCoefficients) -> f64 {
    let sigma_chol = Cholesky::new(sigma_u.clone()).expect("sigma_u positive definite");
    let log_det = 2.0 * sigma_chol.l().diagonal().map(f64::ln).sum();
    let beta = coeffs.to_flat();
    let k = design.k();
    let mut coef_matrix = DMatrix::zeros(k, design.m);
    for j in 0..design.m {
        coef_matrix.column_mut(j).copy_from(&beta.rows(j * k, k));
    }
    let residuals = &design.targets - &design.regressors * coef_matrix;
    let quad = (sigma_chol.inverse() * residuals.transpose() * &residuals).trace();
    let n = design.n() as f64;
    -0.5 * (n * design.m as f64 * LN_2PI + n * log_det + quad)
}

/// Deviance information criterion: D̄ + p_D with D = −2·loglik at fixed
/// Σ_u and p_D = D̄ − D(posterior mean of the draws). Lower is better.
pub fn dic(draws: &CoefficientDraws, design: &VarDesign, sigma_u: &DMatrix<f64>) -> f64 {
    assert!(!draws.is_empty(), "dic needs at least one draw");
    let mean_deviance = draws
        .draws
        .par_iter()
        .map(|c| -2.0 * var_loglik(design, sigma_u, c))
        .sum::<f64>()
        / draws.len() as f64;
    let deviance_at_mean = -2.0 * var_loglik(design, sigma_u, &draws.mean_coefficients());
    2.0 * mean_deviance - deviance_at_mean
}
