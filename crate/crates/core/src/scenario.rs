//! Forecast engine: unconditional iterated forecasts, hard-conditioned
//! forecasts on externally imposed paths, frozen-channel experiments,
//! deterministic components, and first-crossing statistics.
//!
//! Every forecast iterates the reduced form one month at a time from the
//! last P observed rows. Hard conditioning back-solves the conditioned
//! variables' own structural shocks each horizon (exactly identified:
//! one shock per condition), so conditioned paths are hit exactly while
//! everything else responds through the system. Freezing a variable is
//! conditioning it on a constant path.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bvar::{CoefficientDraws, VarCoefficients};
use crate::date::MonthDate;
use crate::error::{Error, Result};
use crate::stats::Band;

/// Default fan levels: 90% of simulated paths.
pub const FAN_LEVELS: (f64, f64) = (0.05, 0.95);

/// Whether forecast-period structural shocks are drawn or zeroed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShockMode {
    /// Conditional-mean paths; band width reflects coefficient draws only.
    Zero,
    /// Adds sampled structural shocks u = C·ε, ε ~ N(0, I) per horizon.
    Sampled,
}

/// A hard condition: the variable must equal `values[s]` at forecast step
/// s. Paths shorter than the horizon leave the tail unconstrained.
#[derive(Clone, Debug)]
pub struct ConditionPath {
    pub variable: usize,
    pub values: Vec<f64>,
}

/// Where a forecast starts.
#[derive(Clone, Copy, Debug)]
pub struct ForecastOrigin<'a> {
    /// Observed rows, oldest first; the last P rows seed the recursion.
    pub history: &'a DMatrix<f64>,
    /// Trend-regressor value at the first forecast step. Only read when
    /// the coefficients carry a trend loading; the estimation design uses
    /// 1-based time, so continuing a T-row sample means `T + 1`.
    pub trend_time0: f64,
}

impl<'a> ForecastOrigin<'a> {
    pub fn new(history: &'a DMatrix<f64>) -> Self {
        Self { history, trend_time0: 0.0 }
    }
}

/// Simulated forecast distribution.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    /// One horizon×M path per posterior draw.
    pub paths: Vec<DMatrix<f64>>,
    /// Pointwise fan across draws.
    pub bands: Band,
    /// Constrained variable indices, ascending (conditions then frozen,
    /// merged).
    pub constrained: Vec<usize>,
    /// Per draw: horizon×|constrained| implied structural shocks backing
    /// the constrained paths.
    pub schedules: Vec<DMatrix<f64>>,
}

impl ScenarioResult {
    pub fn horizon(&self) -> usize {
        self.bands.mean.nrows()
    }

    pub fn draws(&self) -> usize {
        self.paths.len()
    }
}

/// Iterated forecast with endogenous paths for every variable.
pub fn unconditional_forecast(
    draws: &CoefficientDraws,
    origin: &ForecastOrigin,
    horizon: usize,
    mode: ShockMode,
    seed: u64,
    impact: &DMatrix<f64>,
) -> Result<ScenarioResult> {
    simulate(draws, origin, horizon, mode, seed, impact, &BTreeMap::new())
}

/// Forecast with hard conditions: each conditioned variable follows its
/// target path exactly, enforced by back-solving its own structural shock
/// each horizon.
pub fn conditional_forecast(
    draws: &CoefficientDraws,
    origin: &ForecastOrigin,
    conditions: &[ConditionPath],
    horizon: usize,
    mode: ShockMode,
    seed: u64,
    impact: &DMatrix<f64>,
) -> Result<ScenarioResult> {
    let targets = build_targets(draws.m, conditions, &[], horizon)?;
    simulate(draws, origin, horizon, mode, seed, impact, &targets)
}

/// Conditional forecast with additional variables frozen at constant
/// levels for the whole horizon; all implied shocks are solved jointly.
pub fn frozen_channel_forecast(
    draws: &CoefficientDraws,
    origin: &ForecastOrigin,
    conditions: &[ConditionPath],
    frozen: &[(usize, f64)],
    horizon: usize,
    mode: ShockMode,
    seed: u64,
    impact: &DMatrix<f64>,
) -> Result<ScenarioResult> {
    let targets = build_targets(draws.m, conditions, frozen, horizon)?;
    simulate(draws, origin, horizon, mode, seed, impact, &targets)
}

fn build_targets(
    m: usize,
    conditions: &[ConditionPath],
    frozen: &[(usize, f64)],
    horizon: usize,
) -> Result<BTreeMap<usize, Vec<Option<f64>>>> {
    let mut targets: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for condition in conditions {
        if condition.variable >= m {
            return Err(Error::invalid("conditioned variable out of range"));
        }
        if condition.values.is_empty() {
            return Err(Error::invalid("empty condition path"));
        }
        let mut path = vec![None; horizon];
        for (s, slot) in path.iter_mut().enumerate() {
            if s < condition.values.len() {
                *slot = Some(condition.values[s]);
            }
        }
        if targets.insert(condition.variable, path).is_some() {
            return Err(Error::invalid(format!(
                "variable {} conditioned twice",
                condition.variable
            )));
        }
    }
    for &(variable, level) in frozen {
        if variable >= m {
            return Err(Error::invalid("frozen variable out of range"));
        }
        if targets.insert(variable, vec![Some(level); horizon]).is_some() {
            return Err(Error::invalid(format!(
                "variable {variable} both conditioned and frozen"
            )));
        }
    }
    if targets.len() > m {
        return Err(Error::invalid("more conditions than variables"));
    }
    Ok(targets)
}

fn simulate(
    draws: &CoefficientDraws,
    origin: &ForecastOrigin,
    horizon: usize,
    mode: ShockMode,
    seed: u64,
    impact: &DMatrix<f64>,
    targets: &BTreeMap<usize, Vec<Option<f64>>>,
) -> Result<ScenarioResult> {
    let m = draws.m;
    let p = draws.lags;
    if impact.nrows() != m || impact.ncols() != m {
        return Err(Error::invalid("impact matrix not conformable"));
    }
    if origin.history.nrows() < p || origin.history.ncols() != m {
        return Err(Error::invalid(format!(
            "history must supply at least {p} rows of {m} variables"
        )));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let constrained: Vec<usize> = targets.keys().copied().collect();
    // The restricted impact block is lower-triangular for a Cholesky C;
    // its diagonal must be usable.
    for &w in &constrained {
        if impact[(w, w)].abs() < 1e-300 {
            return Err(Error::Singular(format!(
                "impact matrix has zero diagonal at conditioned variable {w}"
            )));
        }
    }

    let outputs: Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> = draws
        .draws
        .par_iter()
        .enumerate()
        .map(|(draw_idx, coeffs)| {
            simulate_one(
                coeffs,
                origin,
                horizon,
                mode,
                seed,
                draw_idx as u64,
                impact,
                targets,
                &constrained,
            )
        })
        .collect();
    let outputs = outputs?;
    let (paths, schedules): (Vec<_>, Vec<_>) = outputs.into_iter().unzip();
    let bands = Band::from_samples(&paths, FAN_LEVELS);
    Ok(ScenarioResult { paths, bands, constrained, schedules })
}

#[allow(clippy::too_many_arguments)]
fn simulate_one(
    coeffs: &VarCoefficients,
    origin: &ForecastOrigin,
    horizon: usize,
    mode: ShockMode,
    seed: u64,
    stream: u64,
    impact: &DMatrix<f64>,
    targets: &BTreeMap<usize, Vec<Option<f64>>>,
    constrained: &[usize],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = coeffs.m();
    let p = coeffs.lags();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let history_rows = origin.history.nrows();
    let mut window: Vec<DVector<f64>> = (history_rows - p..history_rows)
        .map(|r| origin.history.row(r).transpose())
        .collect();

    let mut path = DMatrix::zeros(horizon, m);
    let mut schedule = DMatrix::zeros(horizon, constrained.len());
    let mut shock = DVector::zeros(m);

    for step in 0..horizon {
        // Conditional mean given the window.
        let mut y = coeffs.intercept.clone();
        for lag in 1..=p {
            y.gemv(1.0, &coeffs.lag_matrices[lag - 1], &window[p - lag], 1.0);
        }
        if let Some(trend) = &coeffs.trend {
            y += trend * (origin.trend_time0 + step as f64);
        }

        let active: Vec<(usize, usize, f64)> = constrained
            .iter()
            .enumerate()
            .filter_map(|(slot, &var)| {
                targets[&var][step].map(|target| (slot, var, target))
            })
            .collect();

        shock.fill(0.0);
        if mode == ShockMode::Sampled {
            for j in 0..m {
                if !active.iter().any(|&(_, var, _)| var == j) {
                    shock[j] = StandardNormal.sample(&mut rng);
                }
            }
            y.gemv(1.0, impact, &shock, 1.0);
        }

        if !active.is_empty() {
            // Back-solve the active variables' own structural shocks.
            let k = active.len();
            let restricted =
                DMatrix::from_fn(k, k, |r, c| impact[(active[r].1, active[c].1)]);
            let rhs = DVector::from_fn(k, |r, _| active[r].2 - y[active[r].1]);
            let solved = restricted
                .solve_lower_triangular(&rhs)
                .ok_or_else(|| Error::Singular("restricted impact sub-matrix".into()))?;
            for (idx, &(slot, var, target)) in active.iter().enumerate() {
                schedule[(step, slot)] = solved[idx];
                y += impact.column(var) * solved[idx];
                let _ = target;
            }
            for &(_, var, target) in &active {
                y[var] = target; // exact by construction; pin the rounding
            }
        }

        path.row_mut(step).copy_from(&y.transpose());
        window.rotate_left(1);
        window[p - 1].copy_from(&y);
    }
    Ok((path, schedule))
}

/// Zero-shock iteration of the fitted system from its first P
/// observations: the model-implied trend. Returns a span×M matrix whose
/// first P rows are the supplied initial conditions.
pub fn deterministic_component(
    coeffs: &VarCoefficients,
    initial: &DMatrix<f64>,
    span: usize,
) -> Result<DMatrix<f64>> {
    let m = coeffs.m();
    let p = coeffs.lags();
    if initial.nrows() < p || initial.ncols() != m {
        return Err(Error::invalid(format!(
            "initial conditions must supply {p} rows of {m} variables"
        )));
    }
    if span < p {
        return Err(Error::invalid("span shorter than the lag order"));
    }
    let mut out = DMatrix::zeros(span, m);
    for r in 0..p {
        out.row_mut(r).copy_from(&initial.row(r));
    }
    for step in p..span {
        let mut y = coeffs.intercept.clone();
        for lag in 1..=p {
            let past = out.row(step - lag).transpose();
            y.gemv(1.0, &coeffs.lag_matrices[lag - 1], &past, 1.0);
        }
        if let Some(trend) = &coeffs.trend {
            // Estimation uses 1-based time, so row index t carries t + 1.
            y += trend * (step + 1) as f64;
        }
        out.row_mut(step).copy_from(&y.transpose());
    }
    Ok(out)
}

/// Reads a scenario file: tabular text with a header row and `date,value`
/// records. Dates are `YYYY-MM` or bare `YYYY` (annual values anchor at
/// January). Anchors must be strictly increasing.
pub fn read_condition_series<R: std::io::Read>(source: R) -> Result<Vec<(MonthDate, f64)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut anchors: Vec<(MonthDate, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let raw_date = record.get(0).unwrap_or("").trim();
        let date: MonthDate = if raw_date.len() == 4 {
            format!("{raw_date}-01").parse()?
        } else {
            raw_date.parse()?
        };
        let raw_value = record.get(1).unwrap_or("").trim();
        let value: f64 = raw_value.parse().map_err(|_| Error::ParseCell {
            row: i + 2,
            column: "value".into(),
            value: raw_value.to_string(),
        })?;
        if let Some(&(prev, _)) = anchors.last() {
            if date <= prev {
                return Err(Error::invalid(format!(
                    "scenario dates must increase: {prev} then {date}"
                )));
            }
        }
        anchors.push((date, value));
    }
    if anchors.is_empty() {
        return Err(Error::invalid("scenario file has no rows"));
    }
    Ok(anchors)
}

/// Projects scenario anchors onto the monthly forecast grid by linear
/// interpolation, holding flat before the first and after the last anchor.
pub fn interpolate_monthly(
    anchors: &[(MonthDate, f64)],
    start: MonthDate,
    horizon: usize,
) -> Result<Vec<f64>> {
    if anchors.is_empty() {
        return Err(Error::invalid("no scenario anchors"));
    }
    let mut values = Vec::with_capacity(horizon);
    let last = anchors.len() - 1;
    for s in 0..horizon {
        let idx = start.add_months(s as i64).index();
        let value = if idx <= anchors[0].0.index() {
            anchors[0].1
        } else if idx >= anchors[last].0.index() {
            anchors[last].1
        } else {
            let pos = anchors.partition_point(|(d, _)| d.index() <= idx);
            let (d0, v0) = anchors[pos - 1];
            let (d1, v1) = anchors[pos];
            let w = (idx - d0.index()) as f64 / (d1.index() - d0.index()) as f64;
            v0 + w * (v1 - v0)
        };
        values.push(value);
    }
    Ok(values)
}

/// Crossing direction: at or below / at or above the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Below,
    Above,
}

impl Direction {
    fn hit(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::Below => value <= threshold,
            Direction::Above => value >= threshold,
        }
    }
}

/// Per-draw first-crossing distribution over forecast steps.
#[derive(Clone, Debug)]
pub struct CrossingResult {
    /// First 0-based forecast step satisfying the inequality, per draw.
    pub first: Vec<Option<usize>>,
    /// Fraction of draws that never cross.
    pub share_never: f64,
    /// 5/50/95% nearest-rank quantiles with never-crossing draws ranked
    /// last; `None` when the quantile falls into the never-crossing mass.
    pub lower: Option<usize>,
    pub median: Option<usize>,
    pub upper: Option<usize>,
}

/// First forecast step at which `variable` crosses `threshold`, per draw.
pub fn first_crossing(
    result: &ScenarioResult,
    variable: usize,
    threshold: f64,
    direction: Direction,
) -> CrossingResult {
    let first: Vec<Option<usize>> = result
        .paths
        .iter()
        .map(|path| (0..path.nrows()).find(|&s| direction.hit(path[(s, variable)], threshold)))
        .collect();
    let (share_never, quantiles) = sentinel_quantiles(&first);
    CrossingResult {
        first,
        share_never,
        lower: quantiles[0],
        median: quantiles[1],
        upper: quantiles[2],
    }
}

/// First-crossing distribution restricted to one calendar month, with a
/// seasonal level added back before thresholding (deseasonalized runs
/// store anomalies; the threshold lives in raw levels). Reports calendar
/// years.
pub fn first_crossing_in_month(
    result: &ScenarioResult,
    variable: usize,
    threshold: f64,
    direction: Direction,
    forecast_start: MonthDate,
    month: u32,
    seasonal_offset: f64,
) -> Result<YearCrossingResult> {
    if !(1..=12).contains(&month) {
        return Err(Error::invalid(format!("month {month} out of range")));
    }
    let horizon = result.horizon();
    let steps: Vec<(usize, i32)> = (0..horizon)
        .filter_map(|s| {
            let date = forecast_start.add_months(s as i64);
            (date.month == month).then_some((s, date.year))
        })
        .collect();
    if steps.is_empty() {
        return Err(Error::invalid("horizon never reaches the requested month"));
    }
    let first: Vec<Option<i32>> = result
        .paths
        .iter()
        .map(|path| {
            steps
                .iter()
                .find(|&&(s, _)| direction.hit(path[(s, variable)] + seasonal_offset, threshold))
                .map(|&(_, year)| year)
        })
        .collect();
    let (share_never, quantiles) = sentinel_quantiles(&first);
    Ok(YearCrossingResult {
        first,
        share_never,
        lower: quantiles[0],
        median: quantiles[1],
        upper: quantiles[2],
    })
}

/// Calendar-year crossing distribution.
#[derive(Clone, Debug)]
pub struct YearCrossingResult {
    pub first: Vec<Option<i32>>,
    pub share_never: f64,
    pub lower: Option<i32>,
    pub median: Option<i32>,
    pub upper: Option<i32>,
}

/// Nearest-rank 5/50/95% quantiles; `None` (never crossed) sorts last so
/// upper quantiles fall to `None` once the never-crossing share is large.
fn sentinel_quantiles<T: Copy + Ord>(first: &[Option<T>]) -> (f64, [Option<T>; 3]) {
    let n = first.len();
    assert!(n > 0, "crossing over an empty draw set");
    let mut sorted: Vec<Option<T>> = first.to_vec();
    sorted.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => x.cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let never = sorted.iter().filter(|v| v.is_none()).count();
    let pick = |q: f64| -> Option<T> {
        let rank = (q * n as f64).ceil() as usize;
        sorted[rank.clamp(1, n) - 1]
    };
    (
        never as f64 / n as f64,
        [pick(0.05), pick(0.5), pick(0.95)],
    )
}
