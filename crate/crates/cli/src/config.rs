//! Run configuration: a TOML file describing the dataset, model,
//! prior, analysis targets and scenarios. All file paths resolve
//! relative to the configuration file.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bvarkit_core::{MonthDate, SeasonalMethod};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub forecast: Option<ForecastConfig>,
    #[serde(default)]
    pub scenario: Vec<ScenarioConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset path: delimiter-separated text, header row, `date` column.
    pub file: PathBuf,
    /// Variables in causal order (first = most exogenous).
    pub variables: Vec<String>,
    /// Free-text units per variable, carried into metadata.
    #[serde(default)]
    pub units: BTreeMap<String, String>,
    /// Variables that arrive already deseasonalized.
    #[serde(default)]
    pub skip_deseason: Vec<String>,
    /// Optional estimation window (YYYY-MM, inclusive).
    pub start: Option<String>,
    pub end: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// dummy | bsm-static | bsm-evolving
    #[serde(default = "default_deseason")]
    pub deseason: String,
    pub lags: usize,
    #[serde(default)]
    pub trend: bool,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
}

fn default_deseason() -> String {
    "dummy".into()
}

fn default_draws() -> usize {
    2000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub b_ar: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// Optional grid search over the cartesian product; any axis left out
    /// falls back to the fixed value above.
    pub grid: Option<GridConfig>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        // Benchmark values; λ1 grids conventionally span [0.05, 1].
        Self { b_ar: 0.9, lambda1: 0.3, lambda2: 0.5, lambda3: 1.5, lambda4: 100.0, grid: None }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub b_ar: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub lambda3: Vec<f64>,
    pub lambda4: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Impulse-response horizon in months.
    pub horizon: usize,
    /// Shock sources; empty = every variable.
    pub shocks: Vec<String>,
    /// Channel sets to shut in the decomposition stage.
    pub shut_sets: Vec<Vec<String>>,
    /// Lag orders for the DIC comparison table (empty = skip).
    pub dic_lags: Vec<usize>,
    /// Also score the largest DIC lag order with a linear trend.
    pub dic_trend: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            horizon: 60,
            shocks: Vec::new(),
            shut_sets: Vec::new(),
            dic_lags: Vec::new(),
            dic_trend: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    /// Months past the sample end.
    pub horizon: usize,
    /// zero | sampled
    #[serde(default = "default_shock_mode")]
    pub shock_mode: String,
    /// Variable whose threshold crossings are reported.
    pub target: String,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    /// Calendar month (1–12) the crossings are read at; the seasonal mean
    /// for that month is added back before thresholding. Without it,
    /// crossings run on the full monthly grid in deseasonalized units.
    pub month: Option<u32>,
    /// Variable sets frozen at their end-of-sample deterministic level.
    #[serde(default)]
    pub frozen_sets: Vec<Vec<String>>,
}

fn default_shock_mode() -> String {
    "sampled".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Conditioned variable.
    pub variable: String,
    /// Tabular (date, value) path; annual dates anchor at January.
    pub file: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text).context("parsing config")?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.data.file = base.join(&config.data.file);
        for scenario in &mut config.scenario {
            scenario.file = base.join(&scenario.file);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let vars = &self.data.variables;
        if vars.is_empty() {
            bail!("data.variables must list at least one variable");
        }
        let known: HashSet<&str> = vars.iter().map(|s| s.as_str()).collect();
        if known.len() != vars.len() {
            bail!("data.variables contains duplicates");
        }
        let check = |name: &str, context: &str| -> Result<()> {
            if !known.contains(name) {
                bail!("{context}: `{name}` is not in data.variables");
            }
            Ok(())
        };
        for name in &self.data.skip_deseason {
            check(name, "data.skip_deseason")?;
        }
        for date in [&self.data.start, &self.data.end].into_iter().flatten() {
            date.parse::<MonthDate>()
                .map_err(|e| anyhow::anyhow!("data window: {e}"))?;
        }
        SeasonalMethod::parse(&self.model.deseason)
            .map_err(|e| anyhow::anyhow!("model.deseason: {e}"))?;
        if self.model.lags == 0 {
            bail!("model.lags must be at least 1");
        }
        if self.model.draws == 0 {
            bail!("model.draws must be at least 1");
        }
        for hyper in self.hyper_grid()? {
            hyper
                .validate()
                .map_err(|e| anyhow::anyhow!("prior: {e}"))?;
        }
        for name in &self.analysis.shocks {
            check(name, "analysis.shocks")?;
        }
        for set in &self.analysis.shut_sets {
            if set.is_empty() {
                bail!("analysis.shut_sets contains an empty set");
            }
            for name in set {
                check(name, "analysis.shut_sets")?;
            }
        }
        for lags in &self.analysis.dic_lags {
            if *lags == 0 {
                bail!("analysis.dic_lags must be positive");
            }
        }
        if let Some(forecast) = &self.forecast {
            if forecast.horizon == 0 {
                bail!("forecast.horizon must be at least 1");
            }
            check(&forecast.target, "forecast.target")?;
            match forecast.shock_mode.as_str() {
                "zero" | "sampled" => {}
                other => bail!("forecast.shock_mode: unknown mode `{other}`"),
            }
            if let Some(month) = forecast.month {
                if !(1..=12).contains(&month) {
                    bail!("forecast.month must lie in 1..=12");
                }
            }
            if forecast.thresholds.iter().any(|t| !t.is_finite()) {
                bail!("forecast.thresholds must be finite");
            }
            for set in &forecast.frozen_sets {
                if set.is_empty() {
                    bail!("forecast.frozen_sets contains an empty set");
                }
                for name in set {
                    check(name, "forecast.frozen_sets")?;
                }
            }
        }
        let mut scenario_names = HashSet::new();
        for scenario in &self.scenario {
            if !scenario_names.insert(scenario.name.as_str()) {
                bail!("scenario `{}` declared twice", scenario.name);
            }
            if scenario.name.is_empty()
                || !scenario
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            {
                bail!("scenario names must be non-empty and filename-safe");
            }
            check(&scenario.variable, "scenario.variable")?;
        }
        if !self.scenario.is_empty() && self.forecast.is_none() {
            bail!("scenarios need a [forecast] section for horizon and target");
        }
        Ok(())
    }

    pub fn seasonal_method(&self) -> SeasonalMethod {
        SeasonalMethod::parse(&self.model.deseason).expect("validated")
    }

    /// Fixed hyperparameters, or the cartesian grid when one is declared.
    pub fn hyper_grid(&self) -> Result<Vec<bvarkit_core::MinnesotaHyper>> {
        let p = &self.prior;
        let axis = |grid_axis: &[f64], fixed: f64| -> Vec<f64> {
            if grid_axis.is_empty() { vec![fixed] } else { grid_axis.to_vec() }
        };
        let (b_ar, l1, l2, l3, l4) = match &p.grid {
            None => (
                vec![p.b_ar],
                vec![p.lambda1],
                vec![p.lambda2],
                vec![p.lambda3],
                vec![p.lambda4],
            ),
            Some(grid) => (
                axis(&grid.b_ar, p.b_ar),
                axis(&grid.lambda1, p.lambda1),
                axis(&grid.lambda2, p.lambda2),
                axis(&grid.lambda3, p.lambda3),
                axis(&grid.lambda4, p.lambda4),
            ),
        };
        let mut out = Vec::new();
        for &a in &b_ar {
            for &x1 in &l1 {
                for &x2 in &l2 {
                    for &x3 in &l3 {
                        for &x4 in &l4 {
                            out.push(
                                bvarkit_core::MinnesotaHyper::new(
                                    a,
                                    x1,
                                    x2,
                                    x3,
                                    x4,
                                    self.model.lags,
                                )
                                .map_err(|e| anyhow::anyhow!("prior: {e}"))?,
                            );
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn variable_specs(&self) -> Vec<bvarkit_core::VariableSpec> {
        self.data
            .variables
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let units = self.data.units.get(name).cloned().unwrap_or_default();
                bvarkit_core::VariableSpec { name: name.clone(), units, ordering_index: k }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"
[data]
file = "data.csv"
variables = ["a", "b"]

[model]
lags = 2
seed = 7
"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: RunConfig = toml::from_str(&minimal()).unwrap();
        config.validate().unwrap();
        assert_eq!(config.model.draws, 2000);
        assert_eq!(config.prior.b_ar, 0.9);
        assert_eq!(config.hyper_grid().unwrap().len(), 1);
    }

    #[test]
    fn grid_expands_cartesian_product() {
        let text = minimal()
            + r#"
[prior.grid]
b_ar = [0.5, 0.9]
lambda1 = [0.1, 0.3, 1.0]
"#;
        let config: RunConfig = toml::from_str(&text).unwrap();
        let grid = config.hyper_grid().unwrap();
        assert_eq!(grid.len(), 6);
        assert!(grid.iter().all(|h| h.lambda2 == 0.5));
    }

    #[test]
    fn rejects_unknown_names_and_missing_seed() {
        let text = minimal() + "\n[analysis]\nshocks = [\"zz\"]\n";
        let config: RunConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());

        let no_seed = r#"
[data]
file = "data.csv"
variables = ["a"]

[model]
lags = 1
"#;
        assert!(toml::from_str::<RunConfig>(no_seed).is_err());
    }

    #[test]
    fn rejects_scenarios_without_forecast_section() {
        let text = minimal()
            + r#"
[[scenario]]
name = "warm"
variable = "a"
file = "warm.csv"
"#;
        let config: RunConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());
    }
}
