//! Bayesian structural VAR toolkit: panel preparation, Minnesota-prior
//! estimation, recursive identification, impulse responses, transmission
//! decompositions, and long-run scenario forecasting.

pub mod bsm;
pub mod bvar;
pub mod date;
pub mod error;
pub mod irf;
mod optim;
pub mod panel;
pub mod scenario;
pub mod stats;
pub mod svar;
#[cfg(test)]
mod testutil;
pub mod tma;

pub use bsm::{BsmComponents, BsmSpec, SyntheticMode};
pub use bvar::{BvarPosterior, CoefficientDraws, MinnesotaHyper, VarCoefficients};
pub use date::MonthDate;
pub use error::{Error, Result};
pub use irf::{CompanionForm, IrfResult};
pub use panel::{SeasonalFit, SeasonalMethod, TimeSeriesPanel, VariableSpec};
pub use scenario::{
    ConditionPath, CrossingResult, Direction, ForecastOrigin, ScenarioResult, ShockMode,
    YearCrossingResult,
};
pub use stats::Band;
pub use svar::StructuralModel;
pub use tma::ShockSchedule;
