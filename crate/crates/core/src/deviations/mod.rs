//! Large-deviation functionals and Monte Carlo estimators: the dynamical
//! functional `J_H`, variational lower bounds on `I_0 = sup_H J_H`, the
//! static entropy `h(γ|ρ)` and its finite-`N` form, probability scans over
//! `N` and the replacement-field probe.

mod entropy;
mod functional;
mod scan;
mod trajectory;

use thiserror::Error;

use crate::equilibria::EquilibriaError;
use crate::fields::FieldsError;
use crate::hydro::HydroError;
use crate::kinetics::KineticsError;
use crate::media::MediaError;

pub use entropy::{entropy, entropy_density, entropy_finite_n};
pub use functional::{
    j_functional, rate_lower_approx, single_h, EstimateDiagnostics, EstimateMethod, OptimizerBudget, RateEstimate,
    RestartTrace, TestFamily,
};
pub use scan::{
    ld_probability_scan, monotone_trend_test, probe_summary, superexp_probe, write_probe_csv, write_scan_csv,
    write_summary_json, EnvironmentMode, ProbeConfig, ProbeRow, ProbeSummary, ScanModel, ScanRow, TrendTest,
    MIN_REPLICAS,
};
pub use trajectory::TrajectoryMeasure;

#[derive(Debug, Error)]
pub enum DeviationsError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error(transparent)]
    Equilibria(#[from] EquilibriaError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
    #[error(transparent)]
    Hydro(#[from] HydroError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<argmin::core::Error> for DeviationsError {
    fn from(e: argmin::core::Error) -> Self {
        Self::Optimizer(e.to_string())
    }
}
