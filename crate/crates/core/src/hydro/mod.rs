//! Finite-difference solver for the hydrodynamic equation on the torus
//! `[0, W)`:
//!
//! `∂_t u = (σ/2) ∂²_x Φ(u) − ∂_x(Φ(u) ∂_x H)`.
//!
//! The drift coefficient is selectable through [`DriftConvention`]; by
//! default it is 1 as written above.

mod residual;
mod solver;
mod spline;

use thiserror::Error;

use crate::equilibria::EquilibriaError;

pub use residual::residual;
pub use solver::{solve, write_fields_csv, DensityField, DriftConvention, HydroProblem, DEFAULT_CFL, MIN_CELLS};
pub use spline::{PhiSpline, DEFAULT_SPLINE_NODES};

#[derive(Debug, Error)]
pub enum HydroError {
    #[error("Φ is not increasing near u = {u} (slope {slope})")]
    DegenerateStep { u: f64, slope: f64 },
    #[error("density {u} left the tabulated range [0, {u_max}] of Φ")]
    OutOfRange { u: f64, u_max: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Equilibria(#[from] EquilibriaError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}
