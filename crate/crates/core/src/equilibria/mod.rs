//! Rate functions, jump kernels, the single-site partition function and the
//! density/fugacity maps of the product invariant measures.
//!
//! For fugacity `φ` the site marginal is `φ^k / (g(k)! Z(φ))`; in the random
//! medium site `x` carries fugacity `φ/p_x`. `M(φ)` is the mean occupation,
//! `R(φ) = m[M(φ/p_0)]` the quenched density and `Φ = R⁻¹`.

mod envelope;
mod hypotheses;
mod kernel;
mod maps;
mod rate;
mod series;

use thiserror::Error;

pub use envelope::{legendre_transform, MomentEnvelope, OmegaShape};
pub use hypotheses::{check_hypotheses, HypothesisCheck, HypothesisReport};
pub use kernel::TransitionKernel;
pub use maps::{quenched_density, FugacityMaps, MapsOptions};
pub use rate::{RateFunction, RateTag};
pub use series::{mean_occupation, partition_function, sample_site, SiteSeries};

/// Default relative tail tolerance for series truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Default absolute tolerance on `R(Φ(ρ)) - ρ`.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriaError {
    #[error("rate function must satisfy g(0) = 0 and g(k) > 0 for k >= 1 (violated at k = {0})")]
    InvalidRate(usize),
    #[error("occupation {k} exceeds the tabulated depth {depth} of the rate function")]
    BeyondDepth { k: usize, depth: usize },
    #[error("series for fugacity {phi} did not converge within depth {depth}")]
    NonConvergent { phi: f64, depth: usize },
    #[error("density {rho} outside the working range [0, {max}]")]
    OutOfRange { rho: f64, max: f64 },
    #[error("invalid transition kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid moment envelope: {0}")]
    InvalidEnvelope(String),
    #[error("supremum unbounded on the grid: alpha*x - omega(alpha) still increasing at alpha = {0}")]
    UnboundedSup(f64),
    #[error("fugacity maps not monotone: {0}")]
    NotMonotone(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
