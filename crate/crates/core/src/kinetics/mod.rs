//! Continuous-time dynamics on the periodic lattice: configurations, the
//! event-tree kinetic Monte Carlo for `N² L_p`, the `H`-tilted dynamics and
//! exact Girsanov path weights.
//!
//! Jumps `x → x + y` happen at rate `N² p_x g(η(x)) T(y)`; the tilt
//! multiplies this by `e^{H(t,(x+y)/N) - H(t,x/N)}`. Times are macroscopic.

mod dynamics;
mod record;
mod state;
mod tree;

use thiserror::Error;

use crate::equilibria::EquilibriaError;

pub use dynamics::{
    block_profile, girsanov_log_weight, run, run_tilted, run_weighted, simulate, PathRecord, RunOptions, SnapshotGrid,
};
pub use record::{write_metadata_json, write_profiles_csv, RunMetadata};
pub use state::{
    init_equilibrium, init_from_fugacities, init_profile, site_fugacities, Configuration, EventLog, JumpEvent,
    SimulationState,
};
pub use tree::RateTree;

#[derive(Debug, Error)]
pub enum KineticsError {
    #[error("total rate vanished at time {time}: no event possible")]
    Frozen { time: f64 },
    #[error("configuration has {config} sites but the environment has {env}")]
    LengthMismatch { config: usize, env: usize },
    #[error("particle count changed at time {time}")]
    ConservationViolated { time: f64 },
    #[error("tilt exceeded the thinning envelope (ratio {ratio}) at time {time}")]
    EnvelopeViolated { ratio: f64, time: f64 },
    #[error("path weight needs the event log, which was not recorded")]
    MissingEvents,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Equilibria(#[from] EquilibriaError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}
