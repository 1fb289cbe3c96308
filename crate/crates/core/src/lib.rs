//! Simulation and numerics for the zero-mean asymmetric zero range process
//! in a quenched random environment.
//!
//! The crate is organised bottom-up:
//!
//! - [`equilibria`]: rate functions, transition kernels, the partition
//!   function and the density/fugacity maps `Z`, `M`, `R`, `Φ`, site
//!   sampling, the moment envelope `ω` and the hypothesis checks.
//! - [`media`]: environment laws and realizations `{p_x}`.
//! - [`kinetics`]: configurations, the event-tree kinetic Monte Carlo for
//!   the generator `N² L_p`, the `H`-tilted dynamics and path weights.
//! - [`fields`]: test functions, cylinder observables, block averages,
//!   `Ψ̃` and the replacement fields.
//! - [`hydro`]: a conservative finite-difference solver for the
//!   hydrodynamic equation and its weak-form residual.
//! - [`deviations`]: the functional `J_H`, lower bounds on `I_0`, the
//!   static entropy and Monte Carlo probability scans.
//!
//! Everything runs on a periodic lattice of `L = N·W` sites identified with
//! the torus `[0, W)` through `x ↦ x/N`.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deviations;
pub mod equilibria;
pub mod fields;
pub mod hydro;
pub mod kinetics;
pub mod media;
pub mod profile;
pub mod quadrature;
pub mod seeding;
pub mod stats;

mod error;

pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;
