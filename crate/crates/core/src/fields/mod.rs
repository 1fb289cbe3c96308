//! Observables on configurations: test functions, cylinder functions,
//! empirical pairings, block averages, `Ψ̃` and the replacement fields.
//!
//! Configurations are passed as occupation slices `η`, indexed by site on
//! the periodic lattice; site `x` sits at macroscopic position `x/N`.

mod block;
mod observable;
mod test_function;

use thiserror::Error;

use crate::equilibria::EquilibriaError;

pub use block::{
    block_average, empirical_pairing, empirical_pairing_with, macro_radius, one_block_field, superexp_field,
    two_block_discrepancy, BlockSums,
};
pub use observable::{psi_tilde, BlockFunction, CylinderObservable, PsiTilde, PsiTildeCache, EXACT_STATE_LIMIT};
pub use test_function::{SpatialShape, Term, TestFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldsError {
    #[error("block of radius {radius} does not fit on a lattice of {len} sites")]
    BlockTooLarge { radius: usize, len: usize },
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Equilibria(#[from] EquilibriaError),
}
