use thiserror::Error;

use crate::deviations::DeviationsError;
use crate::equilibria::EquilibriaError;
use crate::fields::FieldsError;
use crate::hydro::HydroError;
use crate::kinetics::KineticsError;
use crate::media::MediaError;

/// Any error raised by the crate.
#[derive(Debug, Error)]
pub enum Error {
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
    #[error(transparent)]
    Deviations(#[from] DeviationsError),
}
