use serde::Serialize;

use super::DeviationsError;
use crate::hydro::DensityField;
use crate::kinetics::PathRecord;

/// Density profiles `u_t` on a common spatial grid of the torus `[0, W)`.
///
/// Cell `j` sits at `(j + offset) W/J`: `offset = 0` for solver output
/// (grid points), `0.5` for block averages (bin centres).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeasure {
    pub times: Vec<f64>,
    pub profiles: Vec<Vec<f64>>,
    pub width: f64,
    pub offset: f64,
    pub provenance: String,
}

impl TrajectoryMeasure {
    pub fn new(
        times: Vec<f64>,
        profiles: Vec<Vec<f64>>,
        width: f64,
        offset: f64,
        provenance: impl Into<String>,
    ) -> Result<Self, DeviationsError> {
        if times.is_empty() || times.len() != profiles.len() {
            return Err(DeviationsError::GridMismatch(format!("{} times, {} profiles", times.len(), profiles.len())));
        }
        let cells = profiles[0].len();
        if cells == 0 || profiles.iter().any(|p| p.len() != cells) {
            return Err(DeviationsError::GridMismatch("profiles of unequal length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DeviationsError::GridMismatch("times must increase".into()));
        }
        if profiles.iter().flatten().any(|&u| !(u >= 0.0)) {
            return Err(DeviationsError::InvalidArgument("negative density".into()));
        }
        if !(width > 0.0) {
            return Err(DeviationsError::InvalidArgument(format!("width {width}")));
        }
        Ok(Self { times, profiles, width, offset, provenance: provenance.into() })
    }

    pub fn from_fields(fields: &[DensityField]) -> Result<Self, DeviationsError> {
        let width = fields.first().map_or(1.0, |f| f.width);
        Self::new(
            fields.iter().map(|f| f.time).collect(),
            fields.iter().map(|f| f.values.clone()).collect(),
            width,
            0.0,
            "solver",
        )
    }

    /// Block profiles of a run; `width = L/N`.
    pub fn from_record(rec: &PathRecord, width: f64) -> Result<Self, DeviationsError> {
        Self::new(rec.snapshot_times.clone(), rec.density_profiles.clone(), width, 0.5, "simulation")
    }

    pub fn cells(&self) -> usize {
        self.profiles[0].len()
    }

    pub fn dx(&self) -> f64 {
        self.width / self.cells() as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        (j as f64 + self.offset) * self.dx()
    }

    pub fn initial(&self) -> &[f64] {
        &self.profiles[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.profiles[self.profiles.len() - 1]
    }

    /// `Δx Σ_j u_j f(x_j)` for profile `k`.
    pub fn pairing<F: Fn(f64) -> f64>(&self, k: usize, f: F) -> f64 {
        self.profiles[k].iter().enumerate().map(|(j, u)| u * f(self.position(j))).sum::<f64>() * self.dx()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }
}
