use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{HydroError, PhiSpline, DEFAULT_SPLINE_NODES};
use crate::equilibria::{FugacityMaps, TransitionKernel};
use crate::fields::TestFunction;
use crate::profile::DensityProfile;

pub const DEFAULT_CFL: f64 = 0.4;
pub const MIN_CELLS: usize = 16;

/// Coefficient in front of the drift `∂_x(Φ(u) ∂_x H)`.
///
/// `AsPrinted` uses 1. `SigmaWeighted` uses `σ`, which is what a Taylor
/// expansion of the tilted generator produces for a general kernel; the two
/// agree for nearest-neighbour jumps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftConvention {
    #[default]
    AsPrinted,
    SigmaWeighted,
}

impl DriftConvention {
    pub fn coefficient(self, sigma: f64) -> f64 {
        match self {
            Self::AsPrinted => 1.0,
            Self::SigmaWeighted => sigma,
        }
    }
}

/// Density values on `J` equally spaced cells of the torus `[0, W)`;
/// `values[j]` sits at `x_j = jW/J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityField {
    pub time: f64,
    pub width: f64,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.width / self.values.len() as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// `W/J Σ u_j`.
    pub fn mass(&self) -> f64 {
        self.dx() * self.values.iter().sum::<f64>()
    }

    /// Averages over `bins` equal blocks, matching the block profiles
    /// recorded by simulations.
    pub fn bin_average(&self, bins: usize) -> Result<Vec<f64>, HydroError> {
        if bins == 0 || !self.len().is_multiple_of(bins) {
            return Err(HydroError::GridMismatch(format!("{} cells into {bins} bins", self.len())));
        }
        let w = self.len() / bins;
        Ok(self.values.chunks(w).map(|c| c.iter().sum::<f64>() / w as f64).collect())
    }

    /// `∫ |u − v| dx` against a block profile on `bins = v.len()` equal bins.
    pub fn l1_distance_to_bins(&self, profile: &[f64]) -> Result<f64, HydroError> {
        let mine = self.bin_average(profile.len())?;
        let dx = self.width / profile.len() as f64;
        Ok(mine.iter().zip(profile).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx)
    }
}

/// Everything the solver needs besides the grid.
#[derive(Debug, Clone)]
pub struct HydroProblem {
    pub phi: PhiSpline,
    pub sigma: f64,
    pub drive: Option<TestFunction>,
    pub initial: DensityProfile,
    pub horizon: f64,
    pub width: f64,
    pub convention: DriftConvention,
}

impl HydroProblem {
    /// Builds the `Φ` spline on `[0, 2 max γ + 1]` (clipped below `ρ_max`).
    pub fn new(
        maps: &FugacityMaps,
        kernel: &TransitionKernel,
        initial: DensityProfile,
        horizon: f64,
        width: f64,
    ) -> Result<Self, HydroError> {
        if !(horizon > 0.0 && width > 0.0) {
            return Err(HydroError::InvalidArgument(format!("horizon {horizon}, width {width}")));
        }
        let mut top = 2.0 * initial.max_value(width) + 1.0;
        if maps.rho_max().is_finite() {
            top = top.min(0.999 * maps.rho_max());
        }
        let phi = PhiSpline::from_maps(maps, top, DEFAULT_SPLINE_NODES)?;
        Ok(Self {
            phi,
            sigma: kernel.sigma(),
            drive: None,
            initial,
            horizon,
            width,
            convention: DriftConvention::default(),
        })
    }

    pub fn with_drive(mut self, h: TestFunction) -> Self {
        self.drive = if h.is_zero() { None } else { Some(h) };
        self
    }

    pub fn with_convention(mut self, c: DriftConvention) -> Self {
        self.convention = c;
        self
    }

    pub fn drift_coefficient(&self) -> f64 {
        self.convention.coefficient(self.sigma)
    }

    /// `∂_x H(t, x)`, 0 without a drive.
    pub(crate) fn drive_du(&self, t: f64, x: f64) -> f64 {
        self.drive.as_ref().map_or(0.0, |h| h.du(t, x))
    }
}

/// Explicit conservative scheme for `∂_t u = (σ/2) ∂²Φ(u) − c ∂(Φ(u) ∂H)`.
///
/// Interface flux `F_{j+½} = −(σ/2)(Φ_{j+1} − Φ_j)/Δx + c Φ(u_up) ∂_x H`
/// with `u_up` taken upwind of the sign of `∂_x H`; fluxes telescope so mass
/// is conserved to roundoff. `Δt = safety · Δx² / (σ max Φ')`, further
/// shortened when the drift is large so the update stays monotone. Steps are
/// cut to land exactly on the requested `times`, which must lie in
/// `[0, 𝒯]`; `0` returns the initial data.
pub fn solve(
    problem: &HydroProblem,
    cells: usize,
    cfl_safety: f64,
    times: &[f64],
) -> Result<Vec<DensityField>, HydroError> {
    if cells < MIN_CELLS {
        return Err(HydroError::InvalidArgument(format!("need at least {MIN_CELLS} cells, got {cells}")));
    }
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        return Err(HydroError::InvalidArgument(format!("cfl safety {cfl_safety} outside (0, 1]")));
    }
    if times.iter().any(|t| !(0.0..=problem.horizon).contains(t)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HydroError::InvalidArgument("output times must increase within [0, horizon]".into()));
    }
    let dx = problem.width / cells as f64;
    let half_sigma = 0.5 * problem.sigma;
    let c = problem.drift_coefficient();
    let mut u: Vec<f64> = (0..cells).map(|j| problem.initial.value(j as f64 * dx)).collect();
    if u.iter().any(|&v| !(v >= 0.0)) {
        return Err(HydroError::InvalidArgument("initial profile must be nonnegative".into()));
    }
    let mut phi = vec![0.0; cells];
    let mut flux = vec![0.0; cells];
    // interface x_{j+½}
    let faces: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * dx).collect();
    let mut drift = vec![0.0; cells];
    let time_dependent = problem.drive.as_ref().is_some_and(|h| !h.is_time_independent());
    if problem.drive.is_some() {
        for (j, &x) in faces.iter().enumerate() {
            drift[j] = c * problem.drive_du(0.0, x);
        }
    }

    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &target in times {
        while t < target {
            let mut max_slope = 0.0f64;
            for (j, &v) in u.iter().enumerate() {
                if !problem.phi.covers(v) {
                    return Err(HydroError::OutOfRange { u: v, u_max: problem.phi.u_max() });
                }
                let s = problem.phi.derivative(v);
                if !(s > 0.0) {
                    return Err(HydroError::DegenerateStep { u: v, slope: s });
                }
                max_slope = max_slope.max(s);
                phi[j] = problem.phi.eval(v);
            }
            if time_dependent {
                for (j, &x) in faces.iter().enumerate() {
                    drift[j] = c * problem.drive_du(t, x);
                }
            }
            let max_drift = drift.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let rate = problem.sigma * max_slope / (dx * dx) + 2.0 * max_drift * max_slope / dx;
            let mut dt = cfl_safety / rate;
            if t + dt >= target {
                dt = target - t;
            }
            for j in 0..cells {
                let k = if j + 1 == cells { 0 } else { j + 1 };
                let up = if drift[j] >= 0.0 { phi[j] } else { phi[k] };
                flux[j] = -half_sigma * (phi[k] - phi[j]) / dx + up * drift[j];
            }
            let r = dt / dx;
            for j in 0..cells {
                let left = if j == 0 { cells - 1 } else { j - 1 };
                u[j] -= r * (flux[j] - flux[left]);
            }
            t = if t + dt >= target { target } else { t + dt };
        }
        out.push(DensityField { time: target, width: problem.width, values: u.clone() });
    }
    Ok(out)
}

/// Rows `time,grid_index,u`.
pub fn write_fields_csv<W: Write>(out: W, fields: &[DensityField]) -> Result<(), HydroError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "grid_index", "u"])?;
    for f in fields {
        for (j, v) in f.values.iter().enumerate() {
            w.serialize((f.time, j, v))?;
        }
    }
    w.flush()?;
    Ok(())
}
