//! Experiment configuration: one JSON document per experiment, grouped into
//! `model`, `numerics`, `replication` and kind-specific blocks.
//!
//! Parsing rejects unknown keys. Validation turns the document into core
//! objects and reports the dotted path of the first offending key.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use zrp_core::deviations::EnvironmentMode;
use zrp_core::equilibria::{FugacityMaps, MapsOptions, MomentEnvelope, OmegaShape, RateFunction, TransitionKernel};
use zrp_core::fields::{CylinderObservable, SpatialShape, Term, TestFunction};
use zrp_core::hydro::DriftConvention;
use zrp_core::media::EnvironmentLaw;
use zrp_core::profile::DensityProfile;

#[derive(Debug, thiserror::Error)]
#[error("config key `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: key.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Kind {
    Check,
    Equilibrium,
    HydroCompare,
    Girsanov,
    Superexp,
    Ldscan,
    RateEstimate,
}

impl Kind {
    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must agree with the kind given on the command line.
    #[serde(default)]
    pub kind: Option<Kind>,
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub replication: ReplicationConfig,
    /// Test function `H` for girsanov, superexp and rate_estimate.
    #[serde(default)]
    pub h: Option<Vec<TermConfig>>,
    #[serde(default)]
    pub superexp: Option<SuperexpConfig>,
    #[serde(default)]
    pub ldscan: Option<LdscanConfig>,
    #[serde(default)]
    pub rate_estimate: Option<RateEstimateConfig>,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub g: RateConfig,
    /// Displacement → probability; defaults to `{"-1": 0.5, "1": 0.5}`.
    #[serde(default)]
    pub kernel: Option<BTreeMap<String, f64>>,
    pub law: LawConfig,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default)]
    pub gamma: Option<ProfileConfig>,
    #[serde(default)]
    pub omega: Option<OmegaConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Linear {
        #[serde(default)]
        depth: Option<usize>,
    },
    Constant {
        #[serde(default)]
        depth: Option<usize>,
    },
    /// `g(k) = k^exponent`.
    Power {
        exponent: f64,
        #[serde(default)]
        depth: Option<usize>,
    },
    Table {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Homogeneous,
    IidUniform { a0: f64, a1: f64 },
    IidTabulated { a0: f64, a1: f64, values: Vec<f64> },
    ShiftCoupled { a0: f64, a1: f64, window: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Constant,
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        wavelength: f64,
    },
    Bump {
        amplitude: f64,
        center: f64,
        radius: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaConfig {
    Xlog1p { theta: f64 },
    Power { exponent: f64, theta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub drift_convention: DriftConvention,
    #[serde(default)]
    pub tail_tol: Option<f64>,
    #[serde(default)]
    pub root_tol: Option<f64>,
    #[serde(default)]
    pub quad_nodes: Option<usize>,
    #[serde(default)]
    pub phi_max: Option<f64>,
}

fn default_ns() -> Vec<usize> {
    vec![16, 32, 64]
}
fn default_cells() -> usize {
    256
}
fn default_horizon() -> f64 {
    0.1
}
fn default_snapshots() -> usize {
    20
}
fn default_bins() -> usize {
    16
}
fn default_cfl() -> f64 {
    zrp_core::hydro::DEFAULT_CFL
}

impl Default for NumericsConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub environment: EnvironmentMode,
}

fn default_replicas() -> usize {
    100
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

/// `coefficient · bump((u − center)/radius) · Σ_k time_poly[k] (t/𝒯)^k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coefficient: f64,
    pub center: f64,
    pub radius: f64,
    #[serde(default = "default_time_poly")]
    pub time_poly: Vec<f64>,
}

fn default_time_poly() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiConfig {
    Occupation,
    Rate,
    PairProduct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperexpConfig {
    #[serde(default = "default_psi")]
    pub psi: PsiConfig,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_boots")]
    pub bootstrap: usize,
}

fn default_psi() -> PsiConfig {
    PsiConfig::Rate
}
fn default_delta() -> f64 {
    0.05
}
fn default_epsilons() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_boots() -> usize {
    2000
}

/// Event `{ ⟨π_t, 1_[a,b)⟩ ≥ threshold }` at the final snapshot (or
/// `≤ threshold` when `below`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdscanConfig {
    pub window: (f64, f64),
    pub threshold: f64,
    #[serde(default)]
    pub below: bool,
    /// Run the `H`-tilted dynamics instead of the plain ones.
    #[serde(default)]
    pub tilted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEstimateConfig {
    pub window: (f64, f64),
    #[serde(default = "default_splines")]
    pub splines: usize,
    #[serde(default = "one_usize")]
    pub time_degree: usize,
    #[serde(default = "default_outputs")]
    pub outputs: usize,
    #[serde(default = "default_iters")]
    pub max_iters: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Drive the hydrodynamic trajectory with `H` (else it is undriven).
    #[serde(default = "yes")]
    pub driven: bool,
}

fn default_splines() -> usize {
    16
}
fn one_usize() -> usize {
    1
}
fn default_outputs() -> usize {
    50
}
fn default_iters() -> u64 {
    2000
}
fn default_restarts() -> usize {
    4
}
fn yes() -> bool {
    true
}

/// Core objects built from a validated configuration.
pub struct Model {
    pub maps: FugacityMaps,
    pub kernel: Arc<TransitionKernel>,
    pub envelope: MomentEnvelope,
    pub initial: DensityProfile,
    pub rho: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let key = msg.split('`').nth(1).filter(|_| msg.contains("field")).unwrap_or("<document>").to_string();
            bad(&key, msg)
        })
    }

    pub fn check_kind(&self, kind: Kind) -> Result<(), ConfigError> {
        match self.kind {
            Some(k) if k != kind => Err(bad("kind", format!("config is for {k:?}, command line asks for {kind:?}"))),
            _ => Ok(()),
        }
    }

    pub fn build_model(&self) -> Result<Model, ConfigError> {
        let m = &self.model;
        let g = match &m.g {
            RateConfig::Linear { depth } => RateFunction::linear(depth.unwrap_or(RateFunction::DEFAULT_DEPTH)),
            RateConfig::Constant { depth } => RateFunction::constant(depth.unwrap_or(RateFunction::DEFAULT_DEPTH)),
            RateConfig::Power { exponent, depth } => {
                if !(*exponent > 0.0) {
                    return Err(bad("model.g.exponent", "must be positive"));
                }
                RateFunction::from_fn(depth.unwrap_or(RateFunction::DEFAULT_DEPTH), |k| (k as f64).powf(*exponent))
                    .map_err(|e| bad("model.g", e.to_string()))?
            }
            RateConfig::Table { values } => {
                RateFunction::from_table(values.clone()).map_err(|e| bad("model.g.values", e.to_string()))?
            }
        };
        let law = match &m.law {
            LawConfig::Homogeneous => Ok(EnvironmentLaw::homogeneous()),
            LawConfig::IidUniform { a0, a1 } => EnvironmentLaw::iid_uniform(*a0, *a1),
            LawConfig::IidTabulated { a0, a1, values } => EnvironmentLaw::iid_tabulated(*a0, *a1, values.clone()),
            LawConfig::ShiftCoupled { a0, a1, window } => EnvironmentLaw::shift_coupled(*a0, *a1, *window),
        }
        .map_err(|e| bad("model.law", e.to_string()))?;
        let kernel = match &m.kernel {
            None => TransitionKernel::nearest_neighbor(),
            Some(map) => {
                let pairs = map
                    .iter()
                    .map(|(k, &w)| {
                        k.trim()
                            .parse::<i64>()
                            .map(|y| (y, w))
                            .map_err(|_| bad("model.kernel", format!("displacement {k:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                TransitionKernel::new(pairs).map_err(|e| bad("model.kernel", e.to_string()))?
            }
        };
        let envelope = match &m.omega {
            None => Ok(MomentEnvelope::default_envelope()),
            Some(OmegaConfig::Xlog1p { theta }) => MomentEnvelope::new(OmegaShape::XLog1p, *theta),
            Some(OmegaConfig::Power { exponent, theta }) => MomentEnvelope::new(OmegaShape::Power(*exponent), *theta),
        }
        .map_err(|e| bad("model.omega", e.to_string()))?;
        if !(m.rho.is_finite() && m.rho >= 0.0) {
            return Err(bad("model.rho", format!("{} is not a density", m.rho)));
        }
        let initial = match &m.gamma {
            None | Some(ProfileConfig::Constant) => DensityProfile::constant(m.rho),
            Some(ProfileConfig::Sine { amplitude, wavelength }) => {
                DensityProfile::Sine { rho: m.rho, amplitude: *amplitude, wavelength: *wavelength }
            }
            Some(ProfileConfig::Bump { amplitude, center, radius }) => {
                DensityProfile::Bump { rho: m.rho, amplitude: *amplitude, center: *center, radius: *radius }
            }
        };
        let n = &self.numerics;
        if initial.min_value(n.width) < 0.0 {
            return Err(bad("model.gamma", "profile takes negative values"));
        }
        let defaults = MapsOptions::default();
        let opts = MapsOptions {
            tail_tol: n.tail_tol.unwrap_or(defaults.tail_tol),
            root_tol: n.root_tol.unwrap_or(defaults.root_tol),
            quad_nodes: n.quad_nodes.unwrap_or(defaults.quad_nodes),
            phi_max: n.phi_max,
        };
        let maps = FugacityMaps::new(Arc::new(g), law, opts).map_err(|e| bad("numerics", e.to_string()))?;
        if initial.max_value(n.width) >= maps.rho_max() {
            return Err(bad(
                "model.gamma",
                format!("peak density {} reaches the working limit {}", initial.max_value(n.width), maps.rho_max()),
            ));
        }
        Ok(Model { maps, kernel: Arc::new(kernel), envelope, initial, rho: m.rho })
    }

    /// Checks on the numerics block shared by every simulation kind.
    pub fn validate_numerics(&self) -> Result<(), ConfigError> {
        let n = &self.numerics;
        if n.ns.is_empty() || n.ns.contains(&0) {
            return Err(bad("numerics.ns", "need a nonempty list of positive scales"));
        }
        if !(n.width > 0.0) {
            return Err(bad("numerics.width", "must be positive"));
        }
        for &s in &n.ns {
            let l = n.width * s as f64;
            if (l - l.round()).abs() > 1e-9 {
                return Err(bad("numerics.width", format!("N = {s} times W is not a site count")));
            }
            if n.bins > 0 && !(l.round() as usize).is_multiple_of(n.bins) {
                return Err(bad("numerics.bins", format!("{} does not divide the {} sites at N = {s}", n.bins, l)));
            }
        }
        if !(n.horizon > 0.0 && n.horizon.is_finite()) {
            return Err(bad("numerics.horizon", "must be positive"));
        }
        if n.cells == 0 || (n.bins > 0 && !n.cells.is_multiple_of(n.bins)) {
            return Err(bad("numerics.cells", "must be a positive multiple of numerics.bins"));
        }
        if !(n.cfl > 0.0 && n.cfl <= 1.0) {
            return Err(bad("numerics.cfl", "must lie in (0, 1]"));
        }
        if self.replication.replicas == 0 {
            return Err(bad("replication.replicas", "must be positive"));
        }
        Ok(())
    }

    pub fn test_function(&self) -> Result<TestFunction, ConfigError> {
        let terms = self.h.as_ref().ok_or_else(|| bad("h", "missing; this kind needs a test function"))?;
        let terms = terms
            .iter()
            .map(|t| Term {
                coefficient: t.coefficient,
                shape: SpatialShape::Bump { center: t.center, radius: t.radius },
                time_poly: t.time_poly.clone(),
            })
            .collect();
        TestFunction::new(terms, self.numerics.horizon).map_err(|e| bad("h", e.to_string()))
    }

    pub fn observable(&self, psi: PsiConfig, maps: &FugacityMaps) -> CylinderObservable {
        match psi {
            PsiConfig::Occupation => CylinderObservable::Occupation,
            PsiConfig::Rate => CylinderObservable::Rate(maps.rate_arc()),
            PsiConfig::PairProduct => CylinderObservable::PairProduct,
        }
    }
}
