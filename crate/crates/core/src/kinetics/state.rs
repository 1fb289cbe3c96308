use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{KineticsError, RateTree};
use crate::equilibria::{EquilibriaError, FugacityMaps, RateFunction, TransitionKernel};
use crate::media::Environment;
use crate::profile::DensityProfile;
use crate::seeding::exp1;

/// Occupation numbers on the periodic lattice with a cached total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    eta: Vec<u32>,
    total: u64,
}

impl Configuration {
    pub fn new(eta: Vec<u32>) -> Self {
        let total = eta.iter().map(|&e| e as u64).sum();
        Self { eta, total }
    }

    pub fn empty(len: usize) -> Self {
        Self { eta: vec![0; len], total: 0 }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn eta(&self) -> &[u32] {
        &self.eta
    }

    #[inline]
    pub fn get(&self, x: usize) -> u32 {
        self.eta[x]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `Σ η(x)` recomputed from scratch.
    pub fn recount(&self) -> u64 {
        self.eta.iter().map(|&e| e as u64).sum()
    }

    /// Target site of a jump `x → x + y` with periodic wrap.
    #[inline]
    pub fn target(&self, x: usize, y: i64) -> usize {
        (x as i64 + y).rem_euclid(self.eta.len() as i64) as usize
    }

    /// `η ↦ η^{x, x+y}`; returns the target site.
    #[inline]
    fn move_particle(&mut self, x: usize, y: i64) -> usize {
        let z = self.target(x, y);
        debug_assert!(self.eta[x] > 0);
        self.eta[x] -= 1;
        self.eta[z] += 1;
        z
    }
}

/// A realized jump. `time` is the macroscopic time of the jump and `dt`
/// the waiting time since the previous event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub dt: f64,
    pub site: usize,
    pub displacement: i64,
}

/// Full event history of a run, sufficient to replay the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub initial: Configuration,
    pub start_time: f64,
    pub events: Vec<JumpEvent>,
}

/// State of the process generated by `N² L_p` on `L` sites.
#[derive(Debug, Clone)]
pub struct SimulationState {
    config: Configuration,
    env: Arc<Environment>,
    g: Arc<RateFunction>,
    kernel: Arc<TransitionKernel>,
    scale: usize,
    time: f64,
    tree: RateTree,
    log: Option<EventLog>,
    check_conservation: bool,
}

fn site_weight(env: &Environment, g: &RateFunction, eta: &Configuration, x: usize) -> Result<f64, KineticsError> {
    let k = eta.get(x);
    let gk = g.rate(k).ok_or(EquilibriaError::BeyondDepth { k: k as usize, depth: g.depth() })?;
    Ok(env.at(x) * gk)
}

impl SimulationState {
    pub fn new(
        config: Configuration,
        env: Arc<Environment>,
        g: Arc<RateFunction>,
        kernel: Arc<TransitionKernel>,
        scale: usize,
    ) -> Result<Self, KineticsError> {
        if config.len() != env.len() || config.is_empty() {
            return Err(KineticsError::LengthMismatch { config: config.len(), env: env.len() });
        }
        if scale == 0 {
            return Err(KineticsError::InvalidArgument("scaling parameter N must be positive".into()));
        }
        let weights = (0..config.len()).map(|x| site_weight(&env, &g, &config, x)).collect::<Result<Vec<_>, _>>()?;
        let tree = RateTree::from_weights(&weights);
        Ok(Self { config, env, g, kernel, scale, time: 0.0, tree, log: None, check_conservation: false })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn eta(&self) -> &[u32] {
        self.config.eta()
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn rate(&self) -> &RateFunction {
        &self.g
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    /// Scaling parameter `N`.
    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.config.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.is_empty()
    }

    /// Macroscopic time.
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    /// `Σ_x p_x g(η(x))` from the tree.
    #[inline]
    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    /// Site weight `p_x g(η(x))` held by the tree.
    #[inline]
    pub fn site_rate(&self, x: usize) -> f64 {
        self.tree.weight(x)
    }

    /// Total rate recomputed from scratch (coherence check).
    pub fn rebuilt_total_rate(&self) -> Result<f64, KineticsError> {
        let weights =
            (0..self.len()).map(|x| site_weight(&self.env, &self.g, &self.config, x)).collect::<Result<Vec<_>, _>>()?;
        Ok(RateTree::from_weights(&weights).total())
    }

    /// Start recording every jump (needed for path weights after the run).
    pub fn enable_event_log(&mut self) {
        self.log = Some(EventLog { initial: self.config.clone(), start_time: self.time, events: Vec::new() });
    }

    pub fn event_log(&self) -> Option<&EventLog> {
        self.log.as_ref()
    }

    pub fn take_event_log(&mut self) -> Option<EventLog> {
        self.log.take()
    }

    /// Verify `Σ η` against the cached total after every jump.
    pub fn set_conservation_checks(&mut self, on: bool) {
        self.check_conservation = on;
    }

    /// Exponential waiting time with parameter `N² · rate`.
    #[inline]
    pub(crate) fn waiting_time<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> f64 {
        let n = self.scale as f64;
        exp1(rng) / (n * n * rate)
    }

    /// Pick `(x, y)` with probability `w_x T(y) / Σ w`.
    #[inline]
    pub(crate) fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, i64) {
        let x = self.tree.find(rng.random::<f64>() * self.tree.total());
        (x, self.kernel.sample(rng))
    }

    /// Apply the jump at absolute macroscopic time `time`.
    pub(crate) fn apply(&mut self, time: f64, x: usize, y: i64) -> Result<JumpEvent, KineticsError> {
        let dt = time - self.time;
        let z = self.config.move_particle(x, y);
        let wx = site_weight(&self.env, &self.g, &self.config, x)?;
        let wz = site_weight(&self.env, &self.g, &self.config, z)?;
        self.tree.update(x, wx);
        self.tree.update(z, wz);
        self.time = time;
        if self.check_conservation && self.config.recount() != self.config.total {
            return Err(KineticsError::ConservationViolated { time });
        }
        let ev = JumpEvent { time, dt, site: x, displacement: y };
        if let Some(log) = &mut self.log {
            log.events.push(ev);
        }
        Ok(ev)
    }

    /// One event of the untilted dynamics.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<JumpEvent, KineticsError> {
        let total = self.total_rate();
        if !(total > 0.0) {
            return Err(KineticsError::Frozen { time: self.time });
        }
        let t = self.time + self.waiting_time(total, rng);
        let (x, y) = self.propose(rng);
        self.apply(t, x, y)
    }
}

/// Per-site fugacities `Φ(γ(x/N))/p_x` for an initial profile.
///
/// Values of `γ` are inverted once each, so constant stretches cost one
/// root find.
pub fn site_fugacities(
    env: &Environment,
    maps: &FugacityMaps,
    profile: &DensityProfile,
    scale: usize,
) -> Result<Vec<f64>, KineticsError> {
    let mut cache: HashMap<u64, f64> = HashMap::new();
    (0..env.len())
        .map(|x| {
            let rho = profile.value(x as f64 / scale as f64);
            let phi = match cache.get(&rho.to_bits()) {
                Some(&v) => v,
                None => {
                    let v = maps.phi(rho)?;
                    cache.insert(rho.to_bits(), v);
                    v
                }
            };
            Ok(phi / env.at(x))
        })
        .collect()
}

/// Independent site draws with the given fugacities.
pub fn init_from_fugacities<R: Rng + ?Sized>(
    env: Arc<Environment>,
    maps: &FugacityMaps,
    kernel: Arc<TransitionKernel>,
    fugacities: &[f64],
    scale: usize,
    rng: &mut R,
) -> Result<SimulationState, KineticsError> {
    if fugacities.len() != env.len() {
        return Err(KineticsError::LengthMismatch { config: fugacities.len(), env: env.len() });
    }
    let eta = fugacities
        .iter()
        .map(|&phi| Ok(maps.series(phi)?.sample(rng) as u32))
        .collect::<Result<Vec<_>, KineticsError>>()?;
    SimulationState::new(Configuration::new(eta), env, maps.rate_arc(), kernel, scale)
}

/// Draw from `ν̄_ρ^p`: site `x` has fugacity `Φ(ρ)/p_x`.
pub fn init_equilibrium<R: Rng + ?Sized>(
    env: Arc<Environment>,
    maps: &FugacityMaps,
    kernel: Arc<TransitionKernel>,
    rho: f64,
    scale: usize,
    rng: &mut R,
) -> Result<SimulationState, KineticsError> {
    init_profile(env, maps, kernel, &DensityProfile::constant(rho), scale, rng)
}

/// Draw from `ν̄_{γ,N}^p`: site `x` has fugacity `Φ(γ(x/N))/p_x`.
pub fn init_profile<R: Rng + ?Sized>(
    env: Arc<Environment>,
    maps: &FugacityMaps,
    kernel: Arc<TransitionKernel>,
    profile: &DensityProfile,
    scale: usize,
    rng: &mut R,
) -> Result<SimulationState, KineticsError> {
    let fug = site_fugacities(&env, maps, profile, scale)?;
    init_from_fugacities(env, maps, kernel, &fug, scale, rng)
}
