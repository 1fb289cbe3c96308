use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::{EventLog, KineticsError, SimulationState};
use crate::equilibria::{RateFunction, TransitionKernel};
use crate::fields::TestFunction;
use crate::media::Environment;

/// Snapshot times in `[0, 𝒯]` (strictly increasing, last = `𝒯`) and the
/// number of equal bins used for block-averaged density profiles
/// (`0` disables profiles).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGrid {
    times: Vec<f64>,
    bins: usize,
}

impl SnapshotGrid {
    /// `𝒯` is appended when the given times stop short of it.
    pub fn new(mut times: Vec<f64>, horizon: f64, bins: usize) -> Result<Self, KineticsError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(KineticsError::InvalidArgument(format!("horizon {horizon}")));
        }
        if times.iter().any(|t| !(0.0..=horizon).contains(t)) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(KineticsError::InvalidArgument(
                "snapshot times must be strictly increasing within [0, horizon]".into(),
            ));
        }
        if times.last() != Some(&horizon) {
            times.push(horizon);
        }
        Ok(Self { times, bins })
    }

    /// `count + 1` equally spaced times `k𝒯/count`, `k = 0..=count`.
    pub fn uniform(count: usize, horizon: f64, bins: usize) -> Result<Self, KineticsError> {
        let count = count.max(1);
        let times = (0..=count).map(|k| horizon * k as f64 / count as f64).collect();
        Self::new(times, horizon, bins)
    }

    /// Only the horizon.
    pub fn final_only(horizon: f64, bins: usize) -> Result<Self, KineticsError> {
        Self::new(Vec::new(), horizon, bins)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty grid")
    }
}

/// Mean occupation over `bins` equal blocks of sites.
pub fn block_profile(eta: &[u32], bins: usize) -> Vec<f64> {
    let width = eta.len() / bins;
    eta.chunks(width).map(|c| c.iter().map(|&e| e as f64).sum::<f64>() / width as f64).collect()
}

/// What a run recorded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub snapshot_times: Vec<f64>,
    /// Block-averaged densities per snapshot (empty rows when bins = 0).
    pub density_profiles: Vec<Vec<f64>>,
    pub particle_counts: Vec<u64>,
    /// `log dP^H/dP` of the observed path when a weight was requested.
    pub girsanov_log_weight: Option<f64>,
    pub jump_count: u64,
    /// Proposals including thinning rejections (equals `jump_count` untilted).
    pub proposals: u64,
    /// Time at which the total rate vanished, if it did.
    pub frozen_at: Option<f64>,
    #[serde(skip)]
    pub event_log: Option<EventLog>,
}

/// Optional tilt (dynamics generated by the `H`-tilted generator) and
/// optional path weight (`log dP^H/dP` accumulated along the path).
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub tilt: Option<&'a TestFunction>,
    pub weight: Option<&'a TestFunction>,
}

/// Online Girsanov accumulator for `log dP^H/dP`:
/// `Σ_jumps ΔH - ∫ N² Σ_{x,y} p_x g(η_s(x)) T(y)(e^{ΔH} - 1) ds`.
///
/// Between events the rates are constant; the spatial sum is exact and the
/// time integral is exact for time-independent `H` and trapezoidal
/// otherwise.
pub(crate) struct Girsanov<'a> {
    h: &'a TestFunction,
    n2: f64,
    inv_n: f64,
    active: Vec<usize>,
    /// `f_x = Σ_y T(y)(e^{ΔH(x,y)} - 1)` when `H` is time independent.
    factors: Option<Vec<f64>>,
    s_static: f64,
    log_weight: f64,
    last_t: f64,
}

#[inline]
fn delta_h(h: &TestFunction, state: &SimulationState, inv_n: f64, t: f64, x: usize, y: i64) -> f64 {
    let z = state.config().target(x, y);
    h.value(t, z as f64 * inv_n) - h.value(t, x as f64 * inv_n)
}

impl<'a> Girsanov<'a> {
    pub(crate) fn new(h: &'a TestFunction, state: &SimulationState) -> Self {
        let n = state.scale() as f64;
        let inv_n = 1.0 / n;
        let jumps = state.kernel().jumps();
        let active: Vec<usize> = match h.support() {
            None => Vec::new(),
            Some((a, b)) => (0..state.len())
                .filter(|&x| {
                    std::iter::once(0)
                        .chain(jumps.iter().map(|j| j.0))
                        .map(|y| state.config().target(x, y) as f64 * inv_n)
                        .any(|u| u >= a && u <= b)
                })
                .collect(),
        };
        let mut g =
            Self { h, n2: n * n, inv_n, active, factors: None, s_static: 0.0, log_weight: 0.0, last_t: state.time() };
        if h.is_time_independent() {
            let mut f = vec![0.0; state.len()];
            for &x in &g.active {
                f[x] = jumps.iter().map(|&(y, w)| w * delta_h(h, state, inv_n, 0.0, x, y).exp_m1()).sum();
            }
            g.s_static = g.active.iter().map(|&x| state.site_rate(x) * f[x]).sum();
            g.factors = Some(f);
        }
        g
    }

    fn s_at(&self, state: &SimulationState, t: f64) -> f64 {
        let jumps = state.kernel().jumps();
        self.active
            .iter()
            .map(|&x| {
                let w = state.site_rate(x);
                if w == 0.0 {
                    return 0.0;
                }
                w * jumps.iter().map(|&(y, p)| p * delta_h(self.h, state, self.inv_n, t, x, y).exp_m1()).sum::<f64>()
            })
            .sum()
    }

    /// Integrate the compensator up to `t` with the current configuration.
    pub(crate) fn advance(&mut self, state: &SimulationState, t: f64) {
        let dt = t - self.last_t;
        if dt <= 0.0 {
            return;
        }
        let integral = match self.factors {
            Some(_) => self.s_static * dt,
            None => 0.5 * (self.s_at(state, self.last_t) + self.s_at(state, t)) * dt,
        };
        self.log_weight -= self.n2 * integral;
        self.last_t = t;
    }

    /// Jump term; call before applying the jump. Returns the old weights of
    /// the two affected sites for [`Self::after_jump`].
    pub(crate) fn before_jump(&mut self, state: &SimulationState, t: f64, x: usize, y: i64) -> (usize, f64, f64) {
        self.log_weight += delta_h(self.h, state, self.inv_n, t, x, y);
        let z = state.config().target(x, y);
        (z, state.site_rate(x), state.site_rate(z))
    }

    pub(crate) fn after_jump(&mut self, state: &SimulationState, x: usize, old: (usize, f64, f64)) {
        if let Some(f) = &self.factors {
            let (z, wx, wz) = old;
            if x == z {
                return;
            }
            self.s_static += (state.site_rate(x) - wx) * f[x] + (state.site_rate(z) - wz) * f[z];
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.log_weight
    }
}

/// Run the dynamics from the state's current time up to the grid horizon.
///
/// Waiting times are exponential, so an event drawn past the next snapshot
/// or the horizon can be discarded: by memorylessness the path is exact.
/// With a tilt, events are proposed at the envelope rate
/// `N² Σw · e^{c/N}`, `c = 2A sup|∂_u H|`, and accepted with probability
/// `e^{ΔH(t, x, y)} / e^{c/N}` at the proposal time (thinning; exact in law).
/// If `c = 0` no acceptance draw is made, so the path coincides with the
/// untilted run for the same seed.
pub fn simulate<R, O>(
    state: &mut SimulationState,
    grid: &SnapshotGrid,
    opts: RunOptions<'_>,
    rng: &mut R,
    mut observer: O,
) -> Result<PathRecord, KineticsError>
where
    R: Rng + ?Sized,
    O: FnMut(f64, &SimulationState),
{
    let horizon = grid.horizon();
    if grid.times()[0] < state.time() {
        return Err(KineticsError::InvalidArgument("snapshot before the current time".into()));
    }
    let bins = grid.bins();
    if bins > 0 && !state.len().is_multiple_of(bins) {
        return Err(KineticsError::InvalidArgument(format!(
            "{} sites cannot be split into {bins} equal bins",
            state.len()
        )));
    }
    let inv_n = 1.0 / state.scale() as f64;
    let (tilt, bound) = match opts.tilt {
        Some(h) if !h.is_zero() => {
            let c = 2.0 * state.kernel().range() as f64 * h.sup_abs_du();
            if c > 0.0 {
                (Some(h), (c * inv_n).exp())
            } else {
                (None, 1.0)
            }
        }
        _ => (None, 1.0),
    };
    let mut weight = opts.weight.map(|h| Girsanov::new(h, state));

    let mut rec = PathRecord {
        snapshot_times: grid.times().to_vec(),
        density_profiles: Vec::with_capacity(grid.times().len()),
        particle_counts: Vec::with_capacity(grid.times().len()),
        girsanov_log_weight: None,
        jump_count: 0,
        proposals: 0,
        frozen_at: None,
        event_log: None,
    };
    let mut next_snap = 0;

    loop {
        let total = state.total_rate();
        let t_next = if total > 0.0 { state.time() + state.waiting_time(total * bound, rng) } else { f64::INFINITY };
        while next_snap < grid.times().len() && grid.times()[next_snap] <= t_next {
            let ts = grid.times()[next_snap];
            if let Some(w) = &mut weight {
                w.advance(state, ts);
            }
            rec.density_profiles.push(if bins > 0 { block_profile(state.eta(), bins) } else { Vec::new() });
            rec.particle_counts.push(state.config().total());
            observer(ts, state);
            next_snap += 1;
        }
        if t_next > horizon {
            if total <= 0.0 {
                rec.frozen_at = Some(state.time());
            }
            break;
        }
        if let Some(w) = &mut weight {
            w.advance(state, t_next);
        }
        rec.proposals += 1;
        let (x, y) = state.propose(rng);
        if let Some(h) = tilt {
            let ratio = delta_h(h, state, inv_n, t_next, x, y).exp() / bound;
            if ratio > 1.0 + 1e-12 {
                return Err(KineticsError::EnvelopeViolated { ratio, time: t_next });
            }
            if rng.random::<f64>() >= ratio {
                state.set_time(t_next);
                continue;
            }
        }
        let old = weight.as_mut().map(|w| w.before_jump(state, t_next, x, y));
        state.apply(t_next, x, y)?;
        if let (Some(w), Some(old)) = (&mut weight, old) {
            w.after_jump(state, x, old);
        }
        rec.jump_count += 1;
    }
    if let Some(w) = &mut weight {
        w.advance(state, horizon);
        rec.girsanov_log_weight = Some(w.value());
    }
    state.set_time(horizon);
    rec.event_log = state.take_event_log();
    Ok(rec)
}

/// Untilted run up to the grid horizon.
pub fn run<R: Rng + ?Sized>(
    state: &mut SimulationState,
    grid: &SnapshotGrid,
    rng: &mut R,
) -> Result<PathRecord, KineticsError> {
    simulate(state, grid, RunOptions::default(), rng, |_, _| {})
}

/// Run under the `H`-tilted generator.
pub fn run_tilted<R: Rng + ?Sized>(
    state: &mut SimulationState,
    h: &TestFunction,
    grid: &SnapshotGrid,
    rng: &mut R,
) -> Result<PathRecord, KineticsError> {
    simulate(state, grid, RunOptions { tilt: Some(h), weight: None }, rng, |_, _| {})
}

/// Untilted run that also accumulates `log dP^H/dP` online.
pub fn run_weighted<R: Rng + ?Sized>(
    state: &mut SimulationState,
    h: &TestFunction,
    grid: &SnapshotGrid,
    rng: &mut R,
) -> Result<PathRecord, KineticsError> {
    simulate(state, grid, RunOptions { tilt: None, weight: Some(h) }, rng, |_, _| {})
}

/// `log dP^H/dP` of a logged path on `[start, horizon]`, replayed event by
/// event.
#[allow(clippy::too_many_arguments)]
pub fn girsanov_log_weight(
    log: Option<&EventLog>,
    h: &TestFunction,
    env: Arc<Environment>,
    g: Arc<RateFunction>,
    kernel: Arc<TransitionKernel>,
    scale: usize,
    horizon: f64,
) -> Result<f64, KineticsError> {
    let log = log.ok_or(KineticsError::MissingEvents)?;
    let mut state = SimulationState::new(log.initial.clone(), env, g, kernel, scale)?;
    state.set_time(log.start_time);
    let mut acc = Girsanov::new(h, &state);
    for ev in &log.events {
        if ev.time > horizon {
            break;
        }
        acc.advance(&state, ev.time);
        let old = acc.before_jump(&state, ev.time, ev.site, ev.displacement);
        state.apply(ev.time, ev.site, ev.displacement)?;
        acc.after_jump(&state, ev.site, old);
    }
    acc.advance(&state, horizon);
    Ok(acc.value())
}
