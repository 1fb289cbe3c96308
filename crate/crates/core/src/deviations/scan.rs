use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DeviationsError, TrajectoryMeasure};
use crate::equilibria::{FugacityMaps, TransitionKernel};
use crate::fields::{macro_radius, superexp_field, CylinderObservable, PsiTildeCache, TestFunction};
use crate::kinetics::{init_profile, simulate, RunOptions, SnapshotGrid};
use crate::media::Environment;
use crate::profile::DensityProfile;
use crate::quadrature::trapezoid;
use crate::seeding::{derive_rng, derive_seed, SimRng, Stream};
use crate::stats::{rule_of_three, wilson_interval};

pub const MIN_REPLICAS: usize = 100;
const Z95: f64 = 1.959_963_984_540_054;

fn replica_index(n: usize, r: usize) -> u64 {
    ((n as u64) << 32) | r as u64
}

/// How the medium is drawn for each replica.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentMode {
    /// One realization per `N`, shared by all replicas (quenched).
    #[default]
    Fixed,
    /// A fresh realization for every replica.
    Annealed,
}

/// Probability estimate at one `N`. `rate = −log p̂ / N` when `p̂ > 0`;
/// otherwise the row is censored and `rate_bound` is the one-sided bound
/// from the rule of three.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: usize,
    pub replicas: usize,
    pub hits: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rate: Option<f64>,
    pub censored: bool,
    pub rate_bound: Option<f64>,
}

impl ScanRow {
    pub fn from_counts(n: usize, hits: usize, replicas: usize) -> Self {
        let p_hat = hits as f64 / replicas as f64;
        let (ci_low, ci_high) = wilson_interval(hits as u64, replicas as u64, Z95);
        let censored = hits == 0;
        Self {
            n,
            replicas,
            hits,
            p_hat,
            ci_low,
            ci_high,
            rate: (!censored).then(|| -p_hat.ln() / n as f64),
            censored,
            rate_bound: censored.then(|| -rule_of_three(replicas as u64).ln() / n as f64),
        }
    }
}

/// Crude Monte Carlo frequency of `event` for each `N`.
///
/// `sampler(n, rng)` produces one trajectory; replica `r` at scale `n` uses
/// the stream `(master, Dynamics, n·2³² + r)` so any replica can be
/// reproduced alone. Replicas run in parallel and are reduced in order.
pub fn ld_probability_scan<S, E>(
    ns: &[usize],
    replicas: usize,
    master_seed: u64,
    sampler: S,
    event: E,
) -> Result<Vec<ScanRow>, DeviationsError>
where
    S: Fn(usize, usize, &mut SimRng) -> Result<TrajectoryMeasure, DeviationsError> + Sync,
    E: Fn(&TrajectoryMeasure) -> bool + Sync,
{
    if replicas < MIN_REPLICAS {
        return Err(DeviationsError::InvalidArgument(format!("need at least {MIN_REPLICAS} replicas")));
    }
    ns.iter()
        .map(|&n| {
            let outcomes = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = derive_rng(master_seed, Stream::Dynamics, replica_index(n, r));
                    sampler(n, r, &mut rng).map(|traj| event(&traj))
                })
                .collect::<Result<Vec<bool>, _>>()?;
            Ok(ScanRow::from_counts(n, outcomes.iter().filter(|&&b| b).count(), replicas))
        })
        .collect()
}

/// A zero range model on the torus `[0, W)` run from a product initial law,
/// recording block profiles; the usual `sampler` for [`ld_probability_scan`].
#[derive(Clone)]
pub struct ScanModel<'a> {
    pub maps: &'a FugacityMaps,
    pub kernel: Arc<TransitionKernel>,
    pub width: f64,
    pub initial: DensityProfile,
    pub horizon: f64,
    pub snapshots: usize,
    pub bins: usize,
    pub environment: EnvironmentMode,
    pub tilt: Option<TestFunction>,
    pub master_seed: u64,
}

pub(crate) fn sites_for(width: f64, n: usize) -> Result<usize, DeviationsError> {
    let l = (width * n as f64).round();
    if !(l >= 1.0) || ((l - width * n as f64).abs() > 1e-9) {
        return Err(DeviationsError::InvalidArgument(format!("N = {n} times W = {width} is not a site count")));
    }
    Ok(l as usize)
}

pub(crate) fn environment_for(
    maps: &FugacityMaps,
    mode: EnvironmentMode,
    master: u64,
    n: usize,
    r: usize,
    sites: usize,
) -> Result<Environment, DeviationsError> {
    let index = match mode {
        EnvironmentMode::Fixed => n as u64,
        EnvironmentMode::Annealed => replica_index(n, r),
    };
    Ok(Environment::generate(maps.law(), sites, derive_seed(master, Stream::Environment, index))?)
}

impl ScanModel<'_> {
    pub fn sample(&self, n: usize, replica: usize, rng: &mut SimRng) -> Result<TrajectoryMeasure, DeviationsError> {
        let sites = sites_for(self.width, n)?;
        let env = Arc::new(environment_for(self.maps, self.environment, self.master_seed, n, replica, sites)?);
        let mut state = init_profile(env, self.maps, self.kernel.clone(), &self.initial, n, rng)?;
        let grid = SnapshotGrid::uniform(self.snapshots, self.horizon, self.bins)?;
        let opts = RunOptions { tilt: self.tilt.as_ref(), weight: None };
        let rec = simulate(&mut state, &grid, opts, rng, |_, _| {})?;
        TrajectoryMeasure::from_record(&rec, self.width)
    }
}

/// Settings of the replacement-field probe.
#[derive(Clone)]
pub struct ProbeConfig<'a> {
    pub maps: &'a FugacityMaps,
    pub kernel: Arc<TransitionKernel>,
    pub h: TestFunction,
    pub psi: CylinderObservable,
    pub delta: f64,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub replicas: usize,
    pub rho: f64,
    pub width: f64,
    pub horizon: f64,
    /// Snapshot intervals for the time trapezoid.
    pub snapshots: usize,
    pub environment: EnvironmentMode,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub eps: f64,
    pub radius: usize,
    #[serde(flatten)]
    pub scan: ScanRow,
    pub mean_abs_integral: f64,
}

/// `P[|∫₀^𝒯 W_{N,ε}^{H,Ψ}(t, η_t) dt| > δ]` for every `(ε, N)`.
///
/// Each replica starts from `ν̄_ρ^p` and is observed at `snapshots + 1`
/// equally spaced times; one path serves every `ε` at that `N`.
pub fn superexp_probe(cfg: &ProbeConfig<'_>) -> Result<Vec<ProbeRow>, DeviationsError> {
    if cfg.replicas < MIN_REPLICAS {
        return Err(DeviationsError::InvalidArgument(format!("need at least {MIN_REPLICAS} replicas")));
    }
    if !(cfg.delta > 0.0) || cfg.epsilons.is_empty() {
        return Err(DeviationsError::InvalidArgument("need δ > 0 and at least one ε".into()));
    }
    if cfg.h.horizon() < cfg.horizon {
        return Err(DeviationsError::GridMismatch("test function horizon shorter than the run".into()));
    }
    let cache = PsiTildeCache::new(cfg.psi.clone(), cfg.maps, derive_seed(cfg.master_seed, Stream::Quadrature, 0));
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let radii = cfg.epsilons.iter().map(|&e| macro_radius(e, n)).collect::<Result<Vec<_>, _>>()?;
        let sites = sites_for(cfg.width, n)?;
        let grid = SnapshotGrid::uniform(cfg.snapshots, cfg.horizon, 0)?;
        let integrals: Vec<Vec<f64>> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| -> Result<Vec<f64>, DeviationsError> {
                let mut rng = derive_rng(cfg.master_seed, Stream::Dynamics, replica_index(n, r));
                let env = Arc::new(environment_for(cfg.maps, cfg.environment, cfg.master_seed, n, r, sites)?);
                let mut state =
                    init_profile(env, cfg.maps, cfg.kernel.clone(), &DensityProfile::constant(cfg.rho), n, &mut rng)?;
                let mut samples = vec![Vec::with_capacity(grid.times().len()); cfg.epsilons.len()];
                let mut failure = None;
                simulate(&mut state, &grid, RunOptions::default(), &mut rng, |t, s| {
                    for (e, &eps) in cfg.epsilons.iter().enumerate() {
                        match superexp_field(s.eta(), n, eps, &cfg.h, &cfg.psi, t, &cache) {
                            Ok(v) => samples[e].push(v),
                            Err(err) => failure = Some(err),
                        }
                    }
                })?;
                if let Some(err) = failure {
                    return Err(err.into());
                }
                Ok(samples.iter().map(|w| trapezoid(grid.times(), w)).collect())
            })
            .collect::<Result<_, _>>()?;
        for (e, &eps) in cfg.epsilons.iter().enumerate() {
            let hits = integrals.iter().filter(|v| v[e].abs() > cfg.delta).count();
            let mean_abs = integrals.iter().map(|v| v[e].abs()).sum::<f64>() / cfg.replicas as f64;
            rows.push(ProbeRow {
                eps,
                radius: radii[e],
                scan: ScanRow::from_counts(n, hits, cfg.replicas),
                mean_abs_integral: mean_abs,
            });
        }
    }
    Ok(rows)
}

/// Bootstrap check that `−log p̂_N / N` does not decrease along the rows.
///
/// Each resample redraws the hit count of every row from its own
/// Bernoulli sample (i.e. `Binomial(R, p̂)`); censored resamples have rate
/// `+∞`. A step `N_k → N_{k+1}` is a significant decrease when the upper
/// `confidence` quantile of the resampled rate difference is negative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendTest {
    pub ns: Vec<usize>,
    /// Point rates; `None` where censored (read as `+∞`).
    pub rates: Vec<Option<f64>>,
    pub point_nondecreasing: bool,
    /// Upper quantile of `rate_{k+1} − rate_k` per step.
    pub step_upper: Vec<f64>,
    /// Fraction of resamples whose whole sequence is nondecreasing.
    pub monotone_fraction: f64,
    pub significant_decrease: bool,
    pub pass: bool,
}

fn rate_of(hits: usize, replicas: usize, n: usize) -> f64 {
    if hits == 0 {
        f64::INFINITY
    } else {
        -(hits as f64 / replicas as f64).ln() / n as f64
    }
}

fn step(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() {
        0.0
    } else {
        b - a
    }
}

pub fn monotone_trend_test(rows: &[ScanRow], boots: usize, confidence: f64, seed: u64) -> TrendTest {
    let k = rows.len();
    let point: Vec<f64> = rows.iter().map(|r| rate_of(r.hits, r.replicas, r.n)).collect();
    let point_nondecreasing = point.windows(2).all(|w| step(w[0], w[1]) >= 0.0);
    let mut diffs = vec![Vec::with_capacity(boots); k.saturating_sub(1)];
    let mut monotone = 0usize;
    let mut rng = derive_rng(seed, Stream::Bootstrap, 0);
    for _ in 0..boots {
        let rates: Vec<f64> = rows
            .iter()
            .map(|r| {
                let p = r.p_hat;
                let hits = (0..r.replicas).filter(|_| rng.random::<f64>() < p).count();
                rate_of(hits, r.replicas, r.n)
            })
            .collect();
        let mut ok = true;
        for (i, w) in rates.windows(2).enumerate() {
            let d = step(w[0], w[1]);
            ok &= d >= 0.0;
            diffs[i].push(d);
        }
        monotone += ok as usize;
    }
    let step_upper: Vec<f64> = diffs
        .iter_mut()
        .map(|d| {
            d.sort_by(|a, b| a.total_cmp(b));
            let idx = ((confidence * d.len() as f64).ceil() as usize).clamp(1, d.len()) - 1;
            d[idx]
        })
        .collect();
    let significant_decrease = step_upper.iter().any(|&u| u < 0.0);
    TrendTest {
        ns: rows.iter().map(|r| r.n).collect(),
        rates: rows.iter().map(|r| r.rate).collect(),
        point_nondecreasing,
        step_upper,
        monotone_fraction: if boots > 0 { monotone as f64 / boots as f64 } else { f64::NAN },
        significant_decrease,
        pass: !significant_decrease,
    }
}

/// Rows `n,replicas,hits,p_hat,ci_low,ci_high,rate,censored,rate_bound`.
pub fn write_scan_csv<W: Write>(out: W, rows: &[ScanRow]) -> Result<(), DeviationsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `eps,radius,n,replicas,hits,p_hat,ci_low,ci_high,rate,censored,rate_bound,mean_abs_integral`.
pub fn write_probe_csv<W: Write>(out: W, rows: &[ProbeRow]) -> Result<(), DeviationsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "eps",
        "radius",
        "n",
        "replicas",
        "hits",
        "p_hat",
        "ci_low",
        "ci_high",
        "rate",
        "censored",
        "rate_bound",
        "mean_abs_integral",
    ])?;
    for r in rows {
        let s = &r.scan;
        w.serialize((
            r.eps,
            r.radius,
            s.n,
            s.replicas,
            s.hits,
            s.p_hat,
            s.ci_low,
            s.ci_high,
            s.rate,
            s.censored,
            s.rate_bound,
            r.mean_abs_integral,
        ))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSummary {
    pub delta: f64,
    pub trends: Vec<(f64, TrendTest)>,
}

/// Trend verdict per `ε`, from rows grouped by `ε` in input order.
pub fn probe_summary(rows: &[ProbeRow], delta: f64, boots: usize, seed: u64) -> ProbeSummary {
    let mut eps: Vec<f64> = Vec::new();
    for r in rows {
        if !eps.contains(&r.eps) {
            eps.push(r.eps);
        }
    }
    let trends = eps
        .into_iter()
        .map(|e| {
            let scan: Vec<ScanRow> = rows.iter().filter(|r| r.eps == e).map(|r| r.scan.clone()).collect();
            (e, monotone_trend_test(&scan, boots, 0.95, seed))
        })
        .collect();
    ProbeSummary { delta, trends }
}

pub fn write_summary_json<W: Write, T: Serialize>(out: W, summary: &T) -> Result<(), DeviationsError> {
    serde_json::to_writer_pretty(out, summary)?;
    Ok(())
}
