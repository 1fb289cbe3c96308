use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use zrp_core::deviations::{
    ld_probability_scan, probe_summary, rate_lower_approx, single_h, superexp_probe, write_probe_csv, write_scan_csv,
    EnvironmentMode, OptimizerBudget, ProbeConfig, RateEstimate, ScanModel, TestFamily, TrajectoryMeasure,
};
use zrp_core::equilibria::{check_hypotheses, HypothesisReport};
use zrp_core::fields::empirical_pairing;
use zrp_core::hydro::{solve, write_fields_csv, DensityField, HydroProblem};
use zrp_core::kinetics::{
    init_profile, run, run_tilted, run_weighted, site_fugacities, write_profiles_csv, PathRecord, RunMetadata,
    SnapshotGrid,
};
use zrp_core::media::Environment;
use zrp_core::quadrature::trapezoid;
use zrp_core::seeding::{derive_rng, derive_seed, Stream};
use zrp_core::stats::{chi_square_gof, mean_and_se, ChiSquareResult};

use crate::config::{ConfigError, ExperimentConfig, Kind, Model};
use crate::manifest::OutputDir;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("hypothesis violation: {} failed", .0.join(", "))]
    Hypothesis(Vec<&'static str>),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Hypothesis(_) => 3,
            Self::Runtime(_) => 4,
        }
    }
}

fn rt<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Runtime(e.to_string())
}

pub struct RunContext<'a> {
    pub kind: Kind,
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub allow_violations: bool,
}

/// Replica `r` at scale `n`; the same counter layout as the core scans.
fn replica_index(n: usize, r: usize) -> u64 {
    ((n as u64) << 32) | r as u64
}

fn sites(cfg: &ExperimentConfig, n: usize) -> usize {
    (cfg.numerics.width * n as f64).round() as usize
}

fn environment(
    model: &Model,
    mode: EnvironmentMode,
    seed: u64,
    n: usize,
    r: usize,
    len: usize,
) -> Result<Environment, RunError> {
    let index = match mode {
        EnvironmentMode::Fixed => n as u64,
        EnvironmentMode::Annealed => replica_index(n, r),
    };
    Environment::generate(model.maps.law(), len, derive_seed(seed, Stream::Environment, index)).map_err(rt)
}

#[derive(Serialize)]
struct HypothesisOutput<'a> {
    all_pass: bool,
    failed: Vec<&'static str>,
    working_fugacity: f64,
    report: &'a HypothesisReport,
}

pub fn run_experiment(ctx: &RunContext<'_>, out: &mut OutputDir) -> Result<(), RunError> {
    let cfg = ctx.config;
    cfg.check_kind(ctx.kind)?;
    cfg.validate_numerics()?;
    let model = cfg.build_model()?;

    let working_phi = model.maps.phi_max() / model.maps.law().a0();
    let report = check_hypotheses(model.maps.rate(), &model.kernel, &model.envelope, working_phi);
    if ctx.kind == Kind::Check {
        let body = HypothesisOutput {
            all_pass: report.all_pass(),
            failed: report.failed(),
            working_fugacity: working_phi,
            report: &report,
        };
        out.write_json("hypotheses.json", &body).map_err(rt)?;
    }
    if !report.all_pass() && !ctx.allow_violations {
        return Err(RunError::Hypothesis(report.failed()));
    }

    match ctx.kind {
        Kind::Check => Ok(()),
        Kind::Equilibrium => equilibrium(ctx, &model, out),
        Kind::HydroCompare => hydro_compare(ctx, &model, out),
        Kind::Girsanov => girsanov(ctx, &model, out),
        Kind::Superexp => superexp(ctx, &model, out),
        Kind::Ldscan => ldscan(ctx, &model, out),
        Kind::RateEstimate => rate_estimate(ctx, &model, out),
    }
}

fn snapshot_grid(cfg: &ExperimentConfig) -> Result<SnapshotGrid, RunError> {
    let n = &cfg.numerics;
    SnapshotGrid::uniform(n.snapshots.max(1), n.horizon, n.bins).map_err(rt)
}

/// Replicas from the initial profile under the plain dynamics, in replica
/// order, with their final configurations.
fn simulate_replicas(ctx: &RunContext<'_>, model: &Model, n: usize) -> Result<Vec<(PathRecord, Vec<u32>)>, RunError> {
    let cfg = ctx.config;
    let grid = snapshot_grid(cfg)?;
    let len = sites(cfg, n);
    let mode = cfg.replication.environment;
    let fixed = match mode {
        EnvironmentMode::Fixed => Some(Arc::new(environment(model, mode, ctx.seed, n, 0, len)?)),
        EnvironmentMode::Annealed => None,
    };
    (0..cfg.replication.replicas)
        .into_par_iter()
        .map(|r| {
            let env = match &fixed {
                Some(e) => e.clone(),
                None => Arc::new(environment(model, mode, ctx.seed, n, r, len)?),
            };
            let mut rng = derive_rng(ctx.seed, Stream::Dynamics, replica_index(n, r));
            let mut state =
                init_profile(env, &model.maps, model.kernel.clone(), &model.initial, n, &mut rng).map_err(rt)?;
            let rec = run(&mut state, &grid, &mut rng).map_err(rt)?;
            Ok((rec, state.eta().to_vec()))
        })
        .collect()
}

fn profiles_csv(runs: &[(PathRecord, Vec<u32>)]) -> Result<Vec<u8>, RunError> {
    csv_bytes(|b| write_profiles_csv(b, runs.iter().map(|r| &r.0).enumerate()).map_err(rt))
}

fn csv_bytes<F>(write: F) -> Result<Vec<u8>, RunError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), RunError>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(rt)?;
    }
    w.into_inner().map_err(rt)
}

fn metadata(ctx: &RunContext<'_>, model: &Model, n: usize) -> RunMetadata {
    let cfg = ctx.config;
    RunMetadata {
        seed: ctx.seed,
        scale: n,
        sites: sites(cfg, n),
        rho: model.rho,
        initial_profile: format!("{:?}", model.initial),
        law: model.maps.law().descriptor(),
        rate: model.maps.rate().tag(),
        horizon: cfg.numerics.horizon,
        replicas: cfg.replication.replicas,
        bins: cfg.numerics.bins,
    }
}

#[derive(Serialize)]
struct EquilibriumRow {
    n: usize,
    sites: usize,
    replicas: usize,
    chi_square: f64,
    dof: usize,
    p_value: f64,
}

fn equilibrium(ctx: &RunContext<'_>, model: &Model, out: &mut OutputDir) -> Result<(), RunError> {
    let cfg = ctx.config;
    if cfg.replication.environment != EnvironmentMode::Fixed {
        return Err(ConfigError {
            key: "replication.environment".into(),
            message: "the per-site goodness-of-fit test needs a fixed medium".into(),
        }
        .into());
    }
    let mut summary = Vec::new();
    for &n in &cfg.numerics.ns {
        let len = sites(cfg, n);
        let runs = simulate_replicas(ctx, model, n)?;
        out.write(&format!("profiles_N{n}.csv"), &profiles_csv(&runs)?).map_err(rt)?;
        out.write_json(&format!("metadata_N{n}.json"), &metadata(ctx, model, n)).map_err(rt)?;

        // Final occupations against the initial product law, site by site.
        let env = environment(model, EnvironmentMode::Fixed, ctx.seed, n, 0, len)?;
        let fug = site_fugacities(&env, &model.maps, &model.initial, n).map_err(rt)?;
        let parts = (0..len)
            .map(|x| {
                let pmf = model.maps.series(fug[x]).map_err(rt)?.pmf();
                let mut counts = vec![0u64; pmf.len()];
                for (_, f) in &runs {
                    counts[(f[x] as usize).min(pmf.len() - 1)] += 1;
                }
                Ok(chi_square_gof(&counts, &pmf, 5.0))
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        let pooled = ChiSquareResult::pooled(&parts);
        summary.push(EquilibriumRow {
            n,
            sites: len,
            replicas: cfg.replication.replicas,
            chi_square: pooled.statistic,
            dof: pooled.dof,
            p_value: pooled.p_value,
        });
    }
    out.write("equilibrium_summary.csv", &rows_csv(&summary)?).map_err(rt)
}

fn hydro_problem(cfg: &ExperimentConfig, model: &Model) -> Result<HydroProblem, RunError> {
    Ok(HydroProblem::new(&model.maps, &model.kernel, model.initial.clone(), cfg.numerics.horizon, cfg.numerics.width)
        .map_err(rt)?
        .with_convention(cfg.numerics.drift_convention))
}

#[derive(Serialize)]
struct HydroRow {
    n: usize,
    replicas: usize,
    bins: usize,
    time: f64,
    l1_error: f64,
}

fn hydro_compare(ctx: &RunContext<'_>, model: &Model, out: &mut OutputDir) -> Result<(), RunError> {
    let cfg = ctx.config;
    if cfg.numerics.bins == 0 {
        return Err(ConfigError { key: "numerics.bins".into(), message: "must be positive".into() }.into());
    }
    let grid = snapshot_grid(cfg)?;
    let fields = solve(&hydro_problem(cfg, model)?, cfg.numerics.cells, cfg.numerics.cfl, grid.times()).map_err(rt)?;
    out.write("hydro.csv", &csv_bytes(|b| write_fields_csv(b, &fields).map_err(rt))?).map_err(rt)?;
    let last = fields.last().expect("grid has a final time");
    let mut summary = Vec::new();
    for &n in &cfg.numerics.ns {
        let runs = simulate_replicas(ctx, model, n)?;
        out.write(&format!("profiles_N{n}.csv"), &profiles_csv(&runs)?).map_err(rt)?;
        let bins = cfg.numerics.bins;
        let mean: Vec<f64> = (0..bins)
            .map(|j| runs.iter().map(|r| r.0.density_profiles.last().unwrap()[j]).sum::<f64>() / runs.len() as f64)
            .collect();
        summary.push(HydroRow {
            n,
            replicas: runs.len(),
            bins,
            time: last.time,
            l1_error: last.l1_distance_to_bins(&mean).map_err(rt)?,
        });
    }
    out.write("hydro_compare_summary.csv", &rows_csv(&summary)?).map_err(rt)
}

#[derive(Serialize)]
struct GirsanovReplica {
    n: usize,
    replica: usize,
    log_weight: f64,
    observable: f64,
    tilted_observable: f64,
}

#[derive(Serialize)]
struct GirsanovRow {
    n: usize,
    replicas: usize,
    mean_weight: f64,
    se_weight: f64,
    weighted_mean: f64,
    weighted_se: f64,
    tilted_mean: f64,
    tilted_se: f64,
}

/// Base runs carry `e^w`; tilted runs use a disjoint stream. The observable
/// is `⟨π_T, H(T)⟩`.
fn girsanov(ctx: &RunContext<'_>, model: &Model, out: &mut OutputDir) -> Result<(), RunError> {
    let cfg = ctx.config;
    let h = cfg.test_function()?;
    let grid = SnapshotGrid::final_only(cfg.numerics.horizon, 0).map_err(rt)?;
    let horizon = cfg.numerics.horizon;
    let mut replicas = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.numerics.ns {
        let len = sites(cfg, n);
        let mode = cfg.replication.environment;
        let one = |r: usize| -> Result<GirsanovReplica, RunError> {
            let env = Arc::new(environment(model, mode, ctx.seed, n, r, len)?);
            let mut rng = derive_rng(ctx.seed, Stream::Dynamics, replica_index(n, r));
            let mut base = init_profile(env.clone(), &model.maps, model.kernel.clone(), &model.initial, n, &mut rng)
                .map_err(rt)?;
            let rec = run_weighted(&mut base, &h, &grid, &mut rng).map_err(rt)?;
            let mut rng = derive_rng(ctx.seed, Stream::Dynamics, replica_index(n, r) | 1 << 31);
            let mut tilted =
                init_profile(env, &model.maps, model.kernel.clone(), &model.initial, n, &mut rng).map_err(rt)?;
            run_tilted(&mut tilted, &h, &grid, &mut rng).map_err(rt)?;
            Ok(GirsanovReplica {
                n,
                replica: r,
                log_weight: rec.girsanov_log_weight.unwrap_or(0.0),
                observable: empirical_pairing(base.eta(), n, &h, horizon),
                tilted_observable: empirical_pairing(tilted.eta(), n, &h, horizon),
            })
        };
        let rows = (0..cfg.replication.replicas).into_par_iter().map(one).collect::<Result<Vec<_>, _>>()?;
        let w: Vec<f64> = rows.iter().map(|r| r.log_weight.exp()).collect();
        let wf: Vec<f64> = rows.iter().map(|r| r.log_weight.exp() * r.observable).collect();
        let tf: Vec<f64> = rows.iter().map(|r| r.tilted_observable).collect();
        let ((mw, sw), (mf, sf), (mt, st)) = (mean_and_se(&w), mean_and_se(&wf), mean_and_se(&tf));
        summary.push(GirsanovRow {
            n,
            replicas: rows.len(),
            mean_weight: mw,
            se_weight: sw,
            weighted_mean: mf,
            weighted_se: sf,
            tilted_mean: mt,
            tilted_se: st,
        });
        replicas.extend(rows);
    }
    out.write("girsanov.csv", &rows_csv(&replicas)?).map_err(rt)?;
    out.write("girsanov_summary.csv", &rows_csv(&summary)?).map_err(rt)
}

fn superexp(ctx: &RunContext<'_>, model: &Model, out: &mut OutputDir) -> Result<(), RunError> {
    let cfg = ctx.config;
    let sx =
        cfg.superexp.clone().ok_or_else(|| ConfigError { key: "superexp".into(), message: "missing block".into() })?;
    let probe = ProbeConfig {
        maps: &model.maps,
        kernel: model.kernel.clone(),
        h: cfg.test_function()?,
        psi: cfg.observable(sx.psi, &model.maps),
        delta: sx.delta,
        epsilons: sx.epsilons.clone(),
        ns: cfg.numerics.ns.clone(),
        replicas: cfg.replication.replicas,
        rho: model.rho,
        width: cfg.numerics.width,
        horizon: cfg.numerics.horizon,
        snapshots: cfg.numerics.snapshots,
        environment: cfg.replication.environment,
        master_seed: ctx.seed,
    };
    let rows = superexp_probe(&probe).map_err(|e| match e {
        zrp_core::deviations::DeviationsError::InvalidArgument(m) => {
            RunError::Config(ConfigError { key: "superexp".into(), message: m })
        }
        other => rt(other),
    })?;
    out.write("probe.csv", &csv_bytes(|b| write_probe_csv(b, &rows).map_err(rt))?).map_err(rt)?;
    let summary = probe_summary(&rows, sx.delta, sx.bootstrap, derive_seed(ctx.seed, Stream::Bootstrap, 0));
    out.write_json("probe_summary.json", &summary).map_err(rt)
}

fn ldscan(ctx: &RunContext<'_>, model: &Model, out: &mut OutputDir) -> Result<(), RunError> {
    let cfg = ctx.config;
    let ev = cfg.ldscan.clone().ok_or_else(|| ConfigError { key: "ldscan".into(), message: "missing block".into() })?;
    if !(ev.window.0 < ev.window.1) {
        return Err(ConfigError { key: "ldscan.window".into(), message: "need a < b".into() }.into());
    }
    let tilt = if ev.tilted { Some(cfg.test_function()?) } else { None };
    let sampler = ScanModel {
        maps: &model.maps,
        kernel: model.kernel.clone(),
        width: cfg.numerics.width,
        initial: model.initial.clone(),
        horizon: cfg.numerics.horizon,
        snapshots: cfg.numerics.snapshots.max(1),
        bins: cfg.numerics.bins,
        environment: cfg.replication.environment,
        tilt,
        master_seed: ctx.seed,
    };
    let (a, b) = ev.window;
    let event = |t: &TrajectoryMeasure| {
        let mass = t.pairing(t.times.len() - 1, |u| if (a..b).contains(&u) { 1.0 } else { 0.0 });
        if ev.below {
            mass <= ev.threshold
        } else {
            mass >= ev.threshold
        }
    };
    let rows = ld_probability_scan(
        &cfg.numerics.ns,
        cfg.replication.replicas,
        ctx.seed,
        |n, r, rng| sampler.sample(n, r, rng),
        event,
    )
    .map_err(|e| match e {
        zrp_core::deviations::DeviationsError::InvalidArgument(m) => {
            RunError::Config(ConfigError { key: "replication.replicas".into(), message: m })
        }
        other => rt(other),
    })?;
    out.write("scan.csv", &csv_bytes(|b| write_scan_csv(b, &rows).map_err(rt))?).map_err(rt)
}

#[derive(Serialize)]
struct RateOutput<'a> {
    driven: bool,
    sigma: f64,
    family_dimension: usize,
    estimate: &'a RateEstimate,
    single_h: f64,
    /// `(1/(2σ)) ∫⟨Φ(u), (∂ₓH)²⟩ dt` along the trajectory.
    quadratic_reference: f64,
}

fn rate_estimate(ctx: &RunContext<'_>, model: &Model, out: &mut OutputDir) -> Result<(), RunError> {
    let cfg = ctx.config;
    let re = cfg
        .rate_estimate
        .clone()
        .ok_or_else(|| ConfigError { key: "rate_estimate".into(), message: "missing block".into() })?;
    let h = cfg.test_function()?;
    let horizon = cfg.numerics.horizon;
    let mut problem = hydro_problem(cfg, model)?;
    if re.driven {
        problem = problem.with_drive(h.clone());
    }
    let times: Vec<f64> = (0..=re.outputs.max(1)).map(|k| horizon * k as f64 / re.outputs.max(1) as f64).collect();
    let fields: Vec<DensityField> = solve(&problem, cfg.numerics.cells, cfg.numerics.cfl, &times).map_err(rt)?;
    out.write("trajectory.csv", &csv_bytes(|b| write_fields_csv(b, &fields).map_err(rt))?).map_err(rt)?;
    let traj = TrajectoryMeasure::from_fields(&fields).map_err(rt)?;
    let family = TestFamily::bsplines(re.window, re.splines, re.time_degree, horizon)
        .map_err(|e| ConfigError { key: "rate_estimate".into(), message: e.to_string() })?;
    let budget = OptimizerBudget {
        max_iters: re.max_iters,
        restarts: re.restarts,
        seed: derive_seed(ctx.seed, Stream::Quadrature, 0),
    };
    let estimate = rate_lower_approx(&traj, &family, problem.sigma, &problem.phi, budget).map_err(rt)?;
    let single = single_h(&traj, &h, problem.sigma, &problem.phi).map_err(rt)?;
    let quad: Vec<f64> = traj
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            traj.profiles[k]
                .iter()
                .enumerate()
                .map(|(j, &u)| problem.phi.eval(u) * h.du(t, traj.position(j)).powi(2))
                .sum::<f64>()
                * traj.dx()
        })
        .collect();
    let body = RateOutput {
        driven: re.driven,
        sigma: problem.sigma,
        family_dimension: family.dimension(),
        estimate: &estimate,
        single_h: single.value,
        quadratic_reference: trapezoid(&traj.times, &quad) / (2.0 * problem.sigma),
    };
    out.write_json("rate_estimate.json", &body).map_err(rt)
}
