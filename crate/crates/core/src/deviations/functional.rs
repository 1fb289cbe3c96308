use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::{DeviationsError, TrajectoryMeasure};
use crate::fields::{SpatialShape, Term, TestFunction};
use crate::hydro::PhiSpline;
use crate::quadrature::trapezoid;
use crate::seeding::rng_from_seed;

/// `Φ(u)` on every profile of the trajectory.
fn phi_profiles(traj: &TrajectoryMeasure, phi: &PhiSpline) -> Vec<Vec<f64>> {
    traj.profiles.iter().map(|p| p.iter().map(|&u| phi.eval(u)).collect()).collect()
}

/// `Δx Σ_j f_j G(x_j)` with `f` given per cell.
fn pair(traj: &TrajectoryMeasure, f: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    f.iter().enumerate().map(|(j, v)| v * g(traj.position(j))).sum::<f64>() * traj.dx()
}

/// `J_H¹ = ⟨u_T, H_T⟩ − ⟨u_0, H_0⟩ − ∫ ⟨u_t, ∂_t H_t⟩ dt`.
fn j_linear_part(traj: &TrajectoryMeasure, h: &TestFunction) -> f64 {
    let k_last = traj.times.len() - 1;
    let (t0, t1) = (traj.times[0], traj.horizon());
    let dt_part: Vec<f64> = traj.times.iter().enumerate().map(|(k, &t)| traj.pairing(k, |x| h.dt(t, x))).collect();
    traj.pairing(k_last, |x| h.value(t1, x)) - traj.pairing(0, |x| h.value(t0, x)) - trapezoid(&traj.times, &dt_part)
}

fn check_horizon(traj: &TrajectoryMeasure, h: &TestFunction) -> Result<(), DeviationsError> {
    if traj.horizon() > h.horizon() * (1.0 + 1e-12) {
        return Err(DeviationsError::GridMismatch(format!(
            "trajectory ends at {} beyond the test function horizon {}",
            traj.horizon(),
            h.horizon()
        )));
    }
    Ok(())
}

/// `J_H(π) = J_H¹ − (σ/2) ∫ ⟨Φ(u_t), ∂²H_t + (∂H_t)²⟩ dt`, space by the
/// rectangle rule on the profile cells, time by the trapezoid rule.
pub fn j_functional(
    traj: &TrajectoryMeasure,
    h: &TestFunction,
    sigma: f64,
    phi: &PhiSpline,
) -> Result<f64, DeviationsError> {
    check_horizon(traj, h)?;
    if h.is_zero() {
        return Ok(0.0);
    }
    let phis = phi_profiles(traj, phi);
    let quad: Vec<f64> = traj
        .times
        .iter()
        .zip(&phis)
        .map(|(&t, f)| {
            pair(traj, f, |x| {
                let [_, _, hu, huu] = h.eval(t, x);
                huu + hu * hu
            })
        })
        .collect();
    Ok(j_linear_part(traj, h) - 0.5 * sigma * trapezoid(&traj.times, &quad))
}

/// Separable family `H = Σ_{i,k} c_{ik} S_i(u) (t/𝒯)^k`.
///
/// Coefficient `c_{ik}` lives at index `i (degree + 1) + k`; `c = 0` is the
/// zero function.
#[derive(Debug, Clone)]
pub struct TestFamily {
    pub shapes: Vec<SpatialShape>,
    pub time_degree: usize,
    pub horizon: f64,
}

impl TestFamily {
    /// `count` cubic B-splines with support inside `window`, equally spaced.
    pub fn bsplines(
        window: (f64, f64),
        count: usize,
        time_degree: usize,
        horizon: f64,
    ) -> Result<Self, DeviationsError> {
        if count == 0 || !(window.1 > window.0) {
            return Err(DeviationsError::InvalidArgument(format!("{count} splines on {window:?}")));
        }
        let spacing = (window.1 - window.0) / (count + 3) as f64;
        let shapes = (0..count)
            .map(|i| SpatialShape::CubicBSpline { center: window.0 + (2 + i) as f64 * spacing, spacing })
            .collect();
        Ok(Self { shapes, time_degree, horizon })
    }

    pub fn dimension(&self) -> usize {
        self.shapes.len() * (self.time_degree + 1)
    }

    fn basis(&self, idx: usize) -> TestFunction {
        let (i, k) = (idx / (self.time_degree + 1), idx % (self.time_degree + 1));
        let mut poly = vec![0.0; k + 1];
        poly[k] = 1.0;
        let term = Term { coefficient: 1.0, shape: self.shapes[i].clone(), time_poly: poly };
        TestFunction::new(vec![term], self.horizon).expect("valid basis element")
    }

    pub fn build(&self, coefficients: &[f64]) -> Result<TestFunction, DeviationsError> {
        if coefficients.len() != self.dimension() {
            return Err(DeviationsError::InvalidArgument(format!(
                "{} coefficients for a family of dimension {}",
                coefficients.len(),
                self.dimension()
            )));
        }
        let d = self.time_degree + 1;
        let terms: Vec<Term> = self
            .shapes
            .iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let poly = coefficients[i * d..(i + 1) * d].to_vec();
                poly.iter().any(|&c| c != 0.0).then(|| Term { coefficient: 1.0, shape: s.clone(), time_poly: poly })
            })
            .collect();
        if terms.is_empty() {
            return Ok(TestFunction::zero(self.horizon));
        }
        Ok(TestFunction::new(terms, self.horizon)?)
    }
}

/// `J(c) = c·b − ½ cᵀ A c` restricted to a family (exact for the
/// discretized functional, since `J_H` is quadratic in `H`).
#[derive(Debug, Clone)]
struct QuadraticForm {
    b: DVector<f64>,
    a: DMatrix<f64>,
}

impl QuadraticForm {
    fn new(traj: &TrajectoryMeasure, family: &TestFamily, sigma: f64, phi: &PhiSpline) -> Self {
        let dim = family.dimension();
        let cells = traj.cells();
        let phis = phi_profiles(traj, phi);
        let basis: Vec<TestFunction> = (0..dim).map(|i| family.basis(i)).collect();
        let mut b = DVector::zeros(dim);
        // A_ij(t) integrands, accumulated by the trapezoid weights directly
        let mut a = DMatrix::zeros(dim, dim);
        let nt = traj.times.len();
        let weights: Vec<f64> = (0..nt)
            .map(|k| {
                let left = if k > 0 { traj.times[k] - traj.times[k - 1] } else { 0.0 };
                let right = if k + 1 < nt { traj.times[k + 1] - traj.times[k] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        let dx = traj.dx();
        for (i, e) in basis.iter().enumerate() {
            b[i] = j_linear_part(traj, e);
        }
        let mut grad = vec![vec![0.0; cells]; dim];
        for (k, &t) in traj.times.iter().enumerate() {
            for (i, e) in basis.iter().enumerate() {
                let mut second = 0.0;
                for (j, g) in grad[i].iter_mut().enumerate() {
                    let [_, _, hu, huu] = e.eval(t, traj.position(j));
                    *g = hu;
                    second += phis[k][j] * huu;
                }
                b[i] -= 0.5 * sigma * weights[k] * second * dx;
            }
            for i in 0..dim {
                for m in i..dim {
                    let s: f64 = (0..cells).map(|j| phis[k][j] * grad[i][j] * grad[m][j]).sum();
                    let v = sigma * weights[k] * s * dx;
                    a[(i, m)] += v;
                    if m != i {
                        a[(m, i)] += v;
                    }
                }
            }
        }
        Self { b, a }
    }

    fn value(&self, c: &[f64]) -> f64 {
        let c = DVector::from_column_slice(c);
        self.b.dot(&c) - 0.5 * c.dot(&(&self.a * &c))
    }

    /// Stationary point of the concave quadratic (ridge-regularized).
    fn maximizer(&self) -> Vec<f64> {
        let dim = self.b.len();
        let ridge = 1e-12 * (self.a.trace() / dim as f64).max(1e-300);
        let m = &self.a + DMatrix::identity(dim, dim) * ridge;
        match m.cholesky() {
            Some(ch) => ch.solve(&self.b).iter().copied().collect(),
            None => vec![0.0; dim],
        }
    }
}

struct NegJ<'a>(&'a QuadraticForm);

impl CostFunction for NegJ<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, c: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok(-self.0.value(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    SingleH,
    Maximized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerBudget {
    pub max_iters: u64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self { max_iters: 2000, restarts: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartTrace {
    pub start_value: f64,
    pub best_value: f64,
    pub iterations: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateDiagnostics {
    /// Value at the exact maximizer of the quadratic form (before search).
    pub quadratic_value: f64,
    pub restarts: Vec<RestartTrace>,
    pub budget_exhausted: bool,
}

/// A lower bound on `I_0` realized by an explicit `H`.
#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    pub value: f64,
    pub method: EstimateMethod,
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub h_star: TestFunction,
    pub diagnostics: EstimateDiagnostics,
}

/// `J_H` for one fixed `H`, packaged as an estimate.
pub fn single_h(
    traj: &TrajectoryMeasure,
    h: &TestFunction,
    sigma: f64,
    phi: &PhiSpline,
) -> Result<RateEstimate, DeviationsError> {
    let value = j_functional(traj, h, sigma, phi)?;
    Ok(RateEstimate {
        value,
        method: EstimateMethod::SingleH,
        coefficients: Vec::new(),
        h_star: h.clone(),
        diagnostics: EstimateDiagnostics { quadratic_value: value, restarts: Vec::new(), budget_exhausted: false },
    })
}

/// `sup_H J_H` over the family, from below.
///
/// `J_H` restricted to the family is an explicit concave quadratic in the
/// coefficients; its stationary point (Cholesky) seeds a Nelder–Mead search
/// that is restarted `budget.restarts` times from perturbed simplices. The
/// reported value is `J_H` recomputed for the best `H` found (or 0 for
/// `H ≡ 0`), so it is always realized by a member of the family.
pub fn rate_lower_approx(
    traj: &TrajectoryMeasure,
    family: &TestFamily,
    sigma: f64,
    phi: &PhiSpline,
    budget: OptimizerBudget,
) -> Result<RateEstimate, DeviationsError> {
    if traj.horizon() > family.horizon * (1.0 + 1e-12) {
        return Err(DeviationsError::GridMismatch("family horizon shorter than the trajectory".into()));
    }
    let dim = family.dimension();
    let form = QuadraticForm::new(traj, family, sigma, phi);
    let start = form.maximizer();
    let quadratic_value = form.value(&start);
    let scale = start.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-3);
    let mut rng = rng_from_seed(budget.seed);

    let mut best = (0.0, vec![0.0; dim]);
    if quadratic_value > best.0 {
        best = (quadratic_value, start.clone());
    }
    let mut traces = Vec::with_capacity(budget.restarts);
    let mut exhausted = false;
    for r in 0..budget.restarts {
        let centre: Vec<f64> = if r == 0 {
            start.clone()
        } else {
            start.iter().map(|c| c + 0.1 * scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
        };
        let step = if r == 0 { 0.01 * scale } else { 0.05 * scale };
        let mut simplex = vec![centre.clone()];
        for i in 0..dim {
            let mut v = centre.clone();
            v[i] += step;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-14)?;
        let res = Executor::new(NegJ(&form), solver).configure(|s| s.max_iters(budget.max_iters)).run()?;
        let state = res.state();
        let found = -state.get_best_cost();
        let converged = !matches!(state.get_termination_reason(), Some(TerminationReason::MaxItersReached));
        exhausted |= !converged;
        traces.push(RestartTrace {
            start_value: form.value(&centre),
            best_value: found,
            iterations: state.get_iter(),
            converged,
        });
        if let Some(p) = state.get_best_param() {
            if found > best.0 {
                best = (found, p.clone());
            }
        }
    }
    let h_star = family.build(&best.1)?;
    let certified = j_functional(traj, &h_star, sigma, phi)?;
    let (value, coefficients, h_star) = if certified > 0.0 {
        (certified, best.1, h_star)
    } else {
        (0.0, vec![0.0; dim], TestFunction::zero(family.horizon))
    };
    Ok(RateEstimate {
        value,
        method: EstimateMethod::Maximized,
        coefficients,
        h_star,
        diagnostics: EstimateDiagnostics { quadratic_value, restarts: traces, budget_exhausted: exhausted },
    })
}
