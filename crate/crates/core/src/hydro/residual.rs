use super::{DensityField, HydroError, HydroProblem};
use crate::fields::TestFunction;
use crate::quadrature::trapezoid;

/// Periodic rectangle rule `Δx Σ_j f_j G(x_j)`.
fn pairing<F: Fn(f64) -> f64>(field: &DensityField, values: &[f64], g: F) -> f64 {
    let dx = field.dx();
    values.iter().enumerate().map(|(j, v)| v * g(j as f64 * dx)).sum::<f64>() * dx
}

/// Weak-form defect of the hydrodynamic equation along `path` against `G`:
///
/// `⟨u_T, G_T⟩ − ⟨u_0, G_0⟩ − ∫ ⟨u_t, ∂_t G⟩ + ⟨Φ(u_t), (σ/2) ∂²G + c ∂H ∂G⟩ dt`,
///
/// space by the rectangle rule on the cells, time by the trapezoid rule on
/// the path's times. Zero for exact solutions up to quadrature error.
pub fn residual(path: &[DensityField], problem: &HydroProblem, g: &TestFunction) -> Result<f64, HydroError> {
    if path.len() < 2 {
        return Err(HydroError::GridMismatch("need at least two times".into()));
    }
    let cells = path[0].len();
    if path.iter().any(|f| f.len() != cells || f.width != path[0].width)
        || path.windows(2).any(|w| w[1].time <= w[0].time)
    {
        return Err(HydroError::GridMismatch("inconsistent path".into()));
    }
    let c = problem.drift_coefficient();
    let half_sigma = 0.5 * problem.sigma;
    let mut integrand = Vec::with_capacity(path.len());
    for f in path {
        let t = f.time;
        let phi: Vec<f64> = f.values.iter().map(|&v| problem.phi.eval(v)).collect();
        let a = pairing(f, &f.values, |x| g.dt(t, x));
        let b = pairing(f, &phi, |x| {
            let [_, _, gu, guu] = g.eval(t, x);
            half_sigma * guu + c * problem.drive_du(t, x) * gu
        });
        integrand.push(a + b);
    }
    let times: Vec<f64> = path.iter().map(|f| f.time).collect();
    let (first, last) = (&path[0], &path[path.len() - 1]);
    let end = pairing(last, &last.values, |x| g.value(last.time, x));
    let start = pairing(first, &first.values, |x| g.value(first.time, x));
    Ok(end - start - trapezoid(&times, &integrand))
}
