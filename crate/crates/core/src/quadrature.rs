//! Gauss–Legendre rules on finite intervals.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Number of nodes used for expectations over the environment marginal.
pub const DEFAULT_NODES: usize = 64;

/// Nodes and weights of an `n`-point Gauss–Legendre rule mapped to `[a, b]`.
///
/// Nodes are returned in increasing order.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("n >= 1");
    let rule = GaussLegendre::new(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut out: Vec<(f64, f64)> = rule.iter().map(|&(x, w)| (mid + half * x, half * w)).collect();
    out.sort_by(|l, r| l.0.total_cmp(&r.0));
    out
}

/// Composite rule: `panels` equal sub-intervals of `[a, b]`, `n` nodes each.
pub fn composite_gauss_legendre(n: usize, panels: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let base = gauss_legendre(n, -1.0, 1.0);
    let mut out = Vec::with_capacity(n * panels);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        for &(x, w) in &base {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Trapezoid rule for samples `values` at strictly increasing `times`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(times.len(), values.len());
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = gauss_legendre(8, 1.0, 2.0);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - (2f64.powi(8) - 1.0) / 8.0).abs() < 1e-12);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_integral_on_one_two() {
        let s: f64 = gauss_legendre(64, 1.0, 2.0).iter().map(|(p, w)| w / p).sum();
        assert!((s - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn composite_matches_single_panel_on_smooth_data() {
        let a = composite_gauss_legendre(16, 8, 0.0, 3.0);
        let s: f64 = a.iter().map(|(x, w)| w * x.sin()).sum();
        assert!((s - (1.0 - 3f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let t = [0.0, 0.3, 1.0];
        let v: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &v) - 2.0).abs() < 1e-15);
    }
}
