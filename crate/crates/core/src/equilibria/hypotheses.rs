use serde::Serialize;

use super::{MomentEnvelope, RateFunction, TransitionKernel};

/// Outcome of one hypothesis with a human-readable justification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub pass: bool,
    pub evidence: String,
}

impl HypothesisCheck {
    fn new(pass: bool, evidence: String) -> Self {
        Self { pass, evidence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub h1: HypothesisCheck,
    pub h2: HypothesisCheck,
    pub h3: HypothesisCheck,
    pub h4: HypothesisCheck,
    pub g_star: f64,
    pub sigma: f64,
    /// In one dimension `κ = σ`.
    pub kappa: f64,
    /// Smallest increment `g(k+1) - g(k)` over the upper half of the table.
    pub g0_star: f64,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.failed().is_empty()
    }

    /// Names of the failed hypotheses, in order.
    pub fn failed(&self) -> Vec<&'static str> {
        [("H1", &self.h1), ("H2", &self.h2), ("H3", &self.h3), ("H4", &self.h4)]
            .into_iter()
            .filter(|(_, c)| !c.pass)
            .map(|(n, _)| n)
            .collect()
    }
}

/// Check H1–H4 for `(g, T, ω)`.
///
/// `working_phi` is the largest site fugacity the caller intends to use
/// (typically `phi_max / a0`); the exponential-moment series
/// `Σ e^{θω(k)} φ^k / g(k)!` is tested there by requiring the term ratio
/// `e^{θ(ω(k+1)-ω(k))} φ / g(k+1)` to stay below one over the upper half of
/// the tabulated depth. H2 can only be probed on the table: it passes when
/// the increments in the upper half do not exceed those in the lower half.
pub fn check_hypotheses(
    g: &RateFunction,
    kernel: &TransitionKernel,
    env: &MomentEnvelope,
    working_phi: f64,
) -> HypothesisReport {
    let mean = kernel.mean();
    let irreducible = kernel.is_irreducible();
    let h1 = HypothesisCheck::new(
        mean.abs() < 1e-12 && irreducible,
        format!("mean {mean}, range {}, irreducible {irreducible}", kernel.range()),
    );

    let vals = g.values();
    let depth = g.depth();
    let half = depth / 2;
    let increments: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    let max_abs = |s: &[f64]| s.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let (lower, upper) = (max_abs(&increments[..half]), max_abs(&increments[half..]));
    let g_star = g.g_star();
    let h2 = HypothesisCheck::new(
        g_star.is_finite() && upper <= lower * (1.0 + 1e-9) + 1e-12,
        format!("g* = {g_star} (lower half {lower}, upper half {upper})"),
    );

    let sigma = kernel.sigma();
    let h3 = HypothesisCheck::new(sigma > 0.0, format!("sigma = kappa = {sigma}"));

    let g0_star = increments[half..].iter().copied().fold(f64::INFINITY, f64::min);
    let theta = env.theta();
    let worst = (half..depth)
        .map(|k| {
            let dw = env.omega((k + 1) as f64) - env.omega(k as f64);
            (theta * dw).exp() * working_phi / vals[k + 1]
        })
        .fold(0.0f64, f64::max);
    let h4 = HypothesisCheck::new(
        worst < 1.0 && working_phi.is_finite(),
        format!("theta = {theta}, working fugacity {working_phi}, max tail term ratio {worst:.4}, g0* = {g0_star}"),
    );

    HypothesisReport { h1, h2, h3, h4, g_star, sigma, kappa: sigma, g0_star }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::OmegaShape;

    fn env() -> MomentEnvelope {
        MomentEnvelope::default_envelope()
    }

    #[test]
    fn nearest_neighbor_linear_passes() {
        let r = check_hypotheses(&RateFunction::linear(1024), &TransitionKernel::nearest_neighbor(), &env(), 128.0);
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.sigma, 1.0);
        assert_eq!(r.g_star, 1.0);
        assert_eq!(r.g0_star, 1.0);
    }

    #[test]
    fn totally_asymmetric_fails_h1() {
        let t = TransitionKernel::new([(1, 1.0)]).unwrap();
        let r = check_hypotheses(&RateFunction::linear(1024), &t, &env(), 1.0);
        assert!(!r.h1.pass);
        assert_eq!(r.failed(), vec!["H1"]);
    }

    #[test]
    fn asymmetric_zero_mean_kernel() {
        let t = TransitionKernel::new([(2, 1.0 / 3.0), (-1, 2.0 / 3.0)]).unwrap();
        let r = check_hypotheses(&RateFunction::linear(1024), &t, &env(), 1.0);
        assert!(r.h1.pass, "{:?}", r.h1);
        assert!((r.sigma - 2.0).abs() < 1e-15);
    }

    #[test]
    fn even_support_is_reducible() {
        let t = TransitionKernel::new([(2, 0.5), (-2, 0.5)]).unwrap();
        let r = check_hypotheses(&RateFunction::linear(64), &t, &env(), 1.0);
        assert!(!r.h1.pass);
    }

    #[test]
    fn constant_rate_fails_h4() {
        let r = check_hypotheses(&RateFunction::constant(1024), &TransitionKernel::nearest_neighbor(), &env(), 0.5);
        assert!(r.h2.pass);
        assert!(!r.h4.pass);
        assert_eq!(r.g0_star, 0.0);
    }

    #[test]
    fn sqrt_rate_passes_with_log_envelope() {
        let g = RateFunction::from_fn(1024, |k| (k as f64).sqrt()).unwrap();
        let r = check_hypotheses(&g, &TransitionKernel::nearest_neighbor(), &env(), 8.0);
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn quadratic_rate_fails_h2() {
        let g = RateFunction::from_fn(256, |k| (k * k) as f64).unwrap();
        let r = check_hypotheses(&g, &TransitionKernel::nearest_neighbor(), &env(), 1.0);
        assert!(!r.h2.pass);
    }

    #[test]
    fn steep_envelope_fails_h4() {
        let steep = MomentEnvelope::new(OmegaShape::Power(2.0), 1.0).unwrap();
        let r = check_hypotheses(&RateFunction::linear(1024), &TransitionKernel::nearest_neighbor(), &steep, 1.0);
        assert!(!r.h4.pass);
    }
}
