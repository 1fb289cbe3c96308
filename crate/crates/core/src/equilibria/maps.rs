use std::sync::Arc;

use super::{EquilibriaError, RateFunction, SiteSeries, DEFAULT_ROOT_TOL, DEFAULT_TAIL_TOL};
use crate::media::EnvironmentLaw;
use crate::quadrature::DEFAULT_NODES;

const MONOTONE_PROBES: usize = 64;
const MAX_BISECTIONS: usize = 200;

/// Numerical tolerances for [`FugacityMaps`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapsOptions {
    pub tail_tol: f64,
    pub root_tol: f64,
    pub quad_nodes: usize,
    /// Working upper bound on the fugacity. `None` picks
    /// `0.5 · a0 · min_{K/4 ≤ k ≤ K} g(k)`, which keeps every site's term
    /// ratio `φ/(p_x g(k))` below one half in the tabulated tail.
    pub phi_max: Option<f64>,
}

impl Default for MapsOptions {
    fn default() -> Self {
        Self { tail_tol: DEFAULT_TAIL_TOL, root_tol: DEFAULT_ROOT_TOL, quad_nodes: DEFAULT_NODES, phi_max: None }
    }
}

/// `R(φ) = ∫ M(φ/p) m(dp)` with an `quad_nodes`-point rule on the marginal.
pub fn quenched_density(
    g: &RateFunction,
    law: &EnvironmentLaw,
    phi: f64,
    quad_nodes: usize,
) -> Result<f64, EquilibriaError> {
    quenched_with_rule(g, &law.marginal_rule(quad_nodes), phi, DEFAULT_TAIL_TOL)
}

fn quenched_with_rule(g: &RateFunction, rule: &[(f64, f64)], phi: f64, tail_tol: f64) -> Result<f64, EquilibriaError> {
    if phi == 0.0 {
        return Ok(0.0);
    }
    rule.iter().try_fold(0.0, |acc, &(p, w)| Ok(acc + w * SiteSeries::new(g, phi / p, tail_tol)?.mean()))
}

/// The maps `Z`, `M`, `R` and `Φ = R⁻¹` for one rate function and one
/// environment law, valid on `[0, phi_max]` (densities `[0, rho_max]`).
#[derive(Debug, Clone)]
pub struct FugacityMaps {
    g: Arc<RateFunction>,
    law: EnvironmentLaw,
    rule: Vec<(f64, f64)>,
    opts: MapsOptions,
    phi_max: f64,
    rho_max: f64,
}

impl FugacityMaps {
    pub fn new(g: Arc<RateFunction>, law: EnvironmentLaw, opts: MapsOptions) -> Result<Self, EquilibriaError> {
        let phi_max = match opts.phi_max {
            Some(v) if v.is_finite() && v > 0.0 => v,
            Some(v) => return Err(EquilibriaError::InvalidArgument(format!("phi_max {v}"))),
            None => {
                let k = g.depth();
                0.5 * law.a0() * g.values()[k / 4..=k].iter().copied().fold(f64::INFINITY, f64::min)
            }
        };
        let rule = law.marginal_rule(opts.quad_nodes);
        let mut maps = Self { g, law, rule, opts, phi_max, rho_max: 0.0 };
        maps.rho_max = maps.r(phi_max)?;

        let mut prev_m = 0.0;
        let mut prev_r = 0.0;
        for i in 1..=MONOTONE_PROBES {
            let phi = phi_max * i as f64 / MONOTONE_PROBES as f64;
            let m = maps.m(phi / maps.law.a0())?;
            let r = maps.r(phi)?;
            if !(m > prev_m && r > prev_r) {
                return Err(EquilibriaError::NotMonotone(format!("at fugacity {phi}")));
            }
            prev_m = m;
            prev_r = r;
        }
        Ok(maps)
    }

    /// Maps with default options.
    pub fn with_defaults(g: Arc<RateFunction>, law: EnvironmentLaw) -> Result<Self, EquilibriaError> {
        Self::new(g, law, MapsOptions::default())
    }

    pub fn rate(&self) -> &RateFunction {
        &self.g
    }

    pub fn rate_arc(&self) -> Arc<RateFunction> {
        Arc::clone(&self.g)
    }

    pub fn law(&self) -> &EnvironmentLaw {
        &self.law
    }

    pub fn options(&self) -> &MapsOptions {
        &self.opts
    }

    pub fn tail_tol(&self) -> f64 {
        self.opts.tail_tol
    }

    pub fn root_tol(&self) -> f64 {
        self.opts.root_tol
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    /// `R(phi_max)`, the largest density the maps can invert.
    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// The normalized `(p, weight)` rule for `m`-expectations.
    pub fn marginal_rule(&self) -> &[(f64, f64)] {
        &self.rule
    }

    pub fn series(&self, phi: f64) -> Result<SiteSeries, EquilibriaError> {
        SiteSeries::new(&self.g, phi, self.opts.tail_tol)
    }

    pub fn z(&self, phi: f64) -> Result<f64, EquilibriaError> {
        Ok(self.series(phi)?.partition())
    }

    pub fn log_z(&self, phi: f64) -> Result<f64, EquilibriaError> {
        Ok(self.series(phi)?.log_partition())
    }

    pub fn m(&self, phi: f64) -> Result<f64, EquilibriaError> {
        Ok(self.series(phi)?.mean())
    }

    pub fn r(&self, phi: f64) -> Result<f64, EquilibriaError> {
        quenched_with_rule(&self.g, &self.rule, phi, self.opts.tail_tol)
    }

    /// `m[f(p_0)]` with the maps' quadrature rule.
    pub fn expect_over_law<F>(&self, mut f: F) -> Result<f64, EquilibriaError>
    where
        F: FnMut(f64) -> Result<f64, EquilibriaError>,
    {
        self.rule.iter().try_fold(0.0, |acc, &(p, w)| Ok(acc + w * f(p)?))
    }

    /// `Φ(ρ)` by bisection on `[0, phi_max]`, stopping once
    /// `|R(φ) - ρ| ≤ root_tol`.
    pub fn phi(&self, rho: f64) -> Result<f64, EquilibriaError> {
        if !(rho >= 0.0) || rho > self.rho_max + self.opts.root_tol {
            return Err(EquilibriaError::OutOfRange { rho, max: self.rho_max });
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, self.phi_max);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..MAX_BISECTIONS {
            mid = 0.5 * (lo + hi);
            let r = self.r(mid)?;
            if (r - rho).abs() <= self.opts.root_tol || hi - lo <= f64::EPSILON * hi {
                break;
            }
            if r < rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn linear_uniform() -> FugacityMaps {
        FugacityMaps::with_defaults(
            Arc::new(RateFunction::linear(1024)),
            EnvironmentLaw::iid_uniform(1.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn quenched_density_examples() {
        let lin = RateFunction::linear(1024);
        let uni = EnvironmentLaw::iid_uniform(1.0, 2.0).unwrap();
        // R(φ) = φ ∫₁² dp/p.
        let r = quenched_density(&lin, &uni, 1.0, 64).unwrap();
        assert!((r - LN_2).abs() < 1e-12, "{r}");
        assert_eq!(quenched_density(&lin, &uni, 0.0, 64).unwrap(), 0.0);
        let sqrt = RateFunction::from_fn(1024, |k| (k as f64).sqrt()).unwrap();
        let point = EnvironmentLaw::homogeneous();
        let r = quenched_density(&sqrt, &point, 1.7, 64).unwrap();
        let m = super::super::mean_occupation(&sqrt, 1.7, DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn fugacity_of_density() {
        let maps = linear_uniform();
        assert_eq!(maps.phi(0.0).unwrap(), 0.0);
        assert!((maps.phi(1.0).unwrap() - 1.0 / LN_2).abs() < 1e-9);
        for i in 1..=50 {
            let rho = 0.1 * i as f64;
            let phi = maps.phi(rho).unwrap();
            assert!((maps.r(phi).unwrap() - rho).abs() <= maps.root_tol());
        }
    }

    #[test]
    fn inverse_consistency_both_ways() {
        let sqrt = Arc::new(RateFunction::from_fn(1024, |k| (k as f64).sqrt()).unwrap());
        let maps = FugacityMaps::with_defaults(sqrt, EnvironmentLaw::iid_uniform(0.5, 1.5).unwrap()).unwrap();
        for i in 1..=50 {
            let phi = maps.phi_max() * 0.9 * i as f64 / 50.0;
            let rho = maps.r(phi).unwrap();
            let back = maps.phi(rho).unwrap();
            // Φ∘R: error in φ is root_tol divided by R'.
            assert!((back - phi).abs() < 1e-7 * (1.0 + phi), "{phi} -> {back}");
        }
    }

    #[test]
    fn monotone_on_probe_grid() {
        let maps = linear_uniform();
        let grid: Vec<f64> = (0..=200).map(|i| maps.phi_max() * i as f64 / 200.0).collect();
        for w in grid.windows(2) {
            assert!(maps.m(w[1]).unwrap() > maps.m(w[0]).unwrap());
            assert!(maps.r(w[1]).unwrap() > maps.r(w[0]).unwrap());
        }
        assert_eq!(maps.z(0.0).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_density() {
        let cst = Arc::new(RateFunction::constant(1024));
        let maps = FugacityMaps::with_defaults(cst, EnvironmentLaw::iid_uniform(1.0, 2.0).unwrap()).unwrap();
        assert!((maps.phi_max() - 0.5).abs() < 1e-15);
        let err = maps.phi(maps.rho_max() + 1.0).unwrap_err();
        assert!(matches!(err, EquilibriaError::OutOfRange { .. }));
        assert!(maps.phi(-1.0).is_err());
    }

    #[test]
    fn explicit_phi_max_is_respected() {
        let maps = FugacityMaps::new(
            Arc::new(RateFunction::linear(1024)),
            EnvironmentLaw::homogeneous(),
            MapsOptions { phi_max: Some(10.0), ..Default::default() },
        )
        .unwrap();
        assert!((maps.rho_max() - 10.0).abs() < 1e-9);
        assert!((maps.phi(7.5).unwrap() - 7.5).abs() < 1e-9);
    }
}
