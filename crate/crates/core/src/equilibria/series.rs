use rand::Rng;

use super::{EquilibriaError, RateFunction};

const RESCALE_ABOVE: f64 = 1e250;

/// Truncated single-site series `t_k = φ^k / g(k)!`.
///
/// Terms are stored scaled by `exp(-log_scale)` so that large fugacities do
/// not overflow. Truncation happens after term `k` once the next term ratio
/// `r = φ/g(k+1)` is below 1 and the geometric bounds on both the tail
/// mass, `t_{k+1}/(1 - r)`, and the tail first moment fall below `tail_tol`
/// times the partial sums, so `Z` and `M` share the relative accuracy. The
/// bounds are rigorous when `g` is nondecreasing past the truncation point.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSeries {
    log_scale: f64,
    terms: Vec<f64>,
    sum: f64,
}

impl SiteSeries {
    pub fn new(g: &RateFunction, phi: f64, tail_tol: f64) -> Result<Self, EquilibriaError> {
        if !(phi.is_finite() && phi >= 0.0) {
            return Err(EquilibriaError::InvalidArgument(format!("fugacity {phi}")));
        }
        if phi == 0.0 {
            return Ok(Self { log_scale: 0.0, terms: vec![1.0], sum: 1.0 });
        }
        let depth = g.depth();
        let values = g.values();
        let mut terms = Vec::with_capacity(64);
        terms.push(1.0);
        let mut sum = 1.0;
        let mut moment = 0.0f64;
        let mut term = 1.0;
        let mut log_scale = 0.0;
        for k in 0..depth {
            let ratio = phi / values[k + 1];
            if ratio < 1.0 {
                let next = term * ratio;
                let q = 1.0 - ratio;
                let mass_tail = next / q;
                let moment_tail = next * ((k + 1) as f64 / q + ratio / (q * q));
                if mass_tail < tail_tol * sum && moment_tail < tail_tol * moment.max(sum) {
                    return Ok(Self { log_scale, terms, sum });
                }
            }
            term *= ratio;
            terms.push(term);
            sum += term;
            moment += (k + 1) as f64 * term;
            if term > RESCALE_ABOVE {
                let s = term;
                for t in &mut terms {
                    *t /= s;
                }
                sum /= s;
                moment /= s;
                term = 1.0;
                log_scale += s.ln();
            }
        }
        Err(EquilibriaError::NonConvergent { phi, depth })
    }

    /// `Z(φ)`; may overflow to infinity for very large fugacities, see
    /// [`Self::log_partition`].
    pub fn partition(&self) -> f64 {
        self.log_scale.exp() * self.sum
    }

    pub fn log_partition(&self) -> f64 {
        self.log_scale + self.sum.ln()
    }

    /// `M(φ) = Σ k t_k / Σ t_k`.
    pub fn mean(&self) -> f64 {
        self.terms.iter().enumerate().map(|(k, t)| k as f64 * t).sum::<f64>() / self.sum
    }

    /// `E[f(η(0))]` under the truncated marginal.
    pub fn expectation<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.terms.iter().enumerate().map(|(k, t)| f(k) * t).sum::<f64>() / self.sum
    }

    /// Truncated pmf (sums to 1).
    pub fn pmf(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t / self.sum).collect()
    }

    /// Number of retained terms (truncation index + 1).
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Inverse-CDF draw; the folded-away tail lands in the last bucket.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let target = rng.random::<f64>() * self.sum;
        let mut acc = 0.0;
        for (k, t) in self.terms.iter().enumerate() {
            acc += t;
            if target < acc {
                return k;
            }
        }
        self.terms.len() - 1
    }
}

/// `Z(φ) = Σ_k φ^k / g(k)!`.
pub fn partition_function(g: &RateFunction, phi: f64, tail_tol: f64) -> Result<f64, EquilibriaError> {
    Ok(SiteSeries::new(g, phi, tail_tol)?.partition())
}

/// `M(φ)`, the mean occupation under the homogeneous marginal.
pub fn mean_occupation(g: &RateFunction, phi: f64, tail_tol: f64) -> Result<f64, EquilibriaError> {
    Ok(SiteSeries::new(g, phi, tail_tol)?.mean())
}

/// Draw `η(x)` from the marginal with site fugacity `phi_x`.
pub fn sample_site<R: Rng + ?Sized>(
    g: &RateFunction,
    phi_x: f64,
    tail_tol: f64,
    rng: &mut R,
) -> Result<usize, EquilibriaError> {
    Ok(SiteSeries::new(g, phi_x, tail_tol)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::DEFAULT_TAIL_TOL as TOL;
    use crate::seeding::rng_from_seed;
    use crate::stats::chi_square_gof;

    // Independent oracles: plain summation without truncation logic.
    fn direct_sum(g: &RateFunction, phi: f64, terms: usize) -> (f64, f64) {
        let (mut z, mut m, mut t) = (1.0, 0.0, 1.0);
        for k in 1..terms {
            t *= phi / g.get(k).unwrap();
            z += t;
            m += k as f64 * t;
        }
        (z, m / z)
    }

    #[test]
    fn partition_examples() {
        let lin = RateFunction::linear(1024);
        let cst = RateFunction::constant(1024);
        assert_eq!(partition_function(&lin, 0.0, TOL).unwrap(), 1.0);
        let (z_oracle, _) = direct_sum(&lin, 1.0, 60);
        assert!((z_oracle - std::f64::consts::E).abs() < 1e-15);
        assert!((partition_function(&lin, 1.0, TOL).unwrap() - z_oracle).abs() < 1e-12);
        // Geometric oracle 1/(1 - φ).
        assert!((partition_function(&cst, 0.5, TOL).unwrap() - 2.0).abs() < 1e-11);
    }

    #[test]
    fn mean_examples() {
        let lin = RateFunction::linear(1024);
        let cst = RateFunction::constant(1024);
        let m = mean_occupation(&lin, 1.5, TOL).unwrap();
        assert!((m - 1.5).abs() < 1e-11, "{m}");
        assert_eq!(mean_occupation(&lin, 0.0, TOL).unwrap(), 0.0);
        assert_eq!(mean_occupation(&cst, 0.0, TOL).unwrap(), 0.0);
        assert!((mean_occupation(&cst, 0.5, TOL).unwrap() - 1.0).abs() < 1e-10);
        let sqrt = RateFunction::from_fn(1024, |k| (k as f64).sqrt()).unwrap();
        let (_, m) = direct_sum(&sqrt, 2.0, 200);
        assert!((mean_occupation(&sqrt, 2.0, TOL).unwrap() - m).abs() < 1e-10);
    }

    #[test]
    fn large_fugacity_does_not_overflow() {
        let lin = RateFunction::linear(4096);
        let s = SiteSeries::new(&lin, 800.0, TOL).unwrap();
        assert!((s.log_partition() - 800.0).abs() < 1e-9);
        assert!((s.mean() - 800.0).abs() < 1e-8);
    }

    #[test]
    fn nonconvergent_beyond_radius() {
        let cst = RateFunction::constant(1024);
        assert!(matches!(partition_function(&cst, 1.2, TOL), Err(EquilibriaError::NonConvergent { .. })));
        let lin = RateFunction::linear(16);
        assert!(partition_function(&lin, 30.0, TOL).is_err());
    }

    #[test]
    fn sampling_zero_fugacity() {
        let mut rng = rng_from_seed(1);
        let lin = RateFunction::linear(64);
        assert!((0..100).all(|_| sample_site(&lin, 0.0, TOL, &mut rng).unwrap() == 0));
    }

    #[test]
    fn poisson_sample_mean() {
        let mut rng = rng_from_seed(2);
        let lin = RateFunction::linear(1024);
        let s = SiteSeries::new(&lin, 2.0, TOL).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| s.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0f64 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn geometric_sample_zero_mass() {
        let mut rng = rng_from_seed(3);
        let cst = RateFunction::constant(1024);
        let s = SiteSeries::new(&cst, 0.5, TOL).unwrap();
        let n = 100_000;
        let zeros = (0..n).filter(|_| s.sample(&mut rng) == 0).count() as f64 / n as f64;
        assert!((zeros - 0.5).abs() < 3.0 * (0.25f64 / n as f64).sqrt());
    }

    #[test]
    fn sampling_law_chi_square() {
        let mut rng = rng_from_seed(4);
        let sqrt = RateFunction::from_fn(1024, |k| (k as f64).sqrt()).unwrap();
        let s = SiteSeries::new(&sqrt, 1.7, TOL).unwrap();
        let mut counts = vec![0u64; s.len()];
        for _ in 0..100_000 {
            counts[s.sample(&mut rng)] += 1;
        }
        let r = chi_square_gof(&counts, &s.pmf(), 5.0);
        assert!(r.p_value > 1e-3, "{r:?}");
    }

    #[test]
    fn zero_range_identity() {
        // E[g(η)] = φ under the marginal with fugacity φ.
        let mut rng = rng_from_seed(5);
        let sqrt = RateFunction::from_fn(1024, |k| (k as f64).sqrt()).unwrap();
        let phi = 1.3;
        let s = SiteSeries::new(&sqrt, phi, TOL).unwrap();
        assert!((s.expectation(|k| sqrt.get(k).unwrap()) - phi).abs() < 1e-11);
        let draws: Vec<f64> = (0..100_000).map(|_| sqrt.get(s.sample(&mut rng)).unwrap()).collect();
        let (m, se) = crate::stats::mean_and_se(&draws);
        assert!((m - phi).abs() < 3.0 * se, "{m} +- {se}");
    }
}
