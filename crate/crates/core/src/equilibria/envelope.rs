use std::fmt;
use std::sync::Arc;

use super::EquilibriaError;

type OmegaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed forms (or a closure) for the convex envelope `ω`.
#[derive(Clone)]
pub enum OmegaShape {
    /// `ω(α) = α^q` with `q > 1`.
    Power(f64),
    /// `ω(α) = α·log(1 + α)`.
    XLog1p,
    Custom(OmegaFn),
}

impl fmt::Debug for OmegaShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power(q) => write!(f, "Power({q})"),
            Self::XLog1p => f.write_str("XLog1p"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Envelope `ω` together with the exponential-moment parameter `θ`.
#[derive(Debug, Clone)]
pub struct MomentEnvelope {
    shape: OmegaShape,
    theta: f64,
}

const PROBE_END: f64 = 1e3;
const PROBE_POINTS: usize = 400;

fn probe_grid() -> impl Iterator<Item = f64> {
    // Log-spaced on [1e-3, PROBE_END].
    (0..PROBE_POINTS).map(|i| 1e-3 * (PROBE_END / 1e-3).powf(i as f64 / (PROBE_POINTS - 1) as f64))
}

impl MomentEnvelope {
    /// Validates `ω(0) = 0`, convexity and that `ω(α)/α` is nondecreasing
    /// and growing on a log-spaced probe grid over `[1e-3, 1e3]`.
    pub fn new(shape: OmegaShape, theta: f64) -> Result<Self, EquilibriaError> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(EquilibriaError::InvalidEnvelope(format!("theta {theta}")));
        }
        if let OmegaShape::Power(q) = shape {
            if !(q > 1.0) {
                return Err(EquilibriaError::InvalidEnvelope(format!("power {q} is not superlinear")));
            }
        }
        let env = Self { shape, theta };
        if env.omega(0.0) != 0.0 {
            return Err(EquilibriaError::InvalidEnvelope("omega(0) != 0".into()));
        }
        let pts: Vec<f64> = probe_grid().collect();
        let ratios: Vec<f64> = pts.iter().map(|&a| env.omega(a) / a).collect();
        if ratios.windows(2).any(|w| w[1] < w[0] * (1.0 - 1e-12)) {
            return Err(EquilibriaError::InvalidEnvelope("omega(x)/x decreases".into()));
        }
        if !(ratios[ratios.len() - 1] > 10.0 * ratios[0].max(1e-300)) {
            return Err(EquilibriaError::InvalidEnvelope("omega(x)/x does not grow".into()));
        }
        for w in pts.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let chord = env.omega(a) + (env.omega(c) - env.omega(a)) * (b - a) / (c - a);
            if env.omega(b) > chord * (1.0 + 1e-10) + 1e-300 {
                return Err(EquilibriaError::InvalidEnvelope(format!("not convex near {b}")));
            }
        }
        Ok(env)
    }

    /// `ω(α) = α log(1 + α)` with `θ = 0.1`.
    pub fn default_envelope() -> Self {
        Self::new(OmegaShape::XLog1p, 0.1).expect("valid envelope")
    }

    pub fn custom<F>(f: F, theta: f64) -> Result<Self, EquilibriaError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(OmegaShape::Custom(Arc::new(f)), theta)
    }

    pub fn omega(&self, a: f64) -> f64 {
        match &self.shape {
            OmegaShape::Power(q) => a.powf(*q),
            OmegaShape::XLog1p => a * a.ln_1p(),
            OmegaShape::Custom(f) => f(a),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn shape(&self) -> &OmegaShape {
        &self.shape
    }

    /// `ω*(x)` on [`Self::default_grid`].
    pub fn legendre(&self, x: f64) -> Result<f64, EquilibriaError> {
        legendre_transform(self, x, &Self::default_grid())
    }

    /// 2001 log-spaced points on `[1e-6, 1e6]`.
    pub fn default_grid() -> Vec<f64> {
        (0..=2000).map(|i| 1e-6 * 1e12f64.powf(i as f64 / 2000.0)).collect()
    }
}

/// `ω*(x) = sup_{α>0} {αx - ω(α)}` over `grid` (increasing, positive),
/// refined by golden-section search around the best grid point. `α = 0`
/// is always a candidate, so the result is `≥ 0`.
pub fn legendre_transform(env: &MomentEnvelope, x: f64, grid: &[f64]) -> Result<f64, EquilibriaError> {
    if !(x >= 0.0) {
        return Err(EquilibriaError::InvalidArgument(format!("x = {x}")));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
        return Err(EquilibriaError::InvalidArgument("grid must be positive increasing".into()));
    }
    let f = |a: f64| a * x - env.omega(a);
    let (best, best_val) =
        grid.iter()
            .enumerate()
            .map(|(i, &a)| (i, f(a)))
            .fold((usize::MAX, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if best == usize::MAX {
        return Ok(0.0);
    }
    let last = grid.len() - 1;
    if best == last {
        return Err(EquilibriaError::UnboundedSup(grid[last]));
    }
    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = grid[best + 1];
    Ok(golden_max(f, lo, hi, 200).max(best_val))
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if b - a <= 1e-14 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_closed_form() {
        let env = MomentEnvelope::new(OmegaShape::Power(2.0), 1.0).unwrap();
        assert_eq!(env.legendre(0.0).unwrap(), 0.0);
        assert!((env.legendre(3.0).unwrap() - 2.25).abs() < 1e-12);
        for &x in &[0.1, 0.7, 5.0, 40.0] {
            assert!((env.legendre(x).unwrap() - x * x / 4.0).abs() < 1e-10 * (1.0 + x * x));
        }
    }

    #[test]
    fn xlog1p_against_stationarity_root() {
        // Oracle: maximizer solves 1 - log(1+α) - α/(1+α) = 0, found by bisection.
        let d = |a: f64| 1.0 - (1.0 + a).ln() - a / (1.0 + a);
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if d(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = 0.5 * (lo + hi);
        let expected = a - a * (1.0 + a).ln();
        let env = MomentEnvelope::default_envelope();
        assert!((env.legendre(1.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn legendre_convex_and_zero_at_origin() {
        let env = MomentEnvelope::default_envelope();
        let xs: Vec<f64> = (0..=60).map(|i| 0.1 * i as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| env.legendre(x).unwrap()).collect();
        assert_eq!(vals[0], 0.0);
        for w in vals.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-10);
        }
    }

    #[test]
    fn unbounded_when_grid_too_short() {
        let env = MomentEnvelope::new(OmegaShape::Power(2.0), 1.0).unwrap();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1).collect();
        assert!(matches!(legendre_transform(&env, 10.0, &grid), Err(EquilibriaError::UnboundedSup(_))));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(MomentEnvelope::new(OmegaShape::Power(1.0), 1.0).is_err());
        assert!(MomentEnvelope::new(OmegaShape::XLog1p, 0.0).is_err());
        assert!(MomentEnvelope::custom(|a| a * a + 1.0, 1.0).is_err());
        assert!(MomentEnvelope::custom(|a| a.sqrt(), 1.0).is_err());
        assert!(MomentEnvelope::custom(|a| a * a * a, 0.5).is_ok());
    }
}
