use std::fmt;
use std::sync::{Arc, OnceLock};

use super::FieldsError;
use crate::profile::smooth_bump;

type ShapeFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// Compactly supported spatial factor; evaluation returns the value and
/// its first two derivatives.
#[derive(Clone)]
pub enum SpatialShape {
    /// `b((u - center)/radius)` with the smooth bump `b(s) = e^{1 - 1/(1-s²)}`.
    Bump { center: f64, radius: f64 },
    /// Cardinal cubic B-spline `B₃((u - center)/spacing)`, support
    /// `center ± 2·spacing`.
    CubicBSpline { center: f64, spacing: f64 },
    /// Closure returning `[f, f', f'']`, assumed zero outside `support`.
    Custom { support: (f64, f64), f: ShapeFn },
}

impl fmt::Debug for SpatialShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bump { center, radius } => write!(f, "Bump(c={center}, r={radius})"),
            Self::CubicBSpline { center, spacing } => write!(f, "BSpline(c={center}, h={spacing})"),
            Self::Custom { support, .. } => write!(f, "Custom(on {support:?})"),
        }
    }
}

fn cubic_bspline(s: f64) -> [f64; 3] {
    let a = s.abs();
    if a >= 2.0 {
        [0.0; 3]
    } else if a < 1.0 {
        [2.0 / 3.0 - s * s + 0.5 * a * a * a, -2.0 * s + 1.5 * s * a, -2.0 + 3.0 * a]
    } else {
        let q = 2.0 - a;
        [q * q * q / 6.0, -s.signum() * q * q / 2.0, q]
    }
}

impl SpatialShape {
    pub fn custom<F>(support: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    {
        Self::Custom { support, f: Arc::new(f) }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Bump { center, radius } => (center - radius, center + radius),
            Self::CubicBSpline { center, spacing } => (center - 2.0 * spacing, center + 2.0 * spacing),
            Self::Custom { support, .. } => *support,
        }
    }

    pub fn eval(&self, u: f64) -> [f64; 3] {
        match self {
            Self::Bump { center, radius } => {
                let [b, d1, d2] = smooth_bump((u - center) / radius);
                [b, d1 / radius, d2 / (radius * radius)]
            }
            Self::CubicBSpline { center, spacing } => {
                let [b, d1, d2] = cubic_bspline((u - center) / spacing);
                [b, d1 / spacing, d2 / (spacing * spacing)]
            }
            Self::Custom { support, f } => {
                if u < support.0 || u > support.1 {
                    [0.0; 3]
                } else {
                    f(u)
                }
            }
        }
    }
}

/// One separable piece `c · S(u) · P(t/𝒯)` with `P(s) = Σ_k a_k s^k`.
#[derive(Debug, Clone)]
pub struct Term {
    pub coefficient: f64,
    pub shape: SpatialShape,
    pub time_poly: Vec<f64>,
}

impl Term {
    /// Time-independent term `c · S(u)`.
    pub fn stationary(coefficient: f64, shape: SpatialShape) -> Self {
        Self { coefficient, shape, time_poly: vec![1.0] }
    }
}

const ENVELOPE_SPATIAL: usize = 2560;
const ENVELOPE_TIMES: usize = 33;
const ENVELOPE_SLACK: f64 = 1.05;

#[derive(Debug)]
struct Envelope {
    lo: f64,
    step: f64,
    peaks: Vec<f64>,
    sup_du: f64,
}

/// Space-time test function `H(t, u)`, a finite sum of [`Term`]s on
/// `[0, 𝒯] × ℝ` with compact spatial support.
#[derive(Debug, Clone)]
pub struct TestFunction {
    terms: Vec<Term>,
    horizon: f64,
    envelope: Arc<OnceLock<Envelope>>,
}

impl TestFunction {
    pub fn new(terms: Vec<Term>, horizon: f64) -> Result<Self, FieldsError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(FieldsError::InvalidTestFunction(format!("horizon {horizon}")));
        }
        for t in &terms {
            let (a, b) = t.shape.support();
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(FieldsError::InvalidTestFunction(format!("support {:?}", (a, b))));
            }
            if t.time_poly.is_empty() || !t.coefficient.is_finite() {
                return Err(FieldsError::InvalidTestFunction("empty time polynomial".into()));
            }
        }
        Ok(Self { terms, horizon, envelope: Arc::new(OnceLock::new()) })
    }

    /// `H ≡ 0`.
    pub fn zero(horizon: f64) -> Self {
        Self::new(Vec::new(), horizon).expect("valid horizon")
    }

    /// Time-independent `amplitude · b((u - center)/radius)`.
    pub fn bump(amplitude: f64, center: f64, radius: f64, horizon: f64) -> Result<Self, FieldsError> {
        Self::new(vec![Term::stationary(amplitude, SpatialShape::Bump { center, radius })], horizon)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient == 0.0)
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.time_poly.iter().skip(1).all(|&a| a == 0.0))
    }

    /// Hull of the term supports; `None` for `H ≡ 0`.
    pub fn support(&self) -> Option<(f64, f64)> {
        self.terms
            .iter()
            .filter(|t| t.coefficient != 0.0)
            .map(|t| t.shape.support())
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    /// `c·H`.
    pub fn scaled(&self, c: f64) -> Self {
        let terms = self.terms.iter().map(|t| Term { coefficient: c * t.coefficient, ..t.clone() }).collect();
        Self::new(terms, self.horizon).expect("scaling preserves validity")
    }

    /// `H + K` (horizons must agree).
    pub fn plus(&self, other: &Self) -> Result<Self, FieldsError> {
        if self.horizon != other.horizon {
            return Err(FieldsError::InvalidTestFunction("horizons differ".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(terms, self.horizon)
    }

    /// `[H, ∂_t H, ∂_u H, ∂²_u H]` at `(t, u)`.
    pub fn eval(&self, t: f64, u: f64) -> [f64; 4] {
        let s = t / self.horizon;
        let mut out = [0.0; 4];
        for term in &self.terms {
            let [f, f1, f2] = term.shape.eval(u);
            if f == 0.0 && f1 == 0.0 && f2 == 0.0 {
                continue;
            }
            let (p, dp) = poly_and_derivative(&term.time_poly, s);
            let c = term.coefficient;
            out[0] += c * f * p;
            out[1] += c * f * dp / self.horizon;
            out[2] += c * f1 * p;
            out[3] += c * f2 * p;
        }
        out
    }

    #[inline]
    pub fn value(&self, t: f64, u: f64) -> f64 {
        let s = t / self.horizon;
        self.terms
            .iter()
            .map(|term| {
                let f = term.shape.eval(u)[0];
                if f == 0.0 {
                    0.0
                } else {
                    term.coefficient * f * poly_and_derivative(&term.time_poly, s).0
                }
            })
            .sum()
    }

    pub fn dt(&self, t: f64, u: f64) -> f64 {
        self.eval(t, u)[1]
    }

    pub fn du(&self, t: f64, u: f64) -> f64 {
        self.eval(t, u)[2]
    }

    pub fn du2(&self, t: f64, u: f64) -> f64 {
        self.eval(t, u)[3]
    }

    fn envelope_data(&self) -> &Envelope {
        self.envelope.get_or_init(|| {
            let Some((a, b)) = self.support() else {
                return Envelope { lo: 0.0, step: 1.0, peaks: Vec::new(), sup_du: 0.0 };
            };
            let step = (b - a) / ENVELOPE_SPATIAL as f64;
            let mut sup_du = 0.0f64;
            let peaks = (0..=ENVELOPE_SPATIAL)
                .map(|i| {
                    let u = a + step * i as f64;
                    (0..ENVELOPE_TIMES)
                        .map(|j| {
                            let t = self.horizon * j as f64 / (ENVELOPE_TIMES - 1) as f64;
                            let [h, _, hu, huu] = self.eval(t, u);
                            sup_du = sup_du.max(hu.abs());
                            h.abs().max(hu.abs()).max(huu.abs())
                        })
                        .fold(0.0, f64::max)
                })
                .collect();
            Envelope { lo: a, step, peaks, sup_du: sup_du * ENVELOPE_SLACK }
        })
    }

    /// Envelope `G(u) ≥ max{|H|, |∂_u H|, |∂²_u H|}` over `[u-1, u+1] × [0, 𝒯]`,
    /// from a grid maximization (10× oversampled) with 5% slack. Built once.
    pub fn envelope(&self, u: f64) -> f64 {
        let env = self.envelope_data();
        if env.peaks.is_empty() {
            return 0.0;
        }
        let last = env.peaks.len() - 1;
        let lo = ((u - 1.0 - env.lo) / env.step).floor() - 1.0;
        let hi = ((u + 1.0 - env.lo) / env.step).ceil() + 1.0;
        if hi < 0.0 || lo > last as f64 {
            return 0.0;
        }
        let (i0, i1) = (lo.max(0.0) as usize, (hi as usize).min(last));
        ENVELOPE_SLACK * env.peaks[i0..=i1].iter().copied().fold(0.0, f64::max)
    }

    /// Probed `sup |∂_u H|` over `[0, 𝒯] × ℝ` (with 5% slack).
    pub fn sup_abs_du(&self) -> f64 {
        self.envelope_data().sup_du
    }
}

fn poly_and_derivative(a: &[f64], s: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in a.iter().rev() {
        dp = dp * s + p;
        p = p * s + c;
    }
    (p, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;
    use rand::Rng;

    fn mixed() -> TestFunction {
        TestFunction::new(
            vec![
                Term {
                    coefficient: 0.8,
                    shape: SpatialShape::Bump { center: 0.4, radius: 0.2 },
                    time_poly: vec![1.0, -0.5, 0.3],
                },
                Term {
                    coefficient: -1.3,
                    shape: SpatialShape::CubicBSpline { center: 0.6, spacing: 0.05 },
                    time_poly: vec![0.2, 1.0],
                },
            ],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = mixed();
        let e = 1e-6;
        for &(t, u) in &[(0.1, 0.35), (0.3, 0.52), (0.45, 0.63), (0.0, 0.27)] {
            let [_, ht, hu, huu] = h.eval(t, u);
            assert!((ht - (h.value(t + e, u) - h.value(t - e, u)) / (2.0 * e)).abs() < 1e-6);
            assert!((hu - (h.value(t, u + e) - h.value(t, u - e)) / (2.0 * e)).abs() < 1e-5);
            assert!((huu - (h.du(t, u + e) - h.du(t, u - e)) / (2.0 * e)).abs() < 1e-3);
        }
    }

    #[test]
    fn bspline_partition_of_unity() {
        for &u in &[0.0, 0.13, 0.5, 0.77] {
            let total: f64 =
                (-4..=4).map(|k| SpatialShape::CubicBSpline { center: k as f64, spacing: 1.0 }.eval(u)[0]).sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let h = mixed();
        let (a, b) = h.support().unwrap();
        assert!((a - 0.2).abs() < 1e-15 && (b - 0.7).abs() < 1e-12);
        for &u in &[0.0, 0.19, 0.71, 0.99] {
            assert_eq!(h.eval(0.2, u), [0.0; 4]);
        }
        assert!(TestFunction::zero(1.0).support().is_none());
    }

    #[test]
    fn envelope_dominates_random_probes() {
        let h = mixed();
        let mut rng = rng_from_seed(11);
        for _ in 0..1000 {
            let t = rng.random::<f64>() * h.horizon();
            let u = rng.random::<f64>() * 1.4 - 0.2;
            let [v, _, d1, d2] = h.eval(t, u);
            let g = h.envelope(u);
            assert!(g >= v.abs() && g >= d1.abs() && g >= d2.abs(), "u={u} t={t}");
        }
        assert!(h.envelope(5.0) == 0.0);
    }

    #[test]
    fn scaling_and_sum() {
        let h = mixed();
        let k = TestFunction::bump(2.0, 0.5, 0.3, 0.5).unwrap();
        let s = h.scaled(-2.0).plus(&k).unwrap();
        let (t, u) = (0.2, 0.45);
        assert!((s.value(t, u) - (-2.0 * h.value(t, u) + k.value(t, u))).abs() < 1e-14);
        assert!(k.is_time_independent() && !h.is_time_independent());
    }
}
