//! Macroscopic density profiles `γ : [0, W) → ℝ₊`.
//!
//! A profile equals its background density `ρ` outside a bounded interval
//! (the periodic analogue of `u(x) = ρ` for `|x|` large).

use std::fmt;
use std::sync::Arc;

/// `b(s) = exp(1 - 1/(1 - s²))` for `|s| < 1`, zero elsewhere, with its first
/// two derivatives. `b(0) = 1`, and `b` is `C^∞`.
pub(crate) fn smooth_bump(s: f64) -> [f64; 3] {
    if s.abs() >= 1.0 {
        return [0.0; 3];
    }
    let q = 1.0 - s * s;
    let b = (1.0 - 1.0 / q).exp();
    let d1 = b * (-2.0 * s / (q * q));
    let d2 = b * (4.0 * s * s / q.powi(4) - 2.0 / (q * q) - 8.0 * s * s / q.powi(3));
    [b, d1, d2]
}

type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Initial density profile.
#[derive(Clone)]
pub enum DensityProfile {
    /// `γ ≡ ρ`.
    Constant { rho: f64 },
    /// `γ(u) = ρ + a·sin(2πu/λ)`.
    Sine { rho: f64, amplitude: f64, wavelength: f64 },
    /// `γ(u) = ρ + a·b((u - c)/r)` with the smooth bump `b`.
    Bump { rho: f64, amplitude: f64, center: f64, radius: f64 },
    /// Arbitrary profile equal to `rho` outside `interval`.
    Custom { rho: f64, interval: (f64, f64), f: ProfileFn },
}

impl fmt::Debug for DensityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { rho } => write!(f, "Constant({rho})"),
            Self::Sine { rho, amplitude, wavelength } => {
                write!(f, "Sine(rho={rho}, a={amplitude}, lambda={wavelength})")
            }
            Self::Bump { rho, amplitude, center, radius } => {
                write!(f, "Bump(rho={rho}, a={amplitude}, c={center}, r={radius})")
            }
            Self::Custom { rho, interval, .. } => write!(f, "Custom(rho={rho}, on {interval:?})"),
        }
    }
}

impl DensityProfile {
    pub fn constant(rho: f64) -> Self {
        Self::Constant { rho }
    }

    pub fn custom<F>(rho: f64, interval: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom { rho, interval, f: Arc::new(f) }
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            Self::Constant { rho } => *rho,
            Self::Sine { rho, amplitude, wavelength } => {
                rho + amplitude * (std::f64::consts::TAU * u / wavelength).sin()
            }
            Self::Bump { rho, amplitude, center, radius } => rho + amplitude * smooth_bump((u - center) / radius)[0],
            Self::Custom { rho, interval, f } => {
                if u < interval.0 || u > interval.1 {
                    *rho
                } else {
                    f(u)
                }
            }
        }
    }

    /// Background density `ρ`.
    pub fn background(&self) -> f64 {
        match self {
            Self::Constant { rho } | Self::Sine { rho, .. } | Self::Bump { rho, .. } | Self::Custom { rho, .. } => *rho,
        }
    }

    /// Interval outside which `γ = ρ`, clipped to the torus `[0, width)`.
    /// `None` for constant profiles.
    pub fn deviation_interval(&self, width: f64) -> Option<(f64, f64)> {
        match self {
            Self::Constant { .. } => None,
            Self::Sine { .. } => Some((0.0, width)),
            Self::Bump { center, radius, .. } => Some(((center - radius).max(0.0), (center + radius).min(width))),
            Self::Custom { interval, .. } => Some((interval.0.max(0.0), interval.1.min(width))),
        }
    }

    /// Upper bound on `γ` (exact for the closed forms, sampled for custom).
    pub fn max_value(&self, width: f64) -> f64 {
        match self {
            Self::Constant { rho } => *rho,
            Self::Sine { rho, amplitude, .. } => rho + amplitude.abs(),
            Self::Bump { rho, amplitude, .. } => rho + amplitude.max(0.0),
            Self::Custom { .. } => {
                (0..=4096).map(|i| self.value(width * i as f64 / 4096.0)).fold(self.background(), f64::max)
            }
        }
    }

    /// Lower bound on `γ` (exact for the closed forms, sampled for custom).
    pub fn min_value(&self, width: f64) -> f64 {
        match self {
            Self::Constant { rho } => *rho,
            Self::Sine { rho, amplitude, .. } => rho - amplitude.abs(),
            Self::Bump { rho, amplitude, .. } => rho + amplitude.min(0.0),
            Self::Custom { .. } => {
                (0..=4096).map(|i| self.value(width * i as f64 / 4096.0)).fold(self.background(), f64::min)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        for &s in &[-0.7, -0.2, 0.0, 0.3, 0.85] {
            let h = 1e-5;
            let [_, d1, d2] = smooth_bump(s);
            let fd1 = (smooth_bump(s + h)[0] - smooth_bump(s - h)[0]) / (2.0 * h);
            let fd2 = (smooth_bump(s + h)[1] - smooth_bump(s - h)[1]) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-7, "s={s}: {d1} vs {fd1}");
            assert!((d2 - fd2).abs() < 1e-6, "s={s}: {d2} vs {fd2}");
        }
        assert_eq!(smooth_bump(0.0)[0], 1.0);
        assert_eq!(smooth_bump(1.0), [0.0; 3]);
    }

    #[test]
    fn profiles_equal_background_outside_interval() {
        let p = DensityProfile::Bump { rho: 1.0, amplitude: 0.5, center: 0.5, radius: 0.2 };
        assert_eq!(p.value(0.1), 1.0);
        assert_eq!(p.value(0.5), 1.5);
        assert_eq!(p.deviation_interval(1.0), Some((0.3, 0.7)));
        assert_eq!(DensityProfile::constant(2.0).deviation_interval(1.0), None);
    }
}
