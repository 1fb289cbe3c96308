use super::HydroError;
use crate::equilibria::FugacityMaps;

pub const DEFAULT_SPLINE_NODES: usize = 512;

/// Shape-preserving cubic Hermite interpolant (Fritsch–Carlson slopes) of
/// `Φ` on `[0, u_max]`.
///
/// Monotone data give a monotone interpolant, so the upwind scheme stays
/// positivity preserving. Above `u_max` the samples are extended linearly
/// from the last slope, which keeps `Φ` monotone; [`PhiSpline::covers`]
/// tells the caller when that happens.
#[derive(Debug, Clone)]
pub struct PhiSpline {
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

/// Three-point one-sided end slope, limited to keep the shape.
fn end_slope(d0: f64, d1: f64) -> f64 {
    let m = 0.5 * (3.0 * d0 - d1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

impl PhiSpline {
    /// Sample `maps.phi` on `nodes` equally spaced points of `[0, u_max]`.
    pub fn from_maps(maps: &FugacityMaps, u_max: f64, nodes: usize) -> Result<Self, HydroError> {
        if !(u_max > 0.0) || nodes < 4 {
            return Err(HydroError::InvalidArgument(format!("spline on [0, {u_max}] with {nodes} nodes")));
        }
        let h = u_max / (nodes - 1) as f64;
        let values = (0..nodes).map(|k| maps.phi(k as f64 * h)).collect::<Result<Vec<_>, _>>()?;
        Self::from_samples(h, values)
    }

    /// Interpolate `f` itself (used for closed-form `Φ` in tests and checks).
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, u_max: f64, nodes: usize) -> Result<Self, HydroError> {
        if !(u_max > 0.0) || nodes < 4 {
            return Err(HydroError::InvalidArgument(format!("spline on [0, {u_max}] with {nodes} nodes")));
        }
        let h = u_max / (nodes - 1) as f64;
        Self::from_samples(h, (0..nodes).map(|k| f(k as f64 * h)).collect())
    }

    fn from_samples(h: f64, values: Vec<f64>) -> Result<Self, HydroError> {
        let n = values.len();
        let d: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        if d.iter().any(|&s| !(s >= 0.0)) {
            return Err(HydroError::DegenerateStep { u: 0.0, slope: d.iter().cloned().fold(f64::INFINITY, f64::min) });
        }
        let mut m = vec![0.0; n];
        m[0] = end_slope(d[0], d[1]);
        m[n - 1] = end_slope(d[n - 2], d[n - 3]);
        for k in 1..n - 1 {
            m[k] = if d[k - 1] * d[k] <= 0.0 {
                0.0
            } else {
                // harmonic mean of neighbouring secants
                2.0 * d[k - 1] * d[k] / (d[k - 1] + d[k])
            };
        }
        for (k, &dk) in d.iter().enumerate() {
            if dk == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let (a, b) = (m[k] / dk, m[k + 1] / dk);
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[k] = tau * a * dk;
                m[k + 1] = tau * b * dk;
            }
        }
        Ok(Self { h, values, slopes: m })
    }

    pub fn u_max(&self) -> f64 {
        self.h * (self.values.len() - 1) as f64
    }

    pub fn covers(&self, u: f64) -> bool {
        (0.0..=self.u_max()).contains(&u)
    }

    /// `Φ(u)`, with `Φ(u) = 0` for `u ≤ 0`.
    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.values[0] + self.slopes[0] * u.max(0.0);
        }
        let last = self.values.len() - 1;
        let umax = self.u_max();
        if u >= umax {
            return self.values[last] + self.slopes[last] * (u - umax);
        }
        let k = ((u / self.h) as usize).min(last - 1);
        let s = (u - k as f64 * self.h) / self.h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[k]
            + h10 * self.h * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * self.h * self.slopes[k + 1]
    }

    /// Centered difference `(Φ(u+δ) − Φ(u−δ)) / 2δ`, one-sided at 0.
    pub fn derivative(&self, u: f64) -> f64 {
        let delta = 1e-4 * self.h.max(1e-8);
        if u <= delta {
            (self.eval(u + delta) - self.eval(u.max(0.0))) / (u + delta - u.max(0.0))
        } else {
            (self.eval(u + delta) - self.eval(u - delta)) / (2.0 * delta)
        }
    }
}
