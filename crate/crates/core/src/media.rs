//! Random environments `p = {p_x}` with values in `[a0, a1]`.
//!
//! Laws are stationary and ergodic with an absolutely continuous marginal
//! that charges both ends of `[a0, a1]`. A realization is materialized on
//! `L` sites with periodic shifts.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{composite_gauss_legendre, gauss_legendre};
use crate::seeding::rng_from_seed;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("invalid environment law: {0}")]
    BadLaw(String),
    #[error("environment length must be at least 1")]
    EmptyLattice,
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Largest moving-average window supported by [`EnvironmentLaw::ShiftCoupled`].
/// The alternating-sum form of its marginal density loses precision beyond it.
pub const MAX_WINDOW: usize = 16;

const CDF_CELLS: usize = 4096;

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An i.i.d. law with an explicit marginal density on `[a0, a1]`.
#[derive(Clone)]
pub struct DensityLaw {
    a0: f64,
    a1: f64,
    density: DensityFn,
    /// CDF at `CDF_CELLS + 1` equally spaced points.
    cdf: Vec<f64>,
}

impl fmt::Debug for DensityLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityLaw").field("a0", &self.a0).field("a1", &self.a1).finish()
    }
}

impl DensityLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let cell = self.cdf.partition_point(|&c| c <= u).clamp(1, CDF_CELLS) - 1;
        let (c0, c1) = (self.cdf[cell], self.cdf[cell + 1]);
        let frac = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
        let h = (self.a1 - self.a0) / CDF_CELLS as f64;
        self.a0 + (cell as f64 + frac) * h
    }
}

/// Stationary ergodic law `m` of the environment.
#[derive(Debug, Clone)]
pub enum EnvironmentLaw {
    /// i.i.d. uniform marginals on `[a0, a1]`; `a0 == a1` is the deterministic medium.
    IidUniform { a0: f64, a1: f64 },
    /// i.i.d. with a user-supplied marginal density.
    IidDensity(DensityLaw),
    /// `p_x = a0 + (a1 - a0)·mean(u_x, …, u_{x+w-1})` for i.i.d. uniforms `u`.
    ShiftCoupled { a0: f64, a1: f64, window: usize },
}

/// Serializable summary of a law, echoed into run metadata.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LawDescriptor {
    pub kind: &'static str,
    pub a0: f64,
    pub a1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

fn check_interval(a0: f64, a1: f64) -> Result<(), MediaError> {
    if !(a0.is_finite() && a1.is_finite() && a0 > 0.0 && a0 <= a1) {
        return Err(MediaError::BadLaw(format!("need 0 < a0 <= a1 < inf, got [{a0}, {a1}]")));
    }
    Ok(())
}

/// Density of the mean of `w` i.i.d. uniforms on `[0, 1]` (Bates law).
fn bates_density(w: usize, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    if w == 1 {
        return 1.0;
    }
    let wf = w as f64;
    let top = (wf * x).floor() as usize;
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 0..=top.min(w) {
        if k > 0 {
            binom *= (w - k + 1) as f64 / k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * (wf * x - k as f64).powi(w as i32 - 1);
    }
    let fact: f64 = (1..w).map(|i| i as f64).product();
    (wf / fact * sum).max(0.0)
}

impl EnvironmentLaw {
    pub fn iid_uniform(a0: f64, a1: f64) -> Result<Self, MediaError> {
        check_interval(a0, a1)?;
        Ok(Self::IidUniform { a0, a1 })
    }

    /// Deterministic medium `p ≡ 1`.
    pub fn homogeneous() -> Self {
        Self::IidUniform { a0: 1.0, a1: 1.0 }
    }

    pub fn shift_coupled(a0: f64, a1: f64, window: usize) -> Result<Self, MediaError> {
        check_interval(a0, a1)?;
        if window == 0 || window > MAX_WINDOW {
            return Err(MediaError::BadLaw(format!("shift-coupled window must lie in 1..={MAX_WINDOW}, got {window}")));
        }
        if a0 == a1 {
            return Err(MediaError::BadLaw("shift-coupled law needs a0 < a1".into()));
        }
        Ok(Self::ShiftCoupled { a0, a1, window })
    }

    /// i.i.d. law with marginal density `density` on `[a0, a1]`.
    ///
    /// The density must be nonnegative, integrate to 1 within `1e-9`, and put
    /// positive mass in every neighbourhood of both endpoints.
    pub fn iid_density<F>(a0: f64, a1: f64, density: F) -> Result<Self, MediaError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_interval(a0, a1)?;
        if a0 == a1 {
            return Err(MediaError::BadLaw("a density law needs a0 < a1".into()));
        }
        let density: DensityFn = Arc::new(density);
        let total: f64 = composite_gauss_legendre(32, 64, a0, a1).iter().map(|&(p, w)| w * density(p)).sum();
        if !total.is_finite() || (total - 1.0).abs() > 1e-9 {
            return Err(MediaError::BadLaw(format!("density integrates to {total}, not 1")));
        }
        let h = (a1 - a0) / CDF_CELLS as f64;
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        cdf.push(0.0);
        let rule = gauss_legendre(4, 0.0, 1.0);
        for i in 0..CDF_CELLS {
            let lo = a0 + i as f64 * h;
            let mass: f64 = rule.iter().map(|&(s, w)| w * h * density(lo + s * h)).sum();
            if mass < 0.0 || density(lo + 0.5 * h) < 0.0 {
                return Err(MediaError::BadLaw(format!("negative density near {lo}")));
            }
            cdf.push(cdf[i] + mass);
        }
        let last = cdf[CDF_CELLS];
        for c in &mut cdf {
            *c /= last;
        }
        let law = DensityLaw { a0, a1, density, cdf };
        for eps in [1e-1, 1e-2, 1e-3] {
            let e = eps * (a1 - a0);
            if law_mass(&law, a0, a0 + e) <= 0.0 || law_mass(&law, a1 - e, a1) <= 0.0 {
                return Err(MediaError::BadLaw(format!(
                    "marginal must charge both ends of [{a0}, {a1}] (fails at width {e})"
                )));
            }
        }
        Ok(Self::IidDensity(law))
    }

    /// i.i.d. law whose density is the normalized piecewise-linear
    /// interpolation of `values` on an equispaced grid over `[a0, a1]`.
    pub fn iid_tabulated(a0: f64, a1: f64, values: Vec<f64>) -> Result<Self, MediaError> {
        check_interval(a0, a1)?;
        if values.len() < 2 || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MediaError::BadLaw("tabulated density needs >= 2 finite nonnegative values".into()));
        }
        let cells = (values.len() - 1) as f64;
        let h = (a1 - a0) / cells;
        let area: f64 = values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        if area <= 0.0 {
            return Err(MediaError::BadLaw("tabulated density has zero mass".into()));
        }
        let table: Vec<f64> = values.iter().map(|v| v / area).collect();
        Self::iid_density(a0, a1, move |p| {
            let s = ((p - a0) / h).clamp(0.0, cells);
            let i = (s.floor() as usize).min(table.len() - 2);
            let f = s - i as f64;
            table[i] * (1.0 - f) + table[i + 1] * f
        })
    }

    pub fn a0(&self) -> f64 {
        match self {
            Self::IidUniform { a0, .. } | Self::ShiftCoupled { a0, .. } => *a0,
            Self::IidDensity(d) => d.a0,
        }
    }

    pub fn a1(&self) -> f64 {
        match self {
            Self::IidUniform { a1, .. } | Self::ShiftCoupled { a1, .. } => *a1,
            Self::IidDensity(d) => d.a1,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::IidUniform { .. } => "iid_uniform",
            Self::IidDensity(_) => "iid_density",
            Self::ShiftCoupled { .. } => "shift_coupled",
        }
    }

    /// True when the sites are independent under `m`.
    pub fn is_iid(&self) -> bool {
        !matches!(self, Self::ShiftCoupled { window, .. } if *window > 1)
    }

    pub fn descriptor(&self) -> LawDescriptor {
        LawDescriptor {
            kind: self.kind_name(),
            a0: self.a0(),
            a1: self.a1(),
            window: match self {
                Self::ShiftCoupled { window, .. } => Some(*window),
                _ => None,
            },
        }
    }

    /// Marginal density at `p` (`None` for a point mass).
    pub fn marginal_density(&self, p: f64) -> Option<f64> {
        match self {
            Self::IidUniform { a0, a1 } => {
                if a0 == a1 {
                    None
                } else if (*a0..=*a1).contains(&p) {
                    Some(1.0 / (a1 - a0))
                } else {
                    Some(0.0)
                }
            }
            Self::IidDensity(d) => Some(if (d.a0..=d.a1).contains(&p) { (d.density)(p) } else { 0.0 }),
            Self::ShiftCoupled { a0, a1, window } => Some(bates_density(*window, (p - a0) / (a1 - a0)) / (a1 - a0)),
        }
    }

    /// Quadrature rule `(p_i, w_i)` with `Σ w_i f(p_i) ≈ m[f(p_0)]`; the
    /// weights sum to 1 up to rounding.
    ///
    /// Uses an `nodes`-point Gauss–Legendre rule on `[a0, a1]`; the
    /// shift-coupled marginal is piecewise polynomial and gets one panel per
    /// knot interval.
    pub fn marginal_rule(&self, nodes: usize) -> Vec<(f64, f64)> {
        let (a0, a1) = (self.a0(), self.a1());
        if a0 == a1 {
            return vec![(a0, 1.0)];
        }
        let base = match self {
            Self::ShiftCoupled { window, .. } => composite_gauss_legendre(nodes, *window, a0, a1),
            _ => gauss_legendre(nodes, a0, a1),
        };
        let mut rule: Vec<(f64, f64)> = base
            .into_iter()
            .map(|(p, w)| (p, w * self.marginal_density(p).unwrap_or(0.0)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let total: f64 = rule.iter().map(|r| r.1).sum();
        for r in &mut rule {
            r.1 /= total;
        }
        rule
    }

    /// `m{p_0 ∈ [lo, hi]}`.
    pub fn marginal_mass(&self, lo: f64, hi: f64) -> f64 {
        let (a0, a1) = (self.a0(), self.a1());
        let (lo, hi) = (lo.max(a0), hi.min(a1));
        if a0 == a1 {
            return if lo <= a0 && a0 <= hi { 1.0 } else { 0.0 };
        }
        if hi <= lo {
            return 0.0;
        }
        match self {
            Self::IidUniform { .. } => (hi - lo) / (a1 - a0),
            Self::IidDensity(d) => law_mass(d, lo, hi),
            Self::ShiftCoupled { window, .. } => composite_gauss_legendre(16, 4 * window, lo, hi)
                .iter()
                .map(|&(p, w)| w * self.marginal_density(p).unwrap_or(0.0))
                .sum(),
        }
    }

    /// Draw a stationary window `p_0, …, p_{len-1}` (non-periodic).
    pub fn sample_window<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Self::IidUniform { a0, a1 } => (0..len).map(|_| a0 + (a1 - a0) * rng.random::<f64>()).collect(),
            Self::IidDensity(d) => (0..len).map(|_| d.sample(rng)).collect(),
            Self::ShiftCoupled { a0, a1, window } => {
                let u: Vec<f64> = (0..len + window - 1).map(|_| rng.random()).collect();
                (0..len)
                    .map(|x| {
                        let m = u[x..x + window].iter().sum::<f64>() / *window as f64;
                        a0 + (a1 - a0) * m
                    })
                    .collect()
            }
        }
    }
}

fn law_mass(law: &DensityLaw, lo: f64, hi: f64) -> f64 {
    composite_gauss_legendre(16, 16, lo, hi).iter().map(|&(p, w)| w * (law.density)(p)).sum()
}

/// A realization of the environment on `L` periodic sites.
#[derive(Debug, Clone)]
pub struct Environment {
    p: Vec<f64>,
    law: EnvironmentLaw,
    seed: u64,
}

impl Environment {
    /// Draw a realization of `law` on `len` sites; deterministic in `(law, len, seed)`.
    pub fn generate(law: &EnvironmentLaw, len: usize, seed: u64) -> Result<Self, MediaError> {
        if len == 0 {
            return Err(MediaError::EmptyLattice);
        }
        let mut rng = rng_from_seed(seed);
        let p = match law {
            EnvironmentLaw::ShiftCoupled { a0, a1, window } => {
                // Periodic moving average keeps the torus realization stationary.
                let u: Vec<f64> = (0..len).map(|_| rng.random()).collect();
                (0..len)
                    .map(|x| {
                        let m = (0..*window).map(|j| u[(x + j) % len]).sum::<f64>() / *window as f64;
                        (a0 + (a1 - a0) * m).clamp(*a0, *a1)
                    })
                    .collect()
            }
            other => other.sample_window(len, &mut rng),
        };
        Ok(Self { p, law: law.clone(), seed })
    }

    /// Wrap explicit site values. Values must lie in `[law.a0, law.a1]`.
    pub fn from_values(p: Vec<f64>, law: EnvironmentLaw) -> Result<Self, MediaError> {
        if p.is_empty() {
            return Err(MediaError::EmptyLattice);
        }
        if let Some(v) = p.iter().find(|v| !(law.a0()..=law.a1()).contains(*v)) {
            return Err(MediaError::BadLaw(format!("site value {v} outside [{}, {}]", law.a0(), law.a1())));
        }
        Ok(Self { p, law, seed: 0 })
    }

    /// `p ≡ 1` on `len` sites.
    pub fn homogeneous(len: usize) -> Self {
        Self { p: vec![1.0; len.max(1)], law: EnvironmentLaw::homogeneous(), seed: 0 }
    }

    /// `(τ_y p)(x) = p(x + y)` with periodic wraparound.
    pub fn shift(&self, y: i64) -> Self {
        let len = self.p.len() as i64;
        let s = y.rem_euclid(len) as usize;
        let mut p = Vec::with_capacity(self.p.len());
        p.extend_from_slice(&self.p[s..]);
        p.extend_from_slice(&self.p[..s]);
        Self { p, law: self.law.clone(), seed: self.seed }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    pub fn at(&self, x: usize) -> f64 {
        self.p[x]
    }

    pub fn law(&self) -> &EnvironmentLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Write `site,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MediaError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["site", "value"])?;
        for (x, v) in self.p.iter().enumerate() {
            w.write_record([x.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_critical, ks_two_sample};

    #[test]
    fn degenerate_interval_is_constant() {
        let law = EnvironmentLaw::iid_uniform(1.0, 1.0).unwrap();
        let env = Environment::generate(&law, 8, 99).unwrap();
        assert!(env.values().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn uniform_mean_within_three_se() {
        let law = EnvironmentLaw::iid_uniform(1.0, 2.0).unwrap();
        let env = Environment::generate(&law, 100_000, 5).unwrap();
        let mean = env.values().iter().sum::<f64>() / 1e5;
        let tol = 3.0 * (1.0 / 12.0 / 1e5f64).sqrt();
        assert!((mean - 1.5).abs() < tol, "mean {mean}");
        assert!(env.values().iter().all(|&p| (1.0..=2.0).contains(&p)));
    }

    #[test]
    fn generation_is_deterministic() {
        let law = EnvironmentLaw::shift_coupled(0.5, 1.5, 4).unwrap();
        let a = Environment::generate(&law, 64, 11).unwrap();
        let b = Environment::generate(&law, 64, 11).unwrap();
        assert_eq!(a.values(), b.values());
        let c = Environment::generate(&law, 64, 12).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn shift_group_action() {
        let law = EnvironmentLaw::iid_uniform(1.0, 2.0).unwrap();
        let env = Environment::generate(&law, 10, 3).unwrap();
        assert_eq!(env.shift(0).values(), env.values());
        assert_eq!(env.shift(10).values(), env.values());
        assert_eq!(env.shift(3).shift(-7).values(), env.shift(-4).values());
        assert_eq!(env.shift(2).at(0), env.at(2));
        assert_eq!(env.shift(-1).at(0), env.at(9));
    }

    #[test]
    fn empty_lattice_rejected() {
        let law = EnvironmentLaw::homogeneous();
        assert!(matches!(Environment::generate(&law, 0, 0), Err(MediaError::EmptyLattice)));
    }

    #[test]
    fn bad_laws_rejected() {
        assert!(EnvironmentLaw::iid_uniform(0.0, 1.0).is_err());
        assert!(EnvironmentLaw::iid_uniform(2.0, 1.0).is_err());
        assert!(EnvironmentLaw::iid_density(1.0, 2.0, |_| 0.5).is_err());
        // Vanishes near a1: no mass in (a1 - eps, a1].
        assert!(EnvironmentLaw::iid_density(1.0, 2.0, |p| if p < 1.5 { 2.0 } else { 0.0 }).is_err());
        assert!(EnvironmentLaw::shift_coupled(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn marginal_rules_are_normalized_densities() {
        let laws = [
            EnvironmentLaw::iid_uniform(1.0, 2.0).unwrap(),
            EnvironmentLaw::shift_coupled(1.0, 2.0, 3).unwrap(),
            EnvironmentLaw::iid_density(1.0, 3.0, |p| 0.5625 * (p - 1.0) * (3.0 - p) + 0.125).unwrap(),
            EnvironmentLaw::iid_tabulated(1.0, 2.0, vec![1.0, 3.0, 1.0]).unwrap(),
        ];
        for law in &laws {
            let rule = law.marginal_rule(64);
            let total: f64 = rule.iter().map(|r| r.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
            // Mass of the full interval computed independently.
            assert!((law.marginal_mass(law.a0(), law.a1()) - 1.0).abs() < 1e-6, "{law:?}");
        }
        // Bates(3) mean is 1/2 -> p mean 1.5.
        let rule = laws[1].marginal_rule(64);
        let mean: f64 = rule.iter().map(|(p, w)| p * w).sum();
        assert!((mean - 1.5).abs() < 1e-12);
    }

    #[test]
    fn density_law_sampling_matches_marginal() {
        let law = EnvironmentLaw::iid_density(1.0, 3.0, |p| 0.5625 * (p - 1.0) * (3.0 - p) + 0.125).unwrap();
        let env = Environment::generate(&law, 50_000, 1).unwrap();
        let frac = env.values().iter().filter(|&&p| p < 1.5).count() as f64 / 5e4;
        let exact = law.marginal_mass(1.0, 1.5);
        assert!((frac - exact).abs() < 4.0 * (exact * (1.0 - exact) / 5e4).sqrt());
    }

    #[test]
    fn shift_coupled_stationarity_ks() {
        let law = EnvironmentLaw::shift_coupled(1.0, 2.0, 5).unwrap();
        let env = Environment::generate(&law, 20_000, 2024).unwrap();
        let first = &env.values()[..10_000];
        let shifted = env.shift(10_000);
        let d = ks_two_sample(first, &shifted.values()[..10_000]);
        assert!(d < ks_critical(1e-3, 10_000, 10_000), "KS {d}");
    }

    #[test]
    fn block_frequencies_concentrate_with_block_size() {
        let law = EnvironmentLaw::shift_coupled(1.0, 2.0, 4).unwrap();
        let env = Environment::generate(&law, 1 << 16, 8).unwrap();
        let target = law.marginal_mass(1.0, 1.4);
        let variance = |k: usize| {
            let blocks: Vec<f64> = env
                .values()
                .chunks_exact(k)
                .map(|c| c.iter().filter(|&&p| p <= 1.4).count() as f64 / k as f64)
                .collect();
            blocks.iter().map(|b| (b - target).powi(2)).sum::<f64>() / blocks.len() as f64
        };
        let v: Vec<f64> = [16, 64, 256, 1024].iter().map(|&k| variance(k)).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    }

    #[test]
    fn csv_roundtrip_shape() {
        let env = Environment::homogeneous(3);
        let mut buf = Vec::new();
        env.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "site,value\n0,1\n1,1\n2,1\n");
    }
}
