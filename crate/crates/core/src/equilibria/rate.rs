use serde::{Deserialize, Serialize};

use super::EquilibriaError;

/// Closed-form family a rate function was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateTag {
    /// `g(k) = k` (independent walkers).
    Linear,
    /// `g(k) = 1{k >= 1}`.
    Constant,
    Custom,
}

/// Jump-rate function `g : ℕ → ℝ₊`, tabulated on `0..=depth`.
///
/// Accessing an occupation beyond the tabulated depth is an error; values
/// are never extrapolated.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    tag: RateTag,
    values: Vec<f64>,
    log_factorial: Vec<f64>,
    g_star: f64,
}

impl RateFunction {
    pub const DEFAULT_DEPTH: usize = 1024;

    pub fn linear(depth: usize) -> Self {
        Self::build(RateTag::Linear, (0..=depth).map(|k| k as f64).collect()).expect("linear rate is valid")
    }

    pub fn constant(depth: usize) -> Self {
        Self::build(RateTag::Constant, (0..=depth).map(|k| if k == 0 { 0.0 } else { 1.0 }).collect())
            .expect("constant rate is valid")
    }

    /// Tabulate `f` on `0..=depth` as a custom rate.
    pub fn from_fn<F: Fn(usize) -> f64>(depth: usize, f: F) -> Result<Self, EquilibriaError> {
        Self::build(RateTag::Custom, (0..=depth).map(f).collect())
    }

    /// Use `values[k] = g(k)` directly; the depth is `values.len() - 1`.
    pub fn from_table(values: Vec<f64>) -> Result<Self, EquilibriaError> {
        Self::build(RateTag::Custom, values)
    }

    fn build(tag: RateTag, values: Vec<f64>) -> Result<Self, EquilibriaError> {
        if values.len() < 2 || values[0] != 0.0 {
            return Err(EquilibriaError::InvalidRate(0));
        }
        if let Some(k) = values.iter().skip(1).position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(EquilibriaError::InvalidRate(k + 1));
        }
        let mut log_factorial = Vec::with_capacity(values.len());
        log_factorial.push(0.0);
        for k in 1..values.len() {
            log_factorial.push(log_factorial[k - 1] + values[k].ln());
        }
        let g_star = values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        Ok(Self { tag, values, log_factorial, g_star })
    }

    pub fn tag(&self) -> RateTag {
        self.tag
    }

    /// Largest tabulated occupation `K_max`.
    pub fn depth(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, k: usize) -> Result<f64, EquilibriaError> {
        self.values.get(k).copied().ok_or(EquilibriaError::BeyondDepth { k, depth: self.depth() })
    }

    /// `g(k)` without bounds reporting; `None` past the tabulated depth.
    #[inline]
    pub fn rate(&self, k: u32) -> Option<f64> {
        self.values.get(k as usize).copied()
    }

    /// `log g(k)!`.
    pub fn log_factorial(&self, k: usize) -> Result<f64, EquilibriaError> {
        self.log_factorial.get(k).copied().ok_or(EquilibriaError::BeyondDepth { k, depth: self.depth() })
    }

    /// Probed `g* = max_{k < K_max} |g(k+1) - g(k)|`.
    pub fn g_star(&self) -> f64 {
        self.g_star
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let g = RateFunction::linear(10);
        assert_eq!(g.get(7).unwrap(), 7.0);
        assert_eq!(g.g_star(), 1.0);
        assert!((g.log_factorial(5).unwrap() - 120f64.ln()).abs() < 1e-12);
        let c = RateFunction::constant(10);
        assert_eq!(c.get(0).unwrap(), 0.0);
        assert_eq!(c.get(9).unwrap(), 1.0);
        assert_eq!(c.log_factorial(9).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_tables() {
        assert_eq!(RateFunction::from_table(vec![1.0, 1.0]), Err(EquilibriaError::InvalidRate(0)));
        assert_eq!(RateFunction::from_table(vec![0.0, 1.0, 0.0]), Err(EquilibriaError::InvalidRate(2)));
    }

    #[test]
    fn no_extrapolation_past_depth() {
        let g = RateFunction::from_fn(4, |k| (k as f64).sqrt()).unwrap();
        assert_eq!(g.depth(), 4);
        assert_eq!(g.get(5), Err(EquilibriaError::BeyondDepth { k: 5, depth: 4 }));
        assert_eq!(g.rate(5), None);
        assert_eq!(g.tag(), RateTag::Custom);
    }
}
