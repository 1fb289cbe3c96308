//! Small statistical helpers shared by the Monte Carlo estimators.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One-sided 95% upper confidence limit on `p` after zero hits in `trials`.
pub fn rule_of_three(trials: u64) -> f64 {
    (3.0 / trials.max(1) as f64).min(1.0)
}

/// Result of a Pearson χ² goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    /// Pool independent tests by summing statistics and degrees of freedom.
    pub fn pooled(parts: &[ChiSquareResult]) -> ChiSquareResult {
        let statistic = parts.iter().map(|p| p.statistic).sum();
        let dof = parts.iter().map(|p| p.dof).sum();
        ChiSquareResult { statistic, dof, p_value: chi_square_sf(statistic, dof) }
    }
}

fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("dof > 0");
    dist.sf(statistic)
}

/// Pearson χ² of observed counts against a pmf (which may have mass beyond
/// `observed.len()`). Adjacent cells are merged from the right until every
/// expected count is at least `min_expected`.
pub fn chi_square_gof(observed: &[u64], pmf: &[f64], min_expected: f64) -> ChiSquareResult {
    let n: u64 = observed.iter().sum();
    let len = observed.len().max(pmf.len());
    let nf = n as f64;
    let mut cells: Vec<(f64, f64)> = (0..len)
        .map(|k| {
            let o = observed.get(k).copied().unwrap_or(0) as f64;
            let e = pmf.get(k).copied().unwrap_or(0.0) * nf;
            (o, e)
        })
        .collect();
    // Remaining probability mass (truncation) goes into the last cell.
    let mass: f64 = pmf.iter().sum();
    if let Some(last) = cells.last_mut() {
        last.1 += (1.0 - mass).max(0.0) * nf;
    }
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for c in cells {
        acc.0 += c.0;
        acc.1 += c.1;
        if acc.1 >= min_expected {
            merged.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => merged.push(acc),
        }
    }
    let statistic: f64 = merged.iter().filter(|c| c.1 > 0.0).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = merged.len().saturating_sub(1);
    ChiSquareResult { statistic, dof, p_value: chi_square_sf(statistic, dof) }
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
