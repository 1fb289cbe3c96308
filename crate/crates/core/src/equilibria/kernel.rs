use rand::Rng;

use super::EquilibriaError;

/// Finite-range translation-invariant jump law `T(y)` on `ℤ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    jumps: Vec<(i64, f64)>,
    cumulative: Vec<f64>,
    mean: f64,
    variance: f64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl TransitionKernel {
    /// Build from `(displacement, probability)` pairs. Duplicate
    /// displacements are merged and zero weights dropped; the weights must
    /// be nonnegative and sum to 1 within `1e-12`.
    pub fn new<I>(weights: I) -> Result<Self, EquilibriaError>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        let mut jumps: Vec<(i64, f64)> = Vec::new();
        for (y, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(EquilibriaError::InvalidKernel(format!("weight {w} at {y}")));
            }
            match jumps.iter_mut().find(|(z, _)| *z == y) {
                Some(entry) => entry.1 += w,
                None => jumps.push((y, w)),
            }
        }
        jumps.retain(|&(_, w)| w > 0.0);
        jumps.sort_by_key(|&(y, _)| y);
        if jumps.is_empty() {
            return Err(EquilibriaError::InvalidKernel("empty support".into()));
        }
        let total: f64 = jumps.iter().map(|j| j.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EquilibriaError::InvalidKernel(format!("weights sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = jumps
            .iter()
            .map(|&(_, w)| {
                acc += w;
                acc
            })
            .collect();
        let mean = jumps.iter().map(|&(y, w)| y as f64 * w).sum();
        let variance = jumps.iter().map(|&(y, w)| (y * y) as f64 * w).sum();
        Ok(Self { jumps, cumulative, mean, variance })
    }

    /// `T(±1) = 1/2`.
    pub fn nearest_neighbor() -> Self {
        Self::new([(-1, 0.5), (1, 0.5)]).expect("valid kernel")
    }

    pub fn jumps(&self) -> &[(i64, f64)] {
        &self.jumps
    }

    pub fn weight(&self, y: i64) -> f64 {
        self.jumps.iter().find(|j| j.0 == y).map_or(0.0, |j| j.1)
    }

    /// `Σ y T(y)`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `σ = Σ y² T(y)`.
    pub fn sigma(&self) -> f64 {
        self.variance
    }

    /// Smallest `A` with `T(y) = 0` for `|y| >= A`.
    pub fn range(&self) -> i64 {
        self.jumps.iter().map(|j| j.0.abs()).max().unwrap_or(0) + 1
    }

    /// The support generates `ℤ` as a group (gcd of offsets is 1) and
    /// contains jumps in both directions.
    pub fn is_irreducible(&self) -> bool {
        let g = self.jumps.iter().fold(0u64, |acc, j| gcd(acc, j.0.unsigned_abs()));
        let left = self.jumps.iter().any(|j| j.0 < 0);
        let right = self.jumps.iter().any(|j| j.0 > 0);
        g == 1 && left && right
    }

    /// Displacement for a uniform `u ∈ [0, 1)`.
    #[inline]
    pub fn displacement_for(&self, u: f64) -> i64 {
        let total = *self.cumulative.last().expect("nonempty");
        let target = u * total;
        let i = self.cumulative.partition_point(|&c| c <= target).min(self.jumps.len() - 1);
        self.jumps[i].0
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.displacement_for(rng.random())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let t = TransitionKernel::nearest_neighbor();
        assert_eq!(t.mean(), 0.0);
        assert_eq!(t.sigma(), 1.0);
        assert_eq!(t.range(), 2);
        let t = TransitionKernel::new([(2, 1.0 / 3.0), (-1, 2.0 / 3.0)]).unwrap();
        assert!(t.mean().abs() < 1e-15);
        assert!((t.sigma() - 2.0).abs() < 1e-15);
        assert_eq!(t.range(), 3);
        assert!(t.is_irreducible());
    }

    #[test]
    fn irreducibility() {
        assert!(!TransitionKernel::new([(2, 0.5), (-2, 0.5)]).unwrap().is_irreducible());
        assert!(!TransitionKernel::new([(1, 1.0)]).unwrap().is_irreducible());
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(TransitionKernel::new([(1, 0.5)]).is_err());
        assert!(TransitionKernel::new([(1, -0.5), (-1, 1.5)]).is_err());
        assert!(TransitionKernel::new(Vec::<(i64, f64)>::new()).is_err());
    }

    #[test]
    fn sampling_by_inverse_cdf() {
        let t = TransitionKernel::new([(2, 0.25), (-1, 0.75)]).unwrap();
        assert_eq!(t.displacement_for(0.0), -1);
        assert_eq!(t.displacement_for(0.74), -1);
        assert_eq!(t.displacement_for(0.76), 2);
        assert_eq!(t.displacement_for(0.999_999), 2);
    }
}
