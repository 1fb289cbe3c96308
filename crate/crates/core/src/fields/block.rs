use super::{BlockFunction, CylinderObservable, FieldsError, TestFunction};

/// Periodic prefix sums for `O(1)` block sums.
#[derive(Debug, Clone)]
pub struct BlockSums {
    prefix: Vec<u64>,
}

impl BlockSums {
    pub fn new(eta: &[u32]) -> Self {
        let mut prefix = Vec::with_capacity(eta.len() + 1);
        prefix.push(0);
        let mut acc = 0u64;
        for &e in eta {
            acc += e as u64;
            prefix.push(acc);
        }
        Self { prefix }
    }

    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self) -> u64 {
        self.prefix[self.len()]
    }

    /// `Σ_{|y-x| ≤ l} η(y)` with periodic indices.
    pub fn sum(&self, x: usize, l: usize) -> Result<u64, FieldsError> {
        let len = self.len();
        if 2 * l + 1 > len {
            return Err(FieldsError::BlockTooLarge { radius: l, len });
        }
        let start = (x + len - l % len) % len;
        let end = start + 2 * l + 1;
        Ok(if end <= len {
            self.prefix[end] - self.prefix[start]
        } else {
            self.total() - self.prefix[start] + self.prefix[end - len]
        })
    }

    /// `η^l(x)`.
    pub fn average(&self, x: usize, l: usize) -> Result<f64, FieldsError> {
        Ok(self.sum(x, l)? as f64 / (2 * l + 1) as f64)
    }
}

/// Macroscopic block radius `⌊εN⌋`.
pub fn macro_radius(eps: f64, n: usize) -> Result<usize, FieldsError> {
    let r = (eps * n as f64 + 1e-9).floor();
    if !(r >= 1.0) {
        return Err(FieldsError::InvalidArgument(format!("eps*N = {} < 1", eps * n as f64)));
    }
    Ok(r as usize)
}

/// `N⁻¹ Σ_x f(x/N) η(x)`.
pub fn empirical_pairing_with<F: Fn(f64) -> f64>(eta: &[u32], n: usize, f: F) -> f64 {
    let nf = n as f64;
    eta.iter().enumerate().filter(|(_, &e)| e > 0).map(|(x, &e)| f(x as f64 / nf) * e as f64).sum::<f64>() / nf
}

/// `⟨π^N, H_t⟩ = N⁻¹ Σ_x H(t, x/N) η(x)`.
pub fn empirical_pairing(eta: &[u32], n: usize, h: &TestFunction, t: f64) -> f64 {
    empirical_pairing_with(eta, n, |u| h.value(t, u))
}

/// `η^l(x) = (2l+1)⁻¹ Σ_{|y-x| ≤ l} η(y)`.
pub fn block_average(eta: &[u32], x: usize, l: usize) -> Result<f64, FieldsError> {
    let len = eta.len();
    if 2 * l + 1 > len {
        return Err(FieldsError::BlockTooLarge { radius: l, len });
    }
    let sum: u64 = (0..=2 * l).map(|d| eta[(x + len - l + d) % len] as u64).sum();
    Ok(sum as f64 / (2 * l + 1) as f64)
}

/// One-block field `(2l+1)⁻¹ Σ_{|y-x| ≤ l} τ_yΨ(η) - Ψ̃(η^l(x))`.
pub fn one_block_field(
    eta: &[u32],
    psi: &CylinderObservable,
    x: usize,
    l: usize,
    psi_tilde: &dyn BlockFunction,
) -> Result<f64, FieldsError> {
    let len = eta.len();
    if 2 * l + 1 > len {
        return Err(FieldsError::BlockTooLarge { radius: l, len });
    }
    let width = 2 * l + 1;
    let mut sum_psi = 0.0;
    let mut sum_eta = 0u64;
    for d in 0..width {
        let y = (x + len - l + d) % len;
        sum_psi += psi.eval_at(eta, y);
        sum_eta += eta[y] as u64;
    }
    Ok(sum_psi / width as f64 - psi_tilde.at_block(sum_eta, width)?)
}

/// `W_{N,ε}^{H,Ψ}(t, η) = N⁻¹ Σ_x H(t, x/N)[τ_xΨ(η) - Ψ̃(η^{⌊εN⌋}(x))]`.
///
/// Only sites where `H(t, ·)` is nonzero are visited.
pub fn superexp_field(
    eta: &[u32],
    n: usize,
    eps: f64,
    h: &TestFunction,
    psi: &CylinderObservable,
    t: f64,
    psi_tilde: &dyn BlockFunction,
) -> Result<f64, FieldsError> {
    let l = macro_radius(eps, n)?;
    let sums = BlockSums::new(eta);
    superexp_field_with_sums(eta, &sums, n, l, h, psi, t, psi_tilde)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn superexp_field_with_sums(
    eta: &[u32],
    sums: &BlockSums,
    n: usize,
    l: usize,
    h: &TestFunction,
    psi: &CylinderObservable,
    t: f64,
    psi_tilde: &dyn BlockFunction,
) -> Result<f64, FieldsError> {
    let width = 2 * l + 1;
    if width > eta.len() {
        return Err(FieldsError::BlockTooLarge { radius: l, len: eta.len() });
    }
    let nf = n as f64;
    let mut acc = 0.0;
    for x in 0..eta.len() {
        let hx = h.value(t, x as f64 / nf);
        if hx == 0.0 {
            continue;
        }
        acc += hx * (psi.eval_at(eta, x) - psi_tilde.at_block(sums.sum(x, l)?, width)?);
    }
    Ok(acc / nf)
}

/// `|η^{⌊εN⌋}(x) - η^l(x)|`.
pub fn two_block_discrepancy(eta: &[u32], x: usize, l: usize, eps: f64, n: usize) -> Result<f64, FieldsError> {
    let big = macro_radius(eps, n)?;
    let sums = BlockSums::new(eta);
    Ok((sums.average(x, big)? - sums.average(x, l)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::RateFunction;
    use crate::fields::{SpatialShape, Term};
    use std::sync::Arc;

    #[test]
    fn block_average_examples() {
        assert_eq!(block_average(&[1, 2, 3], 1, 1).unwrap(), 2.0);
        assert_eq!(block_average(&[4, 0, 9, 1], 2, 0).unwrap(), 9.0);
        assert_eq!(block_average(&[3; 11], 4, 5).unwrap(), 3.0);
        assert!(matches!(block_average(&[1, 2, 3], 0, 2), Err(FieldsError::BlockTooLarge { .. })));
        // Wraparound agrees with prefix sums.
        let eta = [5, 0, 2, 7, 1, 1, 3];
        let s = BlockSums::new(&eta);
        for x in 0..eta.len() {
            for l in 0..=3 {
                assert_eq!(s.average(x, l).unwrap(), block_average(&eta, x, l).unwrap());
            }
        }
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(empirical_pairing_with(&[0; 10], 10, |_| 1.0), 0.0);
        assert_eq!(empirical_pairing_with(&[1, 4, 0, 2], 4, |_| 1.0), 7.0 / 4.0);
        // η ≡ c against a bump: Riemann sum of c·∫H.
        let h = TestFunction::bump(1.0, 0.5, 0.25, 1.0).unwrap();
        let n = 4000;
        let v = empirical_pairing(&vec![2; n], n, &h, 0.0);
        let exact: f64 =
            crate::quadrature::gauss_legendre(64, 0.25, 0.75).iter().map(|&(u, w)| w * h.value(0.0, u)).sum();
        assert!((v - 2.0 * exact).abs() < 1e-6);
    }

    #[test]
    fn one_block_occupation_identically_zero() {
        let eta = [0, 3, 1, 7, 2, 0, 0, 4, 9, 1];
        for x in 0..eta.len() {
            for l in 0..=4 {
                let w = one_block_field(&eta, &CylinderObservable::Occupation, x, l, &|r: f64| r).unwrap();
                assert_eq!(w, 0.0);
            }
        }
        let c = one_block_field(&eta, &CylinderObservable::Constant(2.5), 3, 2, &|_: f64| 2.5);
        assert_eq!(c.unwrap(), 0.0);
    }

    #[test]
    fn superexp_hand_value() {
        // L = 4, N = 4, ε = 0.25 → l = 1; H(u) = piecewise values via a custom shape.
        let hv = [0.0, 1.0, -2.0, 0.5];
        let shape = SpatialShape::custom((0.0, 1.0), move |u| [hv[((u * 4.0).round() as usize).min(3)], 0.0, 0.0]);
        let h = TestFunction::new(vec![Term::stationary(1.0, shape)], 1.0).unwrap();
        let eta = [2u32, 0, 3, 1];
        let g = Arc::new(RateFunction::linear(16));
        let psi = CylinderObservable::Rate(g);
        let tilde = |r: f64| r * r;
        // Block sums: x=1: 2+0+3 = 5, x=2: 0+3+1 = 4, x=3: 3+1+2 = 6.
        let expected = (1.0 * (0.0 - (5.0f64 / 3.0).powi(2))
            + -2.0 * (3.0 - (4.0f64 / 3.0).powi(2))
            + 0.5 * (1.0 - 2.0f64.powi(2)))
            / 4.0;
        let w = superexp_field(&eta, 4, 0.25, &h, &psi, 0.0, &tilde).unwrap();
        assert!((w - expected).abs() < 1e-14, "{w} vs {expected}");
    }

    #[test]
    fn superexp_trivial_cases() {
        let eta = [3u32; 32];
        let h = TestFunction::bump(1.0, 0.5, 0.3, 1.0).unwrap();
        let occ = CylinderObservable::Occupation;
        assert_eq!(superexp_field(&eta, 32, 0.1, &h, &occ, 0.0, &|r: f64| r).unwrap(), 0.0);
        let zero = TestFunction::zero(1.0);
        let eta2 = [0u32, 5, 1, 2, 8, 0, 0, 1];
        assert_eq!(superexp_field(&eta2, 8, 0.2, &zero, &occ, 0.0, &|r: f64| r).unwrap(), 0.0);
        assert!(superexp_field(&eta2, 8, 0.05, &h, &occ, 0.0, &|r: f64| r).is_err());
    }

    #[test]
    fn two_block_trivial_cases() {
        assert_eq!(two_block_discrepancy(&[4; 64], 10, 3, 0.25, 32).unwrap(), 0.0);
        let eta: Vec<u32> = (0..64).map(|i| (i * 7 % 5) as u32).collect();
        assert_eq!(two_block_discrepancy(&eta, 5, 8, 0.25, 32).unwrap(), 0.0);
    }
}
