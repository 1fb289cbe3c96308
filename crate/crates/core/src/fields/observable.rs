use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use super::FieldsError;
use crate::equilibria::{FugacityMaps, RateFunction};
use crate::seeding::{derive_rng, Stream};

type LocalFn = Arc<dyn Fn(&[u32]) -> f64 + Send + Sync>;

/// Product-state budget for exact `Ψ̃` summation; beyond it `Ψ̃` is
/// estimated by Monte Carlo.
pub const EXACT_STATE_LIMIT: f64 = 2e7;
const MC_SAMPLES: usize = 200_000;

/// Local function `Ψ(η(-k0), …, η(k0))`; `τ_xΨ` reads the window around `x`.
#[derive(Clone)]
pub enum CylinderObservable {
    /// `η(0)`.
    Occupation,
    /// `g(η(0))`.
    Rate(Arc<RateFunction>),
    /// `η(0)·η(1)`.
    PairProduct,
    Constant(f64),
    /// Arbitrary function of the `2·window + 1` occupations centered at 0.
    Custom {
        window: usize,
        lipschitz: Option<f64>,
        f: LocalFn,
    },
}

impl fmt::Debug for CylinderObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Occupation => f.write_str("Occupation"),
            Self::Rate(g) => write!(f, "Rate({:?})", g.tag()),
            Self::PairProduct => f.write_str("PairProduct"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Custom { window, .. } => write!(f, "Custom(window={window})"),
        }
    }
}

/// `Ψ̃(ρ)` with a Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiTilde {
    pub value: f64,
    pub std_error: f64,
}

impl CylinderObservable {
    pub fn custom<F>(window: usize, lipschitz: Option<f64>, f: F) -> Self
    where
        F: Fn(&[u32]) -> f64 + Send + Sync + 'static,
    {
        Self::Custom { window, lipschitz, f: Arc::new(f) }
    }

    /// Window radius `k0`.
    pub fn window(&self) -> usize {
        match self {
            Self::Occupation | Self::Rate(_) | Self::Constant(_) => 0,
            Self::PairProduct => 1,
            Self::Custom { window, .. } => *window,
        }
    }

    /// Lipschitz constant `c0` when `Ψ` is Lipschitz.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Self::Occupation => Some(1.0),
            Self::Rate(g) => Some(g.g_star()),
            Self::PairProduct => None,
            Self::Constant(_) => Some(0.0),
            Self::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// `Ψ` on a local window of length `2·k0 + 1` (index `k0` is the origin).
    pub fn eval_local(&self, local: &[u32]) -> f64 {
        let k0 = self.window();
        debug_assert_eq!(local.len(), 2 * k0 + 1);
        match self {
            Self::Occupation => local[0] as f64,
            Self::Rate(g) => g.rate(local[0]).unwrap_or(f64::NAN),
            Self::PairProduct => local[1] as f64 * local[2] as f64,
            Self::Constant(c) => *c,
            Self::Custom { f, .. } => f(local),
        }
    }

    /// `τ_xΨ(η)` on the periodic lattice.
    pub fn eval_at(&self, eta: &[u32], x: usize) -> f64 {
        let len = eta.len();
        match self {
            Self::Occupation => eta[x] as f64,
            Self::Rate(g) => g.rate(eta[x]).unwrap_or(f64::NAN),
            Self::PairProduct => eta[x] as f64 * eta[(x + 1) % len] as f64,
            Self::Constant(c) => *c,
            Self::Custom { window, f, .. } => {
                let k0 = *window as i64;
                let local: Vec<u32> = (-k0..=k0).map(|d| eta[(x as i64 + d).rem_euclid(len as i64) as usize]).collect();
                f(&local)
            }
        }
    }
}

/// Site marginal averaged over the environment: `q(k) = m[ν_{φ/p}(η(0)=k)]`.
fn mixed_marginal(maps: &FugacityMaps, phi: f64) -> Result<Vec<f64>, FieldsError> {
    let mut q: Vec<f64> = Vec::new();
    for &(p, w) in maps.marginal_rule() {
        let pmf = maps.series(phi / p)?.pmf();
        if pmf.len() > q.len() {
            q.resize(pmf.len(), 0.0);
        }
        for (k, v) in pmf.into_iter().enumerate() {
            q[k] += w * v;
        }
    }
    Ok(q)
}

/// `Ψ̃(ρ) = m[ν^p_{Φ(ρ)}(Ψ)]`.
///
/// `Ψ = η(0)` returns `ρ` (the defining identity `R∘Φ = id`, used exactly).
/// For i.i.d. environment laws the window law is the product of mixed
/// site marginals and is summed exactly when the product state space is
/// below [`EXACT_STATE_LIMIT`]. Otherwise, and for correlated laws, the
/// expectation is estimated from `2·10⁵` draws seeded by `mc_seed`.
pub fn psi_tilde(
    psi: &CylinderObservable,
    rho: f64,
    maps: &FugacityMaps,
    mc_seed: u64,
) -> Result<PsiTilde, FieldsError> {
    let exact = |value| Ok(PsiTilde { value, std_error: 0.0 });
    match psi {
        CylinderObservable::Occupation => return exact(rho),
        CylinderObservable::Constant(c) => return exact(*c),
        _ => {}
    }
    let phi = maps.phi(rho)?;
    let k0 = psi.window();
    if maps.law().is_iid() {
        let q = mixed_marginal(maps, phi)?;
        match psi {
            CylinderObservable::Rate(g) => {
                let mut v = 0.0;
                for (k, qk) in q.iter().enumerate() {
                    v += qk * g.get(k)?;
                }
                return exact(v);
            }
            CylinderObservable::PairProduct => {
                let mean: f64 = q.iter().enumerate().map(|(k, qk)| k as f64 * qk).sum();
                return exact(mean * mean);
            }
            _ => {}
        }
        let sites = 2 * k0 + 1;
        if (q.len() as f64).powi(sites as i32) <= EXACT_STATE_LIMIT {
            return exact(product_sum(psi, &q, sites));
        }
    }
    monte_carlo(psi, phi, maps, mc_seed)
}

fn product_sum(psi: &CylinderObservable, q: &[f64], sites: usize) -> f64 {
    let mut idx = vec![0u32; sites];
    let mut total = 0.0;
    loop {
        let w: f64 = idx.iter().map(|&k| q[k as usize]).product();
        if w > 0.0 {
            total += w * psi.eval_local(&idx);
        }
        let mut i = 0;
        loop {
            if i == sites {
                return total;
            }
            idx[i] += 1;
            if (idx[i] as usize) < q.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn monte_carlo(psi: &CylinderObservable, phi: f64, maps: &FugacityMaps, seed: u64) -> Result<PsiTilde, FieldsError> {
    let mut rng = derive_rng(seed, Stream::Quadrature, 0);
    let sites = 2 * psi.window() + 1;
    let mut local = vec![0u32; sites];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..MC_SAMPLES {
        let p = maps.law().sample_window(sites, &mut rng);
        for (slot, px) in local.iter_mut().zip(&p) {
            *slot = maps.series(phi / px)?.sample(&mut rng) as u32;
        }
        let v = psi.eval_local(&local);
        s1 += v;
        s2 += v * v;
    }
    let n = MC_SAMPLES as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(PsiTilde { value: mean, std_error: (var / n).sqrt() })
}

/// A function of the block density, evaluated from the integer block sum
/// and the block length so that caches can key on exact values.
pub trait BlockFunction: Sync {
    fn at_block(&self, sum: u64, len: usize) -> Result<f64, FieldsError>;
}

impl<F> BlockFunction for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn at_block(&self, sum: u64, len: usize) -> Result<f64, FieldsError> {
        Ok(self(sum as f64 / len as f64))
    }
}

/// Memoized `Ψ̃` at block densities `sum / len`.
pub struct PsiTildeCache<'a> {
    psi: CylinderObservable,
    maps: &'a FugacityMaps,
    seed: u64,
    values: RwLock<HashMap<(u64, usize), f64>>,
}

impl<'a> PsiTildeCache<'a> {
    pub fn new(psi: CylinderObservable, maps: &'a FugacityMaps, seed: u64) -> Self {
        Self { psi, maps, seed, values: RwLock::new(HashMap::new()) }
    }

    pub fn observable(&self) -> &CylinderObservable {
        &self.psi
    }
}

impl BlockFunction for PsiTildeCache<'_> {
    fn at_block(&self, sum: u64, len: usize) -> Result<f64, FieldsError> {
        if let CylinderObservable::Occupation = self.psi {
            return Ok(sum as f64 / len as f64);
        }
        if let Some(v) = self.values.read().expect("cache lock").get(&(sum, len)) {
            return Ok(*v);
        }
        let v = psi_tilde(&self.psi, sum as f64 / len as f64, self.maps, self.seed)?.value;
        self.values.write().expect("cache lock").insert((sum, len), v);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::EnvironmentLaw;

    fn maps() -> FugacityMaps {
        FugacityMaps::with_defaults(
            Arc::new(RateFunction::linear(1024)),
            EnvironmentLaw::iid_uniform(1.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn psi_tilde_examples() {
        let maps = maps();
        let occ = psi_tilde(&CylinderObservable::Occupation, 1.3, &maps, 0).unwrap();
        assert_eq!(occ.value, 1.3);
        let cst = psi_tilde(&CylinderObservable::Constant(4.5), 1.3, &maps, 0).unwrap();
        assert_eq!(cst.value, 4.5);
        // Φ(1)·∫₁² dp/p = (1/ln 2)·ln 2 = 1.
        let rate = CylinderObservable::Rate(maps.rate_arc());
        let v = psi_tilde(&rate, 1.0, &maps, 0).unwrap();
        assert!((v.value - 1.0).abs() < 1e-9, "{v:?}");
    }

    #[test]
    fn custom_observable_matches_closed_form() {
        let maps = maps();
        // η(-1) + η(1) has Ψ̃ = 2ρ; the product sum must recover it.
        let psi = CylinderObservable::custom(1, Some(1.0), |w| (w[0] + w[2]) as f64);
        let v = psi_tilde(&psi, 0.7, &maps, 0).unwrap();
        assert_eq!(v.std_error, 0.0);
        assert!((v.value - 1.4).abs() < 1e-9);
        // Pair product: (E η)² = ρ² for i.i.d. sites.
        let pair = psi_tilde(&CylinderObservable::PairProduct, 0.7, &maps, 0).unwrap();
        assert!((pair.value - 0.49).abs() < 1e-9);
    }

    #[test]
    fn correlated_law_uses_monte_carlo() {
        let maps = FugacityMaps::with_defaults(
            Arc::new(RateFunction::linear(1024)),
            EnvironmentLaw::shift_coupled(1.0, 2.0, 3).unwrap(),
        )
        .unwrap();
        let v = psi_tilde(&CylinderObservable::PairProduct, 1.0, &maps, 5).unwrap();
        assert!(v.std_error > 0.0);
        // Correlated p makes E[η(0)η(1)] ≥ ρ²; within MC error of at least 1.
        assert!(v.value > 1.0 - 4.0 * v.std_error, "{v:?}");
    }

    #[test]
    fn cache_returns_identical_values() {
        let maps = maps();
        let cache = PsiTildeCache::new(CylinderObservable::Rate(maps.rate_arc()), &maps, 0);
        let a = cache.at_block(7, 5).unwrap();
        let b = cache.at_block(7, 5).unwrap();
        assert_eq!(a, b);
        let direct = psi_tilde(cache.observable(), 1.4, &maps, 0).unwrap().value;
        assert_eq!(a, direct);
    }

    #[test]
    fn lipschitz_on_probed_pairs() {
        let g = Arc::new(RateFunction::from_fn(64, |k| (k as f64).sqrt()).unwrap());
        let psi = CylinderObservable::Rate(g);
        let c0 = psi.lipschitz().unwrap();
        for a in 0..20u32 {
            for b in 0..20u32 {
                let d = (psi.eval_local(&[a]) - psi.eval_local(&[b])).abs();
                assert!(d <= c0 * (a as f64 - b as f64).abs() + 1e-12);
            }
        }
    }
}
