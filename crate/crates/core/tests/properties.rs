use std::sync::Arc;

use proptest::prelude::*;
use zrp_core::equilibria::{FugacityMaps, RateFunction, TransitionKernel};
use zrp_core::fields::{superexp_field, BlockSums, CylinderObservable, PsiTildeCache, TestFunction};
use zrp_core::kinetics::{Configuration, SimulationState};
use zrp_core::media::{Environment, EnvironmentLaw};
use zrp_core::seeding::rng_from_seed;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 32, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn density_fugacity_round_trip(rho in 0.01f64..4.0, a0 in 0.5f64..1.5, spread in 0.0f64..2.0) {
        let law = EnvironmentLaw::iid_uniform(a0, a0 + spread).unwrap();
        let g = RateFunction::from_fn(1024, |k| (k as f64).sqrt()).unwrap();
        let maps = FugacityMaps::with_defaults(Arc::new(g), law).unwrap();
        prop_assume!(rho < maps.rho_max());
        let phi = maps.phi(rho).unwrap();
        prop_assert!((maps.r(phi).unwrap() - rho).abs() <= 1e-8 * rho.max(1.0));
    }

    #[test]
    fn block_sums_match_direct_sums(eta in prop::collection::vec(0u32..20, 5..60), x in 0usize..60, l in 0usize..10) {
        let len = eta.len();
        prop_assume!(2 * l < len);
        let x = x % len;
        let direct: u64 = (0..=2 * l).map(|d| eta[(x + len - l + d) % len] as u64).sum();
        prop_assert_eq!(BlockSums::new(&eta).sum(x, l).unwrap(), direct);
    }

    #[test]
    fn jumps_conserve_particles(
        eta in prop::collection::vec(0u32..6, 4..40),
        right in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        prop_assume!(eta.iter().any(|&e| e > 0));
        let len = eta.len();
        // Zero-mean kernel {+2: w, -1: 2w}, {+1, -1} for the rest.
        let w = right / 3.0;
        let kernel = TransitionKernel::new([(2, w), (-1, 2.0 * w), (1, (1.0 - 3.0 * w) / 2.0), (-1, (1.0 - 3.0 * w) / 2.0)]).unwrap();
        let law = EnvironmentLaw::iid_uniform(1.0, 3.0).unwrap();
        let env = Arc::new(Environment::generate(&law, len, seed).unwrap());
        let total: u64 = eta.iter().map(|&e| e as u64).sum();
        let mut s = SimulationState::new(
            Configuration::new(eta),
            env,
            Arc::new(RateFunction::linear(256)),
            Arc::new(kernel),
            len,
        ).unwrap();
        let mut rng = rng_from_seed(seed);
        for _ in 0..500 {
            s.step(&mut rng).unwrap();
        }
        prop_assert_eq!(s.config().total(), total);
        prop_assert_eq!(s.config().recount(), total);
        prop_assert!((s.rebuilt_total_rate().unwrap() - s.total_rate()).abs() <= 1e-9 * s.total_rate().max(1.0));
    }

    #[test]
    fn occupation_field_is_a_summation_by_parts(
        eta in prop::collection::vec(0u32..8, 32..33),
        center in 0.3f64..0.7,
        radius in 0.1f64..0.3,
    ) {
        let n = eta.len();
        let law = EnvironmentLaw::homogeneous();
        let maps = FugacityMaps::with_defaults(Arc::new(RateFunction::linear(256)), law).unwrap();
        let cache = PsiTildeCache::new(CylinderObservable::Occupation, &maps, 0);
        let h = TestFunction::bump(1.0, center, radius, 1.0).unwrap();
        let w = superexp_field(&eta, n, 0.1, &h, &CylinderObservable::Occupation, 0.0, &cache).unwrap();
        let l = 3;
        let hv = |x: usize| h.value(0.0, x as f64 / n as f64);
        let expected: f64 = (0..n)
            .map(|y| {
                let avg = (0..=2 * l).map(|d| hv((y + n - l + d) % n)).sum::<f64>() / (2 * l + 1) as f64;
                eta[y] as f64 * (hv(y) - avg)
            })
            .sum::<f64>()
            / n as f64;
        prop_assert!((w - expected).abs() < 1e-12);
    }
}
