use std::collections::HashMap;

use super::DeviationsError;
use crate::equilibria::FugacityMaps;
use crate::kinetics::Configuration;
use crate::media::Environment;
use crate::profile::DensityProfile;
use crate::quadrature::composite_gauss_legendre;

/// Panels of the spatial rule; each panel carries `quad_nodes` points.
const PANELS: usize = 16;

/// Integrand of `h(γ|ρ)` at density `γ`:
/// `γ log(Φ(γ)/Φ(ρ)) − m[log(Z(Φ(γ)/p_0) / Z(Φ(ρ)/p_0))]`.
pub fn entropy_density(gamma: f64, rho: f64, maps: &FugacityMaps) -> Result<f64, DeviationsError> {
    if gamma == rho {
        return Ok(0.0);
    }
    let (pg, pr) = (maps.phi(gamma)?, maps.phi(rho)?);
    let first = if gamma == 0.0 { 0.0 } else { gamma * (pg / pr).ln() };
    let second = maps.expect_over_law(|p| Ok(maps.log_z(pg / p)? - maps.log_z(pr / p)?))?;
    Ok(first - second)
}

/// Static cost `h(γ|ρ) = ∫ entropy_density(γ(x), ρ) dx` over the interval
/// where `γ ≠ ρ`, by composite Gauss–Legendre with `quad_nodes` per panel.
/// The law expectation uses the maps' own rule.
pub fn entropy(
    profile: &DensityProfile,
    rho: f64,
    width: f64,
    maps: &FugacityMaps,
    quad_nodes: usize,
) -> Result<f64, DeviationsError> {
    let Some((a, b)) = profile.deviation_interval(width) else {
        return Ok(0.0);
    };
    if profile.background() != rho {
        return Err(DeviationsError::InvalidArgument(format!(
            "profile equals {} away from its bump, not ρ = {rho}",
            profile.background()
        )));
    }
    composite_gauss_legendre(quad_nodes, PANELS, a, b)
        .into_iter()
        .try_fold(0.0, |acc, (x, w)| Ok(acc + w * entropy_density(profile.value(x), rho, maps)?))
}

/// `h_γ^{p,N}(π^N|ρ) = ⟨π^N, log(Φ(γ)/Φ(ρ))⟩ − N⁻¹ Σ_x log[Z(Φ(γ(x/N))/p_x) / Z(Φ(ρ)/p_x)]`,
/// summed exactly; sites with `γ(x/N) = ρ` contribute nothing.
pub fn entropy_finite_n(
    config: &Configuration,
    env: &Environment,
    profile: &DensityProfile,
    rho: f64,
    maps: &FugacityMaps,
    scale: usize,
) -> Result<f64, DeviationsError> {
    if config.len() != env.len() {
        return Err(DeviationsError::GridMismatch(format!("{} sites vs environment of {}", config.len(), env.len())));
    }
    let phi_rho = maps.phi(rho)?;
    let mut phis: HashMap<u64, f64> = HashMap::new();
    let mut acc = 0.0;
    for x in 0..config.len() {
        let g = profile.value(x as f64 / scale as f64);
        if g == rho {
            continue;
        }
        let pg = match phis.get(&g.to_bits()) {
            Some(&v) => v,
            None => {
                let v = maps.phi(g)?;
                phis.insert(g.to_bits(), v);
                v
            }
        };
        let eta = config.get(x) as f64;
        if eta > 0.0 {
            acc += eta * (pg / phi_rho).ln();
        }
        let p = env.at(x);
        acc -= maps.log_z(pg / p)? - maps.log_z(phi_rho / p)?;
    }
    Ok(acc / scale as f64)
}
