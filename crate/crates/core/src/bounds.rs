//! Closed-form bound evaluators so empirical traces can be overlaid on
//! theory.
//!
//! Consensus bounds carry their fully specified constants. The
//! optimization and generalization evaluators whose multiplicative
//! constants are only existential are *shape* evaluators: every
//! unspecified constant is fixed to 1 and the results are for trend
//! overlays only, never pass/fail decisions.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Inputs shared by every bound expression.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundInputs {
    pub mu: f64,
    pub l_smooth: f64,
    pub sigma_sq: f64,
    pub delta_sq: f64,
    pub lambda: f64,
    pub chi_sq: f64,
    /// Contraction constant of the aggregation rule (0 when attack-free).
    pub rho: f64,
    pub n_agents: usize,
    pub z_per_agent: usize,
    /// Step-size offset k0 (attack-free) or k1 (Byzantine-resilient).
    pub k_offset: u64,
    /// `||xbar_0 - x*_S||^2`
    pub init_dist_sq: f64,
}

/// `c1 = 24 (1 - lambda) / lambda^3`
pub fn c1(lambda: f64) -> f64 {
    24.0 * (1.0 - lambda) / (lambda * lambda * lambda)
}

/// `w = lambda - 8 rho sqrt(N)`, positive only while the contraction
/// condition `rho < lambda / (8 sqrt(N))` holds.
pub fn contraction_w(lambda: f64, rho: f64, n_agents: usize) -> f64 {
    lambda - 8.0 * rho * (n_agents as f64).sqrt()
}

/// `c2 = 96 (1 - w) / w^3`
pub fn c2(w: f64) -> f64 {
    96.0 * (1.0 - w) / (w * w * w)
}

/// Attack-free consensus-error bound
/// `c1 (sigma^2 + delta^2) / (mu^2 (k + k0)^2)`.
pub fn attack_free_consensus_bound(bi: &BoundInputs, k: u64) -> f64 {
    let kk = (k + bi.k_offset) as f64;
    c1(bi.lambda) * (bi.sigma_sq + bi.delta_sq) / (bi.mu * bi.mu * kk * kk)
}

/// Byzantine-resilient consensus-error bound
/// `c2 (sigma^2 + delta^2) / (mu^2 (k + k1)^2)`; fails when the
/// contraction margin is not positive.
pub fn byzantine_consensus_bound(bi: &BoundInputs, k: u64) -> Result<f64> {
    let w = contraction_w(bi.lambda, bi.rho, bi.n_agents);
    if w <= 0.0 {
        return Err(SimError::ContractionViolated { w });
    }
    let kk = (k + bi.k_offset) as f64;
    Ok(c2(w) * (bi.sigma_sq + bi.delta_sq) / (bi.mu * bi.mu * kk * kk))
}

/// Attack-free optimization-error bound: initialization, noise and
/// heterogeneity terms, with the heterogeneity constant instantiated at
/// its proof-level value `c1 L^2`.
pub fn attack_free_opt_bound(bi: &BoundInputs, k: u64) -> f64 {
    let k0 = bi.k_offset as f64;
    let t = (k as f64) + k0 - 1.0;
    let init = bi.l_smooth * (k0 - 1.0) / (2.0 * t) * bi.init_dist_sq;
    let noise = bi.l_smooth * bi.sigma_sq * t.ln() / (2.0 * bi.mu * bi.mu * bi.n_agents as f64 * t);
    let hetero = c1(bi.lambda) * bi.l_smooth * bi.l_smooth * (bi.sigma_sq + bi.delta_sq)
        / (bi.mu.powi(3) * t);
    init + noise + hetero
}

/// Byzantine-resilient optimization-error bound. Shape, constants = 1.
pub fn byzantine_opt_bound(bi: &BoundInputs, k: u64) -> Result<f64> {
    let w = contraction_w(bi.lambda, bi.rho, bi.n_agents);
    if w <= 0.0 {
        return Err(SimError::ContractionViolated { w });
    }
    let k1 = bi.k_offset as f64;
    let t = (k as f64) + k1 - 1.0;
    let noise_floorless = (bi.sigma_sq + bi.delta_sq) / t;
    let init = bi.l_smooth * (k1 - 1.0) * bi.init_dist_sq / (2.0 * t);
    let log_noise = 4.0 * bi.l_smooth * bi.sigma_sq * t.ln()
        / (bi.mu * bi.mu * bi.n_agents as f64 * t);
    let byz = byzantine_term(bi);
    Ok(noise_floorless + init + log_noise + byz / t + byz)
}

/// `(4 rho^2 N + chi^2)(sigma^2 + delta^2)` — the non-vanishing Byzantine
/// penalty.
pub fn byzantine_term(bi: &BoundInputs) -> f64 {
    (4.0 * bi.rho * bi.rho * bi.n_agents as f64 + bi.chi_sq) * (bi.sigma_sq + bi.delta_sq)
}

/// Attack-free generalization-error bound. Shape, constants = 1.
pub fn attack_free_gen_shape(bi: &BoundInputs) -> f64 {
    let nz = bi.mu * bi.n_agents as f64 * bi.z_per_agent as f64;
    (bi.init_dist_sq + bi.sigma_sq + bi.delta_sq) / nz
}

/// Byzantine-resilient generalization-error bound: the attack-free shape
/// plus the sample-size-independent Byzantine penalty. Shape,
/// constants = 1.
pub fn byzantine_gen_shape(bi: &BoundInputs) -> Result<f64> {
    let w = contraction_w(bi.lambda, bi.rho, bi.n_agents);
    if w <= 0.0 {
        return Err(SimError::ContractionViolated { w });
    }
    let nz = bi.mu * bi.n_agents as f64 * bi.z_per_agent as f64;
    Ok(attack_free_gen_shape(bi) + byzantine_term(bi) * (1.0 + 1.0 / nz))
}

/// No-cooperation generalization-error bound: single-agent terms plus the
/// local-vs-global discrepancy proxy. Shape, constants = 1.
pub fn no_cooperation_gen_shape(bi: &BoundInputs, phi_proxy: f64) -> f64 {
    let z = bi.mu * bi.z_per_agent as f64;
    (bi.init_dist_sq + bi.sigma_sq) / z + phi_proxy
}
