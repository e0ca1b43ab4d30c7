//! Stepsize rules.

use crate::{Error, Result};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `γ = max{ρ + τ, λ + √K/(α0√m)}`.
pub fn stepsize_theory_smod(k: usize, m: usize, rho: f64, tau: f64, lambda: f64, alpha0: f64) -> Result<f64> {
    check_positive("alpha0", alpha0)?;
    if rho <= lambda + tau {
        return Err(Error::InvalidParameter(format!(
            "rho = {rho} must exceed lambda + tau = {}",
            lambda + tau
        )));
    }
    let eta = (k as f64).sqrt() / (alpha0 * (m as f64).sqrt());
    Ok((rho + tau).max(lambda + eta))
}

/// `γ = γ0 θ⁻¹ √K + λ + ρ β² θ⁻³` with `θ = 1 − β`.
pub fn stepsize_theory_semod(k: usize, beta: f64, lambda: f64, rho: f64, gamma0: f64) -> f64 {
    let theta = 1.0 - beta;
    gamma0 * (k as f64).sqrt() / theta + lambda + rho * beta * beta / theta.powi(3)
}

/// `γ = γ0 √(K/m) + θ⁻² ζ + λ` with
/// `ζ = 2θ(ρ + λβ + τ) + τ + 2ρβ²θ⁻¹`.
pub fn stepsize_theory_semod_mb(
    k: usize,
    m: usize,
    beta: f64,
    lambda: f64,
    tau: f64,
    rho: f64,
    gamma0: f64,
) -> f64 {
    let theta = 1.0 - beta;
    let zeta = 2.0 * theta * (rho + lambda * beta + tau) + tau + 2.0 * rho * beta * beta / theta;
    gamma0 * (k as f64 / m as f64).sqrt() + zeta / (theta * theta) + lambda
}

/// `γ = α0⁻¹ √(K/m)`.
pub fn stepsize_experiment(alpha0: f64, k: usize, m: usize) -> Result<f64> {
    check_positive("alpha0", alpha0)?;
    Ok((k as f64 / m as f64).sqrt() / alpha0)
}

/// `γ0 = √(ρ/(Δθ))·L`, where `Δ` estimates `f_{1/ρ}(x¹) − min f`.
pub fn optimal_gamma0(rho: f64, delta: f64, theta: f64, lipschitz: f64) -> Result<f64> {
    check_positive("delta", delta)?;
    check_positive("theta", theta)?;
    Ok((rho / (delta * theta)).sqrt() * lipschitz)
}

/// One step of the accelerated schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NesterovStep {
    pub theta: f64,
    pub gamma: f64,
    /// `Γ_k = (k+1)(k+2)/2`.
    pub big_gamma: f64,
}

/// Base weight `γ = 2τ + η` with `η = 2L/(√(3m)·D̃)·(K+2)^{3/2}`.
pub fn nesterov_base_gamma(m: usize, k_total: usize, tau: f64, lipschitz: f64, d_tilde: f64) -> Result<f64> {
    check_positive("d_tilde", d_tilde)?;
    check_positive("L", lipschitz)?;
    let eta = 2.0 * lipschitz / ((3.0 * m as f64).sqrt() * d_tilde) * (k_total as f64 + 2.0).powf(1.5);
    Ok(2.0 * tau + eta)
}

/// `θ_k = 2/(k+2)`, `γ_k = γ/(k+1)`, `Γ_k = (k+1)(k+2)/2`.
pub fn nesterov_schedule(
    k: usize,
    m: usize,
    k_total: usize,
    tau: f64,
    lipschitz: f64,
    d_tilde: f64,
) -> Result<NesterovStep> {
    let base = nesterov_base_gamma(m, k_total, tau, lipschitz, d_tilde)?;
    Ok(nesterov_step(k, base))
}

pub(crate) fn nesterov_step(k: usize, base: f64) -> NesterovStep {
    let kf = k as f64;
    NesterovStep {
        theta: 2.0 / (kf + 2.0),
        gamma: base / (kf + 1.0),
        big_gamma: (kf + 1.0) * (kf + 2.0) / 2.0,
    }
}
