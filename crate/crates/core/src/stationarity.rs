//! Moreau envelope stationarity: `‖∇f_{1/ρ}(x)‖ = ρ‖x − prox_{f/ρ}(x)‖`
//! for the full empirical objective.

use crate::linalg::dist;
use crate::models::ModelKind;
use crate::problems::{ProblemInstance, Sample};
use crate::prox::{prox_spp_batch, ProxRequest};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_INNER: usize = 100_000;

/// The empirical objective `f = (1/n) Σ |c_i|` with its weak convexity.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveOracle<'a> {
    instance: &'a ProblemInstance,
    all: &'a [usize],
    mu: f64,
}

/// Weak convexity modulus of one loss term: zero when `|c|` is convex.
pub fn sample_weak_convexity(s: &Sample) -> f64 {
    match s {
        // ⟨a,x⟩² − b ≥ 0 everywhere when b ≤ 0
        Sample::Quadratic { b, .. } if *b <= 0.0 => 0.0,
        _ => s.curvature(),
    }
}

impl<'a> ObjectiveOracle<'a> {
    /// `all` must list every sample index, typically `(0..n)`.
    pub fn new(instance: &'a ProblemInstance, all: &'a [usize]) -> Result<Self> {
        instance.check_batch(all)?;
        let mu = instance.samples.iter().map(sample_weak_convexity).fold(0.0, f64::max);
        Ok(ObjectiveOracle { instance, all, mu })
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::InvalidParameter(format!("mu = {mu}")));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.instance.var_dim()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn instance(&self) -> &'a ProblemInstance {
        self.instance
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.instance.batch_loss(self.all, x)
    }
}

/// Outcome of the inner solve behind [`moreau_prox`].
#[derive(Debug, Clone, PartialEq)]
pub struct MoreauProx {
    pub point: Vec<f64>,
    pub inner_iters: usize,
    pub converged: bool,
    /// Length of the final prox-linear step.
    pub last_step: f64,
    /// Bound on the min-norm subgradient of `f + (ρ/2)‖· − x‖²` at
    /// `point`: the proximal and linearization terms of the last inner
    /// step move it by at most `2τ·last_step`.
    pub certificate: f64,
}

/// `x̂ = argmin_y f(y) + (ρ/2)‖y − x‖²` with its solver diagnostics.
pub fn moreau_prox_detailed(oracle: &ObjectiveOracle, x: &[f64], rho: f64, tol: f64) -> Result<MoreauProx> {
    if !(rho > oracle.mu) {
        return Err(Error::NotStronglyConvex { rho, mu: oracle.mu });
    }
    let req = ProxRequest::new(ModelKind::Full, oracle.instance, oracle.all, x, x, rho)
        .with_tol(tol)
        .with_max_inner(DEFAULT_MAX_INNER);
    let tau = req.batch_lambda();
    let res = prox_spp_batch(&req)?;
    Ok(MoreauProx {
        point: res.x_plus,
        inner_iters: res.inner_iters,
        converged: res.converged,
        last_step: res.residual,
        certificate: 2.0 * tau * res.residual,
    })
}

/// `prox_{f/ρ}(x)`; fails with [`Error::NotConverged`] if the inner loop
/// hits its cap.
pub fn moreau_prox(oracle: &ObjectiveOracle, x: &[f64], rho: f64, tol: f64) -> Result<Vec<f64>> {
    let p = moreau_prox_detailed(oracle, x, rho, tol)?;
    if !p.converged {
        return Err(Error::NotConverged {
            iters: p.inner_iters,
            residual: p.last_step,
        });
    }
    Ok(p.point)
}

/// `ρ‖x − prox_{f/ρ}(x)‖`.
pub fn moreau_grad_norm(oracle: &ObjectiveOracle, x: &[f64], rho: f64, tol: f64) -> Result<f64> {
    let p = moreau_prox(oracle, x, rho, tol)?;
    Ok(rho * dist(x, &p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemKind;

    fn scalar(kind: ProblemKind, b: f64) -> ProblemInstance {
        let s = match kind {
            ProblemKind::PhaseRetrieval => Sample::Quadratic { a: vec![1.0], b },
            _ => Sample::Linear { a: vec![1.0], b },
        };
        ProblemInstance::new(kind, 1, vec![s]).unwrap()
    }

    #[test]
    fn soft_threshold() {
        let inst = scalar(ProblemKind::AbsoluteDeviation, 0.0);
        let oracle = ObjectiveOracle::new(&inst, &[0]).unwrap();
        let p = moreau_prox(&oracle, &[3.0], 1.0, DEFAULT_TOL).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-12);
        assert!((moreau_grad_norm(&oracle, &[3.0], 1.0, DEFAULT_TOL).unwrap() - 1.0).abs() < 1e-12);
        assert!(moreau_grad_norm(&oracle, &[0.0], 1.0, DEFAULT_TOL).unwrap() < 1e-12);
    }

    #[test]
    fn quadratic() {
        let inst = scalar(ProblemKind::PhaseRetrieval, 0.0);
        let oracle = ObjectiveOracle::new(&inst, &[0]).unwrap();
        assert_eq!(oracle.mu(), 0.0);
        let p = moreau_prox_detailed(&oracle, &[3.0], 1.0, 1e-10).unwrap();
        assert!(p.converged);
        assert!((p.point[0] - 1.0).abs() < 1e-8, "{:?}", p);
        let g = moreau_grad_norm(&oracle, &[3.0], 1.0, 1e-10).unwrap();
        assert!((g - 2.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_weak_rho() {
        let inst = scalar(ProblemKind::PhaseRetrieval, 1.0);
        let oracle = ObjectiveOracle::new(&inst, &[0]).unwrap();
        assert_eq!(oracle.mu(), 2.0);
        assert!(matches!(
            moreau_prox(&oracle, &[3.0], 2.0, 1e-8),
            Err(Error::NotStronglyConvex { .. })
        ));
        assert!(moreau_prox(&oracle, &[3.0], 2.5, 1e-8).is_ok());
    }

    #[test]
    fn consistency() {
        let inst = scalar(ProblemKind::PhaseRetrieval, 1.0);
        let oracle = ObjectiveOracle::new(&inst, &[0]).unwrap();
        let x = [1.7];
        let rho = 5.0;
        let p = moreau_prox(&oracle, &x, rho, 1e-10).unwrap();
        let g = moreau_grad_norm(&oracle, &x, rho, 1e-10).unwrap();
        assert_eq!(rho * dist(&x, &p), g);
        // argmin |y² − 1| + (5/2)(y − 1.7)² sits on the smooth piece y > 1:
        // 2y + 5(y − 1.7) = 0
        assert!((p[0] - 8.5 / 7.0).abs() < 1e-8);
    }
}
