//! Replace-one-sample perturbation of the stochastic proximal map.
//!
//! For a batch `B` of size `m` and `B_(i)` equal to `B` with its `i`-th
//! sample swapped for an independent draw `ξ'`, the proximal outputs obey
//! `‖ŷ_i − ŷ‖ ≤ 2L/(m(γ − λ))` whenever every model in `B ∪ {ξ'}` is
//! `L`-Lipschitz. The losses here have no global `L`, so each trial
//! certifies `L` a posteriori on the realized batch: exactly for the linear
//! and prox-linear models, and on the segment `[ŷ, ŷ_i]` for the full
//! model, where `‖∇c‖` peaks at an endpoint.

use rand::Rng as _;
use rayon::prelude::*;

use crate::linalg::dist;
use crate::models::{batch_model_value, model_lipschitz, model_lipschitz_segment, ModelKind};
use crate::problems::ProblemInstance;
use crate::prox::{prox_step, ProxRequest};
use crate::rng::{derive_seed, stream, Stream};
use crate::{Error, Result};

/// Duality gap target for the prox solves of the lab.
pub const LAB_PROX_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replacement {
    /// `ξ'` drawn uniformly from the sample set.
    Iid,
    /// `ξ'` equal to the replaced sample.
    Identical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTrial {
    pub kind: ModelKind,
    pub gamma: f64,
    pub lambda: f64,
    pub m: usize,
    pub batch: Vec<usize>,
    /// Position in the batch that gets replaced, `0..m`.
    pub position: usize,
    /// Sample index of `ξ'`.
    pub replacement: usize,
    pub distance: f64,
    pub lipschitz: f64,
    pub bound: f64,
    /// False when a prox solve did not converge; such trials are excluded.
    pub valid: bool,
}

impl StabilityTrial {
    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.distance / self.bound
        } else if self.distance == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn weak_convexity(kind: ModelKind, inst: &ProblemInstance, idx: &[usize]) -> f64 {
    match kind {
        ModelKind::Full => idx.iter().map(|&i| inst.samples[i].curvature()).fold(0.0, f64::max),
        _ => 0.0,
    }
}

/// One replace-one trial with `ξ'` drawn i.i.d.
pub fn stability_trial(
    instance: &ProblemInstance,
    kind: ModelKind,
    z: &[f64],
    y: &[f64],
    gamma: f64,
    m: usize,
    seed: u64,
) -> Result<StabilityTrial> {
    stability_trial_with(instance, kind, z, y, gamma, m, seed, Replacement::Iid)
}

#[allow(clippy::too_many_arguments)]
pub fn stability_trial_with(
    instance: &ProblemInstance,
    kind: ModelKind,
    z: &[f64],
    y: &[f64],
    gamma: f64,
    m: usize,
    seed: u64,
    mode: Replacement,
) -> Result<StabilityTrial> {
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = instance.n();
    let mut brng = stream(seed, Stream::Batch);
    let batch: Vec<usize> = (0..m).map(|_| brng.random_range(0..n)).collect();
    let mut rrng = stream(seed, Stream::Replacement);
    let position = rrng.random_range(0..m);
    let replacement = match mode {
        Replacement::Iid => rrng.random_range(0..n),
        Replacement::Identical => batch[position],
    };
    let mut swapped = batch.clone();
    swapped[position] = replacement;
    let mut union = batch.clone();
    union.push(replacement);

    let lambda = weak_convexity(kind, instance, &union);
    if !(gamma > lambda) {
        return Err(Error::NotStronglyConvex { rho: gamma, mu: lambda });
    }
    let solve = |b: &[usize]| {
        prox_step(&ProxRequest::new(kind, instance, b, z, y, gamma).with_tol(LAB_PROX_TOL).with_max_inner(10_000))
    };
    let p = solve(&batch)?;
    let q = solve(&swapped)?;
    let lipschitz = match kind {
        ModelKind::Full => model_lipschitz_segment(kind, instance, &union, z, &p.x_plus, &q.x_plus)?,
        _ => model_lipschitz(kind, instance, &union, z)?,
    };
    Ok(StabilityTrial {
        kind,
        gamma,
        lambda,
        m,
        distance: dist(&p.x_plus, &q.x_plus),
        bound: 2.0 * lipschitz / (m as f64 * (gamma - lambda)),
        lipschitz,
        batch,
        position,
        replacement,
        valid: p.converged && q.converged,
    })
}

/// `count` trials with sub-seeds `derive_seed(seed, t)`, run in parallel
/// and returned in trial order.
#[allow(clippy::too_many_arguments)]
pub fn stability_trials(
    instance: &ProblemInstance,
    kind: ModelKind,
    z: &[f64],
    y: &[f64],
    gamma: f64,
    m: usize,
    seed: u64,
    count: usize,
    mode: Replacement,
) -> Result<Vec<StabilityTrial>> {
    (0..count)
        .into_par_iter()
        .map(|t| stability_trial_with(instance, kind, z, y, gamma, m, derive_seed(seed, t as u64), mode))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    pub estimate: f64,
    /// 95% normal half-width.
    pub half_width: f64,
    /// `2L²/(m(γ − λ))`.
    pub bound: f64,
    pub lipschitz: f64,
    pub lambda: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub trials: usize,
    pub excluded: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Trials with `distance > bound + tol`.
    pub violations: usize,
    pub tol: f64,
    pub gap: Option<GapEstimate>,
}

pub fn stability_report(trials: &[StabilityTrial], tol: f64, gap: Option<GapEstimate>) -> StabilityReport {
    let valid: Vec<&StabilityTrial> = trials.iter().filter(|t| t.valid).collect();
    let ratios: Vec<f64> = valid.iter().map(|t| t.ratio()).collect();
    StabilityReport {
        trials: trials.len(),
        excluded: trials.len() - valid.len(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        mean_ratio: if ratios.is_empty() {
            0.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        },
        violations: valid.iter().filter(|t| t.distance > t.bound + tol).count(),
        tol,
        gap,
    }
}

/// Monte-Carlo estimate of `E_B[f_z(x⁺_B, B) − (1/n) Σ_j f_z(x⁺_B, ξ_j)]`
/// with `x⁺_B` the prox output over `B` centered and anchored at `z`.
/// `L` is taken over all samples, at `z` for the linear and prox-linear
/// models and over every realized `x⁺_B` (and `z`) for the full model.
pub fn expectation_gap_estimate(
    instance: &ProblemInstance,
    kind: ModelKind,
    z: &[f64],
    gamma: f64,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<GapEstimate> {
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least two trials".into()));
    }
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = instance.n();
    let all: Vec<usize> = (0..n).collect();
    let lambda = weak_convexity(kind, instance, &all);
    if !(gamma > lambda) {
        return Err(Error::NotStronglyConvex { rho: gamma, mu: lambda });
    }
    let per_trial: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let mut rng = stream(derive_seed(seed, t as u64), Stream::Batch);
            let batch: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
            let res = prox_step(&ProxRequest::new(kind, instance, &batch, z, z, gamma).with_tol(LAB_PROX_TOL))?;
            let x = &res.x_plus;
            let gap = batch_model_value(kind, instance, &batch, z, x)? - batch_model_value(kind, instance, &all, z, x)?;
            let l = match kind {
                ModelKind::Full => model_lipschitz_segment(kind, instance, &all, z, z, x)?,
                _ => 0.0,
            };
            Ok((gap, l))
        })
        .collect::<Result<_>>()?;
    let lipschitz = match kind {
        ModelKind::Full => per_trial.iter().map(|p| p.1).fold(0.0, f64::max),
        _ => model_lipschitz(kind, instance, &all, z)?,
    };
    let t = trials as f64;
    let mean = per_trial.iter().map(|p| p.0).sum::<f64>() / t;
    let var = per_trial.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (t - 1.0);
    Ok(GapEstimate {
        estimate: mean,
        half_width: 1.96 * var.sqrt() / t.sqrt(),
        bound: 2.0 * lipschitz * lipschitz / (m as f64 * (gamma - lambda)),
        lipschitz,
        lambda,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_synthetic_phase_retrieval, GenSpec, Sample};

    fn instance() -> (ProblemInstance, Vec<f64>) {
        let spec = GenSpec {
            n: 50,
            d: 6,
            kappa: 3.0,
            p_fail: 0.2,
            noise_std: 5.0,
            seed: 3,
        };
        gen_synthetic_phase_retrieval(&spec).unwrap()
    }

    #[test]
    fn identical_replacement_is_zero() {
        let (inst, truth) = instance();
        let z: Vec<f64> = truth.iter().map(|t| t + 0.3).collect();
        for kind in ModelKind::ALL {
            let trials = stability_trials(&inst, kind, &z, &z, 40.0, 4, 1, 20, Replacement::Identical).unwrap();
            assert!(trials.iter().all(|t| t.distance == 0.0));
        }
    }

    #[test]
    fn linear_distance_closed_form() {
        let (inst, truth) = instance();
        let z: Vec<f64> = truth.iter().map(|t| t - 0.2).collect();
        for seed in 0..20 {
            let t = stability_trial(&inst, ModelKind::Linear, &z, &z, 3.0, 4, seed).unwrap();
            let v = inst.samples[t.batch[t.position]].subgradient(&z);
            let w = inst.samples[t.replacement].subgradient(&z);
            let want = dist(&v, &w) / (4.0 * 3.0);
            assert!((t.distance - want).abs() <= 1e-12 * (1.0 + want));
            assert!(t.distance <= t.bound + 1e-12);
        }
    }

    #[test]
    fn prox_linear_within_bound() {
        let (inst, truth) = instance();
        let z: Vec<f64> = truth.iter().map(|t| t + 0.5).collect();
        let trials = stability_trials(&inst, ModelKind::ProxLinear, &z, &z, 5.0, 8, 9, 100, Replacement::Iid).unwrap();
        let report = stability_report(&trials, 1e-9, None);
        assert_eq!(report.violations, 0, "{report:?}");
        assert!(report.max_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn single_sample_gap_is_zero() {
        let inst = ProblemInstance::new(
            crate::ProblemKind::PhaseRetrieval,
            2,
            vec![Sample::Quadratic { a: vec![1.0, 2.0], b: 1.0 }],
        )
        .unwrap();
        let g = expectation_gap_estimate(&inst, ModelKind::ProxLinear, &[0.3, 0.1], 2.0, 3, 100, 0).unwrap();
        assert_eq!(g.estimate, 0.0);
        assert_eq!(g.half_width, 0.0);
    }

    #[test]
    fn trials_are_deterministic() {
        let (inst, truth) = instance();
        let a = stability_trials(&inst, ModelKind::Full, &truth, &truth, 60.0, 4, 5, 10, Replacement::Iid).unwrap();
        let b = stability_trials(&inst, ModelKind::Full, &truth, &truth, 60.0, 4, 5, 10, Replacement::Iid).unwrap();
        assert_eq!(a, b);
    }
}
