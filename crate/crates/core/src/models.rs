//! Model functions `f_z(x, ξ)` built around a center `z`, and the constants
//! that control them.

use crate::linalg::{dot, norm, sub};
use crate::problems::{sign, ProblemInstance, ProblemKind, Sample};
use crate::Result;

/// Default radius of the ball on which the full model's Lipschitz constant
/// is certified.
pub const FULL_LIPSCHITZ_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Linearize the loss: stochastic subgradient steps.
    Linear,
    /// Linearize the residual inside `|·|`: stochastic prox-linear steps.
    ProxLinear,
    /// Keep the loss: stochastic proximal point steps.
    Full,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Linear, ModelKind::ProxLinear, ModelKind::Full];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "sgd",
            ModelKind::ProxLinear => "spl",
            ModelKind::Full => "spp",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sgd" | "linear" => Some(ModelKind::Linear),
            "spl" | "prox_linear" | "proxlinear" => Some(ModelKind::ProxLinear),
            "spp" | "full" => Some(ModelKind::Full),
            _ => None,
        }
    }
}

/// Composite regularizer added to every model. Only the zero regularizer
/// is provided.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Regularizer {
    #[default]
    Zero,
}

impl Regularizer {
    pub fn value(&self, _x: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
        }
    }
}

/// `λ`: weak convexity of the model; `τ`: quadratic gap between model and
/// loss; `lipschitz_hint`: a global Lipschitz constant when one exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    pub lambda: f64,
    pub tau: f64,
    pub lipschitz_hint: Option<f64>,
}

fn sample_model_value(kind: ModelKind, s: &Sample, z: &[f64], x: &[f64]) -> f64 {
    match kind {
        ModelKind::Full => s.loss(x),
        ModelKind::ProxLinear | ModelKind::Linear => {
            let c = s.residual(z);
            let g = s.residual_grad(z);
            let lin = dot(&g, &sub(x, z));
            if kind == ModelKind::ProxLinear {
                (c + lin).abs()
            } else {
                c.abs() + sign(c) * lin
            }
        }
    }
}

/// `f_z(x, ξ_i)`.
pub fn model_value(kind: ModelKind, inst: &ProblemInstance, i: usize, z: &[f64], x: &[f64]) -> Result<f64> {
    inst.check_dim(z)?;
    inst.check_dim(x)?;
    Ok(sample_model_value(kind, inst.sample(i)?, z, x))
}

/// `f_z(x, B) = (1/|B|) Σ_{i∈B} f_z(x, ξ_i)`.
pub fn batch_model_value(
    kind: ModelKind,
    inst: &ProblemInstance,
    batch: &[usize],
    z: &[f64],
    x: &[f64],
) -> Result<f64> {
    inst.check_dim(z)?;
    inst.check_dim(x)?;
    inst.check_batch(batch)?;
    let total: f64 = batch
        .iter()
        .map(|&i| sample_model_value(kind, &inst.samples[i], z, x))
        .sum();
    Ok(total / batch.len() as f64)
}

pub fn model_constants(kind: ModelKind, inst: &ProblemInstance) -> ModelConstants {
    let curvature = inst.max_curvature();
    let lipschitz_hint = match inst.kind {
        ProblemKind::AbsoluteDeviation => {
            Some(inst.samples.iter().map(|s| s.grad_norm_bound(&[], 0.0)).fold(0.0, f64::max))
                .filter(|l| *l > 0.0)
        }
        _ => None,
    };
    match kind {
        ModelKind::Linear | ModelKind::ProxLinear => ModelConstants {
            lambda: 0.0,
            tau: curvature,
            lipschitz_hint,
        },
        ModelKind::Full => ModelConstants {
            lambda: curvature,
            tau: 0.0,
            lipschitz_hint,
        },
    }
}

/// Lipschitz constant of `x ↦ f_z(x, B)`. Exact over the whole space for
/// the linear and prox-linear models; for the full model it is certified on
/// the ball of radius [`FULL_LIPSCHITZ_RADIUS`] around `z`.
pub fn model_lipschitz(kind: ModelKind, inst: &ProblemInstance, batch: &[usize], z: &[f64]) -> Result<f64> {
    model_lipschitz_radius(kind, inst, batch, z, FULL_LIPSCHITZ_RADIUS)
}

/// As [`model_lipschitz`] with an explicit radius for the full model.
pub fn model_lipschitz_radius(
    kind: ModelKind,
    inst: &ProblemInstance,
    batch: &[usize],
    z: &[f64],
    radius: f64,
) -> Result<f64> {
    inst.check_dim(z)?;
    inst.check_batch(batch)?;
    let per_sample = |s: &Sample| match kind {
        ModelKind::ProxLinear => norm(&s.residual_grad(z)),
        ModelKind::Linear => norm(&s.subgradient(z)),
        ModelKind::Full => s.grad_norm_bound(z, radius),
    };
    Ok(batch.iter().map(|&i| per_sample(&inst.samples[i])).fold(0.0, f64::max))
}

/// Lipschitz constant of the batch models on the segment `[p, q]`.
///
/// For the full model `‖∇c‖` is a convex function of the position for all
/// three residual maps, so its maximum over the segment is attained at an
/// endpoint.
pub fn model_lipschitz_segment(
    kind: ModelKind,
    inst: &ProblemInstance,
    batch: &[usize],
    z: &[f64],
    p: &[f64],
    q: &[f64],
) -> Result<f64> {
    match kind {
        ModelKind::Full => {
            inst.check_batch(batch)?;
            inst.check_dim(p)?;
            inst.check_dim(q)?;
            Ok(batch
                .iter()
                .map(|&i| {
                    let s = &inst.samples[i];
                    norm(&s.residual_grad(p)).max(norm(&s.residual_grad(q)))
                })
                .fold(0.0, f64::max))
        }
        _ => model_lipschitz(kind, inst, batch, z),
    }
}
