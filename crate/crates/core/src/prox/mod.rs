//! Proximal subproblems
//!
//! ```text
//! x⁺ = argmin_x  f_z(x, B) + (γ/2)‖x − y‖²
//! ```
//!
//! for every model kind, with `z` the model center and `y` the proximal
//! center. Sequential steps use closed forms; minibatch prox-linear steps
//! go through a box-constrained dual QP; minibatch proximal point steps run
//! a deterministic prox-linear loop whose inner problems are those QPs.

mod bilinear;
mod dual;
mod spp;

pub use bilinear::prox_seq_blind_deconv;
pub use dual::{solve_linearized_abs, LinearizedAbs, LinearizedAbsSolution};
pub use spp::{prox_spp_batch, prox_spp_seq_phase, spp_phase_candidates};

use crate::linalg::{dist_sq, dot, sub};
use crate::models::{batch_model_value, ModelKind};
use crate::problems::{ProblemInstance, ProblemKind};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_INNER: usize = 1000;

/// One proximal subproblem.
#[derive(Debug, Clone, Copy)]
pub struct ProxRequest<'a> {
    pub kind: ModelKind,
    pub instance: &'a ProblemInstance,
    pub batch: &'a [usize],
    /// Model center `z`.
    pub center: &'a [f64],
    /// Proximal center `y`.
    pub anchor: &'a [f64],
    /// Proximal weight `γ > 0`.
    pub gamma: f64,
    pub tol: f64,
    pub max_inner: usize,
}

impl<'a> ProxRequest<'a> {
    pub fn new(
        kind: ModelKind,
        instance: &'a ProblemInstance,
        batch: &'a [usize],
        center: &'a [f64],
        anchor: &'a [f64],
        gamma: f64,
    ) -> Self {
        ProxRequest {
            kind,
            instance,
            batch,
            center,
            anchor,
            gamma,
            tol: DEFAULT_TOL,
            max_inner: DEFAULT_MAX_INNER,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_inner(mut self, max_inner: usize) -> Self {
        self.max_inner = max_inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("prox weight γ = {}", self.gamma)));
        }
        self.instance.check_dim(self.center)?;
        self.instance.check_dim(self.anchor)?;
        self.instance.check_batch(self.batch)
    }

    /// `f_z(x, B) + (γ/2)‖x − y‖²`
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        Ok(batch_model_value(self.kind, self.instance, self.batch, self.center, x)?
            + 0.5 * self.gamma * dist_sq(x, self.anchor))
    }

    /// Weak convexity of `f_z(·, B)` for this batch.
    pub fn batch_lambda(&self) -> f64 {
        match self.kind {
            ModelKind::Full => self.batch_curvature(),
            _ => 0.0,
        }
    }

    pub(crate) fn batch_curvature(&self) -> f64 {
        self.batch
            .iter()
            .map(|&i| self.instance.samples[i].curvature())
            .fold(0.0, f64::max)
    }

    /// Whether the subproblem is strongly convex.
    pub fn is_convex(&self) -> bool {
        self.gamma > self.batch_lambda()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxStatus {
    ClosedForm,
    Qp,
    InnerLoop,
    NonconvexEnumerated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub x_plus: Vec<f64>,
    /// Subproblem objective at `x_plus`.
    pub objective: f64,
    pub inner_iters: usize,
    /// Subproblem objective after each prox-linear step (inner loop only).
    pub objective_trace: Vec<f64>,
    pub status: ProxStatus,
    /// False when an iterative solver hit its cap.
    pub converged: bool,
    /// Final duality gap (QP) or last step length (inner loop).
    pub residual: f64,
    /// Whether `γ` exceeded the weak convexity of the batch model.
    pub convex: bool,
}

impl ProxResult {
    fn closed_form(req: &ProxRequest, x_plus: Vec<f64>) -> Result<Self> {
        let objective = req.objective(&x_plus)?;
        Ok(ProxResult {
            x_plus,
            objective,
            inner_iters: 0,
            objective_trace: Vec::new(),
            status: ProxStatus::ClosedForm,
            converged: true,
            residual: 0.0,
            convex: req.is_convex(),
        })
    }
}

/// Linear model: `x⁺ = y − (1/(mγ)) Σ v_i(z)`.
pub fn prox_sgd(req: &ProxRequest) -> Result<ProxResult> {
    req.validate()?;
    let mut x = req.anchor.to_vec();
    let scale = 1.0 / (req.batch.len() as f64 * req.gamma);
    // index order fixes the summation order
    for &i in req.batch {
        let v = req.instance.samples[i].subgradient(req.center);
        for (xj, vj) in x.iter_mut().zip(&v) {
            *xj -= scale * vj;
        }
    }
    ProxResult::closed_form(req, x)
}

/// Sequential prox-linear step in closed form:
/// `x⁺ = y + Proj_[−1,1](−δ/‖ζ‖²)·ζ` with `ζ = g/γ` and
/// `δ = (c + gᵀ(y − z))/γ`.
pub fn prox_spl_seq(req: &ProxRequest) -> Result<ProxResult> {
    req.validate()?;
    if req.batch.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "sequential prox-linear step needs one sample, got {}",
            req.batch.len()
        )));
    }
    let s = &req.instance.samples[req.batch[0]];
    let g = s.residual_grad(req.center);
    let gg = dot(&g, &g);
    if gg == 0.0 {
        return ProxResult::closed_form(req, req.anchor.to_vec());
    }
    let c = s.residual(req.center);
    let delta = (c + dot(&g, &sub(req.anchor, req.center))) / req.gamma;
    let zeta_sq = gg / (req.gamma * req.gamma);
    let t = (-delta / zeta_sq).clamp(-1.0, 1.0);
    let x = req
        .anchor
        .iter()
        .zip(&g)
        .map(|(y, gi)| y + t * gi / req.gamma)
        .collect();
    ProxResult::closed_form(req, x)
}

/// Minibatch prox-linear step through the box-constrained dual QP.
pub fn prox_spl_batch(req: &ProxRequest) -> Result<ProxResult> {
    req.validate()?;
    let problem = LinearizedAbs::at(req.instance, req.batch, req.center, req.anchor, req.gamma);
    let sol = solve_linearized_abs(&problem, req.tol, dual::MAX_SWEEPS);
    let x_plus: Vec<f64> = req.anchor.iter().zip(&sol.step).map(|(y, s)| y + s).collect();
    let objective = req.objective(&x_plus)?;
    Ok(ProxResult {
        x_plus,
        objective,
        inner_iters: sol.sweeps,
        objective_trace: Vec::new(),
        status: ProxStatus::Qp,
        converged: sol.converged,
        residual: sol.gap,
        convex: true,
    })
}

/// Routes a request to the matching solver.
pub fn prox_step(req: &ProxRequest) -> Result<ProxResult> {
    let single = req.batch.len() == 1;
    match (req.kind, req.instance.kind) {
        (ModelKind::Linear, _) => prox_sgd(req),
        // the prox-linear model of an affine residual is the loss itself
        (ModelKind::ProxLinear, _) | (ModelKind::Full, ProblemKind::AbsoluteDeviation) => {
            if single {
                prox_spl_seq(req)
            } else {
                prox_spl_batch(req)
            }
        }
        (ModelKind::Full, ProblemKind::PhaseRetrieval) if single => prox_spp_seq_phase(req),
        (ModelKind::Full, ProblemKind::BlindDeconvolution) if single => prox_seq_blind_deconv(req),
        (ModelKind::Full, _) => prox_spp_batch(req),
    }
}

/// Picks the lowest objective among candidates; ties go to the earliest.
pub(crate) fn best_candidate(req: &ProxRequest, candidates: Vec<Vec<f64>>) -> Result<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for c in candidates {
        if c.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let val = req.objective(&c)?;
        if best.as_ref().is_none_or(|(_, b)| val < *b) {
            best = Some((c, val));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("no finite candidate".into()))
}
