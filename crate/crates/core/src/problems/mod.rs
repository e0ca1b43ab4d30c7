//! Problem instances: finite datasets of measurements whose per-sample loss
//! is `|c(x, ξ)|` for a smooth residual map `c`.

mod gen;
mod hadamard;
pub mod io;

pub use gen::{
    gen_absolute_deviation, gen_hadamard_instance, gen_synthetic_blind_deconv,
    gen_synthetic_phase_retrieval, gen_zipcode_instance, GenSpec,
};
pub use hadamard::{gen_hadamard_measurements, sylvester_hadamard};

use crate::linalg::{dot, norm, norm_sq};
use crate::{Error, Result};

/// Which loss the samples of an instance carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// `|⟨a, x⟩² − b|`
    PhaseRetrieval,
    /// `|⟨u, x⟩⟨v, y⟩ − b|` over the joint variable `(x; y)`
    BlindDeconvolution,
    /// `|⟨a, x⟩ − b|`, the convex least absolute deviation loss
    AbsoluteDeviation,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::PhaseRetrieval => "phase_retrieval",
            ProblemKind::BlindDeconvolution => "blind_deconvolution",
            ProblemKind::AbsoluteDeviation => "absolute_deviation",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "phase_retrieval" => Some(ProblemKind::PhaseRetrieval),
            "blind_deconvolution" => Some(ProblemKind::BlindDeconvolution),
            "absolute_deviation" => Some(ProblemKind::AbsoluteDeviation),
            _ => None,
        }
    }
}

/// One measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Quadratic { a: Vec<f64>, b: f64 },
    Bilinear { u: Vec<f64>, v: Vec<f64>, b: f64 },
    Linear { a: Vec<f64>, b: f64 },
}

impl Sample {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Sample::Quadratic { .. } => ProblemKind::PhaseRetrieval,
            Sample::Bilinear { .. } => ProblemKind::BlindDeconvolution,
            Sample::Linear { .. } => ProblemKind::AbsoluteDeviation,
        }
    }

    pub fn b(&self) -> f64 {
        match self {
            Sample::Quadratic { b, .. } | Sample::Bilinear { b, .. } | Sample::Linear { b, .. } => {
                *b
            }
        }
    }

    /// Length of the decision variable this sample acts on.
    pub fn var_dim(&self) -> usize {
        match self {
            Sample::Quadratic { a, .. } | Sample::Linear { a, .. } => a.len(),
            Sample::Bilinear { u, .. } => 2 * u.len(),
        }
    }

    /// Residual `c(x)`; the loss is `|c(x)|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self {
            Sample::Quadratic { a, b } => {
                let ax = dot(a, x);
                ax * ax - b
            }
            Sample::Bilinear { u, v, b } => {
                let d = u.len();
                dot(u, &x[..d]) * dot(v, &x[d..]) - b
            }
            Sample::Linear { a, b } => dot(a, x) - b,
        }
    }

    /// Writes `∇c(x)` into `out`.
    pub fn residual_grad_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Sample::Quadratic { a, .. } => {
                let s = 2.0 * dot(a, x);
                for (o, ai) in out.iter_mut().zip(a) {
                    *o = s * ai;
                }
            }
            Sample::Bilinear { u, v, .. } => {
                let d = u.len();
                let q = dot(u, &x[..d]);
                let p = dot(v, &x[d..]);
                for j in 0..d {
                    out[j] = p * u[j];
                    out[d + j] = q * v[j];
                }
            }
            Sample::Linear { a, .. } => out.copy_from_slice(a),
        }
    }

    pub fn residual_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.var_dim()];
        self.residual_grad_into(x, &mut g);
        g
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        self.residual(x).abs()
    }

    /// An element of the subdifferential of the loss, taking `sign(0) = 0`.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let s = sign(self.residual(x));
        let mut g = self.residual_grad(x);
        g.iter_mut().for_each(|gi| *gi *= s);
        g
    }

    /// Lipschitz constant of `∇c`, which bounds the weak convexity of the
    /// loss and the gap between the loss and its partial linearization.
    pub fn curvature(&self) -> f64 {
        match self {
            Sample::Quadratic { a, .. } => 2.0 * norm_sq(a),
            Sample::Bilinear { u, v, .. } => norm(u) * norm(v),
            Sample::Linear { .. } => 0.0,
        }
    }

    /// Upper bound on `‖∇c(x)‖` over the ball of radius `r` around `z`.
    pub fn grad_norm_bound(&self, z: &[f64], r: f64) -> f64 {
        match self {
            Sample::Quadratic { a, .. } => {
                let na = norm(a);
                2.0 * (dot(a, z).abs() + r * na) * na
            }
            Sample::Bilinear { u, v, .. } => {
                let d = u.len();
                let (nu, nv) = (norm(u), norm(v));
                let q = dot(u, &z[..d]).abs() + r * nu;
                let p = dot(v, &z[d..]).abs() + r * nv;
                ((p * nu).powi(2) + (q * nv).powi(2)).sqrt()
            }
            Sample::Linear { a, .. } => norm(a),
        }
    }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A finite dataset with its objective `f(x) = (1/n) Σ |c(x, ξ_i)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    pub samples: Vec<Sample>,
    /// Signal dimension `d`. Blind deconvolution optimizes over `2d`.
    pub dim: usize,
    pub truth: Option<Vec<f64>>,
    pub f_hat: Option<f64>,
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn new(kind: ProblemKind, dim: usize, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSpec("instance needs at least one sample".into()));
        }
        let var_dim = match kind {
            ProblemKind::BlindDeconvolution => 2 * dim,
            _ => dim,
        };
        for s in &samples {
            if s.kind() != kind {
                return Err(Error::InvalidSpec(format!(
                    "sample of kind {} in a {} instance",
                    s.kind().name(),
                    kind.name()
                )));
            }
            if s.var_dim() != var_dim {
                return Err(Error::DimensionMismatch {
                    expected: var_dim,
                    got: s.var_dim(),
                });
            }
            if let Sample::Bilinear { u, v, .. } = s {
                if u.len() != v.len() {
                    return Err(Error::DimensionMismatch {
                        expected: u.len(),
                        got: v.len(),
                    });
                }
            }
        }
        Ok(ProblemInstance {
            kind,
            samples,
            dim,
            truth: None,
            f_hat: None,
            seed: None,
        })
    }

    /// Attaches the ground truth and stores `f̂ = f(truth)`.
    pub fn with_truth(mut self, truth: Vec<f64>) -> Result<Self> {
        let f_hat = self.loss(&truth)?;
        self.truth = Some(truth);
        self.f_hat = Some(f_hat);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Length of the decision variable.
    pub fn var_dim(&self) -> usize {
        match self.kind {
            ProblemKind::BlindDeconvolution => 2 * self.dim,
            _ => self.dim,
        }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.var_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.var_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn sample(&self, i: usize) -> Result<&Sample> {
        self.samples
            .get(i)
            .ok_or(Error::IndexOutOfRange { index: i, n: self.n() })
    }

    /// Full empirical objective.
    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.loss_unchecked(x))
    }

    pub(crate) fn loss_unchecked(&self, x: &[f64]) -> f64 {
        let total: f64 = self.samples.iter().map(|s| s.loss(x)).sum();
        total / self.n() as f64
    }

    /// Mean loss over a batch of sample indices.
    pub fn batch_loss(&self, batch: &[usize], x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_batch(batch)?;
        let total: f64 = batch.iter().map(|&i| self.samples[i].loss(x)).sum();
        Ok(total / batch.len() as f64)
    }

    pub fn sample_subgradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.sample(i)?.subgradient(x))
    }

    pub fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if let Some(&i) = batch.iter().find(|&&i| i >= self.n()) {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    /// Largest per-sample curvature `max_i ‖∇c_i‖_Lip`.
    pub fn max_curvature(&self) -> f64 {
        self.samples.iter().map(Sample::curvature).fold(0.0, f64::max)
    }
}
