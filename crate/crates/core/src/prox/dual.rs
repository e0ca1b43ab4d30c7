//! Box-constrained dual of the linearized absolute-value subproblem.
//!
//! ```text
//! min_s  (1/m) Σ |r_i + g_iᵀ s| + (w/2)‖s‖²
//! ```
//!
//! Writing `|t| = max_{|σ|≤1} σt` and `μ_i = σ_i/m` gives the dual
//!
//! ```text
//! max_{μ ∈ [−1/m, 1/m]^m}  Σ μ_i r_i − (1/(2w))‖Σ μ_i g_i‖²
//! ```
//!
//! with primal recovery `s = −(1/w) Σ μ_i g_i`. The dual is maximized by
//! cyclic coordinate ascent with exact, box-clipped one-dimensional steps.

use crate::linalg::{axpy, dot, norm_sq};
use crate::problems::ProblemInstance;

/// Sweep cap for the coordinate ascent.
pub const MAX_SWEEPS: usize = 50_000;

#[derive(Debug, Clone)]
pub struct LinearizedAbs {
    pub g: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct LinearizedAbsSolution {
    pub step: Vec<f64>,
    pub mu: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl LinearizedAbs {
    /// Linearizes the batch residuals at `center` and expresses the
    /// problem in the displacement from `anchor`.
    pub fn at(
        inst: &ProblemInstance,
        batch: &[usize],
        center: &[f64],
        anchor: &[f64],
        weight: f64,
    ) -> Self {
        let offset: Vec<f64> = anchor.iter().zip(center).map(|(a, c)| a - c).collect();
        let mut g = Vec::with_capacity(batch.len());
        let mut r = Vec::with_capacity(batch.len());
        for &i in batch {
            let s = &inst.samples[i];
            let gi = s.residual_grad(center);
            r.push(s.residual(center) + dot(&gi, &offset));
            g.push(gi);
        }
        LinearizedAbs { g, r, weight }
    }

    pub fn dim(&self) -> usize {
        self.g.first().map_or(0, Vec::len)
    }

    pub fn primal(&self, step: &[f64]) -> f64 {
        let m = self.r.len() as f64;
        let fit: f64 = self
            .g
            .iter()
            .zip(&self.r)
            .map(|(g, r)| (r + dot(g, step)).abs())
            .sum();
        fit / m + 0.5 * self.weight * norm_sq(step)
    }

    fn dual(&self, mu: &[f64], s: &[f64]) -> f64 {
        dot(mu, &self.r) - 0.5 * norm_sq(s) / self.weight
    }
}

/// Maximizes the dual until the duality gap is at most
/// `tol·(1 + |primal|)` or `max_sweeps` sweeps have run.
pub fn solve_linearized_abs(p: &LinearizedAbs, tol: f64, max_sweeps: usize) -> LinearizedAbsSolution {
    let m = p.r.len();
    let d = p.dim();
    let bound = 1.0 / m as f64;
    let sq: Vec<f64> = p.g.iter().map(|g| norm_sq(g)).collect();
    let mut mu = vec![0.0; m];
    // s = Σ μ_i g_i
    let mut s = vec![0.0; d];
    let mut sweeps = 0;
    let (mut primal, mut dual, mut gap);
    loop {
        for j in 0..m {
            let target = if sq[j] > 0.0 {
                // maximize μ r_j − (1/2w)‖s_{−j} + μ g_j‖²
                let gs = dot(&p.g[j], &s) - mu[j] * sq[j];
                (p.weight * p.r[j] - gs) / sq[j]
            } else if p.r[j] > 0.0 {
                bound
            } else if p.r[j] < 0.0 {
                -bound
            } else {
                0.0
            };
            let new = target.clamp(-bound, bound);
            let delta = new - mu[j];
            if delta != 0.0 {
                axpy(delta, &p.g[j], &mut s);
                mu[j] = new;
            }
        }
        sweeps += 1;
        let step: Vec<f64> = s.iter().map(|v| -v / p.weight).collect();
        primal = p.primal(&step);
        dual = p.dual(&mu, &s);
        gap = (primal - dual).max(0.0);
        if gap <= tol * (1.0 + primal.abs()) || sweeps >= max_sweeps {
            return LinearizedAbsSolution {
                converged: gap <= tol * (1.0 + primal.abs()),
                step,
                mu,
                primal,
                dual,
                gap,
                sweeps,
            };
        }
    }
}
