//! Outer loops: minibatch SMOD, SEMOD (heavy-ball extrapolation), its
//! minibatch variant, and the accelerated three-sequence scheme.

mod run;
mod schedule;

pub use run::{run, run_asmod_nesterov, run_semod, run_smod_minibatch, BatchSampler};
pub use schedule::{
    nesterov_base_gamma, nesterov_schedule, optimal_gamma0, stepsize_experiment, stepsize_theory_semod,
    stepsize_theory_semod_mb, stepsize_theory_smod, NesterovStep,
};

use crate::models::{model_constants, model_lipschitz, ModelKind};
use crate::problems::ProblemInstance;
use crate::prox::{DEFAULT_MAX_INNER, DEFAULT_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    SmodMinibatch,
    Semod,
    SemodMinibatch,
    Nesterov,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::SmodMinibatch,
        Algorithm::Semod,
        Algorithm::SemodMinibatch,
        Algorithm::Nesterov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SmodMinibatch => "smod",
            Algorithm::Semod => "semod",
            Algorithm::SemodMinibatch => "semod_mb",
            Algorithm::Nesterov => "nesterov",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Default `ρ`: 1.5 times the smallest value the matching convergence
    /// guarantee allows (`λ+τ`, `2(λ+τ)`, `3(λ+τ)`), or 1 when that is 0.
    pub fn default_rho(self, lambda: f64, tau: f64) -> f64 {
        let factor = match self {
            Algorithm::SmodMinibatch | Algorithm::Nesterov => 1.0,
            Algorithm::Semod => 2.0,
            Algorithm::SemodMinibatch => 3.0,
        };
        let floor = factor * (lambda + tau);
        if floor > 0.0 {
            1.5 * floor
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// `max{ρ+τ, λ + √K/(α0√m)}`; `ρ` falls back to [`Algorithm::default_rho`].
    TheorySmod { rho: Option<f64>, alpha0: f64 },
    TheorySemod { rho: Option<f64>, gamma0: f64 },
    TheorySemodMb { rho: Option<f64>, gamma0: f64 },
    /// `α0⁻¹ √(K/m)`.
    Experiment { alpha0: f64 },
    /// `γ_k = γ/(k+1)` with `γ = 2τ + η`; `eta` overrides the formula for `η`.
    Nesterov { d_tilde: f64, eta: Option<f64> },
    Constant { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    Horizon,
    /// Stop once `f(x) ≤ c·f̂`; needs `f̂` on the instance.
    ObjectiveThreshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub kind: ModelKind,
    /// Horizon `K`.
    pub iters: usize,
    /// Batch size `m`.
    pub batch: usize,
    pub beta: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub stopping: Stopping,
    /// Objective evaluation stride; `None` picks 1 for `n ≤ 1000`, else `⌈n/m⌉`.
    pub eval_every: Option<usize>,
    /// Iterations whose iterates are stored in the record.
    pub capture: Vec<usize>,
    pub prox_tol: f64,
    pub max_inner: usize,
    /// Runs whose objective exceeds this multiple of the initial value are
    /// stopped and marked diverged.
    pub divergence_factor: f64,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, kind: ModelKind, iters: usize, batch: usize) -> Self {
        SolverConfig {
            algorithm,
            kind,
            iters,
            batch,
            beta: 0.0,
            schedule: Schedule::Experiment { alpha0: 1.0 },
            seed: 0,
            stopping: Stopping::Horizon,
            eval_every: None,
            capture: Vec::new(),
            prox_tol: DEFAULT_TOL,
            max_inner: DEFAULT_MAX_INNER,
            divergence_factor: 1e12,
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stopping(mut self, stopping: Stopping) -> Self {
        self.stopping = stopping;
        self
    }

    pub fn with_eval_every(mut self, every: usize) -> Self {
        self.eval_every = Some(every);
        self
    }

    pub fn with_capture(mut self, iters: Vec<usize>) -> Self {
        self.capture = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.iters == 0 {
            return bad("horizon K must be at least 1".into());
        }
        if self.batch == 0 {
            return bad("batch size m must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta = {} outside [0, 1)", self.beta));
        }
        if self.algorithm == Algorithm::SmodMinibatch && self.beta != 0.0 {
            return bad("minibatch SMOD takes no momentum".into());
        }
        if let Stopping::ObjectiveThreshold(c) = self.stopping {
            if !(c > 1.0) {
                return bad(format!("threshold factor {c} must exceed 1"));
            }
        }
        let nesterov_schedule = matches!(self.schedule, Schedule::Nesterov { .. });
        if nesterov_schedule != (self.algorithm == Algorithm::Nesterov) {
            return bad("the accelerated method and its schedule go together".into());
        }
        Ok(())
    }

    /// Objective evaluation stride for an instance with `n` samples.
    pub fn eval_stride(&self, n: usize) -> usize {
        self.eval_every
            .unwrap_or(if n <= 1000 { 1 } else { n.div_ceil(self.batch) })
            .max(1)
    }

    /// Resolves the constant proximal weight (the base weight for the
    /// accelerated method) for `instance` started at `x0`. Violated
    /// theorem preconditions come back as warnings.
    pub fn resolve_gamma(&self, instance: &ProblemInstance, x0: &[f64]) -> Result<(f64, Vec<String>)> {
        let c = model_constants(self.kind, instance);
        let (k, m, beta) = (self.iters, self.batch, self.beta);
        let rho_for = |rho: Option<f64>| rho.unwrap_or_else(|| self.algorithm.default_rho(c.lambda, c.tau));
        let mut warnings = Vec::new();
        let gamma = match self.schedule {
            Schedule::TheorySmod { rho, alpha0 } => {
                stepsize_theory_smod(k, m, rho_for(rho), c.tau, c.lambda, alpha0)?
            }
            Schedule::TheorySemod { rho, gamma0 } => {
                let rho = rho_for(rho);
                if rho < 2.0 * (c.tau + c.lambda) {
                    warnings.push(format!("rho = {rho} below 2(tau + lambda)"));
                }
                stepsize_theory_semod(k, beta, c.lambda, rho, gamma0)
            }
            Schedule::TheorySemodMb { rho, gamma0 } => {
                let rho = rho_for(rho);
                if rho <= 3.0 * (c.tau + c.lambda) {
                    warnings.push(format!("rho = {rho} not above 3(tau + lambda)"));
                }
                stepsize_theory_semod_mb(k, m, beta, c.lambda, c.tau, rho, gamma0)
            }
            Schedule::Experiment { alpha0 } => stepsize_experiment(alpha0, k, m)?,
            Schedule::Nesterov { d_tilde, eta } => match eta {
                Some(eta) => 2.0 * c.tau + eta,
                None => {
                    let all: Vec<usize> = (0..instance.n()).collect();
                    let l = match c.lipschitz_hint {
                        Some(l) => l,
                        None => model_lipschitz(self.kind, instance, &all, x0)?,
                    };
                    nesterov_base_gamma(m, k, c.tau, l, d_tilde)?
                }
            },
            Schedule::Constant { gamma } => gamma,
        };
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("resolved stepsize γ = {gamma}")));
        }
        if gamma <= c.lambda {
            warnings.push(format!("gamma = {gamma} does not exceed lambda = {}", c.lambda));
        }
        Ok((gamma, warnings))
    }
}

/// Current and previous iterate of the extrapolated methods.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x_curr: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub k: usize,
}

impl IterateState {
    /// Starts at `k = 1` with `x¹ = x⁰`.
    pub fn new(x0: &[f64]) -> Self {
        IterateState {
            x_curr: x0.to_vec(),
            x_prev: x0.to_vec(),
            k: 1,
        }
    }

    /// `y = x^k + β(x^k − x^{k−1})`.
    pub fn extrapolated(&self, beta: f64) -> Vec<f64> {
        self.x_curr
            .iter()
            .zip(&self.x_prev)
            .map(|(c, p)| c + beta * (c - p))
            .collect()
    }

    /// `z = x^k + (β/(1−β))(x^k − x^{k−1})`.
    pub fn auxiliary(&self, beta: f64) -> Vec<f64> {
        self.extrapolated(beta / (1.0 - beta))
    }

    pub fn advance(&mut self, next: Vec<f64>) {
        self.x_prev = std::mem::replace(&mut self.x_curr, next);
        self.k += 1;
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub objective: f64,
    /// Distance to the planted solution, up to its symmetry.
    pub dist_to_truth: Option<f64>,
    pub gamma: f64,
    /// FNV-1a digest of every batch index drawn so far.
    pub batch_digest: u64,
}

/// Stored iterate `x^k` and, for the extrapolated methods, `z^k`. The
/// accelerated method stores its prox sequence in `z`. `k = 1` is the
/// starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<TraceRow>,
    /// Iteration at which the threshold fired, or `K + 1`.
    pub stop_iter: usize,
    pub reached_threshold: bool,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_x: Vec<f64>,
    pub diverged: bool,
    pub wall_time: f64,
    /// Base proximal weight the run used.
    pub gamma: f64,
    /// Uniformly drawn output index in `1..=K`.
    pub k_star: usize,
    /// Iterate at `k_star` if the run got that far.
    pub k_star_point: Option<Snapshot>,
    pub snapshots: Vec<Snapshot>,
    pub batch_digest: u64,
    /// Prox steps whose inner solver hit its cap.
    pub prox_unconverged: usize,
    /// Whether the model Lipschitz constant at the final iterate is more
    /// than ten times its value at the start.
    pub lipschitz_grew: bool,
    pub warnings: Vec<String>,
}

/// Distance to the planted solution modulo its symmetry: global sign for
/// phase retrieval, none otherwise.
pub fn truth_distance(instance: &ProblemInstance, x: &[f64]) -> Option<f64> {
    let truth = instance.truth.as_ref()?;
    let plus = crate::linalg::dist(x, truth);
    Some(match instance.kind {
        crate::ProblemKind::PhaseRetrieval => {
            let minus = x.iter().zip(truth).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
            plus.min(minus)
        }
        _ => plus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(Algorithm::from_name(a.name()), Some(a));
        }
        assert_eq!(Algorithm::from_name("adam"), None);
    }

    #[test]
    fn default_rho_meets_preconditions() {
        assert_eq!(Algorithm::SmodMinibatch.default_rho(0.0, 2.0), 3.0);
        assert_eq!(Algorithm::Semod.default_rho(1.0, 1.0), 6.0);
        assert_eq!(Algorithm::SemodMinibatch.default_rho(0.0, 2.0), 9.0);
        assert_eq!(Algorithm::Semod.default_rho(0.0, 0.0), 1.0);
    }

    #[test]
    fn iterate_state_identities() {
        let mut s = IterateState::new(&[1.0, 2.0]);
        assert_eq!(s.extrapolated(0.7), vec![1.0, 2.0]);
        s.advance(vec![2.0, 0.0]);
        assert_eq!(s.k, 2);
        assert_eq!(s.extrapolated(0.5), vec![2.5, -1.0]);
        let z = s.auxiliary(0.5);
        assert_eq!(z, vec![3.0, -2.0]);
    }

    #[test]
    fn validation() {
        let ok = SolverConfig::new(Algorithm::Semod, ModelKind::Linear, 10, 1).with_beta(0.5);
        assert!(ok.validate().is_ok());
        assert!(ok.clone().with_beta(1.0).validate().is_err());
        assert!(SolverConfig::new(Algorithm::SmodMinibatch, ModelKind::Linear, 10, 1)
            .with_beta(0.5)
            .validate()
            .is_err());
        assert!(SolverConfig::new(Algorithm::SmodMinibatch, ModelKind::Linear, 0, 1).validate().is_err());
        assert!(SolverConfig::new(Algorithm::SmodMinibatch, ModelKind::Linear, 10, 0).validate().is_err());
        assert!(ok.clone().with_stopping(Stopping::ObjectiveThreshold(1.0)).validate().is_err());
        assert!(SolverConfig::new(Algorithm::Nesterov, ModelKind::Linear, 10, 1).validate().is_err());
    }

    #[test]
    fn eval_stride_rule() {
        let c = SolverConfig::new(Algorithm::SmodMinibatch, ModelKind::Linear, 10, 8);
        assert_eq!(c.eval_stride(300), 1);
        assert_eq!(c.eval_stride(2000), 250);
        assert_eq!(c.clone().with_eval_every(7).eval_stride(2000), 7);
    }
}
