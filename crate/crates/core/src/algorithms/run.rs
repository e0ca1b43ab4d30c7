use std::time::Instant;

use rand::Rng as _;

use super::schedule::nesterov_step;
use super::{truth_distance, Algorithm, IterateState, RunRecord, Schedule, Snapshot, SolverConfig, Stopping, TraceRow};
use crate::models::model_lipschitz;
use crate::problems::ProblemInstance;
use crate::prox::{prox_step, ProxRequest};
use crate::rng::{stream, Rng, Stream};
use crate::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// I.i.d. uniform batch indices, with replacement, from the batch stream of
/// a seed. The index sequence depends only on `(seed, m, n)`.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    rng: Rng,
    n: usize,
    m: usize,
    digest: u64,
}

impl BatchSampler {
    pub fn new(seed: u64, n: usize, m: usize) -> Self {
        BatchSampler {
            rng: stream(seed, Stream::Batch),
            n,
            m,
            digest: FNV_OFFSET,
        }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let batch: Vec<usize> = (0..self.m).map(|_| self.rng.random_range(0..self.n)).collect();
        for &i in &batch {
            for byte in (i as u64).to_le_bytes() {
                self.digest = (self.digest ^ byte as u64).wrapping_mul(FNV_PRIME);
            }
        }
        batch
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }
}

/// Bookkeeping shared by every outer loop.
struct Recorder<'a> {
    instance: &'a ProblemInstance,
    config: &'a SolverConfig,
    stride: usize,
    threshold: Option<f64>,
    blowup: f64,
    rows: Vec<TraceRow>,
    snapshots: Vec<Snapshot>,
    k_star: usize,
    k_star_point: Option<Snapshot>,
    stop_iter: Option<usize>,
    diverged: bool,
    prox_unconverged: usize,
    last_objective: f64,
}

impl<'a> Recorder<'a> {
    fn new(instance: &'a ProblemInstance, config: &'a SolverConfig, x0: &[f64], gamma: f64) -> Self {
        let f0 = instance.loss_unchecked(x0);
        let threshold = match (config.stopping, instance.f_hat) {
            (Stopping::ObjectiveThreshold(c), Some(f_hat)) => Some(c * f_hat),
            _ => None,
        };
        let k_star = stream(config.seed, Stream::Aux).random_range(1..=config.iters);
        let mut rec = Recorder {
            instance,
            config,
            stride: config.eval_stride(instance.n()),
            threshold,
            blowup: config.divergence_factor * f0.max(f64::MIN_POSITIVE),
            rows: Vec::new(),
            snapshots: Vec::new(),
            k_star,
            k_star_point: None,
            stop_iter: None,
            diverged: false,
            prox_unconverged: 0,
            last_objective: f0,
        };
        rec.push_row(1, f0, x0, gamma, FNV_OFFSET);
        if threshold.is_some_and(|t| f0 <= t) {
            rec.stop_iter = Some(0);
        }
        rec.snapshot(1, x0, x0);
        rec
    }

    fn push_row(&mut self, k: usize, objective: f64, x: &[f64], gamma: f64, digest: u64) {
        self.rows.push(TraceRow {
            k,
            objective,
            dist_to_truth: truth_distance(self.instance, x),
            gamma,
            batch_digest: digest,
        });
    }

    fn wants_snapshot(&self, k: usize) -> bool {
        k == self.k_star || self.config.capture.contains(&k)
    }

    fn snapshot(&mut self, k: usize, x: &[f64], z: &[f64]) {
        let snap = || Snapshot {
            k,
            x: x.to_vec(),
            z: z.to_vec(),
        };
        if self.config.capture.contains(&k) {
            self.snapshots.push(snap());
        }
        if k == self.k_star {
            self.k_star_point = Some(snap());
        }
    }

    /// Called after iteration `k` produced `x^{k+1}`. Returns true when the
    /// loop should stop.
    fn after_step(&mut self, k: usize, x_next: &[f64], z_next: &[f64], gamma: f64, digest: u64) -> bool {
        self.snapshot(k + 1, x_next, z_next);
        let last = k == self.config.iters;
        if k % self.stride != 0 && !last {
            return false;
        }
        let f = self.instance.loss_unchecked(x_next);
        self.last_objective = f;
        self.push_row(k + 1, f, x_next, gamma, digest);
        if !f.is_finite() || f > self.blowup {
            self.diverged = true;
            return true;
        }
        if self.threshold.is_some_and(|t| f <= t) {
            self.stop_iter = Some(k);
            return true;
        }
        false
    }

    fn check_prox(&mut self, converged: bool) {
        if !converged {
            self.prox_unconverged += 1;
        }
    }

    fn finish(
        self,
        x: Vec<f64>,
        iterations: usize,
        gamma: f64,
        digest: u64,
        started: Instant,
        x0: &[f64],
        warnings: Vec<String>,
    ) -> Result<RunRecord> {
        let final_objective = self.instance.loss_unchecked(&x);
        let all: Vec<usize> = (0..self.instance.n()).collect();
        let l0 = model_lipschitz(self.config.kind, self.instance, &all, x0)?;
        let l1 = model_lipschitz(self.config.kind, self.instance, &all, &x)?;
        Ok(RunRecord {
            rows: self.rows,
            stop_iter: self.stop_iter.unwrap_or(self.config.iters + 1),
            reached_threshold: self.stop_iter.is_some(),
            iterations,
            final_objective,
            diverged: self.diverged || !final_objective.is_finite(),
            final_x: x,
            wall_time: started.elapsed().as_secs_f64(),
            gamma,
            k_star: self.k_star,
            k_star_point: self.k_star_point,
            snapshots: self.snapshots,
            batch_digest: digest,
            prox_unconverged: self.prox_unconverged,
            lipschitz_grew: l1 > 10.0 * l0,
            warnings,
        })
    }
}

fn at_iter(iter: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtIteration {
        iter,
        source: Box::new(e),
    }
}

fn check_algorithm(config: &SolverConfig, allowed: &[Algorithm]) -> Result<()> {
    config.validate()?;
    if allowed.contains(&config.algorithm) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "algorithm {} not handled by this loop",
            config.algorithm.name()
        )))
    }
}

/// Runs the configured method from `x0`.
pub fn run(instance: &ProblemInstance, config: &SolverConfig, x0: &[f64]) -> Result<RunRecord> {
    match config.algorithm {
        Algorithm::SmodMinibatch => run_smod_minibatch(instance, config, x0),
        Algorithm::Semod | Algorithm::SemodMinibatch => run_semod(instance, config, x0),
        Algorithm::Nesterov => run_asmod_nesterov(instance, config, x0),
    }
}

/// `x^{k+1} = argmin f_{x^k}(x, B_k) + (γ/2)‖x − x^k‖²`.
pub fn run_smod_minibatch(instance: &ProblemInstance, config: &SolverConfig, x0: &[f64]) -> Result<RunRecord> {
    check_algorithm(config, &[Algorithm::SmodMinibatch])?;
    extrapolated_loop(instance, config, x0)
}

/// `y^k = x^k + β(x^k − x^{k−1})`,
/// `x^{k+1} = argmin f_{x^k}(x, B_k) + (γ/2)‖x − y^k‖²`, with `x¹ = x⁰`.
/// Snapshots carry `z^k = x^k + β/(1−β)(x^k − x^{k−1})` as well.
pub fn run_semod(instance: &ProblemInstance, config: &SolverConfig, x0: &[f64]) -> Result<RunRecord> {
    check_algorithm(config, &[Algorithm::Semod, Algorithm::SemodMinibatch])?;
    extrapolated_loop(instance, config, x0)
}

fn extrapolated_loop(instance: &ProblemInstance, config: &SolverConfig, x0: &[f64]) -> Result<RunRecord> {
    instance.check_dim(x0)?;
    let started = Instant::now();
    let (gamma, warnings) = config.resolve_gamma(instance, x0)?;
    let mut rec = Recorder::new(instance, config, x0, gamma);
    let mut sampler = BatchSampler::new(config.seed, instance.n(), config.batch);
    let mut state = IterateState::new(x0);
    let mut iterations = 0;
    if rec.stop_iter.is_none() {
        for k in 1..=config.iters {
            // y^k is fixed before the batch is drawn
            let y = state.extrapolated(config.beta);
            let batch = sampler.next_batch();
            let req = ProxRequest::new(config.kind, instance, &batch, &state.x_curr, &y, gamma)
                .with_tol(config.prox_tol)
                .with_max_inner(config.max_inner);
            let res = prox_step(&req).map_err(at_iter(k))?;
            rec.check_prox(res.converged);
            state.advance(res.x_plus);
            iterations = k;
            let z = if rec.wants_snapshot(k + 1) {
                state.auxiliary(config.beta)
            } else {
                Vec::new()
            };
            if rec.after_step(k, &state.x_curr, &z, gamma, sampler.digest()) {
                break;
            }
        }
    }
    let digest = sampler.digest();
    rec.finish(state.x_curr, iterations, gamma, digest, started, x0, warnings)
}

/// Accelerated method, `θ_k = 2/(k+2)`, `γ_k = γ/(k+1)`:
/// `y^k = (1−θ_k)x^k + θ_k z^k`,
/// `z^{k+1} = argmin f_{y^k}(x, B_k) + (γ_k/2)‖x − z^k‖²`,
/// `x^{k+1} = (1−θ_k)x^k + θ_k z^{k+1}`, with `x⁰ = z⁰`.
/// Iteration `k` (0-based) is reported as `k + 1`.
pub fn run_asmod_nesterov(instance: &ProblemInstance, config: &SolverConfig, x0: &[f64]) -> Result<RunRecord> {
    check_algorithm(config, &[Algorithm::Nesterov])?;
    debug_assert!(matches!(config.schedule, Schedule::Nesterov { .. }));
    instance.check_dim(x0)?;
    let started = Instant::now();
    let (base, warnings) = config.resolve_gamma(instance, x0)?;
    let mut rec = Recorder::new(instance, config, x0, base);
    let mut sampler = BatchSampler::new(config.seed, instance.n(), config.batch);
    let mut x = x0.to_vec();
    let mut z = x0.to_vec();
    let mut iterations = 0;
    if rec.stop_iter.is_none() {
        for k in 0..config.iters {
            let step = nesterov_step(k, base);
            let th = step.theta;
            let y: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| xi + th * (zi - xi)).collect();
            let batch = sampler.next_batch();
            let req = ProxRequest::new(config.kind, instance, &batch, &y, &z, step.gamma)
                .with_tol(config.prox_tol)
                .with_max_inner(config.max_inner);
            let res = prox_step(&req).map_err(at_iter(k + 1))?;
            rec.check_prox(res.converged);
            z = res.x_plus;
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += th * (zi - *xi);
            }
            iterations = k + 1;
            if rec.after_step(k + 1, &x, &z, step.gamma, sampler.digest()) {
                break;
            }
        }
    }
    let digest = sampler.digest();
    rec.finish(x, iterations, base, digest, started, x0, warnings)
}
