//! Single-run commands: stationarity traces and recovery dumps.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smod::algorithms::{run, RunRecord, Snapshot, Stopping};
use smod::problems::io::write_matrix;
use smod::rng::derive_seed;
use smod::stationarity::{moreau_prox_detailed, ObjectiveOracle, DEFAULT_TOL};
use smod::ProblemInstance;

use crate::config::{parse_kind, ExperimentConfig, SingleRunConfig};
use crate::grid::{horizon, solver_config, Cell};
use crate::instance::{build_instance, initial_point};

/// Runs `spec` on `inst`, storing the iterates at `capture` labels.
pub fn single_run(
    cfg: &ExperimentConfig,
    spec: &SingleRunConfig,
    inst: &ProblemInstance,
    capture: Vec<usize>,
) -> Result<RunRecord> {
    let cell = Cell {
        algorithm: spec.algorithm.clone(),
        kind: parse_kind(&spec.kind)?,
        beta: spec.beta,
        m: spec.batch,
        alpha0: spec.alpha0,
        rep: spec.rep as usize,
    };
    let k = horizon_of(spec, inst);
    let seed = derive_seed(cfg.base_seed(), spec.rep);
    let mut sc = solver_config(&cell, k, spec.threshold.unwrap_or(2.0), seed, false)?.with_capture(capture);
    if let Some(c) = spec.threshold {
        if inst.f_hat.is_none() {
            bail!("a threshold needs an instance with a known f_hat");
        }
        sc = sc.with_stopping(Stopping::ObjectiveThreshold(c));
    }
    let x0 = initial_point(&cfg.instance, inst, seed);
    Ok(run(inst, &sc, &x0)?)
}

fn horizon_of(spec: &SingleRunConfig, inst: &ProblemInstance) -> usize {
    spec.iters.unwrap_or_else(|| horizon(spec.epochs, inst.n(), spec.batch))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityRow {
    pub k: usize,
    pub objective: f64,
    pub grad_norm_x: f64,
    pub grad_norm_z: f64,
    pub converged: bool,
}

/// Default `ρ`: twice the weak convexity of the objective, or 1 when the
/// objective is convex.
pub fn default_rho(inst: &ProblemInstance) -> Result<f64> {
    let all: Vec<usize> = (0..inst.n()).collect();
    let mu = ObjectiveOracle::new(inst, &all)?.mu();
    Ok(if mu > 0.0 { 2.0 * mu } else { 1.0 })
}

/// `‖∇f_{1/ρ}‖` at the stored `x^k` and `z^k`.
pub fn stationarity_trace(inst: &ProblemInstance, snapshots: &[Snapshot], rho: f64) -> Result<Vec<StationarityRow>> {
    let all: Vec<usize> = (0..inst.n()).collect();
    let oracle = ObjectiveOracle::new(inst, &all)?;
    snapshots
        .par_iter()
        .map(|s| {
            let px = moreau_prox_detailed(&oracle, &s.x, rho, DEFAULT_TOL)?;
            let pz = moreau_prox_detailed(&oracle, &s.z, rho, DEFAULT_TOL)?;
            Ok(StationarityRow {
                k: s.k,
                objective: oracle.value(&s.x)?,
                grad_norm_x: rho * smod::linalg::dist(&s.x, &px.point),
                grad_norm_z: rho * smod::linalg::dist(&s.z, &pz.point),
                converged: px.converged && pz.converged,
            })
        })
        .collect()
}

/// Labels `1, 1+s, 1+2s, …` below `K + 1`.
pub fn strided_labels(k: usize, stride: usize) -> Vec<usize> {
    (0..k).step_by(stride.max(1)).map(|j| j + 1).collect()
}

pub fn stationarity_command(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let spec = &cfg.stationarity;
    if spec.stride == 0 {
        bail!("stationarity.stride must be at least 1");
    }
    let inst = build_instance(&cfg.instance, cfg.instance_seed())?;
    let rho = match spec.rho {
        Some(r) => r,
        None => default_rho(&inst)?,
    };
    let labels = strided_labels(horizon_of(spec, &inst), spec.stride);
    let rec = single_run(cfg, spec, &inst, labels)?;
    let rows = stationarity_trace(&inst, &rec.snapshots, rho)?;
    fs::create_dir_all(out)?;
    let path = out.join("stationarity.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}

/// Side length of a square reshaping of a length-`len` vector.
pub fn square_side(len: usize) -> Result<usize> {
    let s = (len as f64).sqrt().round() as usize;
    if s * s != len {
        bail!("dimension {len} is not a perfect square");
    }
    Ok(s)
}

/// Inverse of column-major vectorization.
pub fn reshape_column_major(x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let s = square_side(x.len())?;
    Ok((0..s).map(|i| (0..s).map(|j| x[j * s + i]).collect()).collect())
}

/// Writes `iter_<k>.txt` for every captured checkpoint, plus `truth.txt`
/// when the instance carries one. Returns the iterate files.
pub fn recover_command(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = &cfg.recover;
    let inst = build_instance(&cfg.instance, cfg.instance_seed())?;
    square_side(inst.var_dim())?;
    if spec.checkpoints.is_empty() {
        return Ok(Vec::new());
    }
    let rec = single_run(cfg, spec, &inst, spec.checkpoints.clone())?;
    let dir = out.join("recover");
    fs::create_dir_all(&dir)?;
    if let Some(t) = &inst.truth {
        write_matrix(&reshape_column_major(t)?, fs::File::create(dir.join("truth.txt"))?)?;
    }
    let mut files = Vec::new();
    for s in &rec.snapshots {
        let path = dir.join(format!("iter_{}.txt", s.k));
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_matrix(&reshape_column_major(&s.x)?, f)?;
        files.push(path);
    }
    Ok(files)
}
