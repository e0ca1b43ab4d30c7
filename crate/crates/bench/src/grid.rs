//! Experiment grid: one CSV row per run, appended in cell order.
//!
//! Cells are computed in parallel chunks and written by a single writer in
//! grid order, so the result file of a config does not depend on the
//! thread count (up to the `wall_time` column). A rerun skips every cell
//! whose key is already present.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smod::algorithms::{run, truth_distance, RunRecord, Schedule, SolverConfig, Stopping};
use smod::rng::derive_seed;
use smod::{ModelKind, ProblemInstance};

use crate::config::{parse_algorithm, ExperimentConfig, ResolvedGrid};
use crate::instance::{build_instance, initial_point};

pub const RESULTS_FILE: &str = "results.csv";
const CHUNK: usize = 64;

/// One grid cell: a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub algorithm: String,
    pub kind: ModelKind,
    pub beta: f64,
    pub m: usize,
    pub alpha0: f64,
    pub rep: usize,
}

impl Cell {
    pub fn key(&self) -> String {
        format!(
            "{}/{}/b{}/m{}/a{:e}/r{}",
            self.algorithm,
            self.kind.name(),
            self.beta,
            self.m,
            self.alpha0,
            self.rep
        )
    }
}

/// Cells in file order: algorithm, kind, β, m, α0, repetition.
/// Only `semod` sweeps β; the other algorithms run once with β = 0.
pub fn cells(grid: &ResolvedGrid) -> Vec<Cell> {
    let mut out = Vec::new();
    for alg in &grid.algorithms {
        let betas = if alg == "semod" { grid.beta.clone() } else { vec![0.0] };
        for &kind in &grid.kinds {
            for &beta in &betas {
                for &m in &grid.batch {
                    for &alpha0 in &grid.alpha0 {
                        for rep in 0..grid.seeds {
                            out.push(Cell {
                                algorithm: alg.clone(),
                                kind,
                                beta,
                                m,
                                alpha0,
                                rep,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// `status` is `ok` (threshold reached), `max` (horizon exhausted),
/// `diverged` or `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub key: String,
    pub problem: String,
    pub algorithm: String,
    pub solver: String,
    pub kind: String,
    pub alpha0: f64,
    pub m: usize,
    pub beta: f64,
    pub rep: usize,
    pub seed: u64,
    pub instance_seed: u64,
    pub n: usize,
    pub d: usize,
    pub epochs: usize,
    pub horizon: usize,
    pub threshold: f64,
    pub status: String,
    pub stop_iter: usize,
    pub iterations: usize,
    pub final_objective: f64,
    pub f_hat: Option<f64>,
    pub gamma: f64,
    pub dist_to_truth: Option<f64>,
    pub k_star: usize,
    pub batch_digest: String,
    pub prox_unconverged: usize,
    pub lipschitz_grew: bool,
    pub wall_time: f64,
    pub message: String,
}

impl ResultRow {
    pub fn reached(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridSummary {
    pub total: usize,
    pub skipped: usize,
    pub ran: usize,
    pub failed: usize,
}

/// Horizon `K = epochs · ⌈n/m⌉`.
pub fn horizon(epochs: usize, n: usize, m: usize) -> usize {
    epochs * n.div_ceil(m)
}

pub fn solver_config(cell: &Cell, horizon: usize, threshold: f64, seed: u64, has_f_hat: bool) -> Result<SolverConfig> {
    let algorithm = parse_algorithm(&cell.algorithm, cell.m)?;
    let schedule = if cell.algorithm == "nesterov" {
        // α0 plays the role of the distance estimate D̃
        Schedule::Nesterov {
            d_tilde: cell.alpha0,
            eta: None,
        }
    } else {
        Schedule::Experiment { alpha0: cell.alpha0 }
    };
    let stopping = if has_f_hat {
        Stopping::ObjectiveThreshold(threshold)
    } else {
        Stopping::Horizon
    };
    Ok(SolverConfig::new(algorithm, cell.kind, horizon, cell.m)
        .with_schedule(schedule)
        .with_beta(cell.beta)
        .with_seed(seed)
        .with_stopping(stopping))
}

struct RunContext<'a> {
    cfg: &'a ExperimentConfig,
    grid: &'a ResolvedGrid,
    instances: Vec<(u64, ProblemInstance)>,
    trace_dir: Option<PathBuf>,
}

impl RunContext<'_> {
    fn instance(&self, rep: usize) -> &(u64, ProblemInstance) {
        &self.instances[if self.grid.fresh_data { rep } else { 0 }]
    }

    fn run_cell(&self, cell: &Cell) -> ResultRow {
        let (instance_seed, inst) = self.instance(cell.rep);
        let seed = derive_seed(self.cfg.base_seed(), cell.rep as u64);
        let k = horizon(self.grid.epochs, inst.n(), cell.m);
        let mut row = ResultRow {
            key: cell.key(),
            problem: self.cfg.instance.problem.clone(),
            algorithm: cell.algorithm.clone(),
            solver: String::new(),
            kind: cell.kind.name().into(),
            alpha0: cell.alpha0,
            m: cell.m,
            beta: cell.beta,
            rep: cell.rep,
            seed,
            instance_seed: *instance_seed,
            n: inst.n(),
            d: inst.var_dim(),
            epochs: self.grid.epochs,
            horizon: k,
            threshold: self.grid.threshold,
            status: "error".into(),
            stop_iter: k + 1,
            iterations: 0,
            final_objective: f64::NAN,
            f_hat: inst.f_hat,
            gamma: f64::NAN,
            dist_to_truth: None,
            k_star: 0,
            batch_digest: String::new(),
            prox_unconverged: 0,
            lipschitz_grew: false,
            wall_time: 0.0,
            message: String::new(),
        };
        let outcome = solver_config(cell, k, self.grid.threshold, seed, inst.f_hat.is_some()).and_then(|sc| {
            row.solver = sc.algorithm.name().into();
            let x0 = initial_point(&self.cfg.instance, inst, seed);
            Ok(run(inst, &sc, &x0)?)
        });
        match outcome {
            Ok(rec) => {
                fill(&mut row, inst, &rec);
                if let Some(dir) = &self.trace_dir {
                    if let Err(e) = write_trace(&dir.join(trace_name(&row.key)), &rec) {
                        row.message = format!("trace not written: {e}");
                    }
                }
            }
            Err(e) => row.message = format!("{e:#}"),
        }
        row
    }
}

fn fill(row: &mut ResultRow, inst: &ProblemInstance, rec: &RunRecord) {
    row.status = if rec.reached_threshold {
        "ok"
    } else if rec.diverged {
        "diverged"
    } else {
        "max"
    }
    .into();
    row.stop_iter = rec.stop_iter;
    row.iterations = rec.iterations;
    row.final_objective = rec.final_objective;
    row.gamma = rec.gamma;
    row.dist_to_truth = truth_distance(inst, &rec.final_x);
    row.k_star = rec.k_star;
    row.batch_digest = format!("{:016x}", rec.batch_digest);
    row.prox_unconverged = rec.prox_unconverged;
    row.lipschitz_grew = rec.lipschitz_grew;
    row.wall_time = rec.wall_time;
    row.message = rec.warnings.join("; ");
}

fn trace_name(key: &str) -> String {
    let safe: String = key.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
    format!("{safe}.csv")
}

#[derive(Serialize)]
struct TraceCsvRow {
    k: usize,
    objective: f64,
    dist_to_truth: Option<f64>,
    gamma: f64,
    batch_digest: String,
}

fn write_trace(path: &Path, rec: &RunRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &rec.rows {
        w.serialize(TraceCsvRow {
            k: r.k,
            objective: r.objective,
            dist_to_truth: r.dist_to_truth,
            gamma: r.gamma,
            batch_digest: format!("{:016x}", r.batch_digest),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// One instance per repetition with `fresh_data`, otherwise a single one.
fn build_instances(cfg: &ExperimentConfig, grid: &ResolvedGrid) -> Result<Vec<(u64, ProblemInstance)>> {
    let base = cfg.instance_seed();
    if !grid.fresh_data {
        return Ok(vec![(base, build_instance(&cfg.instance, base)?)]);
    }
    (0..grid.seeds)
        .map(|rep| {
            let s = derive_seed(base, rep as u64);
            Ok((s, build_instance(&cfg.instance, s)?))
        })
        .collect()
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row.with_context(|| format!("parsing {}", path.display()))?);
    }
    Ok(rows)
}

/// Runs every cell of the grid not yet present in `out/results.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<GridSummary> {
    let grid = cfg.grid.resolve(cfg.instance.is_zipcode())?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(RESULTS_FILE);
    let done: HashSet<String> = if path.exists() && fs::metadata(&path)?.len() > 0 {
        read_results(&path)?.into_iter().map(|r| r.key).collect()
    } else {
        HashSet::new()
    };
    let all = cells(&grid);
    let todo: Vec<Cell> = all.iter().filter(|c| !done.contains(&c.key())).cloned().collect();
    let mut summary = GridSummary {
        total: all.len(),
        skipped: all.len() - todo.len(),
        ..Default::default()
    };
    if todo.is_empty() {
        return Ok(summary);
    }

    let instances = build_instances(cfg, &grid)?;
    let trace_dir = if grid.traces {
        let d = out.join("traces");
        fs::create_dir_all(&d)?;
        Some(d)
    } else {
        None
    };
    let ctx = RunContext {
        cfg,
        grid: &grid,
        instances,
        trace_dir,
    };

    let fresh = done.is_empty();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for chunk in todo.chunks(CHUNK) {
        let rows: Vec<ResultRow> = chunk.par_iter().map(|c| ctx.run_cell(c)).collect();
        for row in rows {
            if row.status == "error" {
                summary.failed += 1;
            }
            w.serialize(&row)?;
            summary.ran += 1;
        }
        w.flush()?;
    }
    Ok(summary)
}

/// Runs a grid in memory without touching the disk.
pub fn run_grid_rows(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let grid = cfg.grid.resolve(cfg.instance.is_zipcode())?;
    let instances = build_instances(cfg, &grid)?;
    let ctx = RunContext {
        cfg,
        grid: &grid,
        instances,
        trace_dir: None,
    };
    Ok(cells(&grid).par_iter().map(|c| ctx.run_cell(c)).collect())
}
