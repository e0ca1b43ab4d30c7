//! Replace-one stability sweeps over model kinds and batch sizes.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use smod::models::model_constants;
use smod::rng::derive_seed;
use smod::stability::{expectation_gap_estimate, stability_report, stability_trials, Replacement, StabilityReport};
use smod::{ModelKind, ProblemInstance};

use crate::config::{parse_kind, ExperimentConfig, StabilityConfig};
use crate::instance::{build_instance, initial_point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub kind: String,
    pub m: usize,
    pub trial: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub position: usize,
    pub replacement: usize,
    pub distance: f64,
    pub lipschitz: f64,
    pub bound: f64,
    pub ratio: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: String,
    pub m: usize,
    pub gamma: f64,
    pub trials: usize,
    pub excluded: usize,
    pub violations: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub gap_estimate: Option<f64>,
    pub gap_half_width: Option<f64>,
    pub gap_bound: Option<f64>,
}

/// Proximal weight used for `kind` unless the config fixes one.
pub fn stability_gamma(cfg: &StabilityConfig, kind: ModelKind, inst: &ProblemInstance) -> f64 {
    if let Some(g) = cfg.gamma {
        return g;
    }
    let c = model_constants(kind, inst);
    let scale = c.lambda.max(c.tau);
    if scale > 0.0 {
        cfg.gamma_factor * scale
    } else {
        1.0
    }
}

pub struct StabilityOutput {
    pub trials: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
    pub reports: Vec<StabilityReport>,
}

pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityOutput> {
    let sc = &cfg.stability;
    let inst = build_instance(&cfg.instance, cfg.instance_seed())?;
    let base = cfg.base_seed();
    let z = initial_point(&cfg.instance, &inst, base);
    let mode = if sc.identical {
        Replacement::Identical
    } else {
        Replacement::Iid
    };
    let mut out = StabilityOutput {
        trials: Vec::new(),
        summary: Vec::new(),
        reports: Vec::new(),
    };
    for (ki, name) in sc.kinds.iter().enumerate() {
        let kind = parse_kind(name)?;
        let gamma = stability_gamma(sc, kind, &inst);
        for &m in &sc.batch {
            let seed = derive_seed(derive_seed(base, ki as u64), m as u64);
            let trials = stability_trials(&inst, kind, &z, &z, gamma, m, seed, sc.trials, mode)
                .with_context(|| format!("stability trials for {name}, m = {m}"))?;
            let gap = if sc.gap_trials > 0 {
                Some(expectation_gap_estimate(&inst, kind, &z, gamma, m, sc.gap_trials, derive_seed(seed, 1 << 32))?)
            } else {
                None
            };
            let report = stability_report(&trials, sc.tol, gap);
            out.trials.extend(trials.iter().enumerate().map(|(t, tr)| TrialRow {
                kind: kind.name().into(),
                m,
                trial: t,
                gamma,
                lambda: tr.lambda,
                position: tr.position,
                replacement: tr.replacement,
                distance: tr.distance,
                lipschitz: tr.lipschitz,
                bound: tr.bound,
                ratio: tr.ratio(),
                valid: tr.valid,
            }));
            out.summary.push(SummaryRow {
                kind: kind.name().into(),
                m,
                gamma,
                trials: report.trials,
                excluded: report.excluded,
                violations: report.violations,
                max_ratio: report.max_ratio,
                mean_ratio: report.mean_ratio,
                gap_estimate: gap.map(|g| g.estimate),
                gap_half_width: gap.map(|g| g.half_width),
                gap_bound: gap.map(|g| g.bound),
            });
            out.reports.push(report);
        }
    }
    Ok(out)
}

/// Writes `stability.csv` (one row per trial) and `stability_summary.csv`.
pub fn stability_command(cfg: &ExperimentConfig, out: &Path) -> Result<StabilityOutput> {
    let res = run_stability(cfg)?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("stability.csv"))?;
    for r in &res.trials {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("stability_summary.csv"))?;
    for r in &res.summary {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(res)
}
