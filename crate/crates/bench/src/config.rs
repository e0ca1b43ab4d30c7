//! Experiment configuration files.
//!
//! A config is a TOML document. Every key is optional; command-line flags
//! override file keys. See the README for the full grammar.
//!
//! ```toml
//! seed = 7
//! out = "results"
//!
//! [instance]
//! problem = "phase_retrieval"
//! n = 300
//! d = 100
//!
//! [grid]
//! kinds = ["spl", "sgd"]
//! batch = [1, 4, 8, 16]
//! seeds = 5
//! alpha0 = { count = 10, lo = 0.1, hi = 100.0 }
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use smod::algorithms::Algorithm;
use smod::models::ModelKind;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed for algorithm randomness. The instance seed falls back to it.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub instance: InstanceConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub stationarity: SingleRunConfig,
    #[serde(default)]
    pub recover: SingleRunConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
}

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    /// `phase_retrieval`, `blind_deconvolution`, `absolute_deviation` or `zipcode`.
    pub problem: String,
    pub n: usize,
    pub d: usize,
    pub kappa: f64,
    pub p_fail: f64,
    pub noise_std: f64,
    pub seed: Option<u64>,
    /// Serialized instance to load instead of generating one.
    pub path: Option<PathBuf>,
    /// 16×16 image for `zipcode`.
    pub image: Option<PathBuf>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            problem: "phase_retrieval".into(),
            n: 300,
            d: 100,
            kappa: 10.0,
            p_fail: 0.2,
            noise_std: 5.0,
            seed: None,
            path: None,
            image: None,
        }
    }
}

impl InstanceConfig {
    pub fn is_zipcode(&self) -> bool {
        self.problem == "zipcode"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl LogGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.log10(), self.hi.log10());
        (0..self.count)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / (self.count - 1) as f64))
            .collect()
    }
}

/// Sweep over algorithm, model kind, α0, m and β, repeated `seeds` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// `smod`, `semod` (heavy ball; minibatch variant when `m > 1`) or `nesterov`.
    pub algorithms: Vec<String>,
    pub kinds: Vec<String>,
    pub alpha0: Option<LogGrid>,
    /// Explicit α0 values; wins over `alpha0`.
    pub alpha0_values: Option<Vec<f64>>,
    pub batch: Vec<usize>,
    /// Momentum values for `semod`; other algorithms run with 0.
    pub beta: Option<Vec<f64>>,
    pub epochs: Option<usize>,
    pub seeds: usize,
    pub threshold: f64,
    /// Regenerate the instance for every repetition instead of only the
    /// batch and initial-point randomness.
    pub fresh_data: bool,
    /// Write one trace CSV per run under `traces/`.
    pub traces: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            algorithms: vec!["smod".into()],
            kinds: vec!["spl".into()],
            alpha0: None,
            alpha0_values: None,
            batch: vec![1, 4, 8, 16, 32, 64],
            beta: None,
            epochs: None,
            seeds: 20,
            threshold: 1.5,
            fresh_data: false,
            traces: false,
        }
    }
}

/// A grid with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGrid {
    pub algorithms: Vec<String>,
    pub kinds: Vec<ModelKind>,
    pub alpha0: Vec<f64>,
    pub batch: Vec<usize>,
    pub beta: Vec<f64>,
    pub epochs: usize,
    pub seeds: usize,
    pub threshold: f64,
    pub fresh_data: bool,
    pub traces: bool,
}

pub const GRID_ALGORITHMS: [&str; 3] = ["smod", "semod", "nesterov"];

impl GridConfig {
    fn momentum(&self) -> bool {
        self.algorithms.iter().any(|a| a == "semod")
    }

    pub fn resolve(&self, zipcode: bool) -> Result<ResolvedGrid> {
        for a in &self.algorithms {
            if !GRID_ALGORITHMS.contains(&a.as_str()) {
                bail!("unknown algorithm {a:?} (expected one of {GRID_ALGORITHMS:?})");
            }
        }
        let kinds = self
            .kinds
            .iter()
            .map(|k| ModelKind::from_name(k).with_context(|| format!("unknown model kind {k:?}")))
            .collect::<Result<Vec<_>>>()?;
        let momentum = self.momentum();
        let alpha0 = match (&self.alpha0_values, &self.alpha0) {
            (Some(v), _) => v.clone(),
            (None, Some(g)) => {
                if g.count == 0 || !(g.lo > 0.0 && g.hi >= g.lo) {
                    bail!("alpha0 grid needs count >= 1 and 0 < lo <= hi");
                }
                g.values()
            }
            (None, None) => default_alpha0(zipcode, momentum).values(),
        };
        let beta = match &self.beta {
            Some(b) => b.clone(),
            None if momentum => vec![if zipcode { 0.9 } else { 0.6 }],
            None => vec![0.0],
        };
        let epochs = self.epochs.unwrap_or(if momentum { 400 } else { 200 });
        let grid = ResolvedGrid {
            algorithms: self.algorithms.clone(),
            kinds,
            alpha0,
            batch: self.batch.clone(),
            beta,
            epochs,
            seeds: self.seeds,
            threshold: self.threshold,
            fresh_data: self.fresh_data,
            traces: self.traces,
        };
        grid.validate()?;
        Ok(grid)
    }
}

impl ResolvedGrid {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("algorithms", self.algorithms.is_empty()),
            ("kinds", self.kinds.is_empty()),
            ("alpha0", self.alpha0.is_empty()),
            ("batch", self.batch.is_empty()),
            ("beta", self.beta.is_empty()),
        ];
        for (name, is_empty) in empty {
            if is_empty {
                bail!("grid.{name} is empty");
            }
        }
        if self.epochs == 0 {
            bail!("grid.epochs must be at least 1");
        }
        if self.seeds == 0 {
            bail!("grid.seeds must be at least 1");
        }
        if self.batch.contains(&0) {
            bail!("batch sizes must be positive");
        }
        if self.alpha0.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            bail!("alpha0 values must be positive");
        }
        if self.beta.iter().any(|b| !(0.0..1.0).contains(b)) {
            bail!("beta values must lie in [0, 1)");
        }
        if !(self.threshold > 1.0) {
            bail!("threshold must exceed 1");
        }
        Ok(())
    }
}

/// Default α0 ranges: `[1e-1, 1e2]` synthetic, `[1e1, 1e3]` zipcode,
/// `[1e-2, 1]` and `[1, 10]` for momentum sweeps.
pub fn default_alpha0(zipcode: bool, momentum: bool) -> LogGrid {
    let (lo, hi) = match (zipcode, momentum) {
        (false, false) => (0.1, 100.0),
        (true, false) => (10.0, 1000.0),
        (false, true) => (0.01, 1.0),
        (true, true) => (1.0, 10.0),
    };
    LogGrid { count: 10, lo, hi }
}

/// One run for the `stationarity` and `recover` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingleRunConfig {
    pub algorithm: String,
    pub kind: String,
    pub alpha0: f64,
    pub batch: usize,
    pub beta: f64,
    pub epochs: usize,
    /// Horizon in iterations; wins over `epochs`.
    pub iters: Option<usize>,
    /// Stop at `threshold · f̂` when set.
    pub threshold: Option<f64>,
    /// Repetition index used to derive the run seed.
    pub rep: u64,
    /// Iterate stride for `stationarity`.
    pub stride: usize,
    pub rho: Option<f64>,
    /// Iteration labels dumped by `recover`; label 1 is the initial point.
    pub checkpoints: Vec<usize>,
}

impl Default for SingleRunConfig {
    fn default() -> Self {
        SingleRunConfig {
            algorithm: "smod".into(),
            kind: "spl".into(),
            alpha0: 1.0,
            batch: 1,
            beta: 0.0,
            epochs: 20,
            iters: None,
            threshold: None,
            rep: 0,
            stride: 1,
            rho: None,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub kinds: Vec<String>,
    pub batch: Vec<usize>,
    pub trials: usize,
    /// Proximal weight; defaults to `gamma_factor · max(curvature, 1e-12)`,
    /// or 1 on instances without curvature.
    pub gamma: Option<f64>,
    pub gamma_factor: f64,
    /// Replace the sample by itself (distances must vanish).
    pub identical: bool,
    /// Monte-Carlo trials for the expectation gap; 0 skips it.
    pub gap_trials: usize,
    pub tol: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            kinds: vec!["sgd".into(), "spl".into()],
            batch: vec![1, 4, 16],
            trials: 1000,
            gamma: None,
            gamma_factor: 3.0,
            identical: false,
            gap_trials: 0,
            tol: 1e-8,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn instance_seed(&self) -> u64 {
        self.instance.seed.unwrap_or_else(|| self.base_seed())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

pub fn parse_algorithm(name: &str, batch: usize) -> Result<Algorithm> {
    Ok(match name {
        "smod" => Algorithm::SmodMinibatch,
        "semod" if batch > 1 => Algorithm::SemodMinibatch,
        "semod" => Algorithm::Semod,
        "nesterov" => Algorithm::Nesterov,
        other => bail!("unknown algorithm {other:?}"),
    })
}

pub fn parse_kind(name: &str) -> Result<ModelKind> {
    ModelKind::from_name(name).with_context(|| format!("unknown model kind {name:?}"))
}
