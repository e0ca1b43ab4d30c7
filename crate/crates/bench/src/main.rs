use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use smod_bench::config::{ExperimentConfig, LogGrid};
use smod_bench::{gen_command, grid, single, speedup_command, stability_cmd};

#[derive(Parser)]
#[command(name = "smod", version, about = "Sweeps and diagnostics for stochastic model-based methods")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Base seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file
    Gen {
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        p_fail: Option<f64>,
    },
    /// Run the experiment grid (resumable)
    Run {
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        batch: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        beta: Option<Vec<f64>>,
        /// Explicit α0 values
        #[arg(long, value_delimiter = ',')]
        alpha0: Option<Vec<f64>>,
        /// Log grid as COUNT,LO,HI
        #[arg(long, value_delimiter = ',', num_args = 3)]
        alpha0_grid: Option<Vec<f64>>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        traces: bool,
    },
    /// Speedup table from a results file
    Speedup {
        /// Results CSV (default: <out>/results.csv)
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Moreau-envelope gradient norms along one run
    Stationarity {
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Dump reshaped iterates of one run
    Recover {
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<usize>>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Replace-one stability trials
    Stability {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        identical: bool,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        gap_trials: Option<usize>,
    },
}

fn load(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if g.out.is_some() {
        cfg.out.clone_from(&g.out);
    }
    if g.threads.is_some() {
        cfg.threads = g.threads;
    }
    if g.seed.is_some() {
        cfg.seed = g.seed;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = load(&cli.global)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out = cfg.out_dir();
    match cli.command {
        Command::Gen { problem, n, d, p_fail } => {
            let i = &mut cfg.instance;
            if let Some(p) = problem {
                i.problem = p;
            }
            i.n = n.unwrap_or(i.n);
            i.d = d.unwrap_or(i.d);
            i.p_fail = p_fail.unwrap_or(i.p_fail);
            let path = gen_command(&cfg, &out)?;
            println!("wrote {}", path.display());
        }
        Command::Run {
            algorithms,
            kinds,
            batch,
            beta,
            alpha0,
            alpha0_grid,
            epochs,
            seeds,
            traces,
        } => {
            let g = &mut cfg.grid;
            if let Some(v) = algorithms {
                g.algorithms = v;
            }
            if let Some(v) = kinds {
                g.kinds = v;
            }
            if let Some(v) = batch {
                g.batch = v;
            }
            if beta.is_some() {
                g.beta = beta;
            }
            if let Some(v) = alpha0_grid {
                g.alpha0 = Some(LogGrid {
                    count: v[0] as usize,
                    lo: v[1],
                    hi: v[2],
                });
                g.alpha0_values = None;
            }
            if alpha0.is_some() {
                g.alpha0_values = alpha0;
            }
            if epochs.is_some() {
                g.epochs = epochs;
            }
            g.seeds = seeds.unwrap_or(g.seeds);
            g.traces |= traces;
            let s = grid::run_experiment(&cfg, &out)?;
            println!(
                "{} cells: {} run, {} already present, {} failed",
                s.total, s.ran, s.skipped, s.failed
            );
        }
        Command::Speedup { results } => {
            for r in speedup_command(&out, results.as_deref())? {
                println!(
                    "{:>8} {:>4} beta={:<4} m={:<3} T*={:<10.1} speedup={:.2}",
                    r.algorithm, r.kind, r.beta, r.m, r.t_star, r.speedup
                );
            }
        }
        Command::Stationarity { stride, rho, iters } => {
            let s = &mut cfg.stationarity;
            s.stride = stride.unwrap_or(s.stride);
            if rho.is_some() {
                s.rho = rho;
            }
            if iters.is_some() {
                s.iters = iters;
            }
            let path = single::stationarity_command(&cfg, &out)?;
            println!("wrote {}", path.display());
        }
        Command::Recover { checkpoints, iters } => {
            let r = &mut cfg.recover;
            if let Some(c) = checkpoints {
                r.checkpoints = c;
            }
            if iters.is_some() {
                r.iters = iters;
            }
            let files = single::recover_command(&cfg, &out)?;
            println!("wrote {} checkpoint files", files.len());
        }
        Command::Stability {
            trials,
            identical,
            gamma,
            gap_trials,
        } => {
            let s = &mut cfg.stability;
            s.trials = trials.unwrap_or(s.trials);
            s.identical |= identical;
            if gamma.is_some() {
                s.gamma = gamma;
            }
            s.gap_trials = gap_trials.unwrap_or(s.gap_trials);
            let res = stability_cmd::stability_command(&cfg, &out)?;
            for r in &res.summary {
                println!(
                    "{:>4} m={:<3} trials={} violations={} max_ratio={:.3}",
                    r.kind, r.m, r.trials, r.violations, r.max_ratio
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
