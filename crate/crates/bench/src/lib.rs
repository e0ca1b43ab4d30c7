//! Experiment harness for the `smod` solvers.
//!
//! Each command of the `smod` binary maps to a function here, so sweeps
//! can also be driven from Rust:
//!
//! | command        | function                                   | output                                 |
//! |----------------|--------------------------------------------|----------------------------------------|
//! | `gen`          | [`gen_command`]                            | `instance.txt`                         |
//! | `run`          | [`grid::run_experiment`]                   | `results.csv`, `traces/*.csv`          |
//! | `speedup`      | [`speedup::speedup_table`]                 | `speedup.csv`, `alpha0.csv`            |
//! | `stationarity` | [`single::stationarity_command`]           | `stationarity.csv`                     |
//! | `recover`      | [`single::recover_command`]                | `recover/iter_<k>.txt`, `truth.txt`    |
//! | `stability`    | [`stability_cmd::stability_command`]       | `stability.csv`, `stability_summary.csv` |

pub mod config;
pub mod grid;
pub mod instance;
pub mod single;
pub mod speedup;
pub mod stability_cmd;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Result;
use smod::problems::io::write_instance;

use crate::config::ExperimentConfig;
use crate::grid::{read_results, RESULTS_FILE};
use crate::speedup::{alpha0_table, speedup_table};

/// Generates the configured instance and writes it to `out/instance.txt`.
pub fn gen_command(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let inst = instance::build_instance(&cfg.instance, cfg.instance_seed())?;
    fs::create_dir_all(out)?;
    let path = out.join("instance.txt");
    write_instance(&inst, BufWriter::new(File::create(&path)?))?;
    Ok(path)
}

/// Reads `results` (default `out/results.csv`) and writes the speedup and
/// per-α0 tables next to it in `out`.
pub fn speedup_command(out: &Path, results: Option<&Path>) -> Result<Vec<speedup::SpeedupRow>> {
    let default = out.join(RESULTS_FILE);
    let rows = read_results(results.unwrap_or(&default))?;
    let table = speedup_table(&rows)?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("speedup.csv"))?;
    for r in &table {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("alpha0.csv"))?;
    for r in alpha0_table(&rows) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(table)
}
