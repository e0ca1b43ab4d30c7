//! Speedup tables computed offline from result rows.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::grid::ResultRow;

/// Series key: algorithm, model kind, β (as bits, for ordering).
type Series = (String, String, u64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub algorithm: String,
    pub kind: String,
    pub beta: f64,
    pub m: usize,
    pub best_alpha0: f64,
    /// Best mean stopping iteration over the α0 grid.
    pub t_star: f64,
    pub speedup: f64,
    /// Runs at `best_alpha0` and how many of them reached the threshold.
    pub runs: usize,
    pub reached: usize,
}

/// Mean stopping iteration of one (series, m, α0) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha0Row {
    pub algorithm: String,
    pub kind: String,
    pub beta: f64,
    pub m: usize,
    pub alpha0: f64,
    pub mean_iters: f64,
    pub runs: usize,
    pub reached: usize,
}

/// Per-cell means. A run that did not reach the threshold counts as the
/// largest iteration budget of its series, `max(K) + 1`, so a capped run
/// costs the same at every batch size.
pub fn alpha0_table(rows: &[ResultRow]) -> Vec<Alpha0Row> {
    let mut cap: BTreeMap<Series, usize> = BTreeMap::new();
    for r in rows {
        let c = cap.entry(series(r)).or_insert(0);
        *c = (*c).max(r.horizon + 1);
    }
    let mut acc: BTreeMap<(Series, usize, u64), (f64, usize, usize)> = BTreeMap::new();
    for r in rows {
        let s = series(r);
        let t = if r.reached() { r.stop_iter } else { cap[&s] };
        let e = acc.entry((s, r.m, r.alpha0.to_bits())).or_insert((0.0, 0, 0));
        e.0 += t as f64;
        e.1 += 1;
        e.2 += usize::from(r.reached());
    }
    acc.into_iter()
        .map(|(((algorithm, kind, beta), m, a), (sum, runs, reached))| Alpha0Row {
            algorithm,
            kind,
            beta: f64::from_bits(beta),
            m,
            alpha0: f64::from_bits(a),
            mean_iters: sum / runs as f64,
            runs,
            reached,
        })
        .collect()
}

fn series(r: &ResultRow) -> Series {
    (r.algorithm.clone(), r.kind.clone(), r.beta.to_bits())
}

/// `T*_m` (minimum over α0 of the mean stopping iteration) and
/// `T*_1 / T*_m` for every series and batch size.
pub fn speedup_table(rows: &[ResultRow]) -> Result<Vec<SpeedupRow>> {
    let mut best: BTreeMap<(Series, usize), Alpha0Row> = BTreeMap::new();
    for a in alpha0_table(rows) {
        let key = ((a.algorithm.clone(), a.kind.clone(), a.beta.to_bits()), a.m);
        match best.get(&key) {
            Some(b) if b.mean_iters <= a.mean_iters => {}
            _ => {
                best.insert(key, a);
            }
        }
    }
    let mut out = Vec::new();
    for ((s, m), b) in &best {
        let Some(base) = best.get(&(s.clone(), 1)) else {
            bail!("no m = 1 baseline for {} / {} / beta {}", s.0, s.1, f64::from_bits(s.2));
        };
        out.push(SpeedupRow {
            algorithm: s.0.clone(),
            kind: s.1.clone(),
            beta: f64::from_bits(s.2),
            m: *m,
            best_alpha0: b.alpha0,
            t_star: b.mean_iters,
            speedup: base.mean_iters / b.mean_iters,
            runs: b.runs,
            reached: b.reached,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: usize, alpha0: f64, stop: usize, horizon: usize, ok: bool) -> ResultRow {
        ResultRow {
            key: format!("{m}/{alpha0}/{stop}"),
            problem: "phase_retrieval".into(),
            algorithm: "smod".into(),
            solver: "smod".into(),
            kind: "spl".into(),
            alpha0,
            m,
            beta: 0.0,
            rep: 0,
            seed: 0,
            instance_seed: 0,
            n: 10,
            d: 2,
            epochs: 1,
            horizon,
            threshold: 1.5,
            status: if ok { "ok" } else { "max" }.into(),
            stop_iter: stop,
            iterations: stop,
            final_objective: 0.0,
            f_hat: Some(0.0),
            gamma: 1.0,
            dist_to_truth: None,
            k_star: 1,
            batch_digest: String::new(),
            prox_unconverged: 0,
            lipschitz_grew: false,
            wall_time: 0.0,
            message: String::new(),
        }
    }

    #[test]
    fn ratio_of_best_means() {
        let rows = vec![
            row(1, 1.0, 1000, 5000, true),
            row(1, 2.0, 1400, 5000, true),
            row(16, 1.0, 70, 400, true),
            row(16, 1.0, 90, 400, true),
            row(16, 2.0, 200, 400, true),
        ];
        let t = speedup_table(&rows).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].speedup, 1.0);
        assert_eq!(t[1].t_star, 80.0);
        assert_eq!(t[1].speedup, 12.5);
    }

    #[test]
    fn capped_runs_give_unit_speedup() {
        let rows = vec![
            row(1, 1.0, 5001, 5000, false),
            row(4, 1.0, 1251, 1250, false),
            row(16, 1.0, 313, 312, false),
        ];
        for r in speedup_table(&rows).unwrap() {
            assert_eq!(r.speedup, 1.0);
            assert_eq!(r.t_star, 5001.0);
        }
    }

    #[test]
    fn missing_baseline() {
        assert!(speedup_table(&[row(4, 1.0, 10, 100, true)]).is_err());
    }
}
