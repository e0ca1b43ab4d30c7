use std::fs;
use std::path::Path;
use std::process::Command;

use smod_bench::config::ExperimentConfig;
use smod_bench::grid::{read_results, run_experiment, RESULTS_FILE};
use smod_bench::single::{recover_command, stationarity_trace, strided_labels, single_run};
use smod_bench::speedup_command;
use smod_bench::stability_cmd::run_stability;

fn small(extra: &str) -> ExperimentConfig {
    let base = ["kinds = [\"spl\"]", "batch = [1]", "seeds = 1", "epochs = 30", "alpha0_values = [1.0]"];
    let mut grid: Vec<&str> = base
        .into_iter()
        .filter(|l| !extra.lines().any(|e| e.split('=').next() == l.split('=').next()))
        .collect();
    grid.extend(extra.lines());
    let text = format!("seed = 5\n[instance]\nn = 40\nd = 6\n[grid]\n{}\n", grid.join("\n"));
    ExperimentConfig::parse(&text).unwrap()
}

fn without_wall_time(path: &Path) -> Vec<String> {
    let rows = read_results(path).unwrap();
    rows.into_iter()
        .map(|mut r| {
            r.wall_time = 0.0;
            format!("{r:?}")
        })
        .collect()
}

#[test]
fn one_cell_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_experiment(&small(""), dir.path()).unwrap();
    assert_eq!((s.total, s.ran, s.failed), (1, 1, 0));
    let rows = read_results(&dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].horizon, 30 * 40);
}

#[test]
fn rerun_does_nothing_and_extension_only_adds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("");
    run_experiment(&cfg, dir.path()).unwrap();
    let before = fs::read(dir.path().join(RESULTS_FILE)).unwrap();
    let s = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!((s.ran, s.skipped), (0, 1));
    assert_eq!(fs::read(dir.path().join(RESULTS_FILE)).unwrap(), before);

    let wider = small("").grid;
    let mut cfg2 = cfg.clone();
    cfg2.grid = smod_bench::config::GridConfig { seeds: 3, ..wider };
    let s = run_experiment(&cfg2, dir.path()).unwrap();
    assert_eq!((s.ran, s.skipped), (2, 1));
    assert_eq!(read_results(&dir.path().join(RESULTS_FILE)).unwrap().len(), 3);
}

#[test]
fn same_config_same_file_for_any_thread_count() {
    let cfg = small("batch = [1, 4]\nseeds = 3\nkinds = [\"spl\", \"sgd\"]\nalpha0_values = [0.5, 5.0]\n");
    let mut outs = Vec::new();
    for threads in [1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&cfg, dir.path())).unwrap();
        outs.push(without_wall_time(&dir.path().join(RESULTS_FILE)));
    }
    assert_eq!(outs[0].len(), 24);
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn paper_grid_size() {
    let cfg = ExperimentConfig::parse("[grid]\nkinds = [\"spl\"]\n").unwrap();
    let grid = cfg.grid.resolve(false).unwrap();
    assert_eq!(smod_bench::grid::cells(&grid).len(), 1200);
}

#[test]
fn failed_runs_become_rows() {
    let dir = tempfile::tempdir().unwrap();
    // no measurement carries any signal, so the accelerated schedule has L = 0
    let inst = dir.path().join("flat.txt");
    fs::write(&inst, "smod-instance 1\nkind absolute_deviation\nn 2\nd 1\nseed -\nf_hat -\ntruth -\n1 0\n2 0\n").unwrap();
    let mut cfg = small("algorithms = [\"smod\", \"nesterov\"]\nkinds = [\"sgd\"]\n");
    cfg.instance.path = Some(inst);
    let s = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!((s.ran, s.failed), (2, 1));
    let rows = read_results(&dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(rows[0].status, "max");
    assert_eq!(rows[1].status, "error");
    assert!(!rows[1].message.is_empty());
}

#[test]
fn speedup_from_written_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("batch = [1, 4]\nseeds = 2\n");
    run_experiment(&cfg, dir.path()).unwrap();
    let table = speedup_command(dir.path(), None).unwrap();
    assert_eq!(table.len(), 2);
    assert_eq!(table[0].speedup, 1.0);
    assert!(dir.path().join("speedup.csv").exists());
    assert!(dir.path().join("alpha0.csv").exists());
}

#[test]
fn stationarity_on_scalar_phase_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    // f(x) = |x² − 1|
    let inst_path = dir.path().join("scalar.txt");
    fs::write(&inst_path, "smod-instance 1\nkind phase_retrieval\nn 1\nd 1\nseed -\nf_hat -\ntruth 1\n1 1\n").unwrap();
    let mut cfg = small("");
    cfg.instance.path = Some(inst_path);
    cfg.stationarity.iters = Some(200);
    cfg.stationarity.stride = 200;
    cfg.stationarity.alpha0 = 1.0;
    let inst = smod_bench::instance::build_instance(&cfg.instance, 0).unwrap();
    let rec = single_run(&cfg, &cfg.stationarity, &inst, strided_labels(200, 200)).unwrap();
    assert_eq!(rec.snapshots.len(), 1);

    cfg.stationarity.stride = 20;
    let rec = single_run(&cfg, &cfg.stationarity, &inst, strided_labels(200, 20)).unwrap();
    let rows = stationarity_trace(&inst, &rec.snapshots, 4.0).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.last().unwrap().grad_norm_x < rows[0].grad_norm_x);

    let at_min = smod::algorithms::Snapshot { k: 1, x: vec![1.0], z: vec![-1.0] };
    let r = stationarity_trace(&inst, &[at_min], 4.0).unwrap();
    assert!(r[0].grad_norm_x < 1e-6 && r[0].grad_norm_z < 1e-6);
}

fn square_instance(dir: &Path) -> ExperimentConfig {
    // 16 pixels, uncorrupted Hadamard-style measurements from the generator
    let (inst, _) = smod::problems::gen_synthetic_phase_retrieval(&smod::problems::GenSpec {
        n: 160,
        d: 16,
        kappa: 1.0,
        p_fail: 0.0,
        noise_std: 5.0,
        seed: 9,
    })
    .unwrap();
    let path = dir.join("square.txt");
    smod::problems::io::write_instance(&inst, fs::File::create(&path).unwrap()).unwrap();
    let mut cfg = small("");
    cfg.instance.path = Some(path);
    cfg
}

#[test]
fn recover_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = square_instance(dir.path());
    cfg.recover.iters = Some(50);
    assert!(recover_command(&cfg, dir.path()).unwrap().is_empty());
    assert!(!dir.path().join("recover").exists());

    cfg.recover.checkpoints = vec![1];
    let files = recover_command(&cfg, dir.path()).unwrap();
    assert_eq!(files.len(), 1);
    let inst = smod_bench::instance::build_instance(&cfg.instance, 0).unwrap();
    let x0 = smod_bench::instance::initial_point(&cfg.instance, &inst, smod::rng::derive_seed(5, 0));
    let dumped = fs::read_to_string(&files[0]).unwrap();
    let vals: Vec<f64> = dumped.split_whitespace().map(|t| t.parse().unwrap()).collect();
    // row-major text of a column-major reshape
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(vals[i * 4 + j], x0[j * 4 + i]);
        }
    }
}

#[test]
fn recovered_image_matches_truth_up_to_sign() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = square_instance(dir.path());
    cfg.recover.iters = Some(3000);
    cfg.recover.checkpoints = vec![3001];
    let files = recover_command(&cfg, dir.path()).unwrap();
    assert_eq!(files.len(), 1);
    let read = |p: &Path| -> Vec<f64> {
        fs::read_to_string(p).unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect()
    };
    let x = read(&files[0]);
    let truth = read(&dir.path().join("recover").join("truth.txt"));
    let plus = x.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let minus = x.iter().zip(&truth).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    assert!(plus.min(minus) <= 0.05, "per-pixel error {}", plus.min(minus));
}

#[test]
fn stability_rows_and_identical_mode() {
    let mut cfg = small("");
    cfg.stability.kinds = vec!["spl".into()];
    cfg.stability.batch = vec![4];
    cfg.stability.trials = 1;
    let res = run_stability(&cfg).unwrap();
    assert_eq!(res.trials.len(), 1);

    cfg.stability.trials = 30;
    cfg.stability.identical = true;
    cfg.stability.kinds = vec!["sgd".into(), "spl".into(), "spp".into()];
    let res = run_stability(&cfg).unwrap();
    assert!(res.trials.iter().all(|t| t.distance == 0.0));
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_smod");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[instance]\nn = 20\nd = 4\n[grid]\nbatch = [1]\nseeds = 1\nepochs = 2\nalpha0_values = [1.0]\n").unwrap();
    let ok = Command::new(bin)
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "run"])
        .status()
        .unwrap();
    assert!(ok.success());
    assert_eq!(read_results(&dir.path().join(RESULTS_FILE)).unwrap().len(), 1);

    fs::write(&cfg, "[grid]\nbatch = []\n").unwrap();
    let bad = Command::new(bin)
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "run"])
        .status()
        .unwrap();
    assert!(!bad.success());

    fs::write(&cfg, "[grid]\nbatchsize = [1]\n").unwrap();
    let typo = Command::new(bin).args(["--config", cfg.to_str().unwrap(), "run"]).status().unwrap();
    assert!(!typo.success());

    let gen = Command::new(bin)
        .args(["--out", dir.path().to_str().unwrap(), "gen", "--n", "10", "--d", "3"])
        .status()
        .unwrap();
    assert!(gen.success());
    let text = fs::read_to_string(dir.path().join("instance.txt")).unwrap();
    let inst = smod::problems::io::read_instance(text.as_bytes()).unwrap();
    assert_eq!((inst.n(), inst.var_dim()), (10, 3));
}
