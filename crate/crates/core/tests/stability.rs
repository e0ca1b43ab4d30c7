use smod::problems::{gen_synthetic_phase_retrieval, GenSpec};
use smod::stability::{expectation_gap_estimate, stability_report, stability_trials, Replacement};
use smod::ModelKind;

fn setup() -> (smod::ProblemInstance, Vec<f64>) {
    let spec = GenSpec { n: 50, d: 10, kappa: 3.0, p_fail: 0.2, noise_std: 5.0, seed: 17 };
    let (inst, truth) = gen_synthetic_phase_retrieval(&spec).unwrap();
    let z = truth.iter().map(|t| t + 0.2).collect();
    (inst, z)
}

#[test]
fn bound_holds_and_shrinks_with_batch_size() {
    let (inst, z) = setup();
    for kind in ModelKind::ALL {
        let gamma = if kind == ModelKind::Full { 3.0 * inst.max_curvature() } else { 4.0 };
        let mut last_max = f64::INFINITY;
        for m in [1, 4, 16] {
            let trials = stability_trials(&inst, kind, &z, &z, gamma, m, 7, 200, Replacement::Iid).unwrap();
            let report = stability_report(&trials, 1e-8, None);
            assert_eq!(report.violations, 0, "{kind:?} m={m}: {report:?}");
            let max_dist = trials.iter().map(|t| t.distance).fold(0.0, f64::max);
            assert!(max_dist < last_max);
            last_max = max_dist;
        }
    }
}

#[test]
fn expectation_gap_within_bound() {
    let (inst, z) = setup();
    for kind in ModelKind::ALL {
        let gamma = if kind == ModelKind::Full { 3.0 * inst.max_curvature() } else { 4.0 };
        for m in [1, 4, 16] {
            let g = expectation_gap_estimate(&inst, kind, &z, gamma, m, 400, 1).unwrap();
            assert!(g.estimate.abs() <= g.bound + g.half_width, "{kind:?} m={m}: {g:?}");
        }
    }
}
