use super::{best_candidate, dual, solve_linearized_abs, LinearizedAbs, ProxRequest, ProxResult, ProxStatus};
use crate::linalg::{dist, dot, norm_sq};
use crate::models::ModelKind;
use crate::problems::Sample;
use crate::{Error, Result};

/// Candidate minimizers of `|⟨a, x⟩² − b| + (γ/2)‖x − y‖²`, in order:
/// the two smooth-piece stationary points `y − 2⟨a,y⟩a/(2‖a‖² ± γ)`, the
/// two kink points `y − (⟨a,y⟩ ± √b)/‖a‖²·a`, then `y` itself. Candidates
/// with a zero denominator or `b < 0` under the root are skipped.
pub fn spp_phase_candidates(a: &[f64], b: f64, y: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    let aa = norm_sq(a);
    let ay = dot(a, y);
    let along = |t: f64| -> Vec<f64> { y.iter().zip(a).map(|(yi, ai)| yi - t * ai).collect() };
    let mut out = Vec::with_capacity(5);
    for den in [2.0 * aa + gamma, 2.0 * aa - gamma] {
        if den != 0.0 {
            out.push(along(2.0 * ay / den));
        }
    }
    if aa > 0.0 && b >= 0.0 {
        let rb = b.sqrt();
        out.push(along((ay + rb) / aa));
        out.push(along((ay - rb) / aa));
    }
    out.push(y.to_vec());
    out
}

/// Sequential proximal point step for phase retrieval by candidate
/// enumeration. The model center plays no role for the full model.
pub fn prox_spp_seq_phase(req: &ProxRequest) -> Result<ProxResult> {
    req.validate()?;
    if req.batch.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "sequential proximal point step needs one sample, got {}",
            req.batch.len()
        )));
    }
    let Sample::Quadratic { a, b } = &req.instance.samples[req.batch[0]] else {
        return Err(Error::InvalidParameter("phase retrieval sample expected".into()));
    };
    let (x_plus, objective) = best_candidate(req, spp_phase_candidates(a, *b, req.anchor, req.gamma))?;
    let convex = req.is_convex();
    Ok(ProxResult {
        x_plus,
        objective,
        inner_iters: 0,
        objective_trace: Vec::new(),
        status: if convex {
            ProxStatus::ClosedForm
        } else {
            ProxStatus::NonconvexEnumerated
        },
        converged: true,
        residual: 0.0,
        convex,
    })
}

/// Minibatch proximal point step by the deterministic prox-linear method:
///
/// ```text
/// z⁺ = argmin_w (1/m) Σ |c_i(z) + ∇c_i(z)ᵀ(w − z)| + (γ/2)‖w − y‖² + (η/2)‖w − z‖²
/// ```
///
/// with `η = τ` (the batch curvature), started at `y` and stopped once
/// `‖z⁺ − z‖ ≤ tol`. Each inner problem is a linearized-abs QP with
/// anchor `(γy + ηz)/(γ + η)` and weight `γ + η`. The contraction factor
/// is `(η + τ)/(γ + η − λ)` when `γ > λ`; otherwise the loop still descends
/// but the result is flagged nonconvex.
pub fn prox_spp_batch(req: &ProxRequest) -> Result<ProxResult> {
    req.validate()?;
    let full = ProxRequest { kind: ModelKind::Full, ..*req };
    let eta = full.batch_curvature();
    let weight = full.gamma + eta;
    let qp_tol = 1e-13;

    let mut z = full.anchor.to_vec();
    let mut trace = vec![full.objective(&z)?];
    let mut step_len = f64::INFINITY;
    let mut iters = 0;
    let mut qp_ok = true;
    while iters < full.max_inner {
        let anchor: Vec<f64> = full
            .anchor
            .iter()
            .zip(&z)
            .map(|(y, zt)| (full.gamma * y + eta * zt) / weight)
            .collect();
        let qp = LinearizedAbs::at(full.instance, full.batch, &z, &anchor, weight);
        let sol = solve_linearized_abs(&qp, qp_tol, dual::MAX_SWEEPS);
        qp_ok &= sol.converged || sol.gap <= 1e-9 * (1.0 + sol.primal.abs());
        let next: Vec<f64> = anchor.iter().zip(&sol.step).map(|(a, s)| a + s).collect();
        step_len = dist(&next, &z);
        z = next;
        iters += 1;
        trace.push(full.objective(&z)?);
        if step_len <= full.tol || eta == 0.0 {
            break;
        }
    }
    let objective = *trace.last().expect("trace starts nonempty");
    Ok(ProxResult {
        x_plus: z,
        objective,
        inner_iters: iters,
        objective_trace: trace,
        status: ProxStatus::InnerLoop,
        converged: qp_ok && (step_len <= full.tol || eta == 0.0),
        residual: step_len,
        convex: full.is_convex(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{ProblemInstance, ProblemKind};
    use crate::prox::prox_step;

    fn phase(samples: &[(&[f64], f64)]) -> ProblemInstance {
        ProblemInstance::new(
            ProblemKind::PhaseRetrieval,
            samples[0].0.len(),
            samples
                .iter()
                .map(|(a, b)| Sample::Quadratic { a: a.to_vec(), b: *b })
                .collect(),
        )
        .unwrap()
    }

    /// Golden-section search of a unimodal function on `[lo, hi]`.
    fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn enumeration_example() {
        let inst = phase(&[(&[1.0, 0.0], 1.0)]);
        let y = [2.0, 0.0];
        let cands = spp_phase_candidates(&[1.0, 0.0], 1.0, &y, 4.0);
        let firsts: Vec<f64> = cands.iter().map(|c| c[0]).collect();
        for want in [4.0 / 3.0, 4.0, -1.0, 1.0, 2.0] {
            assert!(firsts.iter().any(|v| (v - want).abs() < 1e-12), "{want} missing from {firsts:?}");
        }
        let r = prox_spp_seq_phase(&ProxRequest::new(ModelKind::Full, &inst, &[0], &y, &y, 4.0)).unwrap();
        assert!((r.x_plus[0] - 4.0 / 3.0).abs() < 1e-12 && r.x_plus[1] == 0.0);
        assert!((r.objective - 5.0 / 3.0).abs() < 1e-12);
        // F(t) = |t² − 1| + 2(t − 2)² has a unique minimizer on [1, 2]
        let t = golden(|t| (t * t - 1.0f64).abs() + 2.0 * (t - 2.0).powi(2), 1.0, 2.0);
        assert!((t - 4.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn orthogonal_anchor_compares_kinks() {
        // <a, y> = 0 and b > 0: the kink points ±√b a/‖a‖² compete with y
        let a = [0.0, 2.0];
        let inst = phase(&[(&a, 1.0)]);
        let y = [0.5, 0.0];
        for gamma in [0.5, 1.0, 7.0, 50.0] {
            let r = prox_spp_seq_phase(&ProxRequest::new(ModelKind::Full, &inst, &[0], &y, &y, gamma)).unwrap();
            // minimizer lies on y + t·a/‖a‖; 1D oracle in t
            let f = |t: f64| ((2.0 * t).powi(2) - 1.0).abs() + 0.5 * gamma * t * t;
            let t_pos = golden(f, 0.0, 5.0);
            let oracle = f(t_pos).min(f(0.0));
            assert!((r.objective - oracle).abs() < 1e-9, "γ={gamma}: {} vs {oracle}", r.objective);
        }
    }

    #[test]
    fn kink_optimal_with_large_gamma() {
        let a = [1.0, 1.0];
        let y = [1.0, 0.5];
        let b = dot(&a, &y).powi(2);
        let inst = phase(&[(&a, b)]);
        let r = prox_spp_seq_phase(&ProxRequest::new(ModelKind::Full, &inst, &[0], &y, &y, 100.0)).unwrap();
        assert!(dist(&r.x_plus, &y) < 1e-12);
    }

    #[test]
    fn batch_of_one_matches_enumeration() {
        let inst = phase(&[(&[1.0, 0.0], 1.0)]);
        let y = [2.0, 0.0];
        let req = ProxRequest::new(ModelKind::Full, &inst, &[0], &y, &y, 4.0).with_tol(1e-12);
        let a = prox_spp_seq_phase(&req).unwrap();
        let b = prox_spp_batch(&req).unwrap();
        assert!(dist(&a.x_plus, &b.x_plus) < 1e-6, "{:?} vs {:?}", a.x_plus, b.x_plus);
        assert!(b.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn zero_residual_converges_immediately() {
        let inst = phase(&[(&[1.0, 0.0], 0.0), (&[0.0, 1.0], 0.0)]);
        let y = [0.0, 0.0];
        let r = prox_spp_batch(&ProxRequest::new(ModelKind::Full, &inst, &[0, 1], &y, &y, 10.0)).unwrap();
        assert_eq!(r.x_plus, y.to_vec());
        assert_eq!(r.inner_iters, 1);
        assert!(r.converged);
    }

    #[test]
    fn nonconvex_flagged() {
        let inst = phase(&[(&[1.0, 0.0], 1.0), (&[0.0, 1.0], 2.0)]);
        let y = [0.4, 0.4];
        let r = prox_step(&ProxRequest::new(ModelKind::Full, &inst, &[0], &y, &y, 1.0)).unwrap();
        assert_eq!(r.status, ProxStatus::NonconvexEnumerated);
        let r = prox_step(&ProxRequest::new(ModelKind::Full, &inst, &[0, 1], &y, &y, 1.0)).unwrap();
        assert!(!r.convex);
    }
}
