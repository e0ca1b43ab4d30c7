use nalgebra::Matrix4;

use super::{best_candidate, prox_sgd, prox_spl_seq, ProxRequest, ProxResult, ProxStatus};
use crate::linalg::{dot, norm_sq};
use crate::models::ModelKind;
use crate::problems::Sample;
use crate::{Error, Result};

const IMAG_TOL: f64 = 1e-8;

/// Sequential step for blind deconvolution. The linear and prox-linear
/// models reuse the generic closed forms; the full model enumerates the
/// stationary points of both smooth pieces and of the kink `⟨u,x⟩⟨v,y⟩ = b`.
pub fn prox_seq_blind_deconv(req: &ProxRequest) -> Result<ProxResult> {
    match req.kind {
        ModelKind::Linear => prox_sgd(req),
        ModelKind::ProxLinear => prox_spl_seq(req),
        ModelKind::Full => full_step(req),
    }
}

fn full_step(req: &ProxRequest) -> Result<ProxResult> {
    req.validate()?;
    if req.batch.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "sequential proximal point step needs one sample, got {}",
            req.batch.len()
        )));
    }
    let Sample::Bilinear { u, v, b } = &req.instance.samples[req.batch[0]] else {
        return Err(Error::InvalidParameter("blind deconvolution sample expected".into()));
    };
    let candidates = candidates(u, v, *b, req.anchor, req.gamma);
    let (x_plus, objective) = match best_candidate(req, candidates) {
        Ok(best) => best,
        Err(_) => return super::prox_spp_batch(req),
    };
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

/// Joint points `w + (s·u; t·v)` that can minimize
/// `|⟨u,x⟩⟨v,y⟩ − b| + (γ/2)‖(x;y) − w‖²`.
pub(crate) fn candidates(u: &[f64], v: &[f64], b: f64, w: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    let d = u.len();
    let (wx, wy) = w.split_at(d);
    let uu = norm_sq(u);
    let vv = norm_sq(v);
    let aa = dot(u, wx);
    let bb = dot(v, wy);
    let point = |s: f64, t: f64| -> Vec<f64> {
        wx.iter()
            .zip(u)
            .map(|(w, u)| w + s * u)
            .chain(wy.iter().zip(v).map(|(w, v)| w + t * v))
            .collect()
    };
    let mut out = vec![w.to_vec()];
    if uu == 0.0 || vv == 0.0 {
        return out;
    }

    // smooth pieces, sign σ of the residual
    let den = gamma * gamma - uu * vv;
    if den != 0.0 {
        for sigma in [1.0, -1.0] {
            let s = -(sigma * gamma * bb - vv * aa) / den;
            let t = -(sigma * gamma * aa - uu * bb) / den;
            out.push(point(s, t));
        }
    }

    // kink: ⟨u,x⟩ = η, ⟨v,y⟩ = b/η with η a real root of
    // V η⁴ − V A η³ + U B b η − U b² = 0
    if b != 0.0 {
        for eta in quartic_real_roots(-aa, 0.0, uu * bb * b / vv, -uu * b * b / vv) {
            if eta != 0.0 {
                out.push(point((eta - aa) / uu, (b / eta - bb) / vv));
            }
        }
    } else {
        out.push(point(-aa / uu, 0.0));
        out.push(point(0.0, -bb / vv));
        out.push(point(-aa / uu, -bb / vv));
    }
    out
}

/// Real roots of the monic quartic `η⁴ + c3η³ + c2η² + c1η + c0`, from the
/// companion matrix eigenvalues followed by Newton polishing.
pub(crate) fn quartic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let companion = Matrix4::new(
        0.0, 0.0, 0.0, -c0, //
        1.0, 0.0, 0.0, -c1, //
        0.0, 1.0, 0.0, -c2, //
        0.0, 0.0, 1.0, -c3,
    );
    let p = |x: f64| (((x + c3) * x + c2) * x + c1) * x + c0;
    let dp = |x: f64| ((4.0 * x + 3.0 * c3) * x + 2.0 * c2) * x + c1;
    let scale = 1.0 + c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= IMAG_TOL * scale)
        .map(|z| {
            let mut x = z.re;
            for _ in 0..8 {
                let g = dp(x);
                if g == 0.0 {
                    break;
                }
                let next = x - p(x) / g;
                if !next.is_finite() || p(next).abs() >= p(x).abs() {
                    break;
                }
                x = next;
            }
            x
        })
        .collect()
}
