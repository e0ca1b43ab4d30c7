//! Slow, independent reference solvers for checking `smod` against.
//!
//! Nothing here calls into the solvers under test: objectives are
//! evaluated from raw sample data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use smod::{ModelKind, ProblemInstance, ProblemKind, Sample};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Random instance with `n` samples; `d` is the signal dimension (the
/// variable has length `2d` for blind deconvolution).
pub fn random_instance(kind: ProblemKind, n: usize, d: usize, seed: u64) -> ProblemInstance {
    let mut r = rng(seed);
    let samples = (0..n)
        .map(|_| {
            let b: f64 = r.sample::<f64, _>(StandardNormal) * 1.5;
            match kind {
                ProblemKind::PhaseRetrieval => Sample::Quadratic { a: gauss(&mut r, d), b: b.abs() },
                ProblemKind::BlindDeconvolution => Sample::Bilinear {
                    u: gauss(&mut r, d),
                    v: gauss(&mut r, d),
                    b,
                },
                ProblemKind::AbsoluteDeviation => Sample::Linear { a: gauss(&mut r, d), b },
            }
        })
        .collect();
    ProblemInstance::new(kind, d, samples).unwrap()
}

/// Residual and its gradient, written out independently of the library.
pub fn residual(s: &Sample, x: &[f64]) -> (f64, Vec<f64>) {
    match s {
        Sample::Quadratic { a, b } => {
            let t = dot(a, x);
            (t * t - b, a.iter().map(|ai| 2.0 * t * ai).collect())
        }
        Sample::Bilinear { u, v, b } => {
            let d = u.len();
            let p = dot(u, &x[..d]);
            let q = dot(v, &x[d..]);
            (p * q - b, u.iter().map(|ui| q * ui).chain(v.iter().map(|vi| p * vi)).collect())
        }
        Sample::Linear { a, b } => (dot(a, x) - b, a.clone()),
    }
}

/// `f_z(x, ξ)` from its defining formula.
pub fn model(kind: ModelKind, s: &Sample, z: &[f64], x: &[f64]) -> f64 {
    match kind {
        ModelKind::Full => residual(s, x).0.abs(),
        _ => {
            let (c, g) = residual(s, z);
            let lin: f64 = g.iter().zip(x.iter().zip(z)).map(|(gi, (xi, zi))| gi * (xi - zi)).sum();
            if kind == ModelKind::ProxLinear {
                (c + lin).abs()
            } else {
                let sg = if c > 0.0 {
                    1.0
                } else if c < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                c.abs() + sg * lin
            }
        }
    }
}

pub struct ProxProblem<'a> {
    pub kind: ModelKind,
    pub instance: &'a ProblemInstance,
    pub batch: &'a [usize],
    pub center: &'a [f64],
    pub anchor: &'a [f64],
    pub gamma: f64,
}

impl ProxProblem<'_> {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let m: f64 = self
            .batch
            .iter()
            .map(|&i| model(self.kind, &self.instance.samples[i], self.center, x))
            .sum::<f64>()
            / self.batch.len() as f64;
        m + 0.5 * self.gamma * dist_sq(x, self.anchor)
    }

    /// Directions along which the minimizer can move away from the anchor:
    /// every other direction only increases the proximal term.
    fn directions(&self) -> Vec<Vec<f64>> {
        let dim = self.anchor.len();
        let mut raw = Vec::new();
        for &i in self.batch {
            let s = &self.instance.samples[i];
            match (self.kind, s) {
                (ModelKind::Full, Sample::Quadratic { a, .. }) | (ModelKind::Full, Sample::Linear { a, .. }) => {
                    raw.push(a.clone())
                }
                (ModelKind::Full, Sample::Bilinear { u, v, .. }) => {
                    let d = u.len();
                    let mut p = u.clone();
                    p.resize(dim, 0.0);
                    let mut q = vec![0.0; d];
                    q.extend_from_slice(v);
                    raw.push(p);
                    raw.push(q);
                }
                _ => raw.push(residual(s, self.center).1),
            }
        }
        orthonormal(raw)
    }

    /// Minimizer by grid search with zooming over the reduced subspace.
    /// Returns the best point and its objective.
    pub fn brute_force(&self) -> (Vec<f64>, f64) {
        let basis = self.directions();
        let k = basis.len();
        let lift = |t: &[f64]| -> Vec<f64> {
            let mut x = self.anchor.to_vec();
            for (tj, e) in t.iter().zip(&basis) {
                for (xi, ei) in x.iter_mut().zip(e) {
                    *xi += tj * ei;
                }
            }
            x
        };
        let f0 = self.objective(self.anchor);
        if k == 0 {
            return (self.anchor.to_vec(), f0);
        }
        let lip: f64 = self
            .batch
            .iter()
            .map(|&i| {
                let s = &self.instance.samples[i];
                let g = residual(s, self.center).1;
                dot(&g, &g).sqrt()
            })
            .fold(0.0, f64::max);
        let floor = match self.kind {
            ModelKind::Linear => 2.0 * lip / self.gamma,
            _ => 0.0,
        };
        let radius = 1.05 * (2.0 * f0.max(0.0) / self.gamma).sqrt().max(floor) + 1e-9;
        assert!(k <= 4, "reduced dimension {k} too large for a grid");

        let f = |t: &[f64]| self.objective(&lift(t));
        let per_axis = [801, 161, 51, 21][k - 1];
        let mut starts = grid_best(&f, &vec![0.0; k], radius, per_axis, 4);
        let mut best = (vec![0.0; k], f0);
        for (t, v) in starts.drain(..) {
            let (t, v) = zoom(&f, t, v, 2.0 * radius / (per_axis - 1) as f64);
            if v < best.1 {
                best = (t, v);
            }
        }
        (lift(&best.0), best.1)
    }
}

/// `xᵀQx + cᵀx + e`.
#[derive(Debug, Clone)]
struct Quadratic {
    q: Vec<Vec<f64>>,
    c: Vec<f64>,
}

/// One batch term: `|q(x)|` with the hyperplanes `hᵀx = β` covering its
/// zero set, or `q(x)` itself when `absolute` is false.
struct Term {
    quad: Quadratic,
    kinks: Vec<(Vec<f64>, f64)>,
    absolute: bool,
}

impl ProxProblem<'_> {
    fn terms(&self) -> Option<Vec<Term>> {
        let dim = self.anchor.len();
        let zero = || vec![vec![0.0; dim]; dim];
        let mut out = Vec::new();
        for &i in self.batch {
            let s = &self.instance.samples[i];
            let term = match (self.kind, s) {
                (ModelKind::Full, Sample::Bilinear { .. }) => return None,
                (ModelKind::Full, Sample::Quadratic { a, b }) => {
                    let q = a.iter().map(|ai| a.iter().map(|aj| ai * aj).collect()).collect();
                    let kinks = if *b > 0.0 {
                        vec![(a.clone(), b.sqrt()), (a.clone(), -b.sqrt())]
                    } else if *b == 0.0 {
                        vec![(a.clone(), 0.0)]
                    } else {
                        vec![]
                    };
                    Term { quad: Quadratic { q, c: vec![0.0; dim] }, kinks, absolute: true }
                }
                (ModelKind::Full, Sample::Linear { a, b }) => Term {
                    quad: Quadratic { q: zero(), c: a.clone() },
                    kinks: vec![(a.clone(), *b)],
                    absolute: true,
                },
                (ModelKind::ProxLinear, _) => {
                    let (c, g) = residual(s, self.center);
                    let beta = dot(&g, self.center) - c;
                    Term { quad: Quadratic { q: zero(), c: g.clone() }, kinks: vec![(g, beta)], absolute: true }
                }
                (ModelKind::Linear, _) => {
                    let (c, g) = residual(s, self.center);
                    let sg = if c > 0.0 { 1.0 } else if c < 0.0 { -1.0 } else { 0.0 };
                    Term {
                        quad: Quadratic { q: zero(), c: g.iter().map(|x| sg * x).collect() },
                        kinks: vec![],
                        absolute: false,
                    }
                }
            };
            out.push(term);
        }
        Some(out)
    }

    /// Exact minimum by enumerating every active set: each absolute term is
    /// either on one of its kink hyperplanes or on a fixed-sign piece, and
    /// each choice leaves an equality-constrained quadratic whose KKT
    /// system is solved directly. Blind deconvolution is handled in the
    /// two-dimensional form of [`ProxProblem::exact_bilinear`].
    pub fn exact(&self) -> (Vec<f64>, f64) {
        let Some(terms) = self.terms() else {
            return self.exact_bilinear();
        };
        let dim = self.anchor.len();
        let m = self.batch.len() as f64;
        let choices: Vec<usize> = terms.iter().map(|t| if t.absolute { 2 + t.kinks.len() } else { 1 }).collect();
        let mut best = (self.anchor.to_vec(), self.objective(self.anchor));
        let mut pick = vec![0usize; terms.len()];
        loop {
            let mut h: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| if i == j { self.gamma } else { 0.0 }).collect()).collect();
            let mut f: Vec<f64> = self.anchor.iter().map(|y| -self.gamma * y).collect();
            let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
            for (t, &p) in terms.iter().zip(&pick) {
                let sigma = match (t.absolute, p) {
                    (false, _) => 1.0,
                    (true, 0) => 1.0,
                    (true, 1) => -1.0,
                    (true, k) => {
                        cons.push(t.kinks[k - 2].clone());
                        continue;
                    }
                };
                for i in 0..dim {
                    f[i] += sigma * t.quad.c[i] / m;
                    for j in 0..dim {
                        h[i][j] += 2.0 * sigma * t.quad.q[i][j] / m;
                    }
                }
            }
            if cons.len() <= dim {
                let k = dim + cons.len();
                let mut aug = vec![vec![0.0; k + 1]; k];
                for i in 0..dim {
                    aug[i][..dim].copy_from_slice(&h[i]);
                    for (c, (hv, _)) in cons.iter().enumerate() {
                        aug[i][dim + c] = hv[i];
                    }
                    aug[i][k] = -f[i];
                }
                for (c, (hv, beta)) in cons.iter().enumerate() {
                    aug[dim + c][..dim].copy_from_slice(hv);
                    aug[dim + c][k] = *beta;
                }
                if let Some(sol) = solve(&mut aug) {
                    let x = sol[..dim].to_vec();
                    let v = self.objective(&x);
                    if v < best.1 {
                        best = (x, v);
                    }
                }
            }
            let mut i = 0;
            while i < pick.len() {
                pick[i] += 1;
                if pick[i] < choices[i] {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
            if i == pick.len() {
                return best;
            }
        }
    }

    /// Blind deconvolution in coordinates `P = ⟨u,x⟩`, `Q = ⟨v,y⟩` for a
    /// single sample, or `P = x`, `Q = y` when `d = 1`. The objective is
    /// `(1/m) Σ |k_i P Q − b_i| + (γ/2)(α(P − P0)² + β(Q − Q0)²)` and its
    /// minimizer is either stationary on a fixed-sign piece (a 2×2 linear
    /// system) or lies on a curve `PQ = b_j/k_j`, along which every term is
    /// constant and a one-dimensional scan finishes the job.
    pub fn exact_bilinear(&self) -> (Vec<f64>, f64) {
        assert_eq!(self.kind, ModelKind::Full);
        let dim = self.anchor.len();
        let d = dim / 2;
        let samples: Vec<(&Vec<f64>, &Vec<f64>, f64)> = self
            .batch
            .iter()
            .map(|&i| match &self.instance.samples[i] {
                Sample::Bilinear { u, v, b } => (u, v, *b),
                _ => unreachable!(),
            })
            .collect();
        let single = samples.iter().all(|s| s.0 == samples[0].0 && s.1 == samples[0].1);
        assert!(single || d == 1, "needs one distinct sample or d = 1");
        let (u0, v0, _) = samples[0];
        let (uu, vv) = (dot(u0, u0), dot(v0, v0));
        if uu == 0.0 || vv == 0.0 {
            return (self.anchor.to_vec(), self.objective(self.anchor));
        }
        let (wx, wy) = self.anchor.split_at(d);
        // P = ⟨u0, x⟩ etc.; each sample's product is k_i·P·Q
        let ks: Vec<(f64, f64)> = samples
            .iter()
            .map(|(u, v, b)| {
                let k = if d == 1 { u[0] * v[0] / (u0[0] * v0[0]) } else { 1.0 };
                (k, *b)
            })
            .collect();
        let (p0, q0) = (dot(u0, wx), dot(v0, wy));
        let (alpha, beta) = (1.0 / uu, 1.0 / vv);
        let lift = |p: f64, q: f64| -> Vec<f64> {
            wx.iter()
                .zip(u0)
                .map(|(w, u)| w + (p - p0) / uu * u)
                .chain(wy.iter().zip(v0).map(|(w, v)| w + (q - q0) / vv * v))
                .collect()
        };
        let g = self.gamma;
        let m = ks.len() as f64;
        let mut cands: Vec<(f64, f64)> = vec![(p0, q0)];
        // smooth pieces: K Q + γα(P − P0) = 0, K P + γβ(Q − Q0) = 0
        for mask in 0..(1u32 << ks.len()) {
            let kk: f64 = ks
                .iter()
                .enumerate()
                .map(|(i, (k, _))| if mask >> i & 1 == 1 { -k } else { *k })
                .sum::<f64>()
                / m;
            let det = g * g * alpha * beta - kk * kk;
            if det != 0.0 {
                let p = (g * alpha * g * beta * p0 - kk * g * beta * q0) / det;
                let q = (g * alpha * g * beta * q0 - kk * g * alpha * p0) / det;
                cands.push((p, q));
            }
        }
        for &(k, b) in &ks {
            if k == 0.0 {
                continue;
            }
            let c = b / k;
            if c == 0.0 {
                cands.extend([(0.0, q0), (p0, 0.0), (0.0, 0.0)]);
                continue;
            }
            let along = |eta: f64| alpha * (eta - p0).powi(2) + beta * (c / eta - q0).powi(2);
            for sgn in [1.0, -1.0] {
                let grid: Vec<f64> = (0..=24_000).map(|i| sgn * 10f64.powf(-6.0 + 12.0 * i as f64 / 24_000.0)).collect();
                let mut vals: Vec<(f64, usize)> = grid.iter().enumerate().map(|(i, &e)| (along(e), i)).collect();
                vals.sort_by(|a, b| a.0.total_cmp(&b.0));
                for &(_, i) in vals.iter().take(4) {
                    let lo = grid[i.saturating_sub(1)];
                    let hi = grid[(i + 1).min(grid.len() - 1)];
                    let eta = golden(&along, lo.min(hi), lo.max(hi));
                    cands.push((eta, c / eta));
                }
            }
        }
        let mut best = (self.anchor.to_vec(), self.objective(self.anchor));
        for (p, q) in cands {
            if !(p.is_finite() && q.is_finite()) {
                continue;
            }
            let x = lift(p, q);
            let v = self.objective(&x);
            if v < best.1 {
                best = (x, v);
            }
        }
        best
    }
}

/// Golden-section minimization on `[lo, hi]`.
pub fn golden(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Gram-Schmidt with a relative drop tolerance.
pub fn orthonormal(vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in vs {
        let n0 = dot(&v, &v).sqrt();
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for e in &out {
                let c = dot(&v, e);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= c * ei;
                }
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-9 * n0 {
            out.push(v.iter().map(|x| x / n).collect());
        }
    }
    out
}

/// The `keep` best nodes of a uniform grid on `center ± radius`.
fn grid_best(f: &dyn Fn(&[f64]) -> f64, center: &[f64], radius: f64, per_axis: usize, keep: usize) -> Vec<(Vec<f64>, f64)> {
    let k = center.len();
    let h = 2.0 * radius / (per_axis - 1) as f64;
    let total = per_axis.pow(k as u32);
    let mut vals: Vec<(Vec<f64>, f64)> = Vec::with_capacity(total);
    let mut t = vec![0.0; k];
    for idx in 0..total {
        let mut r = idx;
        for j in 0..k {
            t[j] = center[j] - radius + h * (r % per_axis) as f64;
            r /= per_axis;
        }
        vals.push((t.clone(), f(&t)));
    }
    vals.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut picked: Vec<(Vec<f64>, f64)> = Vec::new();
    for (t, v) in vals {
        if picked.iter().all(|(p, _)| dist_sq(p, &t).sqrt() > 3.0 * h) {
            picked.push((t, v));
            if picked.len() == keep {
                break;
            }
        }
    }
    picked
}

/// Shrinking pattern search around `t`. Each scale tries the coordinate
/// pattern and several randomly rotated ones before halving, so descent
/// along kink ridges that no axis follows is still found.
fn zoom(f: &dyn Fn(&[f64]) -> f64, mut t: Vec<f64>, mut v: f64, mut h: f64) -> (Vec<f64>, f64) {
    let k = t.len();
    let side: i64 = 2;
    let per = (2 * side + 1) as usize;
    let total = per.pow(k as u32);
    let mut r = rng(0x5eed);
    let identity: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut trial = vec![0.0; k];
    let mut fails = 0;
    while h > 1e-14 {
        let basis = if fails == 0 { identity.clone() } else { orthonormal((0..k).map(|_| gauss(&mut r, k)).collect()) };
        if basis.len() < k {
            continue;
        }
        let mut moved = false;
        for idx in 0..total {
            let mut rem = idx;
            trial.copy_from_slice(&t);
            for e in &basis {
                let step = h * ((rem % per) as i64 - side) as f64;
                rem /= per;
                for (x, ej) in trial.iter_mut().zip(e) {
                    *x += step * ej;
                }
            }
            let fv = f(&trial);
            if fv < v {
                v = fv;
                t.copy_from_slice(&trial);
                moved = true;
            }
        }
        if moved {
            fails = 0;
        } else {
            fails += 1;
            if fails > 12 {
                h *= 0.5;
                fails = 0;
            }
        }
    }
    (t, v)
}

/// Exact minimum of `(1/n) Σ |a_iᵀx − b_i|` by enumerating the vertices
/// where `d` residuals vanish. Needs at least one nonsingular `d`-subset.
pub fn lad_exact_min(instance: &ProblemInstance) -> (Vec<f64>, f64) {
    let d = instance.dim;
    let rows: Vec<(&[f64], f64)> = instance
        .samples
        .iter()
        .map(|s| match s {
            Sample::Linear { a, b } => (a.as_slice(), *b),
            _ => panic!("least absolute deviation samples expected"),
        })
        .collect();
    let n = rows.len();
    let value = |x: &[f64]| rows.iter().map(|(a, b)| (dot(a, x) - b).abs()).sum::<f64>() / n as f64;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let mut m: Vec<Vec<f64>> = idx.iter().map(|&i| {
            let mut r = rows[i].0.to_vec();
            r.push(rows[i].1);
            r
        }).collect();
        if let Some(x) = solve(&mut m) {
            let v = value(&x);
            if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((x, v));
            }
        }
        let mut i = d;
        while i > 0 && idx[i - 1] == i - 1 + n - d {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
    best.expect("no nonsingular subset")
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(m: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let d = m.len();
    for c in 0..d {
        let p = (c..d).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        for r in c + 1..d {
            let f = m[r][c] / m[c][c];
            for k in c..=d {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; d];
    for c in (0..d).rev() {
        let s: f64 = (c + 1..d).map(|k| m[c][k] * x[k]).sum();
        x[c] = (m[c][d] - s) / m[c][c];
    }
    Some(x)
}
