use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{gen_hadamard_measurements, ProblemInstance, ProblemKind, Sample};
use crate::linalg::{dot, norm};
use crate::rng::{stream, Rng, Stream};
use crate::{Error, Result};

/// Parameters of the synthetic generators.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub d: usize,
    /// Condition number; the column scales are spread over `[1/κ, 1]`.
    pub kappa: f64,
    /// Probability that a measurement is corrupted.
    pub p_fail: f64,
    /// Standard deviation of the corruption noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            n: 300,
            d: 100,
            kappa: 10.0,
            p_fail: 0.2,
            noise_std: 5.0,
            seed: 1,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidSpec("n and d must be positive".into()));
        }
        if !(self.kappa >= 1.0) {
            return Err(Error::InvalidSpec(format!("kappa = {} < 1", self.kappa)));
        }
        if !(0.0..=1.0).contains(&self.p_fail) {
            return Err(Error::InvalidSpec(format!("p_fail = {} outside [0, 1]", self.p_fail)));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidSpec("noise_std must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Ascending arithmetic progression of `d` values from `1/κ` to `1`.
fn column_scales(d: usize, kappa: f64) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    let lo = 1.0 / kappa;
    (0..d)
        .map(|j| lo + (1.0 - lo) * j as f64 / (d - 1) as f64)
        .collect()
}

fn unit_sphere(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let r = norm(&g);
        if r > 0.0 {
            return g.into_iter().map(|v| v / r).collect();
        }
    }
}

/// Rows of `Q·D` with standard normal `Q`.
fn scaled_gaussian_rows(rng: &mut Rng, n: usize, scales: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            scales
                .iter()
                .map(|s| {
                    let q: f64 = StandardNormal.sample(rng);
                    q * s
                })
                .collect()
        })
        .collect()
}

/// `δ_i ζ_i` with `δ_i ~ Bernoulli(p_fail)` and `ζ_i ~ N(0, σ²)`.
fn corruption(spec: &GenSpec) -> Vec<f64> {
    let mut rng = stream(spec.seed, Stream::Corruption);
    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise_std");
    (0..spec.n)
        .map(|_| {
            let hit = rng.random_bool(spec.p_fail);
            let zeta: f64 = noise.sample(&mut rng);
            if hit {
                zeta
            } else {
                0.0
            }
        })
        .collect()
}

/// Synthetic robust phase retrieval. Returns the instance and `x*`.
pub fn gen_synthetic_phase_retrieval(spec: &GenSpec) -> Result<(ProblemInstance, Vec<f64>)> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Data);
    let truth = unit_sphere(&mut rng, spec.d);
    let rows = scaled_gaussian_rows(&mut rng, spec.n, &column_scales(spec.d, spec.kappa));
    let noise = corruption(spec);
    let samples = rows
        .into_iter()
        .zip(noise)
        .map(|(a, e)| {
            let ax = dot(&a, &truth);
            Sample::Quadratic { b: ax * ax + e, a }
        })
        .collect();
    let mut inst =
        ProblemInstance::new(ProblemKind::PhaseRetrieval, spec.d, samples)?.with_truth(truth.clone())?;
    inst.seed = Some(spec.seed);
    Ok((inst, truth))
}

/// Synthetic blind deconvolution. The returned truth is the joint
/// vector `(x*; x*)` of length `2d`.
pub fn gen_synthetic_blind_deconv(spec: &GenSpec) -> Result<(ProblemInstance, Vec<f64>)> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Data);
    let signal = unit_sphere(&mut rng, spec.d);
    let scales = column_scales(spec.d, spec.kappa);
    let us = scaled_gaussian_rows(&mut rng, spec.n, &scales);
    let vs = scaled_gaussian_rows(&mut rng, spec.n, &scales);
    let noise = corruption(spec);
    let samples = us
        .into_iter()
        .zip(vs)
        .zip(noise)
        .map(|((u, v), e)| Sample::Bilinear {
            b: dot(&u, &signal) * dot(&v, &signal) + e,
            u,
            v,
        })
        .collect();
    let truth: Vec<f64> = signal.iter().chain(&signal).copied().collect();
    let mut inst = ProblemInstance::new(ProblemKind::BlindDeconvolution, spec.d, samples)?
        .with_truth(truth.clone())?;
    inst.seed = Some(spec.seed);
    Ok((inst, truth))
}

/// Convex least absolute deviation regression `|⟨a_i, x⟩ − b_i|` with the
/// same design and corruption recipe as the phase retrieval generator.
pub fn gen_absolute_deviation(spec: &GenSpec) -> Result<(ProblemInstance, Vec<f64>)> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Data);
    let truth = unit_sphere(&mut rng, spec.d);
    let rows = scaled_gaussian_rows(&mut rng, spec.n, &column_scales(spec.d, spec.kappa));
    let noise = corruption(spec);
    let samples = rows
        .into_iter()
        .zip(noise)
        .map(|(a, e)| Sample::Linear { b: dot(&a, &truth) + e, a })
        .collect();
    let mut inst = ProblemInstance::new(ProblemKind::AbsoluteDeviation, spec.d, samples)?
        .with_truth(truth.clone())?;
    inst.seed = Some(spec.seed);
    Ok((inst, truth))
}

/// Phase retrieval with stacked randomized Hadamard measurements of a
/// signal whose length is a power of two. `b = (A x*)²` elementwise, then
/// each entry is zeroed independently with probability `p_fail`.
pub fn gen_hadamard_instance(
    signal: &[f64],
    k: usize,
    p_fail: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(Error::InvalidSpec(format!("p_fail = {p_fail} outside [0, 1]")));
    }
    let rows = gen_hadamard_measurements(k, signal.len(), seed)?;
    let mut rng = stream(seed, Stream::Corruption);
    let samples = rows
        .into_iter()
        .map(|a| {
            let ax = dot(&a, signal);
            let b = if rng.random_bool(p_fail) { 0.0 } else { ax * ax };
            Sample::Quadratic { a, b }
        })
        .collect();
    let mut inst = ProblemInstance::new(ProblemKind::PhaseRetrieval, signal.len(), samples)?
        .with_truth(signal.to_vec())?;
    inst.seed = Some(seed);
    Ok(inst)
}

/// Digit-image phase retrieval: the 16×16 image is vectorized column by
/// column (pixel values are used as given) and measured by three
/// randomized 256×256 Hadamard blocks.
pub fn gen_zipcode_instance(image: &[Vec<f64>], p_fail: f64, seed: u64) -> Result<ProblemInstance> {
    let cols = image.first().map_or(0, Vec::len);
    if image.len() != 16 || image.iter().any(|r| r.len() != 16) {
        return Err(Error::ImageShape { rows: image.len(), cols });
    }
    gen_hadamard_instance(&vectorize(image), 3, p_fail, seed)
}

/// Column-major vectorization `vec(X)`.
pub(crate) fn vectorize(image: &[Vec<f64>]) -> Vec<f64> {
    let rows = image.len();
    let cols = image.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for row in image {
            out.push(row[j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p_fail: f64, kappa: f64) -> GenSpec {
        GenSpec { n: 40, d: 6, kappa, p_fail, noise_std: 5.0, seed: 3 }
    }

    #[test]
    fn paper_synthetic_size() {
        let spec = GenSpec { n: 300, d: 100, kappa: 10.0, p_fail: 0.2, noise_std: 5.0, seed: 1 };
        let (inst, truth) = gen_synthetic_phase_retrieval(&spec).unwrap();
        assert_eq!(inst.n(), 300);
        assert_eq!(inst.var_dim(), 100);
        assert!((norm(&truth) - 1.0).abs() <= 1e-12);
        let f_hat = inst.f_hat.unwrap();
        assert!((inst.loss(&truth).unwrap() - f_hat).abs() <= 1e-12);
        assert!(f_hat > 0.0);
    }

    #[test]
    fn no_corruption_is_exact() {
        let (inst, truth) = gen_synthetic_phase_retrieval(&small(0.0, 10.0)).unwrap();
        assert_eq!(inst.f_hat, Some(0.0));
        for s in &inst.samples {
            let Sample::Quadratic { a, b } = s else { unreachable!() };
            assert_eq!(*b, dot(a, &truth).powi(2));
        }
    }

    #[test]
    fn kappa_one_is_identity_scaling() {
        assert!(column_scales(7, 1.0).iter().all(|&s| s == 1.0));
        let spec = GenSpec { n: 2000, d: 4, kappa: 1.0, p_fail: 0.0, noise_std: 5.0, seed: 9 };
        let (inst, _) = gen_synthetic_phase_retrieval(&spec).unwrap();
        for j in 0..4 {
            let col: f64 = inst
                .samples
                .iter()
                .map(|s| match s {
                    Sample::Quadratic { a, .. } => a[j] * a[j],
                    _ => unreachable!(),
                })
                .sum::<f64>()
                .sqrt();
            let rel = col / (2000f64).sqrt();
            assert!((rel - 1.0).abs() < 0.05, "column {j}: {rel}");
        }
    }

    #[test]
    fn column_scales_ascending() {
        let s = column_scales(4, 10.0);
        assert_eq!(s[0], 0.1);
        assert_eq!(s[3], 1.0);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn blind_deconv_shapes() {
        let spec = GenSpec { n: 300, d: 100, kappa: 10.0, p_fail: 0.3, noise_std: 5.0, seed: 2 };
        let (inst, truth) = gen_synthetic_blind_deconv(&spec).unwrap();
        assert_eq!(inst.var_dim(), 200);
        assert_eq!(truth.len(), 200);
        let (clean, truth) = gen_synthetic_blind_deconv(&small(0.0, 1.0)).unwrap();
        assert_eq!(clean.loss(&truth).unwrap(), 0.0);
        assert_eq!(clean.f_hat, Some(0.0));
    }

    #[test]
    fn deterministic_generation() {
        let a = gen_synthetic_phase_retrieval(&small(0.2, 10.0)).unwrap();
        let b = gen_synthetic_phase_retrieval(&small(0.2, 10.0)).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic_blind_deconv(&small(0.2, 10.0)).unwrap();
        let d = gen_synthetic_blind_deconv(&small(0.2, 10.0)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn invalid_specs() {
        let mut s = small(0.2, 10.0);
        s.kappa = 0.5;
        assert!(gen_synthetic_phase_retrieval(&s).is_err());
        let mut s = small(1.5, 10.0);
        assert!(gen_synthetic_phase_retrieval(&s).is_err());
        s.p_fail = 0.1;
        s.n = 0;
        assert!(gen_absolute_deviation(&s).is_err());
    }

    fn digit() -> Vec<Vec<f64>> {
        (0..16)
            .map(|i| (0..16).map(|j| ((i * 16 + j) % 7) as f64 / 7.0).collect())
            .collect()
    }

    #[test]
    fn zipcode_clean_and_fully_corrupted() {
        let img = digit();
        let inst = gen_zipcode_instance(&img, 0.0, 5).unwrap();
        assert_eq!(inst.n(), 768);
        assert_eq!(inst.f_hat, Some(0.0));
        let x = vectorize(&img);
        for s in &inst.samples {
            let Sample::Quadratic { a, b } = s else { unreachable!() };
            assert_eq!(*b, dot(a, &x).powi(2));
        }
        let dead = gen_zipcode_instance(&img, 1.0, 5).unwrap();
        assert!(dead.samples.iter().all(|s| s.b() == 0.0));
    }

    #[test]
    fn zipcode_zero_fraction() {
        // clean measurements of a generic image are nonzero, so zeros count
        // the corrupted entries; binomial(768, 0.2) has sd ≈ 0.0144
        let img = digit();
        let inst = gen_zipcode_instance(&img, 0.2, 17).unwrap();
        let zeros = inst.samples.iter().filter(|s| s.b() == 0.0).count();
        let frac = zeros as f64 / 768.0;
        assert!((frac - 0.2).abs() <= 0.05, "fraction {frac}");
    }

    #[test]
    fn zipcode_shape_error() {
        let img = vec![vec![0.0; 15]; 16];
        assert!(matches!(
            gen_zipcode_instance(&img, 0.1, 1),
            Err(Error::ImageShape { rows: 16, cols: 15 })
        ));
    }

    #[test]
    fn vectorize_is_column_major() {
        let img = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(vectorize(&img), vec![1.0, 3.0, 2.0, 4.0]);
    }
}
