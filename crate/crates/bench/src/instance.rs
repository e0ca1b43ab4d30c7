//! Instances and initial points for the commands.

use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context, Result};
use rand_distr::{Distribution, StandardNormal};
use smod::problems::io::{read_image, read_instance};
use smod::problems::{
    gen_absolute_deviation, gen_synthetic_blind_deconv, gen_synthetic_phase_retrieval, gen_zipcode_instance, GenSpec,
};
use smod::rng::{stream, Stream};
use smod::ProblemInstance;

use crate::config::InstanceConfig;

/// Builds the instance described by `cfg` with data seed `seed`.
pub fn build_instance(cfg: &InstanceConfig, seed: u64) -> Result<ProblemInstance> {
    if let Some(path) = &cfg.path {
        let f = File::open(path).with_context(|| format!("opening instance {}", path.display()))?;
        return read_instance(BufReader::new(f)).with_context(|| format!("reading instance {}", path.display()));
    }
    let spec = GenSpec {
        n: cfg.n,
        d: cfg.d,
        kappa: cfg.kappa,
        p_fail: cfg.p_fail,
        noise_std: cfg.noise_std,
        seed,
    };
    let inst = match cfg.problem.as_str() {
        "phase_retrieval" => gen_synthetic_phase_retrieval(&spec)?.0,
        "blind_deconvolution" => gen_synthetic_blind_deconv(&spec)?.0,
        "absolute_deviation" => gen_absolute_deviation(&spec)?.0,
        "zipcode" => {
            let path = cfg.image.as_ref().context("zipcode instances need instance.image")?;
            let f = File::open(path).with_context(|| format!("opening image {}", path.display()))?;
            let image = read_image(BufReader::new(f))?;
            gen_zipcode_instance(&image, cfg.p_fail, seed)?
        }
        other => bail!("unknown problem {other:?}"),
    };
    Ok(inst)
}

/// Initial point: `N(0, I)` on synthetic data, `x* + N(0, I)` when the
/// instance comes from an image. Drawn from the init stream of `seed`.
pub fn initial_point(cfg: &InstanceConfig, inst: &ProblemInstance, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Stream::Init);
    let noise: Vec<f64> = (0..inst.var_dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
    match (&inst.truth, cfg.is_zipcode()) {
        (Some(t), true) => t.iter().zip(&noise).map(|(a, b)| a + b).collect(),
        _ => noise,
    }
}
