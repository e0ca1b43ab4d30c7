//! Stochastic model-based optimization.
//!
//! The crate implements the family of stochastic methods that repeatedly
//! minimize a sampled *model* of a weakly convex loss plus a proximal
//! quadratic:
//!
//! * [`ModelKind::Linear`]: stochastic subgradient steps,
//! * [`ModelKind::ProxLinear`]: stochastic prox-linear steps,
//! * [`ModelKind::Full`]: stochastic proximal point steps,
//!
//! together with minibatching, heavy-ball style extrapolation and Nesterov
//! acceleration. Problem generators cover robust phase retrieval, blind
//! deconvolution and least absolute deviation regression, all of which are
//! compositions `|c(x, ξ)|` of the absolute value with a smooth residual.
//!
//! ```
//! use smod::problems::{gen_synthetic_phase_retrieval, GenSpec};
//! use smod::{ModelKind, algorithms::{SolverConfig, Algorithm, Schedule, run}};
//!
//! let spec = GenSpec { n: 60, d: 5, kappa: 2.0, p_fail: 0.0, noise_std: 5.0, seed: 7 };
//! let (instance, truth) = gen_synthetic_phase_retrieval(&spec).unwrap();
//! let x0: Vec<f64> = truth.iter().map(|t| t + 0.1).collect();
//! let config = SolverConfig::new(Algorithm::SmodMinibatch, ModelKind::ProxLinear, 2000, 4)
//!     .with_schedule(Schedule::Experiment { alpha0: 1.0 });
//! let record = run(&instance, &config, &x0).unwrap();
//! assert!(record.final_objective < instance.loss(&x0).unwrap());
//! ```

pub mod algorithms;
mod error;
pub mod linalg;
pub mod models;
pub mod problems;
pub mod prox;
pub mod rng;
pub mod stability;
pub mod stationarity;

pub use error::{Error, Result};
pub use models::{ModelConstants, ModelKind};
pub use problems::{ProblemInstance, ProblemKind, Sample};
