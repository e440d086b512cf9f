//! Parallel m-Cubes integration: VEGAS importance sampling over a
//! separable adaptive grid combined with uniform stratification into
//! sub-cubes, with batches of sub-cubes processed in parallel.
//!
//! ```
//! use mcubes::{integrate, integrands::make_suite_integrand, RunConfig};
//!
//! let f = make_suite_integrand(4, 3).unwrap();
//! let mut config = RunConfig::for_integrand(&f);
//! config.maxcalls = 200_000;
//! config.seed = 1;
//! let result = integrate(&f, &config).unwrap();
//! let truth = f.reference().unwrap().value;
//! assert!((result.estimate - truth).abs() < 5.0 * result.error);
//! ```

pub mod driver;
pub mod error;
pub mod grid;
pub mod integrands;
pub mod oracle;
pub mod rng;
pub mod sampler;

pub use driver::{
    check_convergence, integrate, integrate_observed, set_batch_size, setup, weighted_estimate, IntegrationResult,
    IterationResult, RunConfig, SetupParams, Variant, WeightedEstimate,
};
pub use error::{Error, Result};
pub use grid::Grid;
pub use integrands::{Integrand, IntegrandSpec};
pub use oracle::vegas_serial_iteration;
pub use sampler::{v_sample, v_sample_no_adjust, BinAccumulator, ContributionAxes, Sampled};
