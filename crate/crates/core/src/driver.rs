//! The m-Cubes iteration driver.
//!
//! Setup fixes the stratification (`g` intervals per axis, `m = g^d` cubes,
//! `p` samples per cube). The first `ita` iterations sample with bin
//! contributions and adjust the grid; the remaining ones reuse the frozen
//! grid. After every iteration the per-iteration estimates are combined
//! with inverse-variance weights and the convergence test is applied.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Grid, DEFAULT_ALPHA, DEFAULT_BINS};
use crate::integrands::{Integrand, IntegrandSpec};
use crate::sampler::{cube_count, v_sample, v_sample_no_adjust, ContributionAxes, Sampled};

/// Batches handed to each worker, for load smoothing.
pub const BATCHES_PER_WORKER: u64 = 32;

/// Below this magnitude the relative-error test becomes absolute.
const TINY_ESTIMATE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Independent bin adjustment on every axis.
    #[default]
    Mcubes,
    /// One set of bin edges shared by all axes, learned from axis 0.
    Mcubes1d,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Mcubes => "mcubes",
            Variant::Mcubes1d => "mcubes1d",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcubes" => Ok(Variant::Mcubes),
            "mcubes1d" => Ok(Variant::Mcubes1d),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_bins: usize,
    /// Target integrand evaluations per iteration.
    pub maxcalls: u64,
    pub itmax: usize,
    /// Iterations that adjust the grid; at most `itmax`.
    pub ita: usize,
    /// Leading warm-up iterations left out of the combined estimate. They
    /// still adjust the grid.
    pub skip: usize,
    pub tau_rel: f64,
    pub seed: u64,
    pub variant: Variant,
    pub alpha: f64,
    pub chi2_dof_max: f64,
    /// Thread count; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        RunConfig {
            lower,
            upper,
            n_bins: DEFAULT_BINS,
            maxcalls: 1_000_000,
            itmax: 20,
            ita: 10,
            skip: 0,
            tau_rel: 1e-3,
            seed: 0,
            variant: Variant::Mcubes,
            alpha: DEFAULT_ALPHA,
            chi2_dof_max: 1.5,
            workers: None,
        }
    }

    /// Defaults over the integrand's own domain.
    pub fn for_integrand(spec: &IntegrandSpec) -> Self {
        RunConfig::new(spec.lower().to_vec(), spec.upper().to_vec())
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        if d < 1 {
            return Err(Error::InvalidDimension(d));
        }
        if self.upper.len() != d {
            return Err(Error::InvalidConfig("bound lengths differ".into()));
        }
        for (axis, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidBounds {
                    axis,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        if self.n_bins < 2 {
            return Err(Error::InvalidBinCount(self.n_bins));
        }
        let required = u32::try_from(d)
            .ok()
            .and_then(|d| 2u64.checked_pow(d))
            .and_then(|c| c.checked_mul(2))
            .unwrap_or(u64::MAX);
        if self.maxcalls < required {
            return Err(Error::MaxcallsTooSmall {
                maxcalls: self.maxcalls,
                dims: d,
                required,
            });
        }
        if !(self.tau_rel > 0.0 && self.tau_rel < 1.0) {
            return Err(Error::InvalidConfig(format!("tau_rel {} not in (0, 1)", self.tau_rel)));
        }
        if self.itmax < 1 {
            return Err(Error::InvalidConfig("itmax must be at least 1".into()));
        }
        if self.ita > self.itmax {
            return Err(Error::InvalidConfig(format!(
                "ita {} exceeds itmax {}",
                self.ita, self.itmax
            )));
        }
        if self.skip >= self.itmax {
            return Err(Error::InvalidConfig(format!(
                "skip {} leaves no iterations out of itmax {}",
                self.skip, self.itmax
            )));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if self.chi2_dof_max.is_nan() || self.chi2_dof_max <= 0.0 {
            return Err(Error::InvalidConfig("chi2_dof_max must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stratification and scheduling derived from a [`RunConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetupParams {
    /// `g`, intervals per axis.
    pub intervals: u64,
    /// `m = g^d`.
    pub cubes: u64,
    /// `p`.
    pub samples_per_cube: u32,
    /// `s`, cubes per scheduling batch.
    pub batch_size: u64,
}

impl SetupParams {
    pub fn calls_per_iteration(&self) -> u64 {
        self.cubes * self.samples_per_cube as u64
    }
}

/// Largest `g` with `2 * g^d <= maxcalls`.
fn intervals_per_axis(maxcalls: u64, d: usize) -> u64 {
    let fits = |g: u64| {
        cube_count(g, d)
            .ok()
            .and_then(|m| m.checked_mul(2))
            .is_some_and(|c| c <= maxcalls)
    };
    let mut g = ((maxcalls as f64 / 2.0).powf(1.0 / d as f64)).floor() as u64;
    while g > 0 && !fits(g) {
        g -= 1;
    }
    while fits(g + 1) {
        g += 1;
    }
    g
}

pub fn setup(config: &RunConfig) -> Result<SetupParams> {
    config.validate()?;
    let d = config.dims();
    let intervals = intervals_per_axis(config.maxcalls, d);
    if intervals < 1 {
        return Err(Error::MaxcallsTooSmall {
            maxcalls: config.maxcalls,
            dims: d,
            required: 2,
        });
    }
    let cubes = cube_count(intervals, d)?;
    let samples = (config.maxcalls / cubes).max(2);
    let samples_per_cube =
        u32::try_from(samples).map_err(|_| Error::InvalidConfig(format!("{samples} samples per cube is too many")))?;
    let workers = config.workers.unwrap_or_else(rayon::current_num_threads);
    Ok(SetupParams {
        intervals,
        cubes,
        samples_per_cube,
        batch_size: set_batch_size(cubes, workers as u64),
    })
}

/// `max(1, ceil(m / (workers * 32)))`.
pub fn set_batch_size(cubes: u64, workers: u64) -> u64 {
    cubes.div_ceil(workers.max(1) * BATCHES_PER_WORKER).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationResult {
    pub index: usize,
    pub estimate: f64,
    pub variance: f64,
    /// Whether the grid was adjusted after this iteration.
    pub adjusted: bool,
    pub contribution_writes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEstimate {
    pub estimate: f64,
    pub error: f64,
    pub chi2_dof: f64,
}

/// Inverse-variance weighted mean of the iteration estimates with its
/// standard error and chi-square per degree of freedom.
///
/// An iteration with zero variance is exact: its estimate is returned with
/// zero error and nothing else is combined.
pub fn weighted_estimate(history: &[IterationResult]) -> Result<WeightedEstimate> {
    if history.is_empty() {
        return Err(Error::InvalidConfig("no iterations to combine".into()));
    }
    if let Some(exact) = history.iter().find(|it| it.variance == 0.0) {
        return Ok(WeightedEstimate {
            estimate: exact.estimate,
            error: 0.0,
            chi2_dof: 0.0,
        });
    }
    let mut sum_w = 0.0;
    let mut sum_wi = 0.0;
    for it in history {
        let w = 1.0 / it.variance;
        sum_w += w;
        sum_wi += w * it.estimate;
    }
    let estimate = sum_wi / sum_w;
    let n = history.len();
    let chi2_dof = if n == 1 {
        0.0
    } else {
        let chi2: f64 = history
            .iter()
            .map(|it| (it.estimate - estimate).powi(2) / it.variance)
            .sum();
        chi2 / (n - 1) as f64
    };
    Ok(WeightedEstimate {
        estimate,
        error: sum_w.sqrt().recip(),
        chi2_dof,
    })
}

pub fn check_convergence(estimate: f64, error: f64, chi2_dof: f64, config: &RunConfig) -> bool {
    let precise = if estimate.abs() < TINY_ESTIMATE {
        error <= config.tau_rel
    } else {
        error / estimate.abs() <= config.tau_rel
    };
    precise && chi2_dof <= config.chi2_dof_max
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationResult {
    pub estimate: f64,
    pub error: f64,
    pub chi2_dof: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub total_samples: u64,
    /// Every iteration run, including skipped warm-up iterations.
    pub history: Vec<IterationResult>,
    pub setup: SetupParams,
    /// Grid at the end of the run.
    pub grid: Grid,
}

pub fn integrate<F: Integrand + ?Sized>(f: &F, config: &RunConfig) -> Result<IntegrationResult> {
    integrate_observed(f, config, |_, _| {})
}

/// [`integrate`], calling `observer` after every iteration with that
/// iteration's result and the grid the next iteration will use.
pub fn integrate_observed<F, O>(f: &F, config: &RunConfig, mut observer: O) -> Result<IntegrationResult>
where
    F: Integrand + ?Sized,
    O: FnMut(&IterationResult, &Grid),
{
    config.validate()?;
    let pool = match config.workers {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let in_pool = |job: &(dyn Fn() -> Result<Sampled> + Sync)| match &pool {
        Some(p) => p.install(job),
        None => job(),
    };

    let plan = setup(config)?;
    let mut grid = Grid::init_uniform(config.dims(), config.n_bins, &config.lower, &config.upper)?;
    let axes = match config.variant {
        Variant::Mcubes => ContributionAxes::All,
        Variant::Mcubes1d => ContributionAxes::First,
    };
    let mut history = Vec::with_capacity(config.itmax);
    let mut combined = None;
    let mut converged = false;

    for index in 0..config.itmax {
        let adjusting = index < config.ita;
        let sampled = if adjusting {
            in_pool(&|| v_sample(f, &grid, &plan, config.seed, index as u64, axes))?
        } else {
            in_pool(&|| v_sample_no_adjust(f, &grid, &plan, config.seed, index as u64))?
        };
        if let Some(c) = sampled.contributions.as_ref() {
            grid = match config.variant {
                Variant::Mcubes => grid.adjust(c, config.alpha)?,
                Variant::Mcubes1d => grid.adjust_symmetric(c.axis(0), config.alpha)?,
            };
        }
        let it = IterationResult {
            index,
            estimate: sampled.estimate,
            variance: sampled.variance,
            adjusted: adjusting,
            contribution_writes: sampled.contribution_writes,
        };
        history.push(it);
        observer(&it, &grid);
        if index < config.skip {
            continue;
        }

        let w = weighted_estimate(&history[config.skip..])?;
        combined = Some(w);
        if check_convergence(w.estimate, w.error, w.chi2_dof, config) {
            converged = true;
            break;
        }
    }

    let w = combined.expect("skip < itmax");
    Ok(IntegrationResult {
        estimate: w.estimate,
        error: w.error,
        chi2_dof: w.chi2_dof,
        iterations_used: history.len(),
        converged,
        total_samples: plan.calls_per_iteration() * history.len() as u64,
        history,
        setup: plan,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn it(estimate: f64, sigma: f64) -> IterationResult {
        IterationResult {
            index: 0,
            estimate,
            variance: sigma * sigma,
            adjusted: true,
            contribution_writes: 0,
        }
    }

    fn config(d: usize, maxcalls: u64) -> RunConfig {
        let mut c = RunConfig::new(vec![0.0; d], vec![1.0; d]);
        c.maxcalls = maxcalls;
        c
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn setup_examples() {
        let p = setup(&config(2, 1000)).unwrap();
        assert_eq!((p.intervals, p.cubes, p.samples_per_cube), (22, 484, 2));
        let p = setup(&config(8, 100_000_000)).unwrap();
        assert_eq!((p.intervals, p.cubes, p.samples_per_cube), (9, 43_046_721, 2));
        let p = setup(&config(1, 4)).unwrap();
        assert_eq!((p.intervals, p.cubes, p.samples_per_cube), (2, 2, 2));
        assert!(p.calls_per_iteration() <= 4);
    }

    #[test]
    fn setup_exact_powers() {
        // 2 * 10^2 = 200 must give g = 10 despite floating-point roots.
        let p = setup(&config(2, 200)).unwrap();
        assert_eq!(p.intervals, 10);
        let p = setup(&config(3, 2 * 27)).unwrap();
        assert_eq!(p.intervals, 3);
    }

    #[test]
    fn maxcalls_too_small() {
        assert!(matches!(
            setup(&config(3, 15)),
            Err(Error::MaxcallsTooSmall { required: 16, .. })
        ));
        assert!(matches!(setup(&config(1, 3)), Err(Error::MaxcallsTooSmall { .. })));
    }

    #[test]
    fn batch_size_examples() {
        assert_eq!(set_batch_size(484, 8), 2);
        assert_eq!(484u64.div_ceil(2), 242);
        assert_eq!(set_batch_size(1, 64), 1);
        assert_eq!(set_batch_size(43_046_721, 16), 84_076);
    }

    #[test]
    fn weighted_examples() {
        let w = weighted_estimate(&[it(1.0, 0.1)]).unwrap();
        assert_eq!((w.estimate, w.chi2_dof), (1.0, 0.0));
        assert!(rel(w.error, 0.1) < 1e-12);

        let w = weighted_estimate(&[it(1.0, 0.1), it(1.2, 0.2)]).unwrap();
        assert!(rel(w.estimate, 1.04) < 1e-12);
        assert!(rel(w.error, 1.0 / 125f64.sqrt()) < 1e-12);
        assert!(rel(w.chi2_dof, 0.8) < 1e-12);

        let w = weighted_estimate(&[it(1.0, 0.1); 3]).unwrap();
        assert!(rel(w.estimate, 1.0) < 1e-12);
        assert!(rel(w.error, 0.1 / 3f64.sqrt()) < 1e-12);
        assert_eq!(w.chi2_dof, 0.0);
    }

    #[test]
    fn weighted_zero_variance_is_exact() {
        let w = weighted_estimate(&[it(2.0, 0.5), it(7.0, 0.0), it(3.0, 0.1)]).unwrap();
        assert_eq!((w.estimate, w.error, w.chi2_dof), (7.0, 0.0, 0.0));
        assert!(weighted_estimate(&[]).is_err());
    }

    #[test]
    fn convergence_examples() {
        let c = RunConfig::new(vec![0.0], vec![1.0]);
        assert!(check_convergence(1.0, 5e-4, 0.9, &c));
        assert!(!check_convergence(1.0, 2e-3, 0.5, &c));
        assert!(!check_convergence(1.0, 5e-4, 10.0, &c));
        assert!(check_convergence(0.0, 1e-4, 0.0, &c));
        assert!(!check_convergence(0.0, 1e-2, 0.0, &c));
    }

    #[test]
    fn config_validation() {
        let mut c = config(2, 1000);
        c.tau_rel = 1.0;
        assert!(c.validate().is_err());
        let mut c = config(2, 1000);
        c.ita = 30;
        assert!(c.validate().is_err());
        let mut c = config(2, 1000);
        c.itmax = 0;
        c.ita = 0;
        assert!(c.validate().is_err());
        let mut c = config(2, 1000);
        c.workers = Some(0);
        assert!(c.validate().is_err());
        assert!(config(2, 1000).validate().is_ok());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("mcubes1d".parse::<Variant>().unwrap(), Variant::Mcubes1d);
        assert_eq!(Variant::Mcubes.to_string(), "mcubes");
        assert!("vegas".parse::<Variant>().is_err());
    }

    #[test]
    fn constant_integrand_converges_immediately() {
        let mut c = config(3, 20_000);
        c.itmax = 10;
        c.ita = 5;
        let r = integrate(&|_: &[f64]| 7.0, &c).unwrap();
        assert_eq!((r.estimate, r.error), (7.0, 0.0));
        assert!(r.converged);
        assert_eq!(r.iterations_used, 1);
        assert_eq!(r.history.len(), 1);
    }
}
