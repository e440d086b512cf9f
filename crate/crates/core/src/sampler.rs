//! The parallel sampling kernel.
//!
//! Cubes are grouped into fixed reduction tiles whose size depends only on
//! the cube count. Each tile is processed serially into a private partial
//! (sum of cube means, sum of cube variances, bin contributions) and the
//! partials are folded in tile order. Since the uniforms are keyed by
//! [`SampleKey`](crate::rng::SampleKey) rather than drawn from a per-thread
//! stream, the result is bitwise independent of the thread count and of the
//! batch size used for scheduling.

use rayon::prelude::*;

use crate::driver::SetupParams;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrands::Integrand;
use crate::rng::IterationStream;

/// Upper bound on the number of reduction tiles per iteration.
pub const MAX_TILES: u64 = 1024;

/// Per-axis, per-bin accumulated squared sample values.
#[derive(Debug, Clone, PartialEq)]
pub struct BinAccumulator {
    dims: usize,
    n_bins: usize,
    values: Vec<f64>,
}

impl BinAccumulator {
    pub fn zeros(dims: usize, n_bins: usize) -> Self {
        BinAccumulator {
            dims,
            n_bins,
            values: vec![0.0; dims * n_bins],
        }
    }

    /// One row per axis; all rows must have the same length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dims = rows.len();
        if dims == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let n_bins = rows[0].len();
        let mut values = Vec::with_capacity(dims * n_bins);
        for row in &rows {
            if row.len() != n_bins {
                return Err(Error::ShapeMismatch {
                    expected_dims: dims,
                    expected_bins: n_bins,
                    dims,
                    bins: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(BinAccumulator { dims, n_bins, values })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.values[axis * self.n_bins..(axis + 1) * self.n_bins]
    }

    #[inline]
    pub fn add(&mut self, axis: usize, bin: usize, value: f64) {
        self.values[axis * self.n_bins + bin] += value;
    }

    pub fn reset(&mut self) {
        self.values.fill(0.0);
    }

    /// Element-wise sum with `other`.
    pub fn merge(&mut self, other: &BinAccumulator) {
        debug_assert_eq!((self.dims, self.n_bins), (other.dims, other.n_bins));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &value) in self.values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidContribution {
                    axis: i / self.n_bins,
                    bin: i % self.n_bins,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Running mean and squared deviation of the weighted samples of one cube.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CubeAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl CubeAccumulator {
    #[inline]
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sum_v(&self) -> f64 {
        self.mean * self.count as f64
    }

    pub fn sum_v2(&self) -> f64 {
        self.m2 + self.count as f64 * self.mean * self.mean
    }
}

/// Variance of a cube's mean estimate,
/// `(sum_v2/p - mean^2) / (p - 1)`, clamped at zero.
pub fn update_variance(acc: &CubeAccumulator) -> Result<f64> {
    if acc.count < 2 {
        return Err(Error::InsufficientSamples(acc.count));
    }
    let p = acc.count as f64;
    Ok((acc.m2 / (p * (p - 1.0))).max(0.0))
}

/// Point of sub-cube `cube` on a lattice of `intervals` steps per axis,
/// offset inside the cube by the per-axis uniforms `r`. Axis 0 is the
/// fastest-varying digit of `cube`.
pub fn cube_unit_point(cube: u64, intervals: u64, r: &[f64]) -> Result<Vec<f64>> {
    let cubes = cube_count(intervals, r.len())?;
    if cube >= cubes {
        return Err(Error::CubeOutOfRange { index: cube, cubes });
    }
    let mut u = vec![0.0; r.len()];
    let mut t = cube;
    for (slot, &rj) in u.iter_mut().zip(r) {
        *slot = lattice_coordinate(t % intervals, rj, intervals as f64);
        t /= intervals;
    }
    Ok(u)
}

#[inline(always)]
pub(crate) fn lattice_coordinate(digit: u64, r: f64, intervals: f64) -> f64 {
    let u = (digit as f64 + r) / intervals;
    if u < 1.0 {
        u
    } else {
        1.0f64.next_down()
    }
}

/// `intervals^dims`, or an error on overflow.
pub fn cube_count(intervals: u64, dims: usize) -> Result<u64> {
    if intervals == 0 {
        return Err(Error::InvalidConfig("zero intervals per axis".into()));
    }
    u32::try_from(dims)
        .ok()
        .and_then(|d| intervals.checked_pow(d))
        .ok_or_else(|| Error::InvalidConfig(format!("{intervals}^{dims} cubes overflows")))
}

/// Which axes record bin contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContributionAxes {
    /// Every axis (m-Cubes).
    All,
    /// Axis 0 only, for fully symmetric integrands (m-Cubes1D).
    First,
}

impl ContributionAxes {
    pub fn count(self, dims: usize) -> usize {
        match self {
            ContributionAxes::All => dims,
            ContributionAxes::First => 1,
        }
    }
}

/// Raw output of one sampling pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub estimate: f64,
    pub variance: f64,
    /// Present only for adjusting passes. With [`ContributionAxes::First`]
    /// it has a single row.
    pub contributions: Option<BinAccumulator>,
    /// Number of individual bin-contribution increments performed.
    pub contribution_writes: u64,
}

/// Cubes per reduction tile; a function of the cube count alone.
pub fn tile_len(cubes: u64) -> u64 {
    cubes.div_ceil(MAX_TILES).max(1)
}

pub(crate) fn check_plan(grid: &Grid, plan: &SetupParams) -> Result<()> {
    if plan.samples_per_cube < 2 {
        return Err(Error::InsufficientSamples(plan.samples_per_cube as u64));
    }
    let cubes = cube_count(plan.intervals, grid.dims())?;
    if cubes != plan.cubes {
        return Err(Error::InvalidConfig(format!(
            "cube count {} does not equal {}^{}",
            plan.cubes,
            plan.intervals,
            grid.dims()
        )));
    }
    if plan.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    Ok(())
}

struct TilePartial {
    sum_means: f64,
    sum_variances: f64,
    contributions: Option<BinAccumulator>,
}

fn sample_tile<F: Integrand + ?Sized>(
    f: &F,
    grid: &Grid,
    plan: &SetupParams,
    stream: &IterationStream,
    cubes: std::ops::Range<u64>,
    axes: Option<ContributionAxes>,
) -> Result<TilePartial> {
    let dims = grid.dims();
    let intervals = plan.intervals;
    let g = intervals as f64;
    let mut contributions = axes.map(|a| BinAccumulator::zeros(a.count(dims), grid.n_bins()));
    let mut digits = vec![0u64; dims];
    let mut u = vec![0.0; dims];
    let mut x = vec![0.0; dims];
    let mut bins = vec![0usize; dims];
    let mut sum_means = 0.0;
    let mut sum_variances = 0.0;

    for cube in cubes {
        let mut t = cube;
        for d in digits.iter_mut() {
            *d = t % intervals;
            t /= intervals;
        }
        let mut acc = CubeAccumulator::default();
        for k in 0..plan.samples_per_cube {
            stream.fill(cube, k, &mut u);
            for j in 0..dims {
                u[j] = lattice_coordinate(digits[j], u[j], g);
            }
            let jac = grid.transform_into(&u, &mut x, &mut bins);
            let fx = f.evaluate(&x);
            let v = fx * jac;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    value: fx,
                    x: x.clone(),
                });
            }
            acc.push(v);
            if let Some(c) = contributions.as_mut() {
                let v2 = v * v;
                for (j, &b) in bins.iter().enumerate().take(c.dims()) {
                    c.add(j, b, v2);
                }
            }
        }
        sum_means += acc.mean();
        sum_variances += update_variance(&acc)?;
    }
    Ok(TilePartial {
        sum_means,
        sum_variances,
        contributions,
    })
}

fn run<F: Integrand + ?Sized>(
    f: &F,
    grid: &Grid,
    plan: &SetupParams,
    seed: u64,
    iteration: u64,
    axes: Option<ContributionAxes>,
) -> Result<Sampled> {
    check_plan(grid, plan)?;
    let stream = IterationStream::new(seed, iteration);
    let m = plan.cubes;
    let tile = tile_len(m);
    let n_tiles = m.div_ceil(tile);
    let min_len = (plan.batch_size / tile).max(1) as usize;

    let partials: Vec<Result<TilePartial>> = (0..n_tiles as usize)
        .into_par_iter()
        .with_min_len(min_len)
        .map(|i| {
            let start = i as u64 * tile;
            let end = (start + tile).min(m);
            sample_tile(f, grid, plan, &stream, start..end, axes)
        })
        .collect();

    let mut sum_means = 0.0;
    let mut sum_variances = 0.0;
    let mut contributions = axes.map(|a| BinAccumulator::zeros(a.count(grid.dims()), grid.n_bins()));
    for partial in partials {
        let partial = partial?;
        sum_means += partial.sum_means;
        sum_variances += partial.sum_variances;
        if let (Some(total), Some(part)) = (contributions.as_mut(), partial.contributions.as_ref()) {
            total.merge(part);
        }
    }
    let mf = m as f64;
    let samples = m * plan.samples_per_cube as u64;
    Ok(Sampled {
        estimate: sum_means / mf,
        variance: sum_variances / (mf * mf),
        contribution_writes: axes.map_or(0, |a| samples * a.count(grid.dims()) as u64),
        contributions,
    })
}

/// One adjusting pass: estimate, variance and bin contributions.
pub fn v_sample<F: Integrand + ?Sized>(
    f: &F,
    grid: &Grid,
    plan: &SetupParams,
    seed: u64,
    iteration: u64,
    axes: ContributionAxes,
) -> Result<Sampled> {
    run(f, grid, plan, seed, iteration, Some(axes))
}

/// Frozen-grid pass: same estimate and variance as [`v_sample`], no bin
/// contributions.
pub fn v_sample_no_adjust<F: Integrand + ?Sized>(
    f: &F,
    grid: &Grid,
    plan: &SetupParams,
    seed: u64,
    iteration: u64,
) -> Result<Sampled> {
    run(f, grid, plan, seed, iteration, None)
}
