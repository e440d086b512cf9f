//! Serial reference for one sampling iteration.
//!
//! Written as plain nested loops over cubes and samples, drawing every
//! uniform through its own [`SampleKey`] and mapping points through the
//! checked [`Grid::transform`] and [`Grid::bin_indices`]. The additions are
//! grouped by the same reduction tiles as the parallel kernel, so the two
//! agree bit for bit.

use crate::driver::SetupParams;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrands::Integrand;
use crate::rng::SampleKey;
use crate::sampler::{check_plan, cube_unit_point, tile_len, update_variance, BinAccumulator, CubeAccumulator};

/// Estimate, variance and all-axis bin contributions for one iteration.
pub fn vegas_serial_iteration<F: Integrand + ?Sized>(
    f: &F,
    grid: &Grid,
    plan: &SetupParams,
    seed: u64,
    iteration: u64,
) -> Result<(f64, f64, BinAccumulator)> {
    check_plan(grid, plan)?;
    let d = grid.dims();
    let m = plan.cubes;
    let tile = tile_len(m);

    let mut total_means = 0.0;
    let mut total_variances = 0.0;
    let mut contributions = BinAccumulator::zeros(d, grid.n_bins());

    let mut start = 0;
    while start < m {
        let end = (start + tile).min(m);
        let mut tile_means = 0.0;
        let mut tile_variances = 0.0;
        let mut tile_contrib = BinAccumulator::zeros(d, grid.n_bins());
        for cube in start..end {
            let mut acc = CubeAccumulator::default();
            for sample in 0..plan.samples_per_cube {
                let r: Vec<f64> = (0..d)
                    .map(|axis| {
                        SampleKey {
                            seed,
                            iteration,
                            cube,
                            sample,
                            axis: axis as u32,
                        }
                        .uniform()
                    })
                    .collect();
                let u = cube_unit_point(cube, plan.intervals, &r)?;
                let (x, jac) = grid.transform(&u)?;
                let fx = f.evaluate(&x);
                let v = fx * jac;
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { value: fx, x });
                }
                acc.push(v);
                for (axis, bin) in grid.bin_indices(&u)?.into_iter().enumerate() {
                    tile_contrib.add(axis, bin, v * v);
                }
            }
            tile_means += acc.mean();
            tile_variances += update_variance(&acc)?;
        }
        total_means += tile_means;
        total_variances += tile_variances;
        contributions.merge(&tile_contrib);
        start = end;
    }

    let mf = m as f64;
    Ok((total_means / mf, total_variances / (mf * mf), contributions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{cube_count, v_sample, ContributionAxes};

    fn plan(intervals: u64, dims: usize, samples: u32) -> SetupParams {
        SetupParams {
            intervals,
            cubes: cube_count(intervals, dims).unwrap(),
            samples_per_cube: samples,
            batch_size: 1,
        }
    }

    #[test]
    fn constant_is_exact() {
        let grid = Grid::init_uniform(2, 5, &[0.0; 2], &[1.0; 2]).unwrap();
        let (est, var, c) = vegas_serial_iteration(&|_: &[f64]| 2.0, &grid, &plan(3, 2, 4), 0, 0).unwrap();
        assert_eq!((est, var), (2.0, 0.0));
        assert_eq!(c.axis(0).iter().sum::<f64>(), 9.0 * 4.0 * 4.0);
    }

    // Recorded from this oracle when it was first written.
    #[test]
    fn golden_linear_1d() {
        let grid = Grid::init_uniform(1, 50, &[0.0], &[1.0]).unwrap();
        let (est, var, c) = vegas_serial_iteration(&|x: &[f64]| x[0], &grid, &plan(4, 1, 2), 1, 0).unwrap();
        assert_eq!(est.to_bits(), GOLDEN_ESTIMATE.to_bits(), "{est:?}");
        assert_eq!(var.to_bits(), GOLDEN_VARIANCE.to_bits(), "{var:?}");
        let total: f64 = c.axis(0).iter().sum();
        assert_eq!(total.to_bits(), GOLDEN_CONTRIB_TOTAL.to_bits(), "{total:?}");
    }

    const GOLDEN_ESTIMATE: f64 = 0.5032982695006247;
    const GOLDEN_VARIANCE: f64 = 0.0006694184966652059;
    const GOLDEN_CONTRIB_TOTAL: f64 = 2.7165826497543635;

    #[test]
    fn matches_parallel_kernel() {
        let grid = Grid::init_uniform(2, 7, &[0.0, -2.0], &[1.0, 2.0]).unwrap();
        let f = |x: &[f64]| (x[0] + x[1]).exp();
        let p = plan(5, 2, 3);
        let (est, var, c) = vegas_serial_iteration(&f, &grid, &p, 4, 1).unwrap();
        let par = v_sample(&f, &grid, &p, 4, 1, ContributionAxes::All).unwrap();
        assert_eq!(est.to_bits(), par.estimate.to_bits());
        assert_eq!(var.to_bits(), par.variance.to_bits());
        assert_eq!(c, par.contributions.unwrap());
    }
}
