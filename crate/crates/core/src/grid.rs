//! Separable importance-sampling grid.
//!
//! Each axis is split into `n_bins` bins whose right edges are stored in
//! integration-space coordinates. The left edge of bin 0 is the axis lower
//! bound, and the right edge of the last bin is always exactly the upper
//! bound. A unit-cube point is mapped by sending each coordinate to a bin
//! with equal probability and then uniformly within that bin, which gives
//! the sampling density `1 / (n_bins * width)` inside every bin.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sampler::BinAccumulator;

/// Default number of bins per axis.
pub const DEFAULT_BINS: usize = 50;

/// Default damping exponent for bin adjustment.
pub const DEFAULT_ALPHA: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_bins: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    // Row-major, `dims * n_bins`.
    edges: Vec<f64>,
    // Axes whose edges are exactly the equal partition produced by
    // `init_uniform`; those use the closed-form linear map.
    uniform: Vec<bool>,
}

fn uniform_edge(lower: f64, upper: f64, n_bins: usize, i: usize) -> f64 {
    if i + 1 == n_bins {
        upper
    } else {
        lower + (i + 1) as f64 * (upper - lower) / n_bins as f64
    }
}

fn check_bounds(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    if lower.len() != upper.len() {
        return Err(Error::InvalidConfig(format!(
            "{} lower bounds but {} upper bounds",
            lower.len(),
            upper.len()
        )));
    }
    for (axis, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidBounds {
                axis,
                lower: lo,
                upper: hi,
            });
        }
    }
    Ok(())
}

impl Grid {
    /// Equal partition of every axis into `n_bins` bins.
    pub fn init_uniform(dims: usize, n_bins: usize, lower: &[f64], upper: &[f64]) -> Result<Grid> {
        if dims < 1 {
            return Err(Error::InvalidDimension(dims));
        }
        if n_bins < 2 {
            return Err(Error::InvalidBinCount(n_bins));
        }
        if lower.len() != dims || upper.len() != dims {
            return Err(Error::InvalidConfig(format!(
                "expected {dims} bounds per side, got {} lower and {} upper",
                lower.len(),
                upper.len()
            )));
        }
        check_bounds(lower, upper)?;
        let mut edges = Vec::with_capacity(dims * n_bins);
        for axis in 0..dims {
            edges.extend((0..n_bins).map(|i| uniform_edge(lower[axis], upper[axis], n_bins, i)));
        }
        Ok(Grid {
            n_bins,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            edges,
            uniform: vec![true; dims],
        })
    }

    /// Builds a grid from explicit per-axis right edges, validating every invariant.
    pub fn from_edges(lower: &[f64], upper: &[f64], edges: Vec<Vec<f64>>) -> Result<Grid> {
        check_bounds(lower, upper)?;
        let dims = lower.len();
        if edges.len() != dims {
            return Err(Error::InvalidConfig(format!(
                "expected edges for {dims} axes, got {}",
                edges.len()
            )));
        }
        let n_bins = edges[0].len();
        if n_bins < 2 {
            return Err(Error::InvalidBinCount(n_bins));
        }
        let mut flat = Vec::with_capacity(dims * n_bins);
        for (axis, row) in edges.iter().enumerate() {
            if row.len() != n_bins {
                return Err(Error::InvalidConfig(format!(
                    "axis {axis} has {} edges, expected {n_bins}",
                    row.len()
                )));
            }
            let mut prev = lower[axis];
            for &e in row {
                if e.is_nan() || e <= prev {
                    return Err(Error::InvalidConfig(format!(
                        "axis {axis} edges are not strictly increasing above {prev}"
                    )));
                }
                prev = e;
            }
            if row[n_bins - 1] != upper[axis] {
                return Err(Error::InvalidConfig(format!(
                    "axis {axis} last edge {} differs from upper bound {}",
                    row[n_bins - 1],
                    upper[axis]
                )));
            }
            flat.extend_from_slice(row);
        }
        Ok(Grid::assemble(n_bins, lower.to_vec(), upper.to_vec(), flat))
    }

    fn assemble(n_bins: usize, lower: Vec<f64>, upper: Vec<f64>, edges: Vec<f64>) -> Grid {
        let uniform = (0..lower.len())
            .map(|axis| {
                edges[axis * n_bins..(axis + 1) * n_bins]
                    .iter()
                    .enumerate()
                    .all(|(i, &e)| e == uniform_edge(lower[axis], upper[axis], n_bins, i))
            })
            .collect();
        Grid {
            n_bins,
            lower,
            upper,
            edges,
            uniform,
        }
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Right edges of every bin on `axis`, in integration-space coordinates.
    pub fn right_edges(&self, axis: usize) -> &[f64] {
        &self.edges[axis * self.n_bins..(axis + 1) * self.n_bins]
    }

    /// Right edges of `axis` expressed as fractions of the axis range.
    pub fn unit_edges(&self, axis: usize) -> Vec<f64> {
        let lo = self.lower[axis];
        let span = self.upper[axis] - lo;
        let mut out: Vec<f64> = self.right_edges(axis).iter().map(|&e| (e - lo) / span).collect();
        *out.last_mut().expect("n_bins >= 2") = 1.0;
        out
    }

    pub fn bin_width(&self, axis: usize, bin: usize) -> f64 {
        let edges = self.right_edges(axis);
        let left = if bin == 0 { self.lower[axis] } else { edges[bin - 1] };
        edges[bin] - left
    }

    /// Product of the axis ranges.
    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    #[inline]
    fn bin_of(&self, u: f64) -> (usize, f64) {
        let z = u * self.n_bins as f64;
        // Left-closed bins; the clamp also catches u == 1 from rounding.
        let i = (z.max(0.0) as usize).min(self.n_bins - 1);
        (i, z - i as f64)
    }

    /// Bin index per axis for a unit-cube point.
    pub fn bin_indices(&self, u: &[f64]) -> Result<Vec<usize>> {
        self.check_point(u)?;
        Ok(u.iter().map(|&uj| self.bin_of(uj).0).collect())
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dims() {
            return Err(Error::InvalidConfig(format!(
                "point has {} coordinates, grid has {} axes",
                u.len(),
                self.dims()
            )));
        }
        for (axis, &value) in u.iter().enumerate() {
            if !(0.0..1.0).contains(&value) {
                return Err(Error::PointOutOfRange { axis, value });
            }
        }
        Ok(())
    }

    /// Maps a unit-cube point to integration space, returning the point and
    /// its Jacobian weight.
    pub fn transform(&self, u: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_point(u)?;
        let mut x = vec![0.0; u.len()];
        let mut bins = vec![0; u.len()];
        let jac = self.transform_into(u, &mut x, &mut bins);
        Ok((x, jac))
    }

    /// Unchecked hot-path form of [`Grid::transform`]: writes the mapped point
    /// into `x` and the per-axis bin indices into `bins`, returning the
    /// Jacobian. `u` must lie in `[0, 1)^d`.
    #[inline]
    pub fn transform_into(&self, u: &[f64], x: &mut [f64], bins: &mut [usize]) -> f64 {
        let mut jac = 1.0;
        for axis in 0..u.len() {
            let (i, delta) = self.bin_of(u[axis]);
            bins[axis] = i;
            let lo = self.lower[axis];
            if self.uniform[axis] {
                let span = self.upper[axis] - lo;
                x[axis] = lo + u[axis] * span;
                jac *= span;
            } else {
                let row = &self.edges[axis * self.n_bins..(axis + 1) * self.n_bins];
                let left = if i == 0 { lo } else { row[i - 1] };
                let width = row[i] - left;
                x[axis] = left + delta * width;
                jac *= self.n_bins as f64 * width;
            }
        }
        jac
    }

    fn check_contributions(&self, contributions: &BinAccumulator, alpha: f64) -> Result<()> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidAlpha(alpha));
        }
        if contributions.dims() != self.dims() || contributions.n_bins() != self.n_bins {
            return Err(Error::ShapeMismatch {
                expected_dims: self.dims(),
                expected_bins: self.n_bins,
                dims: contributions.dims(),
                bins: contributions.n_bins(),
            });
        }
        contributions.validate()
    }

    /// Moves bin edges so that bins carrying large contributions shrink.
    ///
    /// Every axis is rebinned independently from its own row of
    /// `contributions`. Axes whose row is all zero are left untouched.
    pub fn adjust(&self, contributions: &BinAccumulator, alpha: f64) -> Result<Grid> {
        self.check_contributions(contributions, alpha)?;
        let mut edges = self.edges.clone();
        for axis in 0..self.dims() {
            if let Some(row) = rebin(
                self.lower[axis],
                self.right_edges(axis),
                contributions.axis(axis),
                alpha,
            ) {
                edges[axis * self.n_bins..(axis + 1) * self.n_bins].copy_from_slice(&row);
            }
        }
        Ok(Grid::assemble(
            self.n_bins,
            self.lower.clone(),
            self.upper.clone(),
            edges,
        ))
    }

    /// Rebins axis 0 from `axis0` and gives every axis the same unit-space
    /// edge fractions, rescaled to its own range.
    pub fn adjust_symmetric(&self, axis0: &[f64], alpha: f64) -> Result<Grid> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidAlpha(alpha));
        }
        if axis0.len() != self.n_bins {
            return Err(Error::ShapeMismatch {
                expected_dims: 1,
                expected_bins: self.n_bins,
                dims: 1,
                bins: axis0.len(),
            });
        }
        for (bin, &value) in axis0.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidContribution { axis: 0, bin, value });
            }
        }
        let Some(fractions) = rebin(0.0, &self.unit_edges(0), axis0, alpha) else {
            return Ok(self.clone());
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for axis in 0..self.dims() {
            let lo = self.lower[axis];
            let hi = self.upper[axis];
            let span = hi - lo;
            edges.extend(fractions.iter().enumerate().map(
                |(i, &f)| {
                    if i + 1 == self.n_bins {
                        hi
                    } else {
                        lo + f * span
                    }
                },
            ));
            enforce_increasing(lo, &mut edges[axis * self.n_bins..]);
        }
        Ok(Grid::assemble(
            self.n_bins,
            self.lower.clone(),
            self.upper.clone(),
            edges,
        ))
    }
}

/// Damped bin importance `((c - 1) / ln c)^alpha` for a normalized share `c`.
pub fn damped_importance(c: f64, alpha: f64) -> f64 {
    if c <= 0.0 {
        0.0
    } else if c >= 1.0 {
        1.0
    } else {
        ((c - 1.0) / c.ln()).powf(alpha)
    }
}

/// Three-point running average; the missing neighbour of an edge bin is
/// replaced by the bin itself.
pub fn smooth(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let prev = if i == 0 { values[0] } else { values[i - 1] };
            let next = if i + 1 == n { values[n - 1] } else { values[i + 1] };
            (prev + values[i] + next) / 3.0
        })
        .collect()
}

/// New right edges for one axis, or `None` when the axis has no contribution.
fn rebin(left: f64, edges: &[f64], contributions: &[f64], alpha: f64) -> Option<Vec<f64>> {
    let n = edges.len();
    let smoothed = smooth(contributions);
    let total: f64 = smoothed.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let importance: Vec<f64> = smoothed.iter().map(|&s| damped_importance(s / total, alpha)).collect();
    let sum: f64 = importance.iter().sum();
    if sum.is_nan() || sum <= 0.0 {
        return None;
    }
    let share = sum / n as f64;

    let mut out = Vec::with_capacity(n);
    let mut consumed = 0usize;
    let mut acc = 0.0;
    for _ in 0..n - 1 {
        while acc < share && consumed < n {
            acc += importance[consumed];
            consumed += 1;
        }
        acc -= share;
        let k = consumed - 1;
        let right = edges[k];
        let old_left = if k == 0 { left } else { edges[k - 1] };
        let pos = if importance[k] > 0.0 {
            right - (right - old_left) * (acc / importance[k]).clamp(0.0, 1.0)
        } else {
            right
        };
        out.push(pos);
    }
    out.push(edges[n - 1]);
    enforce_increasing(left, &mut out);
    Some(out)
}

// Rounding can in principle collapse adjacent edges inside a very narrow bin.
fn enforce_increasing(left: f64, row: &mut [f64]) {
    let n = row.len();
    let mut prev = left;
    for e in row.iter_mut().take(n - 1) {
        if *e <= prev {
            *e = prev.next_up();
        }
        prev = *e;
    }
    for i in (0..n - 1).rev() {
        if row[i] >= row[i + 1] {
            row[i] = row[i + 1].next_down();
        }
    }
}

/// Plain-text form: a `d n_b` header, then one line per axis holding
/// `L H e_0 .. e_{n_b-1}`. Values use shortest round-trip formatting.
impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.dims(), self.n_bins)?;
        for axis in 0..self.dims() {
            write!(f, "{:?} {:?}", self.lower[axis], self.upper[axis])?;
            for e in self.right_edges(axis) {
                write!(f, " {e:?}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Grid> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header token {t:?}"))))
            .collect::<Result<_>>()?;
        let [dims, n_bins] = head[..] else {
            return Err(Error::Parse(format!("header must be `d n_b`, got {header:?}")));
        };
        let mut lower = Vec::with_capacity(dims);
        let mut upper = Vec::with_capacity(dims);
        let mut edges = Vec::with_capacity(dims);
        for axis in 0..dims {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing line for axis {axis}")))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            if values.len() != n_bins + 2 {
                return Err(Error::Parse(format!(
                    "axis {axis}: expected {} values, got {}",
                    n_bins + 2,
                    values.len()
                )));
            }
            lower.push(values[0]);
            upper.push(values[1]);
            edges.push(values[2..].to_vec());
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing lines after last axis".into()));
        }
        if dims == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Grid::from_edges(&lower, &upper, edges)
    }
}
