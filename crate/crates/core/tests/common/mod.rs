//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use mcubes::{BinAccumulator, Grid};

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        // Stop once the refinement is below roundoff of the panel itself.
        if depth == 0 || diff.abs() <= 15.0 * tol || diff.abs() <= 1e-15 * (left + right).abs() {
            left + right + diff / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Tensor-product Gauss-Legendre over the unit cube.
pub fn tensor_gauss<F: Fn(&[f64]) -> f64>(f: &F, d: usize, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for j in 0..d {
            x[j] = nodes[idx[j]];
            w *= weights[idx[j]];
        }
        total += w * f(&x);
        let mut j = 0;
        while j < d {
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == d {
            return total;
        }
    }
}

/// Small deterministic generator for test inputs (SplitMix64).
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: u64, hi_inclusive: u64) -> u64 {
        lo + self.next_u64() % (hi_inclusive - lo + 1)
    }
}

/// A valid grid with randomly placed edges and random bounds.
pub fn random_grid(rng: &mut TestRng, d: usize, n_bins: usize) -> Grid {
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    let mut edges = Vec::with_capacity(d);
    for _ in 0..d {
        let lo = rng.unit() * 20.0 - 10.0;
        let hi = lo + 0.1 + rng.unit() * 10.0;
        let weights: Vec<f64> = (0..n_bins).map(|_| 0.05 + rng.unit()).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut row = Vec::with_capacity(n_bins);
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            row.push(if i + 1 == n_bins {
                hi
            } else {
                lo + (hi - lo) * acc / total
            });
        }
        lower.push(lo);
        upper.push(hi);
        edges.push(row);
    }
    Grid::from_edges(&lower, &upper, edges).expect("valid random grid")
}

/// Random non-negative contributions, with some bins (and occasionally a
/// whole axis) set to zero.
pub fn random_contributions(rng: &mut TestRng, d: usize, n_bins: usize) -> BinAccumulator {
    let rows = (0..d)
        .map(|_| {
            let zero_axis = rng.unit() < 0.05;
            (0..n_bins)
                .map(|_| {
                    if zero_axis || rng.unit() < 0.2 {
                        0.0
                    } else {
                        rng.unit().powi(3) * 1e3
                    }
                })
                .collect()
        })
        .collect();
    BinAccumulator::from_rows(rows).unwrap()
}
