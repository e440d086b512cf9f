//! Integrand contract and the benchmark suite.
//!
//! The suite holds six families on the unit hyper-cube, parameterized by
//! dimension, and two fixed integrands: `fA` (an oscillatory sine over
//! `(0, 10)^6`) and `fB` (a normalized Gaussian over `(-1, 1)^9`).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// A real function of a point in integration space. Implementations must be
/// deterministic and safe to call from many threads at once.
pub trait Integrand: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl<F> Integrand for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    #[inline]
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Reported in published benchmark tables.
    Published,
    /// Closed form, cross-checked against one-dimensional quadrature.
    Analytic,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Published => "published",
            Provenance::Analytic => "analytic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub value: f64,
    pub provenance: Provenance,
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A named integrand with its box domain. Any state the function needs
/// (constants, lookup tables) is captured by the closure and shared
/// read-only between threads.
#[derive(Clone)]
pub struct IntegrandSpec {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    func: Arc<EvalFn>,
    reference: Option<Reference>,
}

impl fmt::Debug for IntegrandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntegrandSpec")
            .field("name", &self.name)
            .field("dims", &self.dims())
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("reference", &self.reference)
            .finish()
    }
}

impl IntegrandSpec {
    pub fn new<F>(name: impl Into<String>, lower: Vec<f64>, upper: Vec<f64>, func: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if lower.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidConfig("bound lengths differ".into()));
        }
        for (axis, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidBounds {
                    axis,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(IntegrandSpec {
            name: name.into(),
            lower,
            upper,
            func: Arc::new(func),
            reference: None,
        })
    }

    pub fn with_reference(mut self, value: f64, provenance: Provenance) -> Self {
        self.reference = Some(Reference { value, provenance });
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn reference(&self) -> Option<Reference> {
        self.reference
    }
}

impl Integrand for IntegrandSpec {
    #[inline]
    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }
}

/// `fA` reference value as published.
pub const FA_REFERENCE: f64 = -49.165073;
/// `fB` reference value as published.
pub const FB_REFERENCE: f64 = 1.0;
/// Variance of the `fB` Gaussian.
pub const FB_VARIANCE: f64 = 0.01;

fn unit_box(name: String, d: usize, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<IntegrandSpec> {
    IntegrandSpec::new(name, vec![0.0; d], vec![1.0; d], func)
}

/// Family `family` (1..=6) of the test suite in `d` dimensions, on the unit
/// hyper-cube, with its reference value attached.
pub fn make_suite_integrand(family: u8, d: usize) -> Result<IntegrandSpec> {
    if d < 1 {
        return Err(Error::InvalidDimension(d));
    }
    let name = format!("f{family}");
    let spec = match family {
        1 => unit_box(name, d, |x| {
            let s: f64 = x.iter().enumerate().map(|(i, &xi)| (i + 1) as f64 * xi).sum();
            s.cos()
        })?,
        2 => unit_box(name, d, |x| {
            x.iter()
                .map(|&xi| 1.0 / (1.0 / 2500.0 + (xi - 0.5) * (xi - 0.5)))
                .product()
        })?,
        3 => {
            let exponent = -(d as i32) - 1;
            unit_box(name, d, move |x| {
                let s: f64 = x.iter().enumerate().map(|(i, &xi)| (i + 1) as f64 * xi).sum();
                (1.0 + s).powi(exponent)
            })?
        }
        4 => unit_box(name, d, |x| {
            let s: f64 = x.iter().map(|&xi| (xi - 0.5) * (xi - 0.5)).sum();
            (-625.0 * s).exp()
        })?,
        5 => unit_box(name, d, |x| {
            let s: f64 = x.iter().map(|&xi| (xi - 0.5).abs()).sum();
            (-10.0 * s).exp()
        })?,
        6 => unit_box(name, d, |x| {
            let mut s = 0.0;
            for (i, &xi) in x.iter().enumerate() {
                let axis = (i + 1) as f64;
                if xi >= (3.0 + axis) / 10.0 {
                    return 0.0;
                }
                s += (axis + 4.0) * xi;
            }
            s.exp()
        })?,
        _ => return Err(Error::UnknownFamily(name)),
    };
    let value = reference_value(&spec.name, d)?;
    Ok(spec.with_reference(value, Provenance::Analytic))
}

/// `sin(x_1 + ... + x_6)` over `(0, 10)^6`.
pub fn make_fa() -> IntegrandSpec {
    IntegrandSpec::new("fA", vec![0.0; 6], vec![10.0; 6], |x| x.iter().sum::<f64>().sin())
        .expect("valid bounds")
        .with_reference(FA_REFERENCE, Provenance::Published)
}

/// Normalized nine-dimensional Gaussian with variance 0.01 over `(-1, 1)^9`.
pub fn make_fb() -> IntegrandSpec {
    let norm = (2.0 * PI * FB_VARIANCE).powf(-4.5);
    IntegrandSpec::new("fB", vec![-1.0; 9], vec![1.0; 9], move |x| {
        let r2: f64 = x.iter().map(|&xi| xi * xi).sum();
        norm * (-r2 / (2.0 * FB_VARIANCE)).exp()
    })
    .expect("valid bounds")
    .with_reference(FB_REFERENCE, Provenance::Published)
}

/// Looks an integrand up by name: `f1`..`f6` (which need `dim`), `fA`, `fB`.
pub fn by_name(name: &str, dim: Option<usize>) -> Result<IntegrandSpec> {
    match name {
        "fA" | "fa" => check_fixed_dim(make_fa(), dim),
        "fB" | "fb" => check_fixed_dim(make_fb(), dim),
        _ => {
            let family = name
                .strip_prefix('f')
                .and_then(|s| s.parse::<u8>().ok())
                .filter(|f| (1..=6).contains(f))
                .ok_or_else(|| Error::UnknownFamily(name.to_string()))?;
            let d = dim.ok_or_else(|| Error::InvalidConfig(format!("{name} needs a dimension")))?;
            make_suite_integrand(family, d)
        }
    }
}

fn check_fixed_dim(spec: IntegrandSpec, dim: Option<usize>) -> Result<IntegrandSpec> {
    match dim {
        Some(d) if d != spec.dims() => Err(Error::InvalidConfig(format!(
            "{} is {}-dimensional, got --dim {d}",
            spec.name(),
            spec.dims()
        ))),
        _ => Ok(spec),
    }
}

/// Reference integral for a named integrand in `d` dimensions.
pub fn reference_value(name: &str, d: usize) -> Result<f64> {
    let unknown = || Error::UnknownValue(format!("{name} in {d} dimensions"));
    if d < 1 {
        return Err(unknown());
    }
    let v = match name {
        "fA" | "fa" if d == 6 => FA_REFERENCE,
        "fB" | "fb" if d == 9 => FB_REFERENCE,
        "f1" => oscillatory_integral(d),
        "f2" => (100.0 * 25f64.atan()).powi(d as i32),
        "f3" => corner_peak_integral(d),
        "f4" => (PI.sqrt() / 25.0 * erf(12.5)).powi(d as i32),
        "f5" => (0.2 * (1.0 - (-5.0f64).exp())).powi(d as i32),
        "f6" => (1..=d)
            .map(|i| {
                let rate = (i + 4) as f64;
                let cut = ((3 + i) as f64 / 10.0).min(1.0);
                ((rate * cut).exp() - 1.0) / rate
            })
            .product(),
        _ => return Err(unknown()),
    };
    Ok(v)
}

/// Real part of `prod_k (e^{ik} - 1) / (ik)`.
fn oscillatory_integral(d: usize) -> f64 {
    let (mut re, mut im) = (1.0, 0.0);
    for k in 1..=d {
        let k = k as f64;
        let (a, b) = (k.sin() / k, (1.0 - k.cos()) / k);
        (re, im) = (re * a - im * b, re * b + im * a);
    }
    re
}

/// Inclusion-exclusion over vertex subsets:
/// `sum_S (-1)^|S| / (1 + sum_{i in S} i)`, divided by `d! * prod i`.
fn corner_peak_integral(d: usize) -> f64 {
    let mut total = 0.0;
    for mask in 0u64..(1u64 << d) {
        let s: u64 = (0..d).filter(|i| mask >> i & 1 == 1).map(|i| i as u64 + 1).sum();
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        total += sign / (1.0 + s as f64);
    }
    let factorial: f64 = (1..=d).map(|i| i as f64).product();
    total / (factorial * factorial)
}

/// Closed form of the `fA` integral, `Im[(sin 10 + i(1 - cos 10))^6]`.
pub fn fa_closed_form() -> f64 {
    let (a, b) = (10f64.sin(), 1.0 - 10f64.cos());
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..6 {
        (re, im) = (re * a - im * b, re * b + im * a);
    }
    im
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_values() {
        for d in [1, 3, 8] {
            assert_eq!(make_suite_integrand(1, d).unwrap().evaluate(&vec![0.0; d]), 1.0);
            assert_eq!(make_suite_integrand(4, d).unwrap().evaluate(&vec![0.5; d]), 1.0);
            assert_eq!(make_suite_integrand(5, d).unwrap().evaluate(&vec![0.5; d]), 1.0);
        }
    }

    #[test]
    fn discontinuous_family_support() {
        let f6 = make_suite_integrand(6, 2).unwrap();
        assert_eq!(f6.evaluate(&[0.5, 0.1]), 0.0);
        assert_eq!(f6.evaluate(&[0.39, 0.49]), (5.0 * 0.39 + 6.0 * 0.49f64).exp());
        assert_eq!(f6.evaluate(&[0.39, 0.5]), 0.0);
    }

    #[test]
    fn fixed_integrands() {
        let fa = make_fa();
        assert_eq!(fa.evaluate(&[0.0; 6]), 0.0);
        assert_eq!((fa.dims(), fa.lower()[0], fa.upper()[0]), (6, 0.0, 10.0));
        let fb = make_fb();
        let peak = (2.0 * PI * 0.01).powf(-4.5);
        assert!((fb.evaluate(&[0.0; 9]) - peak).abs() <= 1e-12 * peak);
        assert_eq!(fb.reference().unwrap().value, 1.0);
        assert_eq!(fa.reference().unwrap().provenance, Provenance::Published);
    }

    #[test]
    fn published_fa_value_matches_closed_form() {
        assert!((fa_closed_form() - FA_REFERENCE).abs() < 1e-6);
    }

    #[test]
    fn unknown_lookups() {
        assert!(matches!(make_suite_integrand(7, 2), Err(Error::UnknownFamily(_))));
        assert!(matches!(by_name("nosuch", Some(2)), Err(Error::UnknownFamily(_))));
        assert!(matches!(by_name("f0", Some(2)), Err(Error::UnknownFamily(_))));
        assert!(by_name("f3", None).is_err());
        assert!(by_name("fA", Some(5)).is_err());
        assert!(matches!(reference_value("fA", 3), Err(Error::UnknownValue(_))));
        assert_eq!(by_name("fB", None).unwrap().dims(), 9);
    }

    #[test]
    fn stateful_integrand_from_table() {
        let table: Vec<f64> = (0..=10).map(|i| (i * i) as f64 / 100.0).collect();
        let spec = IntegrandSpec::new("table", vec![0.0], vec![1.0], move |x| {
            let pos = x[0] * 10.0;
            let i = (pos as usize).min(9);
            let t = pos - i as f64;
            table[i] * (1.0 - t) + table[i + 1] * t
        })
        .unwrap();
        assert!((spec.evaluate(&[0.55]) - 0.305).abs() < 1e-12);
    }
}
