use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0} (need at least 1 axis)")]
    InvalidDimension(usize),
    #[error("invalid bin count: {0} (need at least 2 bins per axis)")]
    InvalidBinCount(usize),
    #[error("invalid bounds on axis {axis}: lower={lower}, upper={upper}")]
    InvalidBounds { axis: usize, lower: f64, upper: f64 },
    #[error("contribution shape mismatch: expected {expected_dims}x{expected_bins}, got {dims}x{bins}")]
    ShapeMismatch {
        expected_dims: usize,
        expected_bins: usize,
        dims: usize,
        bins: usize,
    },
    #[error("negative or non-finite contribution {value} at axis {axis}, bin {bin}")]
    InvalidContribution { axis: usize, bin: usize, value: f64 },
    #[error("invalid damping exponent {0}")]
    InvalidAlpha(f64),
    #[error("unit-space point {value} on axis {axis} is outside [0, 1)")]
    PointOutOfRange { axis: usize, value: f64 },
    #[error("cube index {index} out of range for {cubes} cubes")]
    CubeOutOfRange { index: u64, cubes: u64 },
    #[error("need at least 2 samples per cube, got {0}")]
    InsufficientSamples(u64),
    #[error("integrand returned {value} at x = {x:?}")]
    NonFiniteValue { value: f64, x: Vec<f64> },
    #[error("maxcalls {maxcalls} too small for {dims} dimensions (need at least {required})")]
    MaxcallsTooSmall { maxcalls: u64, dims: usize, required: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown integrand family {0}")]
    UnknownFamily(String),
    #[error("no reference value for {0}")]
    UnknownValue(String),
    #[error("malformed grid text: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
