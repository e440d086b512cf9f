//! Experiment harness for `mcubes`: seeded runs, tolerance sweeps and
//! summary statistics, all written as CSV.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::time::Instant;

use mcubes::{integrate, IntegrandSpec, RunConfig, Variant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Integrator(#[from] mcubes::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Column names, in record order.
pub const HEADER: [&str; 14] = [
    "integrand",
    "d",
    "tau_rel",
    "run",
    "seed",
    "estimate",
    "error",
    "chi2_dof",
    "converged",
    "true_value",
    "achieved_rel_error",
    "iterations",
    "total_samples",
    "wall_ms",
];

/// First tolerance of a sweep; each later level divides by [`SCHEDULE_FACTOR`].
pub const SCHEDULE_START: f64 = 1e-3;
pub const SCHEDULE_FACTOR: f64 = 5.0;
pub const SCHEDULE_FLOOR: f64 = 1e-9;
/// A level must converge in at least this fraction of runs for the sweep to continue.
pub const ADVANCE_RATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub integrand: String,
    pub d: usize,
    pub tau_rel: f64,
    pub run: usize,
    pub seed: u64,
    pub estimate: f64,
    pub error: f64,
    pub chi2_dof: f64,
    pub converged: bool,
    pub true_value: Option<f64>,
    pub achieved_rel_error: Option<f64>,
    pub iterations: usize,
    pub total_samples: u64,
    pub wall_ms: u128,
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

impl ExperimentRecord {
    pub fn fields(&self) -> [String; 14] {
        let opt = |v: Option<f64>| v.map(float).unwrap_or_default();
        [
            self.integrand.clone(),
            self.d.to_string(),
            float(self.tau_rel),
            self.run.to_string(),
            self.seed.to_string(),
            float(self.estimate),
            float(self.error),
            float(self.chi2_dof),
            self.converged.to_string(),
            opt(self.true_value),
            opt(self.achieved_rel_error),
            self.iterations.to_string(),
            self.total_samples.to_string(),
            self.wall_ms.to_string(),
        ]
    }

    pub fn from_fields(row: &csv::StringRecord) -> Result<Self> {
        let bad = |what: &str| BenchError::Malformed(format!("{what} in {row:?}"));
        if row.len() != HEADER.len() {
            return Err(bad("wrong column count"));
        }
        let num = |i: usize| row[i].parse::<f64>().map_err(|_| bad(HEADER[i]));
        let int = |i: usize| row[i].parse::<u64>().map_err(|_| bad(HEADER[i]));
        let opt = |i: usize| if row[i].is_empty() { Ok(None) } else { num(i).map(Some) };
        Ok(ExperimentRecord {
            integrand: row[0].to_string(),
            d: int(1)? as usize,
            tau_rel: num(2)?,
            run: int(3)? as usize,
            seed: int(4)?,
            estimate: num(5)?,
            error: num(6)?,
            chi2_dof: num(7)?,
            converged: row[8].parse().map_err(|_| bad("converged"))?,
            true_value: opt(9)?,
            achieved_rel_error: opt(10)?,
            iterations: int(11)? as usize,
            total_samples: int(12)?,
            wall_ms: row[13].parse().map_err(|_| bad("wall_ms"))?,
        })
    }
}

/// Everything about a run except the integrand and the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub maxcalls: u64,
    pub itmax: usize,
    /// Adjusting iterations; `None` means half of `itmax`.
    pub ita: Option<usize>,
    /// Warm-up iterations left out of the estimate; `None` means 3 (fewer when `itmax` is tiny).
    pub skip: Option<usize>,
    pub n_bins: usize,
    pub alpha: f64,
    pub seed: u64,
    pub variant: Variant,
    pub workers: Option<usize>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            maxcalls: 1_000_000,
            itmax: 30,
            ita: None,
            skip: None,
            n_bins: mcubes::grid::DEFAULT_BINS,
            alpha: mcubes::grid::DEFAULT_ALPHA,
            seed: 0,
            variant: Variant::Mcubes,
            workers: None,
        }
    }
}

impl RunSettings {
    pub fn config(&self, spec: &IntegrandSpec, tau_rel: f64, seed: u64) -> Result<RunConfig> {
        let mut c = RunConfig::for_integrand(spec);
        c.maxcalls = self.maxcalls;
        c.itmax = self.itmax;
        c.ita = self.ita.unwrap_or(self.itmax / 2);
        c.skip = self.skip.unwrap_or_else(|| 3.min(self.itmax.saturating_sub(1)));
        c.n_bins = self.n_bins;
        c.alpha = self.alpha;
        c.seed = seed;
        c.variant = self.variant;
        c.workers = self.workers;
        c.tau_rel = tau_rel;
        c.validate()?;
        Ok(c)
    }
}

/// One seeded integration, timed.
pub fn run_single(
    spec: &IntegrandSpec,
    settings: &RunSettings,
    tau_rel: f64,
    run: usize,
    seed: u64,
) -> Result<ExperimentRecord> {
    let config = settings.config(spec, tau_rel, seed)?;
    let start = Instant::now();
    let r = integrate(spec, &config)?;
    let wall_ms = start.elapsed().as_millis();
    let true_value = spec.reference().map(|r| r.value);
    let achieved_rel_error = true_value.map(|t| {
        if t == 0.0 {
            (r.estimate - t).abs()
        } else {
            ((r.estimate - t) / t).abs()
        }
    });
    Ok(ExperimentRecord {
        integrand: spec.name().to_string(),
        d: spec.dims(),
        tau_rel,
        run,
        seed,
        estimate: r.estimate,
        error: r.error,
        chi2_dof: r.chi2_dof,
        converged: r.converged,
        true_value,
        achieved_rel_error,
        iterations: r.iterations_used,
        total_samples: r.total_samples,
        wall_ms,
    })
}

/// Tolerance levels from 1e-3 downward by factors of five, not below 1e-9.
pub fn tolerance_schedule() -> Vec<f64> {
    (0..)
        .map(|k| SCHEDULE_START / SCHEDULE_FACTOR.powi(k))
        .take_while(|&t| t >= SCHEDULE_FLOOR)
        .collect()
}

pub fn record_writer<W: Write>(out: W) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    w.flush()?;
    Ok(w)
}

pub fn write_record<W: Write>(w: &mut csv::Writer<W>, record: &ExperimentRecord) -> Result<()> {
    w.write_record(record.fields())?;
    w.flush()?;
    Ok(())
}

/// `runs` seeded runs per tolerance level, moving to the next level only
/// while at least half of the runs converge. Every record is written (and
/// flushed) as soon as its run finishes.
pub fn run_sweep<W: Write>(
    spec: &IntegrandSpec,
    settings: &RunSettings,
    runs: usize,
    out: &mut csv::Writer<W>,
) -> Result<Vec<ExperimentRecord>> {
    let mut records = Vec::new();
    for tau in tolerance_schedule() {
        let mut converged = 0;
        for run in 0..runs {
            let seed = settings.seed.wrapping_add(run as u64);
            let record = run_single(spec, settings, tau, run, seed)?;
            write_record(out, &record)?;
            converged += record.converged as usize;
            records.push(record);
        }
        if (converged as f64) < ADVANCE_RATE * runs as f64 {
            break;
        }
    }
    Ok(records)
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(BenchError::Malformed(format!("unexpected header {header:?}")));
    }
    reader
        .records()
        .map(|row| ExperimentRecord::from_fields(&row?))
        .collect()
}

/// Five-number summary of achieved relative error (converged runs only)
/// and the convergence rate for one integrand, dimension and tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub integrand: String,
    pub d: usize,
    pub tau_rel: f64,
    pub runs: usize,
    pub success_rate: f64,
    /// min, q1, median, q3, max; `None` when no converged run has a known error.
    pub quartiles: Option<[f64; 5]>,
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "integrand",
    "d",
    "tau_rel",
    "runs",
    "success_rate",
    "min",
    "q1",
    "median",
    "q3",
    "max",
];

impl Summary {
    pub fn fields(&self) -> [String; 10] {
        let q = |i: usize| self.quartiles.map(|q| float(q[i])).unwrap_or_default();
        [
            self.integrand.clone(),
            self.d.to_string(),
            float(self.tau_rel),
            self.runs.to_string(),
            float(self.success_rate),
            q(0),
            q(1),
            q(2),
            q(3),
            q(4),
        ]
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Groups records by (integrand, d, tau_rel) in first-appearance order.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<Summary> {
    let mut order = Vec::new();
    let mut groups: HashMap<(String, usize, u64), Vec<&ExperimentRecord>> = HashMap::new();
    for r in records {
        let key = (r.integrand.clone(), r.d, r.tau_rel.to_bits());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let converged = group.iter().filter(|r| r.converged).count();
            let mut errors: Vec<f64> = group
                .iter()
                .filter(|r| r.converged)
                .filter_map(|r| r.achieved_rel_error)
                .collect();
            errors.sort_by(f64::total_cmp);
            let quartiles = (!errors.is_empty()).then(|| [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile(&errors, q)));
            Summary {
                integrand: key.0,
                d: key.1,
                tau_rel: f64::from_bits(key.2),
                runs: group.len(),
                success_rate: converged as f64 / group.len() as f64,
                quartiles,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn record_round_trips() {
        let r = ExperimentRecord {
            integrand: "f2".into(),
            d: 6,
            tau_rel: 1e-3,
            run: 3,
            seed: 17,
            estimate: 0.1 + 0.2,
            error: 1.0 / 3.0,
            chi2_dof: 0.7,
            converged: true,
            true_value: None,
            achieved_rel_error: None,
            iterations: 9,
            total_samples: 123,
            wall_ms: 45,
        };
        let row = csv::StringRecord::from(r.fields().to_vec());
        assert_eq!(ExperimentRecord::from_fields(&row).unwrap(), r);
    }

    #[test]
    fn settings_default_ita_is_half_of_itmax() {
        let spec = mcubes::integrands::make_suite_integrand(4, 2).unwrap();
        let s = RunSettings {
            itmax: 10,
            ..RunSettings::default()
        };
        let c = s.config(&spec, 1e-3, 0).unwrap();
        assert_eq!((c.ita, c.skip), (5, 3));
    }
}
