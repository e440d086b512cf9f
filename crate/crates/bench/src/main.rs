use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcubes::integrands::by_name;
use mcubes::Variant;
use mcubes_bench::{
    read_records, record_writer, run_single, run_sweep, summarize, write_record, RunSettings, SUMMARY_HEADER,
};

#[derive(Parser)]
#[command(
    name = "mcubes-bench",
    about = "Seeded accuracy experiments for the mcubes integrator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One integration; prints a CSV header and one row. Exit 0 if converged, 2 if not.
    Run(RunArgs),
    /// Runs per tolerance level, from 1e-3 dividing by 5 while at least half converge.
    Sweep(SweepArgs),
    /// Quartiles of achieved error and success rate per integrand, dimension and tolerance.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct Common {
    /// f1..f6, fA or fB
    #[arg(long)]
    integrand: String,
    /// Dimension (required for f1..f6)
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    maxcalls: u64,
    #[arg(long, default_value_t = 30)]
    itmax: usize,
    /// Adjusting iterations [default: itmax / 2]
    #[arg(long)]
    ita: Option<usize>,
    /// Warm-up iterations excluded from the estimate [default: 3]
    #[arg(long)]
    skip: Option<usize>,
    #[arg(long, default_value_t = mcubes::grid::DEFAULT_BINS)]
    n_bins: usize,
    #[arg(long, default_value_t = mcubes::grid::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// mcubes or mcubes1d
    #[arg(long, default_value = "mcubes")]
    variant: Variant,
    /// Sampling threads [default: all cores]
    #[arg(long)]
    workers: Option<usize>,
    /// Output file [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1e-3)]
    tau_rel: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Runs per tolerance level
    #[arg(long, default_value_t = 20)]
    runs: usize,
}

#[derive(Args)]
struct SummarizeArgs {
    /// CSV written by `run` or `sweep`
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> RunSettings {
        RunSettings {
            maxcalls: self.maxcalls,
            itmax: self.itmax,
            ita: self.ita,
            skip: self.skip,
            n_bins: self.n_bins,
            alpha: self.alpha,
            seed: self.seed,
            variant: self.variant,
            workers: self.workers,
        }
    }
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Run(args) => {
            let c = &args.common;
            let spec = by_name(&c.integrand, c.dim)?;
            // Validate before touching the output so bad flags leave no file behind.
            c.settings().config(&spec, args.tau_rel, c.seed)?;
            let record = run_single(&spec, &c.settings(), args.tau_rel, 0, c.seed)?;
            let mut w = record_writer(output(&c.out)?)?;
            write_record(&mut w, &record)?;
            Ok(if record.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Sweep(args) => {
            let c = &args.common;
            let spec = by_name(&c.integrand, c.dim)?;
            c.settings().config(&spec, mcubes_bench::SCHEDULE_START, c.seed)?;
            if args.runs == 0 {
                return Err("--runs must be at least 1".into());
            }
            let mut w = record_writer(output(&c.out)?)?;
            run_sweep(&spec, &c.settings(), args.runs, &mut w)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize(args) => {
            let records = read_records(File::open(&args.input)?)?;
            let mut w = csv::Writer::from_writer(output(&args.out)?);
            w.write_record(SUMMARY_HEADER)?;
            for s in summarize(&records) {
                w.write_record(s.fields())?;
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mcubes-bench: {e}");
            ExitCode::from(1)
        }
    }
}
