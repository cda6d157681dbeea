//! Command-line front end.
//!
//! Exit codes: `0` success (and, for `verify-bound`, every bound certified),
//! `1` usage error, `2` validation error, `3` numeric overflow,
//! `4` certification failure (a bound violated beyond tolerance),
//! `5` I/O error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::ar_model::{SystemMatrix, Trajectory};
use crate::error::{Error, Result};
use crate::harness::{cmd_divergence, cmd_mle, cmd_simulate, cmd_verify_bound};
use crate::inference::{grid_class, HypothesisClass};
use crate::seed::SeedSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_OVERFLOW: i32 = 3;
pub const EXIT_NOT_CERTIFIED: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "arcert",
    version,
    about = "Simulation, divergences and Monte-Carlo bound certification for linear auto-regressive models"
)]
struct Cli {
    /// Base seed for pseudo-random draws (for verify-bound: overrides the
    /// config's experiment.base_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Output never depends on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Write output to this file instead of standard output (for
    /// verify-bound: overrides the config's output.path).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a trajectory and print it as CSV.
    Simulate {
        /// Dynamics matrix: rows separated by ';', entries by ',' (e.g. "0.9,0.1;0,0.8").
        #[arg(long)]
        matrix: String,
        /// Number of steps.
        #[arg(long)]
        steps: usize,
    },
    /// Exact KL/Hellinger and sampled Hellinger/TV between two trajectory laws.
    Divergence {
        /// First dynamics matrix (plays the truth role for KL).
        #[arg(long)]
        a: String,
        /// Second dynamics matrix.
        #[arg(long)]
        b: String,
        #[arg(long)]
        steps: usize,
        /// Sample count for the Monte-Carlo estimates.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Maximum-likelihood selection over a finite hypothesis class.
    Mle {
        /// Trajectory CSV file as produced by `simulate`.
        #[arg(long)]
        trajectory: PathBuf,
        /// Explicit class members, '|'-separated (e.g. "0.5|0.3|0.9").
        #[arg(long)]
        members: Option<String>,
        /// Grid class center (requires --radius and --points-per-axis).
        #[arg(long)]
        center: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        points_per_axis: Option<usize>,
    },
    /// Run the certification experiment described by a config file.
    VerifyBound {
        /// Path to the experiment config.
        config: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    if e.is_overflow() {
        return EXIT_OVERFLOW;
    }
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn parse_class(
    members: Option<String>,
    center: Option<String>,
    radius: Option<f64>,
    points_per_axis: Option<usize>,
) -> Result<HypothesisClass> {
    match (members, center, radius, points_per_axis) {
        (Some(members), None, None, None) => {
            let parsed: Result<Vec<SystemMatrix>> =
                members.split('|').map(|m| m.trim().parse()).collect();
            HypothesisClass::new(parsed?)
        }
        (None, Some(center), Some(radius), Some(points)) => {
            grid_class(&center.parse()?, radius, points)
        }
        _ => Err(Error::InvalidArgument(
            "pass either --members, or all of --center/--radius/--points-per-axis".into(),
        )),
    }
}

/// Open the `--output` sink, or fall back to stdout.
fn sink(output: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn dispatch(cli: Cli) -> Result<i32> {
    let seed = SeedSpec::new(cli.seed.unwrap_or(0), 0);
    match cli.command {
        Command::Simulate { matrix, steps } => {
            let a: SystemMatrix = matrix.parse()?;
            let mut out = sink(&cli.output)?;
            cmd_simulate(&a, steps, seed, &mut out)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Divergence {
            a,
            b,
            steps,
            samples,
        } => {
            let a: SystemMatrix = a.parse()?;
            let b: SystemMatrix = b.parse()?;
            let mut out = sink(&cli.output)?;
            cmd_divergence(&a, &b, steps, samples, seed, &mut out)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Mle {
            trajectory,
            members,
            center,
            radius,
            points_per_axis,
        } => {
            let class = parse_class(members, center, radius, points_per_axis)?;
            let traj = Trajectory::read_csv(BufReader::new(File::open(&trajectory)?))?;
            let mut out = sink(&cli.output)?;
            cmd_mle(&traj, &class, &mut out)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::VerifyBound { config } => {
            let (outcome, path) = cmd_verify_bound(&config, cli.seed, cli.output.clone())?;
            eprintln!(
                "arcert: wrote {} ({} horizons, certified: {})",
                path.display(),
                outcome.horizons.len(),
                outcome.certified
            );
            if outcome.any_overflow {
                Ok(EXIT_OVERFLOW)
            } else if !outcome.certified {
                Ok(EXIT_NOT_CERTIFIED)
            } else {
                Ok(EXIT_OK)
            }
        }
    }
}

/// Parse arguments, set up the worker pool, run; returns the process exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };

    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|p| p.get())
            .unwrap_or(1)
    });
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("arcert: failed to build worker pool: {e}");
            return EXIT_IO;
        }
    };

    match pool.install(|| dispatch(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("arcert: {e}");
            exit_code(&e)
        }
    }
}
