//! Argument parsing and dispatch.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use realid_core::elliptic::QuadricPencil;
use realid_core::segre::SegreSpec;
use realid_core::waring::WaringSpec;

use crate::{
    cmd_elliptic, cmd_segre, cmd_waring, load_pencil, output_path, parse_point_type, to_pretty, write_report,
    EllipticCommand, Outcome, RayonMap, RunConfig, SegreCommand, Threads, WaringSource, EXIT_ERROR,
};

#[derive(Debug, Parser)]
#[command(name = "realid", version, about = "Real versus complex identifiability of tensor decompositions")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// RNG seed for starts, loops and searches.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads, or "auto".
    #[arg(long, global = true, default_value = "1")]
    pub threads: Threads,
    /// Report path (default: $REALID_OUTPUT_DIR/<command>-<seed>.json, else stdout only).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Relative tolerance on imaginary parts.
    #[arg(long, global = true)]
    pub real_tol: Option<f64>,
    /// Do not print the report on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate and classify all Waring decompositions of a real form.
    Waring(WaringArgs),
    /// Secant geometry of an elliptic normal quartic.
    #[command(subcommand)]
    Elliptic(EllipticArgs),
    /// Linear sections of two-factor Segre varieties.
    #[command(subcommand)]
    Segre(SegreArgs),
}

#[derive(Debug, Args)]
pub struct WaringArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub r: usize,
    /// Start from the decomposition in this fixture instead of a random one.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Range of the random real start.
    #[arg(long, default_value_t = 5.0)]
    pub magnitude: f64,
    /// Stop once this many decompositions are known.
    #[arg(long)]
    pub target_count: Option<usize>,
    #[arg(long)]
    pub stable_loops: Option<usize>,
    #[arg(long)]
    pub max_loops: Option<usize>,
    #[arg(long)]
    pub dedup_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PencilArg {
    /// JSON file { "q1": 4x4, "q2": 4x4 }; defaults to the example pencil.
    #[arg(long)]
    pub pencil: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EllipticArgs {
    /// Classify a real point by its two secant lines.
    Point {
        /// Homogeneous coordinates x0,x1,x2,x3.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coords: Option<Vec<f64>>,
        /// Build a point of type s1, s2, s3 or s4 first.
        #[arg(long)]
        construct: Option<String>,
        /// Also classify this many random perturbations of size 1e-4.
        #[arg(long, default_value_t = 0)]
        perturb: usize,
        #[command(flatten)]
        pencil: PencilArg,
    },
    /// Intersect the curve with the plane h·x = 0.
    Plane {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coeffs: Vec<f64>,
        #[command(flatten)]
        pencil: PencilArg,
    },
    /// Signatures of the planes x2 = k·x3 for k on a grid.
    PencilScan {
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[command(flatten)]
        pencil: PencilArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum SegreArgs {
    /// a_q, degree and the parity of their difference.
    Profile {
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
    },
    /// Solve one section.
    Section {
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        /// Span this many random real Segre points; otherwise a random real space.
        #[arg(long)]
        span_real: Option<usize>,
    },
    /// Search for a section with a given (real, non-real) signature.
    Search {
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        target: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        max_attempts: usize,
    },
}

fn four(v: &[f64], what: &str) -> Result<[f64; 4]> {
    match v {
        &[a, b, c, d] => Ok([a, b, c, d]),
        _ => bail!("{what} needs 4 values, got {}", v.len()),
    }
}

fn pencil(arg: &PencilArg) -> Result<QuadricPencil> {
    match &arg.pencil {
        Some(p) => load_pencil(p),
        None => Ok(QuadricPencil::example()),
    }
}

/// Runs a parsed command; returns the outcome and the report's default file
/// name.
pub fn execute(cli: &Cli) -> Result<(Outcome, String)> {
    let mut config = RunConfig { seed: cli.common.seed, threads: cli.common.threads, output_path: cli.common.output.clone(), ..RunConfig::default() };
    if let Some(t) = cli.common.real_tol {
        config.real_tol = t;
    }
    let exec = RayonMap::new(config.threads)?;
    let seed = config.seed;
    match &cli.command {
        Command::Waring(a) => {
            if let Some(t) = a.target_count {
                config.stop.target_count = Some(t);
            }
            if let Some(s) = a.stable_loops {
                config.stop.stable_loops = s;
            }
            if let Some(m) = a.max_loops {
                config.stop.max_loops = m;
            }
            if let Some(t) = a.dedup_tol {
                config.dedup_tol = t;
            }
            // Monodromy loops need smaller first steps than one-off solves.
            config.settings = realid_core::monodromy::MonodromyConfig::default().track.into();
            let source = match &a.fixture {
                Some(p) => WaringSource::Fixture(p.clone()),
                None => WaringSource::Random { magnitude: a.magnitude },
            };
            let spec = WaringSpec::new(a.d, a.n, a.r);
            Ok((cmd_waring(spec, &source, &config, &exec)?, format!("waring-d{}-n{}-r{}-{seed}.json", a.d, a.n, a.r)))
        }
        Command::Elliptic(e) => {
            let (cmd, p, name) = match e {
                EllipticArgs::Point { coords, construct, perturb, pencil: p } => {
                    let coords = coords.as_deref().map(|c| four(c, "--coords")).transpose()?;
                    let construct = construct.as_deref().map(parse_point_type).transpose()?;
                    (EllipticCommand::Point { coords, construct, perturbations: *perturb }, p, "point")
                }
                EllipticArgs::Plane { coeffs, pencil: p } => (EllipticCommand::Plane { coeffs: four(coeffs, "--coeffs")? }, p, "plane"),
                EllipticArgs::PencilScan { from, to, steps, pencil: p } => {
                    (EllipticCommand::PencilScan { from: *from, to: *to, steps: *steps }, p, "pencil-scan")
                }
            };
            Ok((cmd_elliptic(&pencil(p)?, &cmd, &config, &exec)?, format!("elliptic-{name}-{seed}.json")))
        }
        Command::Segre(s) => {
            let (dims, cmd, name) = match s {
                SegreArgs::Profile { dims } => (dims, SegreCommand::Profile, "profile"),
                SegreArgs::Section { dims, span_real } => (dims, SegreCommand::Section { span_real: *span_real }, "section"),
                SegreArgs::Search { dims, target, max_attempts } => {
                    let &[real, nonreal] = target.as_slice() else { bail!("--target needs real,nonreal") };
                    (dims, SegreCommand::Search { target: (real, nonreal), max_attempts: *max_attempts }, "search")
                }
            };
            let spec = SegreSpec::new(dims)?;
            Ok((cmd_segre(spec, &cmd, &config, &exec)?, format!("segre-{name}-{seed}.json")))
        }
    }
}

/// Parses, runs, prints and persists; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((outcome, name)) => {
            let config = RunConfig { output_path: cli.common.output.clone(), ..RunConfig::default() };
            if let Some(path) = output_path(&config, &name) {
                if let Err(e) = write_report(&path, &outcome.report) {
                    eprintln!("error: {e:#}");
                    return EXIT_ERROR;
                }
            }
            if !cli.common.quiet {
                print!("{}", to_pretty(&outcome.report));
            }
            outcome.exit
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
