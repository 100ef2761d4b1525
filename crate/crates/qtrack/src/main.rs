use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qtrack::commands::{self, Common, DisplayInputs, EvalInputs};
use qtrack::svg::Projection;
use qtrack::CliError;

/// Track reconstruction as a QUBO, solved by sub-QUBO decomposition with a
/// simulated QAOA subsolver.
///
/// Any configuration key can be overridden as `--section.key value`, e.g.
/// `--qubo.exponent_sign damped` or `--cuts.max_layer_gap=1`.
#[derive(Debug, Parser)]
#[command(name = "qtrack", version)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file, or a directory for default file names.
    #[arg(short = 'o', long = "out-dir", alias = "out", global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic barrel event as a hits CSV.
    Gen(GenArgs),
    /// Build the triplet QUBO of a hits CSV.
    Build { hits: PathBuf },
    /// Minimise a QUBO file.
    Solve {
        qubo: PathBuf,
        /// exact, sa, qaoa or subqubo.
        #[arg(long)]
        solver: Option<String>,
    },
    /// Score a solution against the truth labels of its event.
    Eval {
        hits: PathBuf,
        solution: PathBuf,
        /// QUBO file carrying the triplet mapping.
        qubo: PathBuf,
        /// Also write transverse and longitudinal SVG displays.
        #[arg(long)]
        svg: bool,
    },
    /// Draw an event, optionally with reconstructed tracks.
    Display {
        hits: PathBuf,
        #[arg(long, requires = "qubo")]
        solution: Option<PathBuf>,
        #[arg(long, requires = "solution")]
        qubo: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = View::Xy)]
        projection: View,
    },
    /// QAOA accuracy and optimum probability against circuit depth.
    SweepLayers {
        /// QUBO to sweep; defaults to the built-in six-variable instance.
        #[arg(long)]
        qubo: Option<PathBuf>,
        #[arg(long)]
        max_layers: Option<usize>,
        #[arg(long)]
        jobs_per_layer: Option<usize>,
    },
    /// Tracking quality and energy against particle multiplicity.
    SweepMultiplicity {
        /// Comma-separated particle counts.
        #[arg(long)]
        multiplicities: Option<String>,
        /// Events per multiplicity.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    inefficiency: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum View {
    Xy,
    Rz,
}

fn show<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

type Overrides = Vec<(String, String)>;

/// Pulls `--a.b value` and `--a.b=value` out of `args`.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        if !key.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| CliError::Usage(format!("--{key} needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

fn run() -> Result<String, CliError> {
    let (args, overrides) = split_overrides(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(CliError::Usage(e.to_string())),
        Err(e) => return Ok(e.to_string()),
    };
    let common = Common {
        config: cli.config,
        seed: cli.seed,
        jobs: cli.jobs,
        out: cli.out,
        overrides,
    };
    match cli.command {
        Command::Gen(g) => commands::gen(
            &common,
            &[
                ("generator.particles", show(&g.particles)),
                ("generator.noise", show(&g.noise)),
                ("generator.inefficiency", show(&g.inefficiency)),
            ],
        ),
        Command::Build { hits } => commands::build(&common, &hits),
        Command::Solve { qubo, solver } => {
            commands::solve(&common, &qubo, &[("solve.solver", solver)])
        }
        Command::Eval {
            hits,
            solution,
            qubo,
            svg,
        } => commands::eval(
            &common,
            &EvalInputs {
                hits: &hits,
                solution: &solution,
                qubo: &qubo,
                svg,
            },
        ),
        Command::Display {
            hits,
            solution,
            qubo,
            projection,
        } => commands::display(
            &common,
            &DisplayInputs {
                hits: &hits,
                solution: solution.as_deref(),
                qubo: qubo.as_deref(),
                projection: match projection {
                    View::Xy => Projection::TransverseXY,
                    View::Rz => Projection::LongitudinalRZ,
                },
            },
        ),
        Command::SweepLayers {
            qubo,
            max_layers,
            jobs_per_layer,
        } => commands::sweep_layers(
            &common,
            qubo.as_deref(),
            &[
                ("sweep.max_layers", show(&max_layers)),
                ("sweep.jobs_per_layer", show(&jobs_per_layer)),
            ],
        ),
        Command::SweepMultiplicity {
            multiplicities,
            seeds,
            noise,
        } => commands::sweep_multiplicity(
            &common,
            &[
                ("sweep.multiplicities", multiplicities),
                ("sweep.seeds", show(&seeds)),
                ("generator.noise", show(&noise)),
            ],
        ),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qtrack: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
