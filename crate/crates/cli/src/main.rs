//! `pathgame` command-line front end.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathgame::{Activation, Error, Gate, RgConfig, SeedMass};

#[derive(Parser, Debug)]
#[command(name = "pathgame", version, about = "Game-theoretic attribution and trajectory distances for small networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gradient (stopping game) or relevance (routing game) maps for one input.
    Attribute(AttributeArgs),
    /// Bhattacharyya coefficient and Hellinger distance between two nets' trajectory laws.
    Hellinger(HellingerArgs),
    /// Randomisation or input-noise sweep of the Hellinger distance.
    Sweep(SweepArgs),
    /// Runs the oracle and property suite on random fixtures.
    Check(CheckArgs),
    /// Writes a seeded random network.
    GenNet(GenNetArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GameArg {
    Sg,
    Rg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GateArg {
    Hard,
    Probit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SeedMassArg {
    Output,
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepMode {
    Cascade,
    Noise,
}

/// Routing-game parameters; unset values take the engine defaults.
#[derive(Args, Debug, Clone)]
struct RgArgs {
    /// Weight on positive contributions.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Weight on negative contributions.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Stabiliser routed to the cemetery.
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    /// Routing temperature.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Risk weight on predecessor variance.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Input noise variance for the moment pass.
    #[arg(long, allow_hyphen_values = true)]
    sigma2: Option<f64>,
    /// Risk weight on attention key uncertainty.
    #[arg(long = "lambda-sm", allow_hyphen_values = true)]
    lambda_sm: Option<f64>,
    /// Fan-in entropy bonus.
    #[arg(long = "lambda-ent", allow_hyphen_values = true)]
    lambda_ent: Option<f64>,
    #[arg(long, value_enum)]
    gate: Option<GateArg>,
    #[arg(long = "seed-mass", value_enum)]
    seed_mass: Option<SeedMassArg>,
}

impl RgArgs {
    fn config(&self) -> RgConfig {
        let d = RgConfig::default();
        RgConfig {
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            epsilon: self.eps.unwrap_or(d.epsilon),
            tau: self.tau.unwrap_or(d.tau),
            lambda: self.lambda.unwrap_or(d.lambda),
            sigma2: self.sigma2.unwrap_or(d.sigma2),
            lambda_sm: self.lambda_sm.unwrap_or(d.lambda_sm),
            lambda_ent: self.lambda_ent.unwrap_or(d.lambda_ent),
            gate: match self.gate {
                Some(GateArg::Hard) => Gate::Hard,
                Some(GateArg::Probit) => Gate::Probit,
                None => d.gate,
            },
            seed: match self.seed_mass {
                Some(SeedMassArg::Output) => SeedMass::Output,
                Some(SeedMassArg::Unit) => SeedMass::Unit,
                None => d.seed,
            },
        }
    }
}

#[derive(Args, Debug)]
struct AttributeArgs {
    net: PathBuf,
    input: PathBuf,
    #[arg(long, value_enum, default_value = "sg")]
    game: GameArg,
    #[command(flatten)]
    rg: RgArgs,
    /// Output JSON; the input map is also written as `<stem>.input.csv`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HellingerArgs {
    net_a: PathBuf,
    net_b: PathBuf,
    input: PathBuf,
    #[arg(long, value_enum, default_value = "rg")]
    game: GameArg,
    /// Also report the distance conditioned on reaching the input layer.
    #[arg(long)]
    conditioned: bool,
    /// Export the per-terminal h² map (`<stem>.h2.csv` next to the output).
    #[arg(long = "per-pixel")]
    per_pixel: bool,
    /// Also report the distance minimised over hidden-unit permutations.
    #[arg(long)]
    perm: bool,
    #[command(flatten)]
    rg: RgArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    net: PathBuf,
    /// Directory of input files (`*.json`).
    inputs: PathBuf,
    #[arg(long, value_enum, default_value = "cascade")]
    mode: SweepMode,
    /// Number of randomisation seeds (cascade) or noise draws per input (noise).
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    /// Root seed; every random stream derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise levels for the noise mode.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,1")]
    sigmas: Vec<f64>,
    #[command(flatten)]
    rg: RgArgs,
    /// Output CSV; the manifest and rows are also written as `<stem>.json`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long = "max-width", default_value_t = 5)]
    max_width: usize,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    suite: pathgame::Suite,
    /// Mis-scales the stopping-game discount so the gradient checks must fail.
    #[arg(long = "inject-fault")]
    inject_fault: bool,
}

#[derive(Args, Debug)]
struct GenNetArgs {
    /// Layer widths from input to output, e.g. `3,4,1`.
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    /// `relu`, `gelu` or `softplus:θ`.
    #[arg(long, default_value = "relu", value_parser = parse_activation)]
    activation: Activation,
    #[arg(long = "with-skip")]
    with_skip: bool,
    #[arg(long = "with-maxpool")]
    with_maxpool: bool,
    #[arg(long = "with-attention")]
    with_attention: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_suite(s: &str) -> Result<pathgame::Suite, String> {
    pathgame::Suite::parse(s).ok_or_else(|| format!("unknown suite {s:?}; expected all, sg, rg, hellinger, adf or attn"))
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s {
        "relu" => Ok(Activation::Relu),
        "gelu" => Ok(Activation::Gelu),
        _ => {
            let theta = s
                .strip_prefix("softplus:")
                .ok_or_else(|| format!("unknown activation {s:?}; expected relu, gelu or softplus:θ"))?;
            let theta: f64 = theta.parse().map_err(|e| format!("bad softplus temperature {theta:?}: {e}"))?;
            if theta > 0.0 && theta.is_finite() {
                Ok(Activation::Softplus(theta))
            } else {
                Err(format!("softplus temperature must be positive, got {theta}"))
            }
        }
    }
}

/// Exit status for a failed run: 2 for malformed documents, 4 for topology
/// mismatches, 3 for everything else the caller asked for.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Schema { .. } | Error::InputLength { .. } | Error::NonFinite(_)) => 2,
        Some(Error::Topology(_)) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Attribute(args) => commands::attribute(&args),
        Command::Hellinger(args) => commands::hellinger(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Check(args) => commands::check(&args),
        Command::GenNet(args) => commands::gen_net(&args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
