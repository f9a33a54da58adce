mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "metastab",
    version,
    about = "Metastability analysis of parameter-dependent semi-Markov families"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    json: bool,
    /// Write the report to a file instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a spec file and print its diagnostics.
    Validate(SpecArg),
    /// Reduce a spec to source-only transition times.
    Reduce(SpecArg),
    /// Build the cluster hierarchy and the time-scale lattice.
    Analyze(SpecArg),
    /// Metastable distributions for every lattice interval or one time scale.
    Metastable(MetastableArgs),
    /// Monte Carlo occupancy at a concrete eps.
    Simulate(SimulateArgs),
    /// Compare predictions against exact oracles and Monte Carlo.
    Verify(VerifyArgs),
    /// Write the bundled example specs.
    Presets(PresetsArgs),
}

#[derive(Args, Debug)]
struct SpecArg {
    /// Spec file, or `preset:<name>` for a bundled example.
    spec: String,
}

#[derive(Args, Debug)]
struct MetastableArgs {
    #[command(flatten)]
    spec: SpecArg,
    /// Initial state; every state when omitted.
    #[arg(long)]
    from: Option<String>,
    /// Time scale expression, e.g. `eps^-3/2`.
    #[arg(long)]
    time: Option<String>,
    /// Show pair states of a reduced raw spec next to their marginal.
    #[arg(long)]
    pairs: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Auto,
    Path,
    Uniformized,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArg,
    #[arg(long)]
    eps: f64,
    /// Time scale expression or a plain number.
    #[arg(long)]
    time: String,
    #[arg(long, default_value_t = 20_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial state; the first state when omitted.
    #[arg(long)]
    from: Option<String>,
    #[arg(long, value_enum, default_value_t = SamplerArg::Auto)]
    sampler: SamplerArg,
    /// Run paths on the current thread only.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    pairs: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    spec: SpecArg,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.01, 0.001])]
    eps_list: Vec<f64>,
    /// eps for the Monte Carlo checks; the smallest of `--eps-list` by default.
    #[arg(long)]
    mc_eps: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial states for the occupancy checks (repeatable).
    #[arg(long)]
    from: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    oracle_tol: f64,
    #[arg(long, default_value_t = 0.01)]
    hitting_tol: f64,
    #[arg(long, default_value_t = 0.03)]
    occupancy_tol: f64,
    /// Skip occupancy checks that need more path jumps than this.
    #[arg(long, default_value_t = 5e9)]
    path_jump_limit: f64,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct PresetsArgs {
    /// Directory to write the spec files into.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let format = if cli.json { Format::Json } else { cli.format };
    let (text, code) = match commands::run(&cli.command, format) {
        Ok(out) => (out, 0),
        Err(Failure::Report { output, code }) => (output, code),
        Err(Failure::Message { message, code }) => {
            eprintln!("error: {message}");
            return ExitCode::from(code);
        }
    };
    match &cli.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(commands::EXIT_IO);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(code)
}
