use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varsbp::sbp::Order;

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "varsbp", version, about = "Variational SBP solver for initial value problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump H, D, the affine operator and their spectra as CSV.
    Operators(OperatorsArgs),
    /// Solve one registry problem and write the trajectory.
    Solve(SolveArgs),
    /// Solve the unregularized gravity functional.
    Naive(NaiveArgs),
    /// Run a grid-refinement ladder and fit convergence orders.
    Converge(ConvergeArgs),
    /// Long damped-oscillator run with energy and Noether diagnostics.
    Longtime(LongtimeArgs),
}

#[derive(Args, Debug)]
struct OperatorsArgs {
    #[arg(long, value_parser = parse_order)]
    order: Order,
    #[arg(long)]
    nt: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    v0: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// One of gravity-bvp, gravity, cubic, exponential, damped-ho.
    #[arg(long)]
    problem: String,
    #[arg(long, value_parser = parse_order)]
    order: Order,
    #[arg(long)]
    nt: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    t2: f64,
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    /// Initial velocity; required for second-order problems.
    #[arg(long, allow_negative_numbers = true)]
    v0: Option<f64>,
    /// Model parameter override `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NaiveArgs {
    #[arg(long, value_parser = parse_order)]
    order: Order,
    #[arg(long)]
    nt: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    v0: f64,
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, value_parser = parse_order)]
    order: Order,
    /// Comma-separated ascending grid sizes.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256,512")]
    nts: Vec<usize>,
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LongtimeArgs {
    #[arg(long, value_delimiter = ',', default_value = "513,1025,2049")]
    nts: Vec<usize>,
    #[arg(long, default_value_t = 204.8)]
    t2: f64,
    #[arg(long, value_parser = parse_order, default_value = "sbp42")]
    order: Order,
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn parse_order(s: &str) -> Result<Order, String> {
    s.parse().map_err(|e: varsbp::Error| e.to_string())
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{value}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{value}` is not finite"));
    }
    Ok((name.trim().to_string(), v))
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or unusable output location.
    Usage(String),
    /// The solver did not produce a solution.
    Solve(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Solve(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Solve(m) => m,
        }
    }
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
    let result = match cli.command {
        Command::Operators(a) => commands::operators(a),
        Command::Solve(a) => commands::solve(a),
        Command::Naive(a) => commands::naive(a),
        Command::Converge(a) => commands::converge(a),
        Command::Longtime(a) => commands::longtime(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            if let Failure::Usage(_) = f {
                eprintln!("run `varsbp --help` for usage");
            }
            ExitCode::from(f.code())
        }
    }
}
