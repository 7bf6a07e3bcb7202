//! `homog`: effective speeds, ε-simulations, effective limits and
//! convergence studies from JSON configs.
//!
//! Exit codes: 0 on success, 1 when the mathematics fails (the error JSON on
//! stderr names the failure), 2 for configuration and IO problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod out;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "homog", version, about = "Homogenization laboratory for u_t = eps^alpha Lap u + g(u/eps)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problem: corrector, effective speed and identity checks.
    Cell(CellArgs),
    /// Simulate the eps-problem on a grid.
    Simulate(SimulateArgs),
    /// Evaluate the eps -> 0 limit in one regime.
    Effective(EffectiveArgs),
    /// Run an eps-sweep against an effective reference.
    Study(StudyArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("slopes").required(true).args(["p", "p_grid"])))]
pub struct CellArgs {
    /// Potential descriptor: a JSON file, or inline JSON starting with '{'.
    #[arg(long)]
    pub potential: String,
    /// One slope |p|; prints a JSON report.
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated slopes; prints a CSV table.
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    /// Root-finder tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write the result and a manifest into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Simulation config (JSON file).
    #[arg(long)]
    pub config: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EffectiveArgs {
    /// alpha-gt1, alpha1, alpha01-1d, alpha01-cone, alpha01-bounds or alpha0-special.
    #[arg(long)]
    pub regime: String,
    /// Potential descriptor: a JSON file, or inline JSON.
    #[arg(long)]
    pub potential: String,
    /// Initial data: a JSON file, or inline JSON.
    #[arg(long)]
    pub u0: String,
    /// Time.
    #[arg(long)]
    pub t: f64,
    /// Lattice step for the L_delta sandwich (alpha01-1d only).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Output window, per axis.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [-2.0, 2.0], allow_hyphen_values = true)]
    pub window: Vec<f64>,
    /// Output nodes per axis.
    #[arg(long, default_value_t = 401)]
    pub nodes: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    /// Study config (JSON file).
    #[arg(long)]
    pub config: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for the eps runs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// A failure with its error-JSON fields and exit code.
#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub path: Option<String>,
    pub hint: Option<String>,
    pub code: u8,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl Failure {
    pub fn io(path: &Path, e: impl fmt::Display) -> anyhow::Error {
        Failure {
            kind: "IoFailure".into(),
            message: format!("{}: {e}", path.display()),
            path: Some(path.display().to_string()),
            hint: None,
            code: 2,
        }
        .into()
    }

    pub fn config(path: Option<&str>, message: String) -> anyhow::Error {
        Failure {
            kind: "InvalidConfig".into(),
            message,
            path: path.map(str::to_string),
            hint: None,
            code: 2,
        }
        .into()
    }
}

fn error_json(err: &anyhow::Error) -> (serde_json::Value, u8) {
    let full = format!("{err:#}");
    if let Some(f) = err.chain().find_map(|e| e.downcast_ref::<Failure>()) {
        let v = serde_json::json!({
            "error": f.kind,
            "message": full,
            "path": f.path,
            "hint": f.hint,
        });
        return (v, f.code);
    }
    if let Some(e) = err.chain().find_map(|e| e.downcast_ref::<homog_core::Error>()) {
        let code = if e.is_config_error() { 2 } else { 1 };
        return (serde_json::json!({ "error": e.kind(), "message": full }), code);
    }
    (serde_json::json!({ "error": "InvalidConfig", "message": full }), 2)
}

fn init_logging() {
    let level = std::env::var("HOMOG_LOG").unwrap_or_default();
    let filter = match level.as_str() {
        "info" | "debug" | "error" => level.as_str(),
        _ => "error",
    };
    env_logger::Builder::new()
        .parse_filters(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    if !matches!(level.as_str(), "" | "info" | "debug" | "error") {
        log::error!("HOMOG_LOG={level:?} is not one of error, info, debug; using error");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let out = match &cli.command {
        Command::Cell(a) => a.out.as_deref(),
        Command::Simulate(a) => Some(a.out.as_path()),
        Command::Effective(a) => Some(a.out.as_path()),
        Command::Study(a) => Some(a.out.as_path()),
    };
    let result = out.map_or(Ok(()), out::clear_manifest).and_then(|()| match &cli.command {
        Command::Cell(a) => run::cell(a),
        Command::Simulate(a) => run::simulate(a),
        Command::Effective(a) => run::effective(a),
        Command::Study(a) => run::study(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (json, code) = error_json(&err);
            eprintln!("{json}");
            ExitCode::from(code)
        }
    }
}
