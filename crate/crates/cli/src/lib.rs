//! Command-line front end for obslab experiments.
//!
//! Every command validates its inputs, runs, and only then writes its output
//! files. Exit codes: 0 success, 1 invalid input, 2 run failure (divergence or
//! a failed verification check).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

pub mod commands;
pub mod config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] obslab::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "obslab", version, about = "Sampled-data observer experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one experiment and write trajectory.csv, samples.csv, summary.json.
    Simulate(SimulateArgs),
    /// Print the maximum allowable sampling period as JSON.
    Tmax(TmaxArgs),
    /// Tabulate T_max(q) over a bracket into tmax_curve.csv.
    SweepQ(SweepArgs),
    /// Run the certified soundness campaign.
    Verify(VerifyArgs),
    /// Compare predictor constants q on the oscillator example.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub horizon: Option<f64>,
    #[arg(long = "T", allow_hyphen_values = true)]
    pub diameter: Option<f64>,
    /// Replace the predictor by K = -qI.
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TmaxArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub q: f64,
    #[arg(long, conflicts_with = "linear", allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long = "L", allow_hyphen_values = true)]
    pub l: Option<f64>,
    #[arg(long = "rPr", allow_hyphen_values = true)]
    pub rpr: Option<f64>,
    /// JSON object `{"A", "C", "R", "P"}` (row-major), inline or as a file path.
    #[arg(long)]
    pub linear: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Optional config; defaults to the oscillator example.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `lo,hi`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, 3.0])]
    pub bracket: Vec<f64>,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    #[arg(long)]
    pub optimize: bool,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Optional config; defaults to the oscillator example.
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Diameters to certify; defaults to 0.99 T_max.
    #[arg(long = "T-list", value_delimiter = ',', allow_hyphen_values = true)]
    pub t_list: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Upper end of the empirical MASP search.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub search_upper: f64,
    #[arg(long)]
    pub skip_empirical: bool,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "q-list", value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.8, 2.0])]
    pub q_list: Vec<f64>,
    #[arg(long = "T-list", value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.1, 0.2, 0.3])]
    pub t_list: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

/// Files and stdout text produced by a command, written only after it succeeds.
#[derive(Debug, Default)]
pub struct Report {
    pub dir: PathBuf,
    pub files: Vec<(String, String)>,
    pub stdout: Option<String>,
    pub exit: i32,
}

impl Report {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            ..Self::default()
        }
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn write(&self) -> Result<(), CliError> {
        if self.files.is_empty() {
            return Ok(());
        }
        std::fs::create_dir_all(&self.dir).map_err(|source| CliError::Write {
            path: self.dir.clone(),
            source,
        })?;
        for (name, contents) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
        }
        Ok(())
    }
}

/// JSON number, or the string `"inf"` / `"-inf"` / `"nan"` when not finite.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(obslab::csv::fmt_f64(x))
    }
}

pub fn json_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_f64)
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Parses `OBSLAB_THREADS`; unset means one thread.
pub fn thread_count(var: Option<&str>) -> Result<usize, CliError> {
    match var {
        None => Ok(1),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::invalid(format!(
                "OBSLAB_THREADS must be a positive integer, got `{s}`"
            ))),
        },
    }
}

pub fn execute(cli: Cli) -> Result<Report, CliError> {
    let threads = thread_count(std::env::var("OBSLAB_THREADS").ok().as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::invalid(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Tmax(a) => commands::tmax(&a),
        Command::SweepQ(a) => commands::sweep_q(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Compare(a) => commands::compare(&a),
    })
}

/// Parses `args` and runs them; usage errors map to [`EXIT_INVALID`].
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            code
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let report = match execute(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if let Err(e) = report.write() {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    if let Some(out) = &report.stdout {
        print!("{out}");
    }
    report.exit
}

pub fn read_text_or_inline(arg: &str) -> Result<String, CliError> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    let path = Path::new(arg);
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}
