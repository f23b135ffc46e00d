//! Library side of the `hopwheel` command: scenario configs, single runs
//! and parameter sweeps.

pub mod config;
pub mod run;
pub mod sweep;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{load_document, resolve, ConfigError};
use sweep::{run_sweep, write_csv, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hopwheel", version, about = "Simulate a pendulum-driven rolling and jumping wheel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write trajectory, metrics and diagnostics.
    Run {
        #[command(flatten)]
        base: BaseArgs,
        /// Print the effective configuration as JSON and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Run a Cartesian grid of scenarios and write one combined CSV.
    Sweep {
        #[command(flatten)]
        base: BaseArgs,
        /// Swept key and its values, e.g. `controller.kp=0.02,0.03`. Repeatable.
        #[arg(long = "grid", value_name = "KEY=V1,V2,...")]
        grid: Vec<String>,
        /// JSON sweep spec with an `axes` list; axes from --grid are appended.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct BaseArgs {
    /// Scenario config file (JSON).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Built-in scenario used as the base: vertical or horizontal.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Override a config value by dotted key, e.g. `robot.m_p=0.15`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (same as `--set output.dir=DIR`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl BaseArgs {
    fn document(&self) -> Result<serde_json::Value, ConfigError> {
        let mut sets = self.set.clone();
        if let Some(dir) = &self.out {
            sets.push(format!("output.dir={}", dir.display()));
        }
        load_document(self.config.as_deref(), self.scenario.as_deref(), &sets)
    }
}

fn config_failure(e: ConfigError) -> i32 {
    eprintln!("error: {e}");
    EXIT_CONFIG
}

fn cmd_run(base: &BaseArgs, dump: bool) -> i32 {
    let cfg = match base.document().and_then(resolve) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    if dump {
        let text = serde_json::to_string_pretty(&cfg.to_json()).expect("config serializes");
        println!("{text}");
        return EXIT_OK;
    }
    let outcome = match run::execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        }
    };
    if let Err(e) = run::write_outputs(&cfg, &outcome) {
        eprintln!("error: {e}");
        return EXIT_IO;
    }
    println!("{}", outcome.summary_line());
    EXIT_OK
}

fn cmd_sweep(base: &BaseArgs, grid: &[String], spec_path: Option<&std::path::Path>) -> i32 {
    let mut spec = match spec_path.map(SweepSpec::from_file).transpose() {
        Ok(s) => s.unwrap_or(SweepSpec { axes: Vec::new() }),
        Err(e) => return config_failure(e),
    };
    for arg in grid {
        match SweepSpec::parse_axis(arg) {
            Ok(axis) => spec.axes.push(axis),
            Err(e) => return config_failure(e),
        }
    }
    if spec.cell_count() == 0 {
        eprintln!("error: sweep grid is empty");
        return EXIT_CONFIG;
    }
    let doc = match base.document() {
        Ok(d) => d,
        Err(e) => return config_failure(e),
    };
    // the output directory is not swept; take it from the base config
    let dir = match resolve(doc.clone()) {
        Ok(cfg) => cfg.output.dir,
        Err(e) => return config_failure(e),
    };
    let results = run_sweep(&doc, &spec);
    let path = dir.join("sweep.csv");
    let written = fs::create_dir_all(&dir)
        .and_then(|_| File::create(&path))
        .map_err(|e| e.to_string())
        .and_then(|f| write_csv(BufWriter::new(f), &spec, &results).map_err(|e| e.to_string()));
    if let Err(e) = written {
        eprintln!("error: cannot write {}: {e}", path.display());
        return EXIT_IO;
    }
    let ok = results.iter().filter(|r| r.outcome.is_ok()).count();
    for r in results.iter().filter(|r| r.outcome.is_err()) {
        eprintln!("cell {} failed: {}", r.index, r.outcome.as_ref().unwrap_err());
    }
    println!("cells={} ok={} failed={} csv={}", results.len(), ok, results.len() - ok, path.display());
    if ok > 0 {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match &cli.command {
        Command::Run { base, dump_config } => cmd_run(base, *dump_config),
        Command::Sweep { base, grid, spec } => cmd_sweep(base, grid, spec.as_deref()),
    }
}
