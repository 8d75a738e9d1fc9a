//! Command-line driver: argument parsing, config resolution and exit codes.
//!
//! Exit codes: 0 success, 1 a check above tolerance, 2 configuration or
//! input error, 3 numerical abort.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::Failure;
pub use config::{parse_run_config, Command, ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "qhdturb", version, about = "Madelung hydrodynamics and turbulence diagnostics")]
struct Cli {
    /// Sectioned key-value config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default `qhdturb-<command>`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override one config key; repeatable. `--grid.points 128` is
    /// shorthand for `--set grid.points=128`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Split-step Fourier evolution.
    EvolveSchrodinger,
    /// RK4 evolution of the density and action.
    EvolveMadelung,
    /// Turbulence diagnostics of a wavefunction or density file.
    Diagnose { input: Option<PathBuf> },
    /// Matched split-step and hydrodynamic runs.
    Compare,
    /// Reynolds and Favre statistics of a series directory.
    Average { input: Option<PathBuf> },
    /// Stochastic tracer particles on the Madelung drift.
    Tracer,
    /// Closed-form reference states with identity checks.
    Analytic {
        #[arg(value_enum)]
        case: Case,
    },
    /// Compton scales and the fine-structure ratios.
    Scales,
    /// Full invariant suite.
    Validate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Case {
    Gaussian,
    Hydrogen,
}

/// Rewrites dotted long flags (`--grid.points 64`, `--grid.points=64`) into
/// `--set grid.points=64`.
pub fn expand_dotted_flags(args: Vec<OsString>) -> Vec<OsString> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        let Some(flag) = s.strip_prefix("--") else {
            out.push(a);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !name.contains('.') {
            out.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().map(|v| v.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        out.push("--set".into());
        out.push(format!("{name}={value}").into());
    }
    out
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = expand_dotted_flags(argv.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let (command, input) = match cli.command {
        Sub::EvolveSchrodinger => (Command::EvolveSchrodinger, None),
        Sub::EvolveMadelung => (Command::EvolveMadelung, None),
        Sub::Diagnose { input } => (Command::Diagnose, input),
        Sub::Compare => (Command::Compare, None),
        Sub::Average { input } => (Command::Average, input),
        Sub::Tracer => (Command::Tracer, None),
        Sub::Analytic { case: Case::Gaussian } => (Command::AnalyticGaussian, None),
        Sub::Analytic { case: Case::Hydrogen } => (Command::AnalyticHydrogen, None),
        Sub::Scales => (Command::Scales, None),
        Sub::Validate => (Command::Validate, None),
    };
    let text = match &cli.config {
        Some(p) => match fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", p.display());
                return EXIT_CONFIG;
            }
        },
        None => String::new(),
    };
    let mut overrides = Vec::new();
    for s in &cli.set {
        match config::parse_override(s) {
            Ok(kv) => overrides.push(kv),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(p) = input {
        overrides.push(("input.path".into(), p.to_string_lossy().into_owned()));
    }
    let cfg = match parse_run_config(command, &text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = cli
        .out
        .unwrap_or_else(|| PathBuf::from(format!("qhdturb-{}", command.name().replace(' ', "-"))));
    match commands::execute(&cfg, &out, commands::Console { quiet: cli.quiet }) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Failure::Numerical(_) => EXIT_NUMERICAL,
                _ => EXIT_CONFIG,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn dotted_flags_become_overrides() {
        let got = expand_dotted_flags(os(&["qhdturb", "--grid.points", "64", "--solver.dt=0.1", "--quiet", "scales"]));
        assert_eq!(
            got,
            os(&["qhdturb", "--set", "grid.points=64", "--set", "solver.dt=0.1", "--quiet", "scales"])
        );
    }

    #[test]
    fn bad_config_is_exit_two() {
        assert_eq!(run(["qhdturb", "--set", "grid.points=3", "scales"]), EXIT_CONFIG);
        assert_eq!(run(["qhdturb", "--set", "bogus=1", "scales"]), EXIT_CONFIG);
        assert_eq!(run(["qhdturb", "no-such-command"]), EXIT_CONFIG);
    }
}
