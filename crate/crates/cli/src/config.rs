//! Run configuration: a sectioned key-value document resolved from built-in
//! defaults, per-command defaults, an optional config file and `--set`
//! overrides, then validated into typed settings.

use std::fmt;
use std::path::PathBuf;

use qhdturb::grid::{Grid, MAX_FD_ORDER};
use qhdturb::kvdoc::KvDocument;
use qhdturb::params::PhysicalParams;
use qhdturb::tracer::DriftConvention;

/// Largest grid accepted from a config (points over all axes).
pub const MAX_GRID_POINTS: usize = 256 * 256 * 256;
pub const MAX_PARTICLES: usize = 10_000_000;
pub const MAX_STEPS: usize = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    EvolveSchrodinger,
    EvolveMadelung,
    Diagnose,
    Compare,
    Average,
    Tracer,
    AnalyticGaussian,
    AnalyticHydrogen,
    Scales,
    Validate,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::EvolveSchrodinger,
        Command::EvolveMadelung,
        Command::Diagnose,
        Command::Compare,
        Command::Average,
        Command::Tracer,
        Command::AnalyticGaussian,
        Command::AnalyticHydrogen,
        Command::Scales,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::EvolveSchrodinger => "evolve-schrodinger",
            Command::EvolveMadelung => "evolve-madelung",
            Command::Diagnose => "diagnose",
            Command::Compare => "compare",
            Command::Average => "average",
            Command::Tracer => "tracer",
            Command::AnalyticGaussian => "analytic gaussian",
            Command::AnalyticHydrogen => "analytic hydrogen",
            Command::Scales => "scales",
            Command::Validate => "validate",
        }
    }

    /// Overrides of the global defaults for this command.
    fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::EvolveMadelung | Command::Compare => &[
                ("grid.points", "32"),
                ("grid.length", "4"),
                ("solver.dt", "0.006666666666666667"),
                ("solver.steps", "150"),
                ("solver.snapshot_stride", "15"),
            ],
            Command::Tracer => &[
                ("grid.points", "256"),
                ("grid.length", "16"),
                ("initial.state", "harmonic"),
            ],
            Command::AnalyticGaussian => &[("grid.length", "32"), ("initial.time", "0.5")],
            Command::AnalyticHydrogen => &[
                ("grid.dim", "3"),
                ("grid.points", "129"),
                ("grid.length", "16"),
                ("grid.periodic", "false"),
                ("grid.fd_order", "12"),
                ("output.fields", "false"),
            ],
            _ => &[],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every accepted key with its global default.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "20240601"),
    ("grid.dim", "1"),
    ("grid.points", "256"),
    ("grid.length", "40"),
    ("grid.periodic", "true"),
    ("grid.fd_order", "4"),
    ("physics.hbar", "1"),
    ("physics.mass", "1"),
    ("physics.light_speed", "137.035999084"),
    ("initial.state", "gaussian"),
    ("initial.sigma0", "1"),
    ("initial.time", "0"),
    ("initial.omega", "1"),
    ("potential.kind", "none"),
    ("potential.omega", "1"),
    ("solver.dt", "0.01"),
    ("solver.steps", "200"),
    ("solver.snapshot_stride", "20"),
    ("tracer.particles", "10000"),
    ("tracer.dt", "0.005"),
    ("tracer.steps", "2000"),
    ("tracer.drift", "forward"),
    ("tracer.start", "density"),
    ("tracer.x0", "1"),
    ("tracer.fields", "static"),
    ("analytic.bohr_radius", "1"),
    ("analytic.core_radius", "2.5"),
    ("scales.mass", "9.1093837015e-31"),
    ("scales.particle_size", "0"),
    ("scales.light_speed", "299792458"),
    ("scales.hbar", "1.054571817e-34"),
    ("scales.bohr_radius", "5.29177210903e-11"),
    ("input.path", ""),
    ("output.format", "csv"),
    ("output.fields", "true"),
    ("tolerance.compare", "1e-4"),
    ("tolerance.identity", "1e-6"),
    ("tolerance.hydrogen", "1e-4"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<qhdturb::Error> for ConfigError {
    fn from(e: qhdturb::Error) -> Self {
        ConfigError(e.to_string())
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    pub length: f64,
    pub periodic: bool,
    pub fd_order: usize,
}

impl GridSpec {
    /// Cube of side `length` centred on the origin.
    pub fn build(&self) -> qhdturb::Result<Grid> {
        let g = if self.periodic {
            Grid::periodic_cube(self.dim, self.points, self.length)?
        } else {
            Grid::bounded_cube(self.dim, self.points, -0.5 * self.length, 0.5 * self.length)?
        };
        g.with_fd_order(self.fd_order)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    /// Free packet of width `sigma0` sampled at `time`.
    Gaussian { sigma0: f64, time: f64 },
    /// Harmonic-oscillator ground state of frequency `omega`.
    Harmonic { omega: f64 },
    /// Read from `input.path`.
    Input,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    None,
    Harmonic { omega: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSpec {
    pub dt: f64,
    pub steps: usize,
    pub snapshot_stride: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TracerStart {
    /// Sampled from the initial density.
    Density,
    /// All particles at `x0` on every axis.
    Point(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracerSpec {
    pub particles: usize,
    pub dt: f64,
    pub steps: usize,
    pub drift: DriftConvention,
    pub start: TracerStart,
    /// Advance the wavefunction alongside the particles instead of freezing
    /// the initial drift.
    pub evolving: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalesSpec {
    pub mass: f64,
    pub particle_size: f64,
    pub light_speed: f64,
    pub hbar: f64,
    pub bohr_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Binary,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Binary => "bin",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub compare: f64,
    pub identity: f64,
    pub hydrogen: f64,
}

/// Validated settings for one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub grid: GridSpec,
    pub params: PhysicalParams,
    pub initial: InitialState,
    pub potential: Potential,
    pub solver: SolverSpec,
    pub tracer: TracerSpec,
    pub bohr_radius: f64,
    pub core_radius: f64,
    pub scales: ScalesSpec,
    pub input: Option<PathBuf>,
    pub format: OutputFormat,
    pub write_fields: bool,
    pub tolerance: Tolerances,
    /// Fully resolved key-value echo, every key present.
    pub document: KvDocument,
}

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

fn check_known(doc: &KvDocument) -> Result<()> {
    match doc.keys().find(|k| !is_known(k)) {
        Some(k) => Err(ConfigError(format!("unknown configuration key '{k}'"))),
        None => Ok(()),
    }
}

/// Splits a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override '{s}' is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Resolves and validates a configuration. `text` is the content of a
/// config file (may be empty); overrides are applied last.
pub fn parse_run_config(command: Command, text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut doc = KvDocument::new();
    for (k, v) in KEYS {
        doc.set(k, v);
    }
    for (k, v) in command.defaults() {
        doc.set(k, v);
    }
    let file = KvDocument::parse(text)?;
    check_known(&file)?;
    doc.merge(&file);
    for (k, v) in overrides {
        if !is_known(k) {
            return Err(ConfigError(format!("unknown configuration key '{k}'")));
        }
        doc.try_set(k, v)?;
    }
    RunConfig::from_document(command, doc)
}

fn get<T: std::str::FromStr>(doc: &KvDocument, key: &str) -> Result<T> {
    doc.require(key).map_err(ConfigError::from)
}

fn positive(doc: &KvDocument, key: &str) -> Result<f64> {
    let v: f64 = get(doc, key)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError(format!("{key} must be a positive finite number, got {v}")))
    }
}

fn non_negative(doc: &KvDocument, key: &str) -> Result<f64> {
    let v: f64 = get(doc, key)?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError(format!("{key} must be a non-negative finite number, got {v}")))
    }
}

fn count(doc: &KvDocument, key: &str, lo: usize, hi: usize) -> Result<usize> {
    let v: usize = get(doc, key)?;
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError(format!("{key} must be in {lo}..={hi}, got {v}")))
    }
}

fn choice<'a>(doc: &'a KvDocument, key: &str, allowed: &[&str]) -> Result<&'a str> {
    let v = doc.get(key).unwrap_or("");
    if allowed.contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError(format!("{key} must be one of {}, got '{v}'", allowed.join("|"))))
    }
}

impl RunConfig {
    pub fn from_document(command: Command, doc: KvDocument) -> Result<Self> {
        check_known(&doc)?;
        let seed: u64 = get(&doc, "seed")?;

        let dim = count(&doc, "grid.dim", 1, 3)?;
        let points = count(&doc, "grid.points", qhdturb::grid::MIN_POINTS, MAX_GRID_POINTS)?;
        if points.checked_pow(dim as u32).is_none_or(|n| n > MAX_GRID_POINTS) {
            return Err(ConfigError(format!(
                "grid of {points}^{dim} points exceeds the limit of {MAX_GRID_POINTS}"
            )));
        }
        let grid = GridSpec {
            dim,
            points,
            length: positive(&doc, "grid.length")?,
            periodic: get(&doc, "grid.periodic")?,
            fd_order: count(&doc, "grid.fd_order", 2, MAX_FD_ORDER)?,
        };
        grid.build()?;

        let params = PhysicalParams::new(
            positive(&doc, "physics.hbar")?,
            positive(&doc, "physics.mass")?,
            positive(&doc, "physics.light_speed")?,
        )?;

        let initial = match choice(&doc, "initial.state", &["gaussian", "harmonic", "input"])? {
            "gaussian" => InitialState::Gaussian {
                sigma0: positive(&doc, "initial.sigma0")?,
                time: non_negative(&doc, "initial.time")?,
            },
            "harmonic" => InitialState::Harmonic {
                omega: positive(&doc, "initial.omega")?,
            },
            _ => InitialState::Input,
        };
        let potential = match choice(&doc, "potential.kind", &["none", "harmonic"])? {
            "none" => Potential::None,
            _ => Potential::Harmonic {
                omega: positive(&doc, "potential.omega")?,
            },
        };
        let solver = SolverSpec {
            dt: positive(&doc, "solver.dt")?,
            steps: count(&doc, "solver.steps", 1, MAX_STEPS)?,
            snapshot_stride: count(&doc, "solver.snapshot_stride", 1, MAX_STEPS)?,
        };
        let drift = match choice(&doc, "tracer.drift", &["forward", "reversed"])? {
            "forward" => DriftConvention::Forward,
            _ => DriftConvention::Reversed,
        };
        let start = match choice(&doc, "tracer.start", &["density", "point"])? {
            "density" => TracerStart::Density,
            _ => {
                let x0: f64 = get(&doc, "tracer.x0")?;
                if !x0.is_finite() {
                    return Err(ConfigError(format!("tracer.x0 must be finite, got {x0}")));
                }
                TracerStart::Point(x0)
            }
        };
        let tracer = TracerSpec {
            particles: count(&doc, "tracer.particles", 1, MAX_PARTICLES)?,
            dt: positive(&doc, "tracer.dt")?,
            steps: count(&doc, "tracer.steps", 0, MAX_STEPS)?,
            drift,
            start,
            evolving: choice(&doc, "tracer.fields", &["static", "evolving"])? == "evolving",
        };
        let scales = ScalesSpec {
            mass: positive(&doc, "scales.mass")?,
            particle_size: non_negative(&doc, "scales.particle_size")?,
            light_speed: positive(&doc, "scales.light_speed")?,
            hbar: positive(&doc, "scales.hbar")?,
            bohr_radius: positive(&doc, "scales.bohr_radius")?,
        };
        let input = match doc.get("input.path").unwrap_or("") {
            "" => None,
            p => Some(PathBuf::from(p)),
        };
        let needs_input = matches!(command, Command::Diagnose | Command::Average)
            || (initial == InitialState::Input
                && matches!(
                    command,
                    Command::EvolveSchrodinger | Command::EvolveMadelung | Command::Compare | Command::Tracer
                ));
        if needs_input && input.is_none() {
            return Err(ConfigError(format!("{command} requires input.path")));
        }
        let format = match choice(&doc, "output.format", &["csv", "bin"])? {
            "csv" => OutputFormat::Csv,
            _ => OutputFormat::Binary,
        };
        let tolerance = Tolerances {
            compare: positive(&doc, "tolerance.compare")?,
            identity: positive(&doc, "tolerance.identity")?,
            hydrogen: positive(&doc, "tolerance.hydrogen")?,
        };
        if matches!(command, Command::AnalyticHydrogen) && grid.dim != 3 {
            return Err(ConfigError("analytic hydrogen needs grid.dim = 3".into()));
        }
        Ok(RunConfig {
            command,
            seed,
            grid,
            params,
            initial,
            potential,
            solver,
            tracer,
            bohr_radius: positive(&doc, "analytic.bohr_radius")?,
            core_radius: non_negative(&doc, "analytic.core_radius")?,
            scales,
            input,
            format,
            write_fields: get(&doc, "output.fields")?,
            tolerance,
            document: doc,
        })
    }

    /// Resolved settings as `(key, value)` pairs for embedding in outputs.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.document.entries().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qhdturb::validation::DEFAULT_SEED;

    #[test]
    fn defaults_resolve_for_every_command() {
        for c in Command::ALL {
            let needs = matches!(c, Command::Diagnose | Command::Average);
            let overrides = if needs {
                vec![("input.path".to_string(), "x".to_string())]
            } else {
                vec![]
            };
            let cfg = parse_run_config(c, "", &overrides).unwrap();
            assert_eq!(cfg.seed, DEFAULT_SEED);
            assert_eq!(cfg.document.entries().len(), KEYS.len());
        }
    }

    #[test]
    fn file_then_overrides() {
        let cfg = parse_run_config(
            Command::EvolveSchrodinger,
            "[grid]\npoints = 64\nlength = 10\n",
            &[("grid.points".into(), "128".into())],
        )
        .unwrap();
        assert_eq!(cfg.grid.points, 128);
        assert_eq!(cfg.grid.length, 10.0);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let bad = [
            "[grid]\npointz = 3\n",
            "[grid]\npoints = 4\n",
            "[grid]\nlength = -1\n",
            "[physics]\nhbar = 0\n",
            "[tracer]\ndrift = sideways\n",
            "[grid]\ndim = 3\npoints = 512\n",
            "[solver]\ndt = nan\n",
        ];
        for text in bad {
            assert!(parse_run_config(Command::EvolveSchrodinger, text, &[]).is_err(), "{text}");
        }
        assert!(parse_run_config(Command::Diagnose, "", &[]).is_err());
        assert!(parse_run_config(Command::Scales, "", &[("nope".into(), "1".into())]).is_err());
    }
}
