//! Subcommand implementations. Each returns whether its checks passed; the
//! caller maps that and any error onto the process exit code.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use num_complex::Complex64;
use qhdturb::analytic::{
    self, gaussian_pressure_identity_check, identity_region, GaussianPacketSpec, Hydrogen1sSpec,
    IDENTITY_REGION_FLOOR,
};
use qhdturb::averaging::{self, Quantity};
use qhdturb::exchange::{decode_binary, decode_csv, FieldData, MAGIC};
use qhdturb::field::{ScalarField, SymmetricTensorField, WaveFunction};
use qhdturb::grid::Grid;
use qhdturb::hydro_solver::{self, MadelungState};
use qhdturb::kvdoc::KvDocument;
use qhdturb::madelung::{self, DiagnosticsBundle, HydroFields};
use qhdturb::schrodinger::{self, EvolutionConfig, Mode};
use qhdturb::tracer::{ks_against_density, DriftField, TracerEnsemble};
use qhdturb::validation::{self, Check, CriterionReport};
use qhdturb::Error;
use serde_json::json;

use crate::config::{Command, InitialState, Potential, RunConfig, TracerStart};
use crate::output::{num, RunWriter};

/// Why a run stopped early.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or unreadable input.
    Config(String),
    /// Node formation, non-finite values or a collapsed support.
    Numerical(String),
    Io(io::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical abort: {m}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NodeFormation { .. } | Error::NonFinite { .. } | Error::MaskTooLarge { .. } => {
                Failure::Numerical(e.to_string())
            }
            Error::Io(e) => Failure::Io(e),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<bool, Failure>;

/// Console sink honouring `--quiet`.
#[derive(Clone, Copy, Debug)]
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn info(&self, msg: impl fmt::Display) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    pub fn warn(&self, msg: impl fmt::Display) {
        if !self.quiet {
            eprintln!("warning: {msg}");
        }
    }
}

pub fn execute(cfg: &RunConfig, out: &Path, console: Console) -> Outcome {
    let mut w = RunWriter::create(out, cfg)?;
    let passed = match cfg.command {
        Command::EvolveSchrodinger => evolve_schrodinger(cfg, &mut w, console)?,
        Command::EvolveMadelung => evolve_madelung(cfg, &mut w, console)?,
        Command::Diagnose => diagnose(cfg, &mut w)?,
        Command::Compare => compare(cfg, &mut w, console)?,
        Command::Average => average(cfg, &mut w, console)?,
        Command::Tracer => tracer(cfg, &mut w, console)?,
        Command::AnalyticGaussian => analytic_gaussian(cfg, &mut w, console)?,
        Command::AnalyticHydrogen => analytic_hydrogen(cfg, &mut w, console)?,
        Command::Scales => scales(cfg, &mut w, console)?,
        Command::Validate => validate(cfg, &mut w, console)?,
    };
    w.finish(if passed { "pass" } else { "fail" })?;
    Ok(passed)
}

/// Reads an exchange-format field, binary or CSV by its leading bytes.
pub fn load_field(path: &Path) -> Result<FieldData, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let field = if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Failure::Config(format!("{}: not UTF-8", path.display())))?;
        decode_csv(&text).map(|c| c.field)
    };
    field.map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Wavefunction from an input file: complex fields as-is, densities as the
/// real root. Both are renormalized.
fn input_wavefunction(cfg: &RunConfig) -> Result<WaveFunction, Failure> {
    let path = cfg.input.as_deref().ok_or_else(|| Failure::Config("input.path is not set".into()))?;
    let psi = match load_field(path)? {
        FieldData::Complex(psi) => psi,
        FieldData::Scalar(rho) => {
            if rho.min() < 0.0 {
                return Err(Failure::Config("input density has negative values".into()));
            }
            let vals = rho.values().iter().map(|r| Complex64::new(r.sqrt(), 0.0)).collect();
            WaveFunction::new(rho.grid().clone(), vals)?
        }
        FieldData::Vector(_) => return Err(Failure::Config("input must be a complex or scalar field".into())),
    };
    Ok(psi.normalized()?)
}

fn harmonic_ground_state(grid: &Grid, cfg: &RunConfig, omega: f64) -> Result<WaveFunction, Failure> {
    let a = cfg.params.mass * omega / (2.0 * cfg.params.hbar);
    let psi = WaveFunction::from_fn(grid, |x| {
        let r2: f64 = x[..grid.dim()].iter().map(|c| c * c).sum();
        Complex64::new((-a * r2).exp(), 0.0)
    })?;
    Ok(psi.normalized()?)
}

fn initial_wavefunction(cfg: &RunConfig) -> Result<WaveFunction, Failure> {
    match cfg.initial {
        InitialState::Gaussian { sigma0, time } => {
            let setup = GaussianPacketSpec::new(sigma0, cfg.params, time)?;
            Ok(setup.wavefunction(&cfg.grid.build()?)?)
        }
        InitialState::Harmonic { omega } => harmonic_ground_state(&cfg.grid.build()?, cfg, omega),
        InitialState::Input => input_wavefunction(cfg),
    }
}

fn potential_field(cfg: &RunConfig, grid: &Grid) -> Option<ScalarField> {
    match cfg.potential {
        Potential::None => None,
        Potential::Harmonic { omega } => Some(schrodinger::harmonic_potential(grid, &cfg.params, omega)),
    }
}

fn evolution_config(cfg: &RunConfig, grid: &Grid) -> Result<EvolutionConfig, Failure> {
    Ok(EvolutionConfig::new(
        cfg.solver.dt,
        cfg.solver.steps,
        potential_field(cfg, grid),
        cfg.solver.snapshot_stride,
        Mode::RealTime,
    )?)
}

/// Free packet whose closed form overlays the run, if the run is one.
fn analytic_packet(cfg: &RunConfig) -> Option<GaussianPacketSpec> {
    match (cfg.initial, cfg.potential) {
        (InitialState::Gaussian { sigma0, time }, Potential::None) => GaussianPacketSpec::new(sigma0, cfg.params, time).ok(),
        _ => None,
    }
}

fn intensity_range(h: &HydroFields) -> (f64, f64) {
    madelung::turbulence_intensity(h).range().unwrap_or((f64::NAN, f64::NAN))
}

fn snapshot_columns(dim: usize, packet: bool) -> Vec<String> {
    let mut c: Vec<String> = ["step", "time", "norm", "energy"].iter().map(|s| s.to_string()).collect();
    for k in 0..dim {
        c.push(format!("centroid_{k}"));
        c.push(format!("variance_{k}"));
    }
    c.push("intensity_min".into());
    c.push("intensity_max".into());
    if packet {
        c.push("sigma2_exact".into());
        c.push("intensity_exact".into());
    }
    c
}

fn snapshot_row(
    step: usize,
    time: f64,
    energy: f64,
    psi: &WaveFunction,
    h: &HydroFields,
    packet: Option<&GaussianPacketSpec>,
) -> Vec<String> {
    let mut r = vec![step.to_string(), num(time), num(psi.norm_squared()), num(energy)];
    for k in 0..psi.grid().dim() {
        r.push(num(schrodinger::centroid(psi, k)));
        r.push(num(schrodinger::variance(psi, k)));
    }
    let (lo, hi) = intensity_range(h);
    r.push(num(lo));
    r.push(num(hi));
    if let Some(p) = packet {
        let at = p.at_time(p.time + time);
        r.push(num(at.sigma_squared()));
        r.push(num(at.intensity().unwrap_or(f64::NAN)));
    }
    r
}

fn columns(c: &[String]) -> Vec<&str> {
    c.iter().map(String::as_str).collect()
}

fn evolve_schrodinger(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let psi0 = initial_wavefunction(cfg)?;
    let grid = psi0.grid().clone();
    let config = evolution_config(cfg, &grid)?;
    if let Some(msg) = config.aliasing_warning(&grid, &cfg.params) {
        console.warn(msg);
    }
    let snaps = schrodinger::evolve_split_step(&psi0, &config, &cfg.params)?;
    let packet = analytic_packet(cfg);
    let mut rows = Vec::with_capacity(snaps.len());
    for (i, s) in snaps.iter().enumerate() {
        let h = madelung::wavefunction_to_fields(&s.psi, &cfg.params)?;
        rows.push(snapshot_row(s.step, s.time, s.energy, &s.psi, &h, packet.as_ref()));
        if cfg.write_fields {
            let meta = [("time", num(s.time)), ("step", s.step.to_string())];
            w.field(&format!("psi_{i:05}"), s.psi.clone(), &meta)?;
        }
    }
    let cols = snapshot_columns(grid.dim(), packet.is_some());
    w.table("snapshots.csv", "QHDTURB-SNAPSHOTS-01", &columns(&cols), &rows)?;

    let first = &snaps[0];
    let last = snaps.last().expect("initial snapshot is always recorded");
    let norm_drift = snaps.iter().map(|s| (s.norm - first.norm).abs()).fold(0.0, f64::max);
    let energy_drift = snaps.iter().map(|s| (s.energy - first.energy).abs()).fold(0.0, f64::max);
    w.summary("solver", "split-step");
    w.summary("snapshots", snaps.len());
    w.summary("final_time", last.time);
    w.summary("max_norm_drift", norm_drift);
    w.summary("max_energy_drift", energy_drift);
    if let Some(p) = packet {
        let expected = p.at_time(p.time + last.time).sigma_squared();
        let rel = (schrodinger::variance(&last.psi, 0) - expected).abs() / expected;
        w.summary("analytic_case", "free-gaussian");
        w.summary("sigma0", p.sigma0);
        w.summary("final_sigma2_relative_error", rel);
    }
    console.info(format!(
        "evolve-schrodinger: {} snapshots to t = {}, max norm drift {norm_drift:.3e}",
        snaps.len(),
        last.time
    ));
    Ok(true)
}

fn evolve_madelung(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let psi0 = initial_wavefunction(cfg)?;
    let grid = psi0.grid().clone();
    let config = evolution_config(cfg, &grid)?;
    let state0 = MadelungState::from_wavefunction(&psi0, &cfg.params)?;
    let bounds = hydro_solver::step_bounds(&state0);
    if cfg.solver.dt > bounds.recommended() {
        console.warn(format!(
            "dt = {} exceeds the recommended step {:.3e}; expect instability",
            cfg.solver.dt,
            bounds.recommended()
        ));
    }
    let states = hydro_solver::evolve_madelung(&state0, &config, &cfg.params)?;
    let packet = analytic_packet(cfg);
    let mut rows = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let psi = s.to_wavefunction()?;
        let h = madelung::wavefunction_to_fields(&psi, &cfg.params)?;
        let step = (s.time / cfg.solver.dt).round() as usize;
        let energy = schrodinger::energy(&psi, config.potential.as_ref(), &cfg.params)?;
        rows.push(snapshot_row(step, s.time, energy, &psi, &h, packet.as_ref()));
        if cfg.write_fields {
            let meta = [("time", num(s.time)), ("step", step.to_string())];
            w.field(&format!("rho_{i:05}"), s.rho.clone(), &meta)?;
            w.field(&format!("v_{i:05}"), s.velocity(), &meta)?;
        }
    }
    let cols = snapshot_columns(grid.dim(), packet.is_some());
    w.table("snapshots.csv", "QHDTURB-SNAPSHOTS-01", &columns(&cols), &rows)?;
    let last = states.last().expect("initial state is always recorded");
    let mass_drift = states.iter().map(|s| (s.mass() - state0.mass()).abs()).fold(0.0, f64::max);
    w.summary("solver", "madelung-rk4");
    w.summary("snapshots", states.len());
    w.summary("final_time", last.time);
    w.summary("max_mass_drift", mass_drift);
    w.summary("step_bound_advective", bounds.advective);
    w.summary("step_bound_stiffness", bounds.stiffness);
    if packet.is_some() {
        w.summary("analytic_case", "free-gaussian");
    }
    console.info(format!(
        "evolve-madelung: {} snapshots to t = {}, max mass drift {mass_drift:.3e}",
        states.len(),
        last.time
    ));
    Ok(true)
}

fn stress_components(stress: &SymmetricTensorField) -> Result<Vec<(String, ScalarField)>, Failure> {
    let d = stress.dim();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            let f = ScalarField::new(stress.grid().clone(), stress.component(i, j).to_vec())?;
            out.push((format!("stress_{i}{j}"), f));
        }
    }
    Ok(out)
}

fn write_diagnostics(w: &mut RunWriter, h: &HydroFields, d: &DiagnosticsBundle, meta: &[(&str, String)]) -> Result<(), Failure> {
    w.field("rho", h.rho.clone(), meta)?;
    w.field("v", h.v.clone(), meta)?;
    w.field("u", h.u.clone(), meta)?;
    if let Some(s) = &h.phase {
        w.field("phase", s.clone(), meta)?;
    }
    w.field("pressure", d.pressure.clone(), meta)?;
    w.field("internal_energy", d.internal_energy.clone(), meta)?;
    w.field("quantum_potential", d.quantum_potential.clone(), meta)?;
    w.field("correlation", d.correlation.clone(), meta)?;
    w.field("intensity", d.intensity.values.clone(), meta)?;
    for (name, f) in stress_components(&d.stress)? {
        w.field(&name, f, meta)?;
    }
    Ok(())
}

fn diagnose(cfg: &RunConfig, w: &mut RunWriter) -> Outcome {
    let psi = input_wavefunction(cfg)?;
    let h = madelung::wavefunction_to_fields(&psi, &cfg.params)?;
    let d = madelung::diagnostics(&h);
    if cfg.write_fields {
        write_diagnostics(w, &h, &d, &[])?;
    }
    w.summary_map("diagnostics", &madelung::scalar_summary(&h, &d)?);
    w.summary("kinetic_split_residual", madelung::kinetic_energy_split(&psi, &cfg.params)?.relative_residual());
    Ok(true)
}

fn compare(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let psi0 = initial_wavefunction(cfg)?;
    let config = evolution_config(cfg, psi0.grid())?;
    let cv = hydro_solver::cross_validate(&psi0, &config, &cfg.params)?;
    let rows: Vec<Vec<String>> = cv
        .series
        .iter()
        .map(|d| vec![num(d.time), num(d.l2_rho), num(d.linf_rho), num(d.l2_v)])
        .collect();
    w.table("discrepancy.csv", "QHDTURB-DISCREPANCY-01", &["time", "l2_rho", "linf_rho", "l2_v"], &rows)?;
    let max = cv.max_l2_rho();
    let passed = max < cfg.tolerance.compare;
    w.summary("max_l2_rho", max);
    w.summary("max_l2_v", cv.max_l2_v());
    w.summary("tolerance", cfg.tolerance.compare);
    w.summary("step_bound_advective", cv.bounds.advective);
    w.summary("step_bound_stiffness", cv.bounds.stiffness);
    console.info(format!(
        "compare: max L2 density discrepancy {max:.3e} ({} {:e})",
        if passed { "<" } else { ">=" },
        cfg.tolerance.compare
    ));
    Ok(passed)
}

fn average(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let dir = cfg.input.as_deref().ok_or_else(|| Failure::Config("input.path is not set".into()))?;
    let series = averaging::read_series(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    let mass = cfg.params.mass;
    let stress = averaging::reynolds_stress_stat(&series, mass)?;
    let q = averaging::heat_flux_stat(&series, mass)?;
    let c = averaging::pressure_velocity_stat(&series)?;
    if cfg.write_fields {
        w.field("rho_mean", averaging::reynolds_mean(&series, Quantity::Density)?, &[])?;
        w.field("p_mean", averaging::reynolds_mean(&series, Quantity::Pressure)?, &[])?;
        w.field("v_favre", averaging::favre_velocity(&series)?, &[])?;
        w.field("heat_flux", q.clone(), &[])?;
        w.field("correlation", c.clone(), &[])?;
        for (name, f) in stress_components(&stress)? {
            w.field(&name, f, &[])?;
        }
    }
    w.summary("samples", series.len());
    w.summary("windows", series.window_count());
    w.summary("synthetic", series.is_synthetic());
    w.summary("stress_min_principal_minor", stress.min_principal_minor());
    w.summary("heat_flux_max", q.max_magnitude());
    w.summary("correlation_max", c.max_magnitude());
    let mut window_rows = Vec::new();
    let mut window_q_max: f64 = 0.0;
    for i in 0..series.window_count() {
        let win = series.window_series(i)?;
        let wq = averaging::heat_flux_stat(&win, mass)?.max_magnitude();
        window_q_max = window_q_max.max(wq);
        window_rows.push(vec![
            i.to_string(),
            num(win.mean_time()),
            win.len().to_string(),
            num(wq),
            num(averaging::pressure_velocity_stat(&win)?.max_magnitude()),
            num(averaging::reynolds_stress_stat(&win, mass)?.min_principal_minor()),
        ]);
    }
    w.table(
        "windows.csv",
        "QHDTURB-WINDOWS-01",
        &["window", "time", "samples", "heat_flux_max", "correlation_max", "stress_min_principal_minor"],
        &window_rows,
    )?;
    w.summary("window_heat_flux_max", window_q_max);
    if series.window_count() >= 3 {
        let eb = averaging::energy_balance_residual(&series, mass)?;
        let rows: Vec<Vec<String>> = eb.times.iter().zip(&eb.l2_norms).map(|(t, l)| vec![num(*t), num(*l)]).collect();
        w.table("energy_balance.csv", "QHDTURB-ENERGY-BALANCE-01", &["time", "residual_l2"], &rows)?;
        if cfg.write_fields {
            for (i, r) in eb.residuals.iter().enumerate() {
                w.field(&format!("energy_residual_{i:05}"), r.clone(), &[("time", num(eb.times[i]))])?;
            }
        }
        w.summary("energy_balance_max_l2", eb.max_l2());
    } else {
        console.warn("fewer than 3 windows; energy balance skipped");
    }
    console.info(format!(
        "average: {} samples in {} windows",
        series.len(),
        series.window_count()
    ));
    Ok(true)
}

fn moments(ens: &TracerEnsemble, k: usize) -> (f64, f64) {
    let xs = ens.coordinates(k);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn tracer(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let t = &cfg.tracer;
    let mut psi = initial_wavefunction(cfg)?;
    let grid = psi.grid().clone();
    let dim = grid.dim();
    let mut h = madelung::wavefunction_to_fields(&psi, &cfg.params)?;
    let rho0 = h.rho.clone();
    let mut ens = match t.start {
        TracerStart::Density => TracerEnsemble::from_density(&h.rho, t.particles, cfg.seed)?,
        TracerStart::Point(x0) => TracerEnsemble::at_point(&grid, &vec![x0; dim], t.particles, cfg.seed)?,
    };
    let stepper = if t.evolving {
        Some(EvolutionConfig::new(t.dt, 1, potential_field(cfg, &grid), 1, Mode::RealTime)?)
    } else {
        None
    };
    let record = (t.steps / 100).max(1);
    let mut rows = Vec::new();
    let mut drift = DriftField::new(&h, t.drift);
    for step in 0..=t.steps {
        if step % record == 0 || step == t.steps {
            let mut r = vec![step.to_string(), num(ens.time())];
            for k in 0..dim {
                let (m, v) = moments(&ens, k);
                r.push(num(m));
                r.push(num(v));
                r.push(num(schrodinger::variance(&psi, k)));
            }
            rows.push(r);
        }
        if step == t.steps {
            break;
        }
        ens.step(&drift, t.dt)?;
        if let Some(c) = &stepper {
            let snaps = schrodinger::evolve_split_step(&psi, c, &cfg.params)?;
            psi = snaps.into_iter().last().expect("final snapshot").psi;
            h = madelung::wavefunction_to_fields(&psi, &cfg.params)?;
            drift = DriftField::new(&h, t.drift);
        }
    }
    let mut cols = vec!["step".to_string(), "time".to_string()];
    for k in 0..dim {
        cols.push(format!("mean_{k}"));
        cols.push(format!("variance_{k}"));
        cols.push(format!("rho_variance_{k}"));
    }
    w.table("tracer_moments.csv", "QHDTURB-TRACER-MOMENTS-01", &columns(&cols), &rows)?;

    let mut snapshot = String::new();
    for (i, line) in ens.to_csv().lines().enumerate() {
        snapshot.push_str(line);
        snapshot.push('\n');
        if i == 0 {
            snapshot.push_str(&format!("# command = {}\n", cfg.command));
            for (k, v) in cfg.echo() {
                snapshot.push_str(&format!("# config.{k} = {v}\n"));
            }
        }
    }
    w.text("tracer.csv", "QHDTURB-TRACER-01", &snapshot)?;
    let hist = ens.histogram(&grid)?;
    let meta = [("time", num(ens.time()))];
    w.field("histogram", hist.clone(), &meta)?;
    w.field("rho", h.rho.clone(), &meta)?;
    if t.evolving {
        w.field("rho_initial", rho0, &[])?;
    }

    let l1: f64 = {
        let diff: Vec<f64> = hist.values().iter().zip(h.rho.values()).map(|(a, b)| (a - b).abs()).collect();
        qhdturb::calculus::integrate_values(&grid, &diff)
    };
    let ks: Vec<f64> = (0..dim).map(|k| ks_against_density(&ens, &h.rho, k)).collect::<Result<_, _>>()?;
    w.summary("particles", ens.len());
    w.summary("time", ens.time());
    w.summary("steps", ens.steps());
    w.summary("reflections", ens.reflections());
    w.summary("masked_steps", ens.masked_steps());
    w.summary("drift", format!("{:?}", t.drift).to_lowercase());
    w.summary("fields", if t.evolving { "evolving" } else { "static" });
    w.summary("ks_statistic", json!(ks));
    w.summary("histogram_l1", l1);
    console.info(format!(
        "tracer: {} particles to t = {}, KS = {:?}, {} reflections, {} masked steps",
        ens.len(),
        ens.time(),
        ks,
        ens.reflections(),
        ens.masked_steps()
    ));
    Ok(true)
}

fn write_checks(w: &mut RunWriter, checks: &[Check]) -> Result<(), Failure> {
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![csv_text(&c.name), num(c.measured), csv_text(&c.requirement), c.passed.to_string()])
        .collect();
    w.table("checks.csv", "QHDTURB-CHECKS-01", &["check", "measured", "requirement", "passed"], &rows)?;
    let m: serde_json::Map<String, serde_json::Value> = checks
        .iter()
        .map(|c| (c.name.clone(), json!({"measured": c.measured, "requirement": c.requirement, "passed": c.passed})))
        .collect();
    w.summary("checks", serde_json::Value::Object(m));
    Ok(())
}

/// Quotes a CSV cell when it holds a separator or quote.
fn csv_text(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn report_checks(console: Console, title: &str, checks: &[Check]) -> bool {
    let passed = checks.iter().all(|c| c.passed);
    console.info(format!("{} {title}", if passed { "PASS" } else { "FAIL" }));
    for c in checks {
        console.info(format!("    {c}"));
    }
    passed
}

fn analytic_gaussian(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let (sigma0, time) = match cfg.initial {
        InitialState::Gaussian { sigma0, time } => (sigma0, time),
        _ => return Err(Failure::Config("analytic gaussian needs initial.state = gaussian".into())),
    };
    let setup = GaussianPacketSpec::new(sigma0, cfg.params, time)?;
    let grid = cfg.grid.build()?;
    let (exact, diag) = analytic::gaussian_fields(&setup, &grid)?;
    let psi = setup.wavefunction(&grid)?;
    let h = madelung::wavefunction_to_fields(&psi, &cfg.params)?;
    let region = identity_region(&h.rho, IDENTITY_REGION_FLOOR);
    let tol = cfg.tolerance.identity;
    let mut checks = validation::identity_residuals(&psi, &h, &region)?.checks("sampled packet", tol);
    let p = gaussian_pressure_identity_check(&setup, &grid)?;
    checks.push(Check::below("p/2rho vs Q - <Q>", p.potential_form, tol));
    checks.push(Check::below("p/2rho vs <eps> - eps", p.energy_form, tol));
    checks.push(Check::below("C vs -2 <eps> rho v", p.correlation, tol));
    if cfg.write_fields {
        write_diagnostics(w, &exact, &diag, &[("time", num(time))])?;
        w.field("psi", psi, &[("time", num(time))])?;
    }
    write_checks(w, &checks)?;
    w.summary("analytic_case", "free-gaussian");
    w.summary("sigma0", sigma0);
    w.summary("time", time);
    w.summary("sigma2", setup.sigma_squared());
    w.summary("intensity", setup.intensity().map_or(serde_json::Value::Null, |x| json!(x)));
    w.summary("mean_internal_energy", setup.mean_internal_energy(grid.dim()));
    Ok(report_checks(console, "analytic gaussian", &checks))
}

fn analytic_hydrogen(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let setup = Hydrogen1sSpec::new(cfg.bohr_radius, cfg.params)?;
    let grid = cfg.grid.build()?;
    let (psi, exact, diag) = analytic::hydrogen_1s_fields(&setup, &grid)?;
    let psi = psi.normalized()?;
    let h = madelung::wavefunction_to_fields(&psi, &cfg.params)?;
    let region = validation::hydrogen_region(&h, cfg.core_radius);
    let mut checks = validation::identity_residuals(&psi, &h, &region)?.checks("sampled 1s", cfg.tolerance.identity);
    checks.extend(validation::hydrogen_checks(&h, cfg.bohr_radius, &region, cfg.tolerance.hydrogen)?);
    if cfg.write_fields {
        write_diagnostics(w, &exact, &diag, &[])?;
        w.field("psi", psi, &[])?;
    }
    write_checks(w, &checks)?;
    w.summary("analytic_case", "hydrogen-1s");
    w.summary("bohr_radius", cfg.bohr_radius);
    w.summary("core_radius", cfg.core_radius);
    w.summary("turbulent_speed", setup.turbulent_speed());
    w.summary("internal_energy", setup.rydberg());
    Ok(report_checks(console, "analytic hydrogen", &checks))
}

/// Key-value scale report.
pub fn scale_document(r: &analytic::ScaleReport) -> KvDocument {
    let mut d = KvDocument::new();
    d.set("format", "QHDTURB-SCALES-01");
    d.set("scales.mass", format!("{:e}", r.mass));
    d.set("scales.hbar", format!("{:e}", r.hbar));
    d.set("scales.light_speed", format!("{:e}", r.light_speed));
    d.set("scales.tau_c", format!("{:e}", r.tau_c));
    d.set("scales.eddy_length", format!("{:e}", r.eddy_length));
    d.set("scales.eddy_length_4sig", format!("{:.4e}", r.eddy_length));
    d.set("scales.particle_size", format!("{:e}", r.particle_size));
    d.set("scales.quantum_flag", r.quantum_flag);
    d.set("scales.alpha_ratio", format!("{:.6}", r.alpha_ratio));
    d.set("scales.alpha_ratio_full", format!("{:e}", r.alpha_ratio));
    d.set("scales.alpha", format!("{:e}", r.alpha));
    d.set("scales.classical_electron_radius", format!("{:e}", r.classical_electron_radius));
    d.set("scales.radius_ratio", format!("{:e}", r.radius_ratio));
    d.set("numerology.feigenbaum_delta", format!("{}", r.feigenbaum_delta));
    d.set("numerology.two_pi_alpha_delta2", format!("{:.6}", r.numerology));
    d.set("numerology.target", "1.0000");
    d
}

fn scales(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let s = &cfg.scales;
    let r = analytic::scales_with(s.mass, s.particle_size, s.light_speed, s.hbar, s.bohr_radius)?;
    let doc = scale_document(&r);
    w.text("scales", "QHDTURB-SCALES-01", &doc.to_string())?;
    w.summary("tau_c", r.tau_c);
    w.summary("eddy_length", r.eddy_length);
    w.summary("particle_size", r.particle_size);
    w.summary("quantum_flag", r.quantum_flag);
    w.summary("alpha_ratio", r.alpha_ratio);
    w.summary("alpha", r.alpha);
    w.summary("feigenbaum_delta", r.feigenbaum_delta);
    w.summary("numerology", r.numerology);
    w.summary("classical_electron_radius", r.classical_electron_radius);
    w.summary("radius_ratio", r.radius_ratio);
    console.info(doc.to_string().trim_end());
    Ok(true)
}

fn validate(cfg: &RunConfig, w: &mut RunWriter, console: Console) -> Outcome {
    let reports = validation::run_all(cfg.seed);
    let mut rows = Vec::new();
    let mut by_id = BTreeMap::new();
    for r in &reports {
        console.info(r.to_string().trim_end());
        for c in &r.checks {
            rows.push(vec![
                r.id.to_string(),
                csv_text(&r.title),
                csv_text(&c.name),
                num(c.measured),
                csv_text(&c.requirement),
                c.passed.to_string(),
            ]);
        }
        by_id.insert(r.id.to_string(), criterion_json(r));
    }
    w.table(
        "validation.csv",
        "QHDTURB-VALIDATION-01",
        &["criterion", "title", "check", "measured", "requirement", "passed"],
        &rows,
    )?;
    let passed = reports.iter().filter(|r| r.passed()).count();
    w.summary("criteria", json!(by_id));
    w.summary("passed", passed);
    w.summary("total", reports.len());
    if console.quiet {
        for r in &reports {
            println!("{}", r.summary_line());
        }
    }
    println!("validate: {passed}/{} criteria passed", reports.len());
    Ok(passed == reports.len())
}

fn criterion_json(r: &CriterionReport) -> serde_json::Value {
    let checks: Vec<serde_json::Value> = r
        .checks
        .iter()
        .map(|c| json!({"name": c.name, "measured": c.measured, "requirement": c.requirement, "passed": c.passed}))
        .collect();
    json!({"title": r.title, "passed": r.passed(), "error": r.error, "checks": checks})
}
