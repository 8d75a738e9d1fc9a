use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qhdturb::averaging::write_series;
use qhdturb::validation::symmetric_series;

fn qhdturb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhdturb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, name: &str, args: &[&str]) -> (i32, PathBuf) {
    let out = dir.join(name);
    let mut full = vec!["--out", out.to_str().unwrap(), "--quiet"];
    full.extend_from_slice(args);
    let o = qhdturb(&full);
    (o.status.code().unwrap(), out)
}

/// Data rows of a versioned CSV table.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn scales_report_alpha_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_in(tmp.path(), "s", &["scales"]);
    assert_eq!(code, 0);
    let report = fs::read_to_string(out.join("scales")).unwrap();
    assert!(report.contains("alpha_ratio = 0.007297"), "{report}");
    assert!(report.contains("eddy_length_4sig = 3.8616e-13"));
    assert!(report.contains("two_pi_alpha_delta2 = 0.999610"));
    let s = summary(&out);
    assert_eq!(s["format"], "QHDTURB-SUMMARY-01");
    assert_eq!(s["values"]["quantum_flag"], true);
}

#[test]
fn compare_default_is_below_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_in(tmp.path(), "c", &["compare"]);
    assert_eq!(code, 0);
    let r = rows(&out.join("discrepancy.csv"));
    assert_eq!(r.len(), 11);
    let max = r.iter().map(|row| row[1].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(max < 1e-4, "{max}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 2] = [
        ("evolve", &["evolve-schrodinger", "--set", "solver.steps=40"]),
        ("tracer", &["tracer", "--tracer.particles", "500", "--tracer.steps", "50", "--seed", "7"]),
    ];
    for (name, args) in cases {
        let (a_code, a) = run_in(tmp.path(), &format!("{name}_a"), args);
        let (b_code, b) = run_in(tmp.path(), &format!("{name}_b"), args);
        assert_eq!((a_code, b_code), (0, 0));
        let mut files: Vec<PathBuf> = walk(&a);
        files.sort();
        assert!(files.len() > 2);
        for f in files {
            let rel = f.strip_prefix(&a).unwrap();
            assert_eq!(fs::read(&f).unwrap(), fs::read(b.join(rel)).unwrap(), "{}", rel.display());
        }
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn seeds_change_tracer_output() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["tracer", "--tracer.particles", "200", "--tracer.steps", "10"];
    let (_, a) = run_in(tmp.path(), "a", &[&base[..], &["--seed", "1"]].concat());
    let (_, b) = run_in(tmp.path(), "b", &[&base[..], &["--seed", "2"]].concat());
    assert_ne!(fs::read(a.join("tracer.csv")).unwrap(), fs::read(b.join("tracer.csv")).unwrap());
}

#[test]
fn every_output_embeds_format_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_in(tmp.path(), "g", &["analytic", "gaussian", "--grid.points", "128"]);
    assert_eq!(code, 0);
    for f in walk(&out) {
        let text = fs::read_to_string(&f).unwrap();
        let name = f.file_name().unwrap().to_str().unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.contains("QHDTURB-") || name == "summary.json", "{name}: {first}");
        let echo = if name == "manifest" { "[config.grid]" } else { "grid.points" };
        assert!(text.contains(echo) && text.contains("128"), "{name} lacks config echo");
    }
    let manifest = fs::read_to_string(out.join("manifest")).unwrap();
    assert!(manifest.starts_with("format = QHDTURB-MANIFEST-01"));
    assert!(manifest.contains("name = fields/rho.csv"));
}

#[test]
fn config_file_and_dotted_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# free packet\n[grid]\npoints = 64\nlength = 20\n[solver]\nsteps = 10\nsnapshot_stride = 5\n").unwrap();
    let (code, out) = run_in(
        tmp.path(),
        "e",
        &["evolve-schrodinger", "--config", cfg.to_str().unwrap(), "--solver.dt", "0.02"],
    );
    assert_eq!(code, 0);
    let s = summary(&out);
    assert_eq!(s["config"]["grid.points"], "64");
    assert_eq!(s["config"]["solver.dt"], "0.02");
    assert_eq!(s["values"]["snapshots"], 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_in(tmp.path(), "a", &["scales", "--set", "grid.pointz=3"]).0, 2);
    assert_eq!(run_in(tmp.path(), "b", &["scales", "--scales.mass", "-1"]).0, 2);
    assert_eq!(run_in(tmp.path(), "c", &["diagnose"]).0, 2);
    assert_eq!(run_in(tmp.path(), "d", &["diagnose", "/nonexistent/psi.csv"]).0, 2);
    assert_eq!(run_in(tmp.path(), "e", &["--config", "/nonexistent.cfg", "scales"]).0, 2);
    // A step far beyond the stiffness bound blows up the hydrodynamic solver.
    let (code, _) = run_in(
        tmp.path(),
        "f",
        &["evolve-madelung", "--grid.points", "64", "--grid.length", "8", "--solver.dt", "0.5"],
    );
    assert_eq!(code, 3);
    // Identity tolerance far below round-off.
    let (code, out) = run_in(tmp.path(), "g", &["analytic", "gaussian", "--tolerance.identity", "1e-30"]);
    assert_eq!(code, 1);
    assert_eq!(summary(&out)["status"], "fail");
    let o = qhdturb(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn diagnose_reads_both_encodings() {
    let tmp = tempfile::tempdir().unwrap();
    for fmt in ["csv", "bin"] {
        let (code, ev) = run_in(
            tmp.path(),
            &format!("ev_{fmt}"),
            &["evolve-schrodinger", "--solver.steps", "20", "--output.format", fmt],
        );
        assert_eq!(code, 0);
        let psi = ev.join(format!("fields/psi_00001.{fmt}"));
        let (code, dg) = run_in(tmp.path(), &format!("dg_{fmt}"), &["diagnose", psi.to_str().unwrap()]);
        assert_eq!(code, 0);
        let d = &summary(&dg)["values"]["diagnostics"];
        assert!((d["norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((d["heisenberg_moment"].as_f64().unwrap() - 0.5).abs() < 1e-6);
        assert!(dg.join("fields/pressure.csv").exists());
    }
}

#[test]
fn average_symmetric_series() {
    let tmp = tempfile::tempdir().unwrap();
    let series_dir = tmp.path().join("series");
    write_series(&series_dir, &symmetric_series(5).unwrap()).unwrap();
    let (code, out) = run_in(tmp.path(), "avg", &["average", series_dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    let s = summary(&out);
    // Mirrored within each window; the pooled series is not.
    assert_eq!(s["values"]["window_heat_flux_max"], 0.0);
    assert!(s["values"]["heat_flux_max"].as_f64().unwrap() > 0.0);
    assert_eq!(rows(&out.join("windows.csv")).len(), 3);
    assert_eq!(s["values"]["windows"], 3);
    assert!(s["values"]["stress_min_principal_minor"].as_f64().unwrap() >= -1e-12);
    assert_eq!(rows(&out.join("energy_balance.csv")).len(), 1);
    assert!(out.join("fields/stress_01.csv").exists());
}

#[test]
fn tracer_tracks_spreading_packet() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_in(
        tmp.path(),
        "t",
        &[
            "tracer",
            "--initial.state",
            "gaussian",
            "--grid.length",
            "40",
            "--tracer.fields",
            "evolving",
            "--tracer.particles",
            "20000",
            "--tracer.steps",
            "200",
            "--tracer.dt",
            "0.01",
        ],
    );
    assert_eq!(code, 0);
    let last = rows(&out.join("tracer_moments.csv")).pop().unwrap();
    let var: f64 = last[3].parse().unwrap();
    let exact: f64 = last[4].parse().unwrap();
    // sigma^2(2) = 1 + (2/2)^2
    assert!((exact - 2.0).abs() < 1e-6);
    let sigma = exact * (2.0 / 19_999.0f64).sqrt();
    assert!((var - exact).abs() < 4.0 * sigma, "{var} vs {exact}");
}
