use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qhdturb::averaging::{
    favre_mean, favre_velocity, reynolds_mean, reynolds_mean_with, reynolds_stress_stat, AveragingWindow, FlowSample,
    FlowSeries, Quantity,
};
use qhdturb::calculus::{derivative, integrate, integrate_values};
use qhdturb::exchange::{decode_binary, decode_csv, encode_binary, encode_csv, FieldData};
use qhdturb::field::{ScalarField, VectorField, WaveFunction};
use qhdturb::grid::{Axis, Grid};
use qhdturb::kvdoc::KvDocument;
use qhdturb::madelung::{self, fick_residual, wavefunction_to_fields};
use qhdturb::params::PhysicalParams;
use qhdturb::tracer::{DriftConvention, DriftField, TracerEnsemble};

/// Smooth periodic function on `[0, length)` from a few Fourier modes.
fn trig(coeffs: &[(f64, f64)], length: f64) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = 2.0 * PI * (k + 1) as f64 / length;
                a * (w * x).cos() + b * (w * x).sin()
            })
            .sum()
    }
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..4)
}

/// Positive periodic density `exp(trig)` normalized on a 1-D grid.
fn density_wavefunction(c: &[(f64, f64)], phase: &[(f64, f64)], length: f64) -> WaveFunction {
    resolved_wavefunction(c, phase, length, 64)
}

fn resolved_wavefunction(c: &[(f64, f64)], phase: &[(f64, f64)], length: f64, points: usize) -> WaveFunction {
    let g = Grid::periodic_cube(1, points, length).unwrap();
    let f = trig(c, length);
    let s = trig(phase, length);
    WaveFunction::from_fn(&g, |x| Complex64::from_polar((0.5 * f(x[0])).exp(), s(x[0])))
        .unwrap()
        .normalized()
        .unwrap()
}

fn random_grid() -> impl Strategy<Value = Grid> {
    (1usize..=3, 8usize..=11, 0.1..3.0f64, -5.0..5.0f64, any::<bool>()).prop_map(|(dim, n, h, o, periodic)| {
        let axes = (0..dim)
            .map(|k| Axis {
                points: n + k,
                spacing: h * (1.0 + 0.25 * k as f64),
                origin: o,
                periodic,
            })
            .collect();
        Grid::new(axes).unwrap()
    })
}

fn series_from(
    grid: &Grid,
    values: &[(Vec<f64>, Vec<f64>, Vec<f64>, f64)],
    constant_rho: Option<&[f64]>,
) -> FlowSeries {
    let n = grid.len();
    let dim = grid.dim();
    let samples = values
        .iter()
        .enumerate()
        .map(|(t, (rho, v, p, w))| FlowSample {
            rho: ScalarField::new(grid.clone(), constant_rho.unwrap_or(rho).to_vec()).unwrap(),
            v: VectorField::new(grid.clone(), (0..dim).map(|k| v[k * n..(k + 1) * n].to_vec()).collect()).unwrap(),
            p: ScalarField::new(grid.clone(), p.clone()).unwrap(),
            weight: *w,
            time: t as f64,
        })
        .collect();
    FlowSeries::new(
        samples,
        AveragingWindow {
            samples_per_window: values.len(),
            duration: None,
        },
        true,
    )
    .unwrap()
}

/// Random series on a 2-D 8x8 grid: (rho, v flattened, p, weight) per sample.
fn raw_series() -> impl Strategy<Value = Vec<(Vec<f64>, Vec<f64>, Vec<f64>, f64)>> {
    prop::collection::vec(
        (
            prop::collection::vec(0.1..3.0f64, 64),
            prop::collection::vec(-2.0..2.0f64, 128),
            prop::collection::vec(-1.0..1.0f64, 64),
            0.1..1.0f64,
        ),
        1..6,
    )
}

fn small_grid() -> Grid {
    Grid::periodic_cube(2, 8, 1.0).unwrap()
}

fn kv_key() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z][a-z0-9_-]{0,5}", 1..4).prop_map(|parts| parts.join("."))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectral_integration_by_parts(f in coeffs(), g in coeffs(), length in 1.0..20.0f64) {
        let grid = Grid::periodic_cube(1, 32, length).unwrap();
        let (ff, gf) = (trig(&f, length), trig(&g, length));
        let fv: Vec<f64> = grid.coordinate_field(0).iter().map(|&x| ff(x)).collect();
        let gv: Vec<f64> = grid.coordinate_field(0).iter().map(|&x| gf(x)).collect();
        let df = derivative(&fv, &grid, 0, 1);
        let dg = derivative(&gv, &grid, 0, 1);
        let lhs: Vec<f64> = fv.iter().zip(&dg).map(|(a, b)| a * b).collect();
        let rhs: Vec<f64> = gv.iter().zip(&df).map(|(a, b)| a * b).collect();
        let scale = 1.0 + integrate_values(&grid, &lhs.iter().map(|x| x.abs()).collect::<Vec<_>>());
        prop_assert!((integrate_values(&grid, &lhs) + integrate_values(&grid, &rhs)).abs() < 1e-10 * scale);
    }

    #[test]
    fn exchange_round_trips_exactly(grid in random_grid(), seed in any::<u64>(), kind in 0usize..3) {
        let n = grid.len();
        let val = |i: usize, c: u64| ((i as u64 ^ seed).wrapping_mul(0x9E37_79B9_7F4A_7C15 ^ c) as f64) / 7.3e15 - 1.2e3;
        let field: FieldData = match kind {
            0 => ScalarField::new(grid.clone(), (0..n).map(|i| val(i, 0)).collect()).unwrap().into(),
            1 => VectorField::new(
                grid.clone(),
                (0..grid.dim()).map(|k| (0..n).map(|i| val(i, k as u64 + 1)).collect()).collect(),
            )
            .unwrap()
            .into(),
            _ => WaveFunction::new(grid.clone(), (0..n).map(|i| Complex64::new(val(i, 7), val(i, 9))).collect())
                .unwrap()
                .into(),
        };
        let meta = vec![("note".to_string(), "round trip".to_string())];
        let csv = decode_csv(&encode_csv(&field, &meta)).unwrap();
        prop_assert_eq!(&csv.field, &field);
        prop_assert_eq!(csv.meta, meta);
        prop_assert_eq!(decode_binary(&encode_binary(&field)).unwrap(), field);
    }

    #[test]
    fn fick_flux_holds_for_any_smooth_density(c in coeffs(), s in coeffs(), length in 4.0..20.0f64) {
        // Enough points that both psi and rho are resolved to round-off.
        let psi = resolved_wavefunction(&c, &s, length, 256);
        let h = wavefunction_to_fields(&psi, &PhysicalParams::default()).unwrap();
        // u comes from the complex velocity, so its error scales with |v| too.
        let fick = madelung::turbulent_velocity(&h.rho, &h.params).unwrap().0.max_magnitude();
        let scale = (fick + h.v.max_magnitude()) * h.rho.max();
        let r = fick_residual(&h).max_magnitude();
        prop_assert!(r <= 1e-11 * scale.max(1e-3), "residual {} scale {}", r, scale);
    }

    #[test]
    fn pressure_integrates_to_zero(c in coeffs(), length in 4.0..20.0f64) {
        let psi = density_wavefunction(&c, &[], length);
        let rho = psi.density();
        let p = madelung::pressure(&rho, &PhysicalParams::default());
        let abs: Vec<f64> = p.values().iter().map(|x| x.abs()).collect();
        prop_assert!(integrate(&p).abs() <= 1e-10 * (integrate_values(rho.grid(), &abs) + 1e-300));
    }

    #[test]
    fn stress_is_psd(raw in raw_series(), mass in 0.1..10.0f64) {
        let s = series_from(&small_grid(), &raw, None);
        let tau = reynolds_stress_stat(&s, mass).unwrap();
        let scale = tau.max_abs().max(1.0);
        prop_assert!(tau.min_principal_minor() >= -1e-12 * scale * scale);
    }

    #[test]
    fn favre_equals_reynolds_for_constant_density(raw in raw_series(), rho0 in 0.1..3.0f64) {
        let g = small_grid();
        let rho = vec![rho0; g.len()];
        let s = series_from(&g, &raw, Some(&rho));
        for q in [Quantity::Velocity(0), Quantity::Velocity(1), Quantity::Pressure, Quantity::VelocityProduct(0, 1)] {
            let a = favre_mean(&s, q).unwrap();
            let b = reynolds_mean(&s, q).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-14 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn momentum_flux_decomposition(raw in raw_series(), mass in 0.1..10.0f64) {
        let s = series_from(&small_grid(), &raw, None);
        let rho = reynolds_mean(&s, Quantity::Density).unwrap();
        let vt = favre_velocity(&s).unwrap();
        let tau = reynolds_stress_stat(&s, mass).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let flux = reynolds_mean_with(&s, |f, p| f.rho.values()[p] * f.v.component(i)[p] * f.v.component(j)[p]);
                for p in 0..s.grid().len() {
                    let rebuilt = rho.values()[p] * vt.component(i)[p] * vt.component(j)[p] + tau.component(i, j)[p] / mass;
                    prop_assert!((flux.values()[p] - rebuilt).abs() <= 1e-12 * (1.0 + flux.values()[p].abs()));
                }
            }
        }
    }

    #[test]
    fn kv_documents_round_trip(entries in prop::collection::btree_map(kv_key(), "[ -~&&[^=]]{0,12}", 0..12)) {
        let mut doc = KvDocument::new();
        // A key that is also a section prefix of another key would print
        // ambiguously only if both are sections; plain keys are fine.
        for (k, v) in &entries {
            doc.set(k, v);
        }
        let parsed = KvDocument::parse(&doc.to_string()).unwrap();
        let a: BTreeMap<_, _> = doc.entries().iter().cloned().collect();
        let b: BTreeMap<_, _> = parsed.entries().iter().cloned().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn histogram_integrates_to_one(grid in random_grid(), count in 1usize..400, seed in any::<u64>()) {
        let rho = ScalarField::constant(&grid, 1.0);
        let ens = TracerEnsemble::from_density(&rho, count, seed).unwrap();
        let h = ens.histogram(&grid).unwrap();
        prop_assert!((integrate(&h) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tracer_is_seed_deterministic(c in coeffs(), seed in any::<u64>()) {
        let psi = density_wavefunction(&c, &[], 12.0);
        let h = wavefunction_to_fields(&psi, &PhysicalParams::default()).unwrap();
        let drift = DriftField::new(&h, DriftConvention::Forward);
        let run = || {
            let mut e = TracerEnsemble::from_density(&h.rho, 64, seed).unwrap();
            e.run(&drift, 0.01, 20).unwrap();
            e.positions().to_vec()
        };
        let a = run();
        prop_assert!(a.iter().all(|x| x.is_finite()));
        prop_assert_eq!(a, run());
    }
}
