//! Method-of-lines integration of the quantum Hamilton–Jacobi system
//!
//! ```text
//! d rho / dt = -div(rho grad S / m)
//! d S / dt   = -|grad S|^2 / 2m - U - Q(rho)
//! ```
//!
//! on fully periodic grids with classical RK4 in time. The action is
//! carried as a periodic part plus a uniform background flow
//! `S = S_p + m v0 . (x - origin)`, so plane waves and boosted packets are
//! representable.

use crate::calculus::{derivative, integrate_values};
use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField, VectorField, WaveFunction};
use crate::grid::Grid;
use crate::madelung::{self, quantum_potential_floored};
use crate::params::PhysicalParams;
use crate::schrodinger::{evolve_split_step, EvolutionConfig};
use crate::spectral;

/// Relative density floor for the quantum potential and node detection.
pub const DEFAULT_NODE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MadelungState {
    pub rho: ScalarField,
    /// Periodic part of the action.
    pub phase: ScalarField,
    /// Uniform background velocity.
    pub background_velocity: [f64; 3],
    pub params: PhysicalParams,
    pub time: f64,
}

impl MadelungState {
    pub fn new(rho: ScalarField, phase: ScalarField, params: PhysicalParams, time: f64) -> Result<Self> {
        same_grid(rho.grid(), phase.grid())?;
        params.validate()?;
        if !rho.grid().is_periodic() {
            return Err(Error::Unsupported("the hydrodynamic solver needs a fully periodic grid".into()));
        }
        if rho.min() <= 0.0 {
            return Err(Error::InvalidField("initial density must be strictly positive".into()));
        }
        Ok(MadelungState {
            rho,
            phase,
            background_velocity: [0.0; 3],
            params,
            time,
        })
    }

    pub fn with_background_velocity(mut self, v0: [f64; 3]) -> Self {
        self.background_velocity = v0;
        self
    }

    /// Density and action of `psi`, the action reconstructed from the
    /// complex-velocity route.
    pub fn from_wavefunction(psi: &WaveFunction, params: &PhysicalParams) -> Result<Self> {
        let h = madelung::wavefunction_to_fields(psi, params)?;
        if !h.support.is_full() {
            return Err(Error::InvalidField(
                "initial density has points below the support floor".into(),
            ));
        }
        let (sp, v0) = madelung::periodic_potential_parts(&h.v, params.mass);
        let phase = ScalarField::new(psi.grid().clone(), sp)?;
        Ok(MadelungState::new(h.rho, phase, *params, 0.0)?.with_background_velocity(v0))
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// Full action including the background ramp.
    pub fn full_phase(&self) -> ScalarField {
        let g = self.grid();
        let mut s = self.phase.values().to_vec();
        for k in 0..g.dim() {
            let origin = g.axis(k).origin;
            for (o, x) in s.iter_mut().zip(g.coordinate_field(k)) {
                *o += self.params.mass * self.background_velocity[k] * (x - origin);
            }
        }
        ScalarField::from_parts(g.clone(), s)
    }

    /// `v = grad S / m`.
    pub fn velocity(&self) -> VectorField {
        let g = self.grid();
        let comps = (0..g.dim())
            .map(|k| {
                derivative(self.phase.values(), g, k, 1)
                    .into_iter()
                    .map(|d| d / self.params.mass + self.background_velocity[k])
                    .collect()
            })
            .collect();
        VectorField::from_parts(g.clone(), comps)
    }

    pub fn mass(&self) -> f64 {
        integrate_values(self.grid(), self.rho.values())
    }

    pub fn to_wavefunction(&self) -> Result<WaveFunction> {
        madelung::fields_to_wavefunction(&self.rho, &self.full_phase(), &self.params)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MadelungOptions {
    /// Zero the top third of modes after every step.
    pub low_pass: bool,
    pub node_floor: f64,
    /// Drop the quantum potential (classical limit).
    pub classical: bool,
}

impl Default for MadelungOptions {
    fn default() -> Self {
        MadelungOptions {
            low_pass: false,
            node_floor: DEFAULT_NODE_FLOOR,
            classical: false,
        }
    }
}

struct Rhs<'a> {
    grid: &'a Grid,
    params: PhysicalParams,
    v0: [f64; 3],
    potential: Vec<f64>,
    opts: MadelungOptions,
}

impl Rhs<'_> {
    fn eval(&self, rho: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let n = g.len();
        let m = self.params.mass;
        let mut drho = vec![0.0; n];
        let mut ds = vec![0.0; n];
        for k in 0..g.dim() {
            let v: Vec<f64> = derivative(s, g, k, 1).iter().map(|d| d / m + self.v0[k]).collect();
            let flux: Vec<f64> = v.iter().zip(rho).map(|(a, b)| a * b).collect();
            for (dr, f) in drho.iter_mut().zip(derivative(&flux, g, k, 1)) {
                *dr -= f;
            }
            for (d, vk) in ds.iter_mut().zip(&v) {
                *d -= 0.5 * m * vk * vk;
            }
        }
        for (d, u) in ds.iter_mut().zip(&self.potential) {
            *d -= u;
        }
        if !self.opts.classical {
            let rmax = rho.iter().copied().fold(0.0, f64::max);
            let q = quantum_potential_floored(rho, g, &self.params, self.opts.node_floor * rmax);
            for (d, qv) in ds.iter_mut().zip(q) {
                *d -= qv;
            }
        }
        (drho, ds)
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

/// RK4 integration; snapshots at step 0, every `snapshot_stride` steps and
/// at the final step.
pub fn evolve_madelung(state0: &MadelungState, config: &EvolutionConfig, params: &PhysicalParams) -> Result<Vec<MadelungState>> {
    evolve_madelung_with(state0, config, params, &MadelungOptions::default())
}

/// Same stepper with the quantum potential dropped.
pub fn classical_limit_evolve(state0: &MadelungState, config: &EvolutionConfig, params: &PhysicalParams) -> Result<Vec<MadelungState>> {
    let opts = MadelungOptions {
        classical: true,
        ..MadelungOptions::default()
    };
    evolve_madelung_with(state0, config, params, &opts)
}

pub fn evolve_madelung_with(
    state0: &MadelungState,
    config: &EvolutionConfig,
    params: &PhysicalParams,
    opts: &MadelungOptions,
) -> Result<Vec<MadelungState>> {
    config.validate()?;
    params.validate()?;
    let g = state0.grid();
    if !g.is_periodic() {
        return Err(Error::Unsupported("the hydrodynamic solver needs a fully periodic grid".into()));
    }
    if config.mode != crate::schrodinger::Mode::RealTime {
        return Err(Error::Unsupported("the hydrodynamic solver runs in real time only".into()));
    }
    let potential = match &config.potential {
        Some(u) => {
            same_grid(u.grid(), g)?;
            u.values().to_vec()
        }
        None => vec![0.0; g.len()],
    };
    let rhs = Rhs {
        grid: g,
        params: *params,
        v0: state0.background_velocity,
        potential,
        opts: *opts,
    };
    let dt = config.dt;
    let mut rho = state0.rho.values().to_vec();
    let mut s = state0.phase.values().to_vec();
    let snapshot = |rho: &[f64], s: &[f64], time: f64| MadelungState {
        rho: ScalarField::from_parts(g.clone(), rho.to_vec()),
        phase: ScalarField::from_parts(g.clone(), s.to_vec()),
        background_velocity: state0.background_velocity,
        params: *params,
        time,
    };
    let mut out = vec![snapshot(&rho, &s, state0.time)];
    let mut last_valid = out[0].clone();
    for step in 1..=config.step_count {
        let time = state0.time + step as f64 * dt;
        let (k1r, k1s) = rhs.eval(&rho, &s);
        let (k2r, k2s) = rhs.eval(&axpy(&rho, 0.5 * dt, &k1r), &axpy(&s, 0.5 * dt, &k1s));
        let (k3r, k3s) = rhs.eval(&axpy(&rho, 0.5 * dt, &k2r), &axpy(&s, 0.5 * dt, &k2s));
        let (k4r, k4s) = rhs.eval(&axpy(&rho, dt, &k3r), &axpy(&s, dt, &k3s));
        for i in 0..rho.len() {
            rho[i] += dt / 6.0 * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
            s[i] += dt / 6.0 * (k1s[i] + 2.0 * k2s[i] + 2.0 * k3s[i] + k4s[i]);
        }
        if opts.low_pass {
            spectral::low_pass_two_thirds(&mut rho, g);
            spectral::low_pass_two_thirds(&mut s, g);
        }
        if rho.iter().chain(&s).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { time });
        }
        let rmax = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rmin = rho.iter().copied().fold(f64::INFINITY, f64::min);
        if rmin <= opts.node_floor * rmax {
            return Err(Error::NodeFormation {
                time,
                min_density: rmin,
                last_state: Box::new(last_valid),
            });
        }
        let is_snap = step % config.snapshot_stride == 0 || step == config.step_count;
        if is_snap {
            out.push(snapshot(&rho, &s, time));
            last_valid = out.last().cloned().expect("just pushed");
        } else if step % 64 == 0 {
            last_valid = snapshot(&rho, &s, time);
        }
    }
    Ok(out)
}

/// Time-step limits for the hydrodynamic stepper.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepBounds {
    /// `0.5 dx / max |v|`; infinite for a fluid at rest.
    pub advective: f64,
    /// Empirical RK4 bound for the quantum-potential stiffness,
    /// `2.8 (2m/hbar) / k_max^2 * (rho_min / rho_max)^0.4`.
    pub stiffness: f64,
}

impl StepBounds {
    pub fn recommended(&self) -> f64 {
        self.advective.min(self.stiffness)
    }
}

pub fn step_bounds(state: &MadelungState) -> StepBounds {
    let g = state.grid();
    let p = state.params;
    let vmax = state.velocity().max_magnitude();
    let advective = if vmax > 0.0 {
        0.5 * g.min_spacing() / vmax
    } else {
        f64::INFINITY
    };
    let ratio = (state.rho.min() / state.rho.max()).clamp(0.0, 1.0);
    let stiffness = 2.8 * (2.0 * p.mass / p.hbar) / g.max_wavenumber().powi(2) * ratio.powf(0.4);
    StepBounds { advective, stiffness }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discrepancy {
    pub time: f64,
    /// `sqrt(int (rho_a - rho_b)^2)`.
    pub l2_rho: f64,
    pub linf_rho: f64,
    /// Density-weighted `sqrt(int rho |v_a - v_b|^2)` on the support.
    pub l2_v: f64,
}

#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub series: Vec<Discrepancy>,
    pub bounds: StepBounds,
}

impl CrossValidation {
    pub fn max_l2_rho(&self) -> f64 {
        self.series.iter().map(|d| d.l2_rho).fold(0.0, f64::max)
    }

    pub fn max_l2_v(&self) -> f64 {
        self.series.iter().map(|d| d.l2_v).fold(0.0, f64::max)
    }
}

/// Runs the split-step and hydrodynamic solvers from matched initial data
/// and compares them at every snapshot.
pub fn cross_validate(psi0: &WaveFunction, config: &EvolutionConfig, params: &PhysicalParams) -> Result<CrossValidation> {
    cross_validate_with(psi0, config, params, &MadelungOptions::default())
}

pub fn cross_validate_with(
    psi0: &WaveFunction,
    config: &EvolutionConfig,
    params: &PhysicalParams,
    opts: &MadelungOptions,
) -> Result<CrossValidation> {
    let state0 = MadelungState::from_wavefunction(psi0, params)?;
    let bounds = step_bounds(&state0);
    let quantum = evolve_split_step(psi0, config, params)?;
    let hydro = evolve_madelung_with(&state0, config, params, opts)?;
    let g = psi0.grid();
    let series = quantum
        .iter()
        .zip(&hydro)
        .map(|(q, h)| {
            let fields = madelung::wavefunction_to_fields(&q.psi, params)?;
            let vh = h.velocity();
            let drho: Vec<f64> = fields.rho.values().iter().zip(h.rho.values()).map(|(a, b)| a - b).collect();
            let sq: Vec<f64> = drho.iter().map(|d| d * d).collect();
            let dv: Vec<f64> = (0..g.len())
                .map(|i| {
                    if !fields.support.contains(i) {
                        return 0.0;
                    }
                    let a = fields.v.at(i);
                    let b = vh.at(i);
                    fields.rho.values()[i] * (0..g.dim()).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>()
                })
                .collect();
            Ok(Discrepancy {
                time: q.time,
                l2_rho: integrate_values(g, &sq).sqrt(),
                linf_rho: drho.iter().fold(0.0, |m, d| m.max(d.abs())),
                l2_v: integrate_values(g, &dv).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossValidation { series, bounds })
}

/// Uniform density `1/V` with zero action.
pub fn uniform_state(grid: &Grid, params: &PhysicalParams) -> Result<MadelungState> {
    let vol: f64 = grid.axes().iter().map(|a| a.length()).product();
    MadelungState::new(
        ScalarField::constant(grid, 1.0 / vol),
        ScalarField::zeros(grid),
        *params,
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::analytic::GaussianPacketSpec;
    use crate::schrodinger::{ground_state_imaginary_time, harmonic_potential, Mode};

    #[test]
    fn uniform_state_is_a_fixed_point() {
        let g = Grid::periodic_cube(2, 16, 4.0).unwrap();
        let p = PhysicalParams::default();
        let s0 = uniform_state(&g, &p).unwrap();
        let out = evolve_madelung(&s0, &EvolutionConfig::free(1e-3, 100).unwrap(), &p).unwrap();
        let last = out.last().unwrap();
        assert!(last.rho.values().iter().all(|r| (r - 1.0 / 16.0).abs() < 1e-15));
        assert!(last.phase.max_abs() < 1e-15);
    }

    #[test]
    fn free_gaussian_dispersion_tracks_closed_form() {
        let g = Grid::periodic_cube(1, 64, 12.0).unwrap();
        let p = PhysicalParams::default();
        let setup = GaussianPacketSpec::new(1.0, p, 0.0).unwrap();
        let s0 = MadelungState::from_wavefunction(&setup.wavefunction(&g).unwrap(), &p).unwrap();
        let dt = 4e-5;
        let steps = (2.0 / dt) as usize;
        let cfg = EvolutionConfig::new(dt, steps, None, steps / 4, Mode::RealTime).unwrap();
        for st in evolve_madelung(&s0, &cfg, &p).unwrap() {
            let x = g.coordinate_field(0);
            let w: Vec<f64> = st.rho.values().iter().zip(&x).map(|(r, x)| r * x * x).collect();
            let var = integrate_values(&g, &w);
            let expect = setup.at_time(st.time).sigma_squared();
            assert!((var - expect).abs() < 1e-4 * expect, "t={} {var} {expect}", st.time);
            assert!((st.mass() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn harmonic_ground_state_is_stationary() {
        let g = Grid::periodic_cube(1, 64, 8.0).unwrap();
        let p = PhysicalParams::default();
        let u = harmonic_potential(&g, &p, 1.0);
        let guess = WaveFunction::from_fn(&g, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0)).unwrap();
        let gs = ground_state_imaginary_time(
            &EvolutionConfig::new(1e-3, 100_000, Some(u.clone()), 1, Mode::ImaginaryTime).unwrap(),
            &p,
            &guess,
        )
        .unwrap();
        let s0 = MadelungState::new(gs.psi.density(), ScalarField::zeros(&g), p, 0.0).unwrap();
        let dt = step_bounds(&s0).recommended();
        let steps = (0.2 / dt).ceil() as usize;
        let cfg = EvolutionConfig::new(dt, steps, Some(u), steps, Mode::RealTime).unwrap();
        let out = evolve_madelung(&s0, &cfg, &p).unwrap();
        let last = out.last().unwrap();
        let drift = madelung::max_abs_diff(last.rho.values(), s0.rho.values(), &vec![true; g.len()]);
        assert!(drift < 1e-6, "{drift}");
        // S = -E t up to a uniform constant; the tails feel the kink of the
        // periodically wrapped trap
        let bulk: Vec<f64> = (0..g.len())
            .filter(|&i| g.point(i)[0].abs() < 2.0)
            .map(|i| last.phase.values()[i])
            .collect();
        let spread = bulk.iter().cloned().fold(f64::MIN, f64::max) - bulk.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-5, "{spread}");
        assert!((last.phase.values()[32] / last.time + gs.energy).abs() < 1e-4);
    }

    #[test]
    fn plane_wave_agrees_to_round_off() {
        let l = 10.0;
        let g = Grid::periodic_cube(1, 32, l).unwrap();
        let p = PhysicalParams::default();
        let k = 2.0 * std::f64::consts::PI / l;
        let psi = WaveFunction::from_fn(&g, |x| Complex64::from_polar(l.powf(-0.5), k * x[0])).unwrap();
        let cv = cross_validate(&psi, &EvolutionConfig::new(1e-3, 500, None, 100, Mode::RealTime).unwrap(), &p).unwrap();
        assert!(cv.max_l2_rho() < 1e-12);
        assert!(cv.max_l2_v() < 1e-10);
    }

    #[test]
    fn classical_limit_translates_boosted_packet() {
        let g = Grid::periodic_cube(1, 128, 20.0).unwrap();
        let p = PhysicalParams::default();
        let rho = ScalarField::from_fn(&g, |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() + 1e-6).unwrap();
        let s0 = MadelungState::new(rho, ScalarField::zeros(&g), p, 0.0).unwrap().with_background_velocity([0.5, 0.0, 0.0]);
        let cfg = EvolutionConfig::new(1e-2, 200, None, 200, Mode::RealTime).unwrap();
        let last = classical_limit_evolve(&s0, &cfg, &p).unwrap().pop().unwrap();
        let x = g.coordinate_field(0);
        let w: Vec<f64> = last.rho.values().iter().zip(&x).map(|(r, x)| r * x).collect();
        let centroid = integrate_values(&g, &w) / last.mass();
        assert!((centroid - 0.5 * 2.0 * (1.0 - 20.0e-6 / last.mass())).abs() < 1e-3, "{centroid}");
    }

    #[test]
    fn node_formation_aborts_with_last_state() {
        let g = Grid::periodic_cube(1, 64, 8.0).unwrap();
        let p = PhysicalParams::default();
        let rho = ScalarField::from_fn(&g, |x| (-x[0] * x[0] * 4.0).exp() + 1e-11).unwrap();
        let s0 = MadelungState::new(rho, ScalarField::zeros(&g), p, 0.0).unwrap();
        let cfg = EvolutionConfig::new(1e-4, 100, None, 10, Mode::RealTime).unwrap();
        match evolve_madelung(&s0, &cfg, &p) {
            Err(Error::NodeFormation { last_state, .. }) => assert!(last_state.rho.min() > 0.0),
            Err(Error::NonFinite { .. }) => {}
            other => panic!("expected abort, got {:?}", other.map(|v| v.len())),
        }
    }
}
