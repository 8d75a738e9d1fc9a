//! Wavefunction propagation: Strang split-step on periodic grids,
//! Crank–Nicolson on bounded 1-D grids, and imaginary-time relaxation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::calculus::integrate_values;
use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField, WaveFunction};
use crate::grid::Grid;
use crate::params::PhysicalParams;
use crate::spectral;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    RealTime,
    ImaginaryTime,
}

#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub step_count: usize,
    /// External potential `U`; `None` means free propagation.
    pub potential: Option<ScalarField>,
    pub snapshot_stride: usize,
    pub mode: Mode,
}

impl EvolutionConfig {
    pub fn new(dt: f64, step_count: usize, potential: Option<ScalarField>, snapshot_stride: usize, mode: Mode) -> Result<Self> {
        let c = EvolutionConfig {
            dt,
            step_count,
            potential,
            snapshot_stride,
            mode,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn free(dt: f64, step_count: usize) -> Result<Self> {
        EvolutionConfig::new(dt, step_count, None, step_count.max(1), Mode::RealTime)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.step_count == 0 {
            return Err(Error::InvalidParameter("step_count must be positive".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("snapshot_stride must be positive".into()));
        }
        Ok(())
    }

    fn potential_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        match &self.potential {
            Some(u) => {
                same_grid(u.grid(), grid)?;
                Ok(u.values().to_vec())
            }
            None => Ok(vec![0.0; grid.len()]),
        }
    }

    /// Warning text when `dt` exceeds the splitting's anti-aliasing bound.
    pub fn aliasing_warning(&self, grid: &Grid, params: &PhysicalParams) -> Option<String> {
        let bound = aliasing_bound(grid, params);
        (self.dt >= bound).then(|| {
            format!(
                "dt = {:e} exceeds the anti-aliasing bound {:e} (pi hbar / max kinetic eigenvalue)",
                self.dt, bound
            )
        })
    }
}

/// Largest kinetic eigenvalue representable on `grid`.
pub fn max_kinetic_eigenvalue(grid: &Grid, params: &PhysicalParams) -> f64 {
    params.hbar * params.hbar * grid.max_wavenumber().powi(2) / (2.0 * params.mass)
}

/// `pi hbar / E_max`: phases of the kinetic factor stay unambiguous below it.
pub fn aliasing_bound(grid: &Grid, params: &PhysicalParams) -> f64 {
    PI * params.hbar / max_kinetic_eigenvalue(grid, params)
}

/// Default step: 0.8 of the anti-aliasing bound.
pub fn default_dt(grid: &Grid, params: &PhysicalParams) -> f64 {
    0.8 * aliasing_bound(grid, params)
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub psi: WaveFunction,
    pub norm: f64,
    pub energy: f64,
}

/// `<psi|H|psi>` with the spectral kinetic operator (Parseval form).
pub fn energy(psi: &WaveFunction, potential: Option<&ScalarField>, params: &PhysicalParams) -> Result<f64> {
    let g = psi.grid();
    if !g.is_periodic() {
        return Err(Error::Unsupported("spectral energy needs a fully periodic grid".into()));
    }
    let mut data = psi.values().to_vec();
    spectral::fft_nd(&mut data, g, false);
    let k2 = spectral::wavenumber_squared(g);
    let kin: f64 = data.iter().zip(&k2).map(|(z, k)| z.norm_sqr() * k).sum::<f64>()
        * params.hbar
        * params.hbar
        / (2.0 * params.mass)
        * g.cell_volume()
        / g.len() as f64;
    let pot = match potential {
        Some(u) => {
            same_grid(u.grid(), g)?;
            let w: Vec<f64> = psi.values().iter().zip(u.values()).map(|(z, u)| z.norm_sqr() * u).collect();
            integrate_values(g, &w)
        }
        None => 0.0,
    };
    Ok(kin + pot)
}

struct SplitStepper {
    grid: Grid,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    mode: Mode,
}

impl SplitStepper {
    fn new(grid: &Grid, u: &[f64], dt: f64, params: &PhysicalParams, mode: Mode) -> Self {
        let k2 = spectral::wavenumber_squared(grid);
        let ekin = |k: f64| params.hbar * k / (2.0 * params.mass);
        let (half_potential, kinetic) = match mode {
            Mode::RealTime => (
                u.iter().map(|&v| Complex64::from_polar(1.0, -0.5 * v * dt / params.hbar)).collect(),
                k2.iter().map(|&k| Complex64::from_polar(1.0, -ekin(k) * dt)).collect(),
            ),
            Mode::ImaginaryTime => (
                u.iter().map(|&v| Complex64::new((-0.5 * v * dt / params.hbar).exp(), 0.0)).collect(),
                k2.iter().map(|&k| Complex64::new((-ekin(k) * dt).exp(), 0.0)).collect(),
            ),
        };
        SplitStepper {
            grid: grid.clone(),
            half_potential,
            kinetic,
            mode,
        }
    }

    fn step(&self, psi: &mut [Complex64]) {
        for (z, p) in psi.iter_mut().zip(&self.half_potential) {
            *z *= p;
        }
        spectral::fft_nd(psi, &self.grid, false);
        for (z, k) in psi.iter_mut().zip(&self.kinetic) {
            *z *= k;
        }
        spectral::fft_nd(psi, &self.grid, true);
        for (z, p) in psi.iter_mut().zip(&self.half_potential) {
            *z *= p;
        }
        if self.mode == Mode::ImaginaryTime {
            renormalize(psi, &self.grid);
        }
    }
}

fn renormalize(psi: &mut [Complex64], grid: &Grid) {
    let w: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let n = integrate_values(grid, &w);
    if n > 0.0 {
        let s = 1.0 / n.sqrt();
        for z in psi.iter_mut() {
            *z *= s;
        }
    }
}

fn check_finite(psi: &[Complex64], time: f64) -> Result<()> {
    if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite { time });
    }
    Ok(())
}

/// Strang splitting: half potential kick, exact kinetic drift in Fourier
/// space, half potential kick. Snapshots at step 0, every
/// `snapshot_stride` steps, and at the final step.
pub fn evolve_split_step(psi0: &WaveFunction, config: &EvolutionConfig, params: &PhysicalParams) -> Result<Vec<Snapshot>> {
    config.validate()?;
    params.validate()?;
    let g = psi0.grid();
    if !g.is_periodic() {
        return Err(Error::Unsupported("split-step propagation needs a fully periodic grid".into()));
    }
    psi0.check_normalized(crate::madelung::DEFAULT_NORM_TOLERANCE)?;
    let u = config.potential_values(g)?;
    let stepper = SplitStepper::new(g, &u, config.dt, params, config.mode);
    let mut psi = psi0.values().to_vec();
    let mut out = Vec::new();
    let snap = |step: usize, psi: &[Complex64]| -> Result<Snapshot> {
        let wf = WaveFunction::from_parts(g.clone(), psi.to_vec());
        Ok(Snapshot {
            step,
            time: step as f64 * config.dt,
            norm: wf.norm_squared(),
            energy: energy(&wf, config.potential.as_ref(), params)?,
            psi: wf,
        })
    };
    out.push(snap(0, &psi)?);
    for step in 1..=config.step_count {
        stepper.step(&mut psi);
        if step % config.snapshot_stride == 0 || step == config.step_count {
            check_finite(&psi, step as f64 * config.dt)?;
            out.push(snap(step, &psi)?);
        }
    }
    Ok(out)
}

/// Crank–Nicolson with a three-point Laplacian on a bounded 1-D grid with
/// homogeneous Dirichlet edges. The end nodes are held at zero.
pub fn evolve_crank_nicolson_1d(psi0: &WaveFunction, config: &EvolutionConfig, params: &PhysicalParams) -> Result<Vec<Snapshot>> {
    config.validate()?;
    params.validate()?;
    let g = psi0.grid();
    if g.dim() != 1 || g.axis(0).periodic {
        return Err(Error::Unsupported("Crank-Nicolson needs a bounded 1-D grid".into()));
    }
    let u = config.potential_values(g)?;
    let n = g.len();
    let h = g.axis(0).spacing;
    let kin = params.hbar * params.hbar / (2.0 * params.mass * h * h);
    // H = diag(2 kin + U) - kin (shift up + shift down), interior nodes only.
    let factor = match config.mode {
        Mode::RealTime => Complex64::new(0.0, 0.5 * config.dt / params.hbar),
        Mode::ImaginaryTime => Complex64::new(0.5 * config.dt / params.hbar, 0.0),
    };
    let m = n - 2;
    let diag: Vec<Complex64> = (1..n - 1).map(|i| 1.0 + factor * (2.0 * kin + u[i])).collect();
    let off = -factor * kin;
    let mut psi = psi0.values().to_vec();
    psi[0] = Complex64::new(0.0, 0.0);
    psi[n - 1] = Complex64::new(0.0, 0.0);
    let energy_of = |psi: &[Complex64]| -> f64 {
        let mut e = 0.0;
        for i in 1..n - 1 {
            let hpsi = (2.0 * kin + u[i]) * psi[i] - kin * (psi[i - 1] + psi[i + 1]);
            e += (psi[i].conj() * hpsi).re * h;
        }
        e
    };
    let norm_of = |psi: &[Complex64]| psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    let mut out = vec![Snapshot {
        step: 0,
        time: 0.0,
        norm: norm_of(&psi),
        energy: energy_of(&psi),
        psi: WaveFunction::from_parts(g.clone(), psi.clone()),
    }];
    let mut rhs = vec![Complex64::new(0.0, 0.0); m];
    let mut cprime = vec![Complex64::new(0.0, 0.0); m];
    for step in 1..=config.step_count {
        for j in 0..m {
            let i = j + 1;
            let hpsi = (2.0 * kin + u[i]) * psi[i] - kin * (psi[i - 1] + psi[i + 1]);
            rhs[j] = psi[i] - factor * hpsi;
        }
        // Thomas algorithm with constant off-diagonals.
        cprime[0] = off / diag[0];
        rhs[0] /= diag[0];
        for j in 1..m {
            let denom = diag[j] - off * cprime[j - 1];
            cprime[j] = off / denom;
            rhs[j] = (rhs[j] - off * rhs[j - 1]) / denom;
        }
        for j in (0..m - 1).rev() {
            let next = rhs[j + 1];
            rhs[j] -= cprime[j] * next;
        }
        psi[1..n - 1].copy_from_slice(&rhs);
        if config.mode == Mode::ImaginaryTime {
            let s = 1.0 / norm_of(&psi).sqrt();
            for z in psi.iter_mut() {
                *z *= s;
            }
        }
        if step % config.snapshot_stride == 0 || step == config.step_count {
            check_finite(&psi, step as f64 * config.dt)?;
            out.push(Snapshot {
                step,
                time: step as f64 * config.dt,
                norm: norm_of(&psi),
                energy: energy_of(&psi),
                psi: WaveFunction::from_parts(g.clone(), psi.clone()),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub psi: WaveFunction,
    pub energy: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Energy change per step below which relaxation stops.
pub const GROUND_STATE_TOLERANCE: f64 = 1e-12;

/// Imaginary-time split-step relaxation with renormalization every step,
/// stopping once the Rayleigh-quotient energy changes by less than
/// [`GROUND_STATE_TOLERANCE`] in one step or after `config.step_count`
/// steps.
pub fn ground_state_imaginary_time(config: &EvolutionConfig, params: &PhysicalParams, initial: &WaveFunction) -> Result<GroundState> {
    config.validate()?;
    params.validate()?;
    let g = initial.grid();
    if !g.is_periodic() {
        return Err(Error::Unsupported("imaginary-time relaxation needs a fully periodic grid".into()));
    }
    let u = config.potential_values(g)?;
    let stepper = SplitStepper::new(g, &u, config.dt, params, Mode::ImaginaryTime);
    let mut psi = initial.values().to_vec();
    renormalize(&mut psi, g);
    let pot = config.potential.as_ref();
    let mut e_prev = energy(&WaveFunction::from_parts(g.clone(), psi.clone()), pot, params)?;
    for step in 1..=config.step_count {
        stepper.step(&mut psi);
        check_finite(&psi, step as f64 * config.dt)?;
        let wf = WaveFunction::from_parts(g.clone(), psi.clone());
        let e = energy(&wf, pot, params)?;
        if (e - e_prev).abs() < GROUND_STATE_TOLERANCE {
            return Ok(GroundState {
                psi: wf,
                energy: e,
                steps: step,
                converged: true,
            });
        }
        e_prev = e;
    }
    Ok(GroundState {
        psi: WaveFunction::from_parts(g.clone(), psi),
        energy: e_prev,
        steps: config.step_count,
        converged: false,
    })
}

/// Harmonic potential `m w^2 r^2 / 2` about the origin.
pub fn harmonic_potential(grid: &Grid, params: &PhysicalParams, omega: f64) -> ScalarField {
    let c = 0.5 * params.mass * omega * omega;
    ScalarField::from_parts(grid.clone(), grid.radius_squared(&[]).iter().map(|r| c * r).collect())
}

/// Density-weighted mean position along axis `k`.
pub fn centroid(psi: &WaveFunction, k: usize) -> f64 {
    let x = psi.grid().coordinate_field(k);
    let w: Vec<f64> = psi.values().iter().zip(&x).map(|(z, x)| z.norm_sqr() * x).collect();
    integrate_values(psi.grid(), &w)
}

/// Density-weighted variance along axis `k`.
pub fn variance(psi: &WaveFunction, k: usize) -> f64 {
    let mean = centroid(psi, k);
    let x = psi.grid().coordinate_field(k);
    let w: Vec<f64> = psi.values().iter().zip(&x).map(|(z, x)| z.norm_sqr() * (x - mean).powi(2)).collect();
    integrate_values(psi.grid(), &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::GaussianPacketSpec;
    use crate::grid::Axis;

    #[test]
    fn plane_wave_phase_advances_exactly() {
        let l = 8.0;
        let g = Grid::periodic_cube(1, 32, l).unwrap();
        let k = 2.0 * PI * 2.0 / l;
        let psi = WaveFunction::from_fn(&g, |x| Complex64::from_polar(l.powf(-0.5), k * x[0])).unwrap();
        let cfg = EvolutionConfig::free(0.01, 100).unwrap();
        let out = evolve_split_step(&psi, &cfg, &PhysicalParams::default()).unwrap();
        let last = out.last().unwrap();
        let t = last.time;
        for (a, b) in last.psi.values().iter().zip(psi.values()) {
            let expect = b * Complex64::from_polar(1.0, -k * k * t / 2.0);
            assert!((a - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn free_gaussian_dispersion() {
        let g = Grid::periodic_cube(1, 256, 40.0).unwrap();
        let p = PhysicalParams::default();
        let setup = GaussianPacketSpec::new(1.0, p, 0.0).unwrap();
        let psi = setup.wavefunction(&g).unwrap();
        let cfg = EvolutionConfig::free(0.01, 200).unwrap();
        let out = evolve_split_step(&psi, &cfg, &p).unwrap();
        assert!((variance(&out.last().unwrap().psi, 0) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn unitarity_and_energy_conservation() {
        let g = Grid::periodic_cube(1, 128, 20.0).unwrap();
        let p = PhysicalParams::default();
        let psi = GaussianPacketSpec::new(1.0, p, 0.0).unwrap().wavefunction(&g).unwrap();
        let cfg = EvolutionConfig::new(default_dt(&g, &p), 1000, None, 1, Mode::RealTime).unwrap();
        assert!(cfg.aliasing_warning(&g, &p).is_none());
        let out = evolve_split_step(&psi, &cfg, &p).unwrap();
        for w in out.windows(2) {
            assert!((w[1].norm - w[0].norm).abs() < 1e-12);
        }
        let e0 = out[0].energy;
        assert!(out.iter().all(|s| (s.energy - e0).abs() < 1e-8 * e0));
    }

    #[test]
    fn coherent_state_centroid_oscillates_at_trap_frequency() {
        let g = Grid::periodic_cube(1, 128, 20.0).unwrap();
        let p = PhysicalParams::default();
        let omega = 1.0;
        let x0 = 1.5;
        let psi = WaveFunction::from_fn(&g, |x| {
            Complex64::new((-(x[0] - x0).powi(2) / 2.0).exp() * PI.powf(-0.25), 0.0)
        })
        .unwrap();
        let u = harmonic_potential(&g, &p, omega);
        let cfg = EvolutionConfig::new(1e-3, 6000, Some(u), 100, Mode::RealTime).unwrap();
        for s in evolve_split_step(&psi, &cfg, &p).unwrap() {
            assert!((centroid(&s.psi, 0) - x0 * (omega * s.time).cos()).abs() < 1e-4 * x0);
        }
    }

    #[test]
    fn strang_splitting_is_second_order() {
        let g = Grid::periodic_cube(1, 128, 20.0).unwrap();
        let p = PhysicalParams::default();
        let psi = WaveFunction::from_fn(&g, |x| Complex64::new((-(x[0] - 1.0).powi(2) / 1.5).exp(), 0.0))
            .unwrap()
            .normalized()
            .unwrap();
        let u = harmonic_potential(&g, &p, 1.0);
        let run = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let cfg = EvolutionConfig::new(dt, steps, Some(u.clone()), steps, Mode::RealTime).unwrap();
            evolve_split_step(&psi, &cfg, &p).unwrap().pop().unwrap().psi
        };
        let reference = run(0.0025 / 8.0);
        let err = |w: &WaveFunction| {
            w.values().iter().zip(reference.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let e1 = err(&run(0.01));
        let e2 = err(&run(0.005));
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn crank_nicolson_conserves_norm() {
        let g = Grid::new(vec![Axis::bounded(257, -20.0, 20.0)]).unwrap();
        let p = PhysicalParams::default();
        let psi = WaveFunction::from_fn(&g, |x| {
            Complex64::from_polar((-x[0] * x[0] / 4.0).exp() * (2.0 * PI).powf(-0.25), 0.5 * x[0])
        })
        .unwrap();
        let cfg = EvolutionConfig::new(0.01, 10_000, None, 1000, Mode::RealTime).unwrap();
        let out = evolve_crank_nicolson_1d(&psi, &cfg, &p).unwrap();
        let n0 = out[0].norm;
        assert!(out.iter().all(|s| (s.norm - n0).abs() < 1e-8));
    }

    #[test]
    fn crank_nicolson_agrees_with_split_step() {
        let p = PhysicalParams::default();
        let gb = Grid::new(vec![Axis::bounded(1025, -20.0, 20.0)]).unwrap();
        let gp = Grid::new(vec![Axis {
            points: 1024,
            spacing: 40.0 / 1024.0,
            origin: -20.0,
            periodic: true,
        }])
        .unwrap();
        let setup = GaussianPacketSpec::new(1.0, p, 0.0).unwrap();
        let a = evolve_split_step(&setup.wavefunction(&gp).unwrap(), &EvolutionConfig::free(1e-3, 1000).unwrap(), &p)
            .unwrap()
            .pop()
            .unwrap();
        let b = evolve_crank_nicolson_1d(&setup.wavefunction(&gb).unwrap(), &EvolutionConfig::free(1e-3, 1000).unwrap(), &p)
            .unwrap()
            .pop()
            .unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..gp.len() {
            worst = worst.max((a.psi.values()[i].norm_sqr() - b.psi.values()[i].norm_sqr()).abs());
        }
        // three-point Laplacian error ~ dx^2 / 12 relative
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn harmonic_ground_state_energy() {
        let g = Grid::periodic_cube(1, 64, 16.0).unwrap();
        let p = PhysicalParams::default();
        let u = harmonic_potential(&g, &p, 1.0);
        let guess = WaveFunction::from_fn(&g, |x| Complex64::new((-x[0] * x[0] / 3.0).exp(), 0.0)).unwrap();
        let cfg = EvolutionConfig::new(0.01, 20_000, Some(u), 1, Mode::ImaginaryTime).unwrap();
        let gs = ground_state_imaginary_time(&cfg, &p, &guess).unwrap();
        assert!(gs.converged);
        assert!((gs.energy - 0.5).abs() < 1e-6, "{}", gs.energy);
    }

    #[test]
    fn free_ground_state_is_uniform() {
        let g = Grid::periodic_cube(1, 32, 10.0).unwrap();
        let p = PhysicalParams::default();
        let guess = WaveFunction::from_fn(&g, |x| Complex64::new(1.0 + 0.3 * (2.0 * PI * x[0] / 10.0).cos(), 0.0)).unwrap();
        let cfg = EvolutionConfig::new(0.05, 20_000, None, 1, Mode::ImaginaryTime).unwrap();
        let gs = ground_state_imaginary_time(&cfg, &p, &guess).unwrap();
        assert!(gs.energy.abs() < 1e-6);
        let rho = gs.psi.density();
        assert!(rho.max() - rho.min() < 1e-4 * rho.max());
    }

    #[test]
    fn split_step_rejects_bounded_grid() {
        let g = Grid::new(vec![Axis::bounded(16, 0.0, 1.0)]).unwrap();
        let psi = WaveFunction::from_fn(&g, |_| Complex64::new(1.0, 0.0)).unwrap().normalized().unwrap();
        assert!(matches!(
            evolve_split_step(&psi, &EvolutionConfig::free(0.1, 1).unwrap(), &PhysicalParams::default()),
            Err(Error::Unsupported(_))
        ));
    }
}
