//! Closed-form reference states and the physical-scales calculator.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::calculus;
use crate::error::{Error, Result};
use crate::field::{ScalarField, SymmetricTensorField, VectorField, WaveFunction};
use crate::grid::Grid;
use crate::madelung::{
    self, max_abs_diff, max_abs_on, DiagnosticsBundle, HydroFields, SupportMask, TurbulenceIntensity,
    DEFAULT_DENSITY_FLOOR, INTENSITY_FLOOR,
};
use crate::params::PhysicalParams;

/// CODATA 2018 recommended values (SI).
pub mod codata {
    /// Reduced Planck constant, J s (exact).
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Speed of light in vacuum, m/s (exact).
    pub const LIGHT_SPEED: f64 = 299_792_458.0;
    /// Electron mass, kg.
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    /// Bohr radius, m.
    pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
    /// Fine-structure constant.
    pub const ALPHA: f64 = 7.297_352_569_3e-3;
}

/// Feigenbaum's first constant.
pub const FEIGENBAUM_DELTA: f64 = 4.669_201_609_102_99;

/// Nodes whose density exceeds this fraction of the peak are used for
/// pointwise identities that divide by the density.
pub const IDENTITY_REGION_FLOOR: f64 = 1e-6;

pub fn identity_region(rho: &ScalarField, floor: f64) -> Vec<bool> {
    let cut = floor * rho.max();
    rho.values().iter().map(|&r| r > cut).collect()
}

/// Freely spreading Gaussian packet centred on the origin at rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPacketSpec {
    pub sigma0: f64,
    pub params: PhysicalParams,
    pub time: f64,
}

impl GaussianPacketSpec {
    pub fn new(sigma0: f64, params: PhysicalParams, time: f64) -> Result<Self> {
        params.validate()?;
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma0 must be positive, got {sigma0}")));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::InvalidParameter(format!("time must be non-negative, got {time}")));
        }
        Ok(GaussianPacketSpec { sigma0, params, time })
    }

    pub fn at_time(&self, time: f64) -> Self {
        GaussianPacketSpec { time, ..*self }
    }

    /// Dimensionless time `hbar t / (2 m sigma0^2)`.
    fn tau(&self) -> f64 {
        self.params.hbar * self.time / (2.0 * self.params.mass * self.sigma0 * self.sigma0)
    }

    /// `sigma^2 = sigma0^2 + (hbar t / 2 m sigma0)^2`.
    pub fn sigma_squared(&self) -> f64 {
        let s = self.params.hbar * self.time / (2.0 * self.params.mass * self.sigma0);
        self.sigma0 * self.sigma0 + s * s
    }

    /// Expansion rate `sigma_dot / sigma`.
    pub fn expansion_rate(&self) -> f64 {
        let a = self.params.hbar / (2.0 * self.params.mass * self.sigma0);
        a * a * self.time / self.sigma_squared()
    }

    /// `2 m sigma0^2 / (hbar t)`; `None` at t = 0.
    pub fn intensity(&self) -> Option<f64> {
        (self.time > 0.0).then(|| 2.0 * self.params.mass * self.sigma0 * self.sigma0 / (self.params.hbar * self.time))
    }

    /// `<eps> = d hbar^2 / (8 m sigma^2)`.
    pub fn mean_internal_energy(&self, dim: usize) -> f64 {
        dim as f64 * self.params.hbar.powi(2) / (8.0 * self.params.mass * self.sigma_squared())
    }

    pub fn density_at(&self, r2: f64, dim: usize) -> f64 {
        let s2 = self.sigma_squared();
        (-r2 / (2.0 * s2)).exp() / (2.0 * PI * s2).powf(dim as f64 / 2.0)
    }

    /// Action with the global phase chosen so that `psi` matches
    /// [`GaussianPacketSpec::wavefunction`].
    pub fn phase_at(&self, r2: f64, dim: usize) -> f64 {
        let t = self.tau();
        let s02 = self.sigma0 * self.sigma0;
        self.params.hbar * (r2 * t / (4.0 * s02 * (1.0 + t * t)) - 0.5 * dim as f64 * t.atan())
    }

    /// Packet sampled on `grid`. Periodic axes sum over enough images for the
    /// result to be smooth and periodic; the sample is renormalized.
    pub fn wavefunction(&self, grid: &Grid) -> Result<WaveFunction> {
        let t = self.tau();
        let a = Complex64::new(4.0 * self.sigma0 * self.sigma0, 0.0) * Complex64::new(1.0, t);
        let pref = (2.0 * PI * self.sigma0 * self.sigma0).powf(-0.25) * Complex64::new(1.0, t).powf(-0.5);
        let sigma = self.sigma_squared().sqrt();
        let per_axis: Vec<Vec<Complex64>> = grid
            .axes()
            .iter()
            .map(|axis| {
                let images = if axis.periodic {
                    (40.0 * sigma / axis.length()).ceil() as i64 + 1
                } else {
                    0
                };
                axis.coordinates()
                    .iter()
                    .map(|&x| {
                        let mut z = Complex64::new(0.0, 0.0);
                        for n in -images..=images {
                            let y = x + n as f64 * axis.length();
                            z += (-(y * y) / a).exp();
                        }
                        pref * z
                    })
                    .collect()
            })
            .collect();
        let vals = (0..grid.len())
            .map(|i| {
                let m = grid.unflatten(i);
                per_axis.iter().enumerate().fold(Complex64::new(1.0, 0.0), |acc, (k, c)| acc * c[m[k]])
            })
            .collect();
        WaveFunction::new(grid.clone(), vals)?.normalized()
    }
}

/// Closed-form Madelung fields and diagnostics of the spreading packet.
///
/// The pressure-velocity correlation carries the density factor,
/// `C = -2 <eps> rho v`.
pub fn gaussian_fields(setup: &GaussianPacketSpec, grid: &Grid) -> Result<(HydroFields, DiagnosticsBundle)> {
    setup.params.validate()?;
    let d = grid.dim();
    let (hbar, m) = (setup.params.hbar, setup.params.mass);
    let s2 = setup.sigma_squared();
    let rate = setup.expansion_rate();
    let n = grid.len();
    let r2 = grid.radius_squared(&[]);
    let rho = ScalarField::new(grid.clone(), r2.iter().map(|&r| setup.density_at(r, d)).collect())?;
    let mut v = vec![vec![0.0; n]; d];
    let mut u = vec![vec![0.0; n]; d];
    for k in 0..d {
        let x = grid.coordinate_field(k);
        for i in 0..n {
            v[k][i] = x[i] * rate;
            u[k][i] = x[i] * hbar / (2.0 * m * s2);
        }
    }
    let v = VectorField::new(grid.clone(), v)?;
    let u = VectorField::new(grid.clone(), u)?;
    let phase = ScalarField::new(grid.clone(), r2.iter().map(|&r| setup.phase_at(r, d)).collect())?;
    let support = SupportMask::from_density(&rho, DEFAULT_DENSITY_FLOOR);
    let h = HydroFields {
        rho,
        v,
        u,
        phase: Some(phase),
        params: setup.params,
        support,
    };

    let pressure = ScalarField::new(
        grid.clone(),
        (0..n)
            .map(|i| -hbar * hbar / (4.0 * m) * h.rho.values()[i] * (r2[i] / (s2 * s2) - d as f64 / s2))
            .collect(),
    )?;
    let qpot = ScalarField::new(
        grid.clone(),
        r2.iter()
            .map(|&r| hbar * hbar / (2.0 * m) * (d as f64 / (2.0 * s2) - r / (4.0 * s2 * s2)))
            .collect(),
    )?;
    let eps = ScalarField::new(
        grid.clone(),
        r2.iter().map(|&r| hbar * hbar * r / (8.0 * m * s2 * s2)).collect(),
    )?;
    let mut stress = SymmetricTensorField::zeros(grid);
    for i in 0..d {
        for j in i..d {
            let (ui, uj) = (h.u.component(i).to_vec(), h.u.component(j).to_vec());
            let c = stress.component_mut(i, j);
            for p in 0..n {
                c[p] = m * h.rho.values()[p] * ui[p] * uj[p];
            }
        }
    }
    let mean_eps = setup.mean_internal_energy(d);
    let corr = VectorField::new(
        grid.clone(),
        (0..d)
            .map(|k| {
                (0..n)
                    .map(|i| -2.0 * mean_eps * h.rho.values()[i] * h.v.component(k)[i])
                    .collect()
            })
            .collect(),
    )?;
    let vmag = h.v.magnitude();
    let cut = INTENSITY_FLOOR * vmag.max_abs();
    let level = setup.intensity();
    let defined: Vec<bool> = vmag
        .values()
        .iter()
        .map(|&x| level.is_some() && x > 0.0 && x >= cut)
        .collect();
    let ivals = defined
        .iter()
        .map(|&b| if b { level.unwrap_or(0.0) } else { 0.0 })
        .collect();
    let intensity = TurbulenceIntensity {
        values: ScalarField::new(grid.clone(), ivals)?,
        defined,
    };
    let diag = DiagnosticsBundle {
        pressure,
        stress,
        internal_energy: eps,
        quantum_potential: qpot,
        correlation: corr,
        intensity,
    };
    Ok((h, diag))
}

/// Residuals of `p/2rho = <eps> - eps = Q - <Q>` and `C = -2 <eps> rho v`
/// evaluated numerically from the sampled packet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureIdentityReport {
    /// `max |p/2rho - (<eps> - eps)|` relative to `max |p/2rho|`.
    pub energy_form: f64,
    /// `max |p/2rho - (Q - <Q>)|` relative to `max |p/2rho|`.
    pub potential_form: f64,
    /// `max |C - (-2 <eps> rho v)|` relative to `max |C|`; zero when the
    /// packet is at rest.
    pub correlation: f64,
}

impl PressureIdentityReport {
    pub fn worst(&self) -> f64 {
        self.energy_form.max(self.potential_form).max(self.correlation)
    }
}

pub fn gaussian_pressure_identity_check(setup: &GaussianPacketSpec, grid: &Grid) -> Result<PressureIdentityReport> {
    let psi = setup.wavefunction(grid)?;
    let h = madelung::wavefunction_to_fields(&psi, &setup.params)?;
    let diag = madelung::diagnostics(&h);
    let region = identity_region(&h.rho, IDENTITY_REGION_FLOOR);
    let n = grid.len();
    let half_p: Vec<f64> = (0..n)
        .map(|i| if region[i] { 0.5 * diag.pressure.values()[i] / h.rho.values()[i] } else { 0.0 })
        .collect();
    let mean_eps = calculus::density_average(&diag.internal_energy, &h.rho)?;
    let mean_q = calculus::density_average(&diag.quantum_potential, &h.rho)?;
    let e_form: Vec<f64> = diag.internal_energy.values().iter().map(|e| mean_eps - e).collect();
    let q_form: Vec<f64> = diag.quantum_potential.values().iter().map(|q| q - mean_q).collect();
    let scale = max_abs_on(&half_p, &region).max(f64::MIN_POSITIVE);

    let mut c_err: f64 = 0.0;
    let mut c_scale: f64 = 0.0;
    for k in 0..grid.dim() {
        for i in 0..n {
            let c = diag.correlation.component(k)[i];
            let closed = -2.0 * mean_eps * h.rho.values()[i] * h.v.component(k)[i];
            c_err = c_err.max((c - closed).abs());
            c_scale = c_scale.max(c.abs());
        }
    }
    Ok(PressureIdentityReport {
        energy_form: max_abs_diff(&half_p, &e_form, &region) / scale,
        potential_form: max_abs_diff(&half_p, &q_form, &region) / scale,
        correlation: if c_scale > 0.0 { c_err / c_scale } else { c_err },
    })
}

/// Ground-state hydrogen orbital in three dimensions, centred on the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hydrogen1sSpec {
    pub bohr_radius: f64,
    pub params: PhysicalParams,
}

impl Hydrogen1sSpec {
    pub fn new(bohr_radius: f64, params: PhysicalParams) -> Result<Self> {
        params.validate()?;
        if !(bohr_radius.is_finite() && bohr_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bohr radius must be positive, got {bohr_radius}"
            )));
        }
        Ok(Hydrogen1sSpec { bohr_radius, params })
    }

    /// `hbar^2 / (2 m a^2)`, the magnitude of the binding energy.
    pub fn rydberg(&self) -> f64 {
        self.params.hbar.powi(2) / (2.0 * self.params.mass * self.bohr_radius.powi(2))
    }

    /// `|u| = hbar / (m a)`.
    pub fn turbulent_speed(&self) -> f64 {
        self.params.hbar / (self.params.mass * self.bohr_radius)
    }

    /// Coulomb potential `-hbar^2 / (m a sqrt(r^2 + s^2))`.
    pub fn coulomb_potential(&self, grid: &Grid, softening: f64) -> Result<ScalarField> {
        let c = -self.params.hbar.powi(2) / (self.params.mass * self.bohr_radius);
        ScalarField::new(
            grid.clone(),
            grid.radius_squared(&[]).iter().map(|r2| c / (r2 + softening * softening).sqrt()).collect(),
        )
    }
}

fn require_3d(grid: &Grid) -> Result<()> {
    if grid.dim() != 3 {
        return Err(Error::Unsupported(format!(
            "hydrogen orbital needs a 3-D grid, got {}-D",
            grid.dim()
        )));
    }
    Ok(())
}

/// Analytic orbital plus closed-form fields and diagnostics. The radius in
/// the singular closed forms is clamped to half the smallest spacing.
pub fn hydrogen_1s_fields(
    setup: &Hydrogen1sSpec,
    grid: &Grid,
) -> Result<(WaveFunction, HydroFields, DiagnosticsBundle)> {
    require_3d(grid)?;
    setup.params.validate()?;
    let a = setup.bohr_radius;
    let (hbar, m) = (setup.params.hbar, setup.params.mass);
    let n = grid.len();
    let r: Vec<f64> = grid.radius_squared(&[]).iter().map(|x| x.sqrt()).collect();
    let r_min = 0.5 * grid.min_spacing();
    let norm = 1.0 / (PI * a * a * a).sqrt();
    let psi = WaveFunction::new(
        grid.clone(),
        r.iter().map(|&x| Complex64::new(norm * (-x / a).exp(), 0.0)).collect(),
    )?;
    let rho = psi.density();
    let speed = setup.turbulent_speed();
    let mut u = vec![vec![0.0; n]; 3];
    for (k, comp) in u.iter_mut().enumerate() {
        let x = grid.coordinate_field(k);
        for i in 0..n {
            if r[i] > 0.0 {
                comp[i] = speed * x[i] / r[i];
            }
        }
    }
    let support = SupportMask::from_density(&rho, DEFAULT_DENSITY_FLOOR);
    let h = HydroFields {
        rho: rho.clone(),
        v: VectorField::zeros(grid),
        u: VectorField::new(grid.clone(), u)?,
        phase: Some(ScalarField::zeros(grid)),
        params: setup.params,
        support,
    };
    let pressure = ScalarField::new(
        grid.clone(),
        (0..n)
            .map(|i| -hbar * hbar / m * rho.values()[i] * (1.0 / (a * a) - 1.0 / (a * r[i].max(r_min))))
            .collect(),
    )?;
    let qpot = ScalarField::new(
        grid.clone(),
        r.iter()
            .map(|&x| -hbar * hbar / (2.0 * m) * (1.0 / (a * a) - 2.0 / (a * x.max(r_min))))
            .collect(),
    )?;
    let eps_val = setup.rydberg();
    let eps = ScalarField::new(
        grid.clone(),
        r.iter().map(|&x| if x > 0.0 { eps_val } else { 0.0 }).collect(),
    )?;
    let stress = madelung::reynolds_stress(&h);
    let diag = DiagnosticsBundle {
        pressure,
        stress,
        internal_energy: eps,
        quantum_potential: qpot,
        correlation: VectorField::zeros(grid),
        intensity: TurbulenceIntensity {
            values: ScalarField::zeros(grid),
            defined: vec![false; n],
        },
    };
    Ok((psi, h, diag))
}

/// Compton-scale quantities for a particle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleReport {
    pub mass: f64,
    pub light_speed: f64,
    pub hbar: f64,
    /// Compton time `hbar / (m c^2)`.
    pub tau_c: f64,
    /// Compton length `hbar / (m c)`, the eddy size.
    pub eddy_length: f64,
    pub particle_size: f64,
    /// `m d < hbar / c`.
    pub quantum_flag: bool,
    /// Eddy length over the Bohr radius.
    pub alpha_ratio: f64,
    pub alpha: f64,
    pub feigenbaum_delta: f64,
    /// `2 pi alpha delta^2`.
    pub numerology: f64,
    /// Classical electron radius `alpha^2 a0`.
    pub classical_electron_radius: f64,
    /// Classical electron radius over the eddy length.
    pub radius_ratio: f64,
}

/// Scales of a particle of `mass` and size `particle_size`, with CODATA
/// values for the remaining constants.
pub fn scales(mass: f64, particle_size: f64, light_speed: f64) -> Result<ScaleReport> {
    scales_with(mass, particle_size, light_speed, codata::HBAR, codata::BOHR_RADIUS)
}

pub fn scales_with(mass: f64, particle_size: f64, light_speed: f64, hbar: f64, bohr_radius: f64) -> Result<ScaleReport> {
    for (name, v) in [
        ("mass", mass),
        ("light_speed", light_speed),
        ("hbar", hbar),
        ("bohr_radius", bohr_radius),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(particle_size.is_finite() && particle_size >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "particle_size must be non-negative, got {particle_size}"
        )));
    }
    let eddy = hbar / (mass * light_speed);
    let alpha = codata::ALPHA;
    let re = alpha * alpha * codata::BOHR_RADIUS;
    Ok(ScaleReport {
        mass,
        light_speed,
        hbar,
        tau_c: hbar / (mass * light_speed * light_speed),
        eddy_length: eddy,
        particle_size,
        quantum_flag: mass * particle_size < hbar / light_speed,
        alpha_ratio: eddy / bohr_radius,
        alpha,
        feigenbaum_delta: FEIGENBAUM_DELTA,
        numerology: 2.0 * PI * alpha * FEIGENBAUM_DELTA * FEIGENBAUM_DELTA,
        classical_electron_radius: re,
        radius_ratio: re / eddy,
    })
}

/// Electron defaults: CODATA mass and light speed, point-like size.
pub fn electron_scales() -> ScaleReport {
    scales(codata::ELECTRON_MASS, 0.0, codata::LIGHT_SPEED).expect("CODATA constants are positive")
}
