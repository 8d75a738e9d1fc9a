//! Wavefunction to hydrodynamic fields and the turbulence diagnostics built
//! on them.
//!
//! Division by the density only happens on the support mask. Derivatives of
//! masked quantities are taken in flux form (differentiate `rho * f`, subtract
//! `f * grad rho`) so that the hard mask edge is never differentiated.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::calculus::{
    self, derivative, derivative_complex, divergence, gradient, integrate_values, laplacian_values,
};
use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField, SymmetricTensorField, VectorField, WaveFunction};
use crate::grid::Grid;
use crate::params::PhysicalParams;
use crate::spectral;

pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-10;
pub const MAX_MASKED_MASS: f64 = 0.5;
pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-6;
pub const INTENSITY_FLOOR: f64 = 1e-12;
pub const DEFAULT_CURL_TOLERANCE: f64 = 1e-6;

/// Grid points where the density exceeds `floor * max rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMask {
    inside: Vec<bool>,
    threshold: f64,
    masked_mass: f64,
}

impl SupportMask {
    pub fn from_density(rho: &ScalarField, floor: f64) -> Self {
        let threshold = floor * rho.max().max(0.0);
        let inside: Vec<bool> = rho.values().iter().map(|&r| r > threshold).collect();
        let outside: Vec<f64> = rho
            .values()
            .iter()
            .zip(&inside)
            .map(|(&r, &i)| if i { 0.0 } else { r.max(0.0) })
            .collect();
        let total = integrate_values(rho.grid(), &rho.values().iter().map(|r| r.max(0.0)).collect::<Vec<_>>());
        let masked = integrate_values(rho.grid(), &outside);
        SupportMask {
            inside,
            threshold,
            masked_mass: if total > 0.0 { masked / total } else { 1.0 },
        }
    }

    pub fn full(grid: &Grid) -> Self {
        SupportMask {
            inside: vec![true; grid.len()],
            threshold: 0.0,
            masked_mass: 0.0,
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.inside[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_full(&self) -> bool {
        self.inside.iter().all(|&b| b)
    }

    pub fn masked_points(&self) -> usize {
        self.inside.iter().filter(|&&b| !b).count()
    }

    /// Share of the probability mass lying outside the mask.
    pub fn masked_mass_fraction(&self) -> f64 {
        self.masked_mass
    }

    fn check(&self) -> Result<()> {
        if self.masked_mass > MAX_MASKED_MASS {
            return Err(Error::MaskTooLarge {
                fraction: self.masked_mass,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapOptions {
    /// Relative density floor defining the support mask.
    pub density_floor: f64,
    pub norm_tolerance: f64,
    /// Relative curl magnitude above which a flow counts as rotational.
    pub curl_tolerance: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            density_floor: DEFAULT_DENSITY_FLOOR,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
            curl_tolerance: DEFAULT_CURL_TOLERANCE,
        }
    }
}

/// Madelung fields of one time slice.
#[derive(Clone, Debug)]
pub struct HydroFields {
    pub rho: ScalarField,
    /// Mean hydrodynamic velocity.
    pub v: VectorField,
    /// Turbulent (osmotic) velocity.
    pub u: VectorField,
    /// Action, present only for potential flows on a full support.
    pub phase: Option<ScalarField>,
    pub params: PhysicalParams,
    pub support: SupportMask,
}

impl HydroFields {
    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// `rho * f` for a masked component, zero off the support.
    fn weighted(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(self.rho.values()).map(|(a, r)| a * r).collect()
    }

    /// `rho * div v` in flux form.
    pub fn rho_div_v(&self) -> Vec<f64> {
        let g = self.grid();
        let grad_rho = gradient(&self.rho);
        let mut out = vec![0.0; g.len()];
        for k in 0..g.dim() {
            let flux = derivative(&self.weighted(self.v.component(k)), g, k, 1);
            for i in 0..g.len() {
                out[i] += flux[i] - self.v.component(k)[i] * grad_rho.component(k)[i];
            }
        }
        out
    }
}

/// Complex velocity route: `w = -i hbar grad psi / (m psi)`, `v = Re w`,
/// `u = Im w` on the support.
pub fn wavefunction_to_fields(psi: &WaveFunction, params: &PhysicalParams) -> Result<HydroFields> {
    wavefunction_to_fields_with(psi, params, &MapOptions::default())
}

pub fn wavefunction_to_fields_with(
    psi: &WaveFunction,
    params: &PhysicalParams,
    opts: &MapOptions,
) -> Result<HydroFields> {
    params.validate()?;
    psi.check_normalized(opts.norm_tolerance)?;
    let g = psi.grid();
    let rho = psi.density();
    let support = SupportMask::from_density(&rho, opts.density_floor);
    support.check()?;
    let hm = params.hbar / params.mass;
    let mut v = vec![vec![0.0; g.len()]; g.dim()];
    let mut u = vec![vec![0.0; g.len()]; g.dim()];
    for k in 0..g.dim() {
        let dpsi = derivative_complex(psi.values(), g, k, 1);
        for i in 0..g.len() {
            if support.contains(i) {
                let z = psi.values()[i];
                let w = Complex64::new(0.0, -hm) * z.conj() * dpsi[i] / z.norm_sqr();
                v[k][i] = w.re;
                u[k][i] = w.im;
            }
        }
    }
    let v = VectorField::new(g.clone(), v)?;
    let u = VectorField::new(g.clone(), u)?;
    let phase = if support.is_full() {
        phase_from_velocity_with(&v, params, opts.curl_tolerance).ok()
    } else {
        None
    };
    Ok(HydroFields {
        rho,
        v,
        u,
        phase,
        params: *params,
        support,
    })
}

/// Fick route: `u = -(hbar/2m) grad rho / rho` on the support.
pub fn turbulent_velocity(rho: &ScalarField, params: &PhysicalParams) -> Result<(VectorField, SupportMask)> {
    turbulent_velocity_with(rho, params, DEFAULT_DENSITY_FLOOR)
}

pub fn turbulent_velocity_with(
    rho: &ScalarField,
    params: &PhysicalParams,
    floor: f64,
) -> Result<(VectorField, SupportMask)> {
    params.validate()?;
    if rho.min() < 0.0 {
        return Err(Error::InvalidField("density must be non-negative".into()));
    }
    let support = SupportMask::from_density(rho, floor);
    let d = params.diffusivity();
    let grad = gradient(rho);
    let comps = grad
        .into_components()
        .into_iter()
        .map(|c| {
            c.iter()
                .zip(rho.values())
                .enumerate()
                .map(|(i, (dr, r))| if support.contains(i) { -d * dr / r } else { 0.0 })
                .collect()
        })
        .collect();
    Ok((VectorField::new(rho.grid().clone(), comps)?, support))
}

/// Nonlocal pressure `-(hbar^2/4m) lap rho`.
pub fn pressure(rho: &ScalarField, params: &PhysicalParams) -> ScalarField {
    let c = -params.hbar * params.hbar / (4.0 * params.mass);
    let lap = laplacian_values(rho.values(), rho.grid());
    ScalarField::from_parts(rho.grid().clone(), lap.into_iter().map(|x| c * x).collect())
}

/// Fourier-space form `p_k = m rho_k (hbar k / 2m)^2` on a periodic grid.
pub fn pressure_fourier(rho: &ScalarField, params: &PhysicalParams) -> Result<ScalarField> {
    let s = spectral::spectral_transform(rho)?;
    let g = rho.grid();
    let mut data = s.coefficients().to_vec();
    for (z, k2) in data.iter_mut().zip(spectral::wavenumber_squared(g)) {
        let phase_speed2 = (params.hbar / (2.0 * params.mass)).powi(2) * k2;
        *z *= params.mass * phase_speed2;
    }
    spectral::fft_nd(&mut data, g, true);
    ScalarField::new(g.clone(), data.into_iter().map(|z| z.re).collect())
}

/// Bohm potential `-hbar^2 lap sqrt(rho) / (2m sqrt(rho))` on the support,
/// zero elsewhere.
pub fn quantum_potential(rho: &ScalarField, params: &PhysicalParams) -> Result<ScalarField> {
    let support = SupportMask::from_density(rho, DEFAULT_DENSITY_FLOOR);
    Ok(quantum_potential_masked(rho, params, &support))
}

pub fn quantum_potential_masked(rho: &ScalarField, params: &PhysicalParams, support: &SupportMask) -> ScalarField {
    let sq: Vec<f64> = rho.values().iter().map(|r| r.max(0.0).sqrt()).collect();
    let lap = laplacian_values(&sq, rho.grid());
    let c = -params.hbar * params.hbar / (2.0 * params.mass);
    let q = lap
        .iter()
        .zip(&sq)
        .enumerate()
        .map(|(i, (l, s))| if support.contains(i) { c * l / s } else { 0.0 })
        .collect();
    ScalarField::from_parts(rho.grid().clone(), q)
}

/// Bohm potential with the density clamped below at `floor`; defined at
/// every node. Used by the hydrodynamic stepper.
pub(crate) fn quantum_potential_floored(rho: &[f64], grid: &Grid, params: &PhysicalParams, floor: f64) -> Vec<f64> {
    let sq: Vec<f64> = rho.iter().map(|r| r.max(floor).sqrt()).collect();
    let lap = laplacian_values(&sq, grid);
    let c = -params.hbar * params.hbar / (2.0 * params.mass);
    lap.iter().zip(&sq).map(|(l, s)| c * l / s).collect()
}

/// Reynolds stress `m rho u u`.
pub fn reynolds_stress(h: &HydroFields) -> SymmetricTensorField {
    let g = h.grid();
    let mut t = SymmetricTensorField::zeros(g);
    for i in 0..g.dim() {
        for j in i..g.dim() {
            let (ui, uj) = (h.u.component(i), h.u.component(j));
            let c = t.component_mut(i, j);
            for p in 0..g.len() {
                c[p] = h.params.mass * h.rho.values()[p] * ui[p] * uj[p];
            }
        }
    }
    t
}

/// Turbulent kinetic energy per unit mass density, `m |u|^2 / 2`.
pub fn internal_energy(h: &HydroFields) -> ScalarField {
    let m = h.params.mass;
    let vals = (0..h.grid().len())
        .map(|i| {
            let u = h.u.at(i);
            0.5 * m * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
        })
        .collect();
    ScalarField::from_parts(h.grid().clone(), vals)
}

/// `eps + p / rho` on the support, zero elsewhere.
pub fn enthalpy(h: &HydroFields, pressure: &ScalarField) -> Result<ScalarField> {
    same_grid(h.grid(), pressure.grid())?;
    let eps = internal_energy(h);
    let vals = (0..h.grid().len())
        .map(|i| {
            if h.support.contains(i) {
                eps.values()[i] + pressure.values()[i] / h.rho.values()[i]
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::new(h.grid().clone(), vals)
}

/// `C = -rho u (hbar/2) div v`.
pub fn pressure_velocity_correlation(h: &HydroFields) -> VectorField {
    let rdv = h.rho_div_v();
    let c = -0.5 * h.params.hbar;
    let comps = h
        .u
        .components()
        .iter()
        .map(|u| u.iter().zip(&rdv).map(|(a, b)| c * a * b).collect())
        .collect();
    VectorField::from_parts(h.grid().clone(), comps)
}

/// `|u| / |v|` with a definedness flag per node.
#[derive(Clone, Debug)]
pub struct TurbulenceIntensity {
    /// Zero where undefined.
    pub values: ScalarField,
    pub defined: Vec<bool>,
}

impl TurbulenceIntensity {
    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|&&b| b).count()
    }

    /// Smallest and largest value over defined nodes.
    pub fn range(&self) -> Option<(f64, f64)> {
        let mut it = self
            .values
            .values()
            .iter()
            .zip(&self.defined)
            .filter(|(_, &d)| d)
            .map(|(v, _)| *v);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }
}

pub fn turbulence_intensity(h: &HydroFields) -> TurbulenceIntensity {
    let vmag = h.v.magnitude();
    let umag = h.u.magnitude();
    let cut = INTENSITY_FLOOR * vmag.max_abs();
    let mut defined = vec![false; h.grid().len()];
    let mut vals = vec![0.0; h.grid().len()];
    for i in 0..vals.len() {
        let vm = vmag.values()[i];
        if h.support.contains(i) && vm > 0.0 && vm >= cut {
            defined[i] = true;
            vals[i] = umag.values()[i] / vm;
        }
    }
    TurbulenceIntensity {
        values: ScalarField::from_parts(h.grid().clone(), vals),
        defined,
    }
}

/// Pointwise residual of the viscous stress closure
/// `div(p I + m rho u u) - div(hbar rho grad u / 2)`.
#[derive(Clone, Debug)]
pub struct ClosureResidual {
    /// Euclidean norm of the residual vector, zero off the support.
    pub residual: ScalarField,
    /// Norm of the viscous side at each node, for relative comparisons.
    pub reference: ScalarField,
}

pub fn stress_closure_residual(h: &HydroFields, pressure: &ScalarField) -> Result<ClosureResidual> {
    same_grid(h.grid(), pressure.grid())?;
    let g = h.grid();
    let d = g.dim();
    let n = g.len();
    let m = h.params.mass;
    let grad_p = gradient(pressure);
    let grad_rho = gradient(&h.rho);
    let rho_u: Vec<Vec<f64>> = (0..d).map(|k| h.weighted(h.u.component(k))).collect();
    let mut lhs = vec![vec![0.0; n]; d];
    let mut rhs = vec![vec![0.0; n]; d];
    for i in 0..d {
        lhs[i].copy_from_slice(grad_p.component(i));
        for j in 0..d {
            let uj = h.u.component(j);
            let flux: Vec<f64> = rho_u[i].iter().zip(uj).map(|(a, b)| m * a * b).collect();
            for (l, x) in lhs[i].iter_mut().zip(derivative(&flux, g, j, 1)) {
                *l += x;
            }
            // rho d_j u_i = d_j(rho u_i) - u_i d_j rho
            let dj = derivative(&rho_u[i], g, j, 1);
            let visc: Vec<f64> = (0..n)
                .map(|p| 0.5 * h.params.hbar * (dj[p] - h.u.component(i)[p] * grad_rho.component(j)[p]))
                .collect();
            for (r, x) in rhs[i].iter_mut().zip(derivative(&visc, g, j, 1)) {
                *r += x;
            }
        }
    }
    let mut res = vec![0.0; n];
    let mut refv = vec![0.0; n];
    for p in 0..n {
        if h.support.contains(p) {
            res[p] = (0..d).map(|i| (lhs[i][p] - rhs[i][p]).powi(2)).sum::<f64>().sqrt();
            refv[p] = (0..d).map(|i| rhs[i][p].powi(2)).sum::<f64>().sqrt();
        }
    }
    Ok(ClosureResidual {
        residual: ScalarField::new(g.clone(), res)?,
        reference: ScalarField::new(g.clone(), refv)?,
    })
}

/// `rho u + (hbar/2m) grad rho` on the support.
pub fn fick_residual(h: &HydroFields) -> VectorField {
    let grad_rho = gradient(&h.rho);
    let dcoef = h.params.diffusivity();
    let comps = (0..h.grid().dim())
        .map(|k| {
            (0..h.grid().len())
                .map(|i| {
                    if h.support.contains(i) {
                        h.rho.values()[i] * h.u.component(k)[i] + dcoef * grad_rho.component(k)[i]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    VectorField::from_parts(h.grid().clone(), comps)
}

/// `psi = sqrt(rho) exp(i S / hbar)`.
pub fn fields_to_wavefunction(rho: &ScalarField, phase: &ScalarField, params: &PhysicalParams) -> Result<WaveFunction> {
    same_grid(rho.grid(), phase.grid())?;
    params.validate()?;
    if rho.min() < 0.0 {
        return Err(Error::InvalidField("density must be non-negative".into()));
    }
    let vals = rho
        .values()
        .iter()
        .zip(phase.values())
        .map(|(r, s)| Complex64::from_polar(r.sqrt(), s / params.hbar))
        .collect();
    WaveFunction::new(rho.grid().clone(), vals)
}

/// Action `S` with `grad S = m v`, vanishing at the grid's first node.
///
/// Fully periodic grids invert the gradient spectrally (the uniform part of
/// `v` gives a linear ramp); fully bounded grids integrate along coordinate
/// paths with the trapezoid rule. Rotational flows are rejected.
pub fn phase_from_velocity(v: &VectorField, params: &PhysicalParams) -> Result<ScalarField> {
    phase_from_velocity_with(v, params, DEFAULT_CURL_TOLERANCE)
}

pub fn phase_from_velocity_with(v: &VectorField, params: &PhysicalParams, curl_tolerance: f64) -> Result<ScalarField> {
    params.validate()?;
    let g = v.grid();
    if g.dim() > 1 {
        let curl = calculus::max_curl(v);
        let scale = v.max_magnitude() * g.max_wavenumber();
        if curl > curl_tolerance * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NonPotentialFlow { max_curl: curl });
        }
    }
    let m = params.mass;
    let mut s = if g.is_periodic() {
        periodic_potential(v, m)
    } else if g.axes().iter().all(|a| !a.periodic) {
        path_potential(v, m)
    } else {
        return Err(Error::Unsupported(
            "phase reconstruction on mixed periodic/bounded grids".into(),
        ));
    };
    let s0 = s[0];
    for x in &mut s {
        *x -= s0;
    }
    ScalarField::new(g.clone(), s)
}

fn periodic_potential(v: &VectorField, m: f64) -> Vec<f64> {
    let g = v.grid();
    let (mut out, mean) = periodic_potential_parts(v, m);
    for k in 0..g.dim() {
        let origin = g.axis(k).origin;
        for (o, x) in out.iter_mut().zip(g.coordinate_field(k)) {
            *o += m * mean[k] * (x - origin);
        }
    }
    out
}

/// Splits `m v` into a uniform part and the gradient of a periodic
/// potential. Returns the potential and the uniform velocity.
pub(crate) fn periodic_potential_parts(v: &VectorField, m: f64) -> (Vec<f64>, [f64; 3]) {
    let g = v.grid();
    let n = g.len();
    let ks: Vec<Vec<f64>> = g.axes().iter().map(spectral::wavenumbers).collect();
    let nyq: Vec<Option<usize>> = g.axes().iter().map(|a| spectral::nyquist_index(a.points)).collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut means = [0.0; 3];
    for k in 0..g.dim() {
        let comp = v.component(k);
        let mean = comp.iter().sum::<f64>() / n as f64;
        means[k] = mean;
        let mut data: Vec<Complex64> = comp.iter().map(|&c| Complex64::new(c - mean, 0.0)).collect();
        spectral::fft_nd(&mut data, g, false);
        for (idx, z) in data.iter().enumerate() {
            let mi = g.unflatten(idx);
            if (0..g.dim()).any(|a| nyq[a] == Some(mi[a])) {
                continue;
            }
            let k2: f64 = (0..g.dim()).map(|a| ks[a][mi[a]].powi(2)).sum();
            if k2 > 0.0 {
                // S_k = -i m (k . v_k) / |k|^2
                acc[idx] += Complex64::new(0.0, -m * ks[k][mi[k]] / k2) * z;
            }
        }
    }
    spectral::fft_nd(&mut acc, g, true);
    (acc.into_iter().map(|z| z.re).collect(), means)
}

fn path_potential(v: &VectorField, m: f64) -> Vec<f64> {
    let g = v.grid();
    let mut s = vec![0.0; g.len()];
    // Integrate along axis k for nodes whose later coordinates are zero,
    // starting from the already integrated hyperplane.
    for k in 0..g.dim() {
        let stride = g.stride(k);
        let h = g.axis(k).spacing;
        for idx in 0..g.len() {
            let mi = g.unflatten(idx);
            if mi[k] == 0 || (k + 1..g.dim()).any(|a| mi[a] != 0) {
                continue;
            }
            let prev = idx - stride;
            s[idx] = s[prev] + 0.5 * h * m * (v.component(k)[prev] + v.component(k)[idx]);
        }
    }
    s
}

/// Kinetic energy split into laminar, turbulent and operator parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticSplit {
    pub laminar: f64,
    pub turbulent: f64,
    pub operator_total: f64,
}

impl KineticSplit {
    pub fn relative_residual(&self) -> f64 {
        (self.laminar + self.turbulent - self.operator_total).abs() / self.operator_total.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn kinetic_energy_split(psi: &WaveFunction, params: &PhysicalParams) -> Result<KineticSplit> {
    let h = wavefunction_to_fields(psi, params)?;
    let g = psi.grid();
    let m = params.mass;
    let mut lam = vec![0.0; g.len()];
    let mut turb = vec![0.0; g.len()];
    let mut op = vec![0.0; g.len()];
    for k in 0..g.dim() {
        let dpsi = derivative_complex(psi.values(), g, k, 1);
        for i in 0..g.len() {
            let r = h.rho.values()[i];
            lam[i] += 0.5 * m * r * h.v.component(k)[i].powi(2);
            turb[i] += 0.5 * m * r * h.u.component(k)[i].powi(2);
            op[i] += params.hbar * params.hbar / (2.0 * m) * dpsi[i].norm_sqr();
        }
    }
    Ok(KineticSplit {
        laminar: integrate_values(g, &lam),
        turbulent: integrate_values(g, &turb),
        operator_total: integrate_values(g, &op),
    })
}

/// `<m u . r>` with `r` measured from the coordinate origin.
pub fn heisenberg_moment(h: &HydroFields) -> f64 {
    let g = h.grid();
    let vals: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            let u = h.u.at(i);
            h.params.mass * h.rho.values()[i] * (0..g.dim()).map(|k| u[k] * x[k]).sum::<f64>()
        })
        .collect();
    integrate_values(g, &vals)
}

/// Both sides of `int C = -(hbar^2/4m) <grad div v>`, componentwise.
pub fn correlation_integral_check(h: &HydroFields) -> (Vec<f64>, Vec<f64>) {
    let g = h.grid();
    let c = pressure_velocity_correlation(h);
    let lhs: Vec<f64> = c.components().iter().map(|x| integrate_values(g, x)).collect();
    let rdv = h.rho_div_v();
    let div: Vec<f64> = rdv
        .iter()
        .zip(h.rho.values())
        .enumerate()
        .map(|(i, (a, r))| if h.support.contains(i) { a / r } else { 0.0 })
        .collect();
    let grad_rho = gradient(&h.rho);
    let coef = -h.params.hbar * h.params.hbar / (4.0 * h.params.mass);
    // rho grad(div) = grad(rho div) - div grad rho
    let rhs = (0..g.dim())
        .map(|k| {
            let d = derivative(&rdv, g, k, 1);
            let vals: Vec<f64> = (0..g.len()).map(|i| d[i] - div[i] * grad_rho.component(k)[i]).collect();
            coef * integrate_values(g, &vals)
        })
        .collect();
    (lhs, rhs)
}

/// All turbulence diagnostics of one slice.
#[derive(Clone, Debug)]
pub struct DiagnosticsBundle {
    pub pressure: ScalarField,
    pub stress: SymmetricTensorField,
    pub internal_energy: ScalarField,
    pub quantum_potential: ScalarField,
    pub correlation: VectorField,
    pub intensity: TurbulenceIntensity,
}

pub fn diagnostics(h: &HydroFields) -> DiagnosticsBundle {
    DiagnosticsBundle {
        pressure: pressure(&h.rho, &h.params),
        stress: reynolds_stress(h),
        internal_energy: internal_energy(h),
        quantum_potential: quantum_potential_masked(&h.rho, &h.params, &h.support),
        correlation: pressure_velocity_correlation(h),
        intensity: turbulence_intensity(h),
    }
}

/// Largest `|a - b|` over nodes where `region` is set.
pub fn max_abs_diff(a: &[f64], b: &[f64], region: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(region)
        .filter(|(_, &r)| r)
        .fold(0.0, |m, ((x, y), _)| m.max((x - y).abs()))
}

/// Largest `|a|` over nodes where `region` is set.
pub fn max_abs_on(a: &[f64], region: &[bool]) -> f64 {
    a.iter().zip(region).filter(|(_, &r)| r).fold(0.0, |m, (x, _)| m.max(x.abs()))
}

/// Scalar summary of a diagnostics bundle: integrals, averages and identity
/// residuals, keyed by stable names.
pub fn scalar_summary(h: &HydroFields, d: &DiagnosticsBundle) -> Result<BTreeMap<String, f64>> {
    let g = h.grid();
    let mask = h.support.as_slice();
    let mut s = BTreeMap::new();
    s.insert("norm".into(), calculus::integrate(&h.rho));
    s.insert("masked_points".into(), h.support.masked_points() as f64);
    s.insert("masked_mass_fraction".into(), h.support.masked_mass_fraction());
    s.insert("pressure_integral".into(), calculus::integrate(&d.pressure));
    let pabs: Vec<f64> = d.pressure.values().iter().map(|p| p.abs()).collect();
    s.insert("pressure_abs_integral".into(), integrate_values(g, &pabs));
    s.insert("mean_internal_energy".into(), calculus::density_average(&d.internal_energy, &h.rho)?);
    s.insert("mean_quantum_potential".into(), calculus::density_average(&d.quantum_potential, &h.rho)?);
    s.insert("heisenberg_moment".into(), heisenberg_moment(h));
    let enth = enthalpy(h, &d.pressure)?;
    s.insert(
        "enthalpy_residual_max".into(),
        max_abs_diff(enth.values(), d.quantum_potential.values(), mask),
    );
    s.insert("quantum_potential_max".into(), max_abs_on(d.quantum_potential.values(), mask));
    let fick = fick_residual(h);
    s.insert("fick_residual_max".into(), fick.max_magnitude());
    let closure = stress_closure_residual(h, &d.pressure)?;
    s.insert("closure_residual_max".into(), closure.residual.max_abs());
    s.insert("closure_reference_max".into(), closure.reference.max_abs());
    s.insert("stress_min_principal_minor".into(), d.stress.min_principal_minor());
    let (lhs, rhs) = correlation_integral_check(h);
    for (k, (a, b)) in lhs.iter().zip(&rhs).enumerate() {
        s.insert(format!("correlation_integral_{k}"), *a);
        s.insert(format!("correlation_integral_expected_{k}"), *b);
    }
    if let Some((lo, hi)) = d.intensity.range() {
        s.insert("intensity_min".into(), lo);
        s.insert("intensity_max".into(), hi);
    }
    s.insert("intensity_defined_points".into(), d.intensity.defined_count() as f64);
    let div_v = divergence(&h.v);
    s.insert("max_abs_div_v".into(), max_abs_on(div_v.values(), mask));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian_psi(grid: &Grid, sigma: f64, k0: f64) -> WaveFunction {
        let d = grid.dim() as f64;
        let norm = (2.0 * PI * sigma * sigma).powf(-d / 4.0);
        WaveFunction::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            Complex64::from_polar(norm * (-r2 / (4.0 * sigma * sigma)).exp(), k0 * x[0])
        })
        .unwrap()
    }

    #[test]
    fn plane_wave_has_uniform_velocity_and_no_turbulence() {
        let l = 10.0;
        let g = Grid::periodic_cube(1, 32, l).unwrap();
        let k = 2.0 * PI * 3.0 / l;
        let psi = WaveFunction::from_fn(&g, |x| Complex64::from_polar(l.powf(-0.5), k * x[0])).unwrap();
        let h = wavefunction_to_fields(&psi, &PhysicalParams::default()).unwrap();
        assert!(h.v.component(0).iter().all(|v| (v - k).abs() < 1e-12));
        assert!(h.u.max_magnitude() < 1e-12);
        let s = h.phase.as_ref().unwrap();
        let back = fields_to_wavefunction(&h.rho, s, &PhysicalParams::default()).unwrap();
        let h2 = wavefunction_to_fields(&back, &PhysicalParams::default()).unwrap();
        assert!(max_abs_diff(h.v.component(0), h2.v.component(0), h.support.as_slice()) < 1e-8);
    }

    #[test]
    fn fick_velocity_of_unit_gaussian_is_half_x() {
        let g = Grid::periodic_cube(1, 128, 30.0).unwrap();
        let rho = ScalarField::from_fn(&g, |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * PI).sqrt()).unwrap();
        let (u, mask) = turbulent_velocity(&rho, &PhysicalParams::default()).unwrap();
        for i in 0..g.len() {
            if mask.contains(i) && rho.values()[i] > 1e-6 {
                assert!((u.component(0)[i] - g.point(i)[0] / 2.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn pressure_of_unit_gaussian_matches_closed_form() {
        let g = Grid::periodic_cube(1, 128, 30.0).unwrap();
        let rho = ScalarField::from_fn(&g, |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * PI).sqrt()).unwrap();
        let p = pressure(&rho, &PhysicalParams::default());
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert!((p.values()[i] + 0.25 * (x * x - 1.0) * rho.values()[i]).abs() < 1e-12);
        }
        assert!(calculus::integrate(&p).abs() < 1e-10);
        let pf = pressure_fourier(&rho, &PhysicalParams::default()).unwrap();
        assert!(max_abs_diff(p.values(), pf.values(), &vec![true; g.len()]) < 1e-14);
    }

    #[test]
    fn uniform_density_has_no_pressure_potential_or_enthalpy() {
        let g = Grid::periodic_cube(2, 16, 4.0).unwrap();
        let psi = WaveFunction::from_fn(&g, |_| Complex64::new(0.25, 0.0)).unwrap();
        let h = wavefunction_to_fields(&psi, &PhysicalParams::default()).unwrap();
        let d = diagnostics(&h);
        assert!(d.pressure.max_abs() < 1e-14);
        assert!(d.quantum_potential.max_abs() < 1e-14);
        assert!(enthalpy(&h, &d.pressure).unwrap().max_abs() < 1e-14);
        assert_eq!(d.intensity.defined_count(), 0);
    }

    #[test]
    fn rotational_flow_is_rejected() {
        let g = Grid::periodic_cube(2, 32, 2.0 * PI).unwrap();
        let v = VectorField::from_fn(&g, |x| [x[1].sin(), -x[0].sin(), 0.0]).unwrap();
        match phase_from_velocity(&v, &PhysicalParams::default()) {
            Err(Error::NonPotentialFlow { max_curl }) => assert!(max_curl > 1.0),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn bounded_path_integration_recovers_quadratic_phase() {
        let g = Grid::bounded_cube(2, 41, -1.0, 1.0).unwrap();
        let v = VectorField::from_fn(&g, |x| [2.0 * x[0], 2.0 * x[1], 0.0]).unwrap();
        let s = phase_from_velocity(&v, &PhysicalParams::default()).unwrap();
        for i in 0..g.len() {
            let x = g.point(i);
            let exact = x[0] * x[0] + x[1] * x[1] - 2.0;
            assert!((s.values()[i] - exact).abs() < 1e-3);
        }
    }

    #[test]
    fn too_much_masked_mass_fails() {
        let g = Grid::periodic_cube(1, 32, 10.0).unwrap();
        let psi = WaveFunction::from_fn(&g, |x| {
            let r = if x[0].abs() < 1e-9 { 1.0 } else { 1e-8 };
            Complex64::new(r, 0.0)
        })
        .unwrap()
        .normalized()
        .unwrap();
        let opts = MapOptions {
            density_floor: 0.9,
            ..MapOptions::default()
        };
        let r = wavefunction_to_fields_with(&psi, &PhysicalParams::default(), &opts);
        assert!(r.is_ok());
        let opts = MapOptions {
            density_floor: 1.5,
            ..MapOptions::default()
        };
        assert!(matches!(
            wavefunction_to_fields_with(&psi, &PhysicalParams::default(), &opts),
            Err(Error::MaskTooLarge { .. })
        ));
    }

    #[test]
    fn moving_gaussian_identities() {
        let g = Grid::periodic_cube(2, 64, 24.0).unwrap();
        let psi = gaussian_psi(&g, 1.3, 0.7);
        let p = PhysicalParams::default();
        let h = wavefunction_to_fields(&psi, &p).unwrap();
        let d = diagnostics(&h);
        let mask = h.support.as_slice();
        let enth = enthalpy(&h, &d.pressure).unwrap();
        let qmax = max_abs_on(d.quantum_potential.values(), mask);
        // division by rho amplifies FFT round-off in the far tails
        let core: Vec<bool> = h.rho.values().iter().map(|&r| r > 1e-6 * h.rho.max()).collect();
        assert!(max_abs_diff(enth.values(), d.quantum_potential.values(), &core) < 1e-7 * qmax);
        let split = kinetic_energy_split(&psi, &p).unwrap();
        assert!(split.relative_residual() < 1e-8);
        assert!((heisenberg_moment(&h) - 1.0).abs() < 1e-8);
        assert!(d.stress.min_principal_minor() > -1e-15);
    }
}
