//! Stochastic tracer particles driven by the hydrodynamic fields.
//!
//! A consistency demonstration of the diffusive picture, not a derivation of
//! the underlying dynamics: tracers follow the Euler–Maruyama discretization
//! of
//!
//! `dR = b(R, t) dt + sqrt(hbar/m) dW`,  `b = v~ - u~ = v~ + (hbar/2m) grad ln rho`,
//!
//! whose Fokker–Planck equation with diffusivity `hbar/2m` keeps `rho`
//! invariant for a stationary state. The opposite sign is available through
//! [`DriftConvention::Reversed`] for comparison.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField, VectorField};
use crate::grid::{Grid, MAX_DIM};
use crate::madelung::HydroFields;

pub const TRACER_CSV_SIGNATURE: &str = "# QHDTURB-TRACER-01 csv";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DriftConvention {
    /// `b = v~ - u~`, stationary for the Fokker–Planck equation.
    #[default]
    Forward,
    /// `b = v~ + u~`
    Reversed,
}

/// Drift sampled on the grid together with the cells it may be trusted in.
#[derive(Clone, Debug)]
pub struct DriftField {
    drift: VectorField,
    support: Vec<bool>,
    noise: f64,
}

impl DriftField {
    pub fn new(h: &HydroFields, convention: DriftConvention) -> Self {
        let g = h.grid();
        let sign = match convention {
            DriftConvention::Forward => -1.0,
            DriftConvention::Reversed => 1.0,
        };
        let support = h.support.as_slice().to_vec();
        let comps = (0..g.dim())
            .map(|k| {
                h.v.component(k)
                    .iter()
                    .zip(h.u.component(k))
                    .zip(&support)
                    .map(|((v, u), &s)| if s { v + sign * u } else { 0.0 })
                    .collect()
            })
            .collect();
        DriftField {
            drift: VectorField::from_parts(g.clone(), comps),
            support,
            noise: (h.params.hbar / h.params.mass).sqrt(),
        }
    }

    pub fn field(&self) -> &VectorField {
        &self.drift
    }

    /// Multilinear interpolation at `x`; `None` if any corner is masked.
    fn sample(&self, x: &[f64]) -> Option<[f64; MAX_DIM]> {
        let g = self.drift.grid();
        let d = g.dim();
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..d {
            let a = g.axis(k);
            let s = (x[k] - a.origin) / a.spacing;
            let f = s.floor();
            if a.periodic {
                let i = (f as i64).rem_euclid(a.points as i64) as usize;
                lo[k] = i;
                hi[k] = (i + 1) % a.points;
                frac[k] = s - f;
            } else {
                let i = (f.max(0.0) as usize).min(a.points - 2);
                lo[k] = i;
                hi[k] = i + 1;
                frac[k] = (s - i as f64).clamp(0.0, 1.0);
            }
        }
        let mut out = [0.0; MAX_DIM];
        for corner in 0..(1usize << d) {
            let mut idx = 0;
            let mut w = 1.0;
            for k in 0..d {
                let up = corner >> k & 1 == 1;
                idx += g.stride(k) * if up { hi[k] } else { lo[k] };
                w *= if up { frac[k] } else { 1.0 - frac[k] };
            }
            if !self.support[idx] {
                return None;
            }
            for (k, o) in out.iter_mut().enumerate().take(d) {
                *o += w * self.drift.component(k)[idx];
            }
        }
        Some(out)
    }
}

#[derive(Clone, Debug)]
pub struct TracerEnsemble {
    grid: Grid,
    positions: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    seed: u64,
    time: f64,
    steps: u64,
    reflections: u64,
    masked_steps: u64,
}

fn particle_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

impl TracerEnsemble {
    /// Ensemble at explicit positions (row-major, `dim` coordinates each).
    pub fn new(grid: &Grid, positions: Vec<f64>, seed: u64) -> Result<Self> {
        let d = grid.dim();
        if positions.is_empty() || !positions.len().is_multiple_of(d) {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates do not form {d}-dimensional positions",
                positions.len()
            )));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite tracer position".into()));
        }
        let n = positions.len() / d;
        let mut e = TracerEnsemble {
            grid: grid.clone(),
            positions,
            rngs: (0..n).map(|i| particle_rng(seed, i)).collect(),
            seed,
            time: 0.0,
            steps: 0,
            reflections: 0,
            masked_steps: 0,
        };
        for p in 0..n {
            let (x, count) = confine(&e.grid, &e.positions[p * d..(p + 1) * d]);
            e.positions[p * d..(p + 1) * d].copy_from_slice(&x[..d]);
            e.reflections += count;
        }
        Ok(e)
    }

    /// `count` particles all at `x`.
    pub fn at_point(grid: &Grid, x: &[f64], count: usize, seed: u64) -> Result<Self> {
        let d = grid.dim();
        if x.len() != d {
            return Err(Error::InvalidParameter(format!("point has {} coordinates, grid has {d}", x.len())));
        }
        TracerEnsemble::new(grid, x.repeat(count), seed)
    }

    /// Samples `count` positions from `rho`: a node is drawn with probability
    /// proportional to its quadrature mass, then the position is spread
    /// uniformly over that node's cell.
    pub fn from_density(rho: &ScalarField, count: usize, seed: u64) -> Result<Self> {
        let g = rho.grid();
        let d = g.dim();
        let mass: Vec<f64> = rho
            .values()
            .iter()
            .zip(g.quadrature_weights())
            .map(|(r, w)| r.max(0.0) * w)
            .collect();
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || count == 0 {
            return Err(Error::InvalidParameter("cannot sample an empty density".into()));
        }
        let mut cdf = Vec::with_capacity(mass.len());
        let mut acc = 0.0;
        for m in &mass {
            acc += m / total;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5a3b_1e00_0001);
        let unit = Uniform::new(0.0, 1.0).expect("valid range");
        let mut positions = Vec::with_capacity(count * d);
        for _ in 0..count {
            let u: f64 = unit.sample(&mut rng);
            let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
            let p = g.point(idx);
            for (k, &xk) in p.iter().enumerate().take(d) {
                positions.push(xk + (unit.sample(&mut rng) - 0.5) * g.axis(k).spacing);
            }
        }
        TracerEnsemble::new(g, positions, seed)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.rngs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rngs.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, p: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.positions[p * d..(p + 1) * d]
    }

    /// Coordinate `k` of every particle.
    pub fn coordinates(&self, k: usize) -> Vec<f64> {
        let d = self.grid.dim();
        self.positions.iter().skip(k).step_by(d).copied().collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Boundary reflections performed so far.
    pub fn reflections(&self) -> u64 {
        self.reflections
    }

    /// Particle steps taken with zero drift because the particle sat in a
    /// masked cell.
    pub fn masked_steps(&self) -> u64 {
        self.masked_steps
    }

    /// One Euler–Maruyama step of every particle.
    pub fn step(&mut self, drift: &DriftField, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        same_grid(&self.grid, drift.drift.grid())?;
        let d = self.grid.dim();
        let amp = drift.noise * dt.sqrt();
        for (p, rng) in self.rngs.iter_mut().enumerate() {
            let x = &mut self.positions[p * d..(p + 1) * d];
            let b = match drift.sample(x) {
                Some(b) => b,
                None => {
                    self.masked_steps += 1;
                    [0.0; MAX_DIM]
                }
            };
            for k in 0..d {
                let xi: f64 = StandardNormal.sample(rng);
                x[k] += b[k] * dt + amp * xi;
            }
            let (y, count) = confine(&self.grid, x);
            x.copy_from_slice(&y[..d]);
            self.reflections += count;
        }
        self.time += dt;
        self.steps += 1;
        Ok(())
    }

    pub fn run(&mut self, drift: &DriftField, dt: f64, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step(drift, dt)?;
        }
        Ok(())
    }

    /// Normalized box-count density: each particle lands on its nearest node
    /// and counts are divided by that node's quadrature weight.
    pub fn histogram(&self, grid: &Grid) -> Result<ScalarField> {
        if grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        let weights = grid.quadrature_weights();
        let mut counts = vec![0.0; grid.len()];
        for p in 0..self.len() {
            counts[grid.nearest_index(self.position(p))] += 1.0;
        }
        let n = self.len() as f64;
        let values = counts.iter().zip(&weights).map(|(c, w)| c / (n * w)).collect();
        ScalarField::new(grid.clone(), values)
    }

    /// CSV snapshot: one row per particle with its id and coordinates.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim();
        let mut out = format!(
            "{TRACER_CSV_SIGNATURE}\n# seed = {}\n# time = {:e}\n# steps = {}\n# reflections = {}\n# masked_steps = {}\nid",
            self.seed, self.time, self.steps, self.reflections, self.masked_steps
        );
        for k in 0..d {
            out.push_str(&format!(",x{k}"));
        }
        out.push('\n');
        for p in 0..self.len() {
            out.push_str(&p.to_string());
            for x in self.position(p) {
                out.push_str(&format!(",{x:e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Functional form of [`TracerEnsemble::step`].
pub fn step_ensemble(ensemble: &TracerEnsemble, h: &HydroFields, dt: f64, convention: DriftConvention) -> Result<TracerEnsemble> {
    let mut next = ensemble.clone();
    next.step(&DriftField::new(h, convention), dt)?;
    Ok(next)
}

/// Wraps periodic coordinates into the fundamental cell and reflects bounded
/// ones back inside, returning the number of reflections.
fn confine(grid: &Grid, x: &[f64]) -> ([f64; MAX_DIM], u64) {
    let mut out = [0.0; MAX_DIM];
    let mut count = 0;
    for (k, a) in grid.axes().iter().enumerate() {
        let len = a.length();
        let mut y = x[k];
        if a.periodic {
            y = a.origin + (y - a.origin).rem_euclid(len);
            if y >= a.origin + len {
                y = a.origin;
            }
        } else {
            let (lo, hi) = (a.origin, a.origin + len);
            if y < lo || y > hi {
                // Fold into one period of the mirrored domain.
                let t = (y - lo).rem_euclid(2.0 * len);
                y = if t <= len { lo + t } else { hi - (t - len) };
                count += 1;
            }
        }
        out[k] = y;
    }
    (out, count)
}

/// Cumulative distribution of the piecewise-linear interpolant of the
/// marginal density along axis `k`, normalized to one.
pub struct MarginalCdf {
    nodes: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
    spacing: f64,
    total: f64,
}

impl MarginalCdf {
    pub fn new(rho: &ScalarField, k: usize) -> Result<Self> {
        let g = rho.grid();
        if k >= g.dim() {
            return Err(Error::InvalidParameter(format!("axis {k} out of range")));
        }
        let a = g.axis(k);
        let mut marginal = vec![0.0; a.points];
        let weights = g.quadrature_weights();
        for (i, (r, w)) in rho.values().iter().zip(&weights).enumerate() {
            let ik = g.unflatten(i)[k];
            marginal[ik] += r * w / a.weight(ik);
        }
        let mut nodes = a.coordinates();
        if a.periodic {
            nodes.push(a.origin + a.length());
            marginal.push(marginal[0]);
        }
        let mut cumulative = vec![0.0];
        for w in marginal.windows(2) {
            let last = *cumulative.last().expect("non-empty");
            cumulative.push(last + 0.5 * a.spacing * (w[0] + w[1]));
        }
        let total = *cumulative.last().expect("non-empty");
        if !(total > 0.0) {
            return Err(Error::InvalidField("density has no mass".into()));
        }
        Ok(MarginalCdf {
            nodes,
            values: marginal,
            cumulative,
            spacing: a.spacing,
            total,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x0 = self.nodes[0];
        let s = (x - x0) / self.spacing;
        if s <= 0.0 {
            return 0.0;
        }
        let i = s.floor() as usize;
        if i + 1 >= self.nodes.len() {
            return 1.0;
        }
        let t = s - i as f64;
        let (ra, rb) = (self.values[i], self.values[i + 1]);
        (self.cumulative[i] + self.spacing * (ra * t + 0.5 * (rb - ra) * t * t)) / self.total
    }
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (j, &x)| {
        let f = cdf(x);
        d.max((j as f64 + 1.0) / n - f).max(f - j as f64 / n)
    })
}

/// KS statistic of the ensemble's axis-`k` coordinates against the marginal
/// of `rho`.
pub fn ks_against_density(ensemble: &TracerEnsemble, rho: &ScalarField, k: usize) -> Result<f64> {
    let cdf = MarginalCdf::new(rho, k)?;
    Ok(ks_statistic(&ensemble.coordinates(k), |x| cdf.eval(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::derivative;
    use crate::field::WaveFunction;
    use crate::madelung::wavefunction_to_fields;
    use crate::params::PhysicalParams;
    use num_complex::Complex64;

    fn ground_state(g: &Grid) -> HydroFields {
        // Harmonic ground state, hbar = m = omega = 1: rho ~ exp(-x^2).
        let psi = WaveFunction::from_fn(g, |x| Complex64::new((-0.5 * x[0] * x[0]).exp(), 0.0))
            .unwrap()
            .normalized()
            .unwrap();
        wavefunction_to_fields(&psi, &PhysicalParams::default()).unwrap()
    }

    /// Explicit finite-volume Fokker–Planck integration with the sampled
    /// drift; returns the max density change after unit time.
    fn fokker_planck_drift(h: &HydroFields, convention: DriftConvention) -> f64 {
        let g = h.grid();
        let b = DriftField::new(h, convention).field().component(0).to_vec();
        let diff = h.params.diffusivity();
        let dx = g.axis(0).spacing;
        let dt = 0.2 * dx * dx / diff;
        let mut rho = h.rho.values().to_vec();
        let steps = (1.0 / dt).ceil() as usize;
        for _ in 0..steps {
            let flux = {
                let br: Vec<f64> = b.iter().zip(&rho).map(|(b, r)| b * r).collect();
                let d1 = derivative(&br, g, 0, 1);
                let d2 = derivative(&rho, g, 0, 2);
                d1.iter().zip(&d2).map(|(a, c)| -a + diff * c).collect::<Vec<_>>()
            };
            for (r, f) in rho.iter_mut().zip(&flux) {
                *r += dt * f;
            }
        }
        rho.iter()
            .zip(h.rho.values())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    #[test]
    fn forward_drift_keeps_ground_state_stationary_under_fokker_planck() {
        let g = Grid::periodic_cube(1, 128, 16.0).unwrap();
        let h = ground_state(&g);
        let forward = fokker_planck_drift(&h, DriftConvention::Forward);
        let reversed = fokker_planck_drift(&h, DriftConvention::Reversed);
        assert!(forward < 1e-6, "forward drift drifts by {forward}");
        assert!(reversed > 1e-2, "reversed drift only moves {reversed}");
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let g = Grid::periodic_cube(1, 64, 16.0).unwrap();
        let drift = DriftField::new(&ground_state(&g), DriftConvention::Forward);
        let mut a = TracerEnsemble::at_point(&g, &[0.3], 50, 7).unwrap();
        let mut b = a.clone();
        a.run(&drift, 0.01, 20).unwrap();
        b.run(&drift, 0.01, 20).unwrap();
        assert_eq!(a.positions(), b.positions());
        let mut c = TracerEnsemble::at_point(&g, &[0.3], 50, 8).unwrap();
        c.run(&drift, 0.01, 20).unwrap();
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn bounded_edges_reflect() {
        let g = Grid::bounded_cube(1, 16, -1.0, 1.0).unwrap();
        let (y, n) = confine(&g, &[1.25]);
        assert_eq!(n, 1);
        assert!((y[0] - 0.75).abs() < 1e-15);
        let (y, _) = confine(&g, &[-3.5]);
        assert!((-1.0..=1.0).contains(&y[0]));
        let p = Grid::periodic_cube(1, 16, 2.0).unwrap();
        let (y, n) = confine(&p, &[1.25]);
        assert_eq!(n, 0);
        assert!((y[0] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn histogram_integrates_to_one() {
        let g = Grid::bounded_cube(2, 12, -2.0, 2.0).unwrap();
        let e = TracerEnsemble::new(&g, vec![0.1, 0.2, -2.0, 2.0, 1.0, -1.3], 1).unwrap();
        let h = e.histogram(&g).unwrap();
        assert!((crate::calculus::integrate(&h) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn marginal_cdf_matches_piecewise_linear_integral() {
        let g = Grid::bounded_cube(1, 11, 0.0, 1.0).unwrap();
        let rho = ScalarField::from_fn(&g, |x| 2.0 * x[0]).unwrap();
        let cdf = MarginalCdf::new(&rho, 0).unwrap();
        for &x in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            assert!((cdf.eval(x) - x * x).abs() < 1e-14);
        }
        assert_eq!(ks_statistic(&[0.5], |x| x), 0.5);
    }
}
