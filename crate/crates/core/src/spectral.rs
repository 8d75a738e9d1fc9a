//! FFT helpers on periodic axes.
//!
//! Forward transforms are unnormalized; inverse transforms divide by the
//! point count so that a round trip is the identity.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Axis, Grid};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Angular wavenumbers in FFT order for a periodic axis.
pub fn wavenumbers(axis: &Axis) -> Vec<f64> {
    let n = axis.points;
    let dk = 2.0 * PI / axis.length();
    (0..n)
        .map(|j| {
            let m = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
            m as f64 * dk
        })
        .collect()
}

/// Index of the unpaired Nyquist mode, present only for even point counts.
pub fn nyquist_index(n: usize) -> Option<usize> {
    n.is_multiple_of(2).then_some(n / 2)
}

/// Transforms every line of `data` along axis `k`.
pub fn fft_axis(data: &mut [Complex64], grid: &Grid, k: usize, inverse: bool) {
    let n = grid.axis(k).points;
    let stride = grid.stride(k);
    let fft = plan(n, inverse);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
    for_each_line(grid, k, |base| {
        for (j, z) in line.iter_mut().enumerate() {
            *z = data[base + j * stride];
        }
        fft.process_with_scratch(&mut line, &mut scratch);
        for (j, z) in line.iter().enumerate() {
            data[base + j * stride] = *z * scale;
        }
    });
}

/// Calls `f` with the flat offset of the first node of every line along `k`.
pub(crate) fn for_each_line(grid: &Grid, k: usize, mut f: impl FnMut(usize)) {
    let n = grid.axis(k).points;
    let stride = grid.stride(k);
    let outer = grid.len() / (n * stride);
    for o in 0..outer {
        for s in 0..stride {
            f(o * n * stride + s);
        }
    }
}

/// Full transform over all axes of a fully periodic grid.
pub fn fft_nd(data: &mut [Complex64], grid: &Grid, inverse: bool) {
    for k in 0..grid.dim() {
        fft_axis(data, grid, k, inverse);
    }
}

/// Squared wavenumber magnitude for every mode in flat order.
pub fn wavenumber_squared(grid: &Grid) -> Vec<f64> {
    let ks: Vec<Vec<f64>> = grid.axes().iter().map(wavenumbers).collect();
    (0..grid.len())
        .map(|i| {
            let m = grid.unflatten(i);
            ks.iter().enumerate().map(|(a, k)| k[m[a]] * k[m[a]]).sum()
        })
        .collect()
}

/// Fourier coefficients of a real field on a fully periodic grid.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Per-axis wavenumbers of mode `idx`.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.grid.unflatten(idx);
        let mut k = [0.0; 3];
        for (a, axis) in self.grid.axes().iter().enumerate() {
            k[a] = wavenumbers(axis)[m[a]];
        }
        k
    }
}

pub fn spectral_transform(f: &ScalarField) -> Result<SpectralField> {
    let grid = f.grid();
    if !grid.is_periodic() {
        return Err(Error::Unsupported(
            "spectral transform needs a fully periodic grid".into(),
        ));
    }
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, grid, false);
    Ok(SpectralField {
        grid: grid.clone(),
        coefficients: data,
    })
}

/// Inverse transform; the imaginary residue of a real field is dropped.
pub fn inverse_transform(s: &SpectralField) -> Result<ScalarField> {
    let mut data = s.coefficients.clone();
    fft_nd(&mut data, &s.grid, true);
    ScalarField::new(s.grid.clone(), data.iter().map(|z| z.re).collect())
}

/// Spectral derivative of order 1 or 2 along periodic axis `k`.
///
/// The Nyquist mode is dropped for first derivatives (its derivative is not
/// real) and kept for second derivatives.
pub fn derivative_axis(data: &mut [Complex64], grid: &Grid, k: usize, order: usize) {
    let axis = grid.axis(k);
    let ks = wavenumbers(axis);
    let nyq = nyquist_index(axis.points);
    let mult: Vec<Complex64> = ks
        .iter()
        .enumerate()
        .map(|(j, &kk)| match order {
            1 if Some(j) == nyq => Complex64::new(0.0, 0.0),
            1 => Complex64::new(0.0, kk),
            2 => Complex64::new(-kk * kk, 0.0),
            _ => unreachable!("derivative order {order}"),
        })
        .collect();
    apply_axis_multiplier(data, grid, k, &mult);
}

/// Multiplies each mode along axis `k` by `mult[j]` in Fourier space.
pub fn apply_axis_multiplier(data: &mut [Complex64], grid: &Grid, k: usize, mult: &[Complex64]) {
    let n = grid.axis(k).points;
    let stride = grid.stride(k);
    let fwd = plan(n, false);
    let inv = plan(n, true);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch =
        vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
    let scale = 1.0 / n as f64;
    for_each_line(grid, k, |base| {
        for (j, z) in line.iter_mut().enumerate() {
            *z = data[base + j * stride];
        }
        fwd.process_with_scratch(&mut line, &mut scratch);
        for (z, m) in line.iter_mut().zip(mult) {
            *z *= *m;
        }
        inv.process_with_scratch(&mut line, &mut scratch);
        for (j, z) in line.iter().enumerate() {
            data[base + j * stride] = *z * scale;
        }
    });
}

/// Zeroes the top third of modes on every axis of a periodic grid.
pub fn low_pass_two_thirds(values: &mut [f64], grid: &Grid) {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for k in 0..grid.dim() {
        let axis = grid.axis(k);
        let kmax = wavenumbers(axis).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cut = 2.0 / 3.0 * kmax;
        let mult: Vec<Complex64> = wavenumbers(axis)
            .iter()
            .map(|kk| Complex64::new(if kk.abs() <= cut { 1.0 } else { 0.0 }, 0.0))
            .collect();
        apply_axis_multiplier(&mut data, grid, k, &mult);
    }
    for (v, z) in values.iter_mut().zip(&data) {
        *v = z.re;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_layout() {
        let a = Axis::periodic(8, 2.0 * PI);
        assert_eq!(wavenumbers(&a), vec![0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
        let b = Axis::periodic(9, 2.0 * PI);
        assert_eq!(wavenumbers(&b)[4], 4.0);
        assert_eq!(wavenumbers(&b)[5], -4.0);
        assert_eq!(nyquist_index(9), None);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = Grid::new(vec![Axis::periodic(12, 3.0), Axis::periodic(10, 2.0)]).unwrap();
        let f = ScalarField::from_fn(&g, |x| (x[0] * 1.3).sin() + x[1] * x[1] - 0.2 * x[0]).unwrap();
        let back = inverse_transform(&spectral_transform(&f).unwrap()).unwrap();
        let scale = f.max_abs();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn non_periodic_grids_are_rejected() {
        let g = Grid::new(vec![Axis::bounded(16, 0.0, 1.0)]).unwrap();
        assert!(spectral_transform(&ScalarField::zeros(&g)).is_err());
    }
}
