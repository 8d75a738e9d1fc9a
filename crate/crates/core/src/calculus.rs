//! Differential operators and quadrature.
//!
//! Periodic axes are differentiated spectrally; bounded axes use central
//! finite differences of the grid's order with one-sided edge stencils.

use num_complex::Complex64;

use crate::error::Result;
use crate::field::{same_grid, ScalarField, VectorField};
use crate::grid::Grid;
use crate::spectral;
use crate::stencil::AxisStencil;

fn fd_axis<T>(values: &[T], grid: &Grid, k: usize, deriv: usize) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let axis = grid.axis(k);
    let n = axis.points;
    let stride = grid.stride(k);
    let st = AxisStencil::new(n, deriv, grid.fd_order());
    let scale = 1.0 / axis.spacing.powi(deriv as i32);
    let mut out = vec![T::default(); values.len()];
    let mut line = vec![T::default(); n];
    let mut res = vec![T::default(); n];
    spectral::for_each_line(grid, k, |base| {
        for (j, v) in line.iter_mut().enumerate() {
            *v = values[base + j * stride];
        }
        st.apply(&line, &mut res, scale);
        for (j, v) in res.iter().enumerate() {
            out[base + j * stride] = *v;
        }
    });
    out
}

/// Derivative of order 1 or 2 along axis `k` of complex samples.
pub fn derivative_complex(values: &[Complex64], grid: &Grid, k: usize, deriv: usize) -> Vec<Complex64> {
    if grid.axis(k).periodic {
        let mut data = values.to_vec();
        spectral::derivative_axis(&mut data, grid, k, deriv);
        data
    } else {
        fd_axis(values, grid, k, deriv)
    }
}

/// Derivative of order 1 or 2 along axis `k` of real samples.
pub fn derivative(values: &[f64], grid: &Grid, k: usize, deriv: usize) -> Vec<f64> {
    if grid.axis(k).periodic {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectral::derivative_axis(&mut data, grid, k, deriv);
        data.into_iter().map(|z| z.re).collect()
    } else {
        fd_axis(values, grid, k, deriv)
    }
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid();
    let comps = (0..g.dim()).map(|k| derivative(f.values(), g, k, 1)).collect();
    VectorField::from_parts(g.clone(), comps)
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let mut out = vec![0.0; g.len()];
    for k in 0..g.dim() {
        for (o, d) in out.iter_mut().zip(derivative(v.component(k), g, k, 1)) {
            *o += d;
        }
    }
    ScalarField::from_parts(g.clone(), out)
}

/// Sum of second derivatives; a single `-|k|^2` multiplication on fully
/// periodic grids.
pub fn laplacian_values(values: &[f64], grid: &Grid) -> Vec<f64> {
    if grid.is_periodic() {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectral::fft_nd(&mut data, grid, false);
        for (z, k2) in data.iter_mut().zip(spectral::wavenumber_squared(grid)) {
            *z *= -k2;
        }
        spectral::fft_nd(&mut data, grid, true);
        return data.into_iter().map(|z| z.re).collect();
    }
    let mut out = vec![0.0; grid.len()];
    for k in 0..grid.dim() {
        for (o, d) in out.iter_mut().zip(derivative(values, grid, k, 2)) {
            *o += d;
        }
    }
    out
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    ScalarField::from_parts(f.grid().clone(), laplacian_values(f.values(), f.grid()))
}

/// Quadrature of raw samples with the grid's weights.
pub fn integrate_values(grid: &Grid, values: &[f64]) -> f64 {
    if grid.is_periodic() {
        return values.iter().sum::<f64>() * grid.cell_volume();
    }
    grid.quadrature_weights()
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

pub fn integrate(f: &ScalarField) -> f64 {
    integrate_values(f.grid(), f.values())
}

/// `∫ f rho`, the density-weighted mean of a scalar.
pub fn density_average(f: &ScalarField, rho: &ScalarField) -> Result<f64> {
    same_grid(f.grid(), rho.grid())?;
    let prod: Vec<f64> = f.values().iter().zip(rho.values()).map(|(a, b)| a * b).collect();
    Ok(integrate_values(f.grid(), &prod))
}

/// Componentwise density-weighted mean of a vector field.
pub fn density_average_vector(v: &VectorField, rho: &ScalarField) -> Result<Vec<f64>> {
    same_grid(v.grid(), rho.grid())?;
    Ok(v.components()
        .iter()
        .map(|c| {
            let prod: Vec<f64> = c.iter().zip(rho.values()).map(|(a, b)| a * b).collect();
            integrate_values(v.grid(), &prod)
        })
        .collect())
}

/// Largest pointwise magnitude of the discrete curl (zero in one dimension).
pub fn max_curl(v: &VectorField) -> f64 {
    let g = v.grid();
    let d = g.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let a = derivative(v.component(j), g, i, 1);
            let b = derivative(v.component(i), g, j, 1);
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use std::f64::consts::PI;

    #[test]
    fn spectral_gradient_of_single_mode() {
        let l = 3.0;
        let g = Grid::periodic_cube(1, 64, l).unwrap();
        let k = 2.0 * PI / l;
        let f = ScalarField::from_fn(&g, |x| (k * x[0]).sin()).unwrap();
        let df = gradient(&f);
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert!((df.component(0)[i] - k * (k * x).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid::new(vec![Axis::periodic(16, 2.0), Axis::bounded(12, 0.0, 1.0)]).unwrap();
        let df = gradient(&ScalarField::constant(&g, 3.5));
        assert!(df.max_magnitude() < 1e-12);
    }

    #[test]
    fn fourth_order_fd_on_quadratic() {
        let g = Grid::new(vec![Axis::bounded(21, -1.0, 1.0)]).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0] * x[0]).unwrap();
        let df = gradient(&f);
        for i in 0..g.len() {
            assert!((df.component(0)[i] - 2.0 * g.point(i)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_position_is_dimension() {
        let g = Grid::bounded_cube(3, 10, -1.0, 1.0).unwrap();
        let v = VectorField::from_fn(&g, |x| [x[0], x[1], x[2]]).unwrap();
        let d = divergence(&v);
        assert!(d.values().iter().all(|&x| (x - 3.0).abs() < 1e-12));
    }

    #[test]
    fn laplacian_of_gaussian_matches_closed_form() {
        let g = Grid::periodic_cube(2, 64, 20.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp()).unwrap();
        let lap = laplacian(&f);
        for i in 0..g.len() {
            let p = g.point(i);
            let r2 = p[0] * p[0] + p[1] * p[1];
            assert!((lap.values()[i] - (r2 - 2.0) * (-r2 / 2.0).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn integrate_sine_over_period() {
        let g = Grid::periodic_cube(1, 32, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0].sin()).unwrap();
        assert!(integrate(&f).abs() < 1e-12);
    }
}
