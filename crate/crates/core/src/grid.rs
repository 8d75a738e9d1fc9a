//! Uniform Cartesian meshes in one to three dimensions.
//!
//! Values on a grid are stored in a flat row-major array: the last axis
//! varies fastest. Periodic axes place `points` nodes on `[origin, origin + L)`
//! with `L = points * spacing`; bounded axes include both end nodes.

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;
pub const MAX_DIM: usize = 3;
pub const DEFAULT_FD_ORDER: usize = 4;
pub const MAX_FD_ORDER: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub points: usize,
    pub spacing: f64,
    pub origin: f64,
    pub periodic: bool,
}

impl Axis {
    /// Periodic axis of the given length centred on zero.
    pub fn periodic(points: usize, length: f64) -> Self {
        let spacing = length / points as f64;
        Axis {
            points,
            spacing,
            origin: -0.5 * length,
            periodic: true,
        }
    }

    /// Bounded axis with nodes at both `lo` and `hi`.
    pub fn bounded(points: usize, lo: f64, hi: f64) -> Self {
        let spacing = (hi - lo) / (points.max(2) - 1) as f64;
        Axis {
            points,
            spacing,
            origin: lo,
            periodic: false,
        }
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coordinate(i)).collect()
    }

    /// Extent covered by the axis (period for periodic axes).
    pub fn length(&self) -> f64 {
        if self.periodic {
            self.points as f64 * self.spacing
        } else {
            (self.points - 1) as f64 * self.spacing
        }
    }

    /// Quadrature weight of node `i`: midpoint on periodic axes, trapezoid on
    /// bounded ones.
    pub fn weight(&self, i: usize) -> f64 {
        if !self.periodic && (i == 0 || i + 1 == self.points) {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "axis {k}: {} points, need at least {MIN_POINTS}",
                self.points
            )));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "axis {k}: spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !self.origin.is_finite() {
            return Err(Error::InvalidGrid(format!("axis {k}: non-finite origin")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    fd_order: usize,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1..={MAX_DIM}, got {}",
                axes.len()
            )));
        }
        for (k, a) in axes.iter().enumerate() {
            a.validate(k)?;
        }
        axes.iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.points))
            .ok_or_else(|| Error::InvalidGrid("point count overflows".into()))?;
        let grid = Grid {
            axes,
            fd_order: DEFAULT_FD_ORDER,
        };
        let volume = grid.cell_volume();
        if !(volume.is_finite() && volume > 0.0) {
            return Err(Error::InvalidGrid("cell volume is not positive".into()));
        }
        Ok(grid)
    }

    /// Same axes in every dimension, all periodic and centred on zero.
    pub fn periodic_cube(dim: usize, points: usize, length: f64) -> Result<Self> {
        Grid::new(vec![Axis::periodic(points, length); dim])
    }

    /// Same axes in every dimension, all bounded on `[lo, hi]`.
    pub fn bounded_cube(dim: usize, points: usize, lo: f64, hi: f64) -> Result<Self> {
        Grid::new(vec![Axis::bounded(points, lo, hi); dim])
    }

    /// Accuracy order of the finite-difference stencils used on bounded axes.
    pub fn with_fd_order(mut self, order: usize) -> Result<Self> {
        if !(2..=MAX_FD_ORDER).contains(&order) || !order.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "finite-difference order must be even and in 2..={MAX_FD_ORDER}; got {order}"
            )));
        }
        for (k, a) in self.axes.iter().enumerate() {
            if !a.periodic && a.points < order + 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: order-{order} stencils need at least {} points",
                    order + 2
                )));
            }
        }
        self.fd_order = order;
        Ok(self)
    }

    pub fn fd_order(&self) -> usize {
        self.fd_order
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self) -> bool {
        self.axes.iter().all(|a| a.periodic)
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    /// Distance in the flat array between neighbours along axis `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.axes[k + 1..].iter().map(|a| a.points).product()
    }

    /// Multi-index of flat position `idx`.
    pub fn unflatten(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].points;
            out[k] = idx % n;
            idx /= n;
        }
        out
    }

    /// Coordinates of flat position `idx`; unused trailing entries are zero.
    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.unflatten(idx);
        let mut x = [0.0; MAX_DIM];
        for (k, a) in self.axes.iter().enumerate() {
            x[k] = a.coordinate(m[k]);
        }
        x
    }

    /// Coordinates along axis `k` for every grid point, in flat order.
    pub fn coordinate_field(&self, k: usize) -> Vec<f64> {
        let coords = self.axes[k].coordinates();
        let stride = self.stride(k);
        let n = self.axes[k].points;
        (0..self.len()).map(|i| coords[(i / stride) % n]).collect()
    }

    /// Squared distance from the point `centre` for every grid point.
    pub fn radius_squared(&self, centre: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let x = self.point(i);
                (0..self.dim())
                    .map(|k| {
                        let c = centre.get(k).copied().unwrap_or(0.0);
                        (x[k] - c).powi(2)
                    })
                    .sum()
            })
            .collect()
    }

    /// Product quadrature weights in flat order.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| (0..a.points).map(|i| a.weight(i)).collect())
            .collect();
        (0..self.len())
            .map(|i| {
                let m = self.unflatten(i);
                per_axis.iter().enumerate().map(|(k, w)| w[m[k]]).product()
            })
            .collect()
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).fold(f64::INFINITY, f64::min)
    }

    /// Largest representable wavenumber magnitude, `pi / spacing` summed in
    /// quadrature over the axes.
    pub fn max_wavenumber(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| (std::f64::consts::PI / a.spacing).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Flat index of the node closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for (k, a) in self.axes.iter().enumerate() {
            let t = ((x[k] - a.origin) / a.spacing).round();
            let i = if a.periodic {
                t.rem_euclid(a.points as f64) as usize % a.points
            } else {
                t.clamp(0.0, (a.points - 1) as f64) as usize
            };
            idx = idx * a.points + i;
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_axes() {
        assert!(Grid::new(vec![Axis::periodic(4, 1.0)]).is_err());
        assert!(Grid::new(vec![Axis {
            points: 16,
            spacing: 0.0,
            origin: 0.0,
            periodic: true
        }])
        .is_err());
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new(vec![Axis::periodic(8, 1.0); 4]).is_err());
    }

    #[test]
    fn flat_layout_is_row_major() {
        let g = Grid::new(vec![Axis::periodic(8, 8.0), Axis::bounded(10, 0.0, 9.0)]).unwrap();
        assert_eq!(g.stride(0), 10);
        assert_eq!(g.stride(1), 1);
        let idx = 3 * 10 + 7;
        assert_eq!(g.unflatten(idx)[..2], [3, 7]);
        let p = g.point(idx);
        assert_eq!(p[0], -4.0 + 3.0);
        assert_eq!(p[1], 7.0);
        assert_eq!(g.nearest_index(&[p[0], p[1]]), idx);
    }

    #[test]
    fn trapezoid_weights_on_bounded_axes() {
        let g = Grid::new(vec![Axis::bounded(11, 0.0, 1.0)]).unwrap();
        let w = g.quadrature_weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], 0.05);
    }

    #[test]
    fn fd_order_needs_room_for_edge_stencils() {
        let g = Grid::new(vec![Axis::bounded(9, 0.0, 1.0)]).unwrap();
        assert!(g.clone().with_fd_order(8).is_err());
        assert!(g.clone().with_fd_order(6).is_ok());
        assert!(g.with_fd_order(3).is_err());
    }
}
