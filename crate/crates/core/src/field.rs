//! Scalar, vector, tensor and complex fields sampled on a [`Grid`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

fn check_values(grid: &Grid, values: &[f64], what: &str) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::InvalidField(format!(
            "{what}: {} values for {} grid points",
            values.len(),
            grid.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidField(format!("{what}: non-finite value at {i}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values, "scalar field")?;
        Ok(ScalarField { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            values: vec![value; grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f` at every grid point. Coordinates beyond the grid dimension
    /// are passed as zero.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| f(&grid.point(i)[..grid.dim()]))
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        ScalarField::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::InvalidField(format!(
                "vector field: {} components on a {}-D grid",
                components.len(),
                grid.dim()
            )));
        }
        for c in &components {
            check_values(&grid, c, "vector field")?;
        }
        Ok(VectorField { grid, components })
    }

    pub(crate) fn from_parts(grid: Grid, components: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(components.len(), grid.dim());
        VectorField { grid, components }
    }

    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            components: vec![vec![0.0; grid.len()]; grid.dim()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> [f64; 3]) -> Result<Self> {
        let mut components = vec![Vec::with_capacity(grid.len()); grid.dim()];
        for i in 0..grid.len() {
            let v = f(&grid.point(i)[..grid.dim()]);
            for (k, c) in components.iter_mut().enumerate() {
                c.push(v[k]);
            }
        }
        VectorField::new(grid.clone(), components)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    pub fn at(&self, i: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (k, c) in self.components.iter().enumerate() {
            v[k] = c[i];
        }
        v
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .collect();
        ScalarField::from_parts(self.grid.clone(), values)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().max_abs()
    }
}

/// Symmetric rank-2 tensor field; the upper triangle is stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTensorField {
    grid: Grid,
    entries: Vec<Vec<f64>>,
}

impl SymmetricTensorField {
    pub fn packed_index(dim: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * dim - i * (i + 1) / 2 + j
    }

    pub fn zeros(grid: &Grid) -> Self {
        let d = grid.dim();
        SymmetricTensorField {
            entries: vec![vec![0.0; grid.len()]; d * (d + 1) / 2],
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn component(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[Self::packed_index(self.dim(), i, j)]
    }

    pub fn component_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.entries[Self::packed_index(d, i, j)]
    }

    /// Full matrix at grid point `idx` (unused rows and columns are zero).
    pub fn at(&self, idx: usize) -> [[f64; 3]; 3] {
        let d = self.dim();
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = self.component(i, j)[idx];
            }
        }
        m
    }

    pub fn trace(&self) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|p| (0..self.dim()).map(|i| self.component(i, i)[p]).sum())
            .collect();
        ScalarField::from_parts(self.grid.clone(), values)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest principal minor over all points. Non-negative (up to
    /// round-off) iff every pointwise matrix is positive semidefinite.
    pub fn min_principal_minor(&self) -> f64 {
        let d = self.dim();
        let mut worst = f64::INFINITY;
        for p in 0..self.grid.len() {
            let m = self.at(p);
            for minor in principal_minors(&m, d) {
                worst = worst.min(minor);
            }
        }
        worst
    }
}

fn principal_minors(m: &[[f64; 3]; 3], d: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..d).map(|i| m[i][i]).collect();
    for i in 0..d {
        for j in i + 1..d {
            out.push(m[i][i] * m[j][j] - m[i][j] * m[j][i]);
        }
    }
    if d == 3 {
        out.push(
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]),
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "wavefunction: {} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidField(format!("wavefunction: non-finite value at {i}")));
        }
        Ok(WaveFunction { grid, values })
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        WaveFunction { grid, values }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| f(&grid.point(i)[..grid.dim()]))
            .collect();
        WaveFunction::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn density(&self) -> ScalarField {
        ScalarField::from_parts(
            self.grid.clone(),
            self.values.iter().map(|z| z.norm_sqr()).collect(),
        )
    }

    /// Squared-amplitude quadrature.
    pub fn norm_squared(&self) -> f64 {
        crate::calculus::integrate(&self.density())
    }

    /// Rescales to unit norm.
    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_squared();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidField("cannot normalize a null wavefunction".into()));
        }
        let s = 1.0 / n.sqrt();
        for z in &mut self.values {
            *z *= s;
        }
        Ok(self)
    }

    /// Errors unless the norm is within `tolerance` of one.
    pub fn check_normalized(&self, tolerance: f64) -> Result<()> {
        let norm = self.norm_squared();
        if (norm - 1.0).abs() > tolerance {
            return Err(Error::NotNormalized { norm });
        }
        Ok(())
    }
}

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let g = Grid::new(vec![Axis::periodic(8, 1.0)]).unwrap();
        assert!(ScalarField::new(g.clone(), vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(ScalarField::new(g.clone(), v).is_err());
        assert!(VectorField::new(g.clone(), vec![vec![0.0; 8]; 2]).is_err());
        let mut z = vec![Complex64::new(0.0, 0.0); 8];
        z[0].im = f64::INFINITY;
        assert!(WaveFunction::new(g, z).is_err());
    }

    #[test]
    fn packed_tensor_indices_cover_upper_triangle() {
        let idx: Vec<usize> = (0..3)
            .flat_map(|i| (i..3).map(move |j| SymmetricTensorField::packed_index(3, i, j)))
            .collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(SymmetricTensorField::packed_index(2, 1, 0), 1);
        assert_eq!(SymmetricTensorField::packed_index(2, 1, 1), 2);
    }

    #[test]
    fn principal_minors_detect_indefinite_matrices() {
        let g = Grid::new(vec![Axis::periodic(8, 1.0); 2]).unwrap();
        let mut t = SymmetricTensorField::zeros(&g);
        t.component_mut(0, 0)[0] = 1.0;
        t.component_mut(1, 1)[0] = 1.0;
        t.component_mut(0, 1)[0] = 2.0;
        assert!(t.min_principal_minor() < 0.0);
    }
}
