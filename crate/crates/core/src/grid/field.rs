use num_complex::Complex64;

use super::{DyadicCube, Grid};
use crate::error::{Error, Result};

/// Complex samples of a function on a [`Grid`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl SampledField {
    /// Builds a field, rejecting wrong lengths and non-finite samples.
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
    }

    /// Samples `f` at every grid point. `f` receives `n` coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let n = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..n])).collect();
        Self::new(grid, values)
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Discrete delta: mass one at the origin, i.e. `1/h^n` there.
    pub fn delta(grid: Grid) -> Self {
        let mut f = Self::zeros(grid);
        f.values[grid.origin_index()] = Complex64::new(1.0 / grid.cell_volume(), 0.0);
        f
    }

    /// Wraps values produced by internal computations (assumed finite).
    pub(crate) fn from_parts(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    /// Riemann sum `h^n sum f`.
    pub fn integrate(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `f * chi_Q`.
    pub fn restrict(&self, cube: &DyadicCube) -> Result<Self> {
        if cube.dim() != self.grid.dim() {
            return Err(Error::InvalidParameter(format!(
                "cube has dimension {}, grid has {}",
                cube.dim(),
                self.grid.dim()
            )));
        }
        if !self.grid.cube_meets_box(cube) {
            return Err(Error::CubeOutsideBox(cube.clone()));
        }
        let mut out = Self::zeros(self.grid);
        for i in self.grid.cube_indices(cube) {
            out.values[i] = self.values[i];
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|z| z * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        Ok(Self::from_parts(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        Ok(Self::from_parts(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|&z| f(z)).collect())
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        Ok(Self::from_parts(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        ))
    }

    /// Discrete `L^2` norm `(h^n sum |f|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Largest absolute difference to another field.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.grid.same_as(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_wrong_length() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(SampledField::from_real(g, v), Err(Error::NonFinite { index: 3 })));
        assert!(matches!(
            SampledField::from_real(g, vec![0.0; 7]),
            Err(Error::LengthMismatch { expected: 8, got: 7 })
        ));
    }

    #[test]
    fn integral_of_indicator() {
        let g = Grid::new(1, 2.0, 256).unwrap();
        let f = SampledField::from_real_fn(g, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 }).unwrap();
        assert!((f.integrate().re - 1.0).abs() < 1e-14);
        let q = DyadicCube::new(1, vec![1]);
        assert!((f.restrict(&q).unwrap().integrate().re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn restrict_outside_box_errors() {
        let g = Grid::new(1, 1.0, 16).unwrap();
        let f = SampledField::zeros(g);
        assert!(matches!(f.restrict(&DyadicCube::new(0, vec![5])), Err(Error::CubeOutsideBox(_))));
    }

    #[test]
    fn delta_has_unit_mass() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        assert!((SampledField::delta(g).integrate().re - 1.0).abs() < 1e-12);
    }
}
