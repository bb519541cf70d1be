//! Grid-sampled fields.
//!
//! A `ScalarField` is the collocation representation of the shifted density
//! `theta`; it carries no boundary condition. A `VectorField` holds the two
//! velocity components on the same grid.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::Grid2;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid2) -> Self {
        Self {
            values: Array2::zeros((grid.nx, grid.ny)),
        }
    }

    /// Sample a closed-form function on the grid.
    pub fn from_fn(grid: &Grid2, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Array2::zeros((grid.nx, grid.ny));
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                values[(i, j)] = f(grid.x[i], grid.y[j]);
            }
        }
        Self { values }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("scalar field contains non-finite values".into()))
        }
    }

    pub fn check_dims(&self, grid: &Grid2, context: &'static str) -> Result<()> {
        if self.dims() == (grid.nx, grid.ny) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: format!("{}x{}", grid.nx, grid.ny),
                got: format!("{}x{}", self.dims().0, self.dims().1),
                context,
            })
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            values: &self.values * a,
        }
    }

    pub fn add_scaled(&mut self, other: &Self, a: f64) {
        self.values.zip_mut_with(&other.values, |u, &v| *u += a * v);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl VectorField {
    pub fn zeros(grid: &Grid2) -> Self {
        Self {
            x: Array2::zeros((grid.nx, grid.ny)),
            y: Array2::zeros((grid.nx, grid.ny)),
        }
    }

    pub fn from_fn(grid: &Grid2, mut f: impl FnMut(f64, f64) -> (f64, f64)) -> Self {
        let mut x = Array2::zeros((grid.nx, grid.ny));
        let mut y = Array2::zeros((grid.nx, grid.ny));
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let (u, v) = f(grid.x[i], grid.y[j]);
                x[(i, j)] = u;
                y[(i, j)] = v;
            }
        }
        Self { x, y }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.x.dim()
    }

    pub fn check_dims(&self, grid: &Grid2, context: &'static str) -> Result<()> {
        if self.dims() == (grid.nx, grid.ny) && self.y.dim() == (grid.nx, grid.ny) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: format!("{}x{}", grid.nx, grid.ny),
                got: format!("{:?}/{:?}", self.x.dim(), self.y.dim()),
                context,
            })
        }
    }

    pub fn add_scaled(&mut self, other: &Self, a: f64) {
        self.x.zip_mut_with(&other.x, |u, &v| *u += a * v);
        self.y.zip_mut_with(&other.y, |u, &v| *u += a * v);
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            x: &self.x * a,
            y: &self.y * a,
        }
    }

    /// Pointwise maximum of the Euclidean vector magnitude.
    pub fn max_magnitude(&self) -> f64 {
        self.x
            .iter()
            .zip(self.y.iter())
            .fold(0.0f64, |m, (u, v)| m.max(u.hypot(*v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    #[test]
    fn dimension_checks_catch_mismatch() {
        let g8 = Grid2::new(Geometry::torus_2pi(), 8, 8).unwrap();
        let g16 = Grid2::new(Geometry::torus_2pi(), 16, 16).unwrap();
        let f = ScalarField::zeros(&g8);
        assert!(f.check_dims(&g8, "test").is_ok());
        assert!(f.check_dims(&g16, "test").is_err());
    }

    #[test]
    fn finite_check_flags_nan() {
        let g = Grid2::new(Geometry::torus_2pi(), 8, 8).unwrap();
        let mut f = ScalarField::zeros(&g);
        assert!(f.check_finite().is_ok());
        f.values[(3, 4)] = f64::NAN;
        assert!(f.check_finite().is_err());
    }
}
