//! Swirl benchmark with closed-form characteristics.
//!
//! The velocity `v = omega(r) (-(y-c2), x-c1)` is divergence-free for any
//! radial profile `omega`, and its characteristics are circles traversed at
//! angular rate `omega(r)`, so the advected scalar is known exactly at every
//! time. The profile is a compactly supported polynomial bump (identically
//! zero outside `r = radius`), which keeps the field genuinely periodic on
//! the torus. With `core > 0` the rotation is rigid for `r <= core * radius`,
//! which makes the flow an isometry on blobs confined to the core.

use crate::field::{ScalarField, VectorField};
use crate::geometry::Grid2;

#[derive(Clone, Copy, Debug)]
pub struct SwirlField {
    pub center: (f64, f64),
    pub omega0: f64,
    pub radius: f64,
    /// Fraction of the radius that rotates rigidly (0 for the pure bump).
    pub core: f64,
}

impl SwirlField {
    pub fn bump(center: (f64, f64), omega0: f64, radius: f64) -> Self {
        Self {
            center,
            omega0,
            radius,
            core: 0.0,
        }
    }

    pub fn rigid_core(center: (f64, f64), omega0: f64, radius: f64, core: f64) -> Self {
        Self {
            center,
            omega0,
            radius,
            core,
        }
    }

    /// Angular rate at radius `r`.
    pub fn omega(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        let rc = self.core * self.radius;
        if r <= rc {
            return self.omega0;
        }
        let s = (r - rc) / (self.radius - rc);
        let q = 1.0 - s * s;
        self.omega0 * q.powi(8)
    }

    fn displacement(&self, grid: &Grid2, x: f64, y: f64) -> (f64, f64) {
        let lx = grid.geometry.lx;
        let ly = grid.geometry.ly;
        let mut dx = x - self.center.0;
        let mut dy = y - self.center.1;
        dx -= lx * (dx / lx).round();
        dy -= ly * (dy / ly).round();
        (dx, dy)
    }

    pub fn velocity(&self, grid: &Grid2) -> VectorField {
        VectorField::from_fn(grid, |x, y| {
            let (dx, dy) = self.displacement(grid, x, y);
            let om = self.omega(dx.hypot(dy));
            (-om * dy, om * dx)
        })
    }

    /// Exact solution of pure transport: the initial profile evaluated at the
    /// back-rotated point.
    pub fn exact_advected(
        &self,
        grid: &Grid2,
        theta0: impl Fn(f64, f64) -> f64,
        t: f64,
    ) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| {
            let (dx, dy) = self.displacement(grid, x, y);
            let r = dx.hypot(dy);
            let a = -self.omega(r) * t;
            let (s, c) = a.sin_cos();
            let bx = c * dx - s * dy;
            let by = s * dx + c * dy;
            theta0(self.center.0 + bx, self.center.1 + by)
        })
    }
}

/// Gaussian bump made exactly periodic by summing the 3x3 nearest images.
pub fn periodic_gaussian(
    grid: &Grid2,
    center: (f64, f64),
    sigma: f64,
    amplitude: f64,
) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        periodic_gaussian_value(grid, center, sigma, amplitude, x, y)
    })
}

/// Pointwise evaluation of the periodic Gaussian (for exact-solution oracles).
pub fn periodic_gaussian_value(
    grid: &Grid2,
    center: (f64, f64),
    sigma: f64,
    amplitude: f64,
    x: f64,
    y: f64,
) -> f64 {
    let lx = grid.geometry.lx;
    let ly = grid.geometry.ly;
    let mut acc = 0.0;
    for ix in -1..=1 {
        for iy in -1..=1 {
            let dx = x - center.0 + ix as f64 * lx;
            let dy = y - center.1 + iy as f64 * ly;
            acc += amplitude * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    acc
}
