//! Computational domains and collocation grids.
//!
//! Two concrete geometries are supported: a fully periodic torus (mean-zero
//! velocity space, analytic Fourier eigenbasis) and a channel that is periodic
//! in `x1` with no-slip walls at `x2 = 0` and `x2 = 1`. The torus uses a
//! uniform grid with trapezoidal (spectrally exact) quadrature; the channel
//! uses Chebyshev-Gauss-Lobatto points in the wall-normal direction with
//! Clenshaw-Curtis weights.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryKind {
    Torus,
    Channel,
}

/// Domain description. Side lengths are strictly positive; the channel height
/// is fixed to 1 (walls at `x2 = 0` and `x2 = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub kind: GeometryKind,
    pub lx: f64,
    pub ly: f64,
}

impl Geometry {
    pub fn torus(lx: f64, ly: f64) -> Result<Self> {
        if lx <= 0.0 || ly <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "torus side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            kind: GeometryKind::Torus,
            lx,
            ly,
        })
    }

    /// Standard `2π`-periodic torus used throughout the tests.
    pub fn torus_2pi() -> Self {
        Self::torus(std::f64::consts::TAU, std::f64::consts::TAU).unwrap()
    }

    pub fn channel(lx: f64) -> Result<Self> {
        if lx <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "channel period must be positive, got {lx}"
            )));
        }
        Ok(Self {
            kind: GeometryKind::Channel,
            lx,
            ly: 1.0,
        })
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
}

/// Collocation grid with per-axis nodes and quadrature weights.
///
/// `x` is always uniform-periodic. On the torus `y` is too; on the channel
/// `y` holds Chebyshev-Gauss-Lobatto nodes in ascending order (walls
/// included) and `wy` the matching Clenshaw-Curtis weights, so that
/// `sum_ij wx[i]*wy[j]*f[i,j]` is the discrete integral in both geometries.
#[derive(Clone, Debug)]
pub struct Grid2 {
    pub geometry: Geometry,
    pub nx: usize,
    pub ny: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
    /// Collocation differentiation matrix in `y` (channel only).
    pub dy_matrix: Option<Array2<f64>>,
}

impl Grid2 {
    pub fn new(geometry: Geometry, nx: usize, ny: usize) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidInput(format!(
                "grid must be at least 4x4, got {nx}x{ny}"
            )));
        }
        let x: Vec<f64> = (0..nx).map(|i| geometry.lx * i as f64 / nx as f64).collect();
        let wx = vec![geometry.lx / nx as f64; nx];
        match geometry.kind {
            GeometryKind::Torus => {
                let y: Vec<f64> = (0..ny).map(|j| geometry.ly * j as f64 / ny as f64).collect();
                let wy = vec![geometry.ly / ny as f64; ny];
                Ok(Self {
                    geometry,
                    nx,
                    ny,
                    x,
                    y,
                    wx,
                    wy,
                    dy_matrix: None,
                })
            }
            GeometryKind::Channel => {
                let (y, wy) = lobatto_nodes_weights(ny);
                let dy_matrix = Some(differentiation_matrix(&y));
                Ok(Self {
                    geometry,
                    nx,
                    ny,
                    x,
                    y,
                    wx,
                    wy,
                    dy_matrix,
                })
            }
        }
    }

    /// Discrete L2 inner product of two scalar samples.
    pub fn inner(&self, f: &Array2<f64>, g: &Array2<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nx {
            let mut row = 0.0;
            for j in 0..self.ny {
                row += self.wy[j] * f[(i, j)] * g[(i, j)];
            }
            acc += self.wx[i] * row;
        }
        acc
    }

    /// Discrete L^p norm of a scalar sample.
    pub fn lp_norm(&self, f: &Array2<f64>, p: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nx {
            let mut row = 0.0;
            for j in 0..self.ny {
                row += self.wy[j] * f[(i, j)].abs().powf(p);
            }
            acc += self.wx[i] * row;
        }
        acc.powf(1.0 / p)
    }

    pub fn l2_norm(&self, f: &Array2<f64>) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Apply the collocation derivative in `y` (channel). Panics on the torus,
    /// where derivatives are taken spectrally.
    pub fn differentiate_y(&self, f: &Array2<f64>) -> Array2<f64> {
        let d = self
            .dy_matrix
            .as_ref()
            .expect("collocation y-derivative is only defined on the channel grid");
        let mut out = Array2::zeros((self.nx, self.ny));
        for i in 0..self.nx {
            for j in 0..self.ny {
                let mut acc = 0.0;
                for l in 0..self.ny {
                    acc += d[(j, l)] * f[(i, l)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Chebyshev-Gauss-Lobatto nodes mapped to [0, 1] in ascending order, with
/// Clenshaw-Curtis quadrature weights (exact for polynomials of degree < n).
pub fn lobatto_nodes_weights(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let m = n - 1; // polynomial degree of the node set
    let mut y = Vec::with_capacity(n);
    let mut w = vec![0.0; n];
    for j in 0..n {
        let s = (std::f64::consts::PI * j as f64 / m as f64).cos();
        y.push(0.5 * (1.0 - s));
    }
    // Clenshaw-Curtis on [-1,1]: w_j = (1/c_j) * sum_{k even} (2 d_k / (m c_k)) cos(k j pi / m),
    // d_k = 2/(1-k^2); then scale by the Jacobian 1/2 of the map to [0,1].
    for j in 0..n {
        let cj = if j == 0 || j == m { 2.0 } else { 1.0 };
        let mut acc = 0.0;
        let mut k = 0usize;
        while k <= m {
            let ck = if k == 0 || k == m { 2.0 } else { 1.0 };
            let dk = 2.0 / (1.0 - (k * k) as f64);
            acc += 2.0 * dk / (m as f64 * ck)
                * (std::f64::consts::PI * (k * j) as f64 / m as f64).cos();
            k += 2;
        }
        w[j] = acc / cj * 0.5;
    }
    // Nodes were generated descending in s, i.e. ascending in y; weights are
    // symmetric so no reordering is needed.
    (y, w)
}

/// Barycentric differentiation matrix on arbitrary distinct nodes.
pub fn differentiation_matrix(nodes: &[f64]) -> Array2<f64> {
    let n = nodes.len();
    // Chebyshev-Lobatto barycentric weights up to a common factor: (-1)^j, halved at ends.
    let lam: Vec<f64> = (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (lam[j] / lam[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        let (y, w) = lobatto_nodes_weights(17);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
        for p in 0..15 {
            let integral: f64 = y.iter().zip(&w).map(|(yi, wi)| wi * yi.powi(p)).sum();
            assert_abs_diff_eq!(integral, 1.0 / (p as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn differentiation_matrix_is_exact_on_polynomials() {
        let (y, _) = lobatto_nodes_weights(12);
        let d = differentiation_matrix(&y);
        for (i, &yi) in y.iter().enumerate() {
            let mut acc = 0.0;
            for (j, &yj) in y.iter().enumerate() {
                acc += d[(i, j)] * (yj.powi(5) - 2.0 * yj);
            }
            assert_abs_diff_eq!(acc, 5.0 * yi.powi(4) - 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn torus_grid_quadrature_is_uniform() {
        let g = Grid2::new(Geometry::torus_2pi(), 8, 8).unwrap();
        let ones = Array2::from_elem((8, 8), 1.0);
        assert_abs_diff_eq!(
            g.inner(&ones, &ones),
            g.geometry.area(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_degenerate_domains() {
        assert!(Geometry::torus(-1.0, 1.0).is_err());
        assert!(Geometry::channel(0.0).is_err());
    }
}
