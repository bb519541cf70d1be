//! Divergence-free Fourier eigenbasis on the periodic torus.
//!
//! For each lattice pair `{n, -n}` (one representative per pair, `|n| <=
//! max_wavenumber`) there are two real modes built from the polarization
//! `k_perp/|k|`: an even (cosine) and an odd (sine) phase, both L2-normalized.
//! Constant modes are excluded, so the represented space is mean-zero and the
//! Poincare inequality holds. All transforms are exact trapezoid/FFT
//! quadrature, which the `3*max_wavenumber` resolution precondition keeps
//! alias-free for quadratic products.

use ndarray::Array2;
use rustfft::num_complex::Complex;

use super::{ModeDescriptor, VelocityGradient};
use crate::fft::{freq_index, ifft2, real_to_spectrum};
use crate::field::VectorField;
use crate::geometry::{Geometry, Grid2};

#[derive(Clone, Debug)]
pub struct ModePair {
    /// Representative lattice vector (positive half-plane).
    pub n: (i64, i64),
    /// Unit polarization `k_perp / |k|`.
    pub sigma: (f64, f64),
    pub lambda: f64,
    /// Indices of the cosine and sine modes in the global ordering.
    pub cos: usize,
    pub sin: usize,
}

pub struct TorusBasis {
    lx: f64,
    ly: f64,
    /// `sqrt(2 Lx Ly)`: scale between complex Fourier coefficients and the
    /// normalized real mode coefficients.
    scale: f64,
    pub pairs: Vec<ModePair>,
    labels: Vec<String>,
}

impl TorusBasis {
    pub fn build(geometry: &Geometry, max_wavenumber: usize) -> Self {
        let (lx, ly) = (geometry.lx, geometry.ly);
        let kmax = max_wavenumber as i64;
        let tau = std::f64::consts::TAU;
        // Enumerate one representative per +/- lattice pair.
        let mut raw: Vec<((i64, i64), f64)> = Vec::new();
        for n1 in -kmax..=kmax {
            for n2 in -kmax..=kmax {
                if (n1, n2) == (0, 0) || n1 * n1 + n2 * n2 > kmax * kmax {
                    continue;
                }
                if n1 > 0 || (n1 == 0 && n2 > 0) {
                    let kx = tau * n1 as f64 / lx;
                    let ky = tau * n2 as f64 / ly;
                    raw.push(((n1, n2), kx * kx + ky * ky));
                }
            }
        }
        // Eigenvalue order with deterministic lattice tie-breaking; cosine
        // precedes sine within a pair.
        raw.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap()
                .then(a.0 .0.cmp(&b.0 .0))
                .then(a.0 .1.cmp(&b.0 .1))
        });
        let mut pairs = Vec::with_capacity(raw.len());
        let mut labels = Vec::with_capacity(2 * raw.len());
        for (idx, ((n1, n2), lambda)) in raw.iter().enumerate() {
            let kx = tau * *n1 as f64 / lx;
            let ky = tau * *n2 as f64 / ly;
            let norm = lambda.sqrt();
            let sigma = (-ky / norm, kx / norm);
            pairs.push(ModePair {
                n: (*n1, *n2),
                sigma,
                lambda: *lambda,
                cos: 2 * idx,
                sin: 2 * idx + 1,
            });
            labels.push(format!("k=({n1},{n2}) cos"));
            labels.push(format!("k=({n1},{n2}) sin"));
        }
        Self {
            lx,
            ly,
            scale: (2.0 * lx * ly).sqrt(),
            pairs,
            labels,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs
            .iter()
            .flat_map(|p| [p.lambda, p.lambda])
            .collect()
    }

    pub fn descriptors(&self) -> Vec<ModeDescriptor> {
        let ev = self.eigenvalues();
        self.labels
            .iter()
            .enumerate()
            .map(|(index, label)| ModeDescriptor {
                index,
                lambda: ev[index],
                label: label.clone(),
            })
            .collect()
    }

    /// Spectral representation (normalized coefficients) of `sum xi_j w_j`.
    pub fn spectrum_from_coeffs(
        &self,
        grid: &Grid2,
        xi: &[f64],
    ) -> (Array2<Complex<f64>>, Array2<Complex<f64>>) {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut sx = Array2::from_elem((nx, ny), Complex::new(0.0, 0.0));
        let mut sy = Array2::from_elem((nx, ny), Complex::new(0.0, 0.0));
        for p in &self.pairs {
            let z = Complex::new(xi[p.cos], -xi[p.sin]) / self.scale;
            let ip = (freq_index(p.n.0, nx), freq_index(p.n.1, ny));
            let im = (freq_index(-p.n.0, nx), freq_index(-p.n.1, ny));
            sx[ip] += p.sigma.0 * z;
            sy[ip] += p.sigma.1 * z;
            sx[im] += p.sigma.0 * z.conj();
            sy[im] += p.sigma.1 * z.conj();
        }
        (sx, sy)
    }

    /// Extract mode coefficients from normalized component spectra.
    fn coeffs_from_spectra(
        &self,
        grid: &Grid2,
        sx: &Array2<Complex<f64>>,
        sy: &Array2<Complex<f64>>,
    ) -> Vec<f64> {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut xi = vec![0.0; 2 * self.pairs.len()];
        for p in &self.pairs {
            let ip = (freq_index(p.n.0, nx), freq_index(p.n.1, ny));
            let s = p.sigma.0 * sx[ip] + p.sigma.1 * sy[ip];
            xi[p.cos] = self.scale * s.re;
            xi[p.sin] = -self.scale * s.im;
        }
        xi
    }

    pub fn synthesize(&self, grid: &Grid2, xi: &[f64]) -> VectorField {
        let (mut sx, mut sy) = self.spectrum_from_coeffs(grid, xi);
        ifft2(&mut sx);
        ifft2(&mut sy);
        VectorField {
            x: sx.mapv(|c| c.re),
            y: sy.mapv(|c| c.re),
        }
    }

    pub fn synthesize_gradient(&self, grid: &Grid2, xi: &[f64]) -> VelocityGradient {
        let (sx, sy) = self.spectrum_from_coeffs(grid, xi);
        let dx = |s: &Array2<Complex<f64>>| self.mul_ik(s, 0);
        let dy = |s: &Array2<Complex<f64>>| self.mul_ik(s, 1);
        let to_real = |mut s: Array2<Complex<f64>>| {
            ifft2(&mut s);
            s.mapv(|c| c.re)
        };
        VelocityGradient {
            ux_dx: to_real(dx(&sx)),
            ux_dy: to_real(dy(&sx)),
            uy_dx: to_real(dx(&sy)),
            uy_dy: to_real(dy(&sy)),
        }
    }

    pub fn hessian_magnitude(&self, grid: &Grid2, xi: &[f64]) -> Array2<f64> {
        let (sx, sy) = self.spectrum_from_coeffs(grid, xi);
        let mut total: Array2<f64> = Array2::zeros((grid.nx, grid.ny));
        for s in [&sx, &sy] {
            for (a, b, w) in [(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)] {
                let mut d = self.mul_ik(&self.mul_ik(s, a), b);
                ifft2(&mut d);
                total.zip_mut_with(&d, |t, c| *t += w * c.re * c.re);
            }
        }
        total.mapv_inplace(f64::sqrt);
        total
    }

    pub fn project(&self, grid: &Grid2, field: &VectorField) -> Vec<f64> {
        let sx = real_to_spectrum(&field.x);
        let sy = real_to_spectrum(&field.y);
        self.coeffs_from_spectra(grid, &sx, &sy)
    }

    pub fn project_scalar_e2(&self, grid: &Grid2, theta: &Array2<f64>) -> Vec<f64> {
        let st = real_to_spectrum(theta);
        let (nx, ny) = (grid.nx, grid.ny);
        let mut xi = vec![0.0; 2 * self.pairs.len()];
        for p in &self.pairs {
            let ip = (freq_index(p.n.0, nx), freq_index(p.n.1, ny));
            let s = p.sigma.1 * st[ip];
            xi[p.cos] = self.scale * s.re;
            xi[p.sin] = -self.scale * s.im;
        }
        xi
    }

    pub fn divergence(&self, _grid: &Grid2, field: &VectorField) -> Array2<f64> {
        let sx = real_to_spectrum(&field.x);
        let sy = real_to_spectrum(&field.y);
        let mut div = self.mul_ik(&sx, 0);
        let dy = self.mul_ik(&sy, 1);
        div.zip_mut_with(&dy, |a, b| *a += b);
        ifft2(&mut div);
        div.mapv(|c| c.re)
    }

    /// Coefficients of `P_m P (v . grad u)` where `u = sum xi_j w_j`: the
    /// matrix-free application of the Galerkin advection operator.
    pub fn advect_apply(&self, grid: &Grid2, v: &VectorField, xi: &[f64]) -> Vec<f64> {
        let g = self.synthesize_gradient(grid, xi);
        let mut fx = Array2::zeros((grid.nx, grid.ny));
        let mut fy = Array2::zeros((grid.nx, grid.ny));
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let (vx, vy) = (v.x[(i, j)], v.y[(i, j)]);
                fx[(i, j)] = vx * g.ux_dx[(i, j)] + vy * g.ux_dy[(i, j)];
                fy[(i, j)] = vx * g.uy_dx[(i, j)] + vy * g.uy_dy[(i, j)];
            }
        }
        self.project(grid, &VectorField { x: fx, y: fy })
    }

    fn mul_ik(
        &self,
        spec: &Array2<Complex<f64>>,
        axis: usize,
    ) -> Array2<Complex<f64>> {
        let length = if axis == 0 { self.lx } else { self.ly };
        crate::fft::derivative_spectrum(spec, length, axis)
    }
}
