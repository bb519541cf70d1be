//! No-slip channel eigenbasis.
//!
//! At horizontal wavenumber zero the Stokes eigenfunctions are shear modes
//! `(U_n(x2), 0)` with `-U'' = lambda U` and Dirichlet walls, known in closed
//! form. For `k != 0` the streamfunction ansatz `psi = phi(x2) e^{i k x1}`
//! turns the eigenproblem into the clamped fourth-order pencil
//! `(D^2-k^2)^2 phi = lambda (k^2-D^2) phi`, which is discretized with a
//! Legendre basis built to satisfy `phi = phi' = 0` at both walls. Both sides
//! of the pencil are symmetric positive definite, so a Cholesky reduction to
//! an ordinary symmetric eigenproblem is spurious-free; a strong-form
//! residual gate drops any eigenpair the basis cannot resolve.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;

use super::legendre::{gauss_legendre, legendre_eval};
use super::{ModeDescriptor, VelocityGradient};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::{Geometry, Grid2};

const RESIDUAL_GATE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelModeKind {
    /// `(U_n(x2), 0)` at horizontal wavenumber zero.
    Shear { n: usize },
    /// Streamfunction eigenmode `q` at wavenumber `nk`, cosine phase.
    StreamCos { nk: usize, q: usize },
    /// Same eigenmode, sine phase.
    StreamSin { nk: usize, q: usize },
}

struct ChannelMode {
    kind: ChannelModeKind,
    lambda: f64,
    nk: usize,
    /// Profiles and their first two `x2`-derivatives at the grid nodes:
    /// `u1 = p1(x2) T(x1)`, `u2 = p2(x2) S(x1)`.
    p1: Vec<f64>,
    p1d: Vec<f64>,
    p1dd: Vec<f64>,
    p2: Vec<f64>,
    p2d: Vec<f64>,
    p2dd: Vec<f64>,
}

impl ChannelMode {
    /// x1-factors of (u1, u2) at one grid column.
    fn trig(&self, cos_kx: f64, sin_kx: f64) -> (f64, f64) {
        match self.kind {
            ChannelModeKind::Shear { .. } => (1.0, 0.0),
            ChannelModeKind::StreamCos { .. } => (cos_kx, sin_kx),
            ChannelModeKind::StreamSin { .. } => (sin_kx, -cos_kx),
        }
    }

    /// x1-derivative factors of (u1, u2) at one grid column (per unit k).
    fn trig_dx(&self, cos_kx: f64, sin_kx: f64) -> (f64, f64) {
        match self.kind {
            ChannelModeKind::Shear { .. } => (0.0, 0.0),
            ChannelModeKind::StreamCos { .. } => (-sin_kx, cos_kx),
            ChannelModeKind::StreamSin { .. } => (cos_kx, sin_kx),
        }
    }
}

pub struct ChannelBasis {
    lx: f64,
    modes: Vec<ChannelMode>,
    /// Per-wavenumber `(cos(k x_i), sin(k x_i))` tables, indexed by `nk`.
    trig: Vec<(Vec<f64>, Vec<f64>)>,
    max_residual: f64,
}

impl ChannelBasis {
    pub fn build(
        geometry: &Geometry,
        grid: &Grid2,
        kx_max: usize,
        modes_per_k: usize,
    ) -> Result<(Self, usize)> {
        let lx = geometry.lx;
        let tau = std::f64::consts::TAU;
        // Polynomial degree cap: grid quadrature (Clenshaw-Curtis, exact to
        // degree ny-1) must integrate products of two mode profiles.
        let n_basis = ((grid.ny / 2).saturating_sub(4)).clamp(12, 40);
        if n_basis < modes_per_k + 6 {
            return Err(Error::ResolutionTooSmall {
                nx: grid.nx,
                ny: grid.ny,
                requested: modes_per_k,
                needed: 2 * (modes_per_k + 10),
            });
        }

        let mut modes: Vec<ChannelMode> = Vec::new();
        let mut rejected = 0usize;

        // Shear modes: closed form, exact.
        let amp = (2.0 / lx).sqrt();
        for n in 1..=modes_per_k {
            let mu = n as f64 * std::f64::consts::PI;
            let p1: Vec<f64> = grid.y.iter().map(|&y| amp * (mu * y).sin()).collect();
            let p1d: Vec<f64> = grid.y.iter().map(|&y| amp * mu * (mu * y).cos()).collect();
            let p1dd: Vec<f64> = grid.y.iter().map(|&y| -amp * mu * mu * (mu * y).sin()).collect();
            modes.push(ChannelMode {
                kind: ChannelModeKind::Shear { n },
                lambda: mu * mu,
                nk: 0,
                p1,
                p1d,
                p1dd,
                p2: vec![0.0; grid.ny],
                p2d: vec![0.0; grid.ny],
                p2dd: vec![0.0; grid.ny],
            });
        }

        let mut max_residual = 0.0f64;
        for nk in 1..=kx_max {
            let k = tau * nk as f64 / lx;
            let pencil = solve_clamped_pencil(n_basis, k, modes_per_k + 2)?;
            let mut kept = 0usize;
            for (lambda, coeffs, residual) in pencil {
                if kept >= modes_per_k {
                    break;
                }
                if !(lambda.is_finite() && lambda > 0.0) || residual > RESIDUAL_GATE {
                    rejected += 1;
                    continue;
                }
                max_residual = max_residual.max(residual);
                // Normalize so the 2D velocity has unit L2 norm: the
                // eigenvectors come back with c^T B c = 1, and
                // ||u||^2 = (lx/2) c^T B c.
                let scale = (2.0 / lx).sqrt();
                let c: Vec<f64> = coeffs.iter().map(|v| v * scale).collect();
                // phi and derivatives at the grid nodes.
                let mut phi = vec![0.0; grid.ny];
                let mut dphi = vec![0.0; grid.ny];
                let mut d2phi = vec![0.0; grid.ny];
                let mut d3phi = vec![0.0; grid.ny];
                for (j, &y) in grid.y.iter().enumerate() {
                    let vals = clamped_eval::<4>(n_basis, y);
                    for (i, ci) in c.iter().enumerate() {
                        phi[j] += ci * vals[i][0];
                        dphi[j] += ci * vals[i][1];
                        d2phi[j] += ci * vals[i][2];
                        d3phi[j] += ci * vals[i][3];
                    }
                }
                // u = (phi' T, k phi S): profiles for both components.
                let p1 = dphi.clone();
                let p1d = d2phi.clone();
                let p1dd = d3phi.clone();
                let p2: Vec<f64> = phi.iter().map(|v| k * v).collect();
                let p2d: Vec<f64> = dphi.iter().map(|v| k * v).collect();
                let p2dd: Vec<f64> = d2phi.iter().map(|v| k * v).collect();
                for kind in [
                    ChannelModeKind::StreamCos { nk, q: kept },
                    ChannelModeKind::StreamSin { nk, q: kept },
                ] {
                    modes.push(ChannelMode {
                        kind,
                        lambda,
                        nk,
                        p1: p1.clone(),
                        p1d: p1d.clone(),
                        p1dd: p1dd.clone(),
                        p2: p2.clone(),
                        p2d: p2d.clone(),
                        p2dd: p2dd.clone(),
                    });
                }
                kept += 1;
            }
            if kept < modes_per_k {
                return Err(Error::Eigensolve(format!(
                    "only {kept} of {modes_per_k} eigenpairs at wavenumber {nk} passed the residual gate"
                )));
            }
        }

        // Eigenvalue order, lexicographic (nk, q, phase) tie-breaking.
        modes.sort_by(|a, b| {
            a.lambda
                .partial_cmp(&b.lambda)
                .unwrap()
                .then_with(|| sort_key(&a.kind).cmp(&sort_key(&b.kind)))
        });

        let trig: Vec<(Vec<f64>, Vec<f64>)> = (0..=kx_max)
            .map(|nk| {
                let k = tau * nk as f64 / lx;
                (
                    grid.x.iter().map(|&x| (k * x).cos()).collect(),
                    grid.x.iter().map(|&x| (k * x).sin()).collect(),
                )
            })
            .collect();

        Ok((
            Self {
                lx,
                modes,
                trig,
                max_residual,
            },
            rejected,
        ))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    pub fn max_eigen_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn descriptors(&self) -> Vec<ModeDescriptor> {
        self.modes
            .iter()
            .enumerate()
            .map(|(index, m)| {
                let label = match m.kind {
                    ChannelModeKind::Shear { n } => format!("shear n={n}"),
                    ChannelModeKind::StreamCos { nk, q } => format!("k={nk} q={q} cos"),
                    ChannelModeKind::StreamSin { nk, q } => format!("k={nk} q={q} sin"),
                };
                ModeDescriptor {
                    index,
                    lambda: m.lambda,
                    label,
                }
            })
            .collect()
    }

    pub fn synthesize(&self, grid: &Grid2, xi: &[f64]) -> VectorField {
        let mut out = VectorField::zeros(grid);
        for (m, &c) in self.modes.iter().zip(xi) {
            if c == 0.0 {
                continue;
            }
            let (cos_t, sin_t) = &self.trig[m.nk];
            for i in 0..grid.nx {
                let (t1, t2) = m.trig(cos_t[i], sin_t[i]);
                for j in 0..grid.ny {
                    out.x[(i, j)] += c * m.p1[j] * t1;
                    out.y[(i, j)] += c * m.p2[j] * t2;
                }
            }
        }
        out
    }

    pub fn synthesize_gradient(&self, grid: &Grid2, xi: &[f64]) -> VelocityGradient {
        let tau = std::f64::consts::TAU;
        let mut g = VelocityGradient {
            ux_dx: Array2::zeros((grid.nx, grid.ny)),
            ux_dy: Array2::zeros((grid.nx, grid.ny)),
            uy_dx: Array2::zeros((grid.nx, grid.ny)),
            uy_dy: Array2::zeros((grid.nx, grid.ny)),
        };
        for (m, &c) in self.modes.iter().zip(xi) {
            if c == 0.0 {
                continue;
            }
            let k = tau * m.nk as f64 / self.lx;
            let (cos_t, sin_t) = &self.trig[m.nk];
            for i in 0..grid.nx {
                let (t1, t2) = m.trig(cos_t[i], sin_t[i]);
                let (t1x, t2x) = m.trig_dx(cos_t[i], sin_t[i]);
                for j in 0..grid.ny {
                    g.ux_dx[(i, j)] += c * m.p1[j] * k * t1x;
                    g.ux_dy[(i, j)] += c * m.p1d[j] * t1;
                    g.uy_dx[(i, j)] += c * m.p2[j] * k * t2x;
                    g.uy_dy[(i, j)] += c * m.p2d[j] * t2;
                }
            }
        }
        g
    }

    pub fn hessian_magnitude(&self, grid: &Grid2, xi: &[f64]) -> Array2<f64> {
        let tau = std::f64::consts::TAU;
        let (nx, ny) = (grid.nx, grid.ny);
        let mut hxx = Array2::<f64>::zeros((nx, ny));
        let mut hxy = Array2::<f64>::zeros((nx, ny));
        let mut hyy = Array2::<f64>::zeros((nx, ny));
        let mut gxx = Array2::<f64>::zeros((nx, ny));
        let mut gxy = Array2::<f64>::zeros((nx, ny));
        let mut gyy = Array2::<f64>::zeros((nx, ny));
        for (m, &c) in self.modes.iter().zip(xi) {
            if c == 0.0 {
                continue;
            }
            let k = tau * m.nk as f64 / self.lx;
            let (cos_t, sin_t) = &self.trig[m.nk];
            for i in 0..nx {
                let (t1, t2) = m.trig(cos_t[i], sin_t[i]);
                let (t1x, t2x) = m.trig_dx(cos_t[i], sin_t[i]);
                for j in 0..ny {
                    hxx[(i, j)] += -c * m.p1[j] * k * k * t1;
                    hxy[(i, j)] += c * m.p1d[j] * k * t1x;
                    hyy[(i, j)] += c * m.p1dd[j] * t1;
                    gxx[(i, j)] += -c * m.p2[j] * k * k * t2;
                    gxy[(i, j)] += c * m.p2d[j] * k * t2x;
                    gyy[(i, j)] += c * m.p2dd[j] * t2;
                }
            }
        }
        let mut out = Array2::<f64>::zeros((nx, ny));
        for i in 0..nx {
            for j in 0..ny {
                let s = hxx[(i, j)].powi(2)
                    + 2.0 * hxy[(i, j)].powi(2)
                    + hyy[(i, j)].powi(2)
                    + gxx[(i, j)].powi(2)
                    + 2.0 * gxy[(i, j)].powi(2)
                    + gyy[(i, j)].powi(2);
                out[(i, j)] = s.sqrt();
            }
        }
        out
    }

    pub fn project(&self, grid: &Grid2, field: &VectorField) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| {
                let (cos_t, sin_t) = &self.trig[m.nk];
                let mut acc = 0.0;
                for i in 0..grid.nx {
                    let (t1, t2) = m.trig(cos_t[i], sin_t[i]);
                    let mut row = 0.0;
                    for j in 0..grid.ny {
                        row += grid.wy[j]
                            * (field.x[(i, j)] * m.p1[j] * t1 + field.y[(i, j)] * m.p2[j] * t2);
                    }
                    acc += grid.wx[i] * row;
                }
                acc
            })
            .collect()
    }

    pub fn project_scalar_e2(&self, grid: &Grid2, theta: &Array2<f64>) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| {
                let (cos_t, sin_t) = &self.trig[m.nk];
                let mut acc = 0.0;
                for i in 0..grid.nx {
                    let (_, t2) = m.trig(cos_t[i], sin_t[i]);
                    if t2 == 0.0 {
                        continue;
                    }
                    let mut row = 0.0;
                    for j in 0..grid.ny {
                        row += grid.wy[j] * theta[(i, j)] * m.p2[j];
                    }
                    acc += grid.wx[i] * row * t2;
                }
                acc
            })
            .collect()
    }

    pub fn divergence(&self, grid: &Grid2, field: &VectorField) -> Array2<f64> {
        let sx = crate::fft::real_to_spectrum(&field.x);
        let dxs = crate::fft::derivative_spectrum(&sx, self.lx, 0);
        let mut div = crate::fft::spectrum_to_real(&dxs);
        let dy = grid.differentiate_y(&field.y);
        div.zip_mut_with(&dy, |a, b| *a += b);
        div
    }
}

fn sort_key(kind: &ChannelModeKind) -> (usize, usize, usize) {
    match *kind {
        ChannelModeKind::Shear { n } => (0, n, 0),
        ChannelModeKind::StreamCos { nk, q } => (nk, q, 0),
        ChannelModeKind::StreamSin { nk, q } => (nk, q, 1),
    }
}

/// Clamped combination `phi_n = L_n + a_n L_{n+2} + b_n L_{n+4}` on `[0,1]`
/// (`s = 2y - 1`), with values and `y`-derivatives up to order `D`.
fn clamped_eval<const D: usize>(n_basis: usize, y: f64) -> Vec<[f64; D]> {
    let s = 2.0 * y - 1.0;
    let leg = legendre_eval::<D>(n_basis + 4, s);
    let mut out = vec![[0.0; D]; n_basis];
    for n in 0..n_basis {
        let nf = n as f64;
        let b = (2.0 * nf + 3.0) / (2.0 * nf + 7.0);
        let a = -2.0 * (2.0 * nf + 5.0) / (2.0 * nf + 7.0);
        let mut chain = 1.0; // (ds/dy)^d = 2^d
        for d in 0..D {
            out[n][d] = chain * (leg[n][d] + a * leg[n + 2][d] + b * leg[n + 4][d]);
            chain *= 2.0;
        }
    }
    out
}

/// Solve `(D^2-k^2)^2 phi = lambda (k^2-D^2) phi`, clamped at both walls.
/// Returns up to `want` lowest eigenpairs as (lambda, coefficients with
/// `c^T B c = 1`, relative strong-form residual).
fn solve_clamped_pencil(
    n_basis: usize,
    k: f64,
    want: usize,
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    let nq = n_basis + 8;
    let (s_nodes, s_weights) = gauss_legendre(nq);
    let nodes: Vec<f64> = s_nodes.iter().map(|s| 0.5 * (s + 1.0)).collect();
    let weights: Vec<f64> = s_weights.iter().map(|w| 0.5 * w).collect();

    // Basis tables at quadrature nodes: value, y-derivatives 1..4.
    let tables: Vec<Vec<[f64; 5]>> = nodes.iter().map(|&y| clamped_eval::<5>(n_basis, y)).collect();

    let mut a = DMatrix::zeros(n_basis, n_basis);
    let mut b = DMatrix::zeros(n_basis, n_basis);
    for (q, &w) in weights.iter().enumerate() {
        let t = &tables[q];
        for i in 0..n_basis {
            let si = t[i][2] - k * k * t[i][0];
            for j in i..n_basis {
                let sj = t[j][2] - k * k * t[j][0];
                let aij = w * si * sj;
                let bij = w * (t[i][1] * t[j][1] + k * k * t[i][0] * t[j][0]);
                a[(i, j)] += aij;
                b[(i, j)] += bij;
                if i != j {
                    a[(j, i)] += aij;
                    b[(j, i)] += bij;
                }
            }
        }
    }

    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigensolve("B form is not positive definite".into()))?;
    let l = chol.l();
    let m = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::Eigensolve("singular Cholesky factor".into()))?;
    let ct = l
        .solve_lower_triangular(&m.transpose())
        .ok_or_else(|| Error::Eigensolve("singular Cholesky factor".into()))?;
    let c_sym = (&ct + ct.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c_sym);

    let mut order: Vec<usize> = (0..n_basis).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let lt = l.transpose();
    let mut out = Vec::new();
    for &idx in order.iter().take(want) {
        let lambda = eig.eigenvalues[idx];
        let z = eig.eigenvectors.column(idx).into_owned();
        let c = lt
            .solve_upper_triangular(&DVector::from_column_slice(z.as_slice()))
            .ok_or_else(|| Error::Eigensolve("singular Cholesky factor".into()))?;
        // Strong-form residual on the quadrature nodes.
        let mut num = 0.0;
        let mut den = 0.0;
        for (q, &w) in weights.iter().enumerate() {
            let t = &tables[q];
            let mut phi = 0.0;
            let mut d2 = 0.0;
            let mut d4 = 0.0;
            for i in 0..n_basis {
                phi += c[i] * t[i][0];
                d2 += c[i] * t[i][2];
                d4 += c[i] * t[i][4];
            }
            let lhs = d4 - 2.0 * k * k * d2 + k.powi(4) * phi;
            let rhs = lambda * (k * k * phi - d2);
            num += w * (lhs - rhs) * (lhs - rhs);
            den += w * rhs * rhs;
        }
        let residual = if den > 0.0 { (num / den).sqrt() } else { f64::INFINITY };
        out.push((lambda, c.as_slice().to_vec(), residual));
    }
    Ok(out)
}
