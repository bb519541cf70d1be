//! Linearized Navier-Stokes solver in the Stokes eigenbasis.
//!
//! With a frozen advecting velocity `v` and density `theta`, the Galerkin
//! coefficients satisfy `xi' + (Lambda + beta(t)) xi = eta(t)` where
//! `beta_ij = (v . grad w_j, w_i)` and `eta_j = (theta e2, w_j)`. The Stokes
//! part is integrated exactly by its factor `exp(-Lambda dt)`; advection and
//! forcing are frozen at the step midpoint and advanced by an explicit
//! midpoint rule in the transformed variable, giving second order overall and
//! exact single-mode decay when `beta = 0`.
//!
//! `beta` never does work: `xi^T beta xi = 0` because the advection matrix of
//! a divergence-free field with vanishing normal trace is antisymmetric. The
//! assembly checks that antisymmetry and can abort in strict mode, since its
//! violation is a reliable under-resolution signal.

use ndarray::Array2;

use crate::basis::{StokesBasis, VelocityCoeffs};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geometry::GeometryKind;

/// Galerkin advection matrix `beta_ij = (v . grad w_j, w_i)`.
#[derive(Clone, Debug)]
pub struct AdvectionMatrix {
    pub beta: Array2<f64>,
    /// Measured `max_ij |beta + beta^T|`.
    pub skew_defect: f64,
}

/// Buoyancy forcing `eta_j = (theta e2, w_j)`.
#[derive(Clone, Debug)]
pub struct ForcingVector {
    pub eta: Vec<f64>,
}

/// Velocity coefficient trajectory on a uniform time grid, with the
/// coefficient time derivative recorded at every sample.
#[derive(Clone, Debug)]
pub struct VelocityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<VelocityCoeffs>,
    pub derivs: Vec<VelocityCoeffs>,
}

impl VelocityTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }
}

/// Default antisymmetry gate per geometry (the torus quadrature is exact, the
/// channel one is exact only up to the smoothness of the profiles).
pub fn default_skew_tol(kind: GeometryKind) -> f64 {
    match kind {
        GeometryKind::Torus => 1e-10,
        GeometryKind::Channel => 1e-6,
    }
}

/// Anything that can apply the advection operator to a coefficient vector.
pub trait AdvectionApply {
    fn apply(&self, xi: &[f64], out: &mut [f64]);
}

impl AdvectionApply for AdvectionMatrix {
    fn apply(&self, xi: &[f64], out: &mut [f64]) {
        let m = xi.len();
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += self.beta[(i, j)] * xi[j];
            }
            out[i] = acc;
        }
    }
}

/// Matrix-free advection: `beta xi = P_m P (v . grad u)` computed through the
/// grid. On the torus this costs a handful of FFTs independent of `m`.
pub struct SpectralAdvection<'a> {
    pub basis: &'a StokesBasis,
    pub v: &'a VectorField,
}

impl AdvectionApply for SpectralAdvection<'_> {
    fn apply(&self, xi: &[f64], out: &mut [f64]) {
        let t = self
            .basis
            .torus()
            .expect("matrix-free advection is a torus fast path");
        let res = t.advect_apply(&self.basis.grid, self.v, xi);
        out.copy_from_slice(&res);
    }
}

/// Assemble the dense advection matrix by dealiased quadrature.
pub fn assemble_advection(v: &VectorField, basis: &StokesBasis) -> Result<AdvectionMatrix> {
    v.check_dims(&basis.grid, "assemble_advection")?;
    let m = basis.m();
    let mut beta = Array2::zeros((m, m));
    for j in 0..m {
        let ej = VelocityCoeffs::unit(m, j);
        let g = basis.synthesize_gradient(&ej)?;
        let mut fx = Array2::zeros((basis.grid.nx, basis.grid.ny));
        let mut fy = Array2::zeros((basis.grid.nx, basis.grid.ny));
        for ix in 0..basis.grid.nx {
            for iy in 0..basis.grid.ny {
                let (vx, vy) = (v.x[(ix, iy)], v.y[(ix, iy)]);
                fx[(ix, iy)] = vx * g.ux_dx[(ix, iy)] + vy * g.ux_dy[(ix, iy)];
                fy[(ix, iy)] = vx * g.uy_dx[(ix, iy)] + vy * g.uy_dy[(ix, iy)];
            }
        }
        let col = basis.leray_project(&VectorField { x: fx, y: fy })?;
        for i in 0..m {
            beta[(i, j)] = col.xi[i];
        }
    }
    let mut skew = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            skew = skew.max((beta[(i, j)] + beta[(j, i)]).abs());
        }
    }
    Ok(AdvectionMatrix {
        beta,
        skew_defect: skew,
    })
}

/// Strict-mode assembly: reject when the antisymmetry defect exceeds `tol`.
pub fn assemble_advection_strict(
    v: &VectorField,
    basis: &StokesBasis,
    tol: f64,
) -> Result<AdvectionMatrix> {
    let m = assemble_advection(v, basis)?;
    if m.skew_defect > tol {
        return Err(Error::SkewToleranceExceeded {
            skew: m.skew_defect,
            tol,
        });
    }
    Ok(m)
}

/// `eta_j = (theta e2, w_j)` by the basis quadrature.
pub fn assemble_buoyancy(theta: &ScalarField, basis: &StokesBasis) -> Result<ForcingVector> {
    Ok(ForcingVector {
        eta: basis.project_buoyancy(theta)?.xi,
    })
}

/// One integrating-factor midpoint step of `xi' + (Lambda + beta) xi = eta`
/// with `beta`, `eta` frozen at the step midpoint.
pub fn step_linear(
    xi: &VelocityCoeffs,
    beta_mid: &AdvectionMatrix,
    eta_mid: &ForcingVector,
    dt: f64,
    basis: &StokesBasis,
) -> VelocityCoeffs {
    VelocityCoeffs {
        xi: step_linear_op(&xi.xi, beta_mid, &eta_mid.eta, dt, &basis.eigenvalues),
    }
}

/// Generic step over any advection application.
pub fn step_linear_op(
    xi: &[f64],
    op: &impl AdvectionApply,
    eta: &[f64],
    dt: f64,
    eigenvalues: &[f64],
) -> Vec<f64> {
    let m = xi.len();
    let mut bx = vec![0.0; m];
    op.apply(xi, &mut bx);
    // Half-step predictor in the integrating-factor variable.
    let mut mid = vec![0.0; m];
    for i in 0..m {
        let e_half = (-eigenvalues[i] * 0.5 * dt).exp();
        mid[i] = e_half * (xi[i] + 0.5 * dt * (eta[i] - bx[i]));
    }
    let mut bmid = vec![0.0; m];
    op.apply(&mid, &mut bmid);
    let mut out = vec![0.0; m];
    for i in 0..m {
        let e_half = (-eigenvalues[i] * 0.5 * dt).exp();
        let e_full = e_half * e_half;
        out[i] = e_full * xi[i] + dt * e_half * (eta[i] - bmid[i]);
    }
    out
}

/// Coefficient time derivative `xi' = eta - Lambda xi - beta xi` at a sample.
pub fn coefficient_derivative(
    xi: &[f64],
    op: &impl AdvectionApply,
    eta: &[f64],
    eigenvalues: &[f64],
) -> Vec<f64> {
    let m = xi.len();
    let mut bx = vec![0.0; m];
    op.apply(xi, &mut bx);
    (0..m)
        .map(|i| eta[i] - eigenvalues[i] * xi[i] - bx[i])
        .collect()
}

/// How the advection operator is realized during time stepping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdvectionPath {
    /// FFT-based application (torus only).
    Spectral,
    /// Dense matrix assembled at each midpoint.
    Matrix,
}

/// Pick the fast path available for the geometry.
pub fn default_advection_path(kind: GeometryKind) -> AdvectionPath {
    match kind {
        GeometryKind::Torus => AdvectionPath::Spectral,
        GeometryKind::Channel => AdvectionPath::Matrix,
    }
}

pub(crate) enum StepOp<'a> {
    Matrix(AdvectionMatrix),
    Spectral {
        basis: &'a StokesBasis,
        v: VectorField,
    },
}

impl AdvectionApply for StepOp<'_> {
    fn apply(&self, xi: &[f64], out: &mut [f64]) {
        match self {
            StepOp::Matrix(m) => m.apply(xi, out),
            StepOp::Spectral { basis, v } => SpectralAdvection { basis, v }.apply(xi, out),
        }
    }
}

pub(crate) fn advection_op<'a>(
    basis: &'a StokesBasis,
    v: VectorField,
    path: AdvectionPath,
) -> Result<StepOp<'a>> {
    match path {
        AdvectionPath::Spectral if basis.torus().is_some() => {
            Ok(StepOp::Spectral { basis, v })
        }
        _ => Ok(StepOp::Matrix(assemble_advection(&v, basis)?)),
    }
}

fn midpoint_field(a: &VectorField, b: &VectorField) -> VectorField {
    let mut out = a.clone();
    out.add_scaled(b, 1.0);
    out.x.mapv_inplace(|v| 0.5 * v);
    out.y.mapv_inplace(|v| 0.5 * v);
    out
}

fn midpoint_scalar(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let mut out = a.clone();
    out.add_scaled(b, 1.0);
    out.values.mapv_inplace(|v| 0.5 * v);
    out
}

/// Check that a sample sequence forms a uniform, strictly increasing grid.
pub fn check_uniform_times(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::TimeGridMismatch("need at least two samples".into()));
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(Error::TimeGridMismatch("times must be strictly increasing".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::TimeGridMismatch("time grid is not uniform".into()));
        }
    }
    Ok(dt)
}

/// Solve the linearized problem over a window given trajectories of the
/// advecting field and the density on a common uniform time grid. This is the
/// velocity half of the fixed point: `theta -> u`.
pub fn solve_linear_nse(
    basis: &StokesBasis,
    times: &[f64],
    v_traj: &[VectorField],
    theta_traj: &[ScalarField],
    xi0: &VelocityCoeffs,
    path: AdvectionPath,
) -> Result<VelocityTrajectory> {
    let dt = check_uniform_times(times)?;
    if v_traj.len() != times.len() || theta_traj.len() != times.len() {
        return Err(Error::TimeGridMismatch(format!(
            "trajectory lengths {} / {} do not match {} samples",
            v_traj.len(),
            theta_traj.len(),
            times.len()
        )));
    }
    xi0.check_finite()?;
    let mut states = Vec::with_capacity(times.len());
    let mut derivs = Vec::with_capacity(times.len());
    let mut xi = xi0.clone();

    // Derivative at the initial sample.
    {
        let op0 = advection_op(basis, v_traj[0].clone(), path)?;
        let eta0 = assemble_buoyancy(&theta_traj[0], basis)?;
        derivs.push(VelocityCoeffs {
            xi: coefficient_derivative(&xi.xi, &op0, &eta0.eta, &basis.eigenvalues),
        });
    }
    states.push(xi.clone());

    for k in 0..times.len() - 1 {
        let v_mid = midpoint_field(&v_traj[k], &v_traj[k + 1]);
        let theta_mid = midpoint_scalar(&theta_traj[k], &theta_traj[k + 1]);
        let eta_mid = assemble_buoyancy(&theta_mid, basis)?;
        let op = advection_op(basis, v_mid, path)?;
        xi = VelocityCoeffs {
            xi: step_linear_op(&xi.xi, &op, &eta_mid.eta, dt, &basis.eigenvalues),
        };
        let op_end = advection_op(basis, v_traj[k + 1].clone(), path)?;
        let eta_end = assemble_buoyancy(&theta_traj[k + 1], basis)?;
        derivs.push(VelocityCoeffs {
            xi: coefficient_derivative(&xi.xi, &op_end, &eta_end.eta, &basis.eigenvalues),
        });
        states.push(xi.clone());
    }

    Ok(VelocityTrajectory {
        times: times.to_vec(),
        states,
        derivs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_torus_basis;
    use crate::geometry::Geometry;
    use approx::assert_abs_diff_eq;

    fn small_basis() -> StokesBasis {
        build_torus_basis(Geometry::torus_2pi(), 2, 16, 16).unwrap()
    }

    #[test]
    fn zero_advecting_field_gives_zero_matrix() {
        let b = small_basis();
        let v = VectorField::zeros(&b.grid);
        let m = assemble_advection(&v, &b).unwrap();
        assert_eq!(m.skew_defect, 0.0);
        assert!(m.beta.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn advection_diagonal_vanishes() {
        let b = small_basis();
        let e0 = VelocityCoeffs::unit(b.m(), 0);
        let v = b.synthesize(&e0).unwrap();
        let m = assemble_advection(&v, &b).unwrap();
        for i in 0..b.m() {
            assert_abs_diff_eq!(m.beta[(i, i)], 0.0, epsilon = 1e-12);
        }
        assert!(m.skew_defect < 1e-12);
    }

    #[test]
    fn pure_stokes_decay_is_exact_per_step() {
        let b = small_basis();
        let m = b.m();
        let beta = AdvectionMatrix {
            beta: Array2::zeros((m, m)),
            skew_defect: 0.0,
        };
        let eta = ForcingVector { eta: vec![0.0; m] };
        let mut xi = VelocityCoeffs::zeros(m);
        xi.xi[3] = 0.7;
        let dt = 0.05;
        let next = step_linear(&xi, &beta, &eta, dt, &b);
        let expected = 0.7 * (-b.eigenvalues[3] * dt).exp();
        assert!((next.xi[3] - expected).abs() <= 1e-13 * expected.abs());
    }

    #[test]
    fn constant_forcing_approaches_stationary_state() {
        let b = small_basis();
        let m = b.m();
        let beta = AdvectionMatrix {
            beta: Array2::zeros((m, m)),
            skew_defect: 0.0,
        };
        let mut eta = ForcingVector { eta: vec![0.0; m] };
        eta.eta[0] = 2.0;
        let mut xi = VelocityCoeffs::zeros(m);
        for _ in 0..4000 {
            xi = step_linear(&xi, &beta, &eta, 0.01, &b);
        }
        let lambda = b.eigenvalues[0];
        assert_abs_diff_eq!(xi.xi[0], 2.0 / lambda, epsilon = 2e-4);
    }

    #[test]
    fn spectral_and_matrix_paths_agree() {
        let b = small_basis();
        let m = b.m();
        let mut vc = VelocityCoeffs::zeros(m);
        vc.xi[0] = 0.4;
        vc.xi[5] = -0.3;
        let v = b.synthesize(&vc).unwrap();
        let dense = assemble_advection(&v, &b).unwrap();
        let spectral = SpectralAdvection { basis: &b, v: &v };
        let mut xi = vec![0.0; m];
        xi[2] = 1.0;
        xi[7] = -0.5;
        let mut out_a = vec![0.0; m];
        let mut out_b = vec![0.0; m];
        dense.apply(&xi, &mut out_a);
        spectral.apply(&xi, &mut out_b);
        for (a, bb) in out_a.iter().zip(&out_b) {
            assert_abs_diff_eq!(a, bb, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_time_grid() {
        let b = small_basis();
        let times = vec![0.0, 0.1, 0.3];
        let v = vec![VectorField::zeros(&b.grid); 3];
        let th = vec![ScalarField::zeros(&b.grid); 3];
        let xi0 = VelocityCoeffs::zeros(b.m());
        assert!(solve_linear_nse(&b, &times, &v, &th, &xi0, AdvectionPath::Spectral).is_err());
    }
}
