//! Stokes eigenbases, the Leray projection, and coefficient/grid transforms.
//!
//! The velocity space is spanned by the first `m` Stokes eigenfunctions of
//! the chosen geometry. On the torus these are the divergence-free Fourier
//! modes (polarization `k_perp/|k|`, eigenvalue `|k|^2`); on the channel they
//! are shear modes at horizontal wavenumber zero plus streamfunction
//! eigenmodes of the clamped fourth-order eigenproblem per wavenumber. All
//! modes are L2-normalized, sorted by eigenvalue with lexicographic
//! tie-breaking, and immutable after construction.

mod channel;
mod legendre;
mod torus;

pub use channel::ChannelModeKind;
pub use legendre::{gauss_legendre, legendre_eval};

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geometry::{Geometry, GeometryKind, Grid2};

/// Coefficient vector of a velocity in the Stokes eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityCoeffs {
    pub xi: Vec<f64>,
}

impl VelocityCoeffs {
    pub fn zeros(m: usize) -> Self {
        Self { xi: vec![0.0; m] }
    }

    pub fn unit(m: usize, j: usize) -> Self {
        let mut xi = vec![0.0; m];
        xi[j] = 1.0;
        Self { xi }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.xi.iter().zip(&other.xi).map(|(a, b)| a * b).sum()
    }

    pub fn add_scaled(&mut self, other: &Self, a: f64) {
        for (u, v) in self.xi.iter_mut().zip(&other.xi) {
            *u += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            xi: self.xi.iter().map(|v| a * v).collect(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.xi.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("velocity coefficients contain non-finite values".into()))
        }
    }

    /// `||u||_{L2}` from the spectral identity.
    pub fn h_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `||grad u||_{L2}` from the spectral identity.
    pub fn v_norm(&self, basis: &StokesBasis) -> f64 {
        self.xi
            .iter()
            .zip(&basis.eigenvalues)
            .map(|(x, l)| l * x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// `||A u||_{L2}` from the spectral identity.
    pub fn da_norm(&self, basis: &StokesBasis) -> f64 {
        self.xi
            .iter()
            .zip(&basis.eigenvalues)
            .map(|(x, l)| l * l * x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Public descriptor of one basis mode, for eigenvalue tables and reports.
#[derive(Clone, Debug, Serialize)]
pub struct ModeDescriptor {
    pub index: usize,
    pub lambda: f64,
    pub label: String,
}

/// All first-order partial derivatives of a velocity sample.
#[derive(Clone, Debug)]
pub struct VelocityGradient {
    pub ux_dx: Array2<f64>,
    pub ux_dy: Array2<f64>,
    pub uy_dx: Array2<f64>,
    pub uy_dy: Array2<f64>,
}

impl VelocityGradient {
    /// Pointwise maximum over all four entries.
    pub fn max_abs(&self) -> f64 {
        [&self.ux_dx, &self.ux_dy, &self.uy_dx, &self.uy_dy]
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Consistency report for a constructed basis.
#[derive(Clone, Debug, Serialize)]
pub struct BasisVerification {
    pub modes: usize,
    pub max_orthonormality_defect: f64,
    pub max_eigen_residual: f64,
    pub max_divergence: f64,
    pub max_wall_value: f64,
    pub rejected_modes: usize,
}

enum BasisImpl {
    Torus(torus::TorusBasis),
    Channel(channel::ChannelBasis),
}

/// Ordered Stokes eigenpairs for a geometry, plus the collocation grid used
/// for all quadrature. Immutable and shareable between solver instances.
pub struct StokesBasis {
    pub geometry: Geometry,
    pub grid: Grid2,
    pub eigenvalues: Vec<f64>,
    rejected_modes: usize,
    inner: BasisImpl,
}

impl StokesBasis {
    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn descriptors(&self) -> Vec<ModeDescriptor> {
        match &self.inner {
            BasisImpl::Torus(b) => b.descriptors(),
            BasisImpl::Channel(b) => b.descriptors(),
        }
    }

    /// u(x) = sum_j xi_j w_j(x) on the collocation grid.
    pub fn synthesize(&self, xi: &VelocityCoeffs) -> Result<VectorField> {
        self.check_len(xi)?;
        Ok(match &self.inner {
            BasisImpl::Torus(b) => b.synthesize(&self.grid, &xi.xi),
            BasisImpl::Channel(b) => b.synthesize(&self.grid, &xi.xi),
        })
    }

    /// All first derivatives of the represented velocity.
    pub fn synthesize_gradient(&self, xi: &VelocityCoeffs) -> Result<VelocityGradient> {
        self.check_len(xi)?;
        Ok(match &self.inner {
            BasisImpl::Torus(b) => b.synthesize_gradient(&self.grid, &xi.xi),
            BasisImpl::Channel(b) => b.synthesize_gradient(&self.grid, &xi.xi),
        })
    }

    /// Pointwise Frobenius norm of the Hessian of both components, used as
    /// the `W^{2,3}` proxy integrand.
    pub fn hessian_magnitude(&self, xi: &VelocityCoeffs) -> Result<Array2<f64>> {
        self.check_len(xi)?;
        Ok(match &self.inner {
            BasisImpl::Torus(b) => b.hessian_magnitude(&self.grid, &xi.xi),
            BasisImpl::Channel(b) => b.hessian_magnitude(&self.grid, &xi.xi),
        })
    }

    /// `P_m P` of a grid vector field: Fourier-space divergence-free
    /// projection plus truncation on the torus, L2 projection onto the mode
    /// span on the channel.
    pub fn leray_project(&self, field: &VectorField) -> Result<VelocityCoeffs> {
        field.check_dims(&self.grid, "leray_project")?;
        Ok(VelocityCoeffs {
            xi: match &self.inner {
                BasisImpl::Torus(b) => b.project(&self.grid, field),
                BasisImpl::Channel(b) => b.project(&self.grid, field),
            },
        })
    }

    /// Coefficients of `P_m P (theta e2)`, the buoyancy forcing.
    pub fn project_buoyancy(&self, theta: &ScalarField) -> Result<VelocityCoeffs> {
        theta.check_dims(&self.grid, "project_buoyancy")?;
        Ok(VelocityCoeffs {
            xi: match &self.inner {
                BasisImpl::Torus(b) => b.project_scalar_e2(&self.grid, &theta.values),
                BasisImpl::Channel(b) => b.project_scalar_e2(&self.grid, &theta.values),
            },
        })
    }

    /// Discrete divergence of a grid field (spectral on the torus,
    /// collocation on the channel); used by strict-mode input validation.
    pub fn divergence(&self, field: &VectorField) -> Result<Array2<f64>> {
        field.check_dims(&self.grid, "divergence")?;
        Ok(match &self.inner {
            BasisImpl::Torus(b) => b.divergence(&self.grid, field),
            BasisImpl::Channel(b) => b.divergence(&self.grid, field),
        })
    }

    pub fn verify(&self) -> BasisVerification {
        let m = self.m();
        let mut max_defect = 0.0f64;
        let mut max_div = 0.0f64;
        let mut max_wall = 0.0f64;
        for j in 0..m {
            let e = VelocityCoeffs::unit(m, j);
            let w = self.synthesize(&e).unwrap();
            let g = self.leray_project(&w).unwrap();
            for (i, &gi) in g.xi.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                max_defect = max_defect.max((gi - target).abs());
            }
            let div = self.divergence(&w).unwrap();
            max_div = max_div.max(div.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
            if self.geometry.kind == GeometryKind::Channel {
                for i in 0..self.grid.nx {
                    for j2 in [0, self.grid.ny - 1] {
                        max_wall = max_wall.max(w.x[(i, j2)].abs()).max(w.y[(i, j2)].abs());
                    }
                }
            }
        }
        let max_eigen_residual = match &self.inner {
            BasisImpl::Torus(_) => 0.0, // analytic eigenpairs; residual is identically zero
            BasisImpl::Channel(b) => b.max_eigen_residual(),
        };
        BasisVerification {
            modes: m,
            max_orthonormality_defect: max_defect,
            max_eigen_residual,
            max_divergence: max_div,
            max_wall_value: max_wall,
            rejected_modes: self.rejected_modes,
        }
    }

    fn check_len(&self, xi: &VelocityCoeffs) -> Result<()> {
        if xi.len() == self.m() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: format!("{} coefficients", self.m()),
                got: format!("{}", xi.len()),
                context: "basis transform",
            })
        }
    }

    pub(crate) fn torus(&self) -> Option<&torus::TorusBasis> {
        match &self.inner {
            BasisImpl::Torus(b) => Some(b),
            BasisImpl::Channel(_) => None,
        }
    }

}

/// Build the torus basis: two real modes per lattice pair `{k, -k}` with
/// `|k| <= max_wavenumber`, eigenvalue `|2 pi (n1/Lx, n2/Ly)|^2`.
pub fn build_torus_basis(
    geometry: Geometry,
    max_wavenumber: usize,
    nx: usize,
    ny: usize,
) -> Result<StokesBasis> {
    if geometry.kind != GeometryKind::Torus {
        return Err(Error::InvalidInput("build_torus_basis requires a torus geometry".into()));
    }
    if max_wavenumber == 0 {
        return Err(Error::InvalidInput("max_wavenumber must be at least 1".into()));
    }
    let needed = 3 * max_wavenumber;
    if nx < needed || ny < needed {
        return Err(Error::ResolutionTooSmall {
            nx,
            ny,
            requested: max_wavenumber,
            needed,
        });
    }
    let grid = Grid2::new(geometry, nx, ny)?;
    let b = torus::TorusBasis::build(&geometry, max_wavenumber);
    let eigenvalues = b.eigenvalues();
    Ok(StokesBasis {
        geometry,
        grid,
        eigenvalues,
        rejected_modes: 0,
        inner: BasisImpl::Torus(b),
    })
}

/// Build the channel basis: `modes_per_k` shear modes at `k = 0` and the
/// lowest `modes_per_k` clamped streamfunction eigenpairs (cosine and sine
/// phases) for each `1 <= k <= kx_max`. Eigenpairs failing the residual gate
/// are dropped and counted.
pub fn build_channel_basis(
    geometry: Geometry,
    kx_max: usize,
    nx: usize,
    ny: usize,
    modes_per_k: usize,
) -> Result<StokesBasis> {
    if geometry.kind != GeometryKind::Channel {
        return Err(Error::InvalidInput("build_channel_basis requires a channel geometry".into()));
    }
    if ny < 16 {
        return Err(Error::InvalidInput(format!("channel needs Ny >= 16, got {ny}")));
    }
    if modes_per_k == 0 {
        return Err(Error::InvalidInput("modes_per_k must be at least 1".into()));
    }
    if nx < 3 * kx_max.max(1) {
        return Err(Error::ResolutionTooSmall {
            nx,
            ny,
            requested: kx_max,
            needed: 3 * kx_max.max(1),
        });
    }
    let grid = Grid2::new(geometry, nx, ny)?;
    let (b, rejected) = channel::ChannelBasis::build(&geometry, &grid, kx_max, modes_per_k)?;
    let eigenvalues = b.eigenvalues();
    Ok(StokesBasis {
        geometry,
        grid,
        eigenvalues,
        rejected_modes: rejected,
        inner: BasisImpl::Channel(b),
    })
}
