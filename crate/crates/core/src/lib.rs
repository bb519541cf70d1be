//! Spectral Galerkin laboratory for the 2D viscous Boussinesq system with a
//! non-diffusive density.
//!
//! The velocity is expanded in a Stokes eigenfunction basis (Fourier modes on
//! the torus, streamfunction eigenmodes in a no-slip channel) and advanced by
//! an integrating-factor Galerkin ODE solver; the density is transported by a
//! semi-Lagrangian scheme with no diffusivity. The full nonlinear system is
//! solved by Picard linearization over short time windows, with the measured
//! contraction ratios, energy identities, a priori inequality constants, and
//! long-time decay trends exposed as first-class diagnostics.

pub mod basis;
pub mod calculus;
pub mod checkpoint;
pub mod diagnostics;
pub mod direct;
pub mod error;
pub mod fft;
pub mod field;
pub mod geometry;
pub mod linear;
pub mod picard;
pub mod transport;

pub use basis::{StokesBasis, VelocityCoeffs};
pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use geometry::{Geometry, GeometryKind, Grid2};
