//! Versioned binary snapshots of the solver state.
//!
//! Layout (all integers and floats little-endian):
//! `magic "BSQSNAP1" | version u32 | config_hash [32] | time f64 |
//!  carried_t0 f64 | m u64 | xi f64*m | nx u64 | ny u64 | theta f64*(nx*ny)`.
//! Coefficients and grid values round-trip bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use crate::basis::{StokesBasis, VelocityCoeffs};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::picard::BoussinesqState;
use ndarray::Array2;

const MAGIC: &[u8; 8] = b"BSQSNAP1";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub config_hash: [u8; 32],
    pub time: f64,
    /// Window length carried by the continuation policy at snapshot time.
    pub carried_t0: f64,
    pub xi: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub theta: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(state: &BoussinesqState, carried_t0: f64, config_hash: [u8; 32]) -> Self {
        let (nx, ny) = state.theta.dims();
        let mut theta = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                theta.push(state.theta.values[(i, j)]);
            }
        }
        Self {
            config_hash,
            time: state.time,
            carried_t0,
            xi: state.xi.xi.clone(),
            nx,
            ny,
            theta,
        }
    }

    pub fn to_state(&self, basis: &StokesBasis) -> Result<BoussinesqState> {
        if self.xi.len() != basis.m() {
            return Err(Error::Checkpoint(format!(
                "snapshot has {} coefficients, basis has {}",
                self.xi.len(),
                basis.m()
            )));
        }
        if (self.nx, self.ny) != (basis.grid.nx, basis.grid.ny) {
            return Err(Error::Checkpoint(format!(
                "snapshot grid {}x{} does not match basis grid {}x{}",
                self.nx, self.ny, basis.grid.nx, basis.grid.ny
            )));
        }
        let mut values = Array2::zeros((self.nx, self.ny));
        for i in 0..self.nx {
            for j in 0..self.ny {
                values[(i, j)] = self.theta[i * self.ny + j];
            }
        }
        Ok(BoussinesqState {
            xi: VelocityCoeffs {
                xi: self.xi.clone(),
            },
            theta: ScalarField { values },
            time: self.time,
        })
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.config_hash)?;
        w.write_all(&self.time.to_le_bytes())?;
        w.write_all(&self.carried_t0.to_le_bytes())?;
        w.write_all(&(self.xi.len() as u64).to_le_bytes())?;
        for v in &self.xi {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.nx as u64).to_le_bytes())?;
        w.write_all(&(self.ny as u64).to_le_bytes())?;
        for v in &self.theta {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut u32b = [0u8; 4];
        r.read_exact(&mut u32b)?;
        let version = u32::from_le_bytes(u32b);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut config_hash = [0u8; 32];
        r.read_exact(&mut config_hash)?;
        let mut f8 = [0u8; 8];
        r.read_exact(&mut f8)?;
        let time = f64::from_le_bytes(f8);
        r.read_exact(&mut f8)?;
        let carried_t0 = f64::from_le_bytes(f8);
        r.read_exact(&mut f8)?;
        let m = u64::from_le_bytes(f8) as usize;
        let mut xi = Vec::with_capacity(m);
        for _ in 0..m {
            r.read_exact(&mut f8)?;
            xi.push(f64::from_le_bytes(f8));
        }
        r.read_exact(&mut f8)?;
        let nx = u64::from_le_bytes(f8) as usize;
        r.read_exact(&mut f8)?;
        let ny = u64::from_le_bytes(f8) as usize;
        let mut theta = Vec::with_capacity(nx * ny);
        for _ in 0..nx * ny {
            r.read_exact(&mut f8)?;
            theta.push(f64::from_le_bytes(f8));
        }
        Ok(Self {
            config_hash,
            time,
            carried_t0,
            xi,
            nx,
            ny,
            theta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_torus_basis;
    use crate::geometry::Geometry;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let b = build_torus_basis(Geometry::torus_2pi(), 2, 12, 12).unwrap();
        let mut state = BoussinesqState::zero(&b);
        state.xi.xi[0] = 0.123456789012345678;
        state.xi.xi[3] = -1.0 / 3.0;
        state.theta.values[(5, 7)] = std::f64::consts::PI;
        state.time = 0.7;
        let snap = Snapshot::from_state(&state, 0.25, [7u8; 32]);
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        let back = Snapshot::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(snap, back);
        let restored = back.to_state(&b).unwrap();
        assert_eq!(restored.xi.xi, state.xi.xi);
        assert_eq!(restored.theta.values, state.theta.values);
        assert_eq!(restored.time, state.time);
    }

    #[test]
    fn snapshot_rejects_wrong_basis() {
        let b1 = build_torus_basis(Geometry::torus_2pi(), 2, 12, 12).unwrap();
        let b2 = build_torus_basis(Geometry::torus_2pi(), 3, 16, 16).unwrap();
        let state = BoussinesqState::zero(&b1);
        let snap = Snapshot::from_state(&state, 0.1, [0u8; 32]);
        assert!(snap.to_state(&b2).is_err());
    }
}
