//! Run configuration: TOML on disk, validated, content-addressed.
//!
//! The SHA-256 of the canonical JSON serialization is embedded in every
//! output file so results can always be traced to the exact configuration
//! that produced them.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use bsq_core::basis::{build_channel_basis, build_torus_basis, StokesBasis};
use bsq_core::geometry::Geometry;
use bsq_core::linear::default_advection_path;
use bsq_core::picard::{CouplingMode, InitialGuess, PicardConfig};
use bsq_core::transport::interp::ThetaInterp;
use bsq_core::transport::TransportOptions;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: GeometrySection,
    pub basis: BasisSection,
    pub time: TimeSection,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub transport: TransportSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub kind: String,
    #[serde(default = "tau")]
    pub lx: f64,
    #[serde(default = "tau")]
    pub ly: f64,
}

fn tau() -> f64 {
    std::f64::consts::TAU
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    #[serde(default)]
    pub max_wavenumber: usize,
    #[serde(default)]
    pub kx_max: usize,
    #[serde(default = "default_modes_per_k")]
    pub modes_per_k: usize,
    pub nx: usize,
    pub ny: usize,
}

fn default_modes_per_k() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub horizon: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSection {
    pub tol: f64,
    pub n_max: usize,
    pub t0_init: f64,
    pub t0_max: f64,
    pub contraction_threshold: f64,
    pub max_bisections: usize,
    pub coupling: String,
    pub allow_window_growth: bool,
}

impl Default for PicardSection {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            n_max: 60,
            t0_init: 0.25,
            t0_max: 1.0,
            contraction_threshold: 0.9,
            max_bisections: 6,
            coupling: "co-timestep".into(),
            allow_window_growth: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TransportSection {
    /// "spectral" or "local<points>" with points in {2,4,6,8}.
    pub interpolation: String,
    pub limiter: bool,
}

impl Default for TransportSection {
    fn default() -> Self {
        Self {
            interpolation: "default".into(),
            limiter: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    #[serde(default)]
    pub shear_amplitude: f64,
    /// Reserved for randomized data; current presets are closed-form.
    #[serde(default)]
    pub seed: u64,
}

fn default_amplitude() -> f64 {
    0.5
}

fn default_sigma() -> f64 {
    0.8
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Full diagnostics every this many samples (energy is per sample).
    pub record_every: usize,
    /// Write a numbered checkpoint every this many windows (0 = only latest).
    pub checkpoint_every_windows: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            record_every: 10,
            checkpoint_every_windows: 0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// "t0" or "transport-order".
    pub mode: String,
    pub values: Vec<f64>,
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: SimConfig = toml::from_str(&text).context("parsing config TOML")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.geometry.kind.as_str() {
            "torus" | "channel" => {}
            k => bail!("unknown geometry kind {k:?} (expected \"torus\" or \"channel\")"),
        }
        if self.geometry.lx <= 0.0 || self.geometry.ly <= 0.0 {
            bail!("domain sides must be positive");
        }
        if self.time.dt <= 0.0 || self.time.horizon <= 0.0 {
            bail!("dt and horizon must be positive");
        }
        if self.picard.tol <= 0.0 || self.picard.n_max == 0 {
            bail!("picard tolerance and iteration budget must be positive");
        }
        if self.picard.t0_init <= 0.0 || self.picard.t0_init > self.picard.t0_max {
            bail!("need 0 < t0_init <= t0_max");
        }
        match self.picard.coupling.as_str() {
            "co-timestep" | "alternating" => {}
            c => bail!("unknown coupling mode {c:?}"),
        }
        self.theta_interp()?;
        if self.output.record_every == 0 {
            bail!("record_every must be at least 1");
        }
        if self.geometry.kind == "torus" && self.basis.max_wavenumber == 0 {
            bail!("torus basis needs max_wavenumber >= 1");
        }
        match self.scenario.name.as_str() {
            "zero" | "blob" | "shear-blob" | "stratified-perturbation" => {}
            s => bail!("unknown scenario {s:?}"),
        }
        if !self.sweep.mode.is_empty()
            && !matches!(self.sweep.mode.as_str(), "t0" | "transport-order")
        {
            bail!("unknown sweep mode {:?}", self.sweep.mode);
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Ok(match self.geometry.kind.as_str() {
            "torus" => Geometry::torus(self.geometry.lx, self.geometry.ly)?,
            _ => Geometry::channel(self.geometry.lx)?,
        })
    }

    pub fn build_basis(&self) -> Result<StokesBasis> {
        let geo = self.geometry()?;
        Ok(match self.geometry.kind.as_str() {
            "torus" => build_torus_basis(geo, self.basis.max_wavenumber, self.basis.nx, self.basis.ny)?,
            _ => build_channel_basis(
                geo,
                self.basis.kx_max,
                self.basis.nx,
                self.basis.ny,
                self.basis.modes_per_k,
            )?,
        })
    }

    pub fn theta_interp(&self) -> Result<Option<ThetaInterp>> {
        Ok(match self.transport.interpolation.as_str() {
            "default" => None,
            "spectral" => Some(ThetaInterp::Spectral { factor: 4 }),
            "local2" => Some(ThetaInterp::Local { points: 2 }),
            "local4" => Some(ThetaInterp::Local { points: 4 }),
            "local6" => Some(ThetaInterp::Local { points: 6 }),
            "local8" => Some(ThetaInterp::Local { points: 8 }),
            other => bail!("unknown interpolation {other:?}"),
        })
    }

    pub fn picard_config(&self, basis: &StokesBasis) -> Result<PicardConfig> {
        let interp = self
            .theta_interp()?
            .unwrap_or(TransportOptions::default_for(basis.geometry.kind).theta_interp);
        Ok(PicardConfig {
            dt_target: self.time.dt,
            tol: self.picard.tol,
            n_max: self.picard.n_max,
            t0_init: self.picard.t0_init,
            t0_max: self.picard.t0_max,
            contraction_threshold: self.picard.contraction_threshold,
            max_bisections: self.picard.max_bisections,
            coupling: if self.picard.coupling == "alternating" {
                CouplingMode::Alternating
            } else {
                CouplingMode::CoTimestep
            },
            advection: default_advection_path(basis.geometry.kind),
            theta_interp: interp,
            limiter: self.transport.limiter,
            deriv_every: self.output.record_every,
            initial_guess: InitialGuess::BaseCase,
            allow_window_growth: self.picard.allow_window_growth,
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> [u8; 32] {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        h.finalize().into()
    }

    pub fn content_hash_hex(&self) -> String {
        self.content_hash()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn echo_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config round-trips to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        r#"
[geometry]
kind = "torus"

[basis]
max_wavenumber = 4
nx = 16
ny = 16

[time]
dt = 0.001
horizon = 0.1

[scenario]
name = "blob"
"#
    }

    #[test]
    fn config_round_trips_losslessly() {
        let cfg: SimConfig = toml::from_str(minimal_toml()).unwrap();
        cfg.validate().unwrap();
        let echoed = cfg.echo_toml();
        let back: SimConfig = toml::from_str(&echoed).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.content_hash(), back.content_hash());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let bad = minimal_toml().replace("[time]", "[time]\nbogus = 1\n");
        assert!(toml::from_str::<SimConfig>(&bad).is_err());
        let mut cfg: SimConfig = toml::from_str(minimal_toml()).unwrap();
        cfg.time.dt = -1.0;
        assert!(cfg.validate().is_err());
        cfg.time.dt = 1e-3;
        cfg.scenario.name = "whirlpool".into();
        assert!(cfg.validate().is_err());
    }
}
