//! Fixed-schema CSV serialization of diagnostics streams.
//!
//! Column order is part of the schema and never reordered; floats are
//! written with full round-trip precision so repeated runs are byte
//! identical. Header comment lines carry the schema tag and the
//! configuration hash of the producing run.

use std::io::{BufRead, Write};

use super::DiagnosticsRecord;
use crate::error::{Error, Result};

pub const SCHEMA: &str = "bsq-diagnostics-v1";

fn columns() -> Vec<&'static str> {
    let mut cols = vec![
        "time",
        "u_l2",
        "grad_u_l2",
        "au_l2",
        "u_t_l2",
        "theta_l2",
        "theta_l3",
        "theta_l4",
        "u_l4",
        "grad_theta_l2",
        "grad_rho_l2",
        "stokes_residual",
        "grad_u_linf",
        "d2u_l3",
        "energy_total",
        "energy_residual",
        "theta_t_l2",
    ];
    for j in 0..super::PROBE_MODES {
        cols.push(Box::leak(format!("probe_{j}").into_boxed_str()));
    }
    cols
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.17e}")
    }
}

pub fn write_header(config_hash_hex: &str, w: &mut impl Write) -> Result<()> {
    writeln!(w, "# schema={SCHEMA}")?;
    writeln!(w, "# config_hash={config_hash_hex}")?;
    writeln!(w, "{}", columns().join(","))?;
    Ok(())
}

pub fn write_row(r: &DiagnosticsRecord, w: &mut impl Write) -> Result<()> {
    let mut fields = vec![
            fmt(r.time),
            fmt(r.u_l2),
            fmt(r.grad_u_l2),
            fmt(r.au_l2),
            fmt(r.u_t_l2),
            fmt(r.theta_l2),
            fmt(r.theta_l3),
            fmt(r.theta_l4),
            fmt(r.u_l4),
            fmt(r.grad_theta_l2),
            fmt(r.grad_rho_l2),
            fmt(r.stokes_residual),
            fmt(r.grad_u_linf),
            fmt(r.d2u_l3),
            fmt(r.energy_total),
            fmt(r.energy_residual),
            fmt(r.theta_t_l2),
        ];
    for j in 0..super::PROBE_MODES {
        fields.push(fmt(r.buoyancy_probe.get(j).copied().unwrap_or(0.0)));
    }
    writeln!(w, "{}", fields.join(","))?;
    Ok(())
}

pub fn write_csv(
    records: &[DiagnosticsRecord],
    config_hash_hex: &str,
    w: &mut impl Write,
) -> Result<()> {
    write_header(config_hash_hex, w)?;
    for r in records {
        write_row(r, w)?;
    }
    Ok(())
}

pub fn read_csv(r: &mut impl BufRead) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = r.lines();
    let mut header: Option<String> = None;
    for line in lines.by_ref() {
        let line = line?;
        if line.starts_with('#') {
            if line.starts_with("# schema=") && !line.contains(SCHEMA) {
                return Err(Error::InvalidInput(format!("unknown diagnostics schema: {line}")));
            }
            continue;
        }
        header = Some(line);
        break;
    }
    let header = header.ok_or_else(|| Error::InvalidInput("empty diagnostics CSV".into()))?;
    let expected = columns().join(",");
    if header != expected {
        return Err(Error::InvalidInput(format!(
            "diagnostics CSV header mismatch:\n  got      {header}\n  expected {expected}"
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        if s == "nan" {
            Ok(f64::NAN)
        } else {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad float {s:?}: {e}")))
        }
    };
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 17 + super::PROBE_MODES {
            return Err(Error::InvalidInput(format!(
                "diagnostics CSV row has {} fields, expected {}",
                f.len(),
                17 + super::PROBE_MODES
            )));
        }
        let mut probe = Vec::with_capacity(super::PROBE_MODES);
        for j in 0..super::PROBE_MODES {
            probe.push(parse(f[17 + j])?);
        }
        out.push(DiagnosticsRecord {
            time: parse(f[0])?,
            u_l2: parse(f[1])?,
            grad_u_l2: parse(f[2])?,
            au_l2: parse(f[3])?,
            u_t_l2: parse(f[4])?,
            theta_l2: parse(f[5])?,
            theta_l3: parse(f[6])?,
            theta_l4: parse(f[7])?,
            u_l4: parse(f[8])?,
            grad_theta_l2: parse(f[9])?,
            grad_rho_l2: parse(f[10])?,
            stokes_residual: parse(f[11])?,
            grad_u_linf: parse(f[12])?,
            d2u_l3: parse(f[13])?,
            energy_total: parse(f[14])?,
            energy_residual: parse(f[15])?,
            buoyancy_probe: probe,
            theta_t_l2: parse(f[16])?,
        });
    }
    Ok(out)
}
