//! The `verify` command: recompute every audit from a stored run directory.
//! Works purely from the CSV streams, so verdicts are reproducible from the
//! artifacts alone.

use anyhow::{bail, Context, Result};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use bsq_core::diagnostics::{
    asymptotic_report, csv::read_csv, energy_balance_audit, inequality_audit,
    AsymptoticThresholds, EnergySample, VerdictStatus,
};

fn read_energy_csv(path: &Path) -> Result<Vec<EnergySample>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.starts_with('#') || line.starts_with("time") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            bail!("energy.csv row has {} fields", f.len());
        }
        out.push(EnergySample {
            time: f[0].parse()?,
            energy: f[1].parse()?,
            grad_u_sq: f[2].parse()?,
        });
    }
    Ok(out)
}

pub fn verify(run_dir: &Path, strict: bool) -> Result<()> {
    let diag_path = run_dir.join("diagnostics.csv");
    let file = std::fs::File::open(&diag_path)
        .with_context(|| format!("opening {}", diag_path.display()))?;
    let records = read_csv(&mut BufReader::new(file))?;
    if records.is_empty() {
        bail!("no diagnostics records in {}", diag_path.display());
    }

    let verdicts = asymptotic_report(&records, &AsymptoticThresholds::default());
    let constants = inequality_audit(&records);
    let energy = read_energy_csv(&run_dir.join("energy.csv"))?;
    let audit = energy_balance_audit(&energy)?;

    // Writes to stdout tolerate a closed pipe (e.g. `bsq verify | head`).
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut failures = 0usize;
    let _ = writeln!(out, "energy identity: drift/time = {:.3e}, max residual = {:.3e}",
        audit.drift_per_time, audit.max_residual);
    for v in &verdicts {
        let tag = match v.status {
            VerdictStatus::Pass => "PASS",
            VerdictStatus::Fail => {
                failures += 1;
                "FAIL"
            }
            VerdictStatus::Inconclusive => "INCONCLUSIVE",
        };
        let _ = writeln!(
            out,
            "{tag:12} {:45} statistic {:+.4e} vs threshold {:+.4e} (tail [{:.2}, {:.2}])",
            v.quantity, v.statistic, v.threshold, v.tail_start, v.tail_end
        );
    }
    for c in &constants {
        let _ = writeln!(out, "fitted C = {:>12.5e}  for  {}", c.fitted, c.inequality);
    }

    let report = serde_json::json!({
        "source": diag_path.display().to_string(),
        "records": records.len(),
        "energy": {
            "drift_per_time": audit.drift_per_time,
            "max_residual": audit.max_residual,
        },
        "asymptotics": verdicts,
        "inequality_constants": constants,
    });
    std::fs::write(
        run_dir.join("verify.json"),
        serde_json::to_string_pretty(&report)?,
    )?;

    if strict && failures > 0 {
        bail!("strict mode: {failures} verdict(s) failed");
    }
    Ok(())
}
