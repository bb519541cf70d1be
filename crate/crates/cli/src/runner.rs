//! The `run` / `asymptotics` driver: executes the windowed solve, streaming
//! diagnostics to CSV, checkpointing at window boundaries, and emitting the
//! verdict and report JSON at the end. Exit status reflects solver success;
//! `--strict` additionally fails on audit breaches.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bsq_core::basis::StokesBasis;
use bsq_core::checkpoint::Snapshot;
use bsq_core::diagnostics::{
    self, asymptotic_report, energy_balance_audit, inequality_audit, AsymptoticThresholds,
    AsymptoticVerdict, DiagnosticsRecord, EnergySample, VerdictStatus,
};
use bsq_core::picard::{
    solve_boussinesq, BoussinesqState, PicardConfig, PicardReport, RunObserver, Sample,
};

use crate::config::SimConfig;
use crate::scenario::{build_initial_state, ScenarioNorms};

pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub samples: usize,
    pub windows: usize,
    pub verdicts: Vec<AsymptoticVerdict>,
}

struct StreamObserver<'a> {
    basis: &'a StokesBasis,
    record_every: usize,
    diag: BufWriter<File>,
    energy_file: BufWriter<File>,
    ckpt_dir: PathBuf,
    checkpoint_every_windows: usize,
    config_hash: [u8; 32],
    samples_seen: usize,
    windows_seen: usize,
    records: Vec<DiagnosticsRecord>,
    energy: Vec<EnergySample>,
    reports: Vec<PicardReport>,
    total_clamped_feet: usize,
    max_overshoot: f64,
    io_error: Option<std::io::Error>,
}

impl StreamObserver<'_> {
    fn write_energy_row(&mut self, s: &EnergySample) {
        if self.io_error.is_some() {
            return;
        }
        if let Err(e) = writeln!(
            self.energy_file,
            "{:.17e},{:.17e},{:.17e}",
            s.time, s.energy, s.grad_u_sq
        ) {
            self.io_error = Some(e);
        }
    }
}

impl RunObserver for StreamObserver<'_> {
    fn on_sample(&mut self, s: Sample<'_>) {
        let u_l2 = s.xi.h_norm();
        let grad = s.xi.v_norm(self.basis);
        let theta_l2 = self.basis.grid.l2_norm(&s.theta.values);
        let es = EnergySample {
            time: s.time,
            energy: 0.5 * (u_l2 * u_l2 + theta_l2 * theta_l2),
            grad_u_sq: grad * grad,
        };
        self.write_energy_row(&es);
        self.energy.push(es);
        self.total_clamped_feet += s.stats.clamped_feet;
        self.max_overshoot = self.max_overshoot.max(s.stats.overshoot);

        if self.samples_seen % self.record_every == 0 {
            let state = BoussinesqState {
                xi: s.xi.clone(),
                theta: s.theta.clone(),
                time: s.time,
            };
            let mut rec = diagnostics::record(self.basis, &state, s.xi_dot, s.theta_dot_l2)
                .expect("record on consistent state");
            if self.energy.len() >= 2 {
                let w = &self.energy[self.energy.len() - 2..];
                let dt = w[1].time - w[0].time;
                let e0 = self.energy[0].energy.max(1e-300);
                rec.energy_residual = ((w[1].energy - w[0].energy) / dt
                    + 0.5 * (w[0].grad_u_sq + w[1].grad_u_sq))
                    / e0;
            }
            if self.io_error.is_none() {
                if let Err(e) = diagnostics::csv::write_row(&rec, &mut self.diag)
                    .map_err(std::io::Error::other)
                {
                    self.io_error = Some(e);
                }
            }
            self.records.push(rec);
        }
        self.samples_seen += 1;
    }

    fn on_window(&mut self, report: &PicardReport) {
        self.reports.push(report.clone());
    }

    fn on_checkpoint(&mut self, state: &BoussinesqState, next_t0: f64) {
        self.windows_seen += 1;
        let snap = Snapshot::from_state(state, next_t0, self.config_hash);
        let latest = self.ckpt_dir.join("latest.bin");
        let tmp = self.ckpt_dir.join("latest.bin.tmp");
        if snap.save(&tmp).is_ok() {
            let _ = std::fs::rename(&tmp, &latest);
        }
        if self.checkpoint_every_windows > 0
            && self.windows_seen % self.checkpoint_every_windows == 0
        {
            let numbered = self.ckpt_dir.join(format!("window_{:06}.bin", self.windows_seen));
            let _ = snap.save(&numbered);
        }
    }
}

#[derive(Serialize)]
struct RunVerdicts<'a> {
    config_hash: String,
    scenario: &'a ScenarioNorms,
    samples: usize,
    windows: usize,
    total_window_bisections: usize,
    max_contraction_ratio: f64,
    energy_drift_per_time: f64,
    energy_max_residual: f64,
    asymptotics: &'a [AsymptoticVerdict],
    inequality_constants: Vec<bsq_core::diagnostics::FittedConstant>,
    total_clamped_feet: usize,
    max_overshoot: f64,
}

/// Execute a full run into `out_dir`.
pub fn run(
    cfg: &SimConfig,
    out_dir: &Path,
    resume: Option<&Path>,
    strict: bool,
) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let ckpt_dir = out_dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir)?;
    std::fs::write(out_dir.join("config.toml"), cfg.echo_toml())?;
    let hash = cfg.content_hash();
    let hash_hex = cfg.content_hash_hex();

    let basis = cfg.build_basis().context("building the basis")?;
    let (fresh_state, norms) = build_initial_state(cfg, &basis)?;
    let mut picard_cfg: PicardConfig = cfg.picard_config(&basis)?;

    let state0 = match resume {
        None => fresh_state,
        Some(path) => {
            let snap = Snapshot::load(path)
                .with_context(|| format!("loading checkpoint {}", path.display()))?;
            if snap.config_hash != hash {
                bail!(
                    "checkpoint {} was produced by a different configuration",
                    path.display()
                );
            }
            picard_cfg.t0_init = snap.carried_t0;
            snap.to_state(&basis)?
        }
    };

    let mut diag = BufWriter::new(File::create(out_dir.join("diagnostics.csv"))?);
    diagnostics::csv::write_header(&hash_hex, &mut diag).map_err(std::io::Error::other)?;
    let mut energy_file = BufWriter::new(File::create(out_dir.join("energy.csv"))?);
    writeln!(energy_file, "# config_hash={hash_hex}")?;
    writeln!(energy_file, "time,energy,grad_u_sq")?;

    let mut obs = StreamObserver {
        basis: &basis,
        record_every: cfg.output.record_every,
        diag,
        energy_file,
        ckpt_dir,
        checkpoint_every_windows: cfg.output.checkpoint_every_windows,
        config_hash: hash,
        samples_seen: 0,
        windows_seen: 0,
        records: Vec::new(),
        energy: Vec::new(),
        reports: Vec::new(),
        total_clamped_feet: 0,
        max_overshoot: 0.0,
        io_error: None,
    };

    let solve_result = solve_boussinesq(&basis, &state0, cfg.time.horizon, &picard_cfg, &mut obs);

    obs.diag.flush()?;
    obs.energy_file.flush()?;
    if let Some(e) = obs.io_error.take() {
        return Err(e.into());
    }
    // Reports are preserved even when the solver fails mid-run.
    std::fs::write(
        out_dir.join("picard_reports.json"),
        serde_json::to_string_pretty(&obs.reports)?,
    )?;
    let run = solve_result.context("solver did not converge; partial outputs preserved")?;

    let verdicts = asymptotic_report(&obs.records, &AsymptoticThresholds::default());
    let energy_audit = energy_balance_audit(&obs.energy)?;
    let constants = inequality_audit(&obs.records);
    let summary = RunVerdicts {
        config_hash: hash_hex.clone(),
        scenario: &norms,
        samples: run.total_samples,
        windows: run.reports.len(),
        total_window_bisections: run.reports.iter().map(|r| r.bisections).sum(),
        max_contraction_ratio: run
            .reports
            .iter()
            .map(|r| r.max_ratio())
            .fold(0.0, f64::max),
        energy_drift_per_time: energy_audit.drift_per_time,
        energy_max_residual: energy_audit.max_residual,
        asymptotics: &verdicts,
        inequality_constants: constants,
        total_clamped_feet: obs.total_clamped_feet,
        max_overshoot: obs.max_overshoot,
    };
    std::fs::write(
        out_dir.join("verdicts.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;

    if strict {
        let failed: Vec<&AsymptoticVerdict> = verdicts
            .iter()
            .filter(|v| v.status == VerdictStatus::Fail)
            .collect();
        if !failed.is_empty() {
            bail!(
                "strict mode: {} asymptotic verdict(s) failed: {}",
                failed.len(),
                failed
                    .iter()
                    .map(|v| v.quantity.clone())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
    }

    Ok(RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        samples: run.total_samples,
        windows: run.reports.len(),
        verdicts,
    })
}

/// The `picard` study: contraction-ratio tables over a window-length list.
pub fn picard_study(cfg: &SimConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let basis = cfg.build_basis()?;
    let (state0, _) = build_initial_state(cfg, &basis)?;
    let picard_cfg = cfg.picard_config(&basis)?;
    let t0_list: Vec<f64> = if cfg.sweep.values.is_empty() {
        vec![0.4, 0.2, 0.1, 0.05]
    } else {
        cfg.sweep.values.clone()
    };

    let mut csv = BufWriter::new(File::create(out_dir.join("ratios.csv"))?);
    writeln!(csv, "# config_hash={}", cfg.content_hash_hex())?;
    writeln!(csv, "t0,n,composite,ratio")?;
    let mut summary = Vec::new();
    for &t0 in &t0_list {
        let mut wcfg = picard_cfg;
        wcfg.allow_window_growth = false;
        let sol = bsq_core::picard::solve_window(&basis, &state0, t0, &wcfg)?;
        for rec in &sol.report.iterations {
            writeln!(
                csv,
                "{:.17e},{},{:.17e},{:.17e}",
                t0, rec.n, rec.composite, rec.ratio
            )?;
        }
        summary.push(serde_json::json!({
            "t0": t0,
            "achieved_len": sol.report.window_len,
            "iterations": sol.report.iterations.len(),
            "max_ratio": sol.report.max_ratio(),
            "converged": sol.report.converged,
        }));
    }
    csv.flush()?;
    let max_ratios: Vec<f64> = summary
        .iter()
        .map(|s| s["max_ratio"].as_f64().unwrap())
        .collect();
    let monotone = max_ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    std::fs::write(
        out_dir.join("picard_summary.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "config_hash": cfg.content_hash_hex(),
            "windows": summary,
            "max_ratio_monotone_nonincreasing": monotone,
        }))?,
    )?;
    println!(
        "picard study: t0 {:?} -> max ratios {:?} (monotone: {monotone})",
        t0_list, max_ratios
    );
    Ok(())
}
