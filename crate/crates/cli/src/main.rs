//! Batch experiment runner for the spectral Boussinesq laboratory.
//!
//! Subcommands: `basis`, `run`, `picard`, `asymptotics`, `sweep`, `verify`,
//! `plot`. Outputs are a run directory with the config echo, diagnostics and
//! energy CSV streams, verdict JSON, checkpoints, and (after `plot`) SVG
//! figures. `BSQ_OUT` sets the default output root.

mod config;
mod plot;
mod runner;
mod scenario;
mod sweep;
mod verify_cmd;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

use bsq_core::geometry::GeometryKind;

#[derive(Parser)]
#[command(name = "bsq", version, about = "Spectral Galerkin laboratory for 2D viscous Boussinesq flow with a non-diffusive density")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $BSQ_OUT/<scenario>-<hash8> or ./bsq-out/...).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (single runs are always sequential and
    /// deterministic).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Fail on any audit breach, not only on solver errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the Stokes eigenbasis; emit the eigenvalue table and the
    /// verification report.
    Basis,
    /// Full windowed solve with streamed diagnostics and checkpoints.
    Run {
        /// Resume from a checkpoint written by a previous run of the same
        /// configuration.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Contraction study: per-iteration ratio tables over a window-length
    /// list.
    Picard,
    /// Long-horizon run followed by the trend verdicts.
    Asymptotics,
    /// Independent runs over a parameter grid.
    Sweep,
    /// Recompute all audits from a stored run directory.
    Verify,
    /// Emit SVG plots of every diagnostics column of a stored run.
    Plot,
}

fn default_out(cfg: &config::SimConfig) -> PathBuf {
    let root = std::env::var_os("BSQ_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("bsq-out"));
    let hash = cfg.content_hash_hex();
    root.join(format!("{}-{}", cfg.scenario.name, &hash[..8]))
}

fn need_config(cli: &Cli) -> Result<config::SimConfig> {
    let path = cli
        .config
        .as_ref()
        .context("this subcommand requires --config <file.toml>")?;
    config::SimConfig::load(path)
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Basis => {
            let cfg = need_config(cli)?;
            let out = cli.out.clone().unwrap_or_else(|| default_out(&cfg));
            std::fs::create_dir_all(&out)?;
            let basis = cfg.build_basis()?;
            let mut table = String::from("index,lambda,descriptor\n");
            for d in basis.descriptors() {
                table.push_str(&format!("{},{:.17e},{}\n", d.index, d.lambda, d.label));
            }
            std::fs::write(out.join("eigenvalues.csv"), table)?;
            let v = basis.verify();
            std::fs::write(
                out.join("basis_verification.json"),
                serde_json::to_string_pretty(&v)?,
            )?;
            println!(
                "basis: {} modes, orthonormality defect {:.3e}, eigen residual {:.3e}, max wall value {:.3e}, rejected {}",
                v.modes, v.max_orthonormality_defect, v.max_eigen_residual, v.max_wall_value, v.rejected_modes
            );
            if cli.strict {
                let (tol_orth, tol_res) = match basis.geometry.kind {
                    GeometryKind::Torus => (1e-12, 1e-12),
                    GeometryKind::Channel => (1e-8, 1e-6),
                };
                if v.max_orthonormality_defect > tol_orth
                    || v.max_eigen_residual > tol_res
                    || v.max_wall_value > 1e-8
                {
                    bail!("strict mode: basis verification gates breached");
                }
            }
            Ok(())
        }
        Cmd::Run { resume } => {
            let cfg = need_config(cli)?;
            let out = cli.out.clone().unwrap_or_else(|| default_out(&cfg));
            let art = runner::run(&cfg, &out, resume.as_deref(), cli.strict)?;
            println!(
                "run complete: {} samples over {} windows -> {}",
                art.samples,
                art.windows,
                art.out_dir.display()
            );
            Ok(())
        }
        Cmd::Picard => {
            let cfg = need_config(cli)?;
            let out = cli.out.clone().unwrap_or_else(|| default_out(&cfg));
            runner::picard_study(&cfg, &out)
        }
        Cmd::Asymptotics => {
            let cfg = need_config(cli)?;
            let out = cli.out.clone().unwrap_or_else(|| default_out(&cfg));
            let art = runner::run(&cfg, &out, None, cli.strict)?;
            for v in &art.verdicts {
                println!(
                    "{:?}: {} (statistic {:+.4e} vs threshold {:+.4e})",
                    v.status, v.quantity, v.statistic, v.threshold
                );
            }
            Ok(())
        }
        Cmd::Sweep => {
            let cfg = need_config(cli)?;
            let out = cli.out.clone().unwrap_or_else(|| default_out(&cfg));
            sweep::sweep(&cfg, &out, cli.threads)
        }
        Cmd::Verify => {
            let dir = cli
                .out
                .clone()
                .context("verify requires --out <run directory>")?;
            verify_cmd::verify(&dir, cli.strict)
        }
        Cmd::Plot => {
            let dir = cli
                .out
                .clone()
                .context("plot requires --out <run directory>")?;
            let n = plot::plot_run(&dir)?;
            println!("wrote {n} plots to {}", dir.join("plots").display());
            Ok(())
        }
    }
}
