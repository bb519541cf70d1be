//! Parameter sweeps: independent solves over a grid of values, executed on a
//! small worker pool over the shared immutable basis, aggregated in input
//! order so the output does not depend on the thread count.

use anyhow::{bail, Result};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use bsq_core::field::{ScalarField, VectorField};
use bsq_core::geometry::{Geometry, Grid2};
use bsq_core::transport::interp::ThetaInterp;
use bsq_core::transport::rotation::{periodic_gaussian_value, SwirlField};
use bsq_core::transport::{solve_transport, TransportOptions};

use crate::config::SimConfig;
use crate::scenario::build_initial_state;

/// Run closures over an index range on `threads` workers, collecting results
/// in input order.
fn indexed_pool<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let results: Mutex<Vec<Option<Result<T>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1).min(n.max(1)) {
            scope.spawn(|| loop {
                let idx = {
                    let mut guard = next.lock().unwrap();
                    if *guard >= n {
                        break;
                    }
                    let i = *guard;
                    *guard += 1;
                    i
                };
                let out = f(idx);
                results.lock().unwrap()[idx] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

/// The swirl transport benchmark at one resolution: max-norm error against
/// the closed-form characteristics and the L2 drift.
pub fn rotation_benchmark(n: usize, scheme: ThetaInterp) -> Result<(f64, f64)> {
    let pi = std::f64::consts::PI;
    let g = Grid2::new(Geometry::torus_2pi(), n, n)?;
    let sw = SwirlField::bump((pi, pi), 0.7, 2.5);
    let v = sw.velocity(&g);
    let blob = (pi + 0.9, pi);
    let sigma = 0.5;
    let theta0 =
        ScalarField::from_fn(&g, |x, y| periodic_gaussian_value(&g, blob, sigma, 1.0, x, y));
    let dt = 0.05f64;
    let t_end = 2.0f64;
    let steps = (t_end / dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| dt * k as f64).collect();
    let v_traj = vec![v; times.len()];
    let u_traj = vec![VectorField::zeros(&g); times.len()];
    let opts = TransportOptions {
        theta_interp: scheme,
        limiter: false,
    };
    let traj = solve_transport(&g, &times, &v_traj, &u_traj, &theta0, &opts, false)?;
    let exact = sw.exact_advected(
        &g,
        |x, y| periodic_gaussian_value(&g, blob, sigma, 1.0, x, y),
        t_end,
    );
    let mut err = 0.0f64;
    for (a, b) in traj
        .states
        .last()
        .unwrap()
        .values
        .iter()
        .zip(exact.values.iter())
    {
        err = err.max((a - b).abs());
    }
    let drift = {
        let n0 = g.l2_norm(&theta0.values);
        let n1 = g.l2_norm(&traj.states.last().unwrap().values);
        (n1 - n0).abs() / n0
    };
    Ok((err, drift))
}

pub fn sweep(cfg: &SimConfig, out_dir: &Path, threads: usize) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let hash = cfg.content_hash_hex();
    let mut csv = BufWriter::new(File::create(out_dir.join("sweep.csv"))?);
    writeln!(csv, "# config_hash={hash}")?;

    if cfg.sweep.values.is_empty() {
        // An empty grid is a successful no-op.
        writeln!(csv, "value")?;
        csv.flush()?;
        std::fs::write(
            out_dir.join("sweep.json"),
            serde_json::to_string_pretty(&serde_json::json!({
                "config_hash": hash,
                "mode": cfg.sweep.mode,
                "points": [],
            }))?,
        )?;
        println!("sweep: empty grid, nothing to do");
        return Ok(());
    }

    match cfg.sweep.mode.as_str() {
        "t0" => {
            let basis = cfg.build_basis()?;
            let (state0, _) = build_initial_state(cfg, &basis)?;
            let mut wcfg = cfg.picard_config(&basis)?;
            wcfg.allow_window_growth = false;
            let values = cfg.sweep.values.clone();
            let rows = indexed_pool(values.len(), threads, |i| {
                let sol = bsq_core::picard::solve_window(&basis, &state0, values[i], &wcfg)?;
                Ok((
                    values[i],
                    sol.report.max_ratio(),
                    sol.report.iterations.len(),
                    sol.report.window_len,
                ))
            })?;
            writeln!(csv, "t0,max_ratio,iterations,achieved_len")?;
            for (t0, r, it, len) in &rows {
                writeln!(csv, "{t0:.17e},{r:.17e},{it},{len:.17e}")?;
            }
            let monotone = rows.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
            std::fs::write(
                out_dir.join("sweep.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "config_hash": hash,
                    "mode": "t0",
                    "points": rows.iter().map(|(t0, r, it, len)| serde_json::json!({
                        "t0": t0, "max_ratio": r, "iterations": it, "achieved_len": len,
                    })).collect::<Vec<_>>(),
                    "max_ratio_monotone_nonincreasing": monotone,
                }))?,
            )?;
            println!("t0 sweep complete: monotone nonincreasing = {monotone}");
        }
        "transport-order" => {
            let scheme = cfg
                .theta_interp()?
                .unwrap_or(ThetaInterp::Local { points: 4 });
            let values = cfg.sweep.values.clone();
            let rows = indexed_pool(values.len(), threads, |i| {
                let n = values[i] as usize;
                let (err, drift) = rotation_benchmark(n, scheme)?;
                Ok((n, err, drift))
            })?;
            writeln!(csv, "resolution,linf_error,l2_drift,observed_order")?;
            let mut orders = Vec::new();
            for (i, (n, err, drift)) in rows.iter().enumerate() {
                let order = if i > 0 {
                    (rows[i - 1].1 / err).log2()
                } else {
                    f64::NAN
                };
                orders.push(order);
                let order_txt = if order.is_nan() {
                    "nan".to_string()
                } else {
                    format!("{order:.17e}")
                };
                writeln!(csv, "{n},{err:.17e},{drift:.17e},{order_txt}")?;
            }
            std::fs::write(
                out_dir.join("sweep.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "config_hash": hash,
                    "mode": "transport-order",
                    "scheme_order": scheme.order(),
                    "points": rows.iter().zip(&orders).map(|((n, err, drift), o)| serde_json::json!({
                        "resolution": n, "linf_error": err, "l2_drift": drift,
                        "observed_order": if o.is_nan() { None } else { Some(*o) },
                    })).collect::<Vec<_>>(),
                }))?,
            )?;
            println!(
                "transport-order sweep complete: errors {:?}",
                rows.iter().map(|r| r.1).collect::<Vec<_>>()
            );
        }
        other => bail!("sweep mode {other:?} is not one of \"t0\", \"transport-order\""),
    }
    csv.flush()?;
    Ok(())
}
