//! Static SVG line plots of diagnostics columns. No external renderer: the
//! files are plain polyline SVGs with axes, ticks, and a tail-slope
//! annotation, so they diff cleanly and build identically everywhere.

use anyhow::{bail, Context, Result};
use std::io::BufReader;
use std::path::Path;

use bsq_core::diagnostics::{csv::read_csv, log_slope, DiagnosticsRecord};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

/// Columns plotted on a log axis when strictly positive.
const LOG_COLUMNS: &[&str] = &[
    "u_l2",
    "grad_u_l2",
    "au_l2",
    "u_t_l2",
    "stokes_residual",
    "energy_total",
];

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    (0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect()
}

fn svg_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render one series as a complete SVG document.
fn line_plot(
    title: &str,
    xs: &[f64],
    ys: &[f64],
    logy: bool,
    annotation: Option<String>,
) -> String {
    let floor = 1e-16;
    let ty: Vec<f64> = if logy {
        ys.iter().map(|v| v.max(floor).log10()).collect()
    } else {
        ys.to_vec()
    };
    let (x0, x1) = (xs[0], xs[xs.len() - 1]);
    let mut ylo = ty.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut yhi = ty.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(yhi > ylo) {
        ylo -= 1.0;
        yhi += 1.0;
    }
    let pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;

    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0).max(1e-300) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - ylo) / (yhi - ylo) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"16\">{}</text>\n",
        MARGIN_L,
        svg_escape(title)
    ));
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    out.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    ));
    for t in nice_ticks(x0, x1, 5) {
        let x = px(t);
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{t:.3}</text>\n",
            HEIGHT - MARGIN_B + 18.0
        ));
    }
    for t in nice_ticks(ylo, yhi, 5) {
        let y = py(t);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{MARGIN_L}\" y2=\"{y}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0
        ));
        let label = if logy {
            format!("1e{t:.1}")
        } else {
            format!("{t:.3e}")
        };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_L - 8.0,
            y + 4.0
        ));
    }
    // Data polyline.
    let pts: Vec<String> = xs
        .iter()
        .zip(&ty)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    out.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        pts.join(" ")
    ));
    if let Some(a) = annotation {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"13\" fill=\"#b23b1f\">{}</text>\n",
            MARGIN_L + 10.0,
            MARGIN_T + 16.0,
            svg_escape(&a)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn column_series(records: &[DiagnosticsRecord]) -> Vec<(String, Vec<f64>)> {
    let mut cols: Vec<(String, Vec<f64>)> = vec![
        ("u_l2".into(), records.iter().map(|r| r.u_l2).collect()),
        ("grad_u_l2".into(), records.iter().map(|r| r.grad_u_l2).collect()),
        ("au_l2".into(), records.iter().map(|r| r.au_l2).collect()),
        ("u_t_l2".into(), records.iter().map(|r| r.u_t_l2).collect()),
        ("theta_l2".into(), records.iter().map(|r| r.theta_l2).collect()),
        ("theta_l3".into(), records.iter().map(|r| r.theta_l3).collect()),
        ("grad_theta_l2".into(), records.iter().map(|r| r.grad_theta_l2).collect()),
        ("grad_rho_l2".into(), records.iter().map(|r| r.grad_rho_l2).collect()),
        ("stokes_residual".into(), records.iter().map(|r| r.stokes_residual).collect()),
        ("grad_u_linf".into(), records.iter().map(|r| r.grad_u_linf).collect()),
        ("d2u_l3".into(), records.iter().map(|r| r.d2u_l3).collect()),
        ("energy_total".into(), records.iter().map(|r| r.energy_total).collect()),
        ("energy_residual".into(), records.iter().map(|r| r.energy_residual).collect()),
    ];
    let probes = records.first().map(|r| r.buoyancy_probe.len()).unwrap_or(0);
    for j in 0..probes {
        cols.push((
            format!("probe_{j}"),
            records.iter().map(|r| r.buoyancy_probe[j]).collect(),
        ));
    }
    cols
}

/// Emit one SVG per diagnostics column into `<run_dir>/plots`.
pub fn plot_run(run_dir: &Path) -> Result<usize> {
    let csv_path = run_dir.join("diagnostics.csv");
    let file = std::fs::File::open(&csv_path)
        .with_context(|| format!("opening {}", csv_path.display()))?;
    let records = read_csv(&mut BufReader::new(file))?;
    if records.is_empty() {
        bail!("diagnostics CSV has no data rows; nothing to plot");
    }
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let plots_dir = run_dir.join("plots");
    std::fs::create_dir_all(&plots_dir)?;
    let mut written = 0usize;
    for (name, ys) in column_series(&records) {
        if ys.iter().all(|v| v.is_nan()) {
            eprintln!("plot: skipping column {name} (no recorded values)");
            continue;
        }
        let clean: Vec<(f64, f64)> = times
            .iter()
            .zip(&ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&t, &y)| (t, y))
            .collect();
        if clean.len() < 2 {
            eprintln!("plot: skipping column {name} (fewer than two finite samples)");
            continue;
        }
        let (txs, tys): (Vec<f64>, Vec<f64>) = clean.into_iter().unzip();
        let logy = LOG_COLUMNS.contains(&name.as_str()) && tys.iter().all(|v| *v > 0.0);
        // Tail slope of ln(quantity) per unit time.
        let tail_from = txs.len() - (txs.len() / 4).max(2).min(txs.len());
        let slope = log_slope(&txs[tail_from..], &tys[tail_from..]);
        let annotation = Some(format!("tail d/dt ln = {slope:.4e}"));
        let svg = line_plot(&format!("{name} vs time"), &txs, &tys, logy, annotation);
        std::fs::write(plots_dir.join(format!("{name}.svg")), svg)?;
        written += 1;
    }
    Ok(written)
}
