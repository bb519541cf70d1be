//! Norms, identities, and long-time verdicts.
//!
//! Every quantity appearing in the a priori estimates is computed here:
//! coefficient-space norms through the exact spectral identities
//! (`||u||^2 = sum xi^2`, `||grad u||^2 = sum lambda xi^2`,
//! `||A u||^2 = sum lambda^2 xi^2`), grid norms through the geometry
//! quadrature, and derivative norms through spectral or collocation
//! differentiation. Audits report fitted constants (the largest ratio that
//! makes an inequality an equality over a trajectory) rather than proving
//! anything; the long-time checks are threshold-based trend verdicts.

pub mod csv;
pub mod decay;

use serde::{Deserialize, Serialize};

use crate::basis::{StokesBasis, VelocityCoeffs};
use crate::calculus::{grad_l2_norm, scalar_gradient};
use crate::error::{Error, Result};
use crate::picard::{BoussinesqState, PicardReport, RunObserver, Sample};

/// Number of leading modes probed for weak convergence of the buoyancy.
pub const PROBE_MODES: usize = 10;

/// Every norm and residual sampled at one time instant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub u_l2: f64,
    pub grad_u_l2: f64,
    pub au_l2: f64,
    /// `||u_t||_{L2}`; NaN when the derivative was not recorded at this
    /// sample.
    pub u_t_l2: f64,
    pub theta_l2: f64,
    pub theta_l3: f64,
    pub theta_l4: f64,
    pub u_l4: f64,
    pub grad_theta_l2: f64,
    /// `||grad rho||_{L2} = ||grad theta + e2||_{L2}`.
    pub grad_rho_l2: f64,
    /// `||A u - P(theta e2)||_{L2}` (identical to the shifted-density form).
    pub stokes_residual: f64,
    /// `max |grad u|` on the grid: the `W^{1,inf}` proxy.
    pub grad_u_linf: f64,
    /// `||D^2 u||_{L3}`: the `W^{2,3}` proxy.
    pub d2u_l3: f64,
    /// `E = (||u||^2 + ||theta||^2)/2`.
    pub energy_total: f64,
    /// Backward-difference residual of the energy identity; 0 at the first
    /// sample, filled by the collector.
    pub energy_residual: f64,
    /// `|(P(theta e2), w_j)|` for the leading modes.
    pub buoyancy_probe: Vec<f64>,
    /// `||theta_t||_{L2}`; NaN when not recorded.
    pub theta_t_l2: f64,
}

/// Compute a full record from an instantaneous state.
pub fn record(
    basis: &StokesBasis,
    state: &BoussinesqState,
    xi_dot: Option<&VelocityCoeffs>,
    theta_dot_l2: Option<f64>,
) -> Result<DiagnosticsRecord> {
    let grid = &basis.grid;
    let xi = &state.xi;
    let theta = &state.theta;
    theta.check_dims(grid, "diagnostics record")?;

    let u_l2 = xi.h_norm();
    let grad_u_l2 = xi.v_norm(basis);
    let au_l2 = xi.da_norm(basis);
    let u_t_l2 = xi_dot.map(|d| d.h_norm()).unwrap_or(f64::NAN);

    let theta_l2 = grid.l2_norm(&theta.values);
    let theta_l3 = grid.lp_norm(&theta.values, 3.0);
    let theta_l4 = grid.lp_norm(&theta.values, 4.0);
    let grad_theta_l2 = grad_l2_norm(grid, &theta.values);

    let (tx, ty) = scalar_gradient(grid, &theta.values);
    let mut rho_sq = 0.0;
    for i in 0..grid.nx {
        let mut row = 0.0;
        for j in 0..grid.ny {
            let gy = ty[(i, j)] + 1.0;
            row += grid.wy[j] * (tx[(i, j)] * tx[(i, j)] + gy * gy);
        }
        rho_sq += grid.wx[i] * row;
    }
    let grad_rho_l2 = rho_sq.sqrt();

    let eta = basis.project_buoyancy(theta)?;
    let mut resid_sq = 0.0;
    let mut probe = vec![0.0; PROBE_MODES.min(basis.m())];
    for j in 0..basis.m() {
        let r = basis.eigenvalues[j] * xi.xi[j] - eta.xi[j];
        resid_sq += r * r;
        if j < probe.len() {
            probe[j] = eta.xi[j].abs();
        }
    }
    let stokes_residual = resid_sq.sqrt();

    let grad = basis.synthesize_gradient(xi)?;
    let grad_u_linf = grad.max_abs();
    let hess = basis.hessian_magnitude(xi)?;
    let d2u_l3 = grid.lp_norm(&hess, 3.0);

    let u = basis.synthesize(xi)?;
    let mut mag = ndarray::Array2::zeros((grid.nx, grid.ny));
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            mag[(i, j)] = u.x[(i, j)].hypot(u.y[(i, j)]);
        }
    }
    let u_l4 = grid.lp_norm(&mag, 4.0);

    let energy_total = 0.5 * (u_l2 * u_l2 + theta_l2 * theta_l2);

    Ok(DiagnosticsRecord {
        time: state.time,
        u_l2,
        grad_u_l2,
        au_l2,
        u_t_l2,
        theta_l2,
        theta_l3,
        theta_l4,
        u_l4,
        grad_theta_l2,
        grad_rho_l2,
        stokes_residual,
        grad_u_linf,
        d2u_l3,
        energy_total,
        energy_residual: 0.0,
        buoyancy_probe: probe,
        theta_t_l2: theta_dot_l2.unwrap_or(f64::NAN),
    })
}

// ---------------------------------------------------------------------------
// Energy identity.
// ---------------------------------------------------------------------------

/// Light per-step energy sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergySample {
    pub time: f64,
    /// `E = (||u||^2 + ||theta||^2)/2`.
    pub energy: f64,
    /// `||grad u||^2`.
    pub grad_u_sq: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyAudit {
    /// Backward-difference residual per interior sample, normalized by E(0).
    pub residual: Vec<f64>,
    /// `|E(T) - E(0) + int ||grad u||^2| / (E(0) * T)`.
    pub drift_per_time: f64,
    pub max_residual: f64,
}

/// Residual of `d/dt E + ||grad u||^2 = 0` along an energy series.
pub fn energy_balance_audit(samples: &[EnergySample]) -> Result<EnergyAudit> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("energy audit needs at least two samples".into()));
    }
    let e0 = samples[0].energy;
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    let mut residual = Vec::with_capacity(samples.len());
    residual.push(0.0);
    let mut dissip = 0.0;
    let mut max_res = 0.0f64;
    for w in samples.windows(2) {
        let dt = w[1].time - w[0].time;
        if dt <= 0.0 {
            return Err(Error::TimeGridMismatch("energy samples must increase in time".into()));
        }
        let mid = 0.5 * (w[0].grad_u_sq + w[1].grad_u_sq);
        let r = ((w[1].energy - w[0].energy) / dt + mid) / scale;
        residual.push(r);
        max_res = max_res.max(r.abs());
        dissip += dt * mid;
    }
    let t_total = samples.last().unwrap().time - samples[0].time;
    let drift = (samples.last().unwrap().energy - e0 + dissip).abs() / (scale * t_total);
    Ok(EnergyAudit {
        residual,
        drift_per_time: drift,
        max_residual: max_res,
    })
}

// ---------------------------------------------------------------------------
// Streaming collector.
// ---------------------------------------------------------------------------

/// Observer that collects the per-step energy series and full records at a
/// cadence, filling the energy residual column on the fly.
pub struct DiagnosticsCollector<'a> {
    basis: &'a StokesBasis,
    pub record_every: usize,
    pub records: Vec<DiagnosticsRecord>,
    pub energy: Vec<EnergySample>,
    pub reports: Vec<PicardReport>,
    pub total_clamped_feet: usize,
    pub max_overshoot: f64,
    samples_seen: usize,
}

impl<'a> DiagnosticsCollector<'a> {
    pub fn new(basis: &'a StokesBasis, record_every: usize) -> Self {
        Self {
            basis,
            record_every: record_every.max(1),
            records: Vec::new(),
            energy: Vec::new(),
            reports: Vec::new(),
            total_clamped_feet: 0,
            max_overshoot: 0.0,
            samples_seen: 0,
        }
    }
}

impl RunObserver for DiagnosticsCollector<'_> {
    fn on_sample(&mut self, s: Sample<'_>) {
        let grid = &self.basis.grid;
        let u_l2 = s.xi.h_norm();
        let grad = s.xi.v_norm(self.basis);
        let theta_l2 = grid.l2_norm(&s.theta.values);
        self.energy.push(EnergySample {
            time: s.time,
            energy: 0.5 * (u_l2 * u_l2 + theta_l2 * theta_l2),
            grad_u_sq: grad * grad,
        });
        self.total_clamped_feet += s.stats.clamped_feet;
        self.max_overshoot = self.max_overshoot.max(s.stats.overshoot);

        if self.samples_seen % self.record_every == 0 {
            let state = BoussinesqState {
                xi: s.xi.clone(),
                theta: s.theta.clone(),
                time: s.time,
            };
            let mut rec = record(self.basis, &state, s.xi_dot, s.theta_dot_l2)
                .expect("diagnostics record on consistent state");
            if self.energy.len() >= 2 {
                let w = &self.energy[self.energy.len() - 2..];
                let dt = w[1].time - w[0].time;
                let e0 = self.energy[0].energy.max(1e-300);
                rec.energy_residual =
                    ((w[1].energy - w[0].energy) / dt + 0.5 * (w[0].grad_u_sq + w[1].grad_u_sq))
                        / e0;
            }
            self.records.push(rec);
        }
        self.samples_seen += 1;
    }

    fn on_window(&mut self, report: &PicardReport) {
        self.reports.push(report.clone());
    }
}

// ---------------------------------------------------------------------------
// Asymptotic verdicts.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticVerdict {
    pub quantity: String,
    pub tail_start: f64,
    pub tail_end: f64,
    /// Trend statistic: tail-max ratio or least-squares slope of the log.
    pub statistic: f64,
    pub threshold: f64,
    pub status: VerdictStatus,
}

#[derive(Clone, Copy, Debug)]
pub struct AsymptoticThresholds {
    /// Tail fraction of the trajectory inspected.
    pub tail_fraction: f64,
    /// (a) `||grad u||` tail max over global max.
    pub grad_u_decay_frac: f64,
    /// (b) residual tail max over global max.
    pub residual_decay_frac: f64,
    /// (c) log-slope bound for `||Au||`.
    pub au_slope_max: f64,
    /// (d) log-slope bound for `||grad rho||` per unit time.
    pub grad_rho_slope_max: f64,
    /// (e) probe tail max over per-mode global max.
    pub probe_frac: f64,
    /// Minimum tail samples for a conclusive verdict.
    pub min_tail_samples: usize,
}

impl Default for AsymptoticThresholds {
    fn default() -> Self {
        Self {
            tail_fraction: 0.25,
            grad_u_decay_frac: 0.05,
            residual_decay_frac: 0.10,
            au_slope_max: 0.0,
            grad_rho_slope_max: 0.05,
            probe_frac: 0.05,
            min_tail_samples: 8,
        }
    }
}

/// Least-squares slope of `log(max(q, floor))` against time.
pub fn log_slope(times: &[f64], q: &[f64]) -> f64 {
    let n = times.len() as f64;
    let floor = 1e-14;
    let mut st = 0.0;
    let mut sy = 0.0;
    for (&t, &v) in times.iter().zip(q) {
        st += t;
        sy += v.max(floor).ln();
    }
    let (tb, yb) = (st / n, sy / n);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &v) in times.iter().zip(q) {
        num += (t - tb) * (v.max(floor).ln() - yb);
        den += (t - tb) * (t - tb);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Long-time trend verdicts over a record stream.
pub fn asymptotic_report(
    records: &[DiagnosticsRecord],
    thresholds: &AsymptoticThresholds,
) -> Vec<AsymptoticVerdict> {
    let n = records.len();
    let tail_len = ((n as f64) * thresholds.tail_fraction).ceil() as usize;
    let conclusive = n >= 4 && tail_len >= thresholds.min_tail_samples;
    let tail_from = n.saturating_sub(tail_len.max(1));
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let tail_start = records.get(tail_from).map(|r| r.time).unwrap_or(0.0);
    let tail_end = records.last().map(|r| r.time).unwrap_or(0.0);

    let series = |f: &dyn Fn(&DiagnosticsRecord) -> f64| -> Vec<f64> {
        records.iter().map(|r| f(r)).collect()
    };
    let tail_ratio = |q: &[f64]| -> f64 {
        let gmax = q.iter().cloned().fold(0.0f64, f64::max);
        let tmax = q[tail_from..].iter().cloned().fold(0.0f64, f64::max);
        if gmax > 0.0 {
            tmax / gmax
        } else {
            0.0
        }
    };
    let status = |ok: bool| {
        if !conclusive {
            VerdictStatus::Inconclusive
        } else if ok {
            VerdictStatus::Pass
        } else {
            VerdictStatus::Fail
        }
    };

    let mut out = Vec::new();

    let grad_u = series(&|r| r.grad_u_l2);
    let s = tail_ratio(&grad_u);
    out.push(AsymptoticVerdict {
        quantity: "grad_u_l2 decay".into(),
        tail_start,
        tail_end,
        statistic: s,
        threshold: thresholds.grad_u_decay_frac,
        status: status(s <= thresholds.grad_u_decay_frac),
    });

    let resid = series(&|r| r.stokes_residual);
    let s = tail_ratio(&resid);
    out.push(AsymptoticVerdict {
        quantity: "stokes_residual decay".into(),
        tail_start,
        tail_end,
        statistic: s,
        threshold: thresholds.residual_decay_frac,
        status: status(s <= thresholds.residual_decay_frac),
    });

    let au = series(&|r| r.au_l2);
    let s = log_slope(&times[tail_from..], &au[tail_from..]);
    out.push(AsymptoticVerdict {
        quantity: "au_l2 bounded (tail log-slope)".into(),
        tail_start,
        tail_end,
        statistic: s,
        threshold: thresholds.au_slope_max,
        status: status(s <= thresholds.au_slope_max),
    });

    let rho = series(&|r| r.grad_rho_l2);
    let s = log_slope(&times[tail_from..], &rho[tail_from..]);
    out.push(AsymptoticVerdict {
        quantity: "grad_rho_l2 sub-exponential (tail log-slope)".into(),
        tail_start,
        tail_end,
        statistic: s,
        threshold: thresholds.grad_rho_slope_max,
        status: status(s <= thresholds.grad_rho_slope_max),
    });

    let probes = records
        .first()
        .map(|r| r.buoyancy_probe.len())
        .unwrap_or(0);
    for j in 0..probes {
        let pj = series(&|r| r.buoyancy_probe[j]);
        let s = tail_ratio(&pj);
        out.push(AsymptoticVerdict {
            quantity: format!("buoyancy_probe_{j} weak decay"),
            tail_start,
            tail_end,
            statistic: s,
            threshold: thresholds.probe_frac,
            status: status(s <= thresholds.probe_frac),
        });
    }

    out
}

// ---------------------------------------------------------------------------
// Inequality audits.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct FittedConstant {
    pub inequality: String,
    pub fitted: f64,
}

/// Fitted constants of the a priori estimates over a record stream (the
/// advecting velocity is the solution itself along converged runs).
pub fn inequality_audit(records: &[DiagnosticsRecord]) -> Vec<FittedConstant> {
    let mut out = Vec::new();
    if records.is_empty() {
        return out;
    }

    // Sobolev embedding: max|grad u| <= C (||grad u|| + ||D2 u||_L3).
    let mut c = 0.0f64;
    for r in records {
        let den = r.grad_u_l2 + r.d2u_l3;
        if den > 1e-300 {
            c = c.max(r.grad_u_linf / den);
        }
    }
    out.push(FittedConstant {
        inequality: "grad_u_linf <= C (grad_u_l2 + d2u_l3)".into(),
        fitted: c,
    });

    // Ladyzhenskaya: ||u||_L4 <= C ||u||^{1/2} ||grad u||^{1/2}.
    let mut c = 0.0f64;
    for r in records {
        let den = (r.u_l2 * r.grad_u_l2).sqrt();
        if den > 1e-300 {
            c = c.max(r.u_l4 / den);
        }
    }
    out.push(FittedConstant {
        inequality: "u_l4 <= C sqrt(u_l2 * grad_u_l2)".into(),
        fitted: c,
    });

    // Gronwall chain: ||grad u(t)||^2 <= (||grad u_0||^2 + int ||theta||^2)
    //                  * exp(C int ||u||^2 ||grad u||^2).
    let mut c = 0.0f64;
    {
        let mut int_theta = 0.0;
        let mut int_w = 0.0;
        let g0 = records[0].grad_u_l2.powi(2);
        for w in records.windows(2) {
            let dt = w[1].time - w[0].time;
            int_theta += 0.5
                * dt
                * (w[0].theta_l2.powi(2) + w[1].theta_l2.powi(2));
            int_w += 0.5
                * dt
                * (w[0].u_l2.powi(2) * w[0].grad_u_l2.powi(2)
                    + w[1].u_l2.powi(2) * w[1].grad_u_l2.powi(2));
            let lhs = w[1].grad_u_l2.powi(2);
            let base = g0 + int_theta;
            if lhs > base && int_w > 0.0 {
                c = c.max((lhs / base).ln() / int_w);
            }
        }
    }
    out.push(FittedConstant {
        inequality: "gronwall: grad_u^2 <= (grad_u0^2 + int theta^2) exp(C int u^2 grad_u^2)".into(),
        fitted: c,
    });

    // Cubic chain: int ||u||_W23^3 <= C (||Au_0||^3
    //              + int ||u|| ||grad u||^2 ||grad u|| ||Au||^2 + int ||theta||_L3^3).
    let mut c = 0.0f64;
    {
        let au0 = records[0].au_l2.powi(3);
        let mut lhs = 0.0;
        let mut rhs_int = 0.0;
        for w in records.windows(2) {
            let dt = w[1].time - w[0].time;
            lhs += 0.5 * dt * (w[0].d2u_l3.powi(3) + w[1].d2u_l3.powi(3));
            let f = |r: &DiagnosticsRecord| {
                r.u_l2 * r.grad_u_l2.powi(2) * r.grad_u_l2 * r.au_l2.powi(2)
                    + r.theta_l3.powi(3)
            };
            rhs_int += 0.5 * dt * (f(&w[0]) + f(&w[1]));
            let rhs = au0 + rhs_int;
            if rhs > 1e-300 {
                c = c.max(lhs / rhs);
            }
        }
    }
    out.push(FittedConstant {
        inequality: "cubic regularity: int d2u_l3^3 <= C (au0^3 + int u grad_u^3 au^2 + int theta_l3^3)"
            .into(),
        fitted: c,
    });

    out
}

// ---------------------------------------------------------------------------
// Function-class membership (finiteness of the discrete proxies).
// ---------------------------------------------------------------------------

/// Finiteness summary of the discrete norms that witness membership of the
/// velocity and density in their function classes over a window, including
/// the dual-norm lower-bound surrogate for the second time derivative.
#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub u_linf_v: f64,
    pub u_l2_da: f64,
    pub u_l3_w23_proxy: f64,
    pub u_t_linf_l2: f64,
    pub u_t_l2_v: f64,
    /// `sup_t max_{j<=J} |xi_ddot_j| / sqrt(lambda_j)`: a lower bound of the
    /// dual-space norm of `u_tt`, monotone in J.
    pub u_tt_vprime_surrogate: f64,
    pub theta_linf_h1: f64,
    pub theta_h1_l2: f64,
    pub all_finite: bool,
}

pub fn membership_report(
    basis: &StokesBasis,
    u: &crate::linear::VelocityTrajectory,
    theta: &crate::transport::ScalarTrajectory,
    records: &[DiagnosticsRecord],
    probe_modes: usize,
) -> MembershipReport {
    let dt = u.dt();
    let mut linf_v = 0.0f64;
    let mut l2_da = 0.0;
    let mut ut_linf = 0.0f64;
    let mut utv = 0.0;
    for k in 0..u.states.len() {
        linf_v = linf_v.max(u.states[k].v_norm(basis));
        let a = u.states[k].da_norm(basis);
        l2_da += dt * a * a;
        ut_linf = ut_linf.max(u.derivs[k].h_norm());
        let g = u.derivs[k].v_norm(basis);
        utv += dt * g * g;
    }
    let mut w23 = 0.0;
    for w in records.windows(2) {
        let dt_r = w[1].time - w[0].time;
        w23 += 0.5 * dt_r * (w[0].d2u_l3.powi(3) + w[1].d2u_l3.powi(3));
    }
    let mut surrogate = 0.0f64;
    let jmax = probe_modes.min(basis.m());
    for k in 1..u.derivs.len() {
        for j in 0..jmax {
            let dd = (u.derivs[k].xi[j] - u.derivs[k - 1].xi[j]) / dt;
            surrogate = surrogate.max(dd.abs() / basis.eigenvalues[j].sqrt());
        }
    }
    let grid = &basis.grid;
    let mut th_h1 = 0.0f64;
    let mut th_dot = 0.0;
    for k in 0..theta.states.len() {
        let l2 = grid.l2_norm(&theta.states[k].values);
        let g = grad_l2_norm(grid, &theta.states[k].values);
        th_h1 = th_h1.max((l2 * l2 + g * g).sqrt());
        th_dot += dt * theta.theta_dot_l2[k].powi(2);
    }
    let vals = [
        linf_v,
        l2_da.sqrt(),
        w23.powf(1.0 / 3.0),
        ut_linf,
        utv.sqrt(),
        surrogate,
        th_h1,
        th_dot.sqrt(),
    ];
    MembershipReport {
        u_linf_v: vals[0],
        u_l2_da: vals[1],
        u_l3_w23_proxy: vals[2],
        u_t_linf_l2: vals[3],
        u_t_l2_v: vals[4],
        u_tt_vprime_surrogate: vals[5],
        theta_linf_h1: vals[6],
        theta_h1_l2: vals[7],
        all_finite: vals.iter().all(|v| v.is_finite()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_torus_basis;
    use crate::field::ScalarField;
    use crate::geometry::Geometry;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spectral_identities_on_a_single_mode() {
        let b = build_torus_basis(Geometry::torus_2pi(), 4, 32, 32).unwrap();
        let state = BoussinesqState {
            xi: VelocityCoeffs::unit(b.m(), 0),
            theta: ScalarField::zeros(&b.grid),
            time: 0.0,
        };
        let r = record(&b, &state, None, None).unwrap();
        assert_abs_diff_eq!(r.u_l2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.grad_u_l2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.au_l2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_theta_norms() {
        let b = build_torus_basis(Geometry::torus_2pi(), 4, 64, 64).unwrap();
        let theta = ScalarField::from_fn(&b.grid, |x, _| x.sin());
        let state = BoussinesqState {
            xi: VelocityCoeffs::zeros(b.m()),
            theta,
            time: 0.0,
        };
        let r = record(&b, &state, None, None).unwrap();
        let expected = (2.0 * std::f64::consts::PI * std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(r.theta_l2, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(r.grad_theta_l2, expected, epsilon = 1e-10);
    }

    #[test]
    fn energy_audit_flags_nothing_on_zero_series() {
        let samples: Vec<EnergySample> = (0..10)
            .map(|k| EnergySample {
                time: 0.1 * k as f64,
                energy: 0.0,
                grad_u_sq: 0.0,
            })
            .collect();
        let audit = energy_balance_audit(&samples).unwrap();
        assert_eq!(audit.max_residual, 0.0);
        assert_eq!(audit.drift_per_time, 0.0);
    }

    #[test]
    fn asymptotics_pass_on_synthetic_decay() {
        // ||grad u|| = e^{-t} passes; grad_rho = 1 + 0.01 t is sub-exponential.
        let records: Vec<DiagnosticsRecord> = (0..200)
            .map(|k| {
                let t = 0.25 * k as f64;
                DiagnosticsRecord {
                    time: t,
                    u_l2: (-t).exp(),
                    grad_u_l2: (-t).exp(),
                    au_l2: (-t).exp(),
                    u_t_l2: 0.0,
                    theta_l2: 1.0,
                    theta_l3: 1.0,
                    theta_l4: 1.0,
                    u_l4: 0.0,
                    grad_theta_l2: 1.0,
                    grad_rho_l2: 1.0 + 0.01 * t,
                    stokes_residual: (-t).exp(),
                    grad_u_linf: 0.0,
                    d2u_l3: 0.0,
                    energy_total: 0.0,
                    energy_residual: 0.0,
                    buoyancy_probe: vec![(-t).exp(); PROBE_MODES],
                    theta_t_l2: 0.0,
                }
            })
            .collect();
        let verdicts = asymptotic_report(&records, &AsymptoticThresholds::default());
        for v in &verdicts {
            assert_eq!(v.status, VerdictStatus::Pass, "{} failed: {}", v.quantity, v.statistic);
        }
    }

    #[test]
    fn short_trajectories_are_inconclusive() {
        let records: Vec<DiagnosticsRecord> = (0..3)
            .map(|k| DiagnosticsRecord {
                time: k as f64,
                u_l2: 0.0,
                grad_u_l2: 0.0,
                au_l2: 0.0,
                u_t_l2: 0.0,
                theta_l2: 0.0,
                theta_l3: 0.0,
                theta_l4: 0.0,
                u_l4: 0.0,
                grad_theta_l2: 0.0,
                grad_rho_l2: 0.0,
                stokes_residual: 0.0,
                grad_u_linf: 0.0,
                d2u_l3: 0.0,
                energy_total: 0.0,
                energy_residual: 0.0,
                buoyancy_probe: vec![0.0; PROBE_MODES],
                theta_t_l2: 0.0,
            })
            .collect();
        let verdicts = asymptotic_report(&records, &AsymptoticThresholds::default());
        assert!(verdicts.iter().all(|v| v.status == VerdictStatus::Inconclusive));
    }

    #[test]
    fn ladyzhenskaya_ratio_is_scale_invariant() {
        let b = build_torus_basis(Geometry::torus_2pi(), 4, 32, 32).unwrap();
        let mut xi = VelocityCoeffs::zeros(b.m());
        xi.xi[0] = 0.7;
        xi.xi[5] = -0.2;
        let mk = |scale: f64| {
            let state = BoussinesqState {
                xi: xi.scaled(scale),
                theta: ScalarField::zeros(&b.grid),
                time: 0.0,
            };
            record(&b, &state, None, None).unwrap()
        };
        let r1 = mk(1.0);
        let r10 = mk(10.0);
        let ratio = |r: &DiagnosticsRecord| r.u_l4 / (r.u_l2 * r.grad_u_l2).sqrt();
        assert_abs_diff_eq!(ratio(&r1), ratio(&r10), epsilon = 1e-12);
    }
}
