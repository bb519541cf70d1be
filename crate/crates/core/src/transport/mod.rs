//! Semi-Lagrangian solver for the non-diffusive density equation
//! `theta_t + v . grad theta = -u . e2`.
//!
//! Each step back-traces the characteristic through the time-interpolated
//! velocity with a second-order Runge-Kutta, reads `theta` at the foot point
//! (trigonometric interpolation on the torus, one-sided local stencils at the
//! channel walls), and accumulates the forcing along the characteristic with
//! the trapezoid rule. The scheme is unconditionally stable and adds no
//! artificial diffusivity beyond interpolation error; an optional monotone
//! limiter clamps foot values to their surrounding cell range.
//!
//! Channel feet cannot leave the domain for an admissible velocity
//! (`v . n = 0` at the walls); a foot beyond one boundary cell therefore
//! signals a corrupted velocity and is a hard error, while marginal
//! excursions are clamped back and counted.

pub mod interp;
pub mod rotation;

use ndarray::Array2;
use serde::Serialize;

use crate::calculus::scalar_gradient;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geometry::{GeometryKind, Grid2};
use crate::linear::check_uniform_times;
use interp::{ChannelInterpolant, ThetaInterp, TorusInterpolant};

/// Number of stencil points used when reading velocities off-grid. Velocity
/// samples are smooth (band-limited synthesis), so a fixed high order is
/// accurate without oversampling.
const VELOCITY_POINTS: usize = 8;

#[derive(Clone, Copy, Debug)]
pub struct TransportOptions {
    pub theta_interp: ThetaInterp,
    /// Quasi-monotone limiter (off by default).
    pub limiter: bool,
}

impl TransportOptions {
    pub fn default_for(kind: GeometryKind) -> Self {
        match kind {
            GeometryKind::Torus => Self {
                theta_interp: ThetaInterp::Spectral { factor: 4 },
                limiter: false,
            },
            GeometryKind::Channel => Self {
                theta_interp: ThetaInterp::Local { points: 6 },
                limiter: false,
            },
        }
    }
}

/// Per-step monitoring counters.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct StepStats {
    /// Channel feet nudged back inside the domain.
    pub clamped_feet: usize,
    /// Worst interpolation overshoot beyond the pre-step range of `theta`.
    pub overshoot: f64,
}

/// Density trajectory on a uniform time grid. `theta_dot` is reconstructed
/// from the discrete identity `theta_t = -v . grad theta - u2`; its L2 norm
/// is always recorded, the full fields only on request.
#[derive(Clone, Debug)]
pub struct ScalarTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ScalarField>,
    pub theta_dot_l2: Vec<f64>,
    pub theta_dot: Option<Vec<ScalarField>>,
    pub stats: Vec<StepStats>,
}

impl ScalarTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

enum Interpolant {
    Torus(TorusInterpolant),
    Channel(ChannelInterpolant),
}

impl Interpolant {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Interpolant::Torus(t) => t.eval(x, y),
            Interpolant::Channel(c) => c.eval(x, y),
        }
    }

    fn cell_bounds(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Interpolant::Torus(t) => t.cell_bounds(x, y),
            Interpolant::Channel(c) => c.cell_bounds(x, y),
        }
    }
}

fn theta_interpolant(grid: &Grid2, data: &Array2<f64>, scheme: ThetaInterp) -> Interpolant {
    match (grid.geometry.kind, scheme) {
        (GeometryKind::Torus, ThetaInterp::Spectral { factor }) => {
            Interpolant::Torus(TorusInterpolant::spectral(grid, data, factor))
        }
        (GeometryKind::Torus, ThetaInterp::Local { points }) => {
            Interpolant::Torus(TorusInterpolant::local(grid, data, points))
        }
        // Spectral reads are a torus feature; the channel always uses local
        // stencils.
        (GeometryKind::Channel, _) => {
            let points = match scheme {
                ThetaInterp::Local { points } => points,
                ThetaInterp::Spectral { .. } => 6,
            };
            Interpolant::Channel(ChannelInterpolant::new(grid, data, points))
        }
    }
}

fn velocity_interpolant(grid: &Grid2, data: &Array2<f64>) -> Interpolant {
    match grid.geometry.kind {
        GeometryKind::Torus => Interpolant::Torus(TorusInterpolant::local(
            grid,
            data,
            VELOCITY_POINTS,
        )),
        GeometryKind::Channel => {
            Interpolant::Channel(ChannelInterpolant::new(grid, data, VELOCITY_POINTS))
        }
    }
}

/// Foot-traced part of one step: `theta` read at the feet with the start-side
/// half of the forcing already accumulated. The feet depend only on the
/// advecting field, so one prepared step can be finished against several
/// candidate end-side forcings (the coupling passes reuse it).
pub struct PreparedStep {
    vals: Array2<f64>,
    pub stats: StepStats,
}

/// Finish a prepared step with the end-side forcing sample.
pub fn advect_finish(parts: &PreparedStep, u2_end: &Array2<f64>, dt: f64) -> ScalarField {
    let mut out = parts.vals.clone();
    out.zip_mut_with(u2_end, |v, &u| *v -= 0.5 * dt * u);
    ScalarField { values: out }
}

/// One semi-Lagrangian step of length `dt` from the fields at the step start
/// to the step end.
pub fn advect_step(
    theta: &ScalarField,
    v_start: &VectorField,
    v_end: &VectorField,
    u2_start: &Array2<f64>,
    u2_end: &Array2<f64>,
    dt: f64,
    grid: &Grid2,
    opts: &TransportOptions,
) -> Result<(ScalarField, StepStats)> {
    let parts = advect_prepare(theta, v_start, v_end, u2_start, dt, grid, opts)?;
    let out = advect_finish(&parts, u2_end, dt);
    Ok((out, parts.stats))
}

/// Back-trace the characteristics and read `theta` plus the start-side
/// forcing at the feet.
pub fn advect_prepare(
    theta: &ScalarField,
    v_start: &VectorField,
    v_end: &VectorField,
    u2_start: &Array2<f64>,
    dt: f64,
    grid: &Grid2,
    opts: &TransportOptions,
) -> Result<PreparedStep> {
    if dt <= 0.0 {
        return Err(Error::InvalidInput("advect_step needs dt > 0".into()));
    }
    theta.check_dims(grid, "advect_step theta")?;
    v_start.check_dims(grid, "advect_step v")?;
    v_end.check_dims(grid, "advect_step v")?;

    // Midpoint-in-time advecting field.
    let mut v_mid = v_start.clone();
    v_mid.add_scaled(v_end, 1.0);
    v_mid.x.mapv_inplace(|v| 0.5 * v);
    v_mid.y.mapv_inplace(|v| 0.5 * v);

    let th = theta_interpolant(grid, &theta.values, opts.theta_interp);
    let vmx = velocity_interpolant(grid, &v_mid.x);
    let vmy = velocity_interpolant(grid, &v_mid.y);
    let u2s = velocity_interpolant(grid, u2_start);
    // Limiter bounds come from the original grid values (a spectrally
    // refined sample may itself overshoot the grid range).
    let bounds_src = if opts.limiter {
        Some(match grid.geometry.kind {
            GeometryKind::Torus => {
                Interpolant::Torus(TorusInterpolant::local(grid, &theta.values, 2))
            }
            GeometryKind::Channel => {
                Interpolant::Channel(ChannelInterpolant::new(grid, &theta.values, 2))
            }
        })
    } else {
        None
    };

    let is_channel = grid.geometry.kind == GeometryKind::Channel;
    // Interpolation reach: one boundary cell.
    let wall_reach = if is_channel {
        (grid.y[1] - grid.y[0]).max(grid.y[grid.ny - 1] - grid.y[grid.ny - 2])
    } else {
        0.0
    };

    let gmin = theta.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let gmax = theta.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut out = Array2::zeros((grid.nx, grid.ny));
    let mut stats = StepStats::default();
    for i in 0..grid.nx {
        let x = grid.x[i];
        for j in 0..grid.ny {
            let y = grid.y[j];
            // RK2 back-trace in the time-interpolated field.
            let xs = x - 0.5 * dt * v_end.x[(i, j)];
            let ys = y - 0.5 * dt * v_end.y[(i, j)];
            let mut fx = x - dt * vmx.eval(xs, ys);
            let mut fy = y - dt * vmy.eval(xs, ys);
            if is_channel {
                if fy < -wall_reach || fy > 1.0 + wall_reach {
                    return Err(Error::FootOutOfDomain {
                        excess: (fy.max(1.0) - 1.0).max(-fy),
                    });
                }
                if fy < 0.0 || fy > 1.0 {
                    fy = fy.clamp(0.0, 1.0);
                    stats.clamped_feet += 1;
                }
                fx = fx.rem_euclid(grid.geometry.lx);
            }
            let mut val = th.eval(fx, fy);
            if let Some(bounds) = &bounds_src {
                let (lo, hi) = bounds.cell_bounds(fx, fy);
                val = val.clamp(lo, hi);
            } else {
                let over = (val - gmax).max(gmin - val).max(0.0);
                stats.overshoot = stats.overshoot.max(over);
            }
            out[(i, j)] = val - 0.5 * dt * u2s.eval(fx, fy);
        }
    }
    Ok(PreparedStep { vals: out, stats })
}

/// March `advect_step` over a window; `v_traj` advects, `u_traj` forces
/// through its vertical component. This is the density half of the fixed
/// point: `u -> theta`.
pub fn solve_transport(
    grid: &Grid2,
    times: &[f64],
    v_traj: &[VectorField],
    u_traj: &[VectorField],
    theta0: &ScalarField,
    opts: &TransportOptions,
    record_theta_dot_fields: bool,
) -> Result<ScalarTrajectory> {
    let dt = check_uniform_times(times)?;
    if v_traj.len() != times.len() || u_traj.len() != times.len() {
        return Err(Error::TimeGridMismatch(format!(
            "velocity trajectories ({} / {}) do not span the {} samples",
            v_traj.len(),
            u_traj.len(),
            times.len()
        )));
    }
    theta0.check_finite()?;
    let mut states = Vec::with_capacity(times.len());
    let mut stats = Vec::with_capacity(times.len());
    let mut dot_l2 = Vec::with_capacity(times.len());
    let mut dot_fields = if record_theta_dot_fields {
        Some(Vec::with_capacity(times.len()))
    } else {
        None
    };

    let mut record_dot = |theta: &ScalarField, k: usize| -> f64 {
        let (gx, gy) = scalar_gradient(grid, &theta.values);
        let mut dot = Array2::zeros((grid.nx, grid.ny));
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                dot[(i, j)] = -v_traj[k].x[(i, j)] * gx[(i, j)]
                    - v_traj[k].y[(i, j)] * gy[(i, j)]
                    - u_traj[k].y[(i, j)];
            }
        }
        let n = grid.l2_norm(&dot);
        if let Some(fields) = dot_fields.as_mut() {
            fields.push(ScalarField { values: dot });
        }
        n
    };

    let mut theta = theta0.clone();
    dot_l2.push(record_dot(&theta, 0));
    states.push(theta.clone());
    stats.push(StepStats::default());

    for k in 0..times.len() - 1 {
        let (next, st) = advect_step(
            &theta,
            &v_traj[k],
            &v_traj[k + 1],
            &u_traj[k].y,
            &u_traj[k + 1].y,
            dt,
            grid,
            opts,
        )?;
        theta = next;
        dot_l2.push(record_dot(&theta, k + 1));
        states.push(theta.clone());
        stats.push(st);
    }

    Ok(ScalarTrajectory {
        times: times.to_vec(),
        states,
        theta_dot_l2: dot_l2,
        theta_dot: dot_fields,
        stats,
    })
}

/// Fitted-constant audit of the gradient growth bound
/// `||grad theta(t)|| <= (||theta_0||_H1 + int ||u||_H1) exp(C int ||v||_W1inf)`
/// and of the companion time-derivative bound
/// `||theta_t|| <= ||u|| + ||v||_Linf ||grad theta||`.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthAudit {
    pub times: Vec<f64>,
    pub grad_theta_l2: Vec<f64>,
    /// `||theta_0||_H1 + int_0^t ||u||_H1`.
    pub base: Vec<f64>,
    /// `int_0^t ||v||_W1inf`.
    pub exponent_weight: Vec<f64>,
    /// Smallest `C >= 0` making the growth bound hold over the window.
    pub fitted_c: f64,
    /// Largest pointwise ratio in the `theta_t` bound.
    pub theta_dot_ratio: f64,
}

pub fn gradient_growth_audit(
    grid: &Grid2,
    theta_traj: &ScalarTrajectory,
    u_traj: &[VectorField],
    v_traj: &[VectorField],
) -> Result<GrowthAudit> {
    let n = theta_traj.len();
    if u_traj.len() != n || v_traj.len() != n {
        return Err(Error::TimeGridMismatch(
            "growth audit needs aligned trajectories".into(),
        ));
    }
    let dt = check_uniform_times(&theta_traj.times)?;

    let h1 = |f: &VectorField| -> f64 {
        let l2sq = grid.inner(&f.x, &f.x) + grid.inner(&f.y, &f.y);
        let (xx, xy) = scalar_gradient(grid, &f.x);
        let (yx, yy) = scalar_gradient(grid, &f.y);
        let gsq = grid.inner(&xx, &xx)
            + grid.inner(&xy, &xy)
            + grid.inner(&yx, &yx)
            + grid.inner(&yy, &yy);
        (l2sq + gsq).sqrt()
    };
    let w1inf = |f: &VectorField| -> f64 {
        let (xx, xy) = scalar_gradient(grid, &f.x);
        let (yx, yy) = scalar_gradient(grid, &f.y);
        let gmax = [&xx, &xy, &yx, &yy]
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        f.max_magnitude() + gmax
    };

    let theta0 = &theta_traj.states[0];
    let theta0_h1 = {
        let l2 = grid.l2_norm(&theta0.values);
        let g = crate::calculus::grad_l2_norm(grid, &theta0.values);
        (l2 * l2 + g * g).sqrt()
    };

    let mut grad_series = Vec::with_capacity(n);
    let mut base = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut int_u = 0.0;
    let mut int_v = 0.0;
    let mut prev_u = h1(&u_traj[0]);
    let mut prev_v = w1inf(&v_traj[0]);
    for k in 0..n {
        if k > 0 {
            let cur_u = h1(&u_traj[k]);
            let cur_v = w1inf(&v_traj[k]);
            int_u += 0.5 * dt * (prev_u + cur_u);
            int_v += 0.5 * dt * (prev_v + cur_v);
            prev_u = cur_u;
            prev_v = cur_v;
        }
        grad_series.push(crate::calculus::grad_l2_norm(grid, &theta_traj.states[k].values));
        base.push(theta0_h1 + int_u);
        weight.push(int_v);
    }

    let mut fitted_c = 0.0f64;
    for k in 0..n {
        if grad_series[k] > base[k] && weight[k] > 0.0 {
            fitted_c = fitted_c.max((grad_series[k] / base[k]).ln() / weight[k]);
        }
    }

    let mut dot_ratio = 0.0f64;
    for k in 0..n {
        let u_l2 = (grid.inner(&u_traj[k].x, &u_traj[k].x)
            + grid.inner(&u_traj[k].y, &u_traj[k].y))
        .sqrt();
        let v_inf = v_traj[k].max_magnitude();
        let denom = u_l2 + v_inf * grad_series[k];
        if denom > 1e-300 {
            dot_ratio = dot_ratio.max(theta_traj.theta_dot_l2[k] / denom);
        }
    }

    Ok(GrowthAudit {
        times: theta_traj.times.clone(),
        grad_theta_l2: grad_series,
        base,
        exponent_weight: weight,
        fitted_c,
        theta_dot_ratio: dot_ratio,
    })
}
