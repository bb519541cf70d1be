//! Picard linearization of the Boussinesq system over contraction windows.
//!
//! Iterate `n` solves the linear pair with the advecting velocity frozen at
//! the previous iterate: the velocity equation through the Galerkin ODE
//! system and the density through semi-Lagrangian transport, co-timestepped
//! with two midpoint coupling passes per step so the buoyancy/restoring cross
//! terms remain second order. Iterate `0` is the advection-free base problem.
//!
//! Convergence is governed by differences of successive iterates in the
//! composite norm
//! `||(U, h)||^2 = ||grad U||_{LinfL2}^2 + ||h||_{LinfL2}^2 + ||A U||_{L2L2}^2`.
//! When the measured contraction ratio stays above the configured threshold
//! for two consecutive iterations, the window is bisected and restarted;
//! long horizons are covered by chaining windows, carrying the last accepted
//! window length forward and re-projecting the end state as the next initial
//! state.

use serde::Serialize;

use crate::basis::{StokesBasis, VelocityCoeffs};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::linear::{
    advection_op, check_uniform_times, coefficient_derivative, step_linear_op, AdvectionApply,
    AdvectionPath, VelocityTrajectory,
};
use crate::transport::interp::ThetaInterp;
use crate::transport::{advect_finish, advect_prepare, ScalarTrajectory, StepStats, TransportOptions};
use ndarray::Array2;

/// Instantaneous solver state `(u, theta)` at one time.
#[derive(Clone, Debug)]
pub struct BoussinesqState {
    pub xi: VelocityCoeffs,
    pub theta: ScalarField,
    pub time: f64,
}

impl BoussinesqState {
    pub fn new(xi: VelocityCoeffs, theta: ScalarField, time: f64) -> Self {
        Self { xi, theta, time }
    }

    pub fn zero(basis: &StokesBasis) -> Self {
        Self {
            xi: VelocityCoeffs::zeros(basis.m()),
            theta: ScalarField::zeros(&basis.grid),
            time: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CouplingMode {
    /// Co-timestep the jointly linear pair (default).
    CoTimestep,
    /// Alternate the two half maps (velocity-from-density and
    /// density-from-velocity) as an inner fixed point, for per-map
    /// contraction studies.
    Alternating,
}

/// How the first Picard iterate is seeded; the perturbed variant exists to
/// probe uniqueness (independent initializations must converge to the same
/// limit).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialGuess {
    BaseCase,
    PerturbedBaseCase(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct PicardConfig {
    /// Target time step; each window uses `dt = len / ceil(len / dt_target)`.
    pub dt_target: f64,
    /// Convergence tolerance relative to the initial-data norm.
    pub tol: f64,
    pub n_max: usize,
    pub t0_init: f64,
    pub t0_max: f64,
    /// Bisect when the ratio exceeds this twice in a row.
    pub contraction_threshold: f64,
    pub max_bisections: usize,
    pub coupling: CouplingMode,
    pub advection: AdvectionPath,
    pub theta_interp: ThetaInterp,
    pub limiter: bool,
    /// Record coefficient/density time derivatives every this many samples.
    pub deriv_every: usize,
    pub initial_guess: InitialGuess,
    /// Double the carried window length after easy windows.
    pub allow_window_growth: bool,
}

impl PicardConfig {
    pub fn default_for(basis: &StokesBasis) -> Self {
        Self {
            dt_target: 1e-3,
            tol: 1e-8,
            n_max: 60,
            t0_init: 0.25,
            t0_max: 1.0,
            contraction_threshold: 0.9,
            max_bisections: 6,
            coupling: CouplingMode::CoTimestep,
            advection: crate::linear::default_advection_path(basis.geometry.kind),
            theta_interp: TransportOptions::default_for(basis.geometry.kind).theta_interp,
            limiter: false,
            deriv_every: 1,
            initial_guess: InitialGuess::BaseCase,
            allow_window_growth: true,
        }
    }

    fn transport_options(&self) -> TransportOptions {
        TransportOptions {
            theta_interp: self.theta_interp,
            limiter: self.limiter,
        }
    }
}

/// Difference norms of one outer iteration.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `||grad U^n||_{Linf L2}`.
    pub grad_u_diff_sup: f64,
    /// `||h^n||_{Linf L2}` (density difference).
    pub theta_diff_sup: f64,
    /// `||A U^n||_{L2 L2}`.
    pub au_diff_l2: f64,
    pub composite: f64,
    /// `composite_n / composite_{n-1}`; zero for the first iteration.
    pub ratio: f64,
    // Uniform-bounds audit of the iterate itself.
    pub u_l2_sup: f64,
    pub grad_u_sup: f64,
    pub au_l2l2: f64,
    pub theta_l3_sup: f64,
}

/// Per-window iteration report.
#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    pub window_start: f64,
    /// Requested window length before any bisection.
    pub requested_len: f64,
    /// Achieved window length.
    pub window_len: f64,
    pub bisections: usize,
    pub converged: bool,
    pub tol_abs: f64,
    pub iterations: Vec<IterationRecord>,
    /// Contraction ratios of every attempt (last entry = accepted attempt).
    pub all_ratios: Vec<Vec<f64>>,
    /// Alternating mode only: measured per-map contraction ratios.
    pub phi1_ratios: Vec<f64>,
    pub phi2_ratios: Vec<f64>,
}

impl PicardReport {
    pub fn max_ratio(&self) -> f64 {
        self.iterations
            .iter()
            .skip(1)
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    }
}

/// Solution of one window.
pub struct WindowSolution {
    pub u: VelocityTrajectory,
    pub theta: ScalarTrajectory,
    pub report: PicardReport,
}

/// Full-run observer: receives every accepted sample in time order plus each
/// window report. Implementations must be cheap; heavy analysis belongs in
/// post-processing.
pub trait RunObserver {
    fn on_sample(&mut self, _sample: Sample<'_>) {}
    fn on_window(&mut self, _report: &PicardReport) {}
    /// Called after each completed window with the continuation state: the
    /// re-projected end state and the window length that will be attempted
    /// next. Restarting a run from exactly this pair reproduces the original
    /// continuation.
    fn on_checkpoint(&mut self, _state: &BoussinesqState, _next_t0: f64) {}
}

pub struct Sample<'a> {
    pub time: f64,
    pub xi: &'a VelocityCoeffs,
    pub theta: &'a ScalarField,
    pub xi_dot: Option<&'a VelocityCoeffs>,
    pub theta_dot_l2: Option<f64>,
    pub stats: &'a StepStats,
}

pub struct NullObserver;
impl RunObserver for NullObserver {}

/// Outcome of a chained multi-window solve.
pub struct BoussinesqRun {
    pub final_state: BoussinesqState,
    pub reports: Vec<PicardReport>,
    pub total_samples: usize,
}

// ---------------------------------------------------------------------------
// Coupled co-timestepping.
// ---------------------------------------------------------------------------

struct ZeroAdvection;
impl AdvectionApply for ZeroAdvection {
    fn apply(&self, xi: &[f64], out: &mut [f64]) {
        out[..xi.len()].fill(0.0);
    }
}

enum AnyOp<'a> {
    Zero,
    Op(crate::linear::StepOp<'a>),
}

impl AdvectionApply for AnyOp<'_> {
    fn apply(&self, xi: &[f64], out: &mut [f64]) {
        match self {
            AnyOp::Zero => ZeroAdvection.apply(xi, out),
            AnyOp::Op(op) => op.apply(xi, out),
        }
    }
}

/// Dense trajectory of the coupled pair over one window.
pub struct CoupledTrajectory {
    pub times: Vec<f64>,
    pub xi: Vec<VelocityCoeffs>,
    pub theta: Vec<ScalarField>,
    pub xi_dot: Vec<Option<VelocityCoeffs>>,
    pub theta_dot_l2: Vec<Option<f64>>,
    pub stats: Vec<StepStats>,
}

impl CoupledTrajectory {
    fn velocity_trajectory(&self, basis: &StokesBasis) -> VelocityTrajectory {
        let m = basis.m();
        VelocityTrajectory {
            times: self.times.clone(),
            states: self.xi.clone(),
            derivs: self
                .xi_dot
                .iter()
                .map(|d| d.clone().unwrap_or_else(|| VelocityCoeffs::zeros(m)))
                .collect(),
        }
    }

    fn scalar_trajectory(&self) -> ScalarTrajectory {
        ScalarTrajectory {
            times: self.times.clone(),
            states: self.theta.clone(),
            theta_dot_l2: self.theta_dot_l2.iter().map(|v| v.unwrap_or(0.0)).collect(),
            theta_dot: None,
            stats: self.stats.clone(),
        }
    }
}

fn average_field(a: &VectorField, b: &VectorField) -> VectorField {
    let mut out = a.clone();
    out.add_scaled(b, 1.0);
    out.x.mapv_inplace(|v| 0.5 * v);
    out.y.mapv_inplace(|v| 0.5 * v);
    out
}

/// Advance the jointly linear pair over `times` with the advecting velocity
/// trajectory `v_fields` (`None` = the advection-free base problem).
fn co_timestep(
    basis: &StokesBasis,
    v_fields: Option<&[VectorField]>,
    state0: &BoussinesqState,
    times: &[f64],
    cfg: &PicardConfig,
) -> Result<CoupledTrajectory> {
    let dt = check_uniform_times(times)?;
    if let Some(v) = v_fields {
        if v.len() != times.len() {
            return Err(Error::TimeGridMismatch(format!(
                "advecting trajectory has {} samples, window has {}",
                v.len(),
                times.len()
            )));
        }
    }
    state0.xi.check_finite()?;
    state0.theta.check_finite()?;
    let grid = &basis.grid;
    let topts = cfg.transport_options();
    let n = times.len();

    let mut xi = state0.xi.clone();
    let mut theta = state0.theta.clone();
    let mut u_grid = basis.synthesize(&xi)?;

    let mut out = CoupledTrajectory {
        times: times.to_vec(),
        xi: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        xi_dot: Vec::with_capacity(n),
        theta_dot_l2: Vec::with_capacity(n),
        stats: Vec::with_capacity(n),
    };

    let record_derivs = |k: usize| cfg.deriv_every > 0 && k % cfg.deriv_every == 0;
    let zero_field = VectorField::zeros(grid);
    let derive = |xi: &VelocityCoeffs,
                  theta: &ScalarField,
                  u_grid: &VectorField,
                  k: usize|
     -> Result<(VelocityCoeffs, f64)> {
        let op: AnyOp = match v_fields {
            None => AnyOp::Zero,
            Some(v) => AnyOp::Op(advection_op(basis, v[k].clone(), cfg.advection)?),
        };
        let eta = basis.project_buoyancy(theta)?;
        let xd = VelocityCoeffs {
            xi: coefficient_derivative(&xi.xi, &op, &eta.xi, &basis.eigenvalues),
        };
        let (gx, gy) = crate::calculus::scalar_gradient(grid, &theta.values);
        let mut dot = Array2::zeros((grid.nx, grid.ny));
        let v_here = v_fields.map(|v| &v[k]).unwrap_or(&zero_field);
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                dot[(i, j)] = -v_here.x[(i, j)] * gx[(i, j)] - v_here.y[(i, j)] * gy[(i, j)]
                    - u_grid.y[(i, j)];
            }
        }
        Ok((xd, grid.l2_norm(&dot)))
    };

    // Initial sample.
    if record_derivs(0) {
        let (xd, td) = derive(&xi, &theta, &u_grid, 0)?;
        out.xi_dot.push(Some(xd));
        out.theta_dot_l2.push(Some(td));
    } else {
        out.xi_dot.push(None);
        out.theta_dot_l2.push(None);
    }
    out.xi.push(xi.clone());
    out.theta.push(theta.clone());
    out.stats.push(StepStats::default());

    for k in 0..n - 1 {
        let (v_k, v_k1) = match v_fields {
            None => (&zero_field, &zero_field),
            Some(v) => (&v[k], &v[k + 1]),
        };
        let op_mid: AnyOp = match v_fields {
            None => AnyOp::Zero,
            Some(_) => AnyOp::Op(advection_op(
                basis,
                average_field(v_k, v_k1),
                cfg.advection,
            )?),
        };

        // Two midpoint coupling passes resolve the linear cross terms. The
        // characteristic feet depend only on the frozen advector, so the
        // back-trace is shared between passes.
        let prepared = advect_prepare(&theta, v_k, v_k1, &u_grid.y, dt, grid, &topts)?;
        let step_stats = prepared.stats;
        let mut theta_next = theta.clone();
        let mut xi_next = xi.clone();
        let mut u_next = u_grid.clone();
        for _pass in 0..2 {
            let mut theta_mid = theta.clone();
            theta_mid.add_scaled(&theta_next, 1.0);
            theta_mid.values.mapv_inplace(|v| 0.5 * v);
            let eta_mid = basis.project_buoyancy(&theta_mid)?;
            xi_next = VelocityCoeffs {
                xi: step_linear_op(&xi.xi, &op_mid, &eta_mid.xi, dt, &basis.eigenvalues),
            };
            u_next = basis.synthesize(&xi_next)?;
            theta_next = advect_finish(&prepared, &u_next.y, dt);
        }

        xi = xi_next;
        theta = theta_next;
        u_grid = u_next;

        if record_derivs(k + 1) {
            let (xd, td) = derive(&xi, &theta, &u_grid, k + 1)?;
            out.xi_dot.push(Some(xd));
            out.theta_dot_l2.push(Some(td));
        } else {
            out.xi_dot.push(None);
            out.theta_dot_l2.push(None);
        }
        out.xi.push(xi.clone());
        out.theta.push(theta.clone());
        out.stats.push(step_stats);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Window iteration.
// ---------------------------------------------------------------------------

/// Solve the advection-free base problem over the window.
pub fn solve_base_case(
    basis: &StokesBasis,
    state0: &BoussinesqState,
    times: &[f64],
    cfg: &PicardConfig,
) -> Result<(VelocityTrajectory, ScalarTrajectory)> {
    let traj = co_timestep(basis, None, state0, times, cfg)?;
    Ok((traj.velocity_trajectory(basis), traj.scalar_trajectory()))
}

/// One Picard iterate: advecting velocity frozen at the previous iterate,
/// system linear in the new pair.
pub fn picard_step(
    basis: &StokesBasis,
    v_traj: &[VectorField],
    state0: &BoussinesqState,
    times: &[f64],
    cfg: &PicardConfig,
) -> Result<(VelocityTrajectory, ScalarTrajectory)> {
    let traj = co_timestep(basis, Some(v_traj), state0, times, cfg)?;
    Ok((traj.velocity_trajectory(basis), traj.scalar_trajectory()))
}

struct IterateData {
    xi: Vec<VelocityCoeffs>,
    theta: Vec<ScalarField>,
    u_fields: Vec<VectorField>,
}

impl IterateData {
    fn from_coupled(basis: &StokesBasis, t: &CoupledTrajectory) -> Result<Self> {
        let u_fields = t
            .xi
            .iter()
            .map(|xi| basis.synthesize(xi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            xi: t.xi.clone(),
            theta: t.theta.clone(),
            u_fields,
        })
    }
}

/// Composite difference norm of two iterates plus the per-iterate audit
/// norms.
fn difference_record(
    basis: &StokesBasis,
    n: usize,
    prev: &IterateData,
    cur: &IterateData,
    dt: f64,
) -> IterationRecord {
    let grid = &basis.grid;
    let steps = cur.xi.len();
    let mut grad_sup = 0.0f64;
    let mut theta_sup = 0.0f64;
    let mut au_sq_series = Vec::with_capacity(steps);
    let mut u_l2_sup = 0.0f64;
    let mut grad_u_sup = 0.0f64;
    let mut au_self_series = Vec::with_capacity(steps);
    let mut theta_l3_sup = 0.0f64;
    for k in 0..steps {
        let mut diff = cur.xi[k].clone();
        diff.add_scaled(&prev.xi[k], -1.0);
        grad_sup = grad_sup.max(diff.v_norm(basis));
        let au = diff.da_norm(basis);
        au_sq_series.push(au * au);

        let mut dtheta = cur.theta[k].clone();
        dtheta.add_scaled(&prev.theta[k], -1.0);
        theta_sup = theta_sup.max(grid.l2_norm(&dtheta.values));

        u_l2_sup = u_l2_sup.max(cur.xi[k].h_norm());
        grad_u_sup = grad_u_sup.max(cur.xi[k].v_norm(basis));
        let au_self = cur.xi[k].da_norm(basis);
        au_self_series.push(au_self * au_self);
        theta_l3_sup = theta_l3_sup.max(grid.lp_norm(&cur.theta[k].values, 3.0));
    }
    let trapz = |s: &[f64]| -> f64 {
        let mut acc = 0.0;
        for w in s.windows(2) {
            acc += 0.5 * dt * (w[0] + w[1]);
        }
        acc
    };
    let au_diff_l2 = trapz(&au_sq_series).sqrt();
    let au_l2l2 = trapz(&au_self_series).sqrt();
    let composite = (grad_sup * grad_sup + theta_sup * theta_sup + au_diff_l2 * au_diff_l2).sqrt();
    IterationRecord {
        n,
        grad_u_diff_sup: grad_sup,
        theta_diff_sup: theta_sup,
        au_diff_l2,
        composite,
        ratio: 0.0,
        u_l2_sup,
        grad_u_sup,
        au_l2l2,
        theta_l3_sup,
    }
}

/// Norm scale of the initial data used for the relative tolerance.
fn data_scale(basis: &StokesBasis, state0: &BoussinesqState) -> f64 {
    let g = state0.xi.v_norm(basis);
    let a = state0.xi.da_norm(basis);
    let t = basis.grid.l2_norm(&state0.theta.values);
    (g * g + a * a + t * t).sqrt()
}

enum WindowAttempt {
    Converged {
        traj: CoupledTrajectory,
        iterations: Vec<IterationRecord>,
        phi1: Vec<f64>,
        phi2: Vec<f64>,
    },
    ContractionFailure {
        ratios: Vec<f64>,
    },
    IterationBudget {
        ratios: Vec<f64>,
    },
}

/// Iterate Picard steps from the base case on one window, bisecting the
/// window on measured contraction failure.
pub fn solve_window(
    basis: &StokesBasis,
    state0: &BoussinesqState,
    window_len: f64,
    cfg: &PicardConfig,
) -> Result<WindowSolution> {
    if window_len <= 0.0 {
        return Err(Error::InvalidInput("window length must be positive".into()));
    }
    let scale = data_scale(basis, state0);
    let tol_abs = cfg.tol * if scale > 0.0 { scale } else { 1.0 };
    let mut len = window_len;
    let mut all_ratios: Vec<Vec<f64>> = Vec::new();
    let mut bisections = 0usize;

    loop {
        let steps = (len / cfg.dt_target).ceil().max(1.0) as usize;
        let dt = len / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|k| state0.time + dt * k as f64).collect();

        match attempt_window(basis, state0, &times, dt, tol_abs, cfg)? {
            WindowAttempt::Converged {
                traj,
                iterations,
                phi1,
                phi2,
            } => {
                let ratios = iterations.iter().skip(1).map(|r| r.ratio).collect();
                all_ratios.push(ratios);
                let report = PicardReport {
                    window_start: state0.time,
                    requested_len: window_len,
                    window_len: len,
                    bisections,
                    converged: true,
                    tol_abs,
                    iterations,
                    all_ratios,
                    phi1_ratios: phi1,
                    phi2_ratios: phi2,
                };
                return Ok(WindowSolution {
                    u: traj.velocity_trajectory(basis),
                    theta: traj.scalar_trajectory(),
                    report,
                });
            }
            WindowAttempt::ContractionFailure { ratios } => {
                all_ratios.push(ratios);
                bisections += 1;
                if bisections > cfg.max_bisections {
                    return Err(Error::NonConvergence(format!(
                        "window at t={:.6} failed after {} bisections (len {:.3e}); ratios per attempt: {:?}",
                        state0.time,
                        bisections - 1,
                        len,
                        all_ratios
                    )));
                }
                len *= 0.5;
            }
            WindowAttempt::IterationBudget { ratios } => {
                all_ratios.push(ratios);
                return Err(Error::NonConvergence(format!(
                    "window at t={:.6} exhausted n_max={} (len {:.3e}, tol {:.3e}); ratios per attempt: {:?}",
                    state0.time, cfg.n_max, len, tol_abs, all_ratios
                )));
            }
        }
    }
}

fn attempt_window(
    basis: &StokesBasis,
    state0: &BoussinesqState,
    times: &[f64],
    dt: f64,
    tol_abs: f64,
    cfg: &PicardConfig,
) -> Result<WindowAttempt> {
    // Iterate 0: the base case, optionally perturbed to probe uniqueness.
    let base = co_timestep(basis, None, state0, times, cfg)?;
    let mut prev = IterateData::from_coupled(basis, &base)?;
    if let InitialGuess::PerturbedBaseCase(eps) = cfg.initial_guess {
        for xi in prev.xi.iter_mut() {
            *xi = xi.scaled(1.0 + eps);
        }
        let xi_snapshot = prev.xi.clone();
        for (f, xi) in prev.u_fields.iter_mut().zip(&xi_snapshot) {
            *f = basis.synthesize(xi)?;
        }
        for th in prev.theta.iter_mut() {
            th.values.mapv_inplace(|v| v * (1.0 + eps));
        }
    }

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut phi1_ratios: Vec<f64> = Vec::new();
    let mut phi2_ratios: Vec<f64> = Vec::new();
    let mut above_threshold = 0usize;

    for n in 1..=cfg.n_max {
        let cur_traj = match cfg.coupling {
            CouplingMode::CoTimestep => {
                co_timestep(basis, Some(&prev.u_fields), state0, times, cfg)?
            }
            CouplingMode::Alternating => alternating_iterate(
                basis,
                &prev,
                state0,
                times,
                cfg,
                tol_abs,
                &mut phi1_ratios,
                &mut phi2_ratios,
            )?,
        };
        let cur = IterateData::from_coupled(basis, &cur_traj)?;
        let mut rec = difference_record(basis, n, &prev, &cur, dt);
        if let Some(last) = iterations.last() {
            rec.ratio = if last.composite > 0.0 {
                rec.composite / last.composite
            } else {
                0.0
            };
        }
        let composite = rec.composite;
        let ratio = rec.ratio;
        iterations.push(rec);

        if composite <= tol_abs {
            return Ok(WindowAttempt::Converged {
                traj: cur_traj,
                iterations,
                phi1: phi1_ratios,
                phi2: phi2_ratios,
            });
        }

        if iterations.len() >= 2 && ratio > cfg.contraction_threshold {
            above_threshold += 1;
            if above_threshold >= 2 {
                let ratios = iterations.iter().skip(1).map(|r| r.ratio).collect();
                return Ok(WindowAttempt::ContractionFailure { ratios });
            }
        } else {
            above_threshold = 0;
        }

        prev = cur;
    }
    let ratios = iterations.iter().skip(1).map(|r| r.ratio).collect();
    Ok(WindowAttempt::IterationBudget { ratios })
}

/// Alternating inner fixed point: the velocity map consumes the previous
/// density trajectory and the density map the previous velocity trajectory,
/// iterated until the pair stabilizes. Ratios of the two half maps are
/// recorded against the input differences that drive them.
#[allow(clippy::too_many_arguments)]
fn alternating_iterate(
    basis: &StokesBasis,
    outer_prev: &IterateData,
    state0: &BoussinesqState,
    times: &[f64],
    cfg: &PicardConfig,
    tol_abs: f64,
    phi1_ratios: &mut Vec<f64>,
    phi2_ratios: &mut Vec<f64>,
) -> Result<CoupledTrajectory> {
    let dt = check_uniform_times(times)?;
    let grid = &basis.grid;
    let topts = cfg.transport_options();
    let v_fields = &outer_prev.u_fields;

    // Inner iterates start from the outer previous pair.
    let mut theta_states = outer_prev.theta.clone();
    let mut u_states = outer_prev.u_fields.clone();
    let mut xi_states = outer_prev.xi.clone();

    let mut prev_u_diff: Option<f64> = None;
    let mut prev_theta_diff: Option<f64> = None;

    for _m in 0..cfg.n_max.max(8) {
        // Velocity map: density trajectory -> velocity trajectory.
        let u_traj = crate::linear::solve_linear_nse(
            basis,
            times,
            v_fields,
            &theta_states,
            &state0.xi,
            cfg.advection,
        )?;
        // Density map: velocity trajectory -> density trajectory.
        let theta_traj = crate::transport::solve_transport(
            grid,
            times,
            v_fields,
            &u_states,
            &state0.theta,
            &topts,
            false,
        )?;

        // Output differences against the previous inner iterate.
        let mut u_diff_sq_sup = 0.0f64;
        let mut au_sq = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            let mut d = u_traj.states[k].clone();
            d.add_scaled(&xi_states[k], -1.0);
            u_diff_sq_sup = u_diff_sq_sup.max(d.v_norm(basis).powi(2));
            let a = d.da_norm(basis);
            au_sq.push(a * a);
        }
        let mut au_int = 0.0;
        for w in au_sq.windows(2) {
            au_int += 0.5 * dt * (w[0] + w[1]);
        }
        let u_diff = (u_diff_sq_sup + au_int).sqrt();

        let mut theta_diff = 0.0f64;
        for k in 0..times.len() {
            let mut d = theta_traj.states[k].clone();
            d.add_scaled(&theta_states[k], -1.0);
            let l2 = grid.l2_norm(&d.values);
            let g = crate::calculus::grad_l2_norm(grid, &d.values);
            theta_diff = theta_diff.max((l2 * l2 + g * g).sqrt());
        }

        if let Some(p) = prev_theta_diff {
            if p > 0.0 {
                phi1_ratios.push(u_diff / p);
            }
        }
        if let Some(p) = prev_u_diff {
            if p > 0.0 {
                phi2_ratios.push(theta_diff / p);
            }
        }
        prev_u_diff = Some(u_diff);
        prev_theta_diff = Some(theta_diff);

        xi_states = u_traj.states.clone();
        u_states = xi_states
            .iter()
            .map(|xi| basis.synthesize(xi))
            .collect::<Result<Vec<_>>>()?;
        theta_states = theta_traj.states;

        if u_diff.max(theta_diff) <= 0.1 * tol_abs {
            break;
        }
    }

    // Repackage as a coupled trajectory (derivatives at cadence).
    let n = times.len();
    let mut out = CoupledTrajectory {
        times: times.to_vec(),
        xi: xi_states,
        theta: theta_states,
        xi_dot: vec![None; n],
        theta_dot_l2: vec![None; n],
        stats: vec![StepStats::default(); n],
    };
    if cfg.deriv_every > 0 {
        for k in (0..n).step_by(cfg.deriv_every) {
            let op = advection_op(basis, v_fields[k].clone(), cfg.advection)?;
            let eta = basis.project_buoyancy(&out.theta[k])?;
            out.xi_dot[k] = Some(VelocityCoeffs {
                xi: coefficient_derivative(&out.xi[k].xi, &op, &eta.xi, &basis.eigenvalues),
            });
            let (gx, gy) = crate::calculus::scalar_gradient(grid, &out.theta[k].values);
            let mut dot = Array2::zeros((grid.nx, grid.ny));
            for i in 0..grid.nx {
                for j in 0..grid.ny {
                    dot[(i, j)] = -v_fields[k].x[(i, j)] * gx[(i, j)]
                        - v_fields[k].y[(i, j)] * gy[(i, j)]
                        - u_states[k].y[(i, j)];
                }
            }
            out.theta_dot_l2[k] = Some(grid.l2_norm(&dot));
        }
    }
    Ok(out)
}

/// Chain contraction windows to the horizon, streaming samples and reports to
/// the observer. The achieved window length is carried forward (and may grow
/// again after easy windows); the end state of each window is checked to be
/// admissible data for the next window and re-projected through the basis.
pub fn solve_boussinesq(
    basis: &StokesBasis,
    state0: &BoussinesqState,
    horizon: f64,
    cfg: &PicardConfig,
    observer: &mut dyn RunObserver,
) -> Result<BoussinesqRun> {
    if horizon <= state0.time {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} must exceed the initial time {}",
            state0.time
        )));
    }
    let mut state = state0.clone();
    let mut t0 = cfg.t0_init.min(cfg.t0_max);
    let mut total_samples = 0usize;
    let mut reports = Vec::new();
    let mut first_window = true;

    while state.time < horizon - 1e-12 {
        let len = t0.min(horizon - state.time);
        let sol = solve_window(basis, &state, len, cfg)?;
        let report = sol.report.clone();
        observer.on_window(&report);

        let start_k = if first_window { 0 } else { 1 };
        for k in start_k..sol.u.times.len() {
            let have_deriv = cfg.deriv_every > 0 && k % cfg.deriv_every == 0;
            observer.on_sample(Sample {
                time: sol.u.times[k],
                xi: &sol.u.states[k],
                theta: &sol.theta.states[k],
                xi_dot: if have_deriv { Some(&sol.u.derivs[k]) } else { None },
                theta_dot_l2: if have_deriv {
                    Some(sol.theta.theta_dot_l2[k])
                } else {
                    None
                },
                stats: &sol.theta.stats[k],
            });
            total_samples += 1;
        }
        first_window = false;

        // Continuation: end state must be admissible initial data.
        let end_k = sol.u.times.len() - 1;
        let end_xi = &sol.u.states[end_k];
        let end_theta = &sol.theta.states[end_k];
        let au = end_xi.da_norm(basis);
        let th_h1 = {
            let l2 = basis.grid.l2_norm(&end_theta.values);
            let g = crate::calculus::grad_l2_norm(&basis.grid, &end_theta.values);
            (l2 * l2 + g * g).sqrt()
        };
        if !au.is_finite() || !th_h1.is_finite() {
            return Err(Error::NonConvergence(format!(
                "end state at t={:.6} is not admissible (||Au||={au}, ||theta||_H1={th_h1})",
                sol.u.times[end_k]
            )));
        }
        // Re-project the end state through the basis.
        let reproj = basis.leray_project(&basis.synthesize(end_xi)?)?;
        state = BoussinesqState {
            xi: reproj,
            theta: end_theta.clone(),
            time: sol.u.times[end_k],
        };

        // Window-length policy: carry a bisected length forward, and grow
        // again only after a window that converged with a strong margin. The
        // policy is a pure function of the report so a restart from the
        // checkpointed `(state, t0)` pair reproduces the continuation.
        let achieved = report.window_len;
        if achieved < len {
            t0 = achieved;
        } else if cfg.allow_window_growth
            && report.iterations.len() <= 4
            && report.max_ratio() <= 0.15
        {
            t0 = (t0 * 2.0).min(cfg.t0_max);
        }
        observer.on_checkpoint(&state, t0);
        reports.push(report);
    }

    Ok(BoussinesqRun {
        final_state: state,
        reports,
        total_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_torus_basis;
    use crate::geometry::Geometry;
    use crate::transport::rotation::periodic_gaussian;

    fn basis16() -> StokesBasis {
        build_torus_basis(Geometry::torus_2pi(), 4, 16, 16).unwrap()
    }

    fn times(n: usize, dt: f64) -> Vec<f64> {
        (0..=n).map(|k| dt * k as f64).collect()
    }

    #[test]
    fn zero_data_stays_zero() {
        let b = basis16();
        let cfg = PicardConfig::default_for(&b);
        let state = BoussinesqState::zero(&b);
        let ts = times(10, 0.01);
        let (u, th) = solve_base_case(&b, &state, &ts, &cfg).unwrap();
        for xi in &u.states {
            assert_eq!(xi.h_norm(), 0.0);
        }
        for t in &th.states {
            assert_eq!(t.max_abs(), 0.0);
        }
    }

    #[test]
    fn base_case_with_buoyancy_neutral_theta_is_static() {
        // theta depending only on x2 pairs to zero with every mode.
        let b = basis16();
        let cfg = PicardConfig::default_for(&b);
        let theta0 = ScalarField::from_fn(&b.grid, |_, y| y.cos());
        let state = BoussinesqState::new(VelocityCoeffs::zeros(b.m()), theta0.clone(), 0.0);
        let ts = times(20, 0.01);
        let (u, th) = solve_base_case(&b, &state, &ts, &cfg).unwrap();
        for xi in &u.states {
            assert!(xi.h_norm() <= 1e-12);
        }
        let mut diff = th.states.last().unwrap().clone();
        diff.add_scaled(&theta0, -1.0);
        assert!(diff.max_abs() <= 1e-12);
    }

    #[test]
    fn picard_step_with_zero_advector_matches_base_case() {
        let b = basis16();
        let cfg = PicardConfig::default_for(&b);
        let theta0 = periodic_gaussian(&b.grid, (3.0, 3.0), 0.8, 0.5);
        let state = BoussinesqState::new(VelocityCoeffs::zeros(b.m()), theta0, 0.0);
        let ts = times(10, 0.005);
        let (u_base, th_base) = solve_base_case(&b, &state, &ts, &cfg).unwrap();
        let zeros = vec![VectorField::zeros(&b.grid); ts.len()];
        let (u_pic, th_pic) = picard_step(&b, &zeros, &state, &ts, &cfg).unwrap();
        for k in 0..ts.len() {
            let mut d = u_pic.states[k].clone();
            d.add_scaled(&u_base.states[k], -1.0);
            assert!(d.h_norm() <= 1e-12);
            let mut dth = th_pic.states[k].clone();
            dth.add_scaled(&th_base.states[k], -1.0);
            assert!(dth.max_abs() <= 1e-12);
        }
    }

    #[test]
    fn window_converges_with_small_data() {
        let b = basis16();
        let mut cfg = PicardConfig::default_for(&b);
        cfg.dt_target = 0.01;
        cfg.tol = 1e-9;
        let theta0 = periodic_gaussian(&b.grid, (3.0, 3.0), 0.8, 0.2);
        let state = BoussinesqState::new(VelocityCoeffs::zeros(b.m()), theta0, 0.0);
        let sol = solve_window(&b, &state, 0.1, &cfg).unwrap();
        assert!(sol.report.converged);
        assert!(sol.report.max_ratio() < 0.5, "ratio {}", sol.report.max_ratio());
        // Total energy is nonincreasing.
        let e = |k: usize| {
            0.5 * sol.u.states[k].h_norm().powi(2)
                + 0.5 * b.grid.l2_norm(&sol.theta.states[k].values).powi(2)
        };
        assert!(e(sol.u.times.len() - 1) <= e(0) * (1.0 + 1e-9));
    }

    #[test]
    fn window_splitting_is_consistent() {
        let b = basis16();
        let mut cfg = PicardConfig::default_for(&b);
        cfg.dt_target = 0.01;
        cfg.tol = 1e-10;
        cfg.allow_window_growth = false;
        let theta0 = periodic_gaussian(&b.grid, (3.0, 3.0), 0.8, 0.2);
        let state = BoussinesqState::new(VelocityCoeffs::zeros(b.m()), theta0, 0.0);

        let one = solve_window(&b, &state, 0.2, &cfg).unwrap();

        let mut cfg2 = cfg;
        cfg2.t0_init = 0.1;
        let run = solve_boussinesq(&b, &state, 0.2, &cfg2, &mut NullObserver).unwrap();
        assert_eq!(run.reports.len(), 2);

        let xi_one = one.u.states.last().unwrap();
        let mut d = run.final_state.xi.clone();
        d.add_scaled(xi_one, -1.0);
        let tol = 5.0 * one.report.tol_abs;
        assert!(d.h_norm() <= tol, "split mismatch {} vs tol {tol}", d.h_norm());
    }

    #[test]
    fn uniqueness_proxy_under_perturbed_initialization() {
        let b = basis16();
        let mut cfg = PicardConfig::default_for(&b);
        cfg.dt_target = 0.01;
        cfg.tol = 1e-9;
        let theta0 = periodic_gaussian(&b.grid, (3.0, 3.0), 0.8, 0.3);
        let state = BoussinesqState::new(VelocityCoeffs::zeros(b.m()), theta0, 0.0);
        let a = solve_window(&b, &state, 0.1, &cfg).unwrap();
        cfg.initial_guess = InitialGuess::PerturbedBaseCase(0.1);
        let bsol = solve_window(&b, &state, 0.1, &cfg).unwrap();
        let mut d = a.u.states.last().unwrap().clone();
        d.add_scaled(bsol.u.states.last().unwrap(), -1.0);
        assert!(
            d.h_norm() <= 10.0 * a.report.tol_abs,
            "initializations disagree: {} vs {}",
            d.h_norm(),
            10.0 * a.report.tol_abs
        );
    }

    #[test]
    fn alternating_mode_agrees_with_co_timestep() {
        let b = basis16();
        let mut cfg = PicardConfig::default_for(&b);
        cfg.dt_target = 0.005;
        cfg.tol = 1e-9;
        let theta0 = periodic_gaussian(&b.grid, (3.0, 3.0), 0.8, 0.2);
        let state = BoussinesqState::new(VelocityCoeffs::zeros(b.m()), theta0, 0.0);
        let co = solve_window(&b, &state, 0.05, &cfg).unwrap();
        cfg.coupling = CouplingMode::Alternating;
        let alt = solve_window(&b, &state, 0.05, &cfg).unwrap();
        let mut d = co.u.states.last().unwrap().clone();
        d.add_scaled(alt.u.states.last().unwrap(), -1.0);
        // Both modes discretize the same linear pair; they agree to a modest
        // multiple of the window tolerance.
        assert!(
            d.h_norm() <= 1e-6,
            "coupling modes disagree: {}",
            d.h_norm()
        );
        assert!(!alt.report.phi1_ratios.is_empty());
    }
}
