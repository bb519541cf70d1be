//! Linearized velocity solver against closed-form and dense oracles.

mod common;

use bsq_core::basis::{build_torus_basis, StokesBasis, VelocityCoeffs};
use bsq_core::field::{ScalarField, VectorField};
use bsq_core::geometry::Geometry;
use bsq_core::linear::{
    assemble_advection, assemble_buoyancy, solve_linear_nse, step_linear, AdvectionMatrix,
    AdvectionPath, ForcingVector,
};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

fn basis(kmax: usize, n: usize) -> StokesBasis {
    build_torus_basis(Geometry::torus_2pi(), kmax, n, n).unwrap()
}

#[test]
fn advection_entries_match_high_resolution_quadrature() {
    // beta_ij = (v . grad w_j, w_i) computed independently by dense grid
    // quadrature at doubled resolution (same mode ordering by construction).
    let b = basis(2, 16);
    let b_fine = basis(2, 32);
    assert_eq!(b.m(), b_fine.m());
    let mut vc = VelocityCoeffs::zeros(b.m());
    vc.xi[0] = 1.0; // v = w_0
    let v = b.synthesize(&vc).unwrap();
    let v_fine = b_fine.synthesize(&vc).unwrap();

    let beta = assemble_advection(&v, &b).unwrap();
    for j in 0..6 {
        let g = b_fine
            .synthesize_gradient(&VelocityCoeffs::unit(b_fine.m(), j))
            .unwrap();
        for i in 0..6 {
            let w_i = b_fine
                .synthesize(&VelocityCoeffs::unit(b_fine.m(), i))
                .unwrap();
            let mut acc = 0.0;
            for ix in 0..b_fine.grid.nx {
                for iy in 0..b_fine.grid.ny {
                    let adv_x = v_fine.x[(ix, iy)] * g.ux_dx[(ix, iy)]
                        + v_fine.y[(ix, iy)] * g.ux_dy[(ix, iy)];
                    let adv_y = v_fine.x[(ix, iy)] * g.uy_dx[(ix, iy)]
                        + v_fine.y[(ix, iy)] * g.uy_dy[(ix, iy)];
                    acc += b_fine.grid.wx[ix]
                        * b_fine.grid.wy[iy]
                        * (adv_x * w_i.x[(ix, iy)] + adv_y * w_i.y[(ix, iy)]);
                }
            }
            assert!(
                (beta.beta[(i, j)] - acc).abs() <= 1e-11,
                "beta[{i},{j}] = {} vs oracle {acc}",
                beta.beta[(i, j)]
            );
        }
    }
}

#[test]
fn antisymmetry_for_admissible_fields() {
    let b = basis(4, 24);
    // Three admissible (divergence-free, mean-zero) velocity fields.
    let mut c1 = VelocityCoeffs::zeros(b.m());
    c1.xi[0] = 1.0;
    let mut c2 = VelocityCoeffs::zeros(b.m());
    c2.xi[3] = 0.6;
    c2.xi[10] = -0.4;
    let mut c3 = VelocityCoeffs::zeros(b.m());
    for (j, v) in c3.xi.iter_mut().enumerate() {
        *v = 0.1 * ((j % 7) as f64 - 3.0);
    }
    for c in [c1, c2, c3] {
        let v = b.synthesize(&c).unwrap();
        let m = assemble_advection(&v, &b).unwrap();
        assert!(m.skew_defect <= 1e-10, "skew {}", m.skew_defect);
        for i in 0..b.m() {
            assert!(m.beta[(i, i)].abs() <= 1e-12);
        }
    }
}

#[test]
fn buoyancy_projection_closed_form() {
    let b = basis(3, 32);
    // theta = 0 and theta = const both produce zero forcing.
    let eta0 = assemble_buoyancy(&ScalarField::zeros(&b.grid), &b).unwrap();
    assert!(eta0.eta.iter().all(|v| *v == 0.0));
    let etac = assemble_buoyancy(
        &ScalarField::from_fn(&b.grid, |_, _| 3.25),
        &b,
    )
    .unwrap();
    let max = etac.eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max <= 1e-12, "constant buoyancy leaked: {max}");

    // theta = cos(x1): pairs only with the k=(1,0) modes, with value
    // (cos x1, a sigma_2 cos x1) = a * 2 pi^2 where a = sqrt(2)/(2 pi).
    let eta = assemble_buoyancy(&ScalarField::from_fn(&b.grid, |x, _| x.cos()), &b).unwrap();
    let expected = std::f64::consts::PI * 2.0f64.sqrt();
    let descriptors = b.descriptors();
    for (j, d) in descriptors.iter().enumerate() {
        let v = eta.eta[j];
        if d.label == "k=(1,0) cos" {
            assert!((v - expected).abs() <= 1e-12, "{} vs {expected}", v);
        } else {
            assert!(v.abs() <= 1e-12, "unexpected pairing on {}: {v}", d.label);
        }
    }
}

#[test]
fn single_mode_decay_is_exact_to_roundoff() {
    let b = basis(3, 16);
    let m = b.m();
    let beta = AdvectionMatrix {
        beta: Array2::zeros((m, m)),
        skew_defect: 0.0,
    };
    let eta = ForcingVector { eta: vec![0.0; m] };
    for j in [0usize, 7, m - 1] {
        let mut xi = VelocityCoeffs::zeros(m);
        xi.xi[j] = 1.0;
        let dt = 0.037;
        let out = step_linear(&xi, &beta, &eta, dt, &b);
        let exact = (-b.eigenvalues[j] * dt).exp();
        let rel = (out.xi[j] - exact).abs() / exact;
        assert!(rel <= 1e-13, "mode {j}: rel error {rel}");
    }
}

#[test]
fn constant_forcing_matches_variation_of_constants_to_scheme_order() {
    let b = basis(2, 16);
    let m = b.m();
    let beta = AdvectionMatrix {
        beta: Array2::zeros((m, m)),
        skew_defect: 0.0,
    };
    let mut eta = ForcingVector { eta: vec![0.0; m] };
    eta.eta[4] = 1.3;
    let mut xi = VelocityCoeffs::zeros(m);
    xi.xi[4] = 0.2;
    let lambda = b.eigenvalues[4];
    let err_at = |dt: f64| {
        let out = step_linear(&xi, &beta, &eta, dt, &b);
        let exact = (-lambda * dt).exp() * 0.2 + (1.0 - (-lambda * dt).exp()) / lambda * 1.3;
        (out.xi[4] - exact).abs()
    };
    let e1 = err_at(0.1);
    let e2 = err_at(0.05);
    // One-step (local) error of a second-order scheme is O(dt^3).
    let order = (e1 / e2).log2();
    assert!(order > 2.7, "local order {order} (errors {e1}, {e2})");
}

#[test]
fn frozen_system_matches_matrix_exponential_oracle() {
    let b = basis(2, 16);
    let m = b.m();
    let mut vc = VelocityCoeffs::zeros(m);
    vc.xi[1] = 0.8;
    vc.xi[6] = -0.5;
    let v = b.synthesize(&vc).unwrap();
    let beta = assemble_advection(&v, &b).unwrap();
    let mut eta = ForcingVector { eta: vec![0.0; m] };
    for (j, e) in eta.eta.iter_mut().enumerate() {
        *e = 0.1 * ((j as f64) * 0.71).cos();
    }
    let mut xi0 = VelocityCoeffs::zeros(m);
    for (j, x) in xi0.xi.iter_mut().enumerate() {
        *x = ((j as f64) * 0.29).sin() * 0.3;
    }

    // Dense oracle: M = Lambda + beta frozen over the step.
    let mut m_mat = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            m_mat[(i, j)] = beta.beta[(i, j)];
        }
        m_mat[(i, i)] += b.eigenvalues[i];
    }
    let eta_v = DVector::from_column_slice(&eta.eta);
    let xi_v = DVector::from_column_slice(&xi0.xi);

    let err_at = |dt: f64| {
        let steps = (0.2 / dt).round() as usize;
        let mut xi = xi0.clone();
        for _ in 0..steps {
            xi = step_linear(&xi, &beta, &eta, dt, &b);
        }
        let exact = common::frozen_system_exact(&m_mat, &eta_v, &xi_v, 0.2);
        let mut err = 0.0f64;
        for j in 0..m {
            err = err.max((xi.xi[j] - exact[j]).abs());
        }
        err
    };
    let e1 = err_at(0.02);
    let e2 = err_at(0.01);
    let order = (e1 / e2).log2();
    assert!(
        (1.7..=2.6).contains(&order),
        "global order {order} (errors {e1:.3e}, {e2:.3e})"
    );
}

#[test]
fn stokes_decay_trajectory_and_steady_limit() {
    let b = basis(2, 16);
    let m = b.m();
    let times: Vec<f64> = (0..=100).map(|k| 0.01 * k as f64).collect();
    let zero_v = vec![VectorField::zeros(&b.grid); times.len()];

    // Pure Stokes decay: ||grad u(t)||^2 = sum lambda e^{-2 lambda t} xi0^2.
    let zero_theta = vec![ScalarField::zeros(&b.grid); times.len()];
    let mut xi0 = VelocityCoeffs::zeros(m);
    xi0.xi[0] = 1.0;
    xi0.xi[9] = -0.5;
    let traj = solve_linear_nse(&b, &times, &zero_v, &zero_theta, &xi0, AdvectionPath::Spectral)
        .unwrap();
    for (k, t) in times.iter().enumerate().step_by(25) {
        let expect: f64 = xi0
            .xi
            .iter()
            .zip(&b.eigenvalues)
            .map(|(x, l)| l * (x * (-l * t).exp()).powi(2))
            .sum::<f64>()
            .sqrt();
        let got = traj.states[k].v_norm(&b);
        assert!((got - expect).abs() <= 1e-10, "t={t}: {got} vs {expect}");
    }

    // Fixed theta: u approaches the projected steady state eta_j / lambda_j.
    let theta = ScalarField::from_fn(&b.grid, |x, _| 0.5 * x.cos());
    let eta = assemble_buoyancy(&theta, &b).unwrap();
    let theta_traj = vec![theta; times.len()];
    let times_long: Vec<f64> = (0..=1500).map(|k| 0.01 * k as f64).collect();
    let zero_v_long = vec![VectorField::zeros(&b.grid); times_long.len()];
    let theta_long = vec![theta_traj[0].clone(); times_long.len()];
    let traj = solve_linear_nse(
        &b,
        &times_long,
        &zero_v_long,
        &theta_long,
        &VelocityCoeffs::zeros(m),
        AdvectionPath::Spectral,
    )
    .unwrap();
    // The discrete stationary point differs from eta/lambda by the scheme's
    // O((lambda dt)^2) quadrature factor.
    let last = traj.states.last().unwrap();
    for j in 0..m {
        let expect = eta.eta[j] / b.eigenvalues[j];
        assert!(
            (last.xi[j] - expect).abs() <= 5e-5,
            "mode {j}: {} vs {expect}",
            last.xi[j]
        );
    }
}

#[test]
fn solver_is_linear_in_data_and_forcing() {
    let b = basis(3, 24);
    let m = b.m();
    let times: Vec<f64> = (0..=40).map(|k| 0.005 * k as f64).collect();
    let mut vc = VelocityCoeffs::zeros(m);
    vc.xi[2] = 0.7;
    let v = b.synthesize(&vc).unwrap();
    let v_traj = vec![v; times.len()];

    let theta_a: Vec<ScalarField> = times
        .iter()
        .map(|t| ScalarField::from_fn(&b.grid, |x, y| (x + y + t).sin() * 0.3))
        .collect();
    let theta_b: Vec<ScalarField> = times
        .iter()
        .map(|_| ScalarField::from_fn(&b.grid, |x, _| 0.2 * (2.0 * x).cos()))
        .collect();
    let mut xi_a = VelocityCoeffs::zeros(m);
    xi_a.xi[0] = 0.4;
    let mut xi_b = VelocityCoeffs::zeros(m);
    xi_b.xi[5] = -0.3;

    let run = |theta: &[ScalarField], xi0: &VelocityCoeffs| {
        solve_linear_nse(&b, &times, &v_traj, theta, xi0, AdvectionPath::Spectral).unwrap()
    };
    let sol_a = run(&theta_a, &xi_a);
    let sol_b = run(&theta_b, &xi_b);
    let theta_sum: Vec<ScalarField> = theta_a
        .iter()
        .zip(&theta_b)
        .map(|(a, bb)| {
            let mut s = a.clone();
            s.add_scaled(bb, 1.0);
            s
        })
        .collect();
    let mut xi_sum = xi_a.clone();
    xi_sum.add_scaled(&xi_b, 1.0);
    let sol_sum = run(&theta_sum, &xi_sum);

    for k in (0..times.len()).step_by(10) {
        let mut combo = sol_a.states[k].clone();
        combo.add_scaled(&sol_b.states[k], 1.0);
        combo.add_scaled(&sol_sum.states[k], -1.0);
        assert!(combo.h_norm() <= 1e-12, "superposition defect {}", combo.h_norm());
    }
}

#[test]
fn energy_balance_residual_shrinks_at_second_order() {
    // The advection term does no work; per-step energy residual is O(dt^3),
    // so halving dt roughly quarters the accumulated residual.
    let b = basis(2, 16);
    let m = b.m();
    let mut vc = VelocityCoeffs::zeros(m);
    vc.xi[1] = 0.5;
    let v = b.synthesize(&vc).unwrap();
    let theta = ScalarField::from_fn(&b.grid, |x, y| 0.3 * (x - y).sin());

    let residual_at = |dt: f64| -> f64 {
        let steps = (0.5 / dt).round() as usize;
        let times: Vec<f64> = (0..=steps).map(|k| dt * k as f64).collect();
        let v_traj = vec![v.clone(); times.len()];
        let theta_traj = vec![theta.clone(); times.len()];
        let mut xi0 = VelocityCoeffs::zeros(m);
        xi0.xi[0] = 0.6;
        let traj =
            solve_linear_nse(&b, &times, &v_traj, &theta_traj, &xi0, AdvectionPath::Spectral)
                .unwrap();
        let eta = assemble_buoyancy(&theta, &b).unwrap();
        let mut worst = 0.0f64;
        for w in traj.states.windows(2) {
            let e0: f64 = w[0].xi.iter().map(|x| x * x).sum();
            let e1: f64 = w[1].xi.iter().map(|x| x * x).sum();
            let mid: Vec<f64> = w[0]
                .xi
                .iter()
                .zip(&w[1].xi)
                .map(|(a, bb)| 0.5 * (a + bb))
                .collect();
            let diss: f64 = mid
                .iter()
                .zip(&b.eigenvalues)
                .map(|(x, l)| l * x * x)
                .sum();
            let work: f64 = mid.iter().zip(&eta.eta).map(|(x, e)| x * e).sum();
            let r = 0.5 * (e1 - e0) / dt + diss - work;
            worst = worst.max(r.abs());
        }
        worst
    };
    let r1 = residual_at(0.01);
    let r2 = residual_at(0.005);
    assert!(
        r2 <= 0.35 * r1,
        "energy residual not second order: {r1:.3e} -> {r2:.3e}"
    );
}
