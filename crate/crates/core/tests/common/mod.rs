//! Shared oracles for the integration tests. Everything here is an
//! independent computation path: dense linear algebra and low-order finite
//! differences, never the spectral machinery under test.

use nalgebra::{DMatrix, DVector};

/// Dense matrix exponential by Pade(6) with scaling and squaring.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().fold(0.0f64, |m, v| m.max(v.abs())) * n as f64;
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a_scaled = a / 2f64.powi(s);

    // Pade coefficients for m = 6.
    let c = {
        let mut c = vec![1.0f64; 7];
        for k in 1..=6usize {
            c[k] = c[k - 1] * (6 - k + 1) as f64 / ((12 - k + 1) as f64 * k as f64);
        }
        c
    };
    let id = DMatrix::identity(n, n);
    let mut term = id.clone();
    let mut num = &id * c[0];
    let mut den = &id * c[0];
    for (k, ck) in c.iter().enumerate().skip(1) {
        term = &term * &a_scaled;
        num += &term * *ck;
        if k % 2 == 0 {
            den += &term * *ck;
        } else {
            den -= &term * *ck;
        }
    }
    let mut e = den
        .lu()
        .solve(&num)
        .expect("Pade denominator is invertible");
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

/// Exact solution at time `dt` of `xi' = -M xi + eta` with constant
/// coefficients: `xi(dt) = e^{-M dt}(xi0 - M^{-1} eta) + M^{-1} eta`.
pub fn frozen_system_exact(
    m_mat: &DMatrix<f64>,
    eta: &DVector<f64>,
    xi0: &DVector<f64>,
    dt: f64,
) -> DVector<f64> {
    let stat = m_mat.clone().lu().solve(eta).expect("M invertible");
    let e = expm(&(-m_mat * dt));
    &e * (xi0 - &stat) + stat
}

/// Lowest eigenvalue of the clamped streamfunction pencil
/// `(D^2-k^2)^2 phi = lambda (k^2-D^2) phi` on [0,1] by second-order finite
/// differences with ghost-point elimination, `m` cells.
pub fn channel_lowest_eigenvalue_fd(k: f64, m: usize) -> f64 {
    let n = m - 1;
    let h = 1.0 / m as f64;
    let h2 = h * h;
    let h4 = h2 * h2;

    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        d2[(i, i)] = -2.0 / h2;
        if i > 0 {
            d2[(i, i - 1)] = 1.0 / h2;
        }
        if i + 1 < n {
            d2[(i, i + 1)] = 1.0 / h2;
        }
    }
    let mut d4 = DMatrix::zeros(n, n);
    for i in 0..n {
        // Stencil (1,-4,6,-4,1)/h^4 with phi=0 at walls and ghost values
        // phi_{-1} = phi_1 from the clamped derivative condition.
        let mut add = |j: i64, v: f64| {
            if (0..n as i64).contains(&j) {
                d4[(i, j as usize)] += v / h4;
            }
        };
        add(i as i64 - 2, 1.0);
        add(i as i64 - 1, -4.0);
        add(i as i64, 6.0);
        add(i as i64 + 1, -4.0);
        add(i as i64 + 2, 1.0);
        // Clamped walls: the ghost value reflects onto the first interior
        // node (phi_{-1} = phi_1), keeping the operator symmetric.
        if i == 0 {
            add(0, 1.0);
        }
        if i == n - 1 {
            add(n as i64 - 1, 1.0);
        }
    }

    let a = &d4 - &d2 * (2.0 * k * k) + DMatrix::identity(n, n) * k.powi(4);
    let b = DMatrix::identity(n, n) * (k * k) - &d2;

    // Inverse iteration on the pencil: dominant eigenvector of A^{-1} B.
    let lu = a.clone().lu();
    let mut x = DVector::from_element(n, 1.0);
    // Make the start vector respect the odd/even structure mildly.
    for i in 0..n {
        let y = (i + 1) as f64 * h;
        x[i] = (std::f64::consts::PI * y).sin();
    }
    let mut lambda = 0.0;
    for _ in 0..200 {
        let bx = &b * &x;
        let y = lu.solve(&bx).expect("A invertible");
        let norm = y.norm();
        x = y / norm;
        let ax = &a * &x;
        let bx = &b * &x;
        lambda = x.dot(&ax) / x.dot(&bx);
    }
    lambda
}

/// Richardson-extrapolated finite-difference eigenvalue (kills the h^2 term).
pub fn channel_eigen_oracle(k: f64) -> f64 {
    let coarse = channel_lowest_eigenvalue_fd(k, 384);
    let fine = channel_lowest_eigenvalue_fd(k, 768);
    (4.0 * fine - coarse) / 3.0
}
