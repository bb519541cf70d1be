//! Legendre polynomial utilities for the channel eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};

/// Values and derivatives (up to `D`) of `L_0..L_{nmax}` at `s` in `[-1,1]`.
///
/// Returns `out[d][n]` = d-th derivative of `L_n` at `s`, built from the
/// differentiated three-term recurrence
/// `(n+1) L_{n+1}^{(d)} = (2n+1)(s L_n^{(d)} + d L_n^{(d-1)}) - n L_{n-1}^{(d)}`.
pub fn legendre_eval<const D: usize>(nmax: usize, s: f64) -> Vec<[f64; D]> {
    let mut out = vec![[0.0; D]; nmax + 1];
    out[0][0] = 1.0;
    if nmax == 0 {
        return out;
    }
    out[1][0] = s;
    if D > 1 {
        out[1][1] = 1.0;
    }
    for n in 1..nmax {
        for d in 0..D {
            let lower = if d > 0 { out[n][d - 1] } else { 0.0 };
            out[n + 1][d] = ((2 * n + 1) as f64 * (s * out[n][d] + d as f64 * lower)
                - n as f64 * out[n - 1][d])
                / (n + 1) as f64;
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` via the Golub-Welsch
/// symmetric tridiagonal eigenproblem.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jac = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (x, 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_rule_integrates_high_degree_polynomials() {
        let (x, w) = gauss_legendre(12);
        for p in 0..(2 * 12) {
            let integral: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p)).sum();
            let exact = if p % 2 == 0 {
                2.0 / (p as f64 + 1.0)
            } else {
                0.0
            };
            assert_abs_diff_eq!(integral, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn legendre_values_and_derivatives() {
        let s = 0.3;
        let vals = legendre_eval::<3>(5, s);
        assert_abs_diff_eq!(vals[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[1][0], s, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[2][0], 0.5 * (3.0 * s * s - 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(vals[2][1], 3.0 * s, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[3][0], 0.5 * (5.0 * s.powi(3) - 3.0 * s), epsilon = 1e-14);
        assert_abs_diff_eq!(vals[3][1], 0.5 * (15.0 * s * s - 3.0), epsilon = 1e-14);
        assert_abs_diff_eq!(vals[3][2], 15.0 * s, epsilon = 1e-13);
    }
}
