//! Thin 2D FFT layer over `rustfft` plus periodic spectral helpers.
//!
//! Conventions: `real_to_spectrum` returns coefficients `c(k)` normalized so
//! that `f(x) = sum_k c(k) exp(i k . x)` with `k = 2*pi*(n1/Lx, n2/Ly)` and
//! signed integer frequencies `n`. The inverse path is unnormalized
//! summation, so a forward/inverse round trip is the identity.

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plan = Arc<dyn Fft<f64>>;

fn planner() -> &'static Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)> {
    static CELL: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> =
        OnceLock::new();
    CELL.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

fn plan(n: usize, forward: bool) -> Plan {
    let mut guard = planner().lock().unwrap();
    let (ref mut p, ref mut cache) = *guard;
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            if forward {
                p.plan_fft_forward(n)
            } else {
                p.plan_fft_inverse(n)
            }
        })
        .clone()
}

fn transform_axis1(data: &mut Array2<Complex<f64>>, forward: bool) {
    let (nx, ny) = data.dim();
    let p = plan(ny, forward);
    let mut scratch = vec![Complex::default(); p.get_inplace_scratch_len()];
    for i in 0..nx {
        let mut row = data.row_mut(i);
        let slice = row.as_slice_mut().expect("row must be contiguous");
        p.process_with_scratch(slice, &mut scratch);
    }
}

fn transform_axis0(data: &mut Array2<Complex<f64>>, forward: bool) {
    let (nx, ny) = data.dim();
    let p = plan(nx, forward);
    let mut scratch = vec![Complex::default(); p.get_inplace_scratch_len()];
    let mut col = vec![Complex::default(); nx];
    for j in 0..ny {
        for i in 0..nx {
            col[i] = data[(i, j)];
        }
        p.process_with_scratch(&mut col, &mut scratch);
        for i in 0..nx {
            data[(i, j)] = col[i];
        }
    }
}

/// In-place unnormalized forward 2D FFT.
pub fn fft2(data: &mut Array2<Complex<f64>>) {
    transform_axis1(data, true);
    transform_axis0(data, true);
}

/// In-place unnormalized inverse 2D FFT.
pub fn ifft2(data: &mut Array2<Complex<f64>>) {
    transform_axis1(data, false);
    transform_axis0(data, false);
}

/// Signed integer frequency for index `i` on an `n`-point periodic axis.
#[inline]
pub fn signed_freq(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Index of signed frequency `f` on an `n`-point axis.
#[inline]
pub fn freq_index(f: i64, n: usize) -> usize {
    if f >= 0 {
        f as usize
    } else {
        (f + n as i64) as usize
    }
}

/// Forward transform of a real sample to normalized coefficients.
pub fn real_to_spectrum(f: &Array2<f64>) -> Array2<Complex<f64>> {
    let (nx, ny) = f.dim();
    let mut spec = f.mapv(|v| Complex::new(v, 0.0));
    fft2(&mut spec);
    let scale = 1.0 / (nx * ny) as f64;
    spec.mapv_inplace(|c| c * scale);
    spec
}

/// Inverse transform of normalized coefficients to a real sample.
pub fn spectrum_to_real(spec: &Array2<Complex<f64>>) -> Array2<f64> {
    let mut work = spec.clone();
    ifft2(&mut work);
    work.mapv(|c| c.re)
}

/// Multiply a spectrum by `(i k)` along one axis (spectral derivative).
/// The Nyquist line is zeroed to preserve conjugate symmetry.
pub fn derivative_spectrum(
    spec: &Array2<Complex<f64>>,
    length: f64,
    axis: usize,
) -> Array2<Complex<f64>> {
    let (nx, ny) = spec.dim();
    let mut out = spec.clone();
    let tau = std::f64::consts::TAU;
    match axis {
        0 => {
            for i in 0..nx {
                let n = signed_freq(i, nx);
                let k = tau * n as f64 / length;
                let factor = if nx % 2 == 0 && i == nx / 2 {
                    Complex::new(0.0, 0.0)
                } else {
                    Complex::new(0.0, k)
                };
                for j in 0..ny {
                    out[(i, j)] *= factor;
                }
            }
        }
        1 => {
            for j in 0..ny {
                let n = signed_freq(j, ny);
                let k = tau * n as f64 / length;
                let factor = if ny % 2 == 0 && j == ny / 2 {
                    Complex::new(0.0, 0.0)
                } else {
                    Complex::new(0.0, k)
                };
                for i in 0..nx {
                    out[(i, j)] *= factor;
                }
            }
        }
        _ => panic!("axis must be 0 or 1"),
    }
    out
}

/// Zero-pad a spectrum to `(fx*nx, fy*ny)`, splitting Nyquist content evenly
/// so the refined sample stays real. Used for near-trigonometric off-grid
/// interpolation.
pub fn pad_spectrum(spec: &Array2<Complex<f64>>, fx: usize, fy: usize) -> Array2<Complex<f64>> {
    let (nx, ny) = spec.dim();
    let (mx, my) = (nx * fx, ny * fy);
    let mut out = Array2::from_elem((mx, my), Complex::new(0.0, 0.0));
    for i in 0..nx {
        let fi = signed_freq(i, nx);
        let half_x = nx % 2 == 0 && i == nx / 2;
        for j in 0..ny {
            let fj = signed_freq(j, ny);
            let half_y = ny % 2 == 0 && j == ny / 2;
            let mut targets: Vec<(i64, i64, f64)> = vec![(fi, fj, 1.0)];
            if half_x {
                targets = targets
                    .into_iter()
                    .flat_map(|(a, b, w)| vec![(a, b, 0.5 * w), (-a, b, 0.5 * w)])
                    .collect();
            }
            if half_y {
                targets = targets
                    .into_iter()
                    .flat_map(|(a, b, w)| vec![(a, b, 0.5 * w), (a, -b, 0.5 * w)])
                    .collect();
            }
            for (a, b, w) in targets {
                let ti = freq_index(a, mx);
                let tj = freq_index(b, my);
                out[(ti, tj)] += spec[(i, j)] * w;
            }
        }
    }
    out
}
