//! Scalar-field derivatives on either geometry: spectral in every periodic
//! direction, collocation in the wall-normal direction of the channel.

use ndarray::Array2;

use crate::fft::{derivative_spectrum, real_to_spectrum, spectrum_to_real};
use crate::geometry::{GeometryKind, Grid2};

/// Both partial derivatives of a scalar grid sample.
pub fn scalar_gradient(grid: &Grid2, f: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let spec = real_to_spectrum(f);
    let fx = spectrum_to_real(&derivative_spectrum(&spec, grid.geometry.lx, 0));
    let fy = match grid.geometry.kind {
        GeometryKind::Torus => {
            spectrum_to_real(&derivative_spectrum(&spec, grid.geometry.ly, 1))
        }
        GeometryKind::Channel => grid.differentiate_y(f),
    };
    (fx, fy)
}

/// `||grad f||_{L2}` by grid quadrature.
pub fn grad_l2_norm(grid: &Grid2, f: &Array2<f64>) -> f64 {
    let (fx, fy) = scalar_gradient(grid, f);
    (grid.inner(&fx, &fx) + grid.inner(&fy, &fy)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use approx::assert_abs_diff_eq;

    #[test]
    fn torus_gradient_of_plane_wave() {
        let grid = Grid2::new(Geometry::torus_2pi(), 32, 32).unwrap();
        let f = Array2::from_shape_fn((32, 32), |(i, j)| {
            (grid.x[i] + 2.0 * grid.y[j]).sin()
        });
        let (fx, fy) = scalar_gradient(&grid, &f);
        for i in 0..32 {
            for j in 0..32 {
                let c = (grid.x[i] + 2.0 * grid.y[j]).cos();
                assert_abs_diff_eq!(fx[(i, j)], c, epsilon = 1e-10);
                assert_abs_diff_eq!(fy[(i, j)], 2.0 * c, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn channel_gradient_mixes_fourier_and_collocation() {
        let geo = Geometry::channel(std::f64::consts::TAU).unwrap();
        let grid = Grid2::new(geo, 16, 24).unwrap();
        let f = Array2::from_shape_fn((16, 24), |(i, j)| grid.x[i].cos() * grid.y[j].powi(3));
        let (fx, fy) = scalar_gradient(&grid, &f);
        for i in 0..16 {
            for j in 0..24 {
                assert_abs_diff_eq!(
                    fx[(i, j)],
                    -grid.x[i].sin() * grid.y[j].powi(3),
                    epsilon = 1e-9
                );
                assert_abs_diff_eq!(
                    fy[(i, j)],
                    grid.x[i].cos() * 3.0 * grid.y[j].powi(2),
                    epsilon = 1e-9
                );
            }
        }
    }
}
