//! Finite-difference operators with zero-flux closure and quadrature rules.
//!
//! The gradient is a forward difference whose normal component vanishes on
//! the high boundary; the divergence is its negative adjoint, so
//! `<grad u, m> = -<u, div m>` holds to rounding for every pair of fields.
//! The Laplacian is literally `div(grad(u))`.

use ndarray::{Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::grid::{check_slice, GridSpec, ScalarField};

/// Forward-difference gradient of one spatial slice.
pub fn grad_slice(u: ArrayView2<f64>, dx: f64, dy: f64) -> (Array2<f64>, Array2<f64>) {
    let (nx, ny) = u.dim();
    let mut gx = Array2::zeros((nx, ny));
    let mut gy = Array2::zeros((nx, ny));
    for k in 0..nx {
        for l in 0..ny {
            let c = u[[k, l]];
            if k + 1 < nx {
                gx[[k, l]] = (u[[k + 1, l]] - c) / dx;
            }
            if l + 1 < ny {
                gy[[k, l]] = (u[[k, l + 1]] - c) / dy;
            }
        }
    }
    (gx, gy)
}

/// Backward-difference divergence; exactly `-grad^T` under the cell inner product.
pub fn div_slice(mx: ArrayView2<f64>, my: ArrayView2<f64>, dx: f64, dy: f64) -> Array2<f64> {
    let (nx, ny) = mx.dim();
    let mut out = Array2::zeros((nx, ny));
    for k in 0..nx {
        for l in 0..ny {
            let east = if k + 1 < nx { mx[[k, l]] } else { 0.0 };
            let west = if k > 0 { mx[[k - 1, l]] } else { 0.0 };
            let north = if l + 1 < ny { my[[k, l]] } else { 0.0 };
            let south = if l > 0 { my[[k, l - 1]] } else { 0.0 };
            out[[k, l]] = (east - west) / dx + (north - south) / dy;
        }
    }
    out
}

pub fn laplacian_slice(u: ArrayView2<f64>, dx: f64, dy: f64) -> Array2<f64> {
    let (gx, gy) = grad_slice(u, dx, dy);
    div_slice(gx.view(), gy.view(), dx, dy)
}

/// Gradient of `u` at time node `n`.
pub fn grad(u: &ScalarField, n: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let g = u.grid();
    g.check_time(n)?;
    Ok(grad_slice(u.slice(n), g.dx(), g.dy()))
}

pub fn div(grid: &GridSpec, mx: ArrayView2<f64>, my: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_slice(grid, mx)?;
    check_slice(grid, my)?;
    Ok(div_slice(mx, my, grid.dx(), grid.dy()))
}

pub fn laplacian(grid: &GridSpec, u: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_slice(grid, u)?;
    Ok(laplacian_slice(u, grid.dx(), grid.dy()))
}

/// Forward time difference. The last node repeats the final difference.
pub fn dt_forward(u: &ScalarField) -> Result<ScalarField> {
    let grid = u.grid();
    if grid.nt < 2 {
        return Err(Error::InvalidGrid("dt_forward needs nt >= 2".into()));
    }
    let dt = grid.dt();
    let mut out = ScalarField::zeros(grid);
    for n in 0..grid.nt - 1 {
        let diff = (&u.slice(n + 1) - &u.slice(n)) / dt;
        out.slice_mut(n).assign(&diff);
    }
    let last = out.slice(grid.nt - 2).to_owned();
    out.slice_mut(grid.nt - 1).assign(&last);
    Ok(out)
}

/// Midpoint-rule spatial integral of a single slice.
pub fn integrate_slice(grid: &GridSpec, u: ArrayView2<f64>) -> f64 {
    u.sum() * grid.cell_area()
}

pub fn integrate_space(u: &ScalarField, n: usize) -> Result<f64> {
    let grid = u.grid();
    grid.check_time(n)?;
    Ok(integrate_slice(&grid, u.slice(n)))
}

/// Midpoint in space, trapezoid in time.
pub fn integrate_spacetime(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let dt = grid.dt();
    u.values()
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(n, s)| grid.time_weight(n) * dt * integrate_slice(&grid, s))
        .sum()
}

/// Cell inner product `sum a*b*dx*dy` of two slices.
pub fn dot_slice(grid: &GridSpec, a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|&x, &y| acc += x * y);
    acc * grid.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_slice(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> Array2<f64> {
        Array2::from_shape_fn((nx, ny), |_| rng.random_range(-1.0..1.0))
    }

    /// Dense matrix of the gradient map, rows = [gx; gy], columns = cells.
    fn dense_grad(nx: usize, ny: usize, dx: f64, dy: f64) -> Vec<Vec<f64>> {
        let ncell = nx * ny;
        let mut rows = vec![vec![0.0; ncell]; 2 * ncell];
        for k in 0..nx {
            for l in 0..ny {
                let c = k * ny + l;
                if k + 1 < nx {
                    rows[c][c] -= 1.0 / dx;
                    rows[c][(k + 1) * ny + l] += 1.0 / dx;
                }
                if l + 1 < ny {
                    rows[ncell + c][c] -= 1.0 / dy;
                    rows[ncell + c][k * ny + l + 1] += 1.0 / dy;
                }
            }
        }
        rows
    }

    #[test]
    fn constant_has_zero_gradient() {
        let u = Array2::from_elem((6, 5), 3.0);
        let (gx, gy) = grad_slice(u.view(), 0.1, 0.2);
        assert!(gx.iter().chain(gy.iter()).all(|&v| v == 0.0));
        let lap = laplacian_slice(u.view(), 0.1, 0.2);
        assert!(lap.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_ramp_gradient() {
        let g = GridSpec::new(8, 8, 2).unwrap();
        let u = g.sample(|x, _| x);
        let (gx, gy) = grad_slice(u.view(), g.dx(), g.dy());
        for k in 0..8 {
            for l in 0..8 {
                let expect = if k < 7 { 1.0 } else { 0.0 };
                assert!((gx[[k, l]] - expect).abs() < 1e-12);
                assert_eq!(gy[[k, l]], 0.0);
            }
        }
    }

    #[test]
    fn grad_matches_dense_oracle_and_div_is_its_negative_transpose() {
        let (nx, ny) = (8, 8);
        let g = GridSpec::new(nx, ny, 2).unwrap();
        let (dx, dy) = (g.dx(), g.dy());
        let mat = dense_grad(nx, ny, dx, dy);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_slice(&mut rng, nx, ny);
        let mx = random_slice(&mut rng, nx, ny);
        let my = random_slice(&mut rng, nx, ny);
        let (gx, gy) = grad_slice(u.view(), dx, dy);
        let d = div_slice(mx.view(), my.view(), dx, dy);
        let ncell = nx * ny;
        let flat_u: Vec<f64> = u.iter().copied().collect();
        let mut flat_m: Vec<f64> = mx.iter().copied().collect();
        flat_m.extend(my.iter().copied());
        for (r, row) in mat.iter().enumerate() {
            let v: f64 = row.iter().zip(&flat_u).map(|(a, b)| a * b).sum();
            let got = if r < ncell {
                gx.as_slice().unwrap()[r]
            } else {
                gy.as_slice().unwrap()[r - ncell]
            };
            assert!((v - got).abs() < 1e-12);
        }
        // div = -grad^T, except for boundary-face components that grad never produces.
        for c in 0..ncell {
            let k = c / ny;
            let l = c % ny;
            let mut v = 0.0;
            for (r, row) in mat.iter().enumerate() {
                let (kk, ll) = ((r % ncell) / ny, (r % ncell) % ny);
                let boundary = if r < ncell { kk + 1 == nx } else { ll + 1 == ny };
                if !boundary {
                    v -= row[c] * flat_m[r];
                }
            }
            assert!((v - d[[k, l]]).abs() < 1e-12, "cell {c}");
        }
    }

    #[test]
    fn integration_by_parts_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(nx, ny) in &[(8, 8), (13, 9), (32, 32)] {
            let g = GridSpec::new(nx, ny, 2).unwrap();
            let u = random_slice(&mut rng, nx, ny);
            let mx = random_slice(&mut rng, nx, ny);
            let my = random_slice(&mut rng, nx, ny);
            let (gx, gy) = grad_slice(u.view(), g.dx(), g.dy());
            let d = div_slice(mx.view(), my.view(), g.dx(), g.dy());
            let lhs = dot_slice(&g, gx.view(), mx.view()) + dot_slice(&g, gy.view(), my.view());
            let rhs = -dot_slice(&g, u.view(), d.view());
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn zero_flux_divergence_integrates_to_zero() {
        let g = GridSpec::new(10, 12, 2).unwrap();
        let mut mx = Array2::from_elem((10, 12), 2.5);
        let mut my = Array2::from_elem((10, 12), -1.5);
        mx.row_mut(9).fill(0.0);
        my.column_mut(11).fill(0.0);
        let d = div_slice(mx.view(), my.view(), g.dx(), g.dy());
        assert_eq!(integrate_slice(&g, d.view()), 0.0);
        for k in 1..9 {
            for l in 1..11 {
                assert_eq!(d[[k, l]], 0.0);
            }
        }
        let z = div_slice(Array2::zeros((10, 12)).view(), Array2::zeros((10, 12)).view(), 0.1, 0.1);
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn neumann_cosine_is_laplacian_eigenvector() {
        let g = GridSpec::new(16, 16, 2).unwrap();
        for mode in 0..6 {
            let u = g.sample(|x, _| (std::f64::consts::PI * mode as f64 * x).cos());
            let lap = laplacian_slice(u.view(), g.dx(), g.dy());
            let lambda = -(2.0 - 2.0 * (std::f64::consts::PI * mode as f64 / 16.0).cos()) / (g.dx() * g.dx());
            for (a, b) in lap.iter().zip(u.iter()) {
                assert!((a - lambda * b).abs() < 1e-9, "mode {mode}");
            }
        }
    }

    #[test]
    fn laplacian_is_symmetric_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GridSpec::new(9, 14, 2).unwrap();
        let u = random_slice(&mut rng, 9, 14);
        let w = random_slice(&mut rng, 9, 14);
        let lu = laplacian_slice(u.view(), g.dx(), g.dy());
        let lw = laplacian_slice(w.view(), g.dx(), g.dy());
        let (gx, gy) = grad_slice(u.view(), g.dx(), g.dy());
        let dg = div_slice(gx.view(), gy.view(), g.dx(), g.dy());
        assert_eq!(lu, dg);
        let a = dot_slice(&g, lu.view(), w.view());
        let b = dot_slice(&g, u.view(), lw.view());
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn time_difference() {
        let g = GridSpec::new(4, 4, 5).unwrap();
        let c = ScalarField::constant(g, 2.0);
        assert!(dt_forward(&c).unwrap().values().iter().all(|&v| v == 0.0));
        let lin = ScalarField::from_fn(g, |t, _, _| t);
        let d = dt_forward(&lin).unwrap();
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut r = ScalarField::zeros(g);
        r.values_mut().mapv_inplace(|_| rng.random_range(-1.0..1.0));
        let d = dt_forward(&r).unwrap();
        let v = r.values();
        for n in 0..5 {
            let src = n.min(3);
            for k in 0..4 {
                for l in 0..4 {
                    let expect = (v[[src + 1, k, l]] - v[[src, k, l]]) * 4.0;
                    assert!((d.values()[[n, k, l]] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn quadrature_basics() {
        let g = GridSpec::new(8, 6, 4).unwrap();
        let one = ScalarField::constant(g, 1.0);
        assert!((integrate_space(&one, 2).unwrap() - 1.0).abs() < 1e-14);
        assert!((integrate_spacetime(&one) - 1.0).abs() < 1e-14);
        let half = g.sample(|x, _| if x < 0.5 { 2.0 } else { 0.0 });
        assert!((integrate_slice(&g, half.view()) - 1.0).abs() < 1e-14);
        assert!(integrate_space(&one, 4).is_err());
    }
}
