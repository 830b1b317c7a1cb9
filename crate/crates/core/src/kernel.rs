//! Gaussian interaction kernel and its convolution with density slices.
//!
//! `(K*u)(x) = sum_y K(x - y) u(y) dx dy` over the domain only (linear,
//! zero-padded convolution; no periodic wrap and no boundary renormalization).
//! The Gaussian is a product of two one-dimensional factors, so the
//! convolution is applied one axis at a time. Each pass packs two real lanes
//! into one complex FFT; the padded stamp is symmetric, hence its spectrum is
//! real and the two lanes separate into the real and imaginary parts.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, ArrayViewMut1, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{check_slice, GridSpec, ScalarField};

/// One-dimensional factor `exp(-z^2 / 2 s^2) / (s sqrt(2 pi))`.
pub fn gaussian_1d(z: f64, s: f64) -> f64 {
    (-(z * z) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

/// Full two-dimensional kernel value `K(z)`.
pub fn kernel_value(z1: f64, z2: f64, sigma1: f64, sigma2: f64) -> f64 {
    gaussian_1d(z1, sigma1) * gaussian_1d(z2, sigma2)
}

#[derive(Clone)]
struct AxisConv {
    n: usize,
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// Real spectrum of the padded stamp times the cell width, divided by `len`.
    spectrum: Vec<f64>,
}

impl AxisConv {
    fn new(n: usize, h: f64, sigma: f64) -> Self {
        let len = 2 * n;
        let mut stamp = vec![Complex64::new(0.0, 0.0); len];
        for d in 0..n {
            let v = gaussian_1d(d as f64 * h, sigma) * h;
            stamp[d] = Complex64::new(v, 0.0);
            if d > 0 {
                stamp[len - d] = Complex64::new(v, 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);
        fft.process(&mut stamp);
        let spectrum = stamp.iter().map(|c| c.re / len as f64).collect();
        Self {
            n,
            len,
            fft,
            ifft,
            spectrum,
        }
    }

    /// Convolves `a` (and `b` if given) in place.
    fn apply_pair(&self, mut a: ArrayViewMut1<f64>, b: Option<ArrayViewMut1<f64>>, buf: &mut [Complex64]) {
        let n = self.n;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        match &b {
            Some(b) => {
                for j in 0..n {
                    buf[j] = Complex64::new(a[j], b[j]);
                }
            }
            None => {
                for j in 0..n {
                    buf[j] = Complex64::new(a[j], 0.0);
                }
            }
        }
        self.fft.process(&mut buf[..self.len]);
        for (c, s) in buf.iter_mut().zip(&self.spectrum) {
            *c *= *s;
        }
        self.ifft.process(&mut buf[..self.len]);
        for j in 0..n {
            a[j] = buf[j].re;
        }
        if let Some(mut b) = b {
            for j in 0..n {
                b[j] = buf[j].im;
            }
        }
    }

    fn apply_along(&self, data: &mut Array2<f64>, axis: Axis) {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        let mut lanes: Vec<ArrayViewMut1<f64>> = data.lanes_mut(axis).into_iter().collect();
        while let Some(a) = lanes.pop() {
            let b = lanes.pop();
            self.apply_pair(a, b, &mut buf);
        }
    }
}

/// Precomputed convolution with the sampled Gaussian stamp on one grid.
#[derive(Clone)]
pub struct KernelOp {
    grid: GridSpec,
    sigma1: f64,
    sigma2: f64,
    conv_x: AxisConv,
    conv_y: AxisConv,
}

impl std::fmt::Debug for KernelOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelOp")
            .field("grid", &self.grid)
            .field("sigma1", &self.sigma1)
            .field("sigma2", &self.sigma2)
            .finish()
    }
}

impl KernelOp {
    pub fn new(grid: GridSpec, sigma1: f64, sigma2: f64) -> Result<Self> {
        for (name, s) in [("sigma1", sigma1), ("sigma2", sigma2)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("kernel width must be positive, got {s}"),
                });
            }
        }
        Ok(Self {
            grid,
            sigma1,
            sigma2,
            conv_x: AxisConv::new(grid.nx, grid.dx(), sigma1),
            conv_y: AxisConv::new(grid.ny, grid.dy(), sigma2),
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn widths(&self) -> (f64, f64) {
        (self.sigma1, self.sigma2)
    }

    /// `K(x_kl - y)` sampled over all cells `y`, i.e. one row of the operator
    /// without the `dx dy` weight.
    pub fn kernel_row(&self, k: usize, l: usize) -> Array2<f64> {
        let g = self.grid;
        g.sample(|x, y| kernel_value(g.x(k) - x, g.y(l) - y, self.sigma1, self.sigma2))
    }

    /// `sum_y K(x_kl - y) dx dy`.
    pub fn row_mass(&self, k: usize, l: usize) -> f64 {
        self.kernel_row(k, l).sum() * self.grid.cell_area()
    }

    pub fn convolve(&self, slice: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_slice(&self.grid, slice)?;
        Ok(self.convolve_unchecked(slice))
    }

    pub(crate) fn convolve_unchecked(&self, slice: ArrayView2<f64>) -> Array2<f64> {
        let mut data = slice.to_owned();
        self.conv_y.apply_along(&mut data, Axis(1));
        self.conv_x.apply_along(&mut data, Axis(0));
        data
    }

    /// Convolves every time slice of `field`.
    pub fn convolve_field(&self, field: &ScalarField) -> Result<ScalarField> {
        field.check_grid(&self.grid)?;
        let mut out = field.clone();
        out.values_mut()
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .for_each(|mut s| {
                let c = self.convolve_unchecked(s.view());
                s.assign(&c);
            });
        Ok(out)
    }
}

pub fn build_kernel(grid: GridSpec, sigma1: f64, sigma2: f64) -> Result<KernelOp> {
    KernelOp::new(grid, sigma1, sigma2)
}
