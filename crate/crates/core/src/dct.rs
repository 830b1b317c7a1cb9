//! Type-II cosine transform and its inverse, computed with one complex FFT
//! of the same length (Makhoul's even/odd reordering).
//!
//! Forward: `X_k = sum_j x_j cos(pi k (j + 1/2) / n)` (unnormalized).
//! `inverse` undoes `forward` exactly, including the `1/n` factors.

use std::sync::Arc;

use ndarray::{Array3, ArrayViewMut1, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Dct1d {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// `exp(-i pi k / 2n)`
    twiddle: Vec<Complex64>,
}

impl std::fmt::Debug for Dct1d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct1d").field("n", &self.n).finish()
    }
}

impl Dct1d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let twiddle = (0..n)
            .map(|k| Complex64::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2.0 * n as f64)))
            .collect();
        Self {
            n,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            twiddle,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform of one lane. `buf` must hold `n` entries.
    pub fn forward(&self, mut lane: ArrayViewMut1<f64>, buf: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n.div_ceil(2) {
            buf[j] = Complex64::new(lane[2 * j], 0.0);
        }
        for j in 0..n / 2 {
            buf[n - 1 - j] = Complex64::new(lane[2 * j + 1], 0.0);
        }
        self.fft.process(&mut buf[..n]);
        for k in 0..n {
            lane[k] = (buf[k] * self.twiddle[k]).re;
        }
    }

    pub fn inverse(&self, mut lane: ArrayViewMut1<f64>, buf: &mut [Complex64]) {
        let n = self.n;
        buf[0] = Complex64::new(lane[0], 0.0);
        for k in 1..n {
            buf[k] = self.twiddle[k].conj() * Complex64::new(lane[k], -lane[n - k]);
        }
        self.ifft.process(&mut buf[..n]);
        let scale = 1.0 / n as f64;
        for j in 0..n.div_ceil(2) {
            lane[2 * j] = buf[j].re * scale;
        }
        for j in 0..n / 2 {
            lane[2 * j + 1] = buf[n - 1 - j].re * scale;
        }
    }
}

/// Separable cosine transform over all three axes of a `(t, x, y)` array.
#[derive(Debug, Clone)]
pub struct Dct3 {
    plans: [Dct1d; 3],
}

impl Dct3 {
    pub fn new(shape: (usize, usize, usize)) -> Self {
        Self {
            plans: [Dct1d::new(shape.0), Dct1d::new(shape.1), Dct1d::new(shape.2)],
        }
    }

    pub fn forward(&self, data: &mut Array3<f64>) {
        for axis in 0..3 {
            self.along_axis(data, axis, false);
        }
    }

    pub fn inverse(&self, data: &mut Array3<f64>) {
        for axis in (0..3).rev() {
            self.along_axis(data, axis, true);
        }
    }

    /// Forward transform along the two trailing (space) axes only.
    pub fn forward_space(&self, data: &mut Array3<f64>) {
        for axis in 1..3 {
            self.along_axis(data, axis, false);
        }
    }

    pub fn inverse_space(&self, data: &mut Array3<f64>) {
        for axis in (1..3).rev() {
            self.along_axis(data, axis, true);
        }
    }

    fn along_axis(&self, data: &mut Array3<f64>, axis: usize, inverse: bool) {
        let plan = &self.plans[axis];
        // Split along an axis other than the transformed one so every lane
        // stays inside one parallel chunk.
        let outer = if axis == 0 { 1 } else { 0 };
        let inner = if axis == 0 { 0 } else { axis - 1 };
        data.axis_iter_mut(Axis(outer)).into_par_iter().for_each(|mut sub| {
            let mut buf = vec![Complex64::new(0.0, 0.0); plan.len()];
            for lane in sub.lanes_mut(Axis(inner)) {
                if inverse {
                    plan.inverse(lane, &mut buf);
                } else {
                    plan.forward(lane, &mut buf);
                }
            }
        });
    }
}
