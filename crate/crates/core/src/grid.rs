//! Space-time grid on the unit square over the unit time horizon.
//!
//! Space is cell-centered: cell `(k, l)` has center `((k+0.5)dx, (l+0.5)dy)`.
//! Time is node-based: `t_n = n dt` with `dt = 1/(nt-1)`, so `t_0 = 0` and
//! `t_{nt-1} = 1`.

use ndarray::{Array2, Array3, ArrayView2, ArrayViewMut2, Axis};

use crate::error::{Error, Result};

/// Minimum number of cells along each spatial axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nt: usize) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells per axis, got {nx}x{ny}"
            )));
        }
        if nt < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 time nodes, got {nt}")));
        }
        Ok(Self { nx, ny, nt })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        1.0 / (self.nt - 1) as f64
    }

    /// Area of one cell.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn y(&self, l: usize) -> f64 {
        (l as f64 + 0.5) * self.dy()
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn slice_shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nt, self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.nt * self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trapezoid weight of time node `n` (without the `dt` factor).
    pub fn time_weight(&self, n: usize) -> f64 {
        if n == 0 || n + 1 == self.nt {
            0.5
        } else {
            1.0
        }
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Array2<f64> {
        Array2::from_shape_fn(self.slice_shape(), |(k, l)| f(self.x(k), self.y(l)))
    }

    pub fn check_time(&self, n: usize) -> Result<()> {
        if n >= self.nt {
            Err(Error::TimeIndex { index: n, nt: self.nt })
        } else {
            Ok(())
        }
    }
}

/// A real-valued function sampled on the space-time grid, indexed `(n, k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Array3<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: Array3::zeros(grid.shape()),
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: Array3::from_elem(grid.shape(), value),
        }
    }

    pub fn from_array(grid: GridSpec, values: Array3<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::Shape {
                expected: format!("{:?}", grid.shape()),
                found: format!("{:?}", values.dim()),
            });
        }
        Ok(Self { grid, values })
    }

    /// Repeats one spatial slice at every time node.
    pub fn from_slice_repeated(grid: GridSpec, slice: ArrayView2<f64>) -> Result<Self> {
        check_slice(&grid, slice)?;
        let mut field = Self::zeros(grid);
        for mut row in field.values.outer_iter_mut() {
            row.assign(&slice);
        }
        Ok(field)
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(grid: GridSpec, f: F) -> Self {
        let values = Array3::from_shape_fn(grid.shape(), |(n, k, l)| f(grid.t(n), grid.x(k), grid.y(l)));
        Self { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array3<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array3<f64> {
        self.values
    }

    pub fn slice(&self, n: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), n)
    }

    pub fn slice_mut(&mut self, n: usize) -> ArrayViewMut2<'_, f64> {
        self.values.index_axis_mut(Axis(0), n)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.grid != *grid {
            return Err(Error::Shape {
                expected: format!("{:?}", grid.shape()),
                found: format!("{:?}", self.grid.shape()),
            });
        }
        Ok(())
    }
}

/// Two-component space-time field `m = (mx, my)`.
///
/// `mx[n, k, l]` is the flux across the face between cells `k` and `k+1`;
/// the last column of `mx` (and last row of `my`) is the boundary face and
/// stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumField {
    pub grid: GridSpec,
    pub mx: Array3<f64>,
    pub my: Array3<f64>,
}

impl MomentumField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            mx: Array3::zeros(grid.shape()),
            my: Array3::zeros(grid.shape()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mx.iter().chain(self.my.iter()).all(|v| v.is_finite())
    }

    /// Pointwise squared magnitude `mx^2 + my^2`.
    pub fn magnitude_sq(&self) -> Array3<f64> {
        let mut out = &self.mx * &self.mx;
        out.zip_mut_with(&self.my, |o, &b| *o += b * b);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.mx
            .iter()
            .chain(self.my.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

pub(crate) fn check_slice(grid: &GridSpec, slice: ArrayView2<f64>) -> Result<()> {
    if slice.dim() != grid.slice_shape() {
        return Err(Error::Shape {
            expected: format!("{:?}", grid.slice_shape()),
            found: format!("{:?}", slice.dim()),
        });
    }
    Ok(())
}
