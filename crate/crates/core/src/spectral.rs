//! Spectral application and inversion of the dual-step operators
//! `A^T A = -d_tt + (eta^4/4) Lap^2 - p Lap + q`.
//!
//! Time and both space axes use Neumann closure, so the operator is diagonal
//! in the three-axis cosine basis. A mode `(w, kx, ky)` has eigenvalue
//! `mu_w + b (lx + ly)^2 + p (lx + ly) + q` with the discrete Neumann symbols
//! `mu_w = (2 - 2cos(pi w / nt)) / dt^2` and `lx = (2 - 2cos(pi kx / nx)) / dx^2`.
//!
//! [`TimeClosure::Terminal`] replaces the time part by the second difference
//! of the dual time grid: rows `0..N-1` with a reflecting start and the
//! terminal row held at zero (`N = nt - 1`). Its modes are
//! `cos((j + 1/2) theta_k)` with `theta_k = (2k + 1) pi / (2N + 1)`; there is
//! no zero eigenvalue.

use ndarray::{s, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::dct::Dct3;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::group::Group;
use crate::model::ModelParams;

/// Which first-order coefficient `p` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerVariant {
    /// `1 + 2 beta eta_S` (S) and `1 + 2 (gamma + beta) eta_S` (I), as published.
    #[default]
    Paper,
    /// `1 + beta eta_S^2` (S) and `1 + (gamma + beta) eta_I^2` (I), i.e. the
    /// cross term of the linearized constraint operator.
    Corrected,
}

impl std::str::FromStr for PreconditionerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "corrected" => Ok(Self::Corrected),
            other => Err(Error::Config(format!(
                "unknown preconditioner `{other}` (expected paper or corrected)"
            ))),
        }
    }
}

impl std::fmt::Display for PreconditionerVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Corrected => "corrected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreconditionerCoeffs {
    pub group: Group,
    /// Zeroth-order coefficient.
    pub q: f64,
    /// Coefficient of `-Lap`.
    pub p: f64,
    /// Coefficient of `Lap^2`, `eta^4 / 4`.
    pub biharmonic: f64,
}

impl PreconditionerCoeffs {
    pub fn new(group: Group, params: &ModelParams, variant: PreconditionerVariant) -> Self {
        let (beta, gamma) = (params.beta, params.gamma);
        let eta_s = params.eta_s;
        let eta = params.eta(group);
        let (q, p) = match (group, variant) {
            (Group::S, PreconditionerVariant::Paper) => (beta * beta, 1.0 + 2.0 * beta * eta_s),
            (Group::S, PreconditionerVariant::Corrected) => (beta * beta, 1.0 + beta * eta_s * eta_s),
            (Group::I, PreconditionerVariant::Paper) => {
                let r = gamma + beta;
                (r * r, 1.0 + 2.0 * r * eta_s)
            }
            (Group::I, PreconditionerVariant::Corrected) => {
                let r = gamma + beta;
                (r * r, 1.0 + r * eta * eta)
            }
            (Group::R, _) => (0.0, 1.0),
        };
        Self {
            group,
            q,
            p,
            biharmonic: eta.powi(4) / 4.0,
        }
    }
}

/// Neumann symbol `(2 - 2cos(pi k / n)) / h^2` for `k = 0..n`.
fn neumann_symbol(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos()) / (h * h))
        .collect()
}

/// Boundary closure of the time part of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeClosure {
    /// Cosine basis on all `nt` rows.
    #[default]
    Neumann,
    /// Rows `0..nt-1` only; the terminal row is fixed at zero.
    Terminal,
}

impl std::str::FromStr for TimeClosure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neumann" => Ok(Self::Neumann),
            "terminal" => Ok(Self::Terminal),
            other => Err(Error::Config(format!(
                "unknown time closure `{other}` (expected neumann or terminal)"
            ))),
        }
    }
}

impl std::fmt::Display for TimeClosure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Neumann => "neumann",
            Self::Terminal => "terminal",
        })
    }
}

/// Orthonormal eigenvectors (columns) and eigenvalues of the terminal-pinned
/// second difference on `n` rows with spacing `h`.
fn terminal_basis(n: usize, h: f64) -> (Array2<f64>, Vec<f64>) {
    let mut q = Array2::zeros((n, n));
    let mut mu = Vec::with_capacity(n);
    for k in 0..n {
        let theta = (2 * k + 1) as f64 * std::f64::consts::PI / (2 * n + 1) as f64;
        mu.push((2.0 - 2.0 * theta.cos()) / (h * h));
        let mut col = q.column_mut(k);
        for j in 0..n {
            col[j] = ((j as f64 + 0.5) * theta).cos();
        }
        let norm = col.dot(&col).sqrt();
        col /= norm;
    }
    (q, mu)
}

/// Precomputed eigenvalues of `A^T A` on one grid.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    grid: GridSpec,
    coeffs: PreconditionerCoeffs,
    closure: TimeClosure,
    eigen: Array3<f64>,
    dct: Dct3,
    time_basis: Option<Array2<f64>>,
}

impl Preconditioner {
    pub fn new(grid: GridSpec, coeffs: PreconditionerCoeffs) -> Self {
        Self::with_closure(grid, coeffs, TimeClosure::Neumann)
    }

    pub fn with_closure(grid: GridSpec, coeffs: PreconditionerCoeffs, closure: TimeClosure) -> Self {
        let (mu, time_basis) = match closure {
            TimeClosure::Neumann => (neumann_symbol(grid.nt, grid.dt()), None),
            TimeClosure::Terminal => {
                let (q, mu) = terminal_basis(grid.nt - 1, grid.dt());
                (mu, Some(q))
            }
        };
        let lx = neumann_symbol(grid.nx, grid.dx());
        let ly = neumann_symbol(grid.ny, grid.dy());
        let eigen = Array3::from_shape_fn((mu.len(), grid.nx, grid.ny), |(w, a, b)| {
            let kappa = lx[a] + ly[b];
            mu[w] + coeffs.biharmonic * kappa * kappa + coeffs.p * kappa + coeffs.q
        });
        Self {
            grid,
            coeffs,
            closure,
            eigen,
            dct: Dct3::new(grid.shape()),
            time_basis,
        }
    }

    pub fn coeffs(&self) -> &PreconditionerCoeffs {
        &self.coeffs
    }

    pub fn closure(&self) -> TimeClosure {
        self.closure
    }

    pub fn eigenvalues(&self) -> &Array3<f64> {
        &self.eigen
    }

    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        self.transform(u, |v, e| v * e)
    }

    /// Inverse on the range; a zero eigenvalue (the constant mode when `q = 0`)
    /// maps to zero.
    pub fn solve(&self, b: &ScalarField) -> Result<ScalarField> {
        self.transform(b, |v, e| if e > 0.0 { v / e } else { 0.0 })
    }

    fn transform(&self, u: &ScalarField, op: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        u.check_grid(&self.grid)?;
        if !u.is_finite() {
            return Err(Error::NonFinite("preconditioner input"));
        }
        let mut data = u.values().clone();
        match &self.time_basis {
            None => {
                self.dct.forward(&mut data);
                data.zip_mut_with(&self.eigen, |v, &e| *v = op(*v, e));
                self.dct.inverse(&mut data);
            }
            Some(q) => {
                let n = q.nrows();
                let plane = self.grid.nx * self.grid.ny;
                self.dct.forward_space(&mut data);
                let rows = data
                    .slice(s![..n, .., ..])
                    .to_shape((n, plane))
                    .expect("contiguous")
                    .to_owned();
                let mut modal = q.t().dot(&rows);
                let eig = self.eigen.view().into_shape_with_order((n, plane)).expect("contiguous");
                modal.zip_mut_with(&eig, |v, &e| *v = op(*v, e));
                let back = q
                    .dot(&modal)
                    .into_shape_with_order((n, self.grid.nx, self.grid.ny))
                    .expect("contiguous");
                data.slice_mut(s![..n, .., ..]).assign(&back);
                data.index_axis_mut(Axis(0), n).fill(0.0);
                self.dct.inverse_space(&mut data);
            }
        }
        ScalarField::from_array(self.grid, data)
    }
}

pub fn apply_ata(u: &ScalarField, coeffs: PreconditionerCoeffs) -> Result<ScalarField> {
    Preconditioner::new(u.grid(), coeffs).apply(u)
}

pub fn solve_ata(b: &ScalarField, coeffs: PreconditionerCoeffs) -> Result<ScalarField> {
    Preconditioner::new(b.grid(), coeffs).solve(b)
}
