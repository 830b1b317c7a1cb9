//! Problem definition for the controlled spatial SIR system.
//!
//! Discrete problem solved by this crate, with `N = nt - 1` time steps:
//!
//! ```text
//! minimize   E(rho_I(N)) + sum_{j<N} dt <alpha_i |m_i(j)|^2 / (2 rho_i(j)), 1>
//!                        + sum_{n>=1} dt <(c/2)(rho_S + rho_I + rho_R)(n)^2, 1>
//! subject to r_i(j) = 0 for j = 0..N-1, with rho_i(0) fixed, where
//!   r_S(j) = (rho_S(j+1) - rho_S(j))/dt + div m_S(j) - (eta_S^2/2) Lap rho_S(j)
//!            + beta rho_S(j) (K*rho_I)(j)
//!   r_I(j) = ... - beta rho_I(j) (K*rho_S)(j) + gamma rho_I(j)
//!   r_R(j) = ... - gamma rho_I(j)
//! ```
//!
//! Every spatial term of a constraint row is evaluated at its left node, so
//! with `m = 0` and `eta = 0` a row is one forward-Euler step. The multiplier
//! `phi_i(j)` pairs with row `j`; the extra terminal row `phi_i(N)` carries
//! the terminal condition (`phi_I(N) = dE/drho_I`, `phi_S(N) = phi_R(N) = 0`).

mod baseline;
mod objective;
mod presets;
pub(crate) mod residual;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use baseline::{classical_sir, euler_uncontrolled, mass_series, SirSeries};
pub use objective::{objective, terminal_gradient, ObjectiveValue};
pub use presets::{make_preset, ExperimentPreset, PresetName};
pub use residual::{constraint_residual, kkt_residual, ConstraintResidual, KktResidual};

use crate::error::{Error, Result};
use crate::grid::{check_slice, GridSpec, MomentumField, ScalarField};
use crate::group::Group;

/// Model coefficients. Defaults are the shared experiment settings with the
/// rates of the first experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Infection rate.
    pub beta: f64,
    /// Recovery rate.
    pub gamma: f64,
    pub alpha_s: f64,
    pub alpha_i: f64,
    pub alpha_r: f64,
    pub eta_s: f64,
    pub eta_i: f64,
    pub eta_r: f64,
    /// Congestion weight.
    pub c: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            beta: 0.7,
            gamma: 0.1,
            alpha_s: 1.0,
            alpha_i: 10.0,
            alpha_r: 1.0,
            eta_s: 0.01,
            eta_i: 0.01,
            eta_r: 0.01,
            c: 0.01,
            sigma1: 0.02,
            sigma2: 0.02,
        }
    }
}

impl ModelParams {
    pub fn alpha(&self, g: Group) -> f64 {
        match g {
            Group::S => self.alpha_s,
            Group::I => self.alpha_i,
            Group::R => self.alpha_r,
        }
    }

    pub fn eta(&self, g: Group) -> f64 {
        match g {
            Group::S => self.eta_s,
            Group::I => self.eta_i,
            Group::R => self.eta_r,
        }
    }

    /// Viscosity coefficient `eta^2 / 2` in front of the Laplacian.
    pub fn diffusion(&self, g: Group) -> f64 {
        let e = self.eta(g);
        0.5 * e * e
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta_s", self.eta_s),
            ("eta_i", self.eta_i),
            ("eta_r", self.eta_r),
            ("c", self.c),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        let positive = [
            ("alpha_s", self.alpha_s),
            ("alpha_i", self.alpha_i),
            ("alpha_r", self.alpha_r),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    /// `E = 1/2 int rho_I^2`
    Quadratic,
    /// `E = int 1/2 rho_I^2 + rho_I V`
    QuadraticPlusPotential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalCost {
    pub kind: TerminalKind,
    pub potential: Option<Array2<f64>>,
}

impl TerminalCost {
    pub fn quadratic() -> Self {
        Self {
            kind: TerminalKind::Quadratic,
            potential: None,
        }
    }

    pub fn with_potential(v: Array2<f64>) -> Result<Self> {
        if v.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "V",
                reason: "potential must be nonnegative".into(),
            });
        }
        Ok(Self {
            kind: TerminalKind::QuadraticPlusPotential,
            potential: Some(v),
        })
    }

    /// `E(rho)` with midpoint quadrature.
    pub fn value(&self, grid: &GridSpec, rho: ArrayView2<f64>) -> Result<f64> {
        check_slice(grid, rho)?;
        let quad: f64 = rho.iter().map(|r| 0.5 * r * r).sum();
        let lin = match self.kind {
            TerminalKind::Quadratic => 0.0,
            TerminalKind::QuadraticPlusPotential => {
                let v = self.potential.as_ref().ok_or(Error::MissingPotential)?;
                check_slice(grid, v.view())?;
                rho.iter().zip(v.iter()).map(|(r, p)| r * p).sum()
            }
        };
        Ok((quad + lin) * grid.cell_area())
    }
}

/// Full unknown set `{rho_i, m_i, phi_i}`, indexed by [`Group::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub rho: [ScalarField; 3],
    pub m: [MomentumField; 3],
    pub phi: [ScalarField; 3],
}

impl PopulationState {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            rho: std::array::from_fn(|_| ScalarField::zeros(grid)),
            m: std::array::from_fn(|_| MomentumField::zeros(grid)),
            phi: std::array::from_fn(|_| ScalarField::zeros(grid)),
        }
    }

    /// Densities held constant in time at their initial values; zero momentum
    /// and multipliers.
    pub fn initial(grid: GridSpec, rho0: &[Array2<f64>; 3]) -> Result<Self> {
        let mut s = Self::zeros(grid);
        for g in Group::ALL {
            s.rho[g.index()] = ScalarField::from_slice_repeated(grid, rho0[g.index()].view())?;
        }
        Ok(s)
    }

    pub fn grid(&self) -> GridSpec {
        self.rho[0].grid()
    }

    pub fn rho(&self, g: Group) -> &ScalarField {
        &self.rho[g.index()]
    }

    pub fn m(&self, g: Group) -> &MomentumField {
        &self.m[g.index()]
    }

    pub fn phi(&self, g: Group) -> &ScalarField {
        &self.phi[g.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().all(ScalarField::is_finite)
            && self.m.iter().all(MomentumField::is_finite)
            && self.phi.iter().all(ScalarField::is_finite)
    }

    pub fn check_grid(&self) -> Result<()> {
        let grid = self.grid();
        for g in Group::ALL {
            self.rho(g).check_grid(&grid)?;
            self.phi(g).check_grid(&grid)?;
            if self.m(g).grid != grid {
                return Err(Error::Shape {
                    expected: format!("{:?}", grid.shape()),
                    found: format!("{:?}", self.m(g).grid.shape()),
                });
            }
        }
        Ok(())
    }
}
