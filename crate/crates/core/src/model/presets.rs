//! The five published experiment configurations.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::TerminalCost;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Exp1,
    Exp2a,
    Exp2b,
    Exp3a,
    Exp3b,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [Self::Exp1, Self::Exp2a, Self::Exp2b, Self::Exp3a, Self::Exp3b];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exp1 => "exp1",
            Self::Exp2a => "exp2a",
            Self::Exp2b => "exp2b",
            Self::Exp3a => "exp3a",
            Self::Exp3b => "exp3b",
        }
    }

    /// `(beta, gamma)` of the preset.
    pub fn rates(self) -> (f64, f64) {
        match self {
            Self::Exp1 => (0.7, 0.1),
            Self::Exp2a => (0.34, 0.12),
            Self::Exp2b => (0.34, 0.36),
            Self::Exp3a => (0.96, 0.12),
            Self::Exp3b => (0.34, 0.12),
        }
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    /// Initial densities of S, I, R sampled at cell centers.
    pub rho0: [Array2<f64>; 3],
    pub beta: f64,
    pub gamma: f64,
    pub terminal: TerminalCost,
}

fn gaussian(x: f64, y: f64, cx: f64, cy: f64, w: f64) -> f64 {
    (-w * ((x - cx).powi(2) + (y - cy).powi(2))).exp()
}

fn cap(x: f64, y: f64, cx: f64, cy: f64, r2: f64) -> f64 {
    (r2 - (x - cx).powi(2) - (y - cy).powi(2)).max(0.0)
}

fn in_ball(x: f64, y: f64, radius: f64) -> bool {
    (x - 0.5).powi(2) + (y - 0.5).powi(2) < radius * radius
}

/// Obstacle potential: one on the central square of side 0.2.
pub fn square_potential(x: f64, y: f64) -> f64 {
    if (x - 0.5).abs() < 0.1 && (y - 0.5).abs() < 0.1 {
        1.0
    } else {
        0.0
    }
}

pub fn exp1_susceptible(x: f64, y: f64) -> f64 {
    0.6 * gaussian(x, y, 0.5, 0.5, 10.0)
}

pub fn exp1_infected(x: f64, y: f64) -> f64 {
    0.6 * gaussian(x, y, 0.6, 0.6, 35.0)
}

pub fn exp2_susceptible(x: f64, y: f64) -> f64 {
    0.45 * (gaussian(x, y, 0.3, 0.3, 15.0) + gaussian(x, y, 0.5, 0.75, 25.0) + gaussian(x, y, 0.8, 0.35, 30.0))
}

pub fn exp2_infected(x: f64, y: f64) -> f64 {
    10.0 * cap(x, y, 0.2, 0.65, 0.04) + 12.0 * cap(x, y, 0.5, 0.2, 0.03) + 12.0 * cap(x, y, 0.8, 0.55, 0.03)
}

pub fn exp3_susceptible(x: f64, y: f64) -> f64 {
    if in_ball(x, y, 0.3) {
        0.4
    } else {
        0.0
    }
}

pub fn exp3_infected(x: f64, y: f64) -> f64 {
    if in_ball(x, y, 0.2) {
        0.4
    } else {
        0.0
    }
}

pub fn make_preset(name: PresetName, grid: &GridSpec) -> ExperimentPreset {
    let (beta, gamma) = name.rates();
    let zero = Array2::zeros(grid.slice_shape());
    let (s, i, terminal) = match name {
        PresetName::Exp1 => (
            grid.sample(exp1_susceptible),
            grid.sample(exp1_infected),
            TerminalCost::quadratic(),
        ),
        PresetName::Exp2a | PresetName::Exp2b => (
            grid.sample(exp2_susceptible),
            grid.sample(exp2_infected),
            TerminalCost::quadratic(),
        ),
        PresetName::Exp3a | PresetName::Exp3b => (
            grid.sample(exp3_susceptible),
            grid.sample(exp3_infected),
            TerminalCost::with_potential(grid.sample(square_potential)).expect("square potential is nonnegative"),
        ),
    };
    ExperimentPreset {
        name,
        rho0: [s, i, zero],
        beta,
        gamma,
        terminal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp1_density_values() {
        assert!((exp1_susceptible(0.5, 0.5) - 0.6).abs() < 1e-15);
        assert!((exp1_infected(0.6, 0.6) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn exp3_density_and_potential_values() {
        assert_eq!(exp3_susceptible(0.5, 0.5), 0.4);
        assert_eq!(exp3_susceptible(0.9, 0.9), 0.0);
        assert_eq!(square_potential(0.55, 0.55), 1.0);
        assert_eq!(square_potential(0.7, 0.5), 0.0);
    }

    #[test]
    fn every_preset_starts_without_recovered() {
        let g = GridSpec::new(16, 16, 4).unwrap();
        for name in PresetName::ALL {
            let p = make_preset(name, &g);
            assert!(p.rho0[2].iter().all(|&v| v == 0.0), "{name}");
            assert!(p.rho0[0].sum() > 0.0 && p.rho0[1].sum() > 0.0);
            assert_eq!(name.as_str().parse::<PresetName>().unwrap(), name);
        }
        assert!("exp4".parse::<PresetName>().is_err());
    }

    #[test]
    fn rates() {
        assert_eq!(PresetName::Exp1.rates(), (0.7, 0.1));
        assert_eq!(PresetName::Exp2b.rates(), (0.34, 0.36));
        assert_eq!(PresetName::Exp3a.rates(), (0.96, 0.12));
    }
}
