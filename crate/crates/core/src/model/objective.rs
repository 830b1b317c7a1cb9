use ndarray::{Array2, ArrayView2};

use super::{ModelParams, PopulationState, TerminalCost, TerminalKind};
use crate::error::{Error, Result};
use crate::grid::{check_slice, GridSpec};
use crate::group::Group;

/// Objective value split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// `+inf` when `overflow` is set.
    pub total: f64,
    pub terminal: f64,
    pub kinetic: f64,
    pub congestion: f64,
    /// Some cell had `rho = 0` with nonzero momentum.
    pub overflow: bool,
}

/// Kinetic integrand `alpha |m|^2 / (2 rho)` with the lower-semicontinuous
/// convention at `rho = 0`.
#[inline]
pub(crate) fn kinetic_density(alpha: f64, m_sq: f64, rho: f64) -> f64 {
    if rho > 0.0 {
        alpha * m_sq / (2.0 * rho)
    } else if m_sq == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn objective(state: &PopulationState, params: &ModelParams, terminal: &TerminalCost) -> Result<ObjectiveValue> {
    state.check_grid()?;
    let grid = state.grid();
    let n_last = grid.nt - 1;
    let dt = grid.dt();
    let area = grid.cell_area();

    let mut kinetic = 0.0;
    for g in Group::ALL {
        let alpha = params.alpha(g);
        let rho = state.rho(g).values();
        let m = state.m(g);
        for j in 0..n_last {
            let mut row = 0.0;
            for k in 0..grid.nx {
                for l in 0..grid.ny {
                    let mx = m.mx[[j, k, l]];
                    let my = m.my[[j, k, l]];
                    row += kinetic_density(alpha, mx * mx + my * my, rho[[j, k, l]]);
                }
            }
            kinetic += row * dt * area;
        }
    }

    let mut congestion = 0.0;
    let [s, i, r] = [&state.rho[0], &state.rho[1], &state.rho[2]].map(|f| f.values());
    for n in 1..grid.nt {
        let mut row = 0.0;
        for k in 0..grid.nx {
            for l in 0..grid.ny {
                let total = s[[n, k, l]] + i[[n, k, l]] + r[[n, k, l]];
                row += 0.5 * params.c * total * total;
            }
        }
        congestion += row * dt * area;
    }

    let terminal_value = terminal.value(&grid, state.rho(Group::I).slice(n_last))?;
    let overflow = !kinetic.is_finite();
    Ok(ObjectiveValue {
        total: if overflow {
            f64::INFINITY
        } else {
            terminal_value + kinetic + congestion
        },
        terminal: terminal_value,
        kinetic,
        congestion,
        overflow,
    })
}

/// Variational derivative of the terminal cost with respect to `rho_I(T)`,
/// per unit area.
pub fn terminal_gradient(grid: &GridSpec, rho_t: ArrayView2<f64>, terminal: &TerminalCost) -> Result<Array2<f64>> {
    check_slice(grid, rho_t)?;
    match terminal.kind {
        TerminalKind::Quadratic => Ok(rho_t.to_owned()),
        TerminalKind::QuadraticPlusPotential => {
            let v = terminal.potential.as_ref().ok_or(Error::MissingPotential)?;
            check_slice(grid, v.view())?;
            Ok(&rho_t + v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec::new(8, 8, 4).unwrap()
    }

    #[test]
    fn zero_state_costs_nothing() {
        let state = PopulationState::zeros(grid());
        let v = objective(&state, &ModelParams::default(), &TerminalCost::quadratic()).unwrap();
        assert_eq!(v.total, 0.0);
        assert!(!v.overflow);
    }

    #[test]
    fn constant_susceptible_pays_congestion_only() {
        let g = grid();
        let mut state = PopulationState::zeros(g);
        state.rho[0] = ScalarField::constant(g, 0.3);
        let p = ModelParams::default();
        let v = objective(&state, &p, &TerminalCost::quadratic()).unwrap();
        assert!((v.total - 0.5 * p.c * 0.09).abs() < 1e-15);
    }

    #[test]
    fn momentum_on_empty_cell_overflows() {
        let g = grid();
        let mut state = PopulationState::zeros(g);
        state.m[1].mx[[1, 2, 2]] = 0.1;
        let v = objective(&state, &ModelParams::default(), &TerminalCost::quadratic()).unwrap();
        assert!(v.overflow);
        assert_eq!(v.total, f64::INFINITY);
    }

    /// Independent loop over flat indices with the same quadrature.
    #[test]
    #[allow(clippy::needless_range_loop)] // flat-index oracle on purpose
    fn random_state_matches_direct_sum() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut state = PopulationState::zeros(g);
        for i in 0..3 {
            state.rho[i].values_mut().mapv_inplace(|_| rng.random_range(0.1..1.0));
            state.m[i].mx.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            state.m[i].my.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        }
        let p = ModelParams {
            c: 0.7,
            ..ModelParams::default()
        };
        let v = objective(&state, &p, &TerminalCost::quadratic()).unwrap();

        let cell = g.nx * g.ny;
        let dt = g.dt();
        let area = g.cell_area();
        let alphas = [p.alpha_s, p.alpha_i, p.alpha_r];
        let rho: Vec<&[f64]> = state.rho.iter().map(|f| f.values().as_slice().unwrap()).collect();
        let mut want = 0.0;
        for idx in 0..g.len() {
            let n = idx / cell;
            if n < g.nt - 1 {
                for i in 0..3 {
                    let mx = state.m[i].mx.as_slice().unwrap()[idx];
                    let my = state.m[i].my.as_slice().unwrap()[idx];
                    want += alphas[i] * (mx * mx + my * my) / (2.0 * rho[i][idx]) * dt * area;
                }
            }
            if n >= 1 {
                let t = rho[0][idx] + rho[1][idx] + rho[2][idx];
                want += 0.5 * p.c * t * t * dt * area;
            }
            if n == g.nt - 1 {
                want += 0.5 * rho[1][idx] * rho[1][idx] * area;
            }
        }
        assert!(
            (v.total - want).abs() < 1e-12 * want.abs().max(1.0),
            "{} vs {}",
            v.total,
            want
        );
    }

    #[test]
    fn terminal_gradient_cases() {
        let g = grid();
        let zero = Array2::zeros((8, 8));
        let q = terminal_gradient(&g, zero.view(), &TerminalCost::quadratic()).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
        let v = g.sample(|x, y| if x < 0.5 && y > 0.5 { 1.0 } else { 0.0 });
        let e = TerminalCost::with_potential(v.clone()).unwrap();
        assert_eq!(terminal_gradient(&g, zero.view(), &e).unwrap(), v);
        let missing = TerminalCost {
            kind: TerminalKind::QuadraticPlusPotential,
            potential: None,
        };
        assert!(matches!(
            terminal_gradient(&g, zero.view(), &missing),
            Err(Error::MissingPotential)
        ));
    }

    #[test]
    fn terminal_gradient_matches_central_difference() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = Array2::from_shape_fn((8, 8), |_| rng.random_range(0.0..1.0));
        let h = Array2::from_shape_fn((8, 8), |_| rng.random_range(-1.0..1.0));
        let v = Array2::from_shape_fn((8, 8), |_| rng.random_range(0.0..1.0));
        for cost in [TerminalCost::quadratic(), TerminalCost::with_potential(v).unwrap()] {
            let grad = terminal_gradient(&g, rho.view(), &cost).unwrap();
            let eps = 1e-5;
            let plus = cost.value(&g, (&rho + &(&h * eps)).view()).unwrap();
            let minus = cost.value(&g, (&rho - &(&h * eps)).view()).unwrap();
            let fd = (plus - minus) / (2.0 * eps);
            let analytic = (&grad * &h).sum() * g.cell_area();
            assert!((fd - analytic).abs() < 1e-9);
            // pointwise: perturb one cell at a time
            for k in 0..8 {
                for l in 0..8 {
                    let mut e = Array2::zeros((8, 8));
                    e[[k, l]] = 1.0;
                    let p = cost.value(&g, (&rho + &(&e * eps)).view()).unwrap();
                    let m = cost.value(&g, (&rho - &(&e * eps)).view()).unwrap();
                    let fd = (p - m) / (2.0 * eps) / g.cell_area();
                    assert!((fd - grad[[k, l]]).abs() < 1e-7);
                }
            }
        }
    }
}
