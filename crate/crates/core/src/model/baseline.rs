//! Uncontrolled reference dynamics.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::grid::{check_slice, GridSpec, ScalarField};
use crate::ops::integrate_slice;

/// Pointwise forward-Euler SIR with local coupling and no movement.
///
/// Fails if the step could drive a density negative
/// (`dt * beta * max(rho_S + rho_I + rho_R) > 1` or `dt * gamma > 1`).
pub fn euler_uncontrolled(grid: GridSpec, rho0: &[Array2<f64>; 3], beta: f64, gamma: f64) -> Result<[ScalarField; 3]> {
    for r in rho0 {
        check_slice(&grid, r.view())?;
    }
    let dt = grid.dt();
    // rho_I never exceeds the pointwise total, which the scheme conserves.
    let max_total = (&rho0[0] + &rho0[1] + &rho0[2]).iter().fold(0.0f64, |a, &v| a.max(v));
    if !(dt * beta * max_total <= 1.0 && dt * gamma <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "nt",
            reason: format!("forward Euler step dt = {dt} would leave the nonnegative cone"),
        });
    }

    let mut out: [ScalarField; 3] = std::array::from_fn(|_| ScalarField::zeros(grid));
    for (field, init) in out.iter_mut().zip(rho0) {
        field.slice_mut(0).assign(init);
    }
    for n in 0..grid.nt - 1 {
        let s = out[0].slice(n).to_owned();
        let i = out[1].slice(n).to_owned();
        let r = out[2].slice(n).to_owned();
        let infect = &s * &i * (dt * beta);
        let recover = &i * (dt * gamma);
        out[0].slice_mut(n + 1).assign(&(&s - &infect));
        out[1].slice_mut(n + 1).assign(&(&i + &infect - &recover));
        out[2].slice_mut(n + 1).assign(&(&r + &recover));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirSeries {
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

/// Forward-Euler solution of the classical SIR system on `[0, 1]` with `nt`
/// nodes.
pub fn classical_sir(s0: f64, i0: f64, r0: f64, beta: f64, gamma: f64, nt: usize) -> Result<SirSeries> {
    if nt < 2 {
        return Err(Error::InvalidParameter {
            name: "nt",
            reason: format!("need at least two time nodes, got {nt}"),
        });
    }
    let dt = 1.0 / (nt - 1) as f64;
    let mut out = SirSeries {
        s: Vec::with_capacity(nt),
        i: Vec::with_capacity(nt),
        r: Vec::with_capacity(nt),
    };
    let (mut s, mut i, mut r) = (s0, i0, r0);
    for _ in 0..nt {
        out.s.push(s);
        out.i.push(i);
        out.r.push(r);
        let infect = dt * beta * s * i;
        let recover = dt * gamma * i;
        s -= infect;
        i += infect - recover;
        r += recover;
    }
    Ok(out)
}

/// `int rho(t_n, x) dx` for every time node.
pub fn mass_series(rho: &ScalarField) -> Vec<f64> {
    let grid = rho.grid();
    rho.values()
        .axis_iter(Axis(0))
        .map(|s| integrate_slice(&grid, s))
        .collect()
}
