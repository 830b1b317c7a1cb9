//! Constraint residuals and first-order optimality residuals.

use ndarray::{s, Array3, ArrayView2, Axis};

use super::{terminal_gradient, ModelParams, PopulationState, TerminalCost};
use crate::error::Result;
use crate::grid::{GridSpec, MomentumField};
use crate::group::Group;
use crate::kernel::KernelOp;
use crate::ops::{div_slice, grad_slice, laplacian_slice};

/// Residuals of the three transport constraints, `nt - 1` rows each.
#[derive(Debug, Clone)]
pub struct ConstraintResidual {
    pub rows: [Array3<f64>; 3],
    /// `sqrt(sum dt dx dy r^2)` per group.
    pub norms: [f64; 3],
}

impl ConstraintResidual {
    pub fn group(&self, g: Group) -> &Array3<f64> {
        &self.rows[g.index()]
    }
}

/// Optimality residual norms. `hj` are the multiplier (Hamilton-Jacobi type)
/// equations on rows `1..nt`, `fp` the transport equations with the optimal
/// momentum `m = -rho grad(phi) / alpha` on rows `0..nt-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    pub hj: [f64; 3],
    pub fp: [f64; 3],
    /// `|| phi_I(T) - dE(rho_I(T)) ||` over space.
    pub terminal: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.hj
            .iter()
            .chain(self.fp.iter())
            .fold(self.terminal, |a, &b| a.max(b))
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.hj[0], self.hj[1], self.hj[2], self.fp[0], self.fp[1], self.fp[2]]
    }
}

pub(crate) fn spacetime_norm(grid: &GridSpec, rows: &Array3<f64>) -> f64 {
    (rows.iter().map(|v| v * v).sum::<f64>() * grid.dt() * grid.cell_area()).sqrt()
}

/// Constraint rows from raw arrays; `k_s = K*rho_S` and `k_i = K*rho_I`
/// are needed on rows `0..nt-1`.
pub(crate) fn constraint_rows(
    grid: &GridSpec,
    params: &ModelParams,
    rho: [&Array3<f64>; 3],
    m: [&MomentumField; 3],
    k_s: &Array3<f64>,
    k_i: &Array3<f64>,
) -> [Array3<f64>; 3] {
    let steps = grid.nt - 1;
    let (dt, dx, dy) = (grid.dt(), grid.dx(), grid.dy());
    let (beta, gamma) = (params.beta, params.gamma);
    let mut out: [Array3<f64>; 3] = std::array::from_fn(|_| Array3::zeros((steps, grid.nx, grid.ny)));
    for g in Group::ALL {
        let gi = g.index();
        let d = params.diffusion(g);
        let r = rho[gi];
        for j in 0..steps {
            let cur = r.index_axis(Axis(0), j);
            let next = r.index_axis(Axis(0), j + 1);
            let divm = div_slice(m[gi].mx.index_axis(Axis(0), j), m[gi].my.index_axis(Axis(0), j), dx, dy);
            let lap = laplacian_slice(cur, dx, dy);
            let mut row = out[gi].index_axis_mut(Axis(0), j);
            ndarray::Zip::from(&mut row)
                .and(&cur)
                .and(&next)
                .and(&divm)
                .and(&lap)
                .for_each(|o, &c, &nx, &dv, &lp| *o = (nx - c) / dt + dv - d * lp);
            let rho_s = rho[0].index_axis(Axis(0), j);
            let rho_i = rho[1].index_axis(Axis(0), j);
            match g {
                Group::S => {
                    ndarray::Zip::from(&mut row)
                        .and(&rho_s)
                        .and(&k_i.index_axis(Axis(0), j))
                        .for_each(|o, &s, &ki| *o += beta * s * ki);
                }
                Group::I => {
                    ndarray::Zip::from(&mut row)
                        .and(&rho_i)
                        .and(&k_s.index_axis(Axis(0), j))
                        .for_each(|o, &i, &ks| *o += -beta * i * ks + gamma * i);
                }
                Group::R => {
                    ndarray::Zip::from(&mut row)
                        .and(&rho_i)
                        .for_each(|o, &i| *o -= gamma * i);
                }
            }
        }
    }
    out
}

pub fn constraint_residual(
    state: &PopulationState,
    params: &ModelParams,
    kernel: &KernelOp,
) -> Result<ConstraintResidual> {
    state.check_grid()?;
    let grid = state.grid();
    let k_s = kernel.convolve_field(state.rho(Group::S))?;
    let k_i = kernel.convolve_field(state.rho(Group::I))?;
    let rows = constraint_rows(
        &grid,
        params,
        [&state.rho[0], &state.rho[1], &state.rho[2]].map(|f| f.values()),
        [&state.m[0], &state.m[1], &state.m[2]],
        k_s.values(),
        k_i.values(),
    );
    let norms = std::array::from_fn(|i| spacetime_norm(&grid, &rows[i]));
    Ok(ConstraintResidual { rows, norms })
}

/// Kernel products entering the multiplier equations.
pub(crate) struct DualCouplings<'a> {
    /// `K*rho_S`, `K*rho_I`
    pub k_s: &'a Array3<f64>,
    pub k_i: &'a Array3<f64>,
    /// `K*(phi_S rho_S)`, `K*(phi_I rho_I)`
    pub k_phi_s: &'a Array3<f64>,
    pub k_phi_i: &'a Array3<f64>,
}

/// Derivative of the constraint pairing with respect to `rho_g(n)` per unit
/// space-time measure, for `n = 1..nt`. Row 0 is left at zero.
///
/// Interior rows: `dphi/dt (backward) + (eta^2/2) Lap phi + coupling`; the
/// terminal row only carries the time difference.
pub(crate) fn dual_drive<'a>(
    g: Group,
    grid: &GridSpec,
    params: &ModelParams,
    phi: [&Array3<f64>; 3],
    coupling: &DualCouplings<'a>,
) -> Array3<f64> {
    let (dt, dx, dy) = (grid.dt(), grid.dx(), grid.dy());
    let (beta, gamma) = (params.beta, params.gamma);
    let d = params.diffusion(g);
    let last = grid.nt - 1;
    let own = phi[g.index()];
    let mut out = Array3::zeros(grid.shape());
    for n in 1..=last {
        let mut row = out.index_axis_mut(Axis(0), n);
        let cur = own.index_axis(Axis(0), n);
        let prev = own.index_axis(Axis(0), n - 1);
        ndarray::Zip::from(&mut row)
            .and(&cur)
            .and(&prev)
            .for_each(|o, &c, &p| *o = (c - p) / dt);
        if n == last {
            continue;
        }
        let lap = laplacian_slice(cur, dx, dy);
        row.scaled_add(d, &lap);
        let at = |a: &'a Array3<f64>| a.index_axis(Axis(0), n);
        match g {
            Group::S => {
                // beta (K*(phi_I rho_I) - phi_S K*rho_I)
                ndarray::Zip::from(&mut row)
                    .and(at(coupling.k_phi_i))
                    .and(&cur)
                    .and(at(coupling.k_i))
                    .for_each(|o, &kp, &ps, &ki| *o += beta * (kp - ps * ki));
            }
            Group::I => {
                // beta (phi_I K*rho_S - K*(phi_S rho_S)) + gamma (phi_R - phi_I)
                let phi_r = phi[2].index_axis(Axis(0), n);
                ndarray::Zip::from(&mut row)
                    .and(&cur)
                    .and(at(coupling.k_s))
                    .and(at(coupling.k_phi_s))
                    .and(&phi_r)
                    .for_each(|o, &pi, &ks, &kp, &pr| *o += beta * (pi * ks - kp) + gamma * (pr - pi));
            }
            Group::R => {}
        }
    }
    out
}

/// Residuals of the optimality system at `state`.
///
/// Where a density vanishes only the inequality part of the stationarity
/// condition is counted.
pub fn kkt_residual(
    state: &PopulationState,
    params: &ModelParams,
    kernel: &KernelOp,
    terminal: &TerminalCost,
) -> Result<KktResidual> {
    state.check_grid()?;
    let grid = state.grid();
    let last = grid.nt - 1;
    let (dx, dy) = (grid.dx(), grid.dy());
    let rho = [&state.rho[0], &state.rho[1], &state.rho[2]].map(|f| f.values());
    let phi = [&state.phi[0], &state.phi[1], &state.phi[2]].map(|f| f.values());

    let k_s = kernel.convolve_field(state.rho(Group::S))?;
    let k_i = kernel.convolve_field(state.rho(Group::I))?;
    let mut prod_s = state.phi(Group::S).clone();
    prod_s.values_mut().zip_mut_with(rho[0], |p, &r| *p *= r);
    let mut prod_i = state.phi(Group::I).clone();
    prod_i.values_mut().zip_mut_with(rho[1], |p, &r| *p *= r);
    let k_phi_s = kernel.convolve_field(&prod_s)?;
    let k_phi_i = kernel.convolve_field(&prod_i)?;
    let coupling = DualCouplings {
        k_s: k_s.values(),
        k_i: k_i.values(),
        k_phi_s: k_phi_s.values(),
        k_phi_i: k_phi_i.values(),
    };

    let total = rho[0] + rho[1] + rho[2];
    let mut hj = [0.0; 3];
    let mut optimal_m: [MomentumField; 3] = std::array::from_fn(|_| MomentumField::zeros(grid));
    for g in Group::ALL {
        let gi = g.index();
        let alpha = params.alpha(g);
        let mut h = dual_drive(g, &grid, params, phi, &coupling);
        h.zip_mut_with(&total, |v, &t| *v += params.c * t);
        for n in 0..last {
            let (gx, gy) = grad_slice(phi[gi].index_axis(Axis(0), n), dx, dy);
            let r = rho[gi].index_axis(Axis(0), n);
            if n > 0 {
                let mut row = h.index_axis_mut(Axis(0), n);
                ndarray::Zip::from(&mut row)
                    .and(&gx)
                    .and(&gy)
                    .for_each(|o, &a, &b| *o -= (a * a + b * b) / (2.0 * alpha));
            }
            let m = &mut optimal_m[gi];
            ndarray::Zip::from(m.mx.index_axis_mut(Axis(0), n))
                .and(&gx)
                .and(&r)
                .for_each(|o, &a, &rv| *o = -rv * a / alpha);
            ndarray::Zip::from(m.my.index_axis_mut(Axis(0), n))
                .and(&gy)
                .and(&r)
                .for_each(|o, &b, &rv| *o = -rv * b / alpha);
        }
        let mut rows = h.slice(s![1.., .., ..]).to_owned();
        ndarray::Zip::from(&mut rows)
            .and(&rho[gi].slice(s![1.., .., ..]))
            .for_each(|v, &r| {
                if r <= 0.0 {
                    *v = v.min(0.0);
                }
            });
        hj[gi] = spacetime_norm(&grid, &rows);
    }

    let fp_rows = constraint_rows(
        &grid,
        params,
        rho,
        [&optimal_m[0], &optimal_m[1], &optimal_m[2]],
        coupling.k_s,
        coupling.k_i,
    );
    let fp = std::array::from_fn(|i| spacetime_norm(&grid, &fp_rows[i]));

    let target = terminal_gradient(&grid, state.rho(Group::I).slice(last), terminal)?;
    let terminal_mismatch = slice_norm(&grid, &(&state.phi(Group::I).slice(last) - &target).view());
    Ok(KktResidual {
        hj,
        fp,
        terminal: terminal_mismatch,
    })
}

fn slice_norm(grid: &GridSpec, v: &ArrayView2<f64>) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * grid.cell_area()).sqrt()
}
