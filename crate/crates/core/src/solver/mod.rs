//! Preconditioned primal-dual iteration for the controlled SIR problem.
//!
//! One sweep performs, for every group, a proximal density step, a
//! closed-form momentum step and a preconditioned dual ascent step. The
//! primal steps read the extrapolated multiplier `2 phi_half - phi_prev`;
//! the dual step starts from the previous non-extrapolated multiplier.

mod cubic;
mod updates;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use cubic::root_plus;
pub use updates::{update_m, update_phi, update_rho, PhiUpdate};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, MomentumField, ScalarField};
use crate::group::Group;
use crate::kernel::KernelOp;
use crate::model::residual::{constraint_rows, spacetime_norm, DualCouplings};
use crate::model::{
    kkt_residual, mass_series, objective, terminal_gradient, ExperimentPreset, KktResidual, ModelParams,
    PopulationState, TerminalCost,
};
use crate::spectral::{Preconditioner, PreconditionerCoeffs, PreconditionerVariant, TimeClosure};
use updates::{convolved_products, m_step, phi_step, rho_step, RhoInputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Primal step per group (S, I, R).
    pub tau: [f64; 3],
    /// Dual step per group.
    pub sigma: [f64; 3],
    /// Stop once `|P_k+1 - P_k| / |P_k| < tol` for `patience` sweeps in a row.
    pub tol: f64,
    pub max_iter: usize,
    /// No stopping test before this many iterations.
    pub min_iter: usize,
    /// Consecutive iterations the relative error must stay below `tol`.
    pub patience: usize,
    pub preconditioner: PreconditionerVariant,
    pub time_closure: TimeClosure,
    /// Stride for optimality-residual sampling and progress callbacks.
    pub log_every: usize,
    /// Step halvings allowed on divergence.
    pub max_backoffs: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tau: [0.05; 3],
            sigma: [1.0; 3],
            tol: 1e-6,
            max_iter: 50_000,
            min_iter: 20,
            patience: 100,
            preconditioner: PreconditionerVariant::Paper,
            time_closure: TimeClosure::Terminal,
            log_every: 100,
            max_backoffs: 6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, vals) in [("tau", &self.tau), ("sigma_dual", &self.sigma)] {
            if vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("step sizes must be finite and > 0, got {vals:?}"),
                });
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be > 0, got {}", self.tol),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be >= 1".into(),
            });
        }
        if self.log_every == 0 {
            return Err(Error::InvalidParameter {
                name: "log_every",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Per-iteration record of a solve. Index `k` describes the iterate after
/// `k + 1` sweeps.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub initial_objective: f64,
    pub objective: Vec<f64>,
    pub rel_error: Vec<f64>,
    /// Constraint residual norms (S, I, R) of the primal iterate.
    pub residuals: Vec<[f64; 3]>,
    /// `(iteration, residuals)` every `log_every` sweeps and at the end.
    pub kkt: Vec<(usize, KktResidual)>,
    pub seconds: Vec<f64>,
    /// Final `int rho_i(t_n)` for S, I, R.
    pub masses: [Vec<f64>; 3],
    pub converged: bool,
    /// Number of step halvings that were needed.
    pub backoffs: usize,
    pub tau: [f64; 3],
    pub sigma: [f64; 3],
}

impl RunReport {
    pub fn iterations(&self) -> usize {
        self.objective.len()
    }
}

/// Snapshot handed to progress observers.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub iteration: usize,
    pub objective: f64,
    pub rel_error: f64,
    pub residuals: [f64; 3],
}

/// Solves from the preset's initial data and terminal cost. The rates in
/// `params` take precedence over those stored in the preset.
pub fn solve(
    preset: &ExperimentPreset,
    grid: GridSpec,
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<(PopulationState, RunReport)> {
    solve_observed(preset, grid, params, opts, &mut |_| {})
}

pub fn solve_observed(
    preset: &ExperimentPreset,
    grid: GridSpec,
    params: &ModelParams,
    opts: &SolverOptions,
    observer: &mut dyn FnMut(&Progress),
) -> Result<(PopulationState, RunReport)> {
    params.validate()?;
    opts.validate()?;
    let kernel = KernelOp::new(grid, params.sigma1, params.sigma2)?;
    let mut steps = opts.clone();
    let mut backoffs = 0;
    loop {
        match run_once(preset, grid, params, &steps, &kernel, observer)? {
            Attempt::Done(done) => {
                let (state, mut report) = *done;
                report.backoffs = backoffs;
                return Ok((state, report));
            }
            Attempt::Diverged { iteration, reason } => {
                if backoffs >= opts.max_backoffs {
                    return Err(Error::Diverged { iteration, reason });
                }
                backoffs += 1;
                for v in steps.tau.iter_mut().chain(steps.sigma.iter_mut()) {
                    *v *= 0.5;
                }
            }
        }
    }
}

enum Attempt {
    Done(Box<(PopulationState, RunReport)>),
    Diverged { iteration: usize, reason: String },
}

fn initial_state(preset: &ExperimentPreset, grid: GridSpec) -> Result<PopulationState> {
    let mut state = PopulationState::initial(grid, &preset.rho0)?;
    let last = grid.nt - 1;
    let target = terminal_gradient(&grid, state.rho(Group::I).slice(last), &preset.terminal)?;
    state.phi[Group::I.index()].slice_mut(last).assign(&target);
    Ok(state)
}

fn run_once(
    preset: &ExperimentPreset,
    grid: GridSpec,
    params: &ModelParams,
    opts: &SolverOptions,
    kernel: &KernelOp,
    observer: &mut dyn FnMut(&Progress),
) -> Result<Attempt> {
    let terminal: &TerminalCost = &preset.terminal;
    let mut state = initial_state(preset, grid)?;
    let mut phi_bar: [ndarray::Array3<f64>; 3] = std::array::from_fn(|i| state.phi[i].values().clone());
    let preconds: Vec<Preconditioner> = Group::ALL
        .iter()
        .map(|&g| {
            let coeffs = PreconditionerCoeffs::new(g, params, opts.preconditioner);
            Preconditioner::with_closure(grid, coeffs, opts.time_closure)
        })
        .collect();

    let conv = |a: &ndarray::Array3<f64>| -> Result<ndarray::Array3<f64>> {
        Ok(kernel
            .convolve_field(&ScalarField::from_array(grid, a.clone())?)?
            .into_values())
    };
    let mut k_s = conv(state.rho[0].values())?;
    let mut k_i = conv(state.rho[1].values())?;

    let p0 = objective(&state, params, terminal)?.total;
    let limit = 10.0 * p0.abs().max(f64::MIN_POSITIVE);
    let mut report = RunReport {
        initial_objective: p0,
        tau: opts.tau,
        sigma: opts.sigma,
        ..RunReport::default()
    };
    let mut prev = p0;
    let mut quiet = 0;
    let last = grid.nt - 1;

    for iter in 1..=opts.max_iter {
        let start = Instant::now();
        let rho_k: [&ndarray::Array3<f64>; 3] = std::array::from_fn(|i| state.rho[i].values());
        let bar: [&ndarray::Array3<f64>; 3] = std::array::from_fn(|i| &phi_bar[i]);
        let (k_phi_s, k_phi_i) = convolved_products(kernel, rho_k, bar)?;
        let coupling = DualCouplings {
            k_s: &k_s,
            k_i: &k_i,
            k_phi_s: &k_phi_s,
            k_phi_i: &k_phi_i,
        };

        let mut new_rho = Vec::with_capacity(3);
        for g in Group::ALL {
            let input = RhoInputs {
                rho: rho_k,
                m: state.m(g),
                phi: bar,
                coupling: &coupling,
            };
            match rho_step(g, &grid, params, terminal, opts.tau[g.index()], &input) {
                Ok(r) => new_rho.push(r),
                Err(Error::NonFinite(what)) => {
                    return Ok(Attempt::Diverged {
                        iteration: iter,
                        reason: format!("non-finite {what}"),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        let new_m: Vec<MomentumField> = Group::ALL
            .iter()
            .map(|&g| {
                m_step(
                    &grid,
                    params.alpha(g),
                    opts.tau[g.index()],
                    &new_rho[g.index()],
                    state.m(g),
                    &phi_bar[g.index()],
                )
            })
            .collect();
        for (i, (r, m)) in new_rho.into_iter().zip(new_m).enumerate() {
            state.rho[i] = ScalarField::from_array(grid, r)?;
            state.m[i] = m;
        }

        k_s = conv(state.rho[0].values())?;
        k_i = conv(state.rho[1].values())?;
        let rho_new: [&ndarray::Array3<f64>; 3] = std::array::from_fn(|i| state.rho[i].values());
        let rows = constraint_rows(
            &grid,
            params,
            rho_new,
            [&state.m[0], &state.m[1], &state.m[2]],
            &k_s,
            &k_i,
        );
        let target = terminal_gradient(&grid, state.rho(Group::I).slice(last), terminal)?;
        for g in Group::ALL {
            let gi = g.index();
            let (half, extrap) = phi_step(
                g,
                &grid,
                opts.sigma[gi],
                &preconds[gi],
                &rows[gi],
                state.phi[gi].values(),
                &target,
            )?;
            state.phi[gi] = ScalarField::from_array(grid, half)?;
            phi_bar[gi] = extrap;
        }

        let res: [f64; 3] = std::array::from_fn(|i| spacetime_norm(&grid, &rows[i]));
        let p = objective(&state, params, terminal)?.total;
        let rel = (p - prev).abs() / prev.abs();
        let finite = p.is_finite()
            && res.iter().all(|v| v.is_finite())
            && phi_bar.iter().all(|a| a.iter().all(|v| v.is_finite()));
        if !finite {
            return Ok(Attempt::Diverged {
                iteration: iter,
                reason: "non-finite iterate".into(),
            });
        }
        if p > limit {
            return Ok(Attempt::Diverged {
                iteration: iter,
                reason: format!("objective {p:.6e} exceeds ten times the initial value {p0:.6e}"),
            });
        }
        report.objective.push(p);
        report.rel_error.push(rel);
        report.residuals.push(res);
        report.seconds.push(start.elapsed().as_secs_f64());
        prev = p;

        quiet = if rel < opts.tol { quiet + 1 } else { 0 };
        let done = iter >= opts.min_iter && quiet >= opts.patience.max(1);
        if iter % opts.log_every == 0 || done || iter == opts.max_iter {
            report.kkt.push((iter, kkt_residual(&state, params, kernel, terminal)?));
            observer(&Progress {
                iteration: iter,
                objective: p,
                rel_error: rel,
                residuals: res,
            });
        }
        if done {
            report.converged = true;
            break;
        }
    }
    report.masses = std::array::from_fn(|i| mass_series(&state.rho[i]));
    Ok(Attempt::Done(Box::new((state, report))))
}
