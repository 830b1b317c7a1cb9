//! The three proximal steps of one primal-dual sweep.
//!
//! The public functions recompute every convolution they need; the solver
//! loop calls the `*_with` variants with cached kernel products.

use ndarray::{s, Array3, Axis, Zip};

use super::cubic::{positive_root_near, root_plus};
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MomentumField, ScalarField};
use crate::group::Group;
use crate::kernel::KernelOp;
use crate::model::residual::{constraint_rows, dual_drive, DualCouplings};
use crate::model::{terminal_gradient, ModelParams, PopulationState, TerminalCost, TerminalKind};
use crate::ops::grad_slice;
use crate::spectral::{Preconditioner, PreconditionerCoeffs};

/// Positive root of `x^3 + a x^2 + c` with `c <= 0`; NaN on non-finite input.
#[inline]
fn prox_root(a: f64, c: f64) -> f64 {
    root_plus(a, 0.0, c).unwrap_or(f64::NAN)
}

pub(crate) struct RhoInputs<'a> {
    pub rho: [&'a Array3<f64>; 3],
    pub m: &'a MomentumField,
    pub phi: [&'a Array3<f64>; 3],
    pub coupling: &'a DualCouplings<'a>,
}

/// Proximal density step for rows `1..nt`; row 0 is copied.
///
/// Interior rows minimize, cell by cell,
/// `alpha |m|^2/(2 rho) + (c/2)(rho + q)^2 + g rho + (rho - rho_k)^2/(2 tau)`
/// where `q` is the congestion from the other groups and `g` the dual drive.
/// The terminal row has no kinetic term and carries the terminal cost
/// implicitly (divided by `dt` to match the space-time measure).
pub(crate) fn rho_step(
    g: Group,
    grid: &GridSpec,
    params: &ModelParams,
    terminal: &TerminalCost,
    tau: f64,
    input: &RhoInputs,
) -> Result<Array3<f64>> {
    let gi = g.index();
    let last = grid.nt - 1;
    let dt = grid.dt();
    let c = params.c;
    let alpha = params.alpha(g);
    let own = input.rho[gi];
    let drive = dual_drive(g, grid, params, input.phi, input.coupling);
    let mut others = Array3::zeros(grid.shape());
    for (i, r) in input.rho.iter().enumerate() {
        if i != gi {
            others += *r;
        }
    }
    let msq = input.m.magnitude_sq();

    let mut out = own.clone();
    let interior = s![1..last, .., ..];
    let scale = tau / (1.0 + c * tau);
    let kin = -tau * alpha / (2.0 * (1.0 + c * tau));
    Zip::from(out.slice_mut(interior))
        .and(own.slice(interior))
        .and(drive.slice(interior))
        .and(others.slice(interior))
        .and(msq.slice(interior))
        .par_for_each(|o, &rk, &d, &q, &m2| {
            *o = positive_root_near(scale * (d + c * q - rk / tau), kin * m2, rk);
        });

    // Terminal row: linear stationarity with curvature `w` from E.
    let phi_prev = input.phi[gi].index_axis(Axis(0), last - 1);
    let (w, lin) = match (g, terminal.kind) {
        (Group::I, TerminalKind::Quadratic) => (1.0 / dt, None),
        (Group::I, TerminalKind::QuadraticPlusPotential) => (
            1.0 / dt,
            Some(terminal.potential.as_ref().ok_or(Error::MissingPotential)?),
        ),
        _ => (0.0, None),
    };
    let scale_t = tau / (1.0 + c * tau + w * tau);
    let mut row = out.index_axis_mut(Axis(0), last);
    Zip::indexed(&mut row).for_each(|(k, l), o| {
        let rk = own[[last, k, l]];
        let q = others[[last, k, l]];
        let v = lin.map_or(0.0, |v| v[[k, l]]);
        let d = (v - phi_prev[[k, l]]) / dt;
        *o = prox_root(scale_t * (d + c * q - rk / tau), 0.0);
    });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("density update"));
    }
    Ok(out)
}

/// Closed-form momentum step on rows `0..nt-1`; the last row stays zero.
pub(crate) fn m_step(
    grid: &GridSpec,
    alpha: f64,
    tau: f64,
    rho_new: &Array3<f64>,
    m: &MomentumField,
    phi: &Array3<f64>,
) -> MomentumField {
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut out = MomentumField::zeros(*grid);
    for j in 0..grid.nt - 1 {
        let (gx, gy) = grad_slice(phi.index_axis(Axis(0), j), dx, dy);
        let r = rho_new.index_axis(Axis(0), j);
        for (dst, src, grad) in [(&mut out.mx, &m.mx, &gx), (&mut out.my, &m.my, &gy)] {
            Zip::from(dst.index_axis_mut(Axis(0), j))
                .and(src.index_axis(Axis(0), j))
                .and(&r)
                .and(grad)
                .for_each(|o, &mk, &rv, &gv| {
                    let f = if rv > 0.0 { rv / (tau * alpha + rv) } else { 0.0 };
                    *o = f * (mk - tau * gv);
                });
        }
    }
    out
}

/// Dual ascent along the preconditioned negated residual followed by
/// extrapolation. Returns `(phi_half, phi_extrapolated)`, both with the
/// terminal row pinned.
pub(crate) fn phi_step(
    g: Group,
    grid: &GridSpec,
    sigma: f64,
    precond: &Preconditioner,
    residual_rows: &Array3<f64>,
    phi: &Array3<f64>,
    terminal_row: &ndarray::Array2<f64>,
) -> Result<(Array3<f64>, Array3<f64>)> {
    let last = grid.nt - 1;
    let mut rhs = Array3::zeros(grid.shape());
    rhs.slice_mut(s![..last, .., ..]).assign(&(-residual_rows));
    let inc = precond.solve(&ScalarField::from_array(*grid, rhs)?)?.into_values();
    let mut half = phi.clone();
    half.scaled_add(sigma, &inc);
    let mut bar = &half * 2.0 - phi;
    for f in [&mut half, &mut bar] {
        let mut row = f.index_axis_mut(Axis(0), last);
        match g {
            Group::I => row.assign(terminal_row),
            _ => row.fill(0.0),
        }
    }
    Ok((half, bar))
}

pub(crate) fn convolved_products(
    kernel: &KernelOp,
    rho: [&Array3<f64>; 3],
    phi: [&Array3<f64>; 3],
) -> Result<(Array3<f64>, Array3<f64>)> {
    let grid = kernel.grid();
    let prod = |i: usize| -> Result<Array3<f64>> {
        let f = ScalarField::from_array(grid, phi[i] * rho[i])?;
        Ok(kernel.convolve_field(&f)?.into_values())
    };
    Ok((prod(0)?, prod(1)?))
}

fn convolved_densities(kernel: &KernelOp, rho: [&Array3<f64>; 3]) -> Result<(Array3<f64>, Array3<f64>)> {
    let grid = kernel.grid();
    let conv = |i: usize| -> Result<Array3<f64>> {
        Ok(kernel
            .convolve_field(&ScalarField::from_array(grid, rho[i].clone())?)?
            .into_values())
    };
    Ok((conv(0)?, conv(1)?))
}

fn arrays<const N: usize>(f: &[ScalarField; N]) -> [&Array3<f64>; N] {
    std::array::from_fn(|i| f[i].values())
}

/// Proximal density step for `group` at `state`, with `state.phi` as the
/// multiplier and couplings frozen at `state.rho`.
pub fn update_rho(
    group: Group,
    state: &PopulationState,
    params: &ModelParams,
    kernel: &KernelOp,
    terminal: &TerminalCost,
    opts: &SolverOptions,
) -> Result<ScalarField> {
    state.check_grid()?;
    let grid = state.grid();
    let rho = arrays(&state.rho);
    let phi = arrays(&state.phi);
    let (k_s, k_i) = convolved_densities(kernel, rho)?;
    let (k_phi_s, k_phi_i) = convolved_products(kernel, rho, phi)?;
    let coupling = DualCouplings {
        k_s: &k_s,
        k_i: &k_i,
        k_phi_s: &k_phi_s,
        k_phi_i: &k_phi_i,
    };
    let input = RhoInputs {
        rho,
        m: state.m(group),
        phi,
        coupling: &coupling,
    };
    let out = rho_step(group, &grid, params, terminal, opts.tau[group.index()], &input)?;
    ScalarField::from_array(grid, out)
}

/// Momentum step for `group`; `state.rho` must already hold the new density.
pub fn update_m(group: Group, state: &PopulationState, params: &ModelParams, opts: &SolverOptions) -> MomentumField {
    let grid = state.grid();
    m_step(
        &grid,
        params.alpha(group),
        opts.tau[group.index()],
        state.rho(group).values(),
        state.m(group),
        state.phi(group).values(),
    )
}

/// Result of a dual step: the ascent iterate and its extrapolation.
#[derive(Debug, Clone)]
pub struct PhiUpdate {
    pub half: ScalarField,
    pub extrapolated: ScalarField,
}

/// Dual step for `group` at `state` (new densities and momenta, previous
/// multiplier).
pub fn update_phi(
    group: Group,
    state: &PopulationState,
    params: &ModelParams,
    kernel: &KernelOp,
    terminal: &TerminalCost,
    opts: &SolverOptions,
) -> Result<PhiUpdate> {
    state.check_grid()?;
    let grid = state.grid();
    let rho = arrays(&state.rho);
    let (k_s, k_i) = convolved_densities(kernel, rho)?;
    let rows = constraint_rows(&grid, params, rho, [&state.m[0], &state.m[1], &state.m[2]], &k_s, &k_i);
    let coeffs = PreconditionerCoeffs::new(group, params, opts.preconditioner);
    let precond = Preconditioner::with_closure(grid, coeffs, opts.time_closure);
    let target = terminal_gradient(&grid, state.rho(Group::I).slice(grid.nt - 1), terminal)?;
    let (half, bar) = phi_step(
        group,
        &grid,
        opts.sigma[group.index()],
        &precond,
        &rows[group.index()],
        state.phi(group).values(),
        &target,
    )?;
    Ok(PhiUpdate {
        half: ScalarField::from_array(grid, half)?,
        extrapolated: ScalarField::from_array(grid, bar)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::build_kernel;
    use crate::spectral::{PreconditionerVariant, TimeClosure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fill(rng: &mut ChaCha8Rng, a: &mut Array3<f64>, lo: f64, hi: f64) {
        a.mapv_inplace(|_| rng.random_range(lo..hi));
    }

    /// Golden-section minimizer on `[lo, hi]`.
    fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (hi - r * (hi - lo), lo + r * (hi - lo));
        let (mut fa, mut fb) = (f(a), f(b));
        for _ in 0..200 {
            if fa < fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - r * (hi - lo);
                fa = f(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + r * (hi - lo);
                fb = f(b);
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn density_step_without_forces_shrinks_by_congestion() {
        let grid = GridSpec::new(6, 5, 4).unwrap();
        let params = ModelParams::default();
        let kernel = build_kernel(grid, params.sigma1, params.sigma2).unwrap();
        let opts = SolverOptions::default();
        let mut st = PopulationState::zeros(grid);
        st.rho[0] = ScalarField::from_fn(grid, |t, x, y| 0.5 + t + x * y);
        let out = update_rho(Group::S, &st, &params, &kernel, &TerminalCost::quadratic(), &opts).unwrap();
        let tau = opts.tau[0];
        for ((n, k, l), &v) in out.values().indexed_iter() {
            let rk = st.rho[0].values()[[n, k, l]];
            let expected = if n == 0 { rk } else { rk / (1.0 + params.c * tau) };
            assert!((v - expected).abs() < 1e-14, "{n} {k} {l}");
        }
    }

    #[test]
    fn density_step_matches_scalar_minimizer() {
        let grid = GridSpec::new(5, 6, 5).unwrap();
        let params = ModelParams {
            beta: 0.0,
            gamma: 0.0,
            eta_s: 0.0,
            eta_i: 0.0,
            eta_r: 0.0,
            c: 0.3,
            ..ModelParams::default()
        };
        let kernel = build_kernel(grid, params.sigma1, params.sigma2).unwrap();
        let opts = SolverOptions {
            tau: [0.2; 3],
            ..SolverOptions::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut st = PopulationState::zeros(grid);
        for g in Group::ALL {
            let gi = g.index();
            fill(&mut rng, st.rho[gi].values_mut(), 0.0, 1.0);
            fill(&mut rng, st.phi[gi].values_mut(), -0.2, 0.2);
            fill(&mut rng, &mut st.m[gi].mx, -0.5, 0.5);
            fill(&mut rng, &mut st.m[gi].my, -0.5, 0.5);
        }
        let terminal = TerminalCost::quadratic();
        let (tau, dt, c) = (0.2, grid.dt(), params.c);
        for g in Group::ALL {
            let gi = g.index();
            let out = update_rho(g, &st, &params, &kernel, &terminal, &opts).unwrap();
            let alpha = params.alpha(g);
            let w = if g == Group::I { 1.0 / dt } else { 0.0 };
            for n in 1..grid.nt {
                let last = n == grid.nt - 1;
                for k in 0..grid.nx {
                    for l in 0..grid.ny {
                        let at = |a: &Array3<f64>| a[[n, k, l]];
                        let rk = at(st.rho[gi].values());
                        let q: f64 = (0..3).filter(|&i| i != gi).map(|i| at(st.rho[i].values())).sum();
                        let phi = st.phi[gi].values();
                        let m2 = if last {
                            0.0
                        } else {
                            at(&st.m[gi].mx).powi(2) + at(&st.m[gi].my).powi(2)
                        };
                        let d = if last {
                            -phi[[n - 1, k, l]] / dt
                        } else {
                            (phi[[n, k, l]] - phi[[n - 1, k, l]]) / dt
                        };
                        let ww = if last { w } else { 0.0 };
                        let f = |x: f64| {
                            alpha * m2 / (2.0 * x)
                                + 0.5 * c * (x + q).powi(2)
                                + 0.5 * ww * x * x
                                + d * x
                                + (x - rk).powi(2) / (2.0 * tau)
                        };
                        let best = golden(f, 1e-12, 10.0);
                        let got = out.values()[[n, k, l]];
                        assert!(
                            (got - best).abs() < 1e-6 * best.max(1.0),
                            "{g:?} {n} {k} {l}: {got} vs {best}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn momentum_step_examples() {
        let grid = GridSpec::new(4, 4, 3).unwrap();
        let params = ModelParams {
            alpha_s: 2.0,
            ..ModelParams::default()
        };
        let opts = SolverOptions {
            tau: [0.5; 3],
            ..SolverOptions::default()
        };
        let mut st = PopulationState::zeros(grid);
        st.rho[0] = ScalarField::constant(grid, 2.0);
        st.m[0].mx.fill(1.0);
        st.m[0].my.fill(-3.0);
        let m = update_m(Group::S, &st, &params, &opts);
        // rho / (tau alpha + rho) = 2 / 3
        for n in 0..2 {
            assert!(m
                .mx
                .index_axis(Axis(0), n)
                .iter()
                .all(|v| (v - 2.0 / 3.0).abs() < 1e-15));
            assert!(m.my.index_axis(Axis(0), n).iter().all(|v| (v + 2.0).abs() < 1e-15));
        }
        assert!(m.mx.index_axis(Axis(0), 2).iter().all(|&v| v == 0.0));

        st.rho[0] = ScalarField::zeros(grid);
        assert_eq!(update_m(Group::S, &st, &params, &opts).max_abs(), 0.0);
    }

    #[test]
    fn momentum_step_shrinks_without_multiplier() {
        let grid = GridSpec::new(5, 5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = PopulationState::zeros(grid);
        fill(&mut rng, st.rho[2].values_mut(), 0.0, 2.0);
        fill(&mut rng, &mut st.m[2].mx, -1.0, 1.0);
        fill(&mut rng, &mut st.m[2].my, -1.0, 1.0);
        let m = update_m(Group::R, &st, &ModelParams::default(), &SolverOptions::default());
        let before = st.m[2].magnitude_sq();
        for (a, b) in m.magnitude_sq().iter().zip(before.iter()) {
            assert!(a <= b);
        }
    }

    #[test]
    fn feasible_state_leaves_multiplier_unchanged() {
        let grid = GridSpec::new(6, 6, 5).unwrap();
        let params = ModelParams {
            beta: 0.0,
            gamma: 0.0,
            ..ModelParams::default()
        };
        let kernel = build_kernel(grid, params.sigma1, params.sigma2).unwrap();
        let mut st = PopulationState::zeros(grid);
        st.rho[0] = ScalarField::constant(grid, 0.4);
        st.phi[0] = ScalarField::from_fn(grid, |t, x, _| (t - 1.0) * x);
        let up = update_phi(
            Group::S,
            &st,
            &params,
            &kernel,
            &TerminalCost::quadratic(),
            &SolverOptions::default(),
        )
        .unwrap();
        let last = grid.nt - 1;
        for f in [&up.half, &up.extrapolated] {
            assert!(f.slice(last).iter().all(|&v| v == 0.0));
            let diff = &f.values().slice(s![..last, .., ..]) - &st.phi[0].values().slice(s![..last, .., ..]);
            assert!(diff.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn dual_increment_inverts_preconditioner() {
        let grid = GridSpec::new(8, 6, 5).unwrap();
        let params = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rows = Array3::zeros((grid.nt - 1, grid.nx, grid.ny));
        fill(&mut rng, &mut rows, -1.0, 1.0);
        let coeffs = PreconditionerCoeffs::new(Group::I, &params, PreconditionerVariant::Paper);
        let precond = Preconditioner::with_closure(grid, coeffs, TimeClosure::Terminal);
        let phi = Array3::zeros(grid.shape());
        let target = ndarray::Array2::zeros(grid.slice_shape());
        let (half, _) = phi_step(Group::I, &grid, 1.0, &precond, &rows, &phi, &target).unwrap();
        let back = precond.apply(&ScalarField::from_array(grid, half).unwrap()).unwrap();
        let back = back.values().slice(s![..grid.nt - 1, .., ..]).to_owned();
        let err = (&back + &rows).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(err < 1e-10, "{err}");
    }
}
