//! Run configuration, orchestration and on-disk outputs.
//!
//! An output directory contains
//! - `masses.csv`: `t,S,I,R`, one row per time node;
//! - `iterations.csv`: `iter,objective,rel_error,res_S,res_I,res_R` (control mode only);
//! - `rho_{S,I,R}_nXXXX.{hdr,bin}`: density slices at the snapshot indices, and
//!   `phi_*` likewise when requested;
//! - `summary.toml`: headline numbers of the run;
//! - `run_manifest.toml`: the resolved configuration.

mod config;
mod snapshot;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{s, Array2, Axis};

pub use config::{
    default_snapshots, parse_config, parse_manifest, InitialFiles, Mode, RunArgs, RunConfig, MANIFEST_FILE,
};
pub use snapshot::{data_path, header_path, read_snapshot, write_snapshot, Snapshot};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::group::Group;
use crate::model::{euler_uncontrolled, make_preset, mass_series, ExperimentPreset, TerminalCost};
use crate::solver::{solve_observed, Progress, RunReport};

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// `false` only when the solver hit its iteration cap.
    pub converged: bool,
    pub masses: [Vec<f64>; 3],
    pub report: Option<RunReport>,
}

impl RunOutcome {
    pub fn terminal_mass(&self, g: Group) -> f64 {
        *self.masses[g.index()].last().expect("at least two time nodes")
    }
}

/// Fixed 12-significant-digit formatting used by every CSV column.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

fn load_slice(path: &Path, grid: &GridSpec) -> Result<Array2<f64>> {
    let snap = read_snapshot(path)?;
    if snap.nt != 1 || snap.nx != grid.nx || snap.ny != grid.ny {
        return Err(Error::Snapshot {
            path: header_path(path),
            reason: format!(
                "expected a single {}x{} slice, found {}x{}x{}",
                grid.nx, grid.ny, snap.nt, snap.nx, snap.ny
            ),
        });
    }
    Ok(snap.data.index_axis_move(Axis(0), 0).into_owned())
}

/// Initial data and terminal cost for a resolved configuration.
pub fn resolve_preset(config: &RunConfig, grid: &GridSpec) -> Result<ExperimentPreset> {
    match (&config.experiment, &config.initial) {
        (Some(name), None) => Ok(make_preset(*name, grid)),
        (None, Some(files)) => {
            let rho0 = [
                load_slice(&files.s, grid)?,
                load_slice(&files.i, grid)?,
                load_slice(&files.r, grid)?,
            ];
            let terminal = match &files.potential {
                Some(p) => TerminalCost::with_potential(load_slice(p, grid)?)?,
                None => TerminalCost::quadratic(),
            };
            Ok(ExperimentPreset {
                name: crate::model::PresetName::Exp1,
                rho0,
                beta: config.model.beta,
                gamma: config.model.gamma,
                terminal,
            })
        }
        _ => Err(Error::Config(
            "exactly one of `experiment` and `[initial]` must be given".into(),
        )),
    }
}

/// Executes the configured run and writes every output file.
pub fn run(config: &RunConfig, progress: &mut dyn FnMut(&Progress)) -> Result<RunOutcome> {
    config.validate()?;
    let grid = config.grid()?;
    let preset = resolve_preset(config, &grid)?;
    let (fields, phi, report) = match config.mode {
        Mode::NoControl => {
            let rho = euler_uncontrolled(grid, &preset.rho0, config.model.beta, config.model.gamma)?;
            (rho, None, None)
        }
        Mode::Control => {
            let (state, report) = solve_observed(&preset, grid, &config.model, &config.solver, progress)?;
            (state.rho, Some(state.phi), Some(report))
        }
    };
    let masses: [Vec<f64>; 3] = std::array::from_fn(|i| mass_series(&fields[i]));
    write_outputs(config, &grid, &fields, phi.as_ref(), &masses, report.as_ref())?;
    Ok(RunOutcome {
        converged: report.as_ref().is_none_or(|r| r.converged),
        masses,
        report,
    })
}

pub fn write_outputs(
    config: &RunConfig,
    grid: &GridSpec,
    rho: &[ScalarField; 3],
    phi: Option<&[ScalarField; 3]>,
    masses: &[Vec<f64>; 3],
    report: Option<&RunReport>,
) -> Result<()> {
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };

    write("masses.csv", masses_csv(grid, masses))?;
    if let Some(r) = report {
        write("iterations.csv", iterations_csv(r))?;
    }
    for &n in &config.snapshots {
        grid.check_time(n)?;
        for g in Group::ALL {
            let slab = rho[g.index()].values().slice(s![n..n + 1, .., ..]);
            write_snapshot(&dir.join(format!("rho_{}_n{n:04}", g.label())), slab)?;
            if let (true, Some(phi)) = (config.write_phi, phi) {
                let slab = phi[g.index()].values().slice(s![n..n + 1, .., ..]);
                write_snapshot(&dir.join(format!("phi_{}_n{n:04}", g.label())), slab)?;
            }
        }
    }
    write("summary.toml", summary(grid, masses, report))?;
    write(MANIFEST_FILE, config.to_manifest()?)
}

pub fn masses_csv(grid: &GridSpec, masses: &[Vec<f64>; 3]) -> String {
    let mut out = String::from("t,S,I,R\n");
    let [s, i, r] = masses;
    for (n, ((s, i), r)) in s.iter().zip(i).zip(r).enumerate().take(grid.nt) {
        let _ = writeln!(out, "{},{},{},{}", fmt12(grid.t(n)), fmt12(*s), fmt12(*i), fmt12(*r));
    }
    out
}

pub fn iterations_csv(report: &RunReport) -> String {
    let mut out = String::from("iter,objective,rel_error,res_S,res_I,res_R\n");
    for k in 0..report.iterations() {
        let r = report.residuals[k];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            k + 1,
            fmt12(report.objective[k]),
            fmt12(report.rel_error[k]),
            fmt12(r[0]),
            fmt12(r[1]),
            fmt12(r[2])
        );
    }
    out
}

/// Largest deviation of the total population from its initial value.
pub fn max_mass_drift(masses: &[Vec<f64>; 3]) -> f64 {
    let total = |n: usize| masses.iter().map(|m| m[n]).sum::<f64>();
    let start = total(0);
    (0..masses[0].len())
        .map(|n| (total(n) - start).abs())
        .fold(0.0, f64::max)
}

fn summary(grid: &GridSpec, masses: &[Vec<f64>; 3], report: Option<&RunReport>) -> String {
    let last = grid.nt - 1;
    let mut out = String::new();
    let _ = writeln!(out, "terminal_S = {}", fmt12(masses[0][last]));
    let _ = writeln!(out, "terminal_I = {}", fmt12(masses[1][last]));
    let _ = writeln!(out, "terminal_R = {}", fmt12(masses[2][last]));
    let _ = writeln!(out, "max_mass_drift = {}", fmt12(max_mass_drift(masses)));
    if let Some(r) = report {
        let _ = writeln!(out, "converged = {}", r.converged);
        let _ = writeln!(out, "iterations = {}", r.iterations());
        let _ = writeln!(out, "backoffs = {}", r.backoffs);
        if let Some(&p) = r.objective.last() {
            let _ = writeln!(out, "objective = {}", fmt12(p));
        }
    }
    out
}
