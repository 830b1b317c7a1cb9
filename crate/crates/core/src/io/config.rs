use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{ModelParams, PresetName};
use crate::solver::SolverOptions;
use crate::spectral::{PreconditionerVariant, TimeClosure};

pub const MANIFEST_FILE: &str = "run_manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Control,
    NoControl,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "control" => Ok(Self::Control),
            "no_control" => Ok(Self::NoControl),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected control or no_control)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Control => "control",
            Self::NoControl => "no_control",
        })
    }
}

/// Initial densities (and optionally a terminal potential) read from
/// single-slice snapshot files, given by their base path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFiles {
    pub s: PathBuf,
    pub i: PathBuf,
    pub r: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PathBuf>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<PresetName>,
    pub mode: Mode,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Not stored in the manifest; a manifest's directory is its output
    /// directory.
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub snapshots: Vec<usize>,
    pub write_phi: bool,
    pub model: ModelParams,
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialFiles>,
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.nx, self.ny, self.nt)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.model.validate()?;
        self.solver.validate()?;
        for &n in &self.snapshots {
            grid.check_time(n)?;
        }
        if self.experiment.is_some() == self.initial.is_some() {
            return Err(Error::Config(
                "exactly one of `experiment` and `[initial]` must be given".into(),
            ));
        }
        Ok(())
    }

    pub fn to_manifest(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))
    }
}

/// Snapshot indices `{0, ceil(0.21/dt), ceil(0.47/dt), ceil(0.74/dt), nt-1}`.
pub fn default_snapshots(nt: usize) -> Vec<usize> {
    let steps = (nt - 1) as f64;
    let mut v: Vec<usize> = [0.0, 0.21, 0.47, 0.74]
        .iter()
        .map(|t| ((t * steps - 1e-9).ceil().max(0.0) as usize).min(nt - 1))
        .collect();
    v.push(nt - 1);
    v.dedup();
    v
}

/// Command-line flags of `mfcepi run`. Every flag overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Preset name: exp1, exp2a, exp2b, exp3a or exp3b.
    #[arg(long)]
    pub experiment: Option<String>,
    /// TOML configuration file (a run manifest is also accepted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Kernel width, both axes.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Congestion weight.
    #[arg(long)]
    pub c: Option<f64>,
    /// Viscosity of all three groups.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub alpha_s: Option<f64>,
    #[arg(long)]
    pub alpha_i: Option<f64>,
    #[arg(long)]
    pub alpha_r: Option<f64>,
    /// Primal step of all groups.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Dual step of all groups.
    #[arg(long)]
    pub sigma_dual: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// control or no_control.
    #[arg(long)]
    pub mode: Option<String>,
    /// paper or corrected.
    #[arg(long)]
    pub preconditioner: Option<String>,
    /// terminal or neumann.
    #[arg(long)]
    pub time_closure: Option<String>,
    #[arg(long)]
    pub log_every: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated time indices.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<usize>>,
    /// Also write multiplier snapshots.
    #[arg(long)]
    pub write_phi: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    beta: Option<f64>,
    gamma: Option<f64>,
    alpha_s: Option<f64>,
    alpha_i: Option<f64>,
    alpha_r: Option<f64>,
    eta_s: Option<f64>,
    eta_i: Option<f64>,
    eta_r: Option<f64>,
    c: Option<f64>,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    tau: Option<[f64; 3]>,
    sigma: Option<[f64; 3]>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    min_iter: Option<usize>,
    patience: Option<usize>,
    preconditioner: Option<PreconditionerVariant>,
    time_closure: Option<TimeClosure>,
    log_every: Option<usize>,
    max_backoffs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<PresetName>,
    mode: Option<Mode>,
    nx: Option<usize>,
    ny: Option<usize>,
    nt: Option<usize>,
    out_dir: Option<PathBuf>,
    snapshots: Option<Vec<usize>>,
    write_phi: Option<bool>,
    model: Option<ModelFile>,
    solver: Option<SolverFile>,
    initial: Option<InitialFiles>,
}

fn read_config_file(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

macro_rules! apply {
    ($dst:expr, $($field:ident),+ from $src:expr) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}

/// Resolves defaults, preset rates, the optional config file and the flags,
/// in that order of increasing precedence.
pub fn parse_config(args: &RunArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => ConfigFile::default(),
    };
    let experiment = match &args.experiment {
        Some(s) => Some(s.parse::<PresetName>()?),
        None => file.experiment,
    };
    if experiment.is_some() && file.initial.is_some() {
        return Err(Error::Config(
            "a preset and explicit initial densities were both given".into(),
        ));
    }

    let mut model = ModelParams::default();
    if let Some(name) = experiment {
        (model.beta, model.gamma) = name.rates();
    }
    if let Some(m) = file.model {
        apply!(model, beta, gamma, alpha_s, alpha_i, alpha_r, eta_s, eta_i, eta_r, c, sigma1, sigma2 from m);
    }
    apply!(model, beta, gamma, alpha_s, alpha_i, alpha_r, c from args);
    if let Some(s) = args.sigma {
        model.sigma1 = s;
        model.sigma2 = s;
    }
    if let Some(e) = args.eta {
        model.eta_s = e;
        model.eta_i = e;
        model.eta_r = e;
    }

    let mut solver = SolverOptions::default();
    if let Some(s) = file.solver {
        apply!(solver, tau, sigma, tol, max_iter, min_iter, patience, preconditioner, time_closure, log_every, max_backoffs from s);
    }
    apply!(solver, tol, max_iter, log_every from args);
    if let Some(t) = args.tau {
        solver.tau = [t; 3];
    }
    if let Some(s) = args.sigma_dual {
        solver.sigma = [s; 3];
    }
    if let Some(p) = &args.preconditioner {
        solver.preconditioner = p.parse()?;
    }
    if let Some(c) = &args.time_closure {
        solver.time_closure = c.parse()?;
    }

    let nx = args.nx.or(file.nx).unwrap_or(128);
    let ny = args.ny.or(file.ny).unwrap_or(128);
    let nt = args.nt.or(file.nt).unwrap_or(32);
    let mode = match &args.mode {
        Some(m) => m.parse()?,
        None => file.mode.unwrap_or_default(),
    };
    let grid = GridSpec::new(nx, ny, nt)?;
    let snapshots = args
        .snapshots
        .clone()
        .or(file.snapshots)
        .unwrap_or_else(|| default_snapshots(grid.nt));
    let config = RunConfig {
        experiment,
        mode,
        nx,
        ny,
        nt,
        out_dir: args
            .out_dir
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        snapshots,
        write_phi: args.write_phi || file.write_phi.unwrap_or(false),
        model,
        solver,
        initial: file.initial,
    };
    config.validate()?;
    Ok(config)
}

/// Reads a manifest written by a previous run; its directory becomes the
/// output directory.
pub fn parse_manifest(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.out_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(config)
}
