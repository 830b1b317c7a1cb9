//! Mean-field control of a spatially distributed SIR epidemic.
//!
//! Three populations (susceptible, infected, recovered) move on the unit
//! square under a planner that trades kinetic cost and congestion against
//! the number of infected at the final time. The optimality system is solved
//! with a primal-dual hybrid gradient method whose dual step is
//! preconditioned by a spectral solve.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod dct;
pub mod grid;
pub mod group;
pub mod io;
pub mod kernel;
pub mod model;
pub mod ops;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{GridSpec, MomentumField, ScalarField};
pub use group::Group;
pub use kernel::{build_kernel, KernelOp};
pub use model::{ModelParams, PopulationState, PresetName, TerminalCost};
pub use solver::{solve, RunReport, SolverOptions};
pub use spectral::{Preconditioner, PreconditionerCoeffs, PreconditionerVariant, TimeClosure};
