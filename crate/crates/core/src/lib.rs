//! Classical solutions of the one-dimensional compressible Euler equations in
//! Lagrangian coordinates, with executable monitors for the invariant-domain
//! bounds on the gradient variables, time-dependent density floors, uniform
//! upper bounds and gradient blowup.
//!
//! The pipeline is `scenario -> solver -> characteristics / monitors`:
//!
//! * [`thermo`] holds the gamma-law closure in the `(eta, m)` variables.
//! * [`fields`] samples states on a grid and derives `s, r, alpha, beta`.
//! * [`solver`] integrates the p-system or the full system with RK4.
//! * [`characteristics`] traces characteristics through a stored history and
//!   integrates the Riccati equations along them.
//! * [`monitors`] computes the bound constants from the initial data and
//!   checks every stored time against them.

// `!(a > b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod characteristics;
pub mod error;
pub mod fields;
pub mod io;
pub mod monitors;
pub mod scenario;
pub mod solver;
pub mod thermo;

pub use error::{Error, Result};
pub use fields::{EdgeState, FieldSnapshot, Frame, Grid1D, System};
pub use scenario::{init_scenario, ScenarioKind, ScenarioSpec, BUILTIN_NAMES};
pub use solver::{run, run_from, SolutionHistory, SolverConfig, StopReason, Storage};
pub use thermo::{derive_constants, GasModel};
