//! Waiting times with resetting at arrival epochs: exact recursion steps,
//! Monte Carlo estimation, the grid Wiener–Hopf series and lattice /
//! characteristic-function special cases.

mod dist;
mod lattice;
mod recursion;
mod step;
mod wh;

pub use dist::{DifferenceLaw, DistributionSpec};
pub use lattice::{cf_reset, lattice_wh, LATTICE_SERIES_TOL};
pub use recursion::{
    simulate_gginf_events, simulate_recursion, RecursionConfig, RecursionEstimate,
    RecursionFactory, RecursionKind, RecursionRegistry, RegenerationStats, WorkloadRecursion,
};
pub use step::{step_gginf, step_kw, step_lindley, ResetDraw, ResetSpec, WorkloadState};
pub use wh::{
    solve_wh, wh_apply_k, wh_residual, wh_series, GridCdf, KOperator, WhConfig, WhSolution,
    WindowCdf,
};
