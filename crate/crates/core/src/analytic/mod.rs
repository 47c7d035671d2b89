//! Closed-form stationary laws of the Markovian queues with resetting.

mod closed_form;
mod params;
mod pmf;
mod registry;

pub use closed_form::{
    classical_ref, mm1_ratio, mm1_reset, mm1m_reset, mminf_reset, mmr_reset, KEY_IDENTITY_TOL,
};
pub use params::{ModelKind, ModelParams};
pub use pmf::{geometric_tail, poisson_tail_bound, Pmf, Tail, Truncation, MAX_AUTO_N};
pub use registry::{model_for, ModelFactory, ModelRegistry, QueueModel};
