pub mod analytic;
pub mod ctmc_sim;
pub mod error;
pub mod numerics;
pub mod oracle;
pub mod stats;
pub mod suite;
pub mod waiting_time;

pub use error::{Error, Result};
