//! Langevin samplers driven by the Moreau-Yosida smoothed gradient:
//! overdamped (MY-ULA), underdamped (MY-UULA) and Metropolis-adjusted
//! (pMALA).
//!
//! Models without a smooth/non-smooth split are driven by their exact
//! gradient instead, which makes the same code usable on smooth targets.

mod chain;
mod steps;

pub use chain::{run_chain, tune_pmala, ChainAbort, ChainOptions, Sampler, TunedPmala};
pub use steps::{drift_gradient, my_ula_step, my_uula_step, pmala_step, UlaConfig, UulaConfig};

/// Any coordinate beyond this magnitude aborts a chain.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
