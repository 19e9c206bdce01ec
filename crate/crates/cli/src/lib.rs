//! Desk-scale experiment harness: declarative configs in, samples and
//! diagnostics out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod build;
pub mod compare;
pub mod config;
pub mod error;
pub mod pgm;
pub mod plotdata;
pub mod run;

pub use config::{output_root, ExperimentConfig, OUTPUT_ROOT_VAR};
pub use error::{CliError, CliResult};
