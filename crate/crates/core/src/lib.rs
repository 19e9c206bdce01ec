//! Samplers for posteriors whose potentials are only almost-everywhere
//! differentiable.
//!
//! Two families are provided. Langevin samplers ([`langevin`]) run on the
//! Moreau-Yosida smoothing of the non-smooth part and are approximate.
//! Piecewise-deterministic samplers ([`pdmp`]) only need gradients almost
//! everywhere and are exact up to Monte Carlo error.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod diagnostics;
pub mod error;
pub mod langevin;
pub mod models;
pub mod mye;
pub mod pdmp;
pub mod prox;
pub mod quadrature;
pub mod target;

pub use chain::SampleChain;
pub use error::{Error, Result};
pub use target::{grad_with_convention, smoothed_grad, TargetModel};
