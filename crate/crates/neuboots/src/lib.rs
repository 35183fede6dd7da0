//! Single-training-run bootstrapped neural networks.
//!
//! A generator network `g(x, alpha) = M(F(x) ⊙ alpha)` is trained once under
//! random block bootstrap weights; afterwards, bootstrapped predictions come
//! from fresh weight draws against a cached feature tensor instead of
//! retraining. The crate also ships the reference baselines (standard
//! bootstrap, random-weight bootstrap, final-layer MC dropout, plain deep
//! ensembles), a full set of uncertainty-quantification metrics, and
//! reproducible experiment drivers behind the `neuboots` CLI.

pub mod baselines;
pub mod bootstrap;
pub mod data;
mod error;
pub mod experiments;
pub mod generator;
pub mod matrix;
pub mod metrics;
pub mod model_io;
pub mod nn;
pub mod rng;

pub use data::{Dataset, Targets, Task};
pub use error::{Error, Result};
pub use matrix::Matrix;
