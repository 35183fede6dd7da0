//! Bootstrap weight machinery: block weight samplers, stratified block
//! assignment, and block-to-sample weight expansion.
//!
//! All sampling is a pure function of the injected RNG state; callers own the
//! RNG and may run independent streams from multiple threads.

mod alpha;
mod blocks;

pub use alpha::{AlphaKind, BootstrapAlpha, sample_dirichlet_alpha, sample_multinomial_alpha};
pub use blocks::{BlockAssignment, assign_blocks, expand_weights};
