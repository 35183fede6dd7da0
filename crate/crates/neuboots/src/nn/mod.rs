//! Dense feed-forward networks with reverse-mode gradients and SGD.
//!
//! Scope is deliberately narrow: affine layers, relu/tanh/identity
//! activations, an identity or softmax output head, weighted losses, and
//! momentum SGD with optional cosine annealing. Everything is `f64` and
//! single-threaded per model instance; a trained net is immutable and safe to
//! share across threads.

mod activation;
mod layer;
mod loss;
mod net;
pub(crate) mod scaled;
mod sgd;
mod spec;
mod train;

pub use activation::Activation;
pub use layer::Layer;
pub use loss::{LOG_PROB_EPSILON, LossKind, per_sample_losses, weighted_loss};
pub use net::{DenseNet, Gradients, LayerGrad, OutputHead};
pub use sgd::{LrSchedule, SgdConfig, SgdOptimizer};
pub use spec::ArchSpec;
pub use train::train_dense;

pub(crate) use loss::loss_output_grad;
