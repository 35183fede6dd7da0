//! Generator training.
//!
//! Each epoch draws one block weight vector `alpha`. The same draw is used in
//! both places it must appear: multiplied into the feature vector inside the
//! forward pass, and (expanded through the block assignment) as the
//! per-sample loss weights. `alpha` is never resampled within an epoch.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GeneratorNet;
use crate::bootstrap::{BlockAssignment, BootstrapAlpha, assign_blocks, expand_weights, sample_dirichlet_alpha};
use crate::data::Dataset;
use crate::nn::loss_output_grad;
use crate::nn::scaled::{backward_scaled, forward_scaled_trace};
use crate::nn::{ArchSpec, Gradients, LossKind, SgdConfig, SgdOptimizer, per_sample_losses};
use crate::rng::seeded_rng;
use crate::{Error, Result};

/// How block weights are drawn during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSampling {
    /// One `S x Dirichlet(1, ..., 1)` draw per epoch.
    #[default]
    Dirichlet,
    /// Freeze the weights at the unit vector. This degenerates to plain
    /// training of the composed network and is the deterministic baseline.
    FrozenOnes,
}

/// Generator training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub sgd: SgdConfig,
    pub loss: LossKind,
    #[serde(default)]
    pub alpha: AlphaSampling,
}

/// Per-epoch mean weighted loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epoch_losses: Vec<f64>,
}

/// Train a generator in place following the one-draw-per-epoch protocol.
pub fn train(
    net: &mut GeneratorNet,
    data: &Dataset,
    assignment: &BlockAssignment,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainTrace> {
    cfg.sgd.validate()?;
    let n = data.len();
    if assignment.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "assignment over {} samples for a dataset of {}",
            assignment.len(),
            n
        )));
    }
    if assignment.num_blocks() != net.num_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "assignment has {} blocks but the generator has S = {}",
            assignment.num_blocks(),
            net.num_blocks()
        )));
    }
    if data.input_dim() != net.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "data width {} vs generator input {}",
            data.input_dim(),
            net.input_dim()
        )));
    }

    let batch = cfg.sgd.batch_size.min(n);
    let steps_per_epoch = n.div_ceil(batch);
    let total_steps = steps_per_epoch * cfg.sgd.epochs;
    let mut opt = SgdOptimizer::new(
        &cfg.sgd,
        net.feature_layers().iter().chain(std::iter::once(net.head())),
        total_steps,
    )?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.sgd.epochs);

    for epoch in 0..cfg.sgd.epochs {
        let alpha = match cfg.alpha {
            AlphaSampling::Dirichlet => sample_dirichlet_alpha(net.num_blocks(), rng),
            AlphaSampling::FrozenOnes => BootstrapAlpha::ones(net.num_blocks()),
        };
        let weights = expand_weights(&alpha, assignment)?;
        order.shuffle(rng);

        let mut loss_sum = 0.0;
        for (step, batch_idx) in order.chunks(batch).enumerate() {
            let loss = train_step(net, data, &alpha, &weights, batch_idx, cfg.loss, &mut opt)
                .map_err(|e| Error::TrainingDiverged {
                    epoch,
                    step,
                    source: Box::new(e),
                })?;
            loss_sum += loss * batch_idx.len() as f64;
        }
        epoch_losses.push(loss_sum / n as f64);
    }

    Ok(TrainTrace { epoch_losses })
}

fn train_step(
    net: &mut GeneratorNet,
    data: &Dataset,
    alpha: &BootstrapAlpha,
    weights: &[f64],
    batch_idx: &[usize],
    loss: LossKind,
    opt: &mut SgdOptimizer,
) -> Result<f64> {
    let x_b = data.x().gather_rows(batch_idx);
    let y_b = data.y().gather(batch_idx);
    let w_b: Vec<f64> = batch_idx.iter().map(|&i| weights[i]).collect();

    let trace = forward_scaled_trace(
        net.feature_layers(),
        net.head(),
        net.output_head(),
        &x_b,
        alpha.values(),
    )?;

    let losses = per_sample_losses(&trace.output, &y_b, loss)?;
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFiniteLoss {
            indices: batch_idx.to_vec(),
        });
    }
    let m = batch_idx.len() as f64;
    let loss_value = losses.iter().zip(&w_b).map(|(l, w)| l * w).sum::<f64>() / m;

    let d_head_out = loss_output_grad(&trace.output, net.output_head(), &y_b, &w_b, loss)?;
    let mut grads = Gradients::zeros_like(
        net.feature_layers()
            .iter()
            .chain(std::iter::once(net.head())),
    );
    backward_scaled(
        net.feature_layers(),
        net.head(),
        &x_b,
        &trace,
        &d_head_out,
        alpha.values(),
        &mut grads,
    );

    let mut layers = net.layers_mut();
    opt.step(&mut layers, &grads)?;
    Ok(loss_value)
}

/// Convenience wrapper: build the net and a stratified block assignment from
/// the config seed, then train. Returns the trained generator, its loss trace,
/// and the assignment used.
pub fn fit_generator(
    data: &Dataset,
    arch: &ArchSpec,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(GeneratorNet, TrainTrace, BlockAssignment)> {
    let mut init_rng = seeded_rng(seed ^ 0x5eed_1111);
    let mut assign_rng = seeded_rng(seed ^ 0x5eed_2222);
    let mut train_rng = seeded_rng(seed ^ 0x5eed_3333);

    let mut net = GeneratorNet::from_spec(arch, &mut init_rng)?;
    let assignment = assign_blocks(
        data.class_labels(),
        data.len(),
        net.num_blocks(),
        &mut assign_rng,
    )?;
    net.set_assignment_seed(Some(seed ^ 0x5eed_2222));
    let trace = train(&mut net, data, &assignment, cfg, &mut train_rng)?;
    Ok((net, trace, assignment))
}
