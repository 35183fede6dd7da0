//! Plain mini-batch training of a dense net under a (possibly weighted) loss.
//!
//! This is the workhorse behind every baseline: standard-bootstrap members
//! train on resamples with unit weights, random-weight-bootstrap members on
//! the full data with one fixed Dirichlet weight vector, deep-ensemble
//! members with unit weights and independent initializations.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::loss::LossKind;
use super::net::DenseNet;
use super::sgd::{SgdConfig, SgdOptimizer};
use crate::data::Dataset;
use crate::generator::TrainTrace;
use crate::{Error, Result};

/// Train `net` in place. `fixed_weights`, when given, holds one loss weight
/// per dataset row and stays fixed for the whole run; `None` means unit
/// weights. Returns the per-epoch mean weighted loss.
pub fn train_dense(
    net: &mut DenseNet,
    data: &Dataset,
    fixed_weights: Option<&[f64]>,
    loss: LossKind,
    cfg: &SgdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainTrace> {
    cfg.validate()?;
    let n = data.len();
    if data.input_dim() != net.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "data width {} vs net input {}",
            data.input_dim(),
            net.input_dim()
        )));
    }
    if let Some(w) = fixed_weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} samples",
                w.len(),
                n
            )));
        }
    }

    let batch = cfg.batch_size.min(n);
    let steps_per_epoch = n.div_ceil(batch);
    let mut opt = SgdOptimizer::new(cfg, net.layers().iter(), steps_per_epoch * cfg.epochs)?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for (step, batch_idx) in order.chunks(batch).enumerate() {
            let x_b = data.x().gather_rows(batch_idx);
            let y_b = data.y().gather(batch_idx);
            let w_b: Vec<f64> = match fixed_weights {
                Some(w) => batch_idx.iter().map(|&i| w[i]).collect(),
                None => vec![1.0; batch_idx.len()],
            };
            let step_result = net
                .grad(&x_b, &y_b, &w_b, loss, Some(batch_idx))
                .and_then(|(grads, loss_value)| {
                    let mut layers: Vec<&mut crate::nn::Layer> = net.layers_mut().iter_mut().collect();
                    opt.step(&mut layers, &grads)?;
                    Ok(loss_value)
                });
            match step_result {
                Ok(loss_value) => loss_sum += loss_value * batch_idx.len() as f64,
                Err(e) => {
                    return Err(Error::TrainingDiverged {
                        epoch,
                        step,
                        source: Box::new(e),
                    });
                }
            }
        }
        epoch_losses.push(loss_sum / n as f64);
    }

    Ok(TrainTrace { epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use crate::matrix::Matrix;
    use crate::nn::{Activation, ArchSpec, LrSchedule};
    use crate::rng::seeded_rng;

    #[test]
    fn deterministic_trajectories_for_fixed_seed() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 0.5).collect();
        let data = Dataset::regression(Matrix::column(&xs), Matrix::column(&ys)).unwrap();
        let arch = ArchSpec::new(1, vec![4], Activation::Tanh, Task::Regression { output_dim: 1 });
        let cfg = SgdConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 4,
            epochs: 10,
            lr_schedule: LrSchedule::CosineAnnealing,
            seed: 0,
        };
        let run = |seed| {
            let mut net = arch.build_dense(&mut seeded_rng(seed)).unwrap();
            let trace = train_dense(&mut net, &data, None, LossKind::Mse, &cfg, &mut seeded_rng(99)).unwrap();
            (net, trace)
        };
        let (net_a, trace_a) = run(7);
        let (net_b, trace_b) = run(7);
        assert_eq!(trace_a.epoch_losses, trace_b.epoch_losses);
        for (la, lb) in net_a.layers().iter().zip(net_b.layers()) {
            assert_eq!(la.weights(), lb.weights());
            assert_eq!(la.bias(), lb.bias());
        }
    }
}
