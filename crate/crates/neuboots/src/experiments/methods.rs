//! Uniform train/predict interface over the methods an experiment compares.

use crate::baselines::{
    DropoutPredictor, EnsembleOfNets, deep_ensemble_train, ensemble_predict_full,
    mc_dropout_train, rwb_train, standard_bootstrap_train,
};
use crate::bootstrap::assign_blocks;
use crate::data::{Dataset, Task};
use crate::experiments::config::{ExperimentConfig, MethodKind};
use crate::generator::{AlphaSampling, GeneratorNet, PredictionEnsemble, TrainConfig};
use crate::matrix::Matrix;
use crate::nn::{ArchSpec, DenseNet, LossKind, train_dense};
use crate::rng::stream_rng;
use crate::{Error, Result};

/// A method trained on one dataset.
pub(crate) enum TrainedMethod {
    Generator(GeneratorNet),
    Plain(DenseNet),
    Ensemble(EnsembleOfNets),
    Dropout(DropoutPredictor),
}

/// Loss used for training under each task.
pub(crate) fn loss_for(task: Task) -> LossKind {
    match task {
        Task::Regression { .. } => LossKind::Mse,
        Task::Classification { .. } => LossKind::CrossEntropy,
    }
}

pub(crate) fn arch_for(cfg: &ExperimentConfig, data: &Dataset) -> ArchSpec {
    ArchSpec::new(
        data.input_dim(),
        cfg.model.hidden.clone(),
        cfg.model.activation,
        data.task(),
    )
}

/// Train `method` on `data`. Randomness is a pure function of
/// `(seed, method, stream offset)`, so methods and seeds can fan out across
/// threads.
pub(crate) fn train_method(
    method: MethodKind,
    data: &Dataset,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<TrainedMethod> {
    let arch = arch_for(cfg, data);
    let loss = loss_for(data.task());
    let stream_base = (method as u64 + 1) << 32;
    let mut rng = stream_rng(seed, stream_base);
    match method {
        MethodKind::Neuboots => {
            let mut net = GeneratorNet::from_spec(&arch, &mut rng)?;
            let mut assign_rng = stream_rng(seed, stream_base | 1);
            let assignment = assign_blocks(
                data.class_labels(),
                data.len(),
                net.num_blocks(),
                &mut assign_rng,
            )?;
            let train_cfg = TrainConfig {
                sgd: cfg.sgd,
                loss,
                alpha: AlphaSampling::Dirichlet,
            };
            let mut train_rng = stream_rng(seed, stream_base | 2);
            crate::generator::train(&mut net, data, &assignment, &train_cfg, &mut train_rng)?;
            Ok(TrainedMethod::Generator(net))
        }
        MethodKind::Baseline => {
            let mut net = arch.build_dense(&mut rng)?;
            let mut train_rng = stream_rng(seed, stream_base | 2);
            train_dense(&mut net, data, None, loss, &cfg.sgd, &mut train_rng)?;
            Ok(TrainedMethod::Plain(net))
        }
        MethodKind::StandardBootstrap => Ok(TrainedMethod::Ensemble(standard_bootstrap_train(
            &arch, data, cfg.b, &cfg.sgd, loss, &mut rng,
        )?)),
        MethodKind::Rwb => Ok(TrainedMethod::Ensemble(rwb_train(
            &arch, data, cfg.b, &cfg.sgd, loss, &mut rng,
        )?)),
        MethodKind::DeepEnsemble => Ok(TrainedMethod::Ensemble(deep_ensemble_train(
            &arch, data, cfg.b, &cfg.sgd, loss, &mut rng,
        )?)),
        MethodKind::McDropout => Ok(TrainedMethod::Dropout(mc_dropout_train(
            &arch,
            data,
            cfg.dropout_p,
            &cfg.sgd,
            loss,
            &mut rng,
        )?)),
        MethodKind::Random => Err(Error::InvalidConfig(
            "'random' is an acquisition control, not a trainable method".into(),
        )),
    }
}

/// Draw a `b`-sample prediction ensemble (plus pre-softmax logits) for every
/// row of `x`. The baseline keeps its single deterministic prediction.
pub(crate) fn predict_method(
    method: &TrainedMethod,
    x: &Matrix,
    b: usize,
    seed: u64,
) -> Result<(Vec<PredictionEnsemble>, Vec<Matrix>)> {
    let mut rng = stream_rng(seed, 0x7072_6564); // prediction stream
    match method {
        TrainedMethod::Generator(net) => {
            let alphas = net.draw_alphas(b, &mut rng);
            net.predict_bootstrap_full(x, &alphas)
        }
        TrainedMethod::Plain(net) => {
            let (out, logits) = net.forward_with_logits(x)?;
            let ensembles = out
                .iter_rows()
                .map(|row| PredictionEnsemble::new(Matrix::from_row(row)).expect("one sample"))
                .collect();
            let logit_rows = logits.iter_rows().map(Matrix::from_row).collect();
            Ok((ensembles, logit_rows))
        }
        TrainedMethod::Ensemble(ens) => ensemble_predict_full(ens, x),
        TrainedMethod::Dropout(pred) => pred.predict_stochastic_full(x, b, &mut rng),
    }
}

/// Mean-probability matrix (rows = inputs) from per-input ensembles.
pub(crate) fn mean_prediction_matrix(ensembles: &[PredictionEnsemble]) -> Matrix {
    let d = ensembles.first().map_or(0, PredictionEnsemble::output_dim);
    let mut out = Matrix::zeros(ensembles.len(), d);
    for (i, e) in ensembles.iter().enumerate() {
        out.row_mut(i).copy_from_slice(&e.mean());
    }
    out
}

/// Hard labels per member: element `[b][i]` is member `b`'s argmax on input
/// `i`. Requires every ensemble to share the member count.
pub(crate) fn member_hard_labels(ensembles: &[PredictionEnsemble]) -> Vec<Vec<usize>> {
    let b = ensembles.first().map_or(0, PredictionEnsemble::size);
    (0..b)
        .map(|bi| {
            ensembles
                .iter()
                .map(|e| crate::generator::argmax(e.samples().row(bi)))
                .collect()
        })
        .collect()
}
