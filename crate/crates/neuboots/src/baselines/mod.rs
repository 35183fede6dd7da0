//! Reference uncertainty methods: standard nonparametric bootstrap ensembles,
//! random-weight bootstrap (RWB) ensembles, plain independent-initialization
//! ensembles, and final-layer Monte-Carlo dropout.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::sample_dirichlet_alpha;
use crate::data::Dataset;
use crate::generator::PredictionEnsemble;
use crate::matrix::Matrix;
use crate::nn::scaled::{backward_scaled, forward_scaled_trace};
use crate::nn::{
    ArchSpec, DenseNet, Gradients, Layer, LossKind, SgdConfig, SgdOptimizer, per_sample_losses,
    train_dense,
};
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Which ensembling scheme produced a set of networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMethod {
    StandardBootstrap,
    Rwb,
    DeepEnsemble,
}

/// A trained ensemble of architecturally identical networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOfNets {
    members: Vec<DenseNet>,
    method: EnsembleMethod,
}

impl EnsembleOfNets {
    pub fn new(members: Vec<DenseNet>, method: EnsembleMethod) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidConfig("ensemble needs at least one member".into()))?;
        let shape: Vec<(usize, usize)> = first
            .layers()
            .iter()
            .map(|l| (l.in_dim(), l.out_dim()))
            .collect();
        for (i, m) in members.iter().enumerate().skip(1) {
            let s: Vec<(usize, usize)> =
                m.layers().iter().map(|l| (l.in_dim(), l.out_dim())).collect();
            if s != shape {
                return Err(Error::InvalidConfig(format!(
                    "ensemble member {i} has a different architecture"
                )));
            }
        }
        Ok(Self { members, method })
    }

    pub fn members(&self) -> &[DenseNet] {
        &self.members
    }

    pub fn method(&self) -> EnsembleMethod {
        self.method
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// How standard-bootstrap training indexes the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleMode {
    /// With-replacement resample of size `n` per member.
    #[default]
    WithReplacement,
    /// Use the original data unchanged (degenerates to plain training).
    Identity,
}

/// How RWB draws its per-sample weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RwbWeights {
    /// One fixed `n x Dirichlet(1, ..., 1)` vector per member.
    #[default]
    Dirichlet,
    /// Unit weights (degenerates to plain training).
    Unit,
}

fn train_members<F>(b: usize, build_and_train: F) -> Result<Vec<DenseNet>>
where
    F: Fn(usize) -> Result<DenseNet> + Sync + Send,
{
    // Members train in parallel on independent streams; errors are reported
    // for the lowest failing member index so the outcome does not depend on
    // scheduling.
    let results: Vec<Result<DenseNet>> = (0..b).into_par_iter().map(build_and_train).collect();
    let mut members = Vec::with_capacity(b);
    for (i, r) in results.into_iter().enumerate() {
        members.push(r.map_err(|e| Error::MemberFailed {
            member: i,
            source: Box::new(e),
        })?);
    }
    Ok(members)
}

/// Standard nonparametric bootstrap: each member trains on an i.i.d.
/// with-replacement resample of size `n`.
pub fn standard_bootstrap_train(
    arch: &ArchSpec,
    data: &Dataset,
    b: usize,
    sgd: &SgdConfig,
    loss: LossKind,
    rng: &mut ChaCha8Rng,
) -> Result<EnsembleOfNets> {
    standard_bootstrap_train_with(arch, data, b, sgd, loss, ResampleMode::WithReplacement, rng)
}

/// Standard bootstrap with an explicit resampling mode.
pub fn standard_bootstrap_train_with(
    arch: &ArchSpec,
    data: &Dataset,
    b: usize,
    sgd: &SgdConfig,
    loss: LossKind,
    resample: ResampleMode,
    rng: &mut ChaCha8Rng,
) -> Result<EnsembleOfNets> {
    if b == 0 {
        return Err(Error::InvalidConfig("need at least one member".into()));
    }
    let master: u64 = rng.random();
    let n = data.len();
    let members = train_members(b, |member| {
        let mut r = stream_rng(master, member as u64);
        let indices: Vec<usize> = match resample {
            ResampleMode::WithReplacement => (0..n).map(|_| r.random_range(0..n)).collect(),
            ResampleMode::Identity => (0..n).collect(),
        };
        let resampled = data.subset(&indices)?;
        let mut net = arch.build_dense(&mut r)?;
        train_dense(&mut net, &resampled, None, loss, sgd, &mut r)?;
        Ok(net)
    })?;
    EnsembleOfNets::new(members, EnsembleMethod::StandardBootstrap)
}

/// Random-weight bootstrap: each member trains once on the full data under a
/// fixed strictly positive Dirichlet weight vector, so no sample is discarded.
pub fn rwb_train(
    arch: &ArchSpec,
    data: &Dataset,
    b: usize,
    sgd: &SgdConfig,
    loss: LossKind,
    rng: &mut ChaCha8Rng,
) -> Result<EnsembleOfNets> {
    rwb_train_with(arch, data, b, sgd, loss, RwbWeights::Dirichlet, rng)
}

/// RWB with an explicit weight mode.
pub fn rwb_train_with(
    arch: &ArchSpec,
    data: &Dataset,
    b: usize,
    sgd: &SgdConfig,
    loss: LossKind,
    weights: RwbWeights,
    rng: &mut ChaCha8Rng,
) -> Result<EnsembleOfNets> {
    if b == 0 {
        return Err(Error::InvalidConfig("need at least one member".into()));
    }
    let master: u64 = rng.random();
    let n = data.len();
    let members = train_members(b, |member| {
        let mut r = stream_rng(master, member as u64);
        let w: Vec<f64> = match weights {
            RwbWeights::Dirichlet => sample_dirichlet_alpha(n, &mut r).values().to_vec(),
            RwbWeights::Unit => vec![1.0; n],
        };
        let mut net = arch.build_dense(&mut r)?;
        train_dense(&mut net, data, Some(&w), loss, sgd, &mut r)?;
        Ok(net)
    })?;
    EnsembleOfNets::new(members, EnsembleMethod::Rwb)
}

/// Plain ensemble: independent initializations, full data, unit weights.
pub fn deep_ensemble_train(
    arch: &ArchSpec,
    data: &Dataset,
    k: usize,
    sgd: &SgdConfig,
    loss: LossKind,
    rng: &mut ChaCha8Rng,
) -> Result<EnsembleOfNets> {
    if k == 0 {
        return Err(Error::InvalidConfig("need at least one member".into()));
    }
    let master: u64 = rng.random();
    let members = train_members(k, |member| {
        let mut r = stream_rng(master, member as u64);
        let mut net = arch.build_dense(&mut r)?;
        train_dense(&mut net, data, None, loss, sgd, &mut r)?;
        Ok(net)
    })?;
    EnsembleOfNets::new(members, EnsembleMethod::DeepEnsemble)
}

/// One prediction per member for every input row.
pub fn ensemble_predict(ens: &EnsembleOfNets, x: &Matrix) -> Result<Vec<PredictionEnsemble>> {
    ensemble_predict_full(ens, x).map(|(e, _)| e)
}

/// Member predictions plus pre-softmax logits, per input row.
pub fn ensemble_predict_full(
    ens: &EnsembleOfNets,
    x: &Matrix,
) -> Result<(Vec<PredictionEnsemble>, Vec<Matrix>)> {
    let b = ens.size();
    let m = x.rows();
    let d = ens.members()[0].output_dim();
    let mut samples = vec![Matrix::zeros(b, d); m];
    let mut logits = vec![Matrix::zeros(b, d); m];
    for (bi, member) in ens.members().iter().enumerate() {
        let (out, lin) = member.forward_with_logits(x)?;
        for i in 0..m {
            samples[i].row_mut(bi).copy_from_slice(out.row(i));
            logits[i].row_mut(bi).copy_from_slice(lin.row(i));
        }
    }
    Ok((
        samples
            .into_iter()
            .map(|s| PredictionEnsemble::new(s).expect("b >= 1"))
            .collect(),
        logits,
    ))
}

/// A trained net evaluated with a scaled Bernoulli mask on its final feature
/// layer. The mask uses inverted scaling (kept units multiplied by
/// `1/(1-p)`), so the deterministic path needs no rescale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutPredictor {
    net: DenseNet,
    p: f64,
}

impl DropoutPredictor {
    pub fn new(net: DenseNet, p: f64) -> Result<Self> {
        if !(0.0 < p && p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dropout probability must be in (0,1), got {p}"
            )));
        }
        if net.layers().len() < 2 {
            return Err(Error::InvalidConfig(
                "final-layer dropout needs at least one hidden layer".into(),
            ));
        }
        Ok(Self { net, p })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn split(&self) -> (&[Layer], &Layer) {
        let layers = self.net.layers();
        let (head, features) = layers.split_last().expect("validated in new");
        (features, head)
    }

    fn draw_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (features, _) = self.split();
        let s = features.last().unwrap().out_dim();
        let keep_scale = 1.0 / (1.0 - self.p);
        (0..s)
            .map(|_| {
                if rng.random::<f64>() < self.p {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect()
    }

    /// Deterministic path: the plain forward pass, no mask, no rescale.
    pub fn predict_deterministic(&self, x: &Matrix) -> Result<Matrix> {
        self.net.forward(x)
    }

    /// `b` stochastic forward passes, one fresh mask per pass (shared across
    /// the rows of `x`, so each pass is one function draw).
    pub fn predict_stochastic<R: Rng + ?Sized>(
        &self,
        x: &Matrix,
        b: usize,
        rng: &mut R,
    ) -> Result<Vec<PredictionEnsemble>> {
        self.predict_stochastic_full(x, b, rng).map(|(e, _)| e)
    }

    /// Stochastic passes returning ensembles and pre-softmax logits.
    pub fn predict_stochastic_full<R: Rng + ?Sized>(
        &self,
        x: &Matrix,
        b: usize,
        rng: &mut R,
    ) -> Result<(Vec<PredictionEnsemble>, Vec<Matrix>)> {
        if b == 0 {
            return Err(Error::InvalidConfig("need at least one pass".into()));
        }
        let (features, head) = self.split();
        let m = x.rows();
        let d = self.net.output_dim();
        let mut samples = vec![Matrix::zeros(b, d); m];
        let mut logits = vec![Matrix::zeros(b, d); m];
        for bi in 0..b {
            let mask = self.draw_mask(rng);
            let trace =
                forward_scaled_trace(features, head, self.net.output_head(), x, &mask)?;
            for i in 0..m {
                samples[i].row_mut(bi).copy_from_slice(trace.output.row(i));
                logits[i].row_mut(bi).copy_from_slice(trace.head_linear.row(i));
            }
        }
        Ok((
            samples
                .into_iter()
                .map(|s| PredictionEnsemble::new(s).expect("b >= 1"))
                .collect(),
            logits,
        ))
    }
}

/// Train a net with dropout active on the final feature layer (fresh mask per
/// mini-batch) and wrap it as a [`DropoutPredictor`].
pub fn mc_dropout_train(
    arch: &ArchSpec,
    data: &Dataset,
    p: f64,
    sgd: &SgdConfig,
    loss: LossKind,
    rng: &mut ChaCha8Rng,
) -> Result<DropoutPredictor> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "dropout probability must be in (0,1), got {p}"
        )));
    }
    let mut net = arch.build_dense(rng)?;
    if net.layers().len() < 2 {
        return Err(Error::InvalidConfig(
            "final-layer dropout needs at least one hidden layer".into(),
        ));
    }

    sgd.validate()?;
    let n = data.len();
    let batch = sgd.batch_size.min(n);
    let steps_per_epoch = n.div_ceil(batch);
    let mut opt = SgdOptimizer::new(sgd, net.layers().iter(), steps_per_epoch * sgd.epochs)?;

    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let keep_scale = 1.0 / (1.0 - p);
    let s = net.layers()[net.layers().len() - 2].out_dim();

    for epoch in 0..sgd.epochs {
        order.shuffle(rng);
        for (step, batch_idx) in order.chunks(batch).enumerate() {
            let x_b = data.x().gather_rows(batch_idx);
            let y_b = data.y().gather(batch_idx);
            let w_b = vec![1.0; batch_idx.len()];
            let mask: Vec<f64> = (0..s)
                .map(|_| {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        keep_scale
                    }
                })
                .collect();

            let grads = (|| -> Result<Gradients> {
                let (head, features) = net.layers().split_last().unwrap();
                let trace = forward_scaled_trace(features, head, net.output_head(), &x_b, &mask)?;
                let losses = per_sample_losses(&trace.output, &y_b, loss)?;
                if losses.iter().any(|l| !l.is_finite()) {
                    return Err(Error::NonFiniteLoss {
                        indices: batch_idx.to_vec(),
                    });
                }
                let d_head_out = crate::nn::loss_output_grad(
                    &trace.output,
                    net.output_head(),
                    &y_b,
                    &w_b,
                    loss,
                )?;
                let mut grads = Gradients::zeros_like(net.layers().iter());
                backward_scaled(features, head, &x_b, &trace, &d_head_out, &mask, &mut grads);
                Ok(grads)
            })();
            let step_result = grads.and_then(|grads| {
                let mut layers: Vec<&mut Layer> = net.layers_mut().iter_mut().collect();
                opt.step(&mut layers, &grads)
            });
            step_result.map_err(|e| Error::TrainingDiverged {
                epoch,
                step,
                source: Box::new(e),
            })?;
        }
    }

    DropoutPredictor::new(net, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use crate::nn::{Activation, LrSchedule};
    use crate::rng::seeded_rng;

    fn toy_regression(n: usize) -> Dataset {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
        Dataset::regression(Matrix::column(&xs), Matrix::column(&ys)).unwrap()
    }

    fn quick_sgd(epochs: usize) -> SgdConfig {
        SgdConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 16,
            epochs,
            lr_schedule: LrSchedule::Constant,
            seed: 0,
        }
    }

    #[test]
    fn identity_resample_single_member_equals_plain_training() {
        let data = toy_regression(24);
        let arch = ArchSpec::new(1, vec![4], Activation::Tanh, Task::Regression { output_dim: 1 });
        let sgd = quick_sgd(8);

        let mut rng = seeded_rng(5);
        let ens = standard_bootstrap_train_with(
            &arch,
            &data,
            1,
            &sgd,
            LossKind::Mse,
            ResampleMode::Identity,
            &mut rng,
        )
        .unwrap();

        // Recreate the member's stream by hand and train plainly.
        let master: u64 = seeded_rng(5).random();
        let mut r = stream_rng(master, 0);
        let indices: Vec<usize> = (0..data.len()).collect();
        let resampled = data.subset(&indices).unwrap();
        let mut plain = arch.build_dense(&mut r).unwrap();
        train_dense(&mut plain, &resampled, None, LossKind::Mse, &sgd, &mut r).unwrap();

        let x = Matrix::column(&[0.25, 0.75]);
        let a = ensemble_predict(&ens, &x).unwrap();
        let b = plain.forward(&x).unwrap();
        assert_eq!(a[0].samples().row(0)[0].to_bits(), b.get(0, 0).to_bits());
        assert_eq!(a[1].samples().row(0)[0].to_bits(), b.get(1, 0).to_bits());
    }

    #[test]
    fn unit_weight_rwb_member_is_plain_training() {
        let data = toy_regression(16);
        let arch = ArchSpec::new(1, vec![3], Activation::Tanh, Task::Regression { output_dim: 1 });
        let sgd = quick_sgd(5);
        let ens = rwb_train_with(
            &arch,
            &data,
            2,
            &sgd,
            LossKind::Mse,
            RwbWeights::Unit,
            &mut seeded_rng(8),
        )
        .unwrap();
        assert_eq!(ens.size(), 2);
        assert_eq!(ens.method(), EnsembleMethod::Rwb);
    }

    #[test]
    fn rwb_weights_are_strictly_positive() {
        let mut rng = seeded_rng(31);
        for _ in 0..200 {
            let w = sample_dirichlet_alpha(50, &mut rng);
            assert!(w.values().iter().all(|&v| v > 0.0));
            let sum: f64 = w.values().iter().sum();
            assert!((sum - 50.0).abs() < 1e-6);
        }
    }

    #[test]
    fn single_member_ensemble_mean_is_member_output() {
        let data = toy_regression(16);
        let arch = ArchSpec::new(1, vec![3], Activation::Tanh, Task::Regression { output_dim: 1 });
        let ens =
            deep_ensemble_train(&arch, &data, 1, &quick_sgd(4), LossKind::Mse, &mut seeded_rng(2))
                .unwrap();
        let x = Matrix::column(&[0.4]);
        let pred = ensemble_predict(&ens, &x).unwrap();
        let direct = ens.members()[0].forward(&x).unwrap();
        assert_eq!(pred[0].mean()[0].to_bits(), direct.get(0, 0).to_bits());
    }

    #[test]
    fn identical_members_have_zero_ensemble_variance() {
        let arch = ArchSpec::new(1, vec![3], Activation::Tanh, Task::Regression { output_dim: 1 });
        let net = arch.build_dense(&mut seeded_rng(4)).unwrap();
        let ens =
            EnsembleOfNets::new(vec![net.clone(), net], EnsembleMethod::DeepEnsemble).unwrap();
        let x = Matrix::column(&[0.1, 0.9]);
        for e in ensemble_predict(&ens, &x).unwrap() {
            assert_eq!(e.std()[0], 0.0);
        }
    }

    #[test]
    fn two_hand_set_linear_members_average_by_hand() {
        // Members y = 2x and y = 4x + 1; mean prediction at x = 3 is (6 + 13)/2.
        let m1 = DenseNet::new(
            vec![Layer::from_params(1, 1, Activation::Identity, vec![2.0], vec![0.0])],
            crate::nn::OutputHead::Identity,
        )
        .unwrap();
        let m2 = DenseNet::new(
            vec![Layer::from_params(1, 1, Activation::Identity, vec![4.0], vec![1.0])],
            crate::nn::OutputHead::Identity,
        )
        .unwrap();
        let ens = EnsembleOfNets::new(vec![m1, m2], EnsembleMethod::DeepEnsemble).unwrap();
        let pred = ensemble_predict(&ens, &Matrix::column(&[3.0])).unwrap();
        assert!((pred[0].mean()[0] - 9.5).abs() < 1e-15);
    }

    #[test]
    fn tiny_dropout_matches_deterministic_path() {
        let data = toy_regression(16);
        let arch = ArchSpec::new(1, vec![5], Activation::Tanh, Task::Regression { output_dim: 1 });
        let pred = mc_dropout_train(
            &arch,
            &data,
            1e-9,
            &quick_sgd(5),
            LossKind::Mse,
            &mut seeded_rng(12),
        )
        .unwrap();
        let x = Matrix::column(&[0.2, 0.8]);
        let det = pred.predict_deterministic(&x).unwrap();
        let sto = pred.predict_stochastic(&x, 20, &mut seeded_rng(13)).unwrap();
        for (i, e) in sto.iter().enumerate() {
            for row in e.samples().iter_rows() {
                assert!((row[0] - det.get(i, 0)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn inverted_mask_has_unit_expectation() {
        let arch = ArchSpec::new(1, vec![8], Activation::Tanh, Task::Regression { output_dim: 1 });
        let net = arch.build_dense(&mut seeded_rng(3)).unwrap();
        let pred = DropoutPredictor::new(net, 0.3).unwrap();
        let mut rng = seeded_rng(44);
        let draws = 100_000;
        let mut mean = vec![0.0; 8];
        for _ in 0..draws {
            for (m, v) in mean.iter_mut().zip(pred.draw_mask(&mut rng)) {
                *m += v;
            }
        }
        for m in &mean {
            let avg = m / draws as f64;
            assert!((avg - 1.0).abs() < 0.01, "avg={avg}");
        }
    }

    #[test]
    fn dropout_probability_validated() {
        let arch = ArchSpec::new(1, vec![3], Activation::Tanh, Task::Regression { output_dim: 1 });
        let net = arch.build_dense(&mut seeded_rng(1)).unwrap();
        assert!(DropoutPredictor::new(net.clone(), 0.0).is_err());
        assert!(DropoutPredictor::new(net, 1.0).is_err());
    }
}
