//! The dense network container and its gradient computation.

use serde::{Deserialize, Serialize};

use super::layer::Layer;
use super::loss::{LossKind, loss_output_grad, per_sample_losses};
use crate::data::Targets;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Transform applied after the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// Raw outputs (regression).
    Identity,
    /// Row-wise softmax (classification).
    Softmax,
}

impl OutputHead {
    /// Apply the head in place.
    pub fn apply(self, m: &mut Matrix) {
        if self == OutputHead::Softmax {
            for row in m.iter_rows_mut() {
                softmax_in_place(row);
            }
        }
    }
}

/// Numerically stable row softmax.
#[inline]
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Backward through a softmax row: given `dp = dL/dp` and `p = softmax(z)`,
/// writes `dL/dz` into `dz`.
#[inline]
pub(crate) fn softmax_backward_row(dp: &[f64], p: &[f64], dz: &mut [f64]) {
    let dot: f64 = dp.iter().zip(p).map(|(a, b)| a * b).sum();
    for ((dzk, &pk), &dpk) in dz.iter_mut().zip(p).zip(dp) {
        *dzk = pk * (dpk - dot);
    }
}

/// Gradient of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &Layer) -> Self {
        Self {
            d_weights: vec![0.0; layer.weights().len()],
            d_bias: vec![0.0; layer.bias().len()],
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.d_weights.iter_mut().chain(&mut self.d_bias) {
            *v *= c;
        }
    }
}

/// Gradients mirroring a network's layer list.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like<'a>(layers: impl Iterator<Item = &'a Layer>) -> Self {
        Self {
            layers: layers.map(LayerGrad::zeros_like).collect(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.scale(c);
        }
    }
}

/// Dense feed-forward network: an ordered list of affine layers and an
/// output head. Consecutive layer dimensions must chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
    output_head: OutputHead,
}

impl DenseNet {
    pub fn new(layers: Vec<Layer>, output_head: OutputHead) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for i in 1..layers.len() {
            if layers[i].in_dim() != layers[i - 1].out_dim() {
                return Err(Error::InvalidConfig(format!(
                    "layer {} expects input width {}, but layer {} outputs {}",
                    i,
                    layers[i].in_dim(),
                    i - 1,
                    layers[i - 1].out_dim()
                )));
            }
        }
        Ok(Self {
            layers,
            output_head,
        })
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn output_head(&self) -> OutputHead {
        self.output_head
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(Layer::all_finite)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::LayerShapeMismatch {
                layer: 0,
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Forward pass over a batch. Softmax rows sum to 1 for classification.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut cur = self.layers[0].forward_batch(x);
        for layer in &self.layers[1..] {
            cur = layer.forward_batch(&cur);
        }
        self.output_head.apply(&mut cur);
        Ok(cur)
    }

    /// Forward pass returning both the head output and the last layer's
    /// pre-head activation (the logits, for a softmax head).
    pub fn forward_with_logits(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        self.check_input(x)?;
        let mut cur = self.layers[0].forward_batch(x);
        for layer in &self.layers[1..] {
            cur = layer.forward_batch(&cur);
        }
        let mut out = cur.clone();
        self.output_head.apply(&mut out);
        Ok((out, cur))
    }

    /// Forward pass keeping every layer's post-activation output.
    /// The last entry is pre-head; the head output is returned separately.
    pub(crate) fn forward_trace(&self, x: &Matrix) -> Result<(Vec<Matrix>, Matrix)> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(self.layers[0].forward_batch(x));
        for layer in &self.layers[1..] {
            let next = layer.forward_batch(acts.last().unwrap());
            acts.push(next);
        }
        let mut out = acts.last().unwrap().clone();
        self.output_head.apply(&mut out);
        Ok((acts, out))
    }

    /// Gradient of the weighted mean loss `(1/m) sum_i w_i l_i` with respect
    /// to every parameter, plus the loss value itself.
    ///
    /// `batch_indices`, when given, names the rows in the caller's dataset and
    /// is only used to report non-finite losses.
    pub fn grad(
        &self,
        x: &Matrix,
        targets: &Targets,
        weights: &[f64],
        kind: LossKind,
        batch_indices: Option<&[usize]>,
    ) -> Result<(Gradients, f64)> {
        let m = x.rows();
        if targets.len() != m || weights.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "batch of {} rows with {} targets and {} weights",
                m,
                targets.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidData(format!(
                "sample weights must be finite and nonnegative, got {w}"
            )));
        }
        let (acts, out) = self.forward_trace(x)?;

        let losses = per_sample_losses(&out, targets, kind)?;
        if losses.iter().any(|l| !l.is_finite()) {
            let indices = batch_indices
                .map(<[usize]>::to_vec)
                .unwrap_or_else(|| (0..m).collect());
            return Err(Error::NonFiniteLoss { indices });
        }
        let loss_value = losses
            .iter()
            .zip(weights)
            .map(|(l, w)| l * w)
            .sum::<f64>()
            / m as f64;

        // dL/d(last post-activation), with the w_i/m factor folded in.
        let d_last = loss_output_grad(&out, self.output_head, targets, weights, kind)?;

        let mut grads = Gradients::zeros_like(self.layers.iter());
        self.backprop(x, &acts, &d_last, &mut grads, None);
        Ok((grads, loss_value))
    }

    /// Shared reverse pass: accumulates parameter gradients for all layers
    /// given dL/d(last activation); optionally emits dL/d(input).
    pub(crate) fn backprop(
        &self,
        x: &Matrix,
        acts: &[Matrix],
        d_last: &Matrix,
        grads: &mut Gradients,
        d_input: Option<&mut Matrix>,
    ) {
        debug_assert_eq!(acts.len(), self.layers.len());
        debug_assert_eq!(grads.layers.len(), self.layers.len());
        let m = x.rows();
        let mut d_out = d_last.clone();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = if k == 0 { x } else { &acts[k - 1] };
            if k == 0 {
                self.layers[0].backward_batch(input, &acts[0], &d_out, &mut grads.layers[0], d_input);
                break;
            }
            let mut d_in = Matrix::zeros(m, layer.in_dim());
            layer.backward_batch(input, &acts[k], &d_out, &mut grads.layers[k], Some(&mut d_in));
            d_out = d_in;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn identity_net() -> DenseNet {
        let layer = Layer::from_params(
            2,
            2,
            Activation::Identity,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0],
        );
        DenseNet::new(vec![layer], OutputHead::Identity).unwrap()
    }

    #[test]
    fn identity_net_passes_input_through() {
        let net = identity_net();
        let x = Matrix::from_row(&[1.0, 2.0]);
        let y = net.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let layer = Layer::from_params(
            2,
            3,
            Activation::Identity,
            vec![0.4, -1.0, 2.0, 0.3, -0.7, 1.1],
            vec![0.1, -0.2, 0.0],
        );
        let net = DenseNet::new(vec![layer], OutputHead::Softmax).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, -2.0], vec![3.0, 1.0], vec![-4.0, 5.5]]).unwrap();
        let y = net.forward(&x).unwrap();
        for row in y.iter_rows() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn hand_evaluated_two_layer_chain() {
        // Layer 1: W=[[1,2],[3,4]], b=[0.5,-0.5], tanh.
        // Layer 2: W=[[1,-1],[2,0]], b=[0,1], identity.
        let l1 = Layer::from_params(
            2,
            2,
            Activation::Tanh,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.5, -0.5],
        );
        let l2 = Layer::from_params(
            2,
            2,
            Activation::Identity,
            vec![1.0, -1.0, 2.0, 0.0],
            vec![0.0, 1.0],
        );
        let net = DenseNet::new(vec![l1, l2], OutputHead::Identity).unwrap();
        let x = Matrix::from_row(&[1.0, 0.0]);
        // Hand computation: z1 = [1*1+2*0+0.5, 3*1+4*0-0.5] = [1.5, 2.5]
        // a1 = [tanh(1.5), tanh(2.5)]
        // y  = [a1_0 - a1_1, 2*a1_0 + 1]
        let a0 = 1.5_f64.tanh();
        let a1 = 2.5_f64.tanh();
        let y = net.forward(&x).unwrap();
        assert!((y.get(0, 0) - (a0 - a1)).abs() < 1e-15);
        assert!((y.get(0, 1) - (2.0 * a0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn mismatched_input_width_names_layer() {
        let net = identity_net();
        let x = Matrix::from_row(&[1.0, 2.0, 3.0]);
        match net.forward(&x) {
            Err(Error::LayerShapeMismatch {
                layer, expected, got,
            }) => {
                assert_eq!((layer, expected, got), (0, 2, 3));
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn chained_dims_validated() {
        let l1 = Layer::from_params(1, 2, Activation::Identity, vec![1.0, 1.0], vec![0.0, 0.0]);
        let l2 = Layer::from_params(3, 1, Activation::Identity, vec![1.0; 3], vec![0.0]);
        assert!(DenseNet::new(vec![l1, l2], OutputHead::Identity).is_err());
    }
}
