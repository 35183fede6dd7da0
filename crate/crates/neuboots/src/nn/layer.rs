//! A dense affine layer with elementwise activation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::net::LayerGrad;
use crate::matrix::Matrix;

/// `y = activation(W x + b)` with row-major `W` of shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    /// He-style uniform fan-in initialization: weights from
    /// `U(-sqrt(6/in_dim), sqrt(6/in_dim))`, biases zero.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(in_dim > 0 && out_dim > 0, "layer dims must be positive");
        let limit = (6.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            activation,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    /// Layer with explicit parameters, for hand-built fixtures.
    pub fn from_params(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Self {
        assert_eq!(weights.len(), in_dim * out_dim);
        assert_eq!(bias.len(), out_dim);
        Self {
            in_dim,
            out_dim,
            activation,
            weights,
            bias,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Single-row forward into a preallocated output slice.
    #[inline]
    pub fn forward_into(&self, input: &[f64], output: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_dim);
        debug_assert_eq!(output.len(), self.out_dim);
        for (out, (w_row, b)) in output
            .iter_mut()
            .zip(self.weights.chunks_exact(self.in_dim).zip(&self.bias))
        {
            let mut acc = *b;
            for (w, x) in w_row.iter().zip(input) {
                acc = w.mul_add(*x, acc);
            }
            *out = self.activation.apply(acc);
        }
    }

    /// Batch forward: one output row per input row.
    pub fn forward_batch(&self, input: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(input.rows(), self.out_dim);
        for (x, y) in input.iter_rows().zip(out.iter_rows_mut()) {
            self.forward_into(x, y);
        }
        out
    }

    /// Batch backward pass.
    ///
    /// `input`/`output` are the values seen in the forward pass, `d_output`
    /// is dL/d(output). Parameter gradients accumulate into `grad`; when
    /// `d_input` is given it is overwritten with dL/d(input).
    pub fn backward_batch(
        &self,
        input: &Matrix,
        output: &Matrix,
        d_output: &Matrix,
        grad: &mut LayerGrad,
        mut d_input: Option<&mut Matrix>,
    ) {
        debug_assert_eq!(input.cols(), self.in_dim);
        debug_assert_eq!(output.cols(), self.out_dim);
        debug_assert_eq!(d_output.cols(), self.out_dim);
        if let Some(di) = d_input.as_deref_mut() {
            di.as_mut_slice().fill(0.0);
        }
        for r in 0..input.rows() {
            let x = input.row(r);
            let y = output.row(r);
            let dy = d_output.row(r);
            let di = d_input.as_deref_mut().map(|m| m.row_mut(r));
            self.backward_row(x, y, dy, grad, di);
        }
    }

    #[inline]
    fn backward_row(
        &self,
        input: &[f64],
        output: &[f64],
        d_output: &[f64],
        grad: &mut LayerGrad,
        d_input: Option<&mut [f64]>,
    ) {
        let act = self.activation;
        match d_input {
            Some(di) => {
                for (o, ((&dy, &y), db)) in d_output
                    .iter()
                    .zip(output)
                    .zip(grad.d_bias.iter_mut())
                    .enumerate()
                {
                    let dz = dy * act.grad_from_output(y);
                    *db += dz;
                    let row = o * self.in_dim;
                    let w_row = &self.weights[row..row + self.in_dim];
                    let dw_row = &mut grad.d_weights[row..row + self.in_dim];
                    for ((dw, d), (&x, &w)) in
                        dw_row.iter_mut().zip(di.iter_mut()).zip(input.iter().zip(w_row))
                    {
                        *dw = dz.mul_add(x, *dw);
                        *d = w.mul_add(dz, *d);
                    }
                }
            }
            None => {
                for (o, ((&dy, &y), db)) in d_output
                    .iter()
                    .zip(output)
                    .zip(grad.d_bias.iter_mut())
                    .enumerate()
                {
                    let dz = dy * act.grad_from_output(y);
                    *db += dz;
                    let row = o * self.in_dim;
                    let dw_row = &mut grad.d_weights[row..row + self.in_dim];
                    for (dw, &x) in dw_row.iter_mut().zip(input) {
                        *dw = dz.mul_add(x, *dw);
                    }
                }
            }
        }
    }
}
