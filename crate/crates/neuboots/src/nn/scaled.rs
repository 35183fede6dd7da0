//! Forward/backward passes for nets whose final feature vector is multiplied
//! elementwise by a scale vector before the affine head.
//!
//! Both the bootstrap generator (scale = block weights) and the final-layer
//! dropout predictor (scale = scaled Bernoulli mask) are instances of this
//! shape, so the machinery lives here once.

use super::layer::Layer;
use super::net::{Gradients, OutputHead};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Forward-pass intermediates needed for the backward pass.
pub(crate) struct ScaledTrace {
    /// Post-activation output of each feature layer.
    pub feature_acts: Vec<Matrix>,
    /// Last feature activations multiplied by the scale vector.
    pub scaled: Matrix,
    /// Affine head output (pre output-head).
    pub head_linear: Matrix,
    /// Final output (post output-head).
    pub output: Matrix,
}

fn check_dims(features: &[Layer], head: &Layer, x: &Matrix, scale: &[f64]) -> Result<()> {
    let first = features
        .first()
        .ok_or_else(|| Error::InvalidConfig("feature extractor has no layers".into()))?;
    if x.cols() != first.in_dim() {
        return Err(Error::LayerShapeMismatch {
            layer: 0,
            expected: first.in_dim(),
            got: x.cols(),
        });
    }
    let s = features.last().unwrap().out_dim();
    if scale.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "scale vector of length {} but feature dimension {}",
            scale.len(),
            s
        )));
    }
    if head.in_dim() != s {
        return Err(Error::DimensionMismatch(format!(
            "head expects {} inputs but feature dimension is {}",
            head.in_dim(),
            s
        )));
    }
    Ok(())
}

/// Forward pass retaining intermediates.
pub(crate) fn forward_scaled_trace(
    features: &[Layer],
    head: &Layer,
    output_head: OutputHead,
    x: &Matrix,
    scale: &[f64],
) -> Result<ScaledTrace> {
    check_dims(features, head, x, scale)?;
    let mut feature_acts = Vec::with_capacity(features.len());
    feature_acts.push(features[0].forward_batch(x));
    for layer in &features[1..] {
        let next = layer.forward_batch(feature_acts.last().unwrap());
        feature_acts.push(next);
    }
    let phi = feature_acts.last().unwrap();
    let mut scaled = phi.clone();
    for row in scaled.iter_rows_mut() {
        for (v, s) in row.iter_mut().zip(scale) {
            *v *= s;
        }
    }
    let head_linear = head.forward_batch(&scaled);
    let mut output = head_linear.clone();
    output_head.apply(&mut output);
    Ok(ScaledTrace {
        feature_acts,
        scaled,
        head_linear,
        output,
    })
}

/// Forward pass without intermediates (prediction path).
pub(crate) fn forward_scaled(
    features: &[Layer],
    head: &Layer,
    output_head: OutputHead,
    x: &Matrix,
    scale: &[f64],
) -> Result<Matrix> {
    check_dims(features, head, x, scale)?;
    let mut cur = features[0].forward_batch(x);
    for layer in &features[1..] {
        cur = layer.forward_batch(&cur);
    }
    for row in cur.iter_rows_mut() {
        for (v, s) in row.iter_mut().zip(scale) {
            *v *= s;
        }
    }
    let mut out = head.forward_batch(&cur);
    output_head.apply(&mut out);
    Ok(out)
}

/// Backward pass. `d_head_out` is dL/d(head_linear); gradients are written
/// into `grads`, laid out as feature layers first, head layer last.
pub(crate) fn backward_scaled(
    features: &[Layer],
    head: &Layer,
    x: &Matrix,
    trace: &ScaledTrace,
    d_head_out: &Matrix,
    scale: &[f64],
    grads: &mut Gradients,
) {
    debug_assert_eq!(grads.layers.len(), features.len() + 1);
    let m = x.rows();
    let s = scale.len();

    let (head_grad_slot, feature_grads) = grads.layers.split_last_mut().unwrap();
    let mut d_scaled = Matrix::zeros(m, s);
    head.backward_batch(
        &trace.scaled,
        &trace.head_linear,
        d_head_out,
        head_grad_slot,
        Some(&mut d_scaled),
    );

    // d(phi) = d(scaled) ⊙ scale.
    for row in d_scaled.iter_rows_mut() {
        for (v, sc) in row.iter_mut().zip(scale) {
            *v *= sc;
        }
    }

    let mut d_out = d_scaled;
    for k in (0..features.len()).rev() {
        let layer = &features[k];
        let input = if k == 0 { x } else { &trace.feature_acts[k - 1] };
        if k == 0 {
            layer.backward_batch(
                input,
                &trace.feature_acts[0],
                &d_out,
                &mut feature_grads[0],
                None,
            );
            break;
        }
        let mut d_in = Matrix::zeros(m, layer.in_dim());
        layer.backward_batch(
            input,
            &trace.feature_acts[k],
            &d_out,
            &mut feature_grads[k],
            Some(&mut d_in),
        );
        d_out = d_in;
    }
}
