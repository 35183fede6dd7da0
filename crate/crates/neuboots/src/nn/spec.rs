//! Architecture specification and network builders.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::layer::Layer;
use super::net::{DenseNet, OutputHead};
use crate::data::Task;
use crate::{Error, Result};

/// Shape of a network: input width, hidden widths, hidden activation, task.
///
/// The task decides the output width and head (identity for regression,
/// softmax for classification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub task: Task,
}

impl ArchSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, activation: Activation, task: Task) -> Self {
        Self {
            input_dim,
            hidden,
            activation,
            task,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if self.task.output_dim() == 0 {
            return Err(Error::InvalidConfig("output_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn output_head(&self) -> OutputHead {
        match self.task {
            Task::Regression { .. } => OutputHead::Identity,
            Task::Classification { .. } => OutputHead::Softmax,
        }
    }

    /// Build a plain dense net: hidden layers with the configured activation,
    /// then an identity-activation affine layer into the output head.
    pub fn build_dense<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DenseNet> {
        self.validate()?;
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut in_dim = self.input_dim;
        for &h in &self.hidden {
            layers.push(Layer::init(in_dim, h, self.activation, rng));
            in_dim = h;
        }
        layers.push(Layer::init(
            in_dim,
            self.task.output_dim(),
            Activation::Identity,
            rng,
        ));
        DenseNet::new(layers, self.output_head())
    }

    /// Feature-extractor layers only (everything but the final affine layer).
    pub(crate) fn build_feature_layers<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Layer>> {
        self.validate()?;
        if self.hidden.is_empty() {
            return Err(Error::InvalidConfig(
                "a feature extractor needs at least one hidden layer".into(),
            ));
        }
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut in_dim = self.input_dim;
        for &h in &self.hidden {
            layers.push(Layer::init(in_dim, h, self.activation, rng));
            in_dim = h;
        }
        Ok(layers)
    }
}
