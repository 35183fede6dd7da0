//! SGD with momentum, decoupled weight decay, and learning-rate schedules.

use serde::{Deserialize, Serialize};

use super::layer::Layer;
use super::net::Gradients;
use crate::{Error, Result};

/// Learning-rate schedule over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half cosine from the initial rate to 0 over the total step count.
    CosineAnnealing,
}

/// Validated SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
}

impl SgdConfig {
    pub fn new(
        learning_rate: f64,
        momentum: f64,
        weight_decay: f64,
        batch_size: usize,
        epochs: usize,
        lr_schedule: LrSchedule,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            learning_rate,
            momentum,
            weight_decay,
            batch_size,
            epochs,
            lr_schedule,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 100,
            lr_schedule: LrSchedule::Constant,
            seed: 0,
        }
    }
}

/// Momentum buffers plus the step counter driving the schedule.
#[derive(Debug, Clone)]
pub struct SgdOptimizer {
    cfg: SgdConfig,
    total_steps: usize,
    step_index: usize,
    velocity: Vec<(Vec<f64>, Vec<f64>)>,
}

impl SgdOptimizer {
    /// `layers` fixes the parameter shapes; `total_steps` is the schedule
    /// horizon (epochs times batches per epoch).
    pub fn new<'a>(
        cfg: &SgdConfig,
        layers: impl Iterator<Item = &'a Layer>,
        total_steps: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            total_steps: total_steps.max(1),
            step_index: 0,
            velocity: layers
                .map(|l| (vec![0.0; l.weights().len()], vec![0.0; l.bias().len()]))
                .collect(),
        })
    }

    /// Learning rate at a given step index.
    pub fn lr_at(&self, step_index: usize) -> f64 {
        match self.cfg.lr_schedule {
            LrSchedule::Constant => self.cfg.learning_rate,
            LrSchedule::CosineAnnealing => {
                let t = step_index.min(self.total_steps) as f64 / self.total_steps as f64;
                0.5 * self.cfg.learning_rate * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// One update: `v <- momentum*v + g`, `theta <- theta - lr*v - lr*wd*theta`,
    /// with weight decay applied to weights only, never biases.
    ///
    /// Errors if any parameter is non-finite after the update.
    pub fn step(&mut self, layers: &mut [&mut Layer], grads: &Gradients) -> Result<()> {
        if layers.len() != self.velocity.len() || grads.layers.len() != self.velocity.len() {
            return Err(Error::DimensionMismatch(format!(
                "optimizer built for {} layers, got {} layers / {} grads",
                self.velocity.len(),
                layers.len(),
                grads.layers.len()
            )));
        }
        let lr = self.lr_at(self.step_index);
        let mu = self.cfg.momentum;
        let wd = self.cfg.weight_decay;
        for ((layer, grad), (vw, vb)) in layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.velocity.iter_mut())
        {
            if grad.d_weights.len() != vw.len() || grad.d_bias.len() != vb.len() {
                return Err(Error::DimensionMismatch(
                    "gradient shape does not mirror parameters".into(),
                ));
            }
            for ((w, g), v) in layer
                .weights_mut()
                .iter_mut()
                .zip(&grad.d_weights)
                .zip(vw.iter_mut())
            {
                *v = mu * *v + g;
                *w -= lr * *v + lr * wd * *w;
            }
            for ((b, g), v) in layer
                .bias_mut()
                .iter_mut()
                .zip(&grad.d_bias)
                .zip(vb.iter_mut())
            {
                *v = mu * *v + g;
                *b -= lr * *v;
            }
        }
        self.step_index += 1;
        if !layers.iter().all(|l| l.all_finite()) {
            return Err(Error::InvalidData(
                "non-finite parameter after optimizer step".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerGrad};

    fn scalar_layer(w: f64) -> Layer {
        Layer::from_params(1, 1, Activation::Identity, vec![w], vec![0.0])
    }

    fn grad_of(g: f64) -> Gradients {
        Gradients {
            layers: vec![LayerGrad {
                d_weights: vec![g],
                d_bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SgdConfig::new(0.0, 0.9, 0.0, 1, 1, LrSchedule::Constant, 0).is_err());
        assert!(SgdConfig::new(0.1, 1.0, 0.0, 1, 1, LrSchedule::Constant, 0).is_err());
        assert!(SgdConfig::new(0.1, 0.9, -1.0, 1, 1, LrSchedule::Constant, 0).is_err());
        assert!(SgdConfig::new(0.1, 0.9, 0.0, 0, 1, LrSchedule::Constant, 0).is_err());
        assert!(SgdConfig::new(0.1, 0.9, 0.0, 1, 0, LrSchedule::Constant, 0).is_err());
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut layer = scalar_layer(0.42);
        let cfg = SgdConfig::new(0.5, 0.9, 0.0, 1, 1, LrSchedule::Constant, 0).unwrap();
        let mut opt = SgdOptimizer::new(&cfg, std::iter::once(&layer), 10).unwrap();
        opt.step(&mut [&mut layer], &grad_of(0.0)).unwrap();
        assert_eq!(layer.weights()[0], 0.42);
    }

    #[test]
    fn definition_step_without_momentum() {
        // momentum = 0, lr = 1: theta_new = theta - g - wd*theta.
        let mut layer = scalar_layer(2.0);
        let cfg = SgdConfig::new(1.0, 0.0, 0.1, 1, 1, LrSchedule::Constant, 0).unwrap();
        let mut opt = SgdOptimizer::new(&cfg, std::iter::once(&layer), 10).unwrap();
        opt.step(&mut [&mut layer], &grad_of(0.3)).unwrap();
        let expected = 2.0 - 0.3 - 0.1 * 2.0;
        assert!((layer.weights()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn momentum_recurrence_matches_hand_unrolled() {
        // v1 = g1; th1 = th0 - lr*v1; v2 = mu*v1 + g2; th2 = th1 - lr*v2.
        let (th0, lr, mu, g1, g2) = (1.0, 0.1, 0.9, 0.5, -0.2);
        let mut layer = scalar_layer(th0);
        let cfg = SgdConfig::new(lr, mu, 0.0, 1, 1, LrSchedule::Constant, 0).unwrap();
        let mut opt = SgdOptimizer::new(&cfg, std::iter::once(&layer), 10).unwrap();
        opt.step(&mut [&mut layer], &grad_of(g1)).unwrap();
        opt.step(&mut [&mut layer], &grad_of(g2)).unwrap();
        let v1 = g1;
        let th1 = th0 - lr * v1;
        let v2 = mu * v1 + g2;
        let th2 = th1 - lr * v2;
        assert!((layer.weights()[0] - th2).abs() < 1e-15);
    }

    #[test]
    fn cosine_schedule_spans_full_half_cosine() {
        let layer = scalar_layer(0.0);
        let cfg = SgdConfig::new(0.8, 0.0, 0.0, 1, 1, LrSchedule::CosineAnnealing, 0).unwrap();
        let opt = SgdOptimizer::new(&cfg, std::iter::once(&layer), 100).unwrap();
        assert!((opt.lr_at(0) - 0.8).abs() < 1e-15);
        assert!((opt.lr_at(50) - 0.4).abs() < 1e-12);
        assert!(opt.lr_at(100) < 1e-15);
    }
}
