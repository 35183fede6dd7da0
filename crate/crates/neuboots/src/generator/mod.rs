//! The bootstrap generator: a network `g(x, alpha) = M(F(x) ⊙ alpha)` whose
//! final feature vector is multiplied elementwise by an `S`-dimensional block
//! weight vector before the affine head.
//!
//! Training draws one weight vector per epoch and uses it both inside the
//! forward pass and as per-sample loss weights (see [`train`]). Prediction
//! computes the feature tensor once and replays only the head under fresh
//! weight draws, which is what makes bootstrap prediction cheap.

mod band;
mod train;

pub use band::{Band, PredictionEnsemble, confidence_band};
pub use train::{AlphaSampling, TrainConfig, TrainTrace, fit_generator, train};

pub(crate) use band::argmax;

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapAlpha;
use crate::matrix::Matrix;
use crate::nn::scaled::{forward_scaled, forward_scaled_trace};
use crate::nn::{Activation, ArchSpec, DenseNet, Layer, OutputHead};
use crate::{Error, Result};

/// Generator network: feature extractor `F` (input -> S), one affine head
/// `M` (S -> output), and an output head. `S` equals the feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNet {
    feature_layers: Vec<Layer>,
    head: Layer,
    output_head: OutputHead,
    /// Bumped on every parameter mutation; guards feature caches.
    #[serde(skip)]
    version: u64,
    /// Seed used to build the training block assignment, kept as provenance.
    assignment_seed: Option<u64>,
}

impl GeneratorNet {
    pub fn new(feature_layers: Vec<Layer>, head: Layer, output_head: OutputHead) -> Result<Self> {
        if feature_layers.is_empty() {
            return Err(Error::InvalidConfig(
                "generator needs at least one feature layer".into(),
            ));
        }
        for i in 1..feature_layers.len() {
            if feature_layers[i].in_dim() != feature_layers[i - 1].out_dim() {
                return Err(Error::InvalidConfig(format!(
                    "feature layer {} expects width {}, got {}",
                    i,
                    feature_layers[i].in_dim(),
                    feature_layers[i - 1].out_dim()
                )));
            }
        }
        let s = feature_layers.last().unwrap().out_dim();
        if head.in_dim() != s {
            return Err(Error::InvalidConfig(format!(
                "head expects {} inputs but the feature dimension is {}",
                head.in_dim(),
                s
            )));
        }
        if head.activation() != Activation::Identity {
            return Err(Error::InvalidConfig(
                "the head must be a single affine layer (identity activation)".into(),
            ));
        }
        Ok(Self {
            feature_layers,
            head,
            output_head,
            version: 0,
            assignment_seed: None,
        })
    }

    /// Build from an architecture spec; the block count `S` is the last
    /// hidden width.
    pub fn from_spec<R: rand::Rng + ?Sized>(spec: &ArchSpec, rng: &mut R) -> Result<Self> {
        let feature_layers = spec.build_feature_layers(rng)?;
        let s = feature_layers.last().unwrap().out_dim();
        let head = Layer::init(s, spec.task.output_dim(), Activation::Identity, rng);
        Self::new(feature_layers, head, spec.output_head())
    }

    /// Number of blocks `S` (= feature dimension).
    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.head.in_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.feature_layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.head.out_dim()
    }

    pub fn output_head(&self) -> OutputHead {
        self.output_head
    }

    pub fn feature_layers(&self) -> &[Layer] {
        &self.feature_layers
    }

    pub fn head(&self) -> &Layer {
        &self.head
    }

    /// Parameter-version counter; caches are only valid at the version that
    /// produced them.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn assignment_seed(&self) -> Option<u64> {
        self.assignment_seed
    }

    pub fn set_assignment_seed(&mut self, seed: Option<u64>) {
        self.assignment_seed = seed;
    }

    pub fn param_count(&self) -> usize {
        self.feature_layers
            .iter()
            .map(Layer::param_count)
            .sum::<usize>()
            + self.head.param_count()
    }

    /// Mutable access to all layers (features first, head last). Any mutable
    /// access invalidates outstanding feature caches.
    pub fn layers_mut(&mut self) -> Vec<&mut Layer> {
        self.version += 1;
        let mut refs: Vec<&mut Layer> = self.feature_layers.iter_mut().collect();
        refs.push(&mut self.head);
        refs
    }

    /// The plain composed network `M ∘ F`, i.e. the generator with the unit
    /// weight vector. Forwarding the result is bitwise identical to
    /// `self.forward(x, ones)`.
    pub fn compose(&self) -> DenseNet {
        let mut layers = self.feature_layers.clone();
        layers.push(self.head.clone());
        DenseNet::new(layers, self.output_head).expect("generator layers always chain")
    }

    /// `M(F(x) ⊙ alpha)`.
    pub fn forward(&self, x: &Matrix, alpha: &BootstrapAlpha) -> Result<Matrix> {
        self.check_alpha(alpha)?;
        forward_scaled(
            &self.feature_layers,
            &self.head,
            self.output_head,
            x,
            alpha.values(),
        )
    }

    /// Like [`forward`](Self::forward) but also returns the pre-softmax head
    /// output (logits). For regression the two are identical.
    pub fn forward_with_logits(
        &self,
        x: &Matrix,
        alpha: &BootstrapAlpha,
    ) -> Result<(Matrix, Matrix)> {
        self.check_alpha(alpha)?;
        let trace = forward_scaled_trace(
            &self.feature_layers,
            &self.head,
            self.output_head,
            x,
            alpha.values(),
        )?;
        Ok((trace.output, trace.head_linear))
    }

    fn check_alpha(&self, alpha: &BootstrapAlpha) -> Result<()> {
        if alpha.len() != self.num_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "alpha of length {} for S = {}",
                alpha.len(),
                self.num_blocks()
            )));
        }
        Ok(())
    }

    /// Evaluate the feature extractor once for a fixed input batch.
    pub fn cache_features(&self, x: &Matrix) -> Result<CachedFeatures> {
        if x.cols() != self.input_dim() {
            return Err(Error::LayerShapeMismatch {
                layer: 0,
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        let mut cur = self.feature_layers[0].forward_batch(x);
        for layer in &self.feature_layers[1..] {
            cur = layer.forward_batch(&cur);
        }
        Ok(CachedFeatures {
            phi: cur,
            source_net_version: self.version,
        })
    }

    /// Head-only evaluation against cached features. Produces exactly the
    /// same values as [`forward`](Self::forward) on the cached inputs.
    pub fn predict_cached(
        &self,
        cache: &CachedFeatures,
        alpha: &BootstrapAlpha,
    ) -> Result<Matrix> {
        Ok(self.predict_cached_with_logits(cache, alpha)?.0)
    }

    fn predict_cached_with_logits(
        &self,
        cache: &CachedFeatures,
        alpha: &BootstrapAlpha,
    ) -> Result<(Matrix, Matrix)> {
        self.check_alpha(alpha)?;
        if cache.source_net_version != self.version {
            return Err(Error::StaleCache {
                cache: cache.source_net_version,
                net: self.version,
            });
        }
        let mut scaled = cache.phi.clone();
        for row in scaled.iter_rows_mut() {
            for (v, s) in row.iter_mut().zip(alpha.values()) {
                *v *= s;
            }
        }
        let logits = self.head.forward_batch(&scaled);
        let mut out = logits.clone();
        self.output_head.apply(&mut out);
        Ok((out, logits))
    }

    /// Bootstrap prediction: cache the features once, then draw `b` fresh
    /// Dirichlet weight vectors and replay only the head. Returns one
    /// ensemble per input row.
    pub fn predict_bootstrap<R: rand::Rng + ?Sized>(
        &self,
        x: &Matrix,
        b: usize,
        rng: &mut R,
    ) -> Result<Vec<PredictionEnsemble>> {
        let alphas = self.draw_alphas(b, rng);
        self.predict_bootstrap_with_alphas(x, &alphas)
    }

    /// Fresh i.i.d. prediction-time weight draws.
    pub fn draw_alphas<R: rand::Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Vec<BootstrapAlpha> {
        (0..b)
            .map(|_| crate::bootstrap::sample_dirichlet_alpha(self.num_blocks(), rng))
            .collect()
    }

    /// Bootstrap prediction under a caller-supplied weight sequence.
    pub fn predict_bootstrap_with_alphas(
        &self,
        x: &Matrix,
        alphas: &[BootstrapAlpha],
    ) -> Result<Vec<PredictionEnsemble>> {
        Ok(self.predict_bootstrap_full(x, alphas)?.0)
    }

    /// Bootstrap prediction returning, per input, both the post-head ensemble
    /// and the raw pre-softmax logits (`b` rows each).
    pub fn predict_bootstrap_full(
        &self,
        x: &Matrix,
        alphas: &[BootstrapAlpha],
    ) -> Result<(Vec<PredictionEnsemble>, Vec<Matrix>)> {
        if alphas.is_empty() {
            return Err(Error::InvalidConfig("need at least one bootstrap draw".into()));
        }
        let cache = self.cache_features(x)?;
        let m = x.rows();
        let d = self.output_dim();
        let b = alphas.len();
        let mut samples = vec![Matrix::zeros(b, d); m];
        let mut logits = vec![Matrix::zeros(b, d); m];
        for (bi, alpha) in alphas.iter().enumerate() {
            let (out, lin) = self.predict_cached_with_logits(&cache, alpha)?;
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
}

/// Feature tensor `F(x)` for a fixed batch, tied to the network version that
/// produced it.
#[derive(Debug, Clone)]
pub struct CachedFeatures {
    phi: Matrix,
    source_net_version: u64,
}

impl CachedFeatures {
    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn source_net_version(&self) -> u64 {
        self.source_net_version
    }
}
