//! Experiment configuration and run records.
//!
//! A run is a pure function of its config file and the code version: every
//! random choice flows from the `seeds` list, and re-running the same config
//! reproduces the metric CSVs byte for byte. Wall-clock measurements are kept
//! out of the metric tables (they live in `timings.csv` and the run record).

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::nn::{Activation, SgdConfig};
use crate::{Error, Result};

/// Current config schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Experiment kinds driven by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RegressionCoverage,
    Calibration,
    ActiveLearning,
    Ood,
    Imbalanced,
    BenchSpeed,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::RegressionCoverage => "regression_coverage",
            ExperimentKind::Calibration => "calibration",
            ExperimentKind::ActiveLearning => "active_learning",
            ExperimentKind::Ood => "ood",
            ExperimentKind::Imbalanced => "imbalanced",
            ExperimentKind::BenchSpeed => "bench_speed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "regression_coverage" => Ok(Self::RegressionCoverage),
            "calibration" => Ok(Self::Calibration),
            "active_learning" => Ok(Self::ActiveLearning),
            "ood" => Ok(Self::Ood),
            "imbalanced" => Ok(Self::Imbalanced),
            "bench_speed" => Ok(Self::BenchSpeed),
            other => Err(Error::InvalidConfig(format!(
                "unknown experiment kind '{other}'; expected one of regression_coverage, \
                 calibration, active_learning, ood, imbalanced, bench_speed"
            ))),
        }
    }
}

/// Methods an experiment can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    /// The bootstrap generator.
    Neuboots,
    /// Plain single network, no ensembling.
    Baseline,
    StandardBootstrap,
    Rwb,
    McDropout,
    DeepEnsemble,
    /// Random acquisition control (active learning only).
    Random,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Neuboots => "neuboots",
            MethodKind::Baseline => "baseline",
            MethodKind::StandardBootstrap => "standard_bootstrap",
            MethodKind::Rwb => "rwb",
            MethodKind::McDropout => "mc_dropout",
            MethodKind::DeepEnsemble => "deep_ensemble",
            MethodKind::Random => "random",
        }
    }
}

/// Synthetic dataset generators, with their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticData {
    Sine {
        n: usize,
        noise_sd: f64,
    },
    Step {
        n: usize,
        noise_sd: f64,
    },
    Bumps {
        n: usize,
        noise_sd: f64,
    },
    Linear {
        n: usize,
        noise_sd: f64,
    },
    TwoMoons {
        n: usize,
        noise: f64,
        #[serde(default)]
        separation: f64,
        #[serde(default)]
        label_noise: f64,
    },
    Gaussians {
        n: usize,
        classes: usize,
        radius: f64,
        spread: f64,
    },
    ImbalancedGaussians {
        counts: Vec<usize>,
        radius: f64,
        spread: f64,
    },
}

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic(SyntheticData),
    Csv {
        path: PathBuf,
        label_column: String,
        task: CsvTask,
    },
}

/// Task kind of a CSV label column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvTask {
    Regression,
    Classification,
}

/// Network shape shared by all methods in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_activation() -> Activation {
    Activation::Relu
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            activation: Activation::Relu,
        }
    }
}

fn default_level() -> f64 {
    0.95
}
fn default_replications() -> usize {
    100
}
fn default_grid_points() -> usize {
    33
}
fn default_sb_members() -> usize {
    20
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_ece_bins() -> usize {
    crate::metrics::DEFAULT_ECE_BINS
}
fn default_al_initial() -> usize {
    40
}
fn default_al_per_stage() -> usize {
    40
}
fn default_al_stages() -> usize {
    5
}
fn default_ood_shift() -> f64 {
    6.0
}
fn default_ood_fit_fraction() -> f64 {
    0.5
}
fn default_b_sweep() -> Vec<usize> {
    vec![2, 5, 10, 20, 30]
}
fn default_bench_depth() -> usize {
    8
}
fn default_bench_width() -> usize {
    128
}
fn default_bench_classes() -> usize {
    10
}
fn default_bench_rows() -> usize {
    256
}
fn default_bench_epochs() -> usize {
    3
}
fn default_test_per_class() -> usize {
    200
}
fn default_b() -> usize {
    100
}
fn default_dropout_p() -> f64 {
    0.2
}

/// Parameters for the regression-coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageParams {
    pub replications: usize,
    pub grid_points: usize,
    pub level: f64,
    /// Standard-bootstrap ensemble size.
    pub sb_members: usize,
    /// Override epochs for standard-bootstrap members (they retrain from
    /// scratch per member, so fewer epochs keep the baseline affordable).
    pub sb_epochs: Option<usize>,
}

impl Default for CoverageParams {
    fn default() -> Self {
        Self {
            replications: default_replications(),
            grid_points: default_grid_points(),
            level: default_level(),
            sb_members: default_sb_members(),
            sb_epochs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationParams {
    pub test_fraction: f64,
    pub ece_bins: usize,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            test_fraction: default_test_fraction(),
            ece_bins: default_ece_bins(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActiveLearningParams {
    pub initial_labeled: usize,
    pub acquisition_per_stage: usize,
    pub stages: usize,
    pub test_fraction: f64,
}

impl Default for ActiveLearningParams {
    fn default() -> Self {
        Self {
            initial_labeled: default_al_initial(),
            acquisition_per_stage: default_al_per_stage(),
            stages: default_al_stages(),
            test_fraction: default_test_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OodParams {
    /// Mean shift of the out-distribution, in units of the class spread.
    pub shift_sigmas: f64,
    /// Fraction of evaluation features used to fit the detector.
    pub fit_fraction: f64,
    pub b_sweep: Vec<usize>,
}

impl Default for OodParams {
    fn default() -> Self {
        Self {
            shift_sigmas: default_ood_shift(),
            fit_fraction: default_ood_fit_fraction(),
            b_sweep: default_b_sweep(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImbalancedParams {
    /// Balanced evaluation-set size per class.
    pub test_per_class: usize,
}

impl Default for ImbalancedParams {
    fn default() -> Self {
        Self {
            test_per_class: default_test_per_class(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchParams {
    /// Hidden-layer count of the benchmark feature extractor.
    pub depth: usize,
    /// Hidden width (equals the block count `S`).
    pub width: usize,
    pub classes: usize,
    /// Rows in the prediction batch.
    pub batch_rows: usize,
    /// Epochs measured for the training-overhead comparison.
    pub train_epochs: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            depth: default_bench_depth(),
            width: default_bench_width(),
            classes: default_bench_classes(),
            batch_rows: default_bench_rows(),
            train_epochs: default_bench_epochs(),
        }
    }
}

/// One experiment run, fully described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub dataset: DatasetSpec,
    pub methods: Vec<MethodKind>,
    /// Bootstrap samples drawn at prediction time.
    #[serde(default = "default_b")]
    pub b: usize,
    pub sgd: SgdConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_dropout_p")]
    pub dropout_p: f64,
    #[serde(default)]
    pub coverage: CoverageParams,
    #[serde(default)]
    pub calibration: CalibrationParams,
    #[serde(default)]
    pub active_learning: ActiveLearningParams,
    #[serde(default)]
    pub ood: OodParams,
    #[serde(default)]
    pub imbalanced: ImbalancedParams,
    #[serde(default)]
    pub bench: BenchParams,
}

impl ExperimentConfig {
    /// Parse and validate a JSON config file.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema_version {} not supported (expected {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds list is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods list is empty".into()));
        }
        if self.b == 0 {
            return Err(Error::InvalidConfig("b must be positive".into()));
        }
        if !(0.0 < self.dropout_p && self.dropout_p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dropout_p must be in (0,1), got {}",
                self.dropout_p
            )));
        }
        self.sgd.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Provenance and summary of one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub wall_clock_seconds: f64,
    /// Table name -> CSV filename inside the output directory.
    pub tables: BTreeMap<String, String>,
    /// Deterministic headline numbers for quick inspection.
    pub summary: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "schema_version": 1,
            "kind": "calibration",
            "dataset": {"synthetic": {"name": "two_moons", "n": 200, "noise": 0.2}},
            "methods": ["neuboots", "baseline"],
            "sgd": {
                "learning_rate": 0.05, "momentum": 0.9, "weight_decay": 0.0,
                "batch_size": 32, "epochs": 10, "lr_schedule": "constant", "seed": 0
            },
            "seeds": [1, 2],
            "output_dir": "/tmp/out"
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(&minimal_json()).unwrap();
        assert_eq!(cfg.b, 100);
        assert_eq!(cfg.calibration.ece_bins, 15);
        assert_eq!(cfg.ood.b_sweep, vec![2, 5, 10, 20, 30]);
        assert!((cfg.dropout_p - 0.2).abs() < 1e-15);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = minimal_json().replace("\"seeds\"", "\"sseeds\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json(&minimal_json()).unwrap();
        let b = ExperimentConfig::from_json(&minimal_json()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seeds.push(3);
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let bad = minimal_json().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }
}
