//! Reproducible experiment drivers and their configuration.
//!
//! Every experiment is described by one JSON [`config::ExperimentConfig`];
//! [`run`] executes it into an output directory containing the effective
//! config copy, one CSV per metric table, and a `run_record.json` with the
//! config hash, code version, seeds, and wall time. Metric CSVs are a pure
//! function of the config and code version; wall-clock numbers are confined
//! to `timings.csv` and the run record.

mod active;
mod bench;
mod calibration;
pub mod config;
mod coverage;
pub mod csv_io;
mod imbalanced;
pub(crate) mod methods;
mod ood;
mod runner;
pub mod synth;

pub use config::{
    ActiveLearningParams, BenchParams, CalibrationParams, CoverageParams, CsvTask, DatasetSpec,
    ExperimentConfig, ExperimentKind, ImbalancedParams, MethodKind, ModelSpec, OodParams,
    RunRecord, SCHEMA_VERSION, SyntheticData,
};
pub use csv_io::{load_csv_dataset, write_csv_dataset};
pub use runner::{RunWriter, make_dataset, run};
pub use synth::{
    RegressionTarget, regression_grid, synth_gaussians, synth_imbalanced_gaussians,
    synth_regression, synth_two_moons,
};
