//! Uncertainty-quantification metrics: calibration, coverage, ensemble
//! diversity, out-of-distribution statistics and detection, per-class F1.
//!
//! All operations are pure functions over their inputs.

mod calibration;
mod coverage;
mod diversity;
mod f1;
mod logistic;
mod ood;

pub use calibration::{
    BinStat, CalibrationReport, DEFAULT_ECE_BINS, brier, calibration_report, ece, error_rate, nll,
};
pub use coverage::{CoverageResult, coverage_rate};
pub use diversity::{DiversityReport, diversity};
pub use f1::per_class_f1;
pub use ood::{
    DetectionMetrics, DetectorModel, OodFeatures, detection_metrics, fit_detector, ood_features,
};

#[cfg(test)]
pub(crate) use logistic::fit_logistic;
