//! Calibration comparison: every requested method trains on the same split,
//! and its ensemble-mean predictions are scored on the held-out test set
//! (error rate / ECE / NLL / Brier) together with ensemble diversity and
//! train/predict wall times.

use std::time::Instant;

use rayon::prelude::*;

use crate::experiments::config::{ExperimentConfig, MethodKind};
use crate::experiments::methods::{
    TrainedMethod, mean_prediction_matrix, member_hard_labels, predict_method, train_method,
};
use crate::experiments::runner::{RunWriter, cell, make_dataset, require_synthetic_classification};
use crate::metrics::{CalibrationReport, DiversityReport, calibration_report, diversity};
use crate::rng::stream_rng;
use crate::{Error, Result};

struct SeedResult {
    seed: u64,
    rows: Vec<MethodResult>,
}

struct MethodResult {
    method: MethodKind,
    calibration: CalibrationReport,
    diversity: Option<DiversityReport>,
    train_seconds: f64,
    predict_seconds: f64,
}

pub(crate) fn run(cfg: &ExperimentConfig, writer: &mut RunWriter) -> Result<serde_json::Value> {
    require_synthetic_classification(cfg)?;
    let methods: Vec<MethodKind> = cfg
        .methods
        .iter()
        .copied()
        .filter(|m| *m != MethodKind::Random)
        .collect();
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no trainable methods requested".into()));
    }

    let results: Vec<Result<SeedResult>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &methods, seed))
        .collect();

    let mut metric_rows = Vec::new();
    let mut diversity_rows = Vec::new();
    let mut timing_rows = Vec::new();
    let mut collected = Vec::new();
    for r in results {
        let r = r?;
        for m in &r.rows {
            metric_rows.push(vec![
                r.seed.to_string(),
                m.method.name().to_string(),
                cell(m.calibration.error_rate),
                cell(m.calibration.ece),
                cell(m.calibration.nll),
                cell(m.calibration.brier),
            ]);
            if let Some(d) = &m.diversity {
                diversity_rows.push(vec![
                    r.seed.to_string(),
                    m.method.name().to_string(),
                    d.ratio_error.map(cell).unwrap_or_default(),
                    d.q_statistic.map(cell).unwrap_or_default(),
                    d.correlation.map(cell).unwrap_or_default(),
                    cell(100.0 * d.disagreement),
                    d.pairs.to_string(),
                ]);
            }
            timing_rows.push(vec![
                r.seed.to_string(),
                m.method.name().to_string(),
                cell(m.train_seconds),
                cell(m.predict_seconds),
            ]);
        }
        collected.push(r);
    }

    writer.write_table(
        "calibration_metrics",
        &["seed", "method", "error_rate_pct", "ece_pct", "nll_nats", "brier_scaled"],
        &metric_rows,
    )?;
    writer.write_table(
        "diversity_metrics",
        &[
            "seed",
            "method",
            "ratio_error",
            "q_statistic",
            "correlation",
            "disagreement_pct",
            "pairs",
        ],
        &diversity_rows,
    )?;
    // Wall-clock table: measurements, excluded from the bit-identical
    // reproducibility contract.
    writer.write_table(
        "timings",
        &["seed", "method", "train_seconds", "predict_seconds"],
        &timing_rows,
    )?;

    // Seed-averaged summary, with times relative to the baseline when run.
    let mut summary = serde_json::Map::new();
    for method in &methods {
        let picks: Vec<&MethodResult> = collected
            .iter()
            .flat_map(|r| r.rows.iter())
            .filter(|m| m.method == *method)
            .collect();
        let n = picks.len() as f64;
        let avg = |f: fn(&MethodResult) -> f64| picks.iter().map(|m| f(m)).sum::<f64>() / n;
        summary.insert(
            method.name().to_string(),
            serde_json::json!({
                "error_rate_pct": avg(|m| m.calibration.error_rate),
                "ece_pct": avg(|m| m.calibration.ece),
                "nll_nats": avg(|m| m.calibration.nll),
                "brier_scaled": avg(|m| m.calibration.brier),
                "train_seconds": avg(|m| m.train_seconds),
                "predict_seconds": avg(|m| m.predict_seconds),
            }),
        );
    }
    if methods.contains(&MethodKind::Baseline) {
        let base_train: f64 = summary[MethodKind::Baseline.name()]["train_seconds"]
            .as_f64()
            .unwrap_or(f64::NAN);
        let base_predict: f64 = summary[MethodKind::Baseline.name()]["predict_seconds"]
            .as_f64()
            .unwrap_or(f64::NAN);
        let mut relative = serde_json::Map::new();
        for method in &methods {
            let t = summary[method.name()]["train_seconds"].as_f64().unwrap_or(f64::NAN);
            let p = summary[method.name()]["predict_seconds"].as_f64().unwrap_or(f64::NAN);
            relative.insert(
                method.name().to_string(),
                serde_json::json!({
                    "relative_training_time": t / base_train,
                    "relative_prediction_time": p / base_predict,
                }),
            );
        }
        summary.insert("relative_times".into(), serde_json::Value::Object(relative));
    }
    Ok(serde_json::Value::Object(summary))
}

fn run_seed(cfg: &ExperimentConfig, methods: &[MethodKind], seed: u64) -> Result<SeedResult> {
    let mut data_rng = stream_rng(seed, 0xDA7A);
    let (data, _) = make_dataset(&cfg.dataset, &mut data_rng)?;
    let mut split_rng = stream_rng(seed, 0x5917);
    let (train, test) = data.split(cfg.calibration.test_fraction, &mut split_rng)?;
    let labels = test
        .class_labels()
        .ok_or_else(|| Error::InvalidConfig("calibration needs classification data".into()))?;

    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let t0 = Instant::now();
        let trained = train_method(method, &train, cfg, seed)?;
        let train_seconds = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let (ensembles, _) = predict_method(&trained, test.x(), cfg.b, seed)?;
        let predict_seconds = t1.elapsed().as_secs_f64();

        let mean_probs = mean_prediction_matrix(&ensembles);
        let calibration = calibration_report(&mean_probs, labels, cfg.calibration.ece_bins)?;
        let diversity_report = if ensembles
            .first()
            .is_some_and(|e| e.size() >= 2 && !matches!(trained, TrainedMethod::Plain(_)))
        {
            Some(diversity(&member_hard_labels(&ensembles), labels)?)
        } else {
            None
        };
        rows.push(MethodResult {
            method,
            calibration,
            diversity: diversity_report,
            train_seconds,
            predict_seconds,
        });
    }
    Ok(SeedResult { seed, rows })
}
