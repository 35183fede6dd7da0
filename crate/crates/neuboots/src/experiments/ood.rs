//! Out-of-distribution detection: train a classifier in-distribution, build
//! the four uncertainty statistics from bootstrap ensembles on held-out
//! in-distribution data and on a mean-shifted out-distribution, fit the
//! logistic detector on one half, and score detection metrics on the other.
//! A sweep over the bootstrap sample count B records how the predictive
//! spread reacts.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::experiments::config::{DatasetSpec, ExperimentConfig, MethodKind, SyntheticData};
use crate::experiments::methods::{TrainedMethod, predict_method, train_method};
use crate::experiments::runner::{RunWriter, cell, make_dataset};
use crate::experiments::synth::synth_gaussians;
use crate::generator::PredictionEnsemble;
use crate::matrix::Matrix;
use crate::metrics::{DetectionMetrics, OodFeatures, detection_metrics, fit_detector, ood_features};
use crate::rng::stream_rng;
use crate::{Error, Result};

const METHODS: &[MethodKind] = &[
    MethodKind::Neuboots,
    MethodKind::McDropout,
    MethodKind::DeepEnsemble,
];

struct SeedOut {
    seed: u64,
    per_method: Vec<MethodOut>,
}

struct MethodOut {
    method: MethodKind,
    detection: DetectionMetrics,
    mean_logit_std_in: f64,
    mean_logit_std_out: f64,
    sweep: Vec<SweepRow>,
}

struct SweepRow {
    b: usize,
    prob_std_in: f64,
    prob_std_out: f64,
    logit_std_in: f64,
    logit_std_out: f64,
}

pub(crate) fn run(cfg: &ExperimentConfig, writer: &mut RunWriter) -> Result<serde_json::Value> {
    let methods: Vec<MethodKind> = METHODS
        .iter()
        .copied()
        .filter(|m| cfg.methods.contains(m))
        .collect();
    if methods.is_empty() {
        return Err(Error::InvalidConfig(
            "ood needs ensemble-capable methods (neuboots, mc_dropout, deep_ensemble)".into(),
        ));
    }
    if cfg.b < 2 {
        return Err(Error::InvalidConfig("ood needs b >= 2".into()));
    }

    let results: Vec<Result<SeedOut>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &methods, seed))
        .collect();

    let mut detection_rows = Vec::new();
    let mut sweep_rows = Vec::new();
    let mut collected = Vec::new();
    for r in results {
        let r = r?;
        for m in &r.per_method {
            detection_rows.push(vec![
                r.seed.to_string(),
                m.method.name().to_string(),
                cell(m.detection.tnr_at_tpr95),
                cell(m.detection.auroc),
                cell(m.detection.aupr_in),
                cell(m.detection.aupr_out),
                cell(m.detection.detection_accuracy),
                cell(m.mean_logit_std_in),
                cell(m.mean_logit_std_out),
            ]);
            for s in &m.sweep {
                sweep_rows.push(vec![
                    r.seed.to_string(),
                    m.method.name().to_string(),
                    s.b.to_string(),
                    cell(s.prob_std_in),
                    cell(s.prob_std_out),
                    cell(s.logit_std_in),
                    cell(s.logit_std_out),
                ]);
            }
        }
        collected.push(r);
    }

    writer.write_table(
        "detection",
        &[
            "seed",
            "method",
            "tnr_at_tpr95",
            "auroc",
            "aupr_in",
            "aupr_out",
            "detection_accuracy",
            "mean_logit_std_in",
            "mean_logit_std_out",
        ],
        &detection_rows,
    )?;
    writer.write_table(
        "b_sweep",
        &[
            "seed",
            "method",
            "b",
            "prob_std_in",
            "prob_std_out",
            "logit_std_in",
            "logit_std_out",
        ],
        &sweep_rows,
    )?;

    let mut summary = serde_json::Map::new();
    for &method in &methods {
        let picks: Vec<&MethodOut> = collected
            .iter()
            .flat_map(|r| r.per_method.iter())
            .filter(|m| m.method == method)
            .collect();
        let n = picks.len() as f64;
        summary.insert(
            method.name().to_string(),
            serde_json::json!({
                "auroc": picks.iter().map(|m| m.detection.auroc).sum::<f64>() / n,
                "tnr_at_tpr95": picks.iter().map(|m| m.detection.tnr_at_tpr95).sum::<f64>() / n,
                "detection_accuracy":
                    picks.iter().map(|m| m.detection.detection_accuracy).sum::<f64>() / n,
                "mean_logit_std_in": picks.iter().map(|m| m.mean_logit_std_in).sum::<f64>() / n,
                "mean_logit_std_out": picks.iter().map(|m| m.mean_logit_std_out).sum::<f64>() / n,
            }),
        );
    }
    Ok(serde_json::Value::Object(summary))
}

/// The in-distribution spec plus a mean-shifted copy for the out-distribution.
fn out_distribution(cfg: &ExperimentConfig, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSpec::Synthetic(SyntheticData::Gaussians {
            n,
            classes,
            radius,
            spread,
        }) => {
            let shift = cfg.ood.shift_sigmas * spread / std::f64::consts::SQRT_2;
            synth_gaussians(*n, *classes, *radius, *spread, (shift, shift), rng)
        }
        _ => Err(Error::InvalidConfig(
            "ood needs a synthetic gaussians dataset for the shifted out-distribution".into(),
        )),
    }
}

fn run_seed(cfg: &ExperimentConfig, methods: &[MethodKind], seed: u64) -> Result<SeedOut> {
    let mut train_rng = stream_rng(seed, 0xDA7A);
    let (train_data, _) = make_dataset(&cfg.dataset, &mut train_rng)?;
    let mut eval_rng = stream_rng(seed, 0xE7A1);
    let (in_eval, _) = make_dataset(&cfg.dataset, &mut eval_rng)?;
    let mut out_rng = stream_rng(seed, 0x007D);
    let out_eval = out_distribution(cfg, &mut out_rng)?;

    let mut per_method = Vec::with_capacity(methods.len());
    for &method in methods {
        let trained = train_method(method, &train_data, cfg, seed)?;

        let feats_in = features_for(&trained, in_eval.x(), cfg.b, seed ^ 0x1)?;
        let feats_out = features_for(&trained, out_eval.x(), cfg.b, seed ^ 0x2)?;
        let mean_logit_std_in =
            feats_in.iter().map(|f| f.logit_std).sum::<f64>() / feats_in.len() as f64;
        let mean_logit_std_out =
            feats_out.iter().map(|f| f.logit_std).sum::<f64>() / feats_out.len() as f64;

        // Split each side into detector-fitting and scoring halves.
        let mut split_rng = stream_rng(seed, 0xF17 ^ ((method as u64) << 20));
        let (fit_in, test_in) = split_features(&feats_in, cfg.ood.fit_fraction, &mut split_rng);
        let (fit_out, test_out) = split_features(&feats_out, cfg.ood.fit_fraction, &mut split_rng);
        let detector = fit_detector(&fit_in, &fit_out)?;
        let scores_in: Vec<f64> = test_in.iter().map(|f| detector.score(f)).collect();
        let scores_out: Vec<f64> = test_out.iter().map(|f| detector.score(f)).collect();
        let detection = detection_metrics(&scores_in, &scores_out)?;

        let mut sweep = Vec::new();
        for (bi, &b) in cfg.ood.b_sweep.iter().enumerate() {
            if b < 2 {
                return Err(Error::InvalidConfig("b_sweep entries must be >= 2".into()));
            }
            let sweep_seed = crate::rng::derive_seed(seed, 0xB0 + bi as u64);
            let (ens_in, log_in) = predict_method(&trained, in_eval.x(), b, sweep_seed)?;
            let (ens_out, log_out) = predict_method(&trained, out_eval.x(), b, sweep_seed ^ 1)?;
            sweep.push(SweepRow {
                b,
                prob_std_in: mean_prob_std(&ens_in),
                prob_std_out: mean_prob_std(&ens_out),
                logit_std_in: mean_logit_std(&ens_in, &log_in)?,
                logit_std_out: mean_logit_std(&ens_out, &log_out)?,
            });
        }

        per_method.push(MethodOut {
            method,
            detection,
            mean_logit_std_in,
            mean_logit_std_out,
            sweep,
        });
    }
    Ok(SeedOut { seed, per_method })
}

fn features_for(
    trained: &TrainedMethod,
    x: &Matrix,
    b: usize,
    seed: u64,
) -> Result<Vec<OodFeatures>> {
    let (ensembles, logits) = predict_method(trained, x, b, seed)?;
    ensembles
        .iter()
        .zip(&logits)
        .map(|(e, l)| ood_features(e, l))
        .collect()
}

fn split_features(
    feats: &[OodFeatures],
    fit_fraction: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<OodFeatures>, Vec<OodFeatures>) {
    let mut order: Vec<usize> = (0..feats.len()).collect();
    order.shuffle(rng);
    let n_fit = ((feats.len() as f64) * fit_fraction).round().max(1.0) as usize;
    let n_fit = n_fit.min(feats.len() - 1);
    let fit = order[..n_fit].iter().map(|&i| feats[i]).collect();
    let test = order[n_fit..].iter().map(|&i| feats[i]).collect();
    (fit, test)
}

fn mean_prob_std(ensembles: &[PredictionEnsemble]) -> f64 {
    let per_input: Vec<f64> = ensembles
        .iter()
        .map(|e| {
            let s = e.std();
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect();
    per_input.iter().sum::<f64>() / per_input.len().max(1) as f64
}

fn mean_logit_std(ensembles: &[PredictionEnsemble], logits: &[Matrix]) -> Result<f64> {
    let feats: Result<Vec<OodFeatures>> = ensembles
        .iter()
        .zip(logits)
        .map(|(e, l)| ood_features(e, l))
        .collect();
    let feats = feats?;
    Ok(feats.iter().map(|f| f.logit_std).sum::<f64>() / feats.len().max(1) as f64)
}
