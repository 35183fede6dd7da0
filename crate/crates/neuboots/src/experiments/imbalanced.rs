//! Per-class F1 on imbalanced training data, evaluated on a balanced set.

use rayon::prelude::*;

use crate::experiments::config::{DatasetSpec, ExperimentConfig, MethodKind, SyntheticData};
use crate::experiments::methods::{mean_prediction_matrix, predict_method, train_method};
use crate::experiments::runner::{RunWriter, cell, make_dataset};
use crate::experiments::synth::synth_imbalanced_gaussians;
use crate::generator::argmax;
use crate::metrics::per_class_f1;
use crate::rng::stream_rng;
use crate::{Error, Result};

struct SeedOut {
    seed: u64,
    per_method: Vec<(MethodKind, Vec<f64>)>,
}

pub(crate) fn run(cfg: &ExperimentConfig, writer: &mut RunWriter) -> Result<serde_json::Value> {
    let counts = match &cfg.dataset {
        DatasetSpec::Synthetic(SyntheticData::ImbalancedGaussians { counts, .. }) => counts.clone(),
        _ => {
            return Err(Error::InvalidConfig(
                "imbalanced needs the imbalanced_gaussians dataset".into(),
            ));
        }
    };
    let k = counts.len();
    let methods: Vec<MethodKind> = cfg
        .methods
        .iter()
        .copied()
        .filter(|m| *m != MethodKind::Random)
        .collect();

    let results: Vec<Result<SeedOut>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &methods, seed))
        .collect();

    let mut rows = Vec::new();
    let mut collected = Vec::new();
    for r in results {
        let r = r?;
        for (method, f1s) in &r.per_method {
            for (class, f1) in f1s.iter().enumerate() {
                rows.push(vec![
                    r.seed.to_string(),
                    method.name().to_string(),
                    class.to_string(),
                    counts[class].to_string(),
                    cell(*f1),
                ]);
            }
        }
        collected.push(r);
    }
    writer.write_table(
        "per_class_f1",
        &["seed", "method", "class", "train_count", "f1"],
        &rows,
    )?;

    // Minority = fewest training samples, majority = most.
    let minority = (0..k).min_by_key(|&c| counts[c]).unwrap();
    let majority = (0..k).max_by_key(|&c| counts[c]).unwrap();
    let mut summary_rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for &method in &methods {
        let picks: Vec<&Vec<f64>> = collected
            .iter()
            .flat_map(|r| r.per_method.iter())
            .filter(|(m, _)| *m == method)
            .map(|(_, f)| f)
            .collect();
        let n = picks.len() as f64;
        let min_f1 = picks.iter().map(|f| f[minority]).sum::<f64>() / n;
        let maj_f1 = picks.iter().map(|f| f[majority]).sum::<f64>() / n;
        let macro_f1 =
            picks.iter().map(|f| f.iter().sum::<f64>() / k as f64).sum::<f64>() / n;
        summary_rows.push(vec![
            method.name().to_string(),
            cell(min_f1),
            cell(maj_f1),
            cell(macro_f1),
        ]);
        summary.insert(
            method.name().to_string(),
            serde_json::json!({
                "minority_f1": min_f1,
                "majority_f1": maj_f1,
                "macro_f1": macro_f1,
            }),
        );
    }
    writer.write_table(
        "f1_summary",
        &["method", "minority_f1", "majority_f1", "macro_f1"],
        &summary_rows,
    )?;
    summary.insert("minority_class".into(), serde_json::json!(minority));
    summary.insert("majority_class".into(), serde_json::json!(majority));
    Ok(serde_json::Value::Object(summary))
}

fn run_seed(cfg: &ExperimentConfig, methods: &[MethodKind], seed: u64) -> Result<SeedOut> {
    let mut train_rng = stream_rng(seed, 0xDA7A);
    let (train_data, _) = make_dataset(&cfg.dataset, &mut train_rng)?;
    let (radius, spread, k) = match &cfg.dataset {
        DatasetSpec::Synthetic(SyntheticData::ImbalancedGaussians {
            counts,
            radius,
            spread,
        }) => (*radius, *spread, counts.len()),
        _ => unreachable!("validated by run"),
    };
    // Balanced evaluation set from the same class-conditional distributions.
    let mut test_rng = stream_rng(seed, 0x7E57);
    let test = synth_imbalanced_gaussians(
        &vec![cfg.imbalanced.test_per_class; k],
        radius,
        spread,
        &mut test_rng,
    )?;
    let test_labels = test.class_labels().unwrap().to_vec();

    let mut per_method = Vec::with_capacity(methods.len());
    for &method in methods {
        let trained = train_method(method, &train_data, cfg, seed)?;
        let (ensembles, _) = predict_method(&trained, test.x(), cfg.b, seed)?;
        let probs = mean_prediction_matrix(&ensembles);
        let predictions: Vec<usize> = probs.iter_rows().map(argmax).collect();
        let f1 = per_class_f1(&predictions, &test_labels, k)?;
        per_method.push((method, f1));
    }
    Ok(SeedOut { seed, per_method })
}
