//! Pool-based active learning: train on the labeled pool, score the
//! unlabeled pool by the predictive entropy of the ensemble-mean
//! distribution, move the top scorers into the pool, repeat. A random
//! acquisition control runs the same loop with random scores.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::experiments::config::{ExperimentConfig, MethodKind};
use crate::experiments::methods::{mean_prediction_matrix, predict_method, train_method};
use crate::experiments::runner::{RunWriter, cell, make_dataset, require_synthetic_classification};
use crate::generator::argmax;
use crate::rng::stream_rng;
use crate::{Error, Result};

struct StageRow {
    seed: u64,
    method: MethodKind,
    stage: usize,
    labeled: usize,
    accuracy: f64,
}

pub(crate) fn run(cfg: &ExperimentConfig, writer: &mut RunWriter) -> Result<serde_json::Value> {
    require_synthetic_classification(cfg)?;
    if cfg.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }

    let results: Vec<Result<Vec<StageRow>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed))
        .collect();

    let mut rows = Vec::new();
    let mut table = Vec::new();
    for r in results {
        for row in r? {
            table.push(vec![
                row.seed.to_string(),
                row.method.name().to_string(),
                row.stage.to_string(),
                row.labeled.to_string(),
                cell(row.accuracy),
            ]);
            rows.push(row);
        }
    }
    writer.write_table(
        "learning_curves",
        &["seed", "method", "stage", "labeled", "test_accuracy"],
        &table,
    )?;

    // Seed-averaged area under the learning curve and final accuracy.
    let mut summary = serde_json::Map::new();
    for &method in &cfg.methods {
        let picks: Vec<&StageRow> = rows.iter().filter(|r| r.method == method).collect();
        if picks.is_empty() {
            continue;
        }
        let stages = cfg.active_learning.stages;
        let aulc = picks.iter().map(|r| r.accuracy).sum::<f64>() / picks.len() as f64;
        let finals: Vec<f64> = picks
            .iter()
            .filter(|r| r.stage == stages)
            .map(|r| r.accuracy)
            .collect();
        let final_acc = finals.iter().sum::<f64>() / finals.len().max(1) as f64;
        summary.insert(
            method.name().to_string(),
            serde_json::json!({"aulc": aulc, "final_accuracy": final_acc}),
        );
    }
    Ok(serde_json::Value::Object(summary))
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<StageRow>> {
    let mut data_rng = stream_rng(seed, 0xDA7A);
    let (data, _) = make_dataset(&cfg.dataset, &mut data_rng)?;
    let mut split_rng = stream_rng(seed, 0x5917);
    let (pool, test) = data.split(cfg.active_learning.test_fraction, &mut split_rng)?;
    let test_labels = test
        .class_labels()
        .ok_or_else(|| Error::InvalidConfig("active learning needs classification data".into()))?;

    let params = &cfg.active_learning;
    if params.initial_labeled == 0 || params.initial_labeled >= pool.len() {
        return Err(Error::InvalidConfig(format!(
            "initial_labeled {} out of range for a pool of {}",
            params.initial_labeled,
            pool.len()
        )));
    }

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        rows.extend(run_method(cfg, method, &pool, &test, test_labels, seed)?);
    }
    Ok(rows)
}

fn run_method(
    cfg: &ExperimentConfig,
    method: MethodKind,
    pool: &Dataset,
    test: &Dataset,
    test_labels: &[usize],
    seed: u64,
) -> Result<Vec<StageRow>> {
    let params = &cfg.active_learning;
    // The random control isolates the acquisition rule: it trains the same
    // model family as the first non-random method in the list and differs
    // only in how it picks the next labels.
    let trainer = if method == MethodKind::Random {
        cfg.methods
            .iter()
            .copied()
            .find(|m| *m != MethodKind::Random)
            .unwrap_or(MethodKind::Baseline)
    } else {
        method
    };

    // Every method starts from the same initial labeled set, so curves
    // diverge only through acquisition.
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut init_rng = stream_rng(seed, 0xAC41);
    order.shuffle(&mut init_rng);
    let (labeled_init, rest) = order.split_at(params.initial_labeled);
    let mut labeled: Vec<usize> = labeled_init.to_vec();
    let mut unlabeled: Vec<usize> = rest.to_vec();

    let mut rows = Vec::new();
    for stage in 0..=params.stages {
        let train_set = pool.subset(&labeled)?;
        let stage_seed = crate::rng::derive_seed(seed, 0xA000 + stage as u64);
        let trained = train_method(trainer, &train_set, cfg, stage_seed)?;

        // Test accuracy of the ensemble-mean prediction.
        let (test_ensembles, _) = predict_method(&trained, test.x(), cfg.b, stage_seed)?;
        let mean_probs = mean_prediction_matrix(&test_ensembles);
        let correct = mean_probs
            .iter_rows()
            .zip(test_labels)
            .filter(|&(row, &l)| argmax(row) == l)
            .count();
        rows.push(StageRow {
            seed,
            method,
            stage,
            labeled: labeled.len(),
            accuracy: correct as f64 / test_labels.len() as f64,
        });

        if stage == params.stages || unlabeled.is_empty() {
            break;
        }

        // Score the unlabeled pool and move the top scorers in.
        let q = params.acquisition_per_stage.min(unlabeled.len());
        let picked: Vec<usize> = if method == MethodKind::Random {
            let mut rng = stream_rng(seed, 0xACc0 + stage as u64);
            let mut candidates = unlabeled.clone();
            candidates.shuffle(&mut rng);
            candidates.truncate(q);
            candidates
        } else {
            let pool_x = pool.x().gather_rows(&unlabeled);
            let (ensembles, _) = predict_method(&trained, &pool_x, cfg.b, stage_seed ^ 1)?;
            let mut scored: Vec<(usize, f64)> = unlabeled
                .iter()
                .zip(&ensembles)
                .map(|(&idx, e)| {
                    let mean = e.mean();
                    let entropy: f64 = mean
                        .iter()
                        .filter(|&&p| p > 0.0)
                        .map(|&p| -p * p.ln())
                        .sum();
                    (idx, entropy)
                })
                .collect();
            // Highest entropy first; ties broken by pool index for determinism.
            scored.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("finite entropy")
                    .then_with(|| a.0.cmp(&b.0))
            });
            scored.into_iter().take(q).map(|(idx, _)| idx).collect()
        };
        labeled.extend(&picked);
        unlabeled.retain(|i| !picked.contains(i));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{DatasetSpec, SyntheticData};
    use crate::nn::{LrSchedule, SgdConfig};

    fn tiny_config(dir: &std::path::Path) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: 1,
            kind: crate::experiments::config::ExperimentKind::ActiveLearning,
            dataset: DatasetSpec::Synthetic(SyntheticData::TwoMoons {
                n: 160,
                noise: 0.25,
                separation: 0.0,
                label_noise: 0.0,
            }),
            methods: vec![MethodKind::Baseline, MethodKind::Random],
            b: 4,
            sgd: SgdConfig {
                learning_rate: 0.1,
                momentum: 0.9,
                weight_decay: 0.0,
                batch_size: 16,
                epochs: 15,
                lr_schedule: LrSchedule::Constant,
                seed: 0,
            },
            seeds: vec![1],
            output_dir: dir.to_path_buf(),
            model: crate::experiments::config::ModelSpec {
                hidden: vec![8],
                activation: crate::nn::Activation::Tanh,
            },
            dropout_p: 0.2,
            coverage: Default::default(),
            calibration: Default::default(),
            active_learning: crate::experiments::config::ActiveLearningParams {
                initial_labeled: 16,
                acquisition_per_stage: 16,
                stages: 2,
                test_fraction: 0.3,
            },
            ood: Default::default(),
            imbalanced: Default::default(),
            bench: Default::default(),
        }
    }

    #[test]
    fn zero_acquisition_gives_flat_labeled_count() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.active_learning.acquisition_per_stage = 0;
        let rows = run_seed(&cfg, 7).unwrap();
        for row in &rows {
            assert_eq!(row.labeled, 16, "labeled pool must not grow with q = 0");
        }
    }

    #[test]
    fn labeled_count_grows_by_q_per_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let rows = run_seed(&cfg, 7).unwrap();
        let baseline_rows: Vec<_> = rows
            .iter()
            .filter(|r| r.method == MethodKind::Baseline)
            .collect();
        assert_eq!(baseline_rows.len(), 3);
        assert_eq!(baseline_rows[0].labeled, 16);
        assert_eq!(baseline_rows[1].labeled, 32);
        assert_eq!(baseline_rows[2].labeled, 48);
    }
}
