//! Frequentist coverage of nominal confidence bands on synthetic regression.
//!
//! Over `R` replications: draw a fresh dataset, train each method, build
//! pointwise bands on a fixed grid, and record whether each band contains the
//! true function. Reported numbers are per-grid-point coverage frequencies.

use rayon::prelude::*;

use crate::baselines::{ensemble_predict, mc_dropout_train, standard_bootstrap_train};
use crate::bootstrap::assign_blocks;
use crate::data::Task;
use crate::experiments::config::{DatasetSpec, ExperimentConfig, MethodKind};
use crate::experiments::runner::{RunWriter, cell, make_dataset};
use crate::experiments::synth::regression_grid;
use crate::generator::{AlphaSampling, GeneratorNet, TrainConfig, confidence_band};
use crate::matrix::Matrix;
use crate::metrics::coverage_rate;
use crate::nn::{ArchSpec, LossKind};
use crate::rng::stream_rng;
use crate::{Error, Result};

const METHODS: &[MethodKind] = &[
    MethodKind::Neuboots,
    MethodKind::StandardBootstrap,
    MethodKind::McDropout,
];

pub(crate) fn run(cfg: &ExperimentConfig, writer: &mut RunWriter) -> Result<serde_json::Value> {
    if !matches!(cfg.dataset, DatasetSpec::Synthetic(_)) {
        return Err(Error::InvalidConfig(
            "regression_coverage needs a synthetic regression dataset (the truth must be known)"
                .into(),
        ));
    }
    let methods: Vec<MethodKind> = METHODS
        .iter()
        .copied()
        .filter(|m| cfg.methods.contains(m))
        .collect();
    if methods.is_empty() {
        return Err(Error::InvalidConfig(
            "no coverage-capable methods requested (neuboots, standard_bootstrap, mc_dropout)"
                .into(),
        ));
    }

    let grid = regression_grid(cfg.coverage.grid_points);
    let grid_x = Matrix::column(&grid);
    let level = cfg.coverage.level;
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidConfig(format!("bad level {level}")));
    }
    let master = cfg.seeds[0];
    let reps = cfg.coverage.replications;

    // Each replication: draw data, fit every requested method on it, band it.
    let per_rep: Vec<Result<Vec<Vec<bool>>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            replicate(cfg, &methods, &grid_x, level, master, r).map_err(|e| Error::Replication {
                index: r,
                source: Box::new(e),
            })
        })
        .collect();

    let mut counts = vec![vec![0usize; grid.len()]; methods.len()];
    for rep in per_rep {
        let rep = rep?;
        for (mc, method_cov) in counts.iter_mut().zip(&rep) {
            for (c, &covered) in mc.iter_mut().zip(method_cov) {
                *c += usize::from(covered);
            }
        }
    }

    // Truth on the grid (noise-free).
    let mut truth_rng = stream_rng(master, u64::MAX);
    let (_, target) = make_dataset(&cfg.dataset, &mut truth_rng)?;
    let target = target.ok_or_else(|| {
        Error::InvalidConfig("regression_coverage needs a synthetic regression target".into())
    })?;
    let truth: Vec<f64> = grid.iter().map(|&x| target.eval(x)).collect();

    let mut header: Vec<&str> = vec!["x", "truth"];
    let coverage_cols: Vec<String> = methods
        .iter()
        .map(|m| format!("coverage_{}", m.name()))
        .collect();
    header.extend(coverage_cols.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut row = vec![cell(x), cell(truth[i])];
            for mc in &counts {
                row.push(cell(mc[i] as f64 / reps as f64));
            }
            row
        })
        .collect();
    writer.write_table("coverage_per_point", &header, &rows)?;

    let mut summary_rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for (m, mc) in methods.iter().zip(&counts) {
        let grid_avg =
            mc.iter().map(|&c| c as f64 / reps as f64).sum::<f64>() / grid.len() as f64;
        summary_rows.push(vec![
            m.name().to_string(),
            cell(grid_avg),
            reps.to_string(),
            cell(level),
        ]);
        summary.insert(
            format!("grid_avg_coverage_{}", m.name()),
            serde_json::json!(grid_avg),
        );
    }
    writer.write_table(
        "coverage_summary",
        &["method", "grid_avg_coverage", "replications", "level"],
        &summary_rows,
    )?;
    Ok(serde_json::Value::Object(summary))
}

fn replicate(
    cfg: &ExperimentConfig,
    methods: &[MethodKind],
    grid_x: &Matrix,
    level: f64,
    master: u64,
    r: usize,
) -> Result<Vec<Vec<bool>>> {
    let base = (r as u64) << 4;
    let mut data_rng = stream_rng(master, base);
    let (data, target) = make_dataset(&cfg.dataset, &mut data_rng)?;
    let target = target.ok_or_else(|| {
        Error::InvalidConfig("regression_coverage needs a synthetic regression target".into())
    })?;
    if !matches!(data.task(), Task::Regression { output_dim: 1 }) {
        return Err(Error::InvalidConfig(
            "regression_coverage needs scalar regression data".into(),
        ));
    }
    let truth: Vec<f64> = grid_x.as_slice().iter().map(|&x| target.eval(x)).collect();
    let arch = ArchSpec::new(
        data.input_dim(),
        cfg.model.hidden.clone(),
        cfg.model.activation,
        data.task(),
    );

    let mut out = Vec::with_capacity(methods.len());
    for (mi, method) in methods.iter().enumerate() {
        let slot = base | (1 + mi as u64);
        let covered = match method {
            MethodKind::Neuboots => {
                let mut rng = stream_rng(master, slot);
                let mut net = GeneratorNet::from_spec(&arch, &mut rng)?;
                let assignment =
                    assign_blocks(None, data.len(), net.num_blocks(), &mut rng)?;
                let train_cfg = TrainConfig {
                    sgd: cfg.sgd,
                    loss: LossKind::Mse,
                    alpha: AlphaSampling::Dirichlet,
                };
                crate::generator::train(&mut net, &data, &assignment, &train_cfg, &mut rng)?;
                let ensembles = net.predict_bootstrap(grid_x, cfg.b, &mut rng)?;
                let bands = confidence_band(&ensembles, level)?;
                coverage_rate(&bands, &truth)?.per_point
            }
            MethodKind::StandardBootstrap => {
                let mut rng = stream_rng(master, slot);
                let mut sgd = cfg.sgd;
                if let Some(e) = cfg.coverage.sb_epochs {
                    sgd.epochs = e;
                }
                let ens = standard_bootstrap_train(
                    &arch,
                    &data,
                    cfg.coverage.sb_members,
                    &sgd,
                    LossKind::Mse,
                    &mut rng,
                )?;
                let ensembles = ensemble_predict(&ens, grid_x)?;
                let bands = confidence_band(&ensembles, level)?;
                coverage_rate(&bands, &truth)?.per_point
            }
            MethodKind::McDropout => {
                let mut rng = stream_rng(master, slot);
                let pred = mc_dropout_train(
                    &arch,
                    &data,
                    cfg.dropout_p,
                    &cfg.sgd,
                    LossKind::Mse,
                    &mut rng,
                )?;
                let ensembles = pred.predict_stochastic(grid_x, cfg.b, &mut rng)?;
                let bands = confidence_band(&ensembles, level)?;
                coverage_rate(&bands, &truth)?.per_point
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "method {} cannot produce confidence bands",
                    other.name()
                )));
            }
        };
        out.push(covered);
    }
    Ok(out)
}
