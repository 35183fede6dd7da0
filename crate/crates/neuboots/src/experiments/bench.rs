//! Prediction-speed and training-overhead benchmark.
//!
//! Asserts the cache-soundness identity first (the cached head-replay path
//! must equal the naive forward loop), then times three prediction paths on
//! one architecture and input batch: cached bootstrap replay, the naive
//! B-forward loop, and B Monte-Carlo-dropout passes. Also measures per-epoch
//! training overhead of the generator against plain training.

use std::time::Instant;

use rand::Rng;

use crate::baselines::DropoutPredictor;
use crate::bootstrap::assign_blocks;
use crate::data::{Dataset, Task};
use crate::experiments::config::ExperimentConfig;
use crate::experiments::runner::{RunWriter, cell};
use crate::generator::{AlphaSampling, GeneratorNet, TrainConfig};
use crate::matrix::Matrix;
use crate::nn::{ArchSpec, LossKind, train_dense};
use crate::rng::stream_rng;
use crate::{Error, Result};

pub(crate) fn run(cfg: &ExperimentConfig, writer: &mut RunWriter) -> Result<serde_json::Value> {
    let bench = &cfg.bench;
    let seed = cfg.seeds[0];
    let input_dim = 2;
    let arch = ArchSpec::new(
        input_dim,
        vec![bench.width; bench.depth],
        cfg.model.activation,
        Task::Classification {
            classes: bench.classes,
        },
    );

    let mut rng = stream_rng(seed, 0xBE7C);
    let net = GeneratorNet::from_spec(&arch, &mut rng)?;
    let x = Matrix::from_rows(
        &(0..bench.batch_rows)
            .map(|_| (0..input_dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect::<Vec<_>>(),
    )?;
    let alphas = net.draw_alphas(cfg.b, &mut rng);

    // Cache soundness gate: the cached path must reproduce the naive loop.
    let (cached, _) = net.predict_bootstrap_full(&x, &alphas)?;
    let mut max_diff = 0.0f64;
    for (bi, alpha) in alphas.iter().enumerate() {
        let naive = net.forward(&x, alpha)?;
        for (i, ens) in cached.iter().enumerate() {
            for (a, b) in ens.samples().row(bi).iter().zip(naive.row(i)) {
                max_diff = max_diff.max((a - b).abs());
            }
        }
    }
    writer.write_table(
        "cache_soundness",
        &["b", "batch_rows", "max_abs_diff", "pass"],
        &[vec![
            cfg.b.to_string(),
            bench.batch_rows.to_string(),
            cell(max_diff),
            (max_diff <= 1e-12).to_string(),
        ]],
    )?;
    if max_diff > 1e-12 {
        return Err(Error::InvalidData(format!(
            "cache soundness violated: max abs diff {max_diff}"
        )));
    }

    // Timed paths, best of three to damp scheduler noise.
    let time_of = |f: &mut dyn FnMut() -> Result<()>| -> Result<f64> {
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t0 = Instant::now();
            f()?;
            best = best.min(t0.elapsed().as_secs_f64());
        }
        Ok(best)
    };

    let cached_s = time_of(&mut || net.predict_bootstrap_with_alphas(&x, &alphas).map(|_| ()))?;
    let naive_s = time_of(&mut || {
        for alpha in &alphas {
            net.forward(&x, alpha)?;
        }
        Ok(())
    })?;
    let dropout = DropoutPredictor::new(net.compose(), cfg.dropout_p)?;
    let mut drop_rng = stream_rng(seed, 0xD409);
    let mcdrop_s = time_of(&mut || {
        dropout.predict_stochastic(&x, cfg.b, &mut drop_rng).map(|_| ())
    })?;

    // Training overhead: generator loop vs plain loop, same data and shapes.
    let train_data = synthetic_training_set(input_dim, 1024, bench.classes, seed)?;
    let mut sgd = cfg.sgd;
    sgd.epochs = bench.train_epochs;
    let mut gen_net = GeneratorNet::from_spec(&arch, &mut stream_rng(seed, 0x91))?;
    let assignment = assign_blocks(
        train_data.class_labels(),
        train_data.len(),
        gen_net.num_blocks(),
        &mut stream_rng(seed, 0x92),
    )?;
    let train_cfg = TrainConfig {
        sgd,
        loss: LossKind::CrossEntropy,
        alpha: AlphaSampling::Dirichlet,
    };
    let t0 = Instant::now();
    crate::generator::train(
        &mut gen_net,
        &train_data,
        &assignment,
        &train_cfg,
        &mut stream_rng(seed, 0x93),
    )?;
    let gen_train_s = t0.elapsed().as_secs_f64() / bench.train_epochs as f64;

    let mut plain = GeneratorNet::from_spec(&arch, &mut stream_rng(seed, 0x91))?.compose();
    let t1 = Instant::now();
    train_dense(
        &mut plain,
        &train_data,
        None,
        LossKind::CrossEntropy,
        &sgd,
        &mut stream_rng(seed, 0x93),
    )?;
    let plain_train_s = t1.elapsed().as_secs_f64() / bench.train_epochs as f64;

    let speedup_vs_mcdrop = mcdrop_s / cached_s;
    let speedup_vs_naive = naive_s / cached_s;
    let train_overhead = gen_train_s / plain_train_s - 1.0;

    writer.write_table(
        "timings",
        &["path", "seconds"],
        &[
            vec!["cached_bootstrap_predict".into(), cell(cached_s)],
            vec!["naive_forward_loop".into(), cell(naive_s)],
            vec!["mc_dropout_passes".into(), cell(mcdrop_s)],
            vec!["generator_train_per_epoch".into(), cell(gen_train_s)],
            vec!["plain_train_per_epoch".into(), cell(plain_train_s)],
        ],
    )?;

    Ok(serde_json::json!({
        "b": cfg.b,
        "depth": bench.depth,
        "width": bench.width,
        "batch_rows": bench.batch_rows,
        "max_abs_diff": max_diff,
        "cached_seconds": cached_s,
        "naive_seconds": naive_s,
        "mc_dropout_seconds": mcdrop_s,
        "speedup_cached_vs_mcdrop": speedup_vs_mcdrop,
        "speedup_cached_vs_naive": speedup_vs_naive,
        "train_seconds_per_epoch_generator": gen_train_s,
        "train_seconds_per_epoch_plain": plain_train_s,
        "train_overhead_fraction": train_overhead,
    }))
}

fn synthetic_training_set(
    input_dim: usize,
    n: usize,
    classes: usize,
    seed: u64,
) -> Result<Dataset> {
    debug_assert_eq!(input_dim, 2);
    crate::experiments::synth::synth_gaussians(
        n,
        classes,
        3.0,
        0.6,
        (0.0, 0.0),
        &mut stream_rng(seed, 0xDA7A),
    )
}
