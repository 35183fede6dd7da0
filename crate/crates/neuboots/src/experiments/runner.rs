//! Experiment dispatch, output-directory management, and provenance.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::experiments::config::{
    DatasetSpec, ExperimentConfig, ExperimentKind, RunRecord, SCHEMA_VERSION, SyntheticData,
};
use crate::experiments::csv_io::{load_csv_dataset, write_table};
use crate::experiments::synth::{
    RegressionTarget, synth_gaussians, synth_imbalanced_gaussians, synth_regression,
    synth_two_moons,
};
use crate::{Error, Result};

/// Run an experiment end to end: validates the config, creates the output
/// directory, writes the effective config copy, runs the driver, and writes
/// the run record.
pub fn run(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let mut writer = RunWriter::new(cfg)?;
    let summary = match cfg.kind {
        ExperimentKind::RegressionCoverage => super::coverage::run(cfg, &mut writer)?,
        ExperimentKind::Calibration => super::calibration::run(cfg, &mut writer)?,
        ExperimentKind::ActiveLearning => super::active::run(cfg, &mut writer)?,
        ExperimentKind::Ood => super::ood::run(cfg, &mut writer)?,
        ExperimentKind::Imbalanced => super::imbalanced::run(cfg, &mut writer)?,
        ExperimentKind::BenchSpeed => super::bench::run(cfg, &mut writer)?,
    };
    writer.finish(cfg, summary, started.elapsed().as_secs_f64())
}

/// Instantiate the configured dataset. Synthetic data is drawn from the given
/// RNG; CSV data ignores it. The second value is the true regression function
/// when one exists.
pub fn make_dataset(
    spec: &DatasetSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(Dataset, Option<RegressionTarget>)> {
    match spec {
        DatasetSpec::Csv {
            path,
            label_column,
            task,
        } => Ok((load_csv_dataset(path, label_column, *task)?, None)),
        DatasetSpec::Synthetic(s) => match s {
            SyntheticData::Sine { n, noise_sd } => {
                let (ds, t) = synth_regression(RegressionTarget::Sine, *n, *noise_sd, rng)?;
                Ok((ds, Some(t)))
            }
            SyntheticData::Step { n, noise_sd } => {
                let (ds, t) = synth_regression(RegressionTarget::Step, *n, *noise_sd, rng)?;
                Ok((ds, Some(t)))
            }
            SyntheticData::Bumps { n, noise_sd } => {
                let (ds, t) = synth_regression(RegressionTarget::Bumps, *n, *noise_sd, rng)?;
                Ok((ds, Some(t)))
            }
            SyntheticData::Linear { n, noise_sd } => {
                let (ds, t) = synth_regression(RegressionTarget::Linear, *n, *noise_sd, rng)?;
                Ok((ds, Some(t)))
            }
            SyntheticData::TwoMoons {
                n,
                noise,
                separation,
                label_noise,
            } => Ok((
                synth_two_moons(*n, *noise, *separation, *label_noise, rng)?,
                None,
            )),
            SyntheticData::Gaussians {
                n,
                classes,
                radius,
                spread,
            } => Ok((
                synth_gaussians(*n, *classes, *radius, *spread, (0.0, 0.0), rng)?,
                None,
            )),
            SyntheticData::ImbalancedGaussians {
                counts,
                radius,
                spread,
            } => Ok((synth_imbalanced_gaussians(counts, *radius, *spread, rng)?, None)),
        },
    }
}

/// Accumulates metric tables for one run and writes provenance files.
pub struct RunWriter {
    dir: PathBuf,
    tables: BTreeMap<String, String>,
}

impl RunWriter {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.output_dir)?;
        // Effective config copy: what this run actually used, defaults filled.
        let config_copy = serde_json::to_string_pretty(cfg)?;
        std::fs::write(cfg.output_dir.join("config.json"), config_copy)?;
        Ok(Self {
            dir: cfg.output_dir.clone(),
            tables: BTreeMap::new(),
        })
    }

    /// Write one named metric table.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let filename = format!("{name}.csv");
        write_table(&self.dir.join(&filename), header, rows)?;
        self.tables.insert(name.to_string(), filename);
        Ok(())
    }

    pub fn dir(&self) -> &PathBuf {
        &self.dir
    }

    fn finish(
        self,
        cfg: &ExperimentConfig,
        summary: serde_json::Value,
        wall_clock_seconds: f64,
    ) -> Result<RunRecord> {
        let record = RunRecord {
            schema_version: SCHEMA_VERSION,
            kind: cfg.kind,
            config_hash: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: cfg.seeds.clone(),
            wall_clock_seconds,
            tables: self.tables,
            summary,
        };
        std::fs::write(
            self.dir.join("run_record.json"),
            serde_json::to_string_pretty(&record)?,
        )?;
        Ok(record)
    }
}

/// Formats one float cell with the deterministic shortest-roundtrip rendering.
pub(crate) fn cell(v: f64) -> String {
    v.to_string()
}

pub(crate) fn require_synthetic_classification(cfg: &ExperimentConfig) -> Result<()> {
    match &cfg.dataset {
        DatasetSpec::Synthetic(
            SyntheticData::TwoMoons { .. }
            | SyntheticData::Gaussians { .. }
            | SyntheticData::ImbalancedGaussians { .. },
        )
        | DatasetSpec::Csv { .. } => Ok(()),
        DatasetSpec::Synthetic(_) => Err(Error::InvalidConfig(
            "this experiment needs a classification dataset".into(),
        )),
    }
}
