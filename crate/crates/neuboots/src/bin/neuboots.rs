//! `neuboots` command-line interface.
//!
//! Verbs: `train`, `predict`, `experiment <kind> --config <path>`, `bench`.
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use neuboots::baselines::ensemble_predict;
use neuboots::data::Task;
use neuboots::experiments::{
    CsvTask, DatasetSpec, ExperimentConfig, ExperimentKind, MethodKind, ModelSpec, SyntheticData,
    load_csv_dataset,
};
use neuboots::generator::{AlphaSampling, PredictionEnsemble, TrainConfig, fit_generator};
use neuboots::matrix::Matrix;
use neuboots::model_io::{ModelFile, load_model, save_model};
use neuboots::nn::{Activation, ArchSpec, LossKind, LrSchedule, OutputHead, SgdConfig};
use neuboots::rng::seeded_rng;
use neuboots::{Error, Result};

#[derive(Parser)]
#[command(name = "neuboots", version, about = "Single-training-run bootstrapped neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a bootstrap generator on a CSV dataset and save the model.
    Train(TrainArgs),
    /// Draw bootstrapped predictions from a saved model.
    Predict(PredictArgs),
    /// Run one of the built-in experiments from a JSON config.
    Experiment(ExperimentArgs),
    /// Prediction-speed benchmark (shortcut for `experiment bench_speed`).
    Bench(BenchArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training data (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long, default_value = "y")]
    label_column: String,
    /// Task kind: regression or classification.
    #[arg(long)]
    task: String,
    /// Hidden layer widths, comma separated. The last width is the block
    /// count S.
    #[arg(long, default_value = "32,32", value_delimiter = ',')]
    hidden: Vec<usize>,
    /// Hidden activation: relu, tanh, or identity.
    #[arg(long, default_value = "relu")]
    activation: String,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// constant or cosine_annealing.
    #[arg(long, default_value = "constant")]
    lr_schedule: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model path (.json for JSON, anything else for binary).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved model (from `neuboots train` or the library).
    #[arg(long)]
    model: PathBuf,
    /// Input data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Label column to drop from the input CSV, when it has one.
    #[arg(long)]
    label_column: Option<String>,
    /// Number of bootstrap samples B.
    #[arg(long, default_value_t = 100)]
    bootstrap_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Band level for scalar regression outputs.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// regression_coverage, calibration, active_learning, ood, imbalanced,
    /// or bench_speed.
    kind: String,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the config's seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the number of bootstrap samples B.
    #[arg(long)]
    b: Option<usize>,
    /// Override the number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the MC-dropout probability.
    #[arg(long)]
    dropout_p: Option<f64>,
    /// Override the coverage replication count.
    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Optional JSON config; a sensible default is used otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports --help/--version through Err; keep exit 0 for
            // those and 1 for genuine usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_of(&e))
        }
    }
}

fn exit_code_of(e: &Error) -> u8 {
    if e.is_numerical_error() || matches!(e, Error::StaleCache { .. }) {
        3
    } else if e.is_data_error()
        || matches!(
            e,
            Error::Io(_) | Error::DimensionMismatch(_) | Error::LayerShapeMismatch { .. }
        )
    {
        2
    } else {
        1
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => Err(Error::InvalidConfig(format!(
            "unknown activation '{other}'; expected relu, tanh, or identity"
        ))),
    }
}

fn parse_schedule(s: &str) -> Result<LrSchedule> {
    match s {
        "constant" => Ok(LrSchedule::Constant),
        "cosine_annealing" => Ok(LrSchedule::CosineAnnealing),
        other => Err(Error::InvalidConfig(format!(
            "unknown lr schedule '{other}'; expected constant or cosine_annealing"
        ))),
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let task = match args.task.as_str() {
        "regression" => CsvTask::Regression,
        "classification" => CsvTask::Classification,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown task '{other}'; expected regression or classification"
            )));
        }
    };
    let data = load_csv_dataset(&args.data, &args.label_column, task)?;
    let arch = ArchSpec::new(
        data.input_dim(),
        args.hidden.clone(),
        parse_activation(&args.activation)?,
        data.task(),
    );
    let sgd = SgdConfig::new(
        args.learning_rate,
        args.momentum,
        args.weight_decay,
        args.batch_size,
        args.epochs,
        parse_schedule(&args.lr_schedule)?,
        args.seed,
    )?;
    let loss = match data.task() {
        Task::Regression { .. } => LossKind::Mse,
        Task::Classification { .. } => LossKind::CrossEntropy,
    };
    let cfg = TrainConfig {
        sgd,
        loss,
        alpha: AlphaSampling::Dirichlet,
    };
    let (net, trace, _) = fit_generator(&data, &arch, &cfg, args.seed)?;
    let final_loss = trace.epoch_losses.last().copied().unwrap_or(f64::NAN);
    save_model(&args.out, &ModelFile::Generator(net))?;
    eprintln!(
        "trained generator on {} rows ({} epochs, final weighted loss {final_loss:.6}); saved to {}",
        data.len(),
        args.epochs,
        args.out.display()
    );
    Ok(())
}

fn load_feature_matrix(args: &PredictArgs) -> Result<Matrix> {
    // Reuse the dataset loader when a label column is present; otherwise read
    // every numeric column.
    if let Some(label) = &args.label_column {
        let ds = load_csv_dataset(&args.data, label, CsvTask::Regression)?;
        return Ok(ds.x().clone());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&args.data)
        .map_err(Error::from)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(Error::from)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(Error::from)?;
        let mut row = Vec::with_capacity(headers.len());
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::InvalidData(format!(
                    "row {}, column \"{}\": cannot parse '{}' as a number",
                    row_idx + 1,
                    headers[col],
                    cell
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidData("empty CSV (no data rows)".into()));
    }
    Matrix::from_rows(&rows)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let x = load_feature_matrix(&args)?;
    let mut rng = seeded_rng(args.seed);
    let b = args.bootstrap_samples;
    let (ensembles, softmax_output): (Vec<PredictionEnsemble>, bool) = match &model {
        ModelFile::Generator(net) => (
            net.predict_bootstrap(&x, b, &mut rng)?,
            net.output_head() == OutputHead::Softmax,
        ),
        // Ensembles answer with one sample per member; B is the member count.
        ModelFile::Ensemble(ens) => (
            ensemble_predict(ens, &x)?,
            ens.members()[0].output_head() == OutputHead::Softmax,
        ),
        ModelFile::Dropout(pred) => (
            pred.predict_stochastic(&x, b, &mut rng)?,
            pred.net().output_head() == OutputHead::Softmax,
        ),
    };

    let d = ensembles[0].output_dim();
    let mut writer = csv::Writer::from_path(&args.out).map_err(Error::from)?;
    let mut header = vec!["row".to_string()];
    for j in 0..d {
        header.push(format!("mean_{j}"));
    }
    for j in 0..d {
        header.push(format!("std_{j}"));
    }
    if softmax_output {
        header.push("pred_class".into());
        header.push("predictive_entropy".into());
    } else if d == 1 {
        header.push("lower".into());
        header.push("upper".into());
    }
    writer.write_record(&header).map_err(Error::from)?;

    for (i, e) in ensembles.iter().enumerate() {
        let mean = e.mean();
        let std = e.std();
        let mut rec = vec![i.to_string()];
        rec.extend(mean.iter().map(f64::to_string));
        rec.extend(std.iter().map(f64::to_string));
        if softmax_output {
            let pred = e.argmax_mean();
            let entropy: f64 = mean.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
            rec.push(pred.to_string());
            rec.push(entropy.to_string());
        } else if d == 1 {
            let band = e.band(args.level)?;
            rec.push(band.lower.to_string());
            rec.push(band.upper.to_string());
        }
        writer.write_record(&rec).map_err(Error::from)?;
    }
    writer.flush().map_err(Error::Io)?;
    eprintln!(
        "wrote {} prediction rows (B = {}) to {}",
        ensembles.len(),
        b,
        args.out.display()
    );
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let kind = ExperimentKind::parse(&args.kind)?;
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    cfg.kind = kind;
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    if let Some(b) = args.b {
        cfg.b = b;
    }
    if let Some(epochs) = args.epochs {
        cfg.sgd.epochs = epochs;
    }
    if let Some(p) = args.dropout_p {
        cfg.dropout_p = p;
    }
    if let Some(r) = args.replications {
        cfg.coverage.replications = r;
    }
    run_and_report(&cfg)
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            cfg.kind = ExperimentKind::BenchSpeed;
            cfg
        }
        None => default_bench_config(),
    };
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(b) = args.b {
        cfg.b = b;
    }
    if let Some(depth) = args.depth {
        cfg.bench.depth = depth;
    }
    if let Some(width) = args.width {
        cfg.bench.width = width;
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    run_and_report(&cfg)
}

fn default_bench_config() -> ExperimentConfig {
    ExperimentConfig {
        schema_version: neuboots::experiments::SCHEMA_VERSION,
        kind: ExperimentKind::BenchSpeed,
        dataset: DatasetSpec::Synthetic(SyntheticData::Gaussians {
            n: 512,
            classes: 10,
            radius: 3.0,
            spread: 0.6,
        }),
        methods: vec![MethodKind::Neuboots],
        b: 100,
        sgd: SgdConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 128,
            epochs: 3,
            lr_schedule: LrSchedule::Constant,
            seed: 1,
        },
        seeds: vec![1],
        output_dir: PathBuf::from("neuboots-bench"),
        model: ModelSpec {
            hidden: vec![128; 8],
            activation: Activation::Relu,
        },
        dropout_p: 0.2,
        coverage: Default::default(),
        calibration: Default::default(),
        active_learning: Default::default(),
        ood: Default::default(),
        imbalanced: Default::default(),
        bench: Default::default(),
    }
}

fn run_and_report(cfg: &ExperimentConfig) -> Result<()> {
    let record = neuboots::experiments::run(cfg)?;
    println!("{}", serde_json::to_string_pretty(&record)?);
    eprintln!(
        "experiment {} finished in {:.1}s; tables in {}",
        record.kind.name(),
        record.wall_clock_seconds,
        cfg.output_dir.display()
    );
    Ok(())
}
