//! Command-line workflow: generate or split datasets, inject
//! instance-dependent label noise, train, evaluate on clean data, and
//! assemble reports.
//!
//! Exit codes: 0 success, 2 configuration or argument problems, 3 missing
//! or malformed data.

use clap::{Args, Parser, Subcommand};
use evifuse::config::TrainConfig;
use evifuse::data::{load_dataset, save_dataset, split, ViewFormat};
use evifuse::metrics::{evaluate, write_metrics};
use evifuse::noisegen::{corrupt_dataset, load_records, records_to_truth, save_records};
use evifuse::report::{assemble, render_table, write_report};
use evifuse::synthetic::{generate, SyntheticSpec};
use evifuse::train::{run_training, TrainState};
use evifuse::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "evifuse",
    version,
    about = "Trusted multi-view classification under instance-dependent label noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    F64le,
    Csv,
}

impl From<FormatArg> for ViewFormat {
    fn from(f: FormatArg) -> ViewFormat {
        match f {
            FormatArg::F64le => ViewFormat::F64le,
            FormatArg::Csv => ViewFormat::Csv,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write the dataset into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Comma-separated feature dimension per view.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 8, 12])]
    views: Vec<usize>,
    /// Dimension of the shared latent space.
    #[arg(long, default_value_t = 5)]
    latent: usize,
    /// Class-center scale relative to unit within-class spread.
    #[arg(long, default_value_t = 1.9)]
    separation: f64,
    /// View-private feature noise level.
    #[arg(long, default_value_t = 0.35)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    name: String,
    /// On-disk encoding of feature files.
    #[arg(long, value_enum, default_value_t = FormatArg::F64le)]
    format: FormatArg,
}

#[derive(Args)]
struct SplitArgs {
    /// Dataset directory to split.
    #[arg(long)]
    data: PathBuf,
    /// Fraction of instances that go to the test side.
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::F64le)]
    format: FormatArg,
}

#[derive(Args)]
struct CorruptArgs {
    /// Clean dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Fraction of labels to corrupt, in [0, 1).
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the corrupted dataset plus records.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::F64le)]
    format: FormatArg,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset directory; a records.csv inside it (as written by
    /// `corrupt`) adds ground-truth columns to the round logs.
    #[arg(long)]
    data: PathBuf,
    /// TOML training configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for checkpoints, logs, and the summary.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory produced by `train`.
    #[arg(long)]
    run: PathBuf,
    /// Evaluation dataset directory (normally the clean test split).
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory holding summary.json and, after `eval`, eval/.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view dataset directory.
    Synth(SynthArgs),
    /// Split a dataset directory into train and test directories.
    Split(SplitArgs),
    /// Corrupt a fraction of labels with instance-dependent noise.
    Corrupt(CorruptArgs),
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Evaluate a run on a dataset; writes metrics under RUN/eval.
    Eval(EvalArgs),
    /// Assemble RUN/report.json and print a text summary.
    Report(ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(i32::from(e.exit_code()));
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Split(a) => cmd_split(a),
        Command::Corrupt(a) => cmd_corrupt(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        name: a.name,
        samples: a.samples,
        classes: a.classes,
        view_dims: a.views,
        latent_dim: a.latent,
        class_separation: a.separation,
        view_noise: a.noise,
        seed: a.seed,
    };
    let dataset = generate(&spec)?;
    save_dataset(&dataset, &a.out, a.format.into())?;
    println!(
        "wrote {} instances x {} views ({} classes) to {}",
        dataset.instances(),
        dataset.view_count(),
        dataset.classes(),
        a.out.display()
    );
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let dataset = load_dataset(&a.data)?;
    let (train, test) = split(&dataset, a.fraction, a.seed)?;
    save_dataset(&train, &a.train_out, a.format.into())?;
    save_dataset(&test, &a.test_out, a.format.into())?;
    println!(
        "split {} instances into {} train / {} test",
        dataset.instances(),
        train.instances(),
        test.instances()
    );
    Ok(())
}

fn cmd_corrupt(a: CorruptArgs) -> Result<()> {
    let dataset = load_dataset(&a.data)?;
    let outcome = corrupt_dataset(&dataset, a.rate, a.seed)?;
    save_dataset(&outcome.dataset, &a.out, a.format.into())?;
    save_records(&outcome.records, &a.out.join("records.csv"))?;
    println!(
        "corrupted {} of {} labels; records in {}",
        outcome.records.len(),
        dataset.instances(),
        a.out.join("records.csv").display()
    );
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: TrainConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let dataset = load_dataset(&a.data)?;
    let config = load_config(a.config.as_deref())?;
    let records_path = a.data.join("records.csv");
    let truth = if records_path.is_file() {
        Some(records_to_truth(&load_records(&records_path)?))
    } else {
        None
    };
    let output = run_training(&dataset, &config, truth.as_ref(), &a.out)?;
    println!(
        "trained {} epochs, final mean loss {:.6}, {} samples flagged; run in {}",
        output.state.epochs_run,
        output
            .epoch_losses
            .last()
            .map(|l| l.mean_loss)
            .unwrap_or(f64::NAN),
        output.state.noisy_set.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let model_path = a.run.join("model.json");
    let checkpoint_path = a.run.join("checkpoint.json");
    let state = if model_path.is_file() {
        TrainState::load(&model_path)?
    } else {
        TrainState::load(&checkpoint_path)?
    };
    let dataset = load_dataset(&a.data)?;
    let report = evaluate(&state, &dataset)?;
    let eval_dir = a.run.join("eval");
    write_metrics(&report, &eval_dir)?;
    println!(
        "accuracy {:.4} on {} instances; metrics in {}",
        report.accuracy,
        dataset.instances(),
        eval_dir.display()
    );
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let report = assemble(&a.run)?;
    let path = write_report(&report, &a.run)?;
    print!("{}", render_table(&report));
    println!("report written to {}", path.display());
    Ok(())
}
