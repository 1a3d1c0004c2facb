use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hrm_vision::data::DatasetKind;
use hrm_vision::experiment::{checkpoint, config::parse_pairs, evaluate, fmt_sig, train, PreparedData, RunConfig};
use hrm_vision::Result;

#[derive(Parser)]
#[command(name = "hrm", version, about = "Train and evaluate HRM and CNN image classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write metrics, plots and checkpoints.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint on the test split.
    Eval(EvalArgs),
    /// Download a dataset into the data directory.
    Fetch(FetchArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// `key=value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key, e.g. `--set lr=1e-3`. Repeatable; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory holding checkpoint.txt, or the manifest itself.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Must match the checkpoint's dataset when given.
    #[arg(long)]
    dataset: Option<DatasetKind>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    test_limit: Option<usize>,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    dataset: DatasetKind,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut pairs = match &args.config {
        Some(path) => parse_pairs(&std::fs::read_to_string(path).map_err(|e| {
            hrm_vision::Error::Config(format!("cannot read {}: {e}", path.display()))
        })?)?,
        None => Vec::new(),
    };
    let flags = [
        ("model", args.model.clone()),
        ("dataset", args.dataset.clone()),
        ("epochs", args.epochs.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("data_dir", args.data_dir.as_ref().map(|p| p.display().to_string())),
        ("out_dir", args.out_dir.as_ref().map(|p| p.display().to_string())),
    ];
    pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| hrm_vision::Error::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    let config = RunConfig::from_pairs(&pairs)?;
    let data = PreparedData::load(&config)?;
    let summary = train(&config, &data)?;
    println!("parameters: {}", summary.num_params);
    println!("final test accuracy: {}", fmt_sig(summary.final_test_acc));
    println!("artifacts: {}", summary.out_dir.display());
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let dir = if args.checkpoint.is_file() {
        args.checkpoint.parent().map(PathBuf::from).unwrap_or_default()
    } else {
        args.checkpoint.clone()
    };
    let loaded = checkpoint::load(&dir)?;
    let mut config = loaded.config;
    if let Some(d) = args.dataset {
        if d != config.dataset {
            return Err(hrm_vision::Error::Config(format!(
                "checkpoint was trained on {}, not {d}",
                config.dataset
            )));
        }
    }
    if let Some(d) = args.data_dir {
        config.data_dir = d;
    }
    if args.test_limit.is_some() {
        config.test_limit = args.test_limit;
    }
    let data = PreparedData::load(&config)?;
    let result = evaluate(&loaded.model, &data.test, config.batch_size)?;
    println!("parameters: {}", loaded.model.num_params());
    println!("epoch: {}", loaded.epoch);
    println!("test accuracy: {}", fmt_sig(result.accuracy));
    Ok(())
}

#[cfg(feature = "fetch")]
fn run_fetch(args: FetchArgs) -> Result<()> {
    hrm_vision::experiment::fetch::fetch(args.dataset, &args.data_dir)?;
    println!("{} ready in {}", args.dataset, args.dataset.dir(&args.data_dir).display());
    Ok(())
}

#[cfg(not(feature = "fetch"))]
fn run_fetch(_: FetchArgs) -> Result<()> {
    Err(hrm_vision::Error::Config("built without the `fetch` feature".into()))
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Fetch(a) => run_fetch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
