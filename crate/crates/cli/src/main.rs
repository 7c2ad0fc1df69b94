//! Command-line entry point: train, eval, ensemble, and verify.

mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperkge::checkpoint::{load_for_store, save_checkpoint};
use hyperkge::error::Error;
use hyperkge::eval::{evaluate_on, per_relation_report, EvalMode};
use hyperkge::graph::{load_dataset_dir, Split, TripleStore};
use hyperkge::train::{fit_with, format_epoch_logs};
use hyperkge::verify::run_battery;
use settings::Overrides;

/// Environment variable naming the default dataset root directory.
const DATA_ROOT_ENV: &str = "HYPERKGE_DATA";

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hyperkge",
    about = "Hypercomplex knowledge graph embeddings: training, filtered-ranking evaluation, ensembling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and report filtered ranking metrics on valid and test.
    Train(TrainArgs),
    /// Evaluate one checkpoint (or several, as a score-averaging ensemble).
    Eval(EvalArgs),
    /// Evaluate an ensemble of checkpoints (alias of eval).
    Ensemble(EvalArgs),
    /// Run the fast invariant battery and report pass/fail per group.
    Verify,
}

#[derive(Args)]
struct CommonArgs {
    /// Dataset directory, or a name resolved under the dataset root
    /// (--data-root, $HYPERKGE_DATA, or ./datasets).
    #[arg(long)]
    dataset: String,

    /// Root directory for named datasets.
    #[arg(long)]
    data_root: Option<PathBuf>,

    /// Worker threads for evaluation and batched kernels (0 = all cores).
    /// Results do not depend on this value.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Ranking protocol: head-and-tail or tail-only.
    #[arg(long, default_value = "head-and-tail")]
    mode: String,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Output directory for the checkpoint, logs, and reports.
    #[arg(long)]
    out: Option<PathBuf>,

    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Model kind: qmult, omult, convq, convo.
    #[arg(long)]
    model: Option<String>,

    /// Normalization: batch, unit, none.
    #[arg(long)]
    norm: Option<String>,

    /// Embedding dimension per component plane.
    #[arg(long)]
    d: Option<usize>,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long)]
    lr: Option<f64>,

    #[arg(long)]
    batch_size: Option<usize>,

    #[arg(long)]
    label_smoothing: Option<f64>,

    #[arg(long)]
    seed: Option<u64>,

    /// Conv-head feature maps (convq/convo).
    #[arg(long)]
    filters: Option<usize>,

    /// Conv-head kernel extent (odd).
    #[arg(long)]
    kernel_size: Option<usize>,

    #[arg(long)]
    dropout_input: Option<f64>,

    #[arg(long)]
    dropout_feature: Option<f64>,

    #[arg(long)]
    dropout_hidden: Option<f64>,

    /// Checkpoint storage precision: 32 or 64.
    #[arg(long)]
    precision: Option<String>,

    /// Report validation MRR every N epochs (0 = off).
    #[arg(long, default_value_t = 0)]
    val_every: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Checkpoint path; repeat for a score-averaging ensemble.
    #[arg(long = "checkpoint", required = true)]
    checkpoints: Vec<PathBuf>,

    /// Include per-relation MRR rows in the output.
    #[arg(long)]
    per_relation: bool,

    /// Split per-relation rows by prediction direction.
    #[arg(long)]
    split_direction: bool,

    /// Optional directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) | Command::Ensemble(args) => cmd_eval(args),
        Command::Verify => cmd_verify(),
    };

    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Shape(_) | Error::Algebra(_) | Error::Contract(_) => EXIT_CONFIG,
        Error::Io(_)
        | Error::Parse { .. }
        | Error::CheckpointVersion(_)
        | Error::CheckpointTruncated
        | Error::VocabHashMismatch
        | Error::Vocab(_) => EXIT_IO,
    }
}

fn init_threads(threads: usize) {
    if threads > 0 {
        // Ignore the error from re-initialization (tests call this twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn resolve_dataset(args: &CommonArgs) -> Result<PathBuf, Error> {
    let direct = PathBuf::from(&args.dataset);
    if direct.is_dir() {
        return Ok(direct);
    }
    let root = args
        .data_root
        .clone()
        .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("datasets"));
    let nested = root.join(&args.dataset);
    if nested.is_dir() {
        return Ok(nested);
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("dataset directory {} not found (looked at {})", args.dataset, nested.display()),
    )))
}

fn load_store(args: &CommonArgs) -> Result<(PathBuf, TripleStore), Error> {
    let dir = resolve_dataset(args)?;
    let store = load_dataset_dir(&dir, true)?;
    log::info!(
        "loaded {}: {} entities, {} relations ({} raw), {}/{}/{} triples after augmentation",
        dir.display(),
        store.n_entities(),
        store.n_relations(),
        store.n_raw_relations(),
        store.split(Split::Train).len(),
        store.split(Split::Valid).len(),
        store.split(Split::Test).len(),
    );
    Ok((dir, store))
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode, Error> {
    init_threads(args.common.threads);
    let eval_mode: EvalMode = args.common.mode.parse()?;
    let flags = Overrides {
        model: args.model,
        norm: args.norm,
        dim: args.d,
        epochs: args.epochs,
        lr: args.lr,
        beta1: None,
        beta2: None,
        batch_size: args.batch_size,
        label_smoothing: args.label_smoothing,
        seed: args.seed,
        filters: args.filters,
        kernel_size: args.kernel_size,
        dropout_input: args.dropout_input,
        dropout_feature: args.dropout_feature,
        dropout_hidden: args.dropout_hidden,
        precision: args.precision,
    };
    let config = settings::resolve(args.config.as_deref(), &flags)?;

    let (dataset_dir, store) = load_store(&args.common)?;
    let out = args.out.unwrap_or_else(|| {
        PathBuf::from("runs").join(format!(
            "{}_{}_{}_d{}_s{}",
            dataset_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into()),
            config.kind,
            config.norm,
            config.dim,
            config.seed
        ))
    });
    std::fs::create_dir_all(&out)?;
    std::fs::write(
        out.join("config.txt"),
        settings::echo(&config, &dataset_dir, eval_mode, args.common.threads),
    )?;

    let progress_every = (config.epochs / 10).max(1);
    let val_every = args.val_every;
    let (params, logs) = fit_with(&store, &config, |log, params| {
        if log.epoch % progress_every == 0 || log.epoch == config.epochs {
            println!("epoch {}/{}  loss {:.6}  ({:.2}s)", log.epoch, config.epochs, log.loss, log.seconds);
        }
        if val_every > 0 && log.epoch % val_every == 0 {
            match evaluate_on(&[params], &store, eval_mode, Split::Valid) {
                Ok(report) => println!("epoch {}  validation mrr {:.4}", log.epoch, report.mrr),
                Err(err) => log::warn!("validation at epoch {} failed: {err}", log.epoch),
            }
        }
    })?;

    let ckpt = out.join("model.ckpt");
    save_checkpoint(&params, &store, config.precision, &ckpt)?;
    std::fs::write(out.join("epochs.tsv"), format_epoch_logs(&logs))?;

    let valid_report = evaluate_on(&[&params], &store, eval_mode, Split::Valid)?;
    std::fs::write(out.join("report_valid.txt"), valid_report.to_text())?;
    let test_report = evaluate_on(&[&params], &store, eval_mode, Split::Test)?;
    std::fs::write(out.join("report_test.txt"), test_report.to_text())?;

    println!("--- validation ---\n{}", valid_report.to_text());
    println!("--- test ---\n{}", test_report.to_text());
    println!("checkpoint: {}", ckpt.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode, Error> {
    init_threads(args.common.threads);
    let eval_mode: EvalMode = args.common.mode.parse()?;
    let (_, store) = load_store(&args.common)?;

    let models = args
        .checkpoints
        .iter()
        .map(|path| load_for_store(path, &store))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&_> = models.iter().collect();

    let report = if args.per_relation || args.split_direction {
        per_relation_report(&refs, &store, eval_mode, args.split_direction)?
    } else {
        evaluate_on(&refs, &store, eval_mode, Split::Test)?
    };

    print!("{}", report.to_text());
    if !report.per_relation.is_empty() {
        print!("{}", report.to_tsv());
    }
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("report_test.txt"), report.to_text())?;
        if !report.per_relation.is_empty() {
            std::fs::write(out.join("report_test.tsv"), report.to_tsv())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify() -> Result<ExitCode, Error> {
    let started = std::time::Instant::now();
    let results = run_battery();
    let mut all_passed = true;
    for r in &results {
        println!("{}  {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        all_passed &= r.passed;
    }
    println!("verify finished in {:.2}s", started.elapsed().as_secs_f64());
    if all_passed {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_VERIFY))
    }
}

