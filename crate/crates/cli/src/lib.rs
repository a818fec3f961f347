//! Command-line driver: synthesize or ingest participant tables, train, sweep,
//! evaluate and benchmark, writing every artifact to disk.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use glycemlp::backend::hardware_parallelism;
use glycemlp::bench::{emit_speedup_table, run_bench, BenchSpec, Workload};
use glycemlp::dataset::{parse_csv, split_by_sex, synth_dataset, train_test_split, write_csv, Signal};
use glycemlp::network::DEFAULT_LEARNING_RATE;
use glycemlp::trainer::{evaluate, train, DEFAULT_EPOCHS};
use glycemlp::{
    BackendKind, Dataset, Error, Network, NetworkConfig, SplitPair, SubsetTag, TrainReport, TrainSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const REPORT_FILE: &str = "report.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const NETWORK_FILE: &str = "network.json";
pub const EVAL_FILE: &str = "eval.json";
pub const BENCH_CSV_FILE: &str = "bench.csv";
pub const BENCH_JSON_FILE: &str = "bench.json";

#[derive(Parser, Debug)]
#[command(name = "glycemlp", version, about = "Glycemic-control classifier: data, training and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic participant table as CSV
    Synth(SynthArgs),
    /// Train one network and write report.json, curve.csv and network.json
    Train(TrainArgs),
    /// Evaluate a saved network on the train and test partitions
    Eval(EvalArgs),
    /// Train and print the accuracy-versus-epochs curve (writes the same artifacts as train)
    Sweep(TrainArgs),
    /// Time sequential against parallel training and write bench.csv and bench.json
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SexArg {
    Male,
    Female,
    /// Pooled sexes; recorded as a deviation in the report
    All,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Sequential,
    Parallel,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SignalArg {
    PlantedLinear,
    Random,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of participants
    #[arg(long, default_value_t = 120, value_parser = parse_rows)]
    rows: usize,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How HbA1c relates to the measured features
    #[arg(long, value_enum, default_value_t = SignalArg::PlantedLinear)]
    signal: SignalArg,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Participant CSV
    #[arg(long)]
    input: PathBuf,
    /// Subset to use
    #[arg(long, value_enum, default_value_t = SexArg::Male)]
    sex: SexArg,
    /// Seed for the split and the weight initialization
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training fraction of the stratified split
    #[arg(long, default_value_t = 0.75, value_parser = parse_fraction)]
    split: f64,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Execution backend
    #[arg(long, value_enum, default_value_t = BackendArg::Sequential)]
    backend: BackendArg,
    /// Threads for the parallel backend [default: available hardware threads]
    #[arg(long, value_parser = parse_positive)]
    workers: Option<usize>,
    /// Hidden neurons [default: number of input features]
    #[arg(long, value_parser = parse_positive)]
    hidden_dim: Option<usize>,
    /// SGD step size
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE, allow_negative_numbers = true, value_parser = parse_learning_rate)]
    learning_rate: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Training epochs
    #[arg(long, default_value_t = DEFAULT_EPOCHS, value_parser = parse_positive)]
    epochs: usize,
    /// Comma-separated evaluation epochs [default: 1,10,100,... up to --epochs, plus the final epoch]
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    checkpoints: Option<Vec<usize>>,
    /// Output directory
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Saved network checkpoint
    #[arg(long)]
    network: PathBuf,
    /// Directory for eval.json [default: print only]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Participant CSV; its training partition is the workload [default: synthetic matrix]
    #[arg(long)]
    input: Option<PathBuf>,
    /// Subset to use with --input
    #[arg(long, value_enum, default_value_t = SexArg::Male)]
    sex: SexArg,
    /// Training fraction of the split with --input
    #[arg(long, default_value_t = 0.75, value_parser = parse_fraction)]
    split: f64,
    /// Rows of the synthetic workload
    #[arg(long, default_value_t = 120, value_parser = parse_positive)]
    rows: usize,
    /// Feature columns of the synthetic workload
    #[arg(long, default_value_t = 33, value_parser = parse_positive)]
    columns: usize,
    /// Seed for the workload, split and weights
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Threads for the parallel backend [default: available hardware threads]
    #[arg(long, value_parser = parse_positive)]
    workers: Option<usize>,
    /// Hidden neurons [default: number of input features]
    #[arg(long, value_parser = parse_positive)]
    hidden_dim: Option<usize>,
    /// SGD step size
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE, allow_negative_numbers = true, value_parser = parse_learning_rate)]
    learning_rate: f64,
    /// Comma-separated epoch counts to time
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, default_value = "1000,10000,100000")]
    epochs_grid: Vec<usize>,
    /// Timed runs per cell; the median is reported
    #[arg(long, default_value_t = 3, value_parser = parse_positive)]
    repetitions: usize,
    /// Untimed epochs per backend before measuring
    #[arg(long, default_value_t = 1)]
    warmup_epochs: usize,
    /// Output directory
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_rows(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        Ok(_) => Err("must be at least 2".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        Ok(_) => Err("must lie strictly between 0 and 1".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_learning_rate(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(_) => Err("must be a finite, positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// A failure together with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Schema { .. }
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Argument(_)
            | Error::Shape { .. }
            | Error::Checkpoint(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure { code: EXIT_RUNTIME, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parse `argv` (program name first) and run the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Train(a) => train_cmd(&a, false),
        Command::Sweep(a) => train_cmd(&a, true),
        Command::Eval(a) => eval(&a),
        Command::Bench(a) => bench(&a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let signal = match a.signal {
        SignalArg::PlantedLinear => Signal::PlantedLinear,
        SignalArg::Random => Signal::Random,
    };
    let records = synth_dataset(a.rows, a.seed, signal)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_csv(File::create(&a.out)?, &records)?;
    println!("wrote {} rows to {}", records.len(), a.out.display());
    Ok(())
}

fn load_subset(input: &Path, sex: SexArg) -> CliResult<Dataset> {
    let file = File::open(input).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Failure::usage(format!("--input: file not found: {}", input.display()))
        } else {
            Failure::usage(format!("--input: cannot open {}: {e}", input.display()))
        }
    })?;
    let records = parse_csv(BufReader::new(file))
        .map_err(|e| Failure::usage(format!("--input {}: {e}", input.display())))?;
    let (male, female) = split_by_sex(&records);
    let (rows, tag) = match sex {
        SexArg::Male => (male, SubsetTag::Male),
        SexArg::Female => (female, SubsetTag::Female),
        SexArg::All => {
            log::warn!("--sex all pools both sexes; the report records this deviation");
            (records, SubsetTag::All)
        }
    };
    if rows.is_empty() {
        return Err(Failure::usage(format!("--sex {}: no matching rows in input", tag.as_str())));
    }
    Ok(Dataset::from_records(&rows, tag)?)
}

fn prepare_split(input: &Path, sex: SexArg, fraction: f64, seed: u64) -> CliResult<SplitPair> {
    let data = load_subset(input, sex)?;
    let split = train_test_split(&data, fraction, seed)
        .map_err(|e| Failure::usage(format!("--split {fraction}: {e}")))?;
    Ok(split.normalized()?)
}

fn backend_kind(backend: BackendArg, workers: Option<usize>) -> BackendKind {
    match backend {
        BackendArg::Sequential => {
            if workers.is_some() {
                log::warn!("--workers is ignored by the sequential backend");
            }
            BackendKind::Sequential
        }
        BackendArg::Parallel => BackendKind::Parallel {
            workers: workers.unwrap_or_else(hardware_parallelism),
        },
    }
}

fn write_train_artifacts(out: &Path, report: &TrainReport) -> CliResult<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(REPORT_FILE), report.to_json()? + "\n")?;
    fs::write(out.join(CURVE_FILE), report.curve().to_csv())?;
    report.network.save(out.join(NETWORK_FILE))?;
    Ok(())
}

fn train_cmd(a: &TrainArgs, sweep: bool) -> CliResult<()> {
    let split = prepare_split(&a.data.input, a.data.sex, a.data.split, a.data.seed)?;
    let input_dim = split.train.columns();
    let config = NetworkConfig::new(input_dim)
        .with_hidden_dim(a.model.hidden_dim.unwrap_or(input_dim))
        .with_learning_rate(a.model.learning_rate)
        .with_seed(a.data.seed);
    let mut spec = TrainSpec::new(config, backend_kind(a.model.backend, a.model.workers), a.epochs);
    if let Some(grid) = &a.checkpoints {
        spec = spec.with_checkpoints(grid.clone());
    }
    spec.validate()
        .map_err(|e| Failure::usage(format!("--checkpoints/--epochs: {e}")))?;

    log::info!(
        "training {}-{}-1 on {} rows ({} test), {} epochs, {}",
        input_dim,
        spec.config.hidden_dim,
        split.train.rows(),
        split.test.rows(),
        spec.epochs,
        spec.backend
    );
    let report = match train(&spec, &split) {
        Ok(r) => r,
        Err(Error::Diverged { epoch, message, last_good }) => {
            write_train_artifacts(&a.out, &last_good)?;
            return Err(Failure {
                code: EXIT_RUNTIME,
                message: format!(
                    "training diverged at epoch {epoch}: {message}; last good checkpoint written to {}",
                    a.out.display()
                ),
            });
        }
        Err(e) => return Err(e.into()),
    };
    write_train_artifacts(&a.out, &report)?;

    if sweep {
        print!("{}", report.curve().to_csv());
    } else if let Some(last) = report.final_row() {
        println!(
            "epoch {}: train {}% ({}/{}), test {}% ({}/{})",
            last.epoch,
            last.train.percent(),
            last.train.correct,
            last.train.total,
            last.test.percent(),
            last.test.correct,
            last.test.total
        );
    }
    println!("artifacts written to {}", a.out.display());
    Ok(())
}

fn eval(a: &EvalArgs) -> CliResult<()> {
    let net = Network::load(&a.network).map_err(|e| Failure::usage(format!("--network {}: {e}", a.network.display())))?;
    let split = prepare_split(&a.data.input, a.data.sex, a.data.split, a.data.seed)?;
    if split.train.columns() != net.config().input_dim {
        return Err(Failure::usage(format!(
            "--network expects {} features, input has {}",
            net.config().input_dim,
            split.train.columns()
        )));
    }
    let train_acc = evaluate(&net, &split.train)?;
    let test_acc = evaluate(&net, &split.test)?;
    println!(
        "train {}% ({}/{}), test {}% ({}/{})",
        train_acc.percent(),
        train_acc.correct,
        train_acc.total,
        test_acc.percent(),
        test_acc.correct,
        test_acc.total
    );
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        let doc = serde_json::json!({ "train": train_acc, "test": test_acc });
        fs::write(out.join(EVAL_FILE), serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n")?;
    }
    Ok(())
}

fn bench(a: &BenchArgs) -> CliResult<()> {
    let (workload, input_dim) = match &a.input {
        Some(input) => {
            let split = prepare_split(input, a.sex, a.split, a.seed)?;
            let dim = split.train.columns();
            (Workload::Split(Box::new(split)), dim)
        }
        None => (
            Workload::Synthetic { rows: a.rows, columns: a.columns, seed: a.seed },
            a.columns,
        ),
    };
    let config = NetworkConfig::new(input_dim)
        .with_hidden_dim(a.hidden_dim.unwrap_or(input_dim))
        .with_learning_rate(a.learning_rate)
        .with_seed(a.seed);
    let mut spec = BenchSpec::new(
        workload,
        config,
        a.epochs_grid.clone(),
        a.workers.unwrap_or_else(hardware_parallelism),
    );
    spec.repetitions = a.repetitions;
    spec.warmup_epochs = a.warmup_epochs;
    spec.validate()
        .map_err(|e| Failure::usage(format!("--epochs-grid: {e}")))?;

    let report = run_bench(&spec)?;
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join(BENCH_CSV_FILE), emit_speedup_table(&report))?;
    fs::write(a.out.join(BENCH_JSON_FILE), report.to_json()? + "\n")?;
    print!("{}", report.summary());
    println!("artifacts written to {}", a.out.display());
    if report.cells.iter().any(|c| !c.is_ok()) {
        return Err(Failure {
            code: EXIT_RUNTIME,
            message: "one or more bench cells failed; see bench.json".into(),
        });
    }
    Ok(())
}
