//! Command-line entry point: data generation, training, pruning, bound
//! auditing, experiment runs, and rank tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fairens::bounds::audit_bounds;
use fairens::dataset::{
    csv_schema_for, load_csv, perturb_sensitive, synth_biased, write_csv, DataError, DatasetSchema,
};
use fairens::ensemble::{
    build_profile, train_adaboost, train_bagging, BoostVariant, EnsembleError, WeightedEnsemble,
};
use fairens::harness::{
    friedman_avg_rank, run_experiment_threads, write_report, ExperimentConfig, HarnessError,
    PruneAlgo,
};
use fairens::pruning::{epaf_c, epaf_d, poaf, PruneConfig, PruneError};
use fairens::seeding::stream_seed;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
enum AppError {
    /// Bad flag values or flag combinations: exit 1.
    Usage(String),
    /// Unreadable or malformed input files and datasets: exit 2.
    Data(String),
    /// Violated internal contracts: exit 3.
    Internal(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) | AppError::Internal(m) => m,
        }
    }
}

impl From<DataError> for AppError {
    fn from(e: DataError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<EnsembleError> for AppError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::Io(_) | EnsembleError::Serde(_) | EnsembleError::UnsupportedVersion(_) => {
                AppError::Data(e.to_string())
            }
            other => AppError::Internal(other.to_string()),
        }
    }
}

impl From<PruneError> for AppError {
    fn from(e: PruneError) -> Self {
        match e {
            PruneError::InvalidLambda | PruneError::InvalidConfig(_) => {
                AppError::Usage(e.to_string())
            }
            other => AppError::Internal(other.to_string()),
        }
    }
}

impl From<HarnessError> for AppError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Data(d) => d.into(),
            HarnessError::InvalidConfig(m) => AppError::Usage(m),
            HarnessError::Io(io) => AppError::Data(io.to_string()),
            HarnessError::Serde(s) => AppError::Data(s.to_string()),
            HarnessError::Csv(c) => AppError::Data(c.to_string()),
            other => AppError::Internal(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "fairens",
    version,
    about = "Fairness-aware ensemble training, pruning, and bound auditing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic biased dataset as CSV plus a schema sidecar.
    Synth(SynthArgs),
    /// Train a tree ensemble on a CSV dataset and save it as JSON.
    Train(TrainArgs),
    /// Prune a saved ensemble against a dataset and write the result.
    Prune(PruneArgs),
    /// Audit the fairness bounds of a saved ensemble on a dataset.
    AuditBounds(AuditArgs),
    /// Run a cross-validation experiment from a JSON config.
    Run(RunArgs),
    /// Compute Friedman average ranks from a CSV score matrix.
    Ranks(RanksArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of rows (at least 10).
    #[arg(long)]
    n: usize,
    /// Probability that the label copies the sensitive attribute.
    #[arg(long)]
    bias: f64,
    /// Number of general (non-sensitive) features.
    #[arg(long, default_value_t = 4)]
    d_g: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path; the schema sidecar lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Input dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Dataset schema JSON.
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Ensemble trainer.
    #[arg(long, value_parser = ["bagging", "adaboost-m1", "samme"])]
    trainer: String,
    /// Ensemble size.
    #[arg(long)]
    m: usize,
    /// Maximum tree depth.
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long)]
    seed: u64,
    /// Output model JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PruneArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Saved ensemble model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    algo: PruneAlgo,
    /// Maximum sub-ensemble size.
    #[arg(long)]
    k: usize,
    /// Accuracy/fairness trade-off in (0,1).
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Machine count for the distributed pruner.
    #[arg(long, default_value_t = 1)]
    n_m: usize,
    #[arg(long)]
    seed: u64,
    /// Output result JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Optional path for the pruned model JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Saved ensemble model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Perturbation seed.
    #[arg(long)]
    seed: u64,
    /// Output report JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the report bundle.
    #[arg(long)]
    out: PathBuf,
    /// Worker thread cap for fold processing.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct RanksArgs {
    /// Score matrix CSV: header row of column names, then one row per method
    /// with the method name first and one numeric score per column.
    #[arg(long)]
    scores: PathBuf,
    /// Rank ascending scores as better (default: higher is better).
    #[arg(long)]
    lower_is_better: bool,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

fn read_to_string(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path)
        .map_err(|e| AppError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| AppError::Internal(format!("serialization failed: {e}")))?;
    std::fs::write(path, text)
        .map_err(|e| AppError::Data(format!("cannot write {}: {e}", path.display())))
}

fn schema_sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("schema.json")
}

fn load_dataset(args: &DataArgs) -> Result<fairens::dataset::Dataset, AppError> {
    let schema = DatasetSchema::load(&args.schema)
        .map_err(|e| AppError::Data(format!("schema {}: {e}", args.schema.display())))?;
    load_csv(&args.data, &schema)
        .map_err(|e| AppError::Data(format!("dataset {}: {e}", args.data.display())))
}

/// Schema sidecar with the schema fields at top level so the file loads
/// directly as a dataset schema; the extra keys are provenance metadata.
#[derive(Serialize)]
struct SynthSidecar {
    #[serde(flatten)]
    schema: DatasetSchema,
    tool_version: String,
    config: SynthConfigEcho,
    fingerprint: String,
}

#[derive(Serialize)]
struct SynthConfigEcho {
    n: usize,
    bias: f64,
    d_g: usize,
    seed: u64,
}

fn cmd_synth(args: &SynthArgs) -> Result<(), AppError> {
    if args.n < 10 {
        return Err(AppError::Usage("--n must be at least 10".into()));
    }
    if args.d_g == 0 {
        return Err(AppError::Usage("--d-g must be positive".into()));
    }
    if !(0.0..=1.0).contains(&args.bias) {
        return Err(AppError::Usage("--bias must lie in [0,1]".into()));
    }
    let d = synth_biased(args.n, args.bias, args.d_g, args.seed);
    write_csv(&d, &args.out)?;
    let sidecar = SynthSidecar {
        schema: csv_schema_for(&d),
        tool_version: TOOL_VERSION.to_string(),
        config: SynthConfigEcho {
            n: args.n,
            bias: args.bias,
            d_g: args.d_g,
            seed: args.seed,
        },
        fingerprint: d.fingerprint(),
    };
    write_json(&schema_sidecar_path(&args.out), &sidecar)?;
    println!(
        "wrote {} rows to {} (schema sidecar {})",
        args.n,
        args.out.display(),
        schema_sidecar_path(&args.out).display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), AppError> {
    if args.m == 0 {
        return Err(AppError::Usage("--m must be positive".into()));
    }
    let d = load_dataset(&args.data)?;
    let e = match args.trainer.as_str() {
        "bagging" => train_bagging(&d, args.m, args.depth, args.seed)?,
        "adaboost-m1" => train_adaboost(&d, args.m, args.depth, BoostVariant::M1, args.seed)?,
        "samme" => train_adaboost(&d, args.m, args.depth, BoostVariant::Samme, args.seed)?,
        other => return Err(AppError::Usage(format!("unknown trainer {other}"))),
    };
    e.save_json(&args.out)?;
    println!(
        "trained {} members on {} rows, saved to {}",
        e.len(),
        d.n(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PruneResultFile {
    tool_version: String,
    config: PruneConfigEcho,
    selected: Vec<usize>,
    objective: fairens::pruning::BiObjective,
    combined_loss: f64,
}

#[derive(Serialize)]
struct PruneConfigEcho {
    algo: String,
    k: usize,
    lambda: f64,
    n_m: usize,
    seed: u64,
    model: String,
    data: String,
}

// seed-stream roles for the prune and audit subcommands
const STREAM_CLI_PERTURB: u64 = 1;
const STREAM_CLI_SEARCH: u64 = 2;

fn cmd_prune(args: &PruneArgs) -> Result<(), AppError> {
    let d = load_dataset(&args.data)?;
    let e = WeightedEnsemble::load_json(&args.model)?;
    let view = perturb_sensitive(&d, stream_seed(args.seed, STREAM_CLI_PERTURB))?;
    let profile = build_profile(&e, &d, &view)?;
    let cfg = PruneConfig {
        k: args.k,
        lambda: args.lambda,
        n_m: args.n_m,
        seed: stream_seed(args.seed, STREAM_CLI_SEARCH),
        iter_multiplier: 1,
    };
    let outcome = match args.algo {
        PruneAlgo::Poaf => poaf(&profile, d.labels(), &cfg)?,
        PruneAlgo::EpafC => epaf_c(&profile, d.labels(), cfg.k, cfg.lambda)?,
        PruneAlgo::EpafD => epaf_d(&profile, d.labels(), &cfg)?,
    };
    let result = PruneResultFile {
        tool_version: TOOL_VERSION.to_string(),
        config: PruneConfigEcho {
            algo: args.algo.name().to_string(),
            k: args.k,
            lambda: args.lambda,
            n_m: args.n_m,
            seed: args.seed,
            model: args.model.display().to_string(),
            data: args.data.data.display().to_string(),
        },
        selected: outcome.selected.clone(),
        objective: outcome.objective,
        combined_loss: outcome.combined_loss,
    };
    write_json(&args.out, &result)?;
    if let Some(model_out) = &args.model_out {
        let sub = e.subensemble(&outcome.selected)?;
        sub.save_json(model_out)?;
    }
    println!(
        "kept {} of {} members, result in {}",
        outcome.selected.len(),
        e.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AuditResultFile {
    tool_version: String,
    config: AuditConfigEcho,
    report: fairens::bounds::OracleBoundReport,
}

#[derive(Serialize)]
struct AuditConfigEcho {
    model: String,
    data: String,
    seed: u64,
}

fn cmd_audit(args: &AuditArgs) -> Result<(), AppError> {
    let d = load_dataset(&args.data)?;
    let e = WeightedEnsemble::load_json(&args.model)?;
    let view = perturb_sensitive(&d, stream_seed(args.seed, STREAM_CLI_PERTURB))?;
    let profile = build_profile(&e, &d, &view)?;
    let report =
        audit_bounds(&e, &profile).map_err(|err| AppError::Internal(err.to_string()))?;
    let holds = report.holds_first_order && report.holds_second_order;
    let result = AuditResultFile {
        tool_version: TOOL_VERSION.to_string(),
        config: AuditConfigEcho {
            model: args.model.display().to_string(),
            data: args.data.data.display().to_string(),
            seed: args.seed,
        },
        report,
    };
    write_json(&args.out, &result)?;
    println!(
        "bound audit written to {} (first/second order hold: {holds})",
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), AppError> {
    let text = read_to_string(&args.config)?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| match e {
        HarnessError::Serde(s) => {
            AppError::Data(format!("config {}: {s}", args.config.display()))
        }
        other => other.into(),
    })?;
    let report = run_experiment_threads(&cfg, args.threads)?;
    write_report(&report, &args.out)?;
    println!("report bundle written to {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct RanksFile {
    tool_version: String,
    config: RanksConfigEcho,
    methods: Vec<String>,
    avg_ranks: Vec<f64>,
}

#[derive(Serialize)]
struct RanksConfigEcho {
    scores: String,
    lower_is_better: bool,
}

fn cmd_ranks(args: &RanksArgs) -> Result<(), AppError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&args.scores)
        .map_err(|e| AppError::Data(format!("cannot read {}: {e}", args.scores.display())))?;
    let mut methods = Vec::new();
    let mut scores: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| AppError::Data(format!("{}: {e}", args.scores.display())))?;
        let mut fields = record.iter();
        let name = fields
            .next()
            .ok_or_else(|| AppError::Data("empty row in score matrix".into()))?;
        let row: Vec<f64> = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    AppError::Data(format!("unparseable score {f:?} for method {name}"))
                })
            })
            .collect::<Result<_, _>>()?;
        methods.push(name.to_string());
        scores.push(row);
    }
    let avg_ranks = friedman_avg_rank(&scores, args.lower_is_better).map_err(|e| {
        AppError::Data(format!("score matrix {}: {e}", args.scores.display()))
    })?;
    let result = RanksFile {
        tool_version: TOOL_VERSION.to_string(),
        config: RanksConfigEcho {
            scores: args.scores.display().to_string(),
            lower_is_better: args.lower_is_better,
        },
        methods: methods.clone(),
        avg_ranks: avg_ranks.clone(),
    };
    write_json(&args.out, &result)?;
    for (m, r) in methods.iter().zip(&avg_ranks) {
        println!("{m}\t{r}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes, not usage errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Prune(args) => cmd_prune(args),
        Command::AuditBounds(args) => cmd_audit(args),
        Command::Run(args) => cmd_run(args),
        Command::Ranks(args) => cmd_ranks(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
