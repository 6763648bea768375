//! Cross-validation experiment runner: per-fold training, perturbation,
//! pruning, metric tables, bound audits, Pearson correlations, and Friedman
//! average ranks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{audit_profile, BoundError, OracleBoundReport};
use crate::dataset::{
    kfold_split, load_csv, perturb_sensitive, synth_biased, DataError, Dataset, DatasetSchema,
};
use crate::ensemble::{
    build_profile, train_adaboost, train_bagging, BoostVariant, EnsembleError, WeightedEnsemble,
};
use crate::metrics::{
    classification_metrics, empirical_dr_pair, group_fairness, pearson, GroupMeasure,
    MetricError,
};
use crate::pruning::{epaf_c, epaf_d, poaf, PruneConfig, PruneError};
use crate::seeding::stream_seed;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("scores matrix is ragged or empty")]
    ShapeMismatch,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, schema: PathBuf },
    Synthetic { n: usize, bias: f64, d_g: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerKind {
    Bagging,
    AdaboostM1,
    Samme,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub trainer: TrainerKind,
    pub m: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PruneAlgo {
    Poaf,
    EpafC,
    EpafD,
}

impl PruneAlgo {
    pub fn name(&self) -> &'static str {
        match self {
            PruneAlgo::Poaf => "poaf",
            PruneAlgo::EpafC => "epaf-c",
            PruneAlgo::EpafD => "epaf-d",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PruneSpec {
    pub algo: PruneAlgo,
    pub k: usize,
    pub lambda: f64,
    #[serde(default = "default_n_m")]
    pub n_m: usize,
    /// Iteration budget multiplier for the archive search.
    #[serde(default = "default_n_m")]
    pub iter_multiplier: usize,
}

fn default_n_m() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub pruners: Vec<PruneSpec>,
    pub k_folds: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.k_folds < 2 {
            return Err(HarnessError::InvalidConfig("k_folds must be at least 2".into()));
        }
        if self.ensemble.m == 0 {
            return Err(HarnessError::InvalidConfig("ensemble m must be positive".into()));
        }
        Ok(())
    }
}

/// All metrics for one method on one fold's held-out split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: String,
    pub ensemble_size: usize,
    pub accuracy: f64,
    /// Accuracy on the perturbed test features; its gap from `accuracy` is the
    /// accuracy variation the correlation study uses.
    pub accuracy_perturbed: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
    pub dr: f64,
    pub dp: Option<f64>,
    pub eo: Option<f64>,
    pub pqp: Option<f64>,
    pub bounds: OracleBoundReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_size: usize,
    pub methods: Vec<MethodRecord>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(MeanStd {
        mean,
        std: var.sqrt(),
        count: values.len(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub accuracy: MeanStd,
    pub accuracy_perturbed: MeanStd,
    pub dr: MeanStd,
    pub f1: Option<MeanStd>,
    pub precision: Option<MeanStd>,
    pub recall: Option<MeanStd>,
    pub specificity: Option<MeanStd>,
    pub dp: Option<MeanStd>,
    pub eo: Option<MeanStd>,
    pub pqp: Option<MeanStd>,
}

/// Pearson coefficients between each fairness measure and the accuracy
/// variation; `None` marks undefined coefficients (constant or empty columns).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub dr: Option<f64>,
    pub dp: Option<f64>,
    pub eo: Option<f64>,
    pub pqp: Option<f64>,
}

/// One observation for the correlation study.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub dr: f64,
    pub dp: Option<f64>,
    pub eo: Option<f64>,
    pub pqp: Option<f64>,
    /// accuracy on original test features minus accuracy on perturbed ones.
    pub accuracy_variation: f64,
}

/// Correlates each fairness column with the accuracy-variation column,
/// dropping undefined cells pairwise.
pub fn correlation_study(rows: &[CorrelationRow]) -> CorrelationTable {
    let corr_opt = |select: &dyn Fn(&CorrelationRow) -> Option<f64>| -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in rows {
            if let Some(v) = select(r) {
                xs.push(v);
                ys.push(r.accuracy_variation);
            }
        }
        pearson(&xs, &ys).ok()
    };
    CorrelationTable {
        dr: corr_opt(&|r| Some(r.dr)),
        dp: corr_opt(&|r| r.dp),
        eo: corr_opt(&|r| r.eo),
        pqp: corr_opt(&|r| r.pqp),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankTable {
    /// Friedman average rank per method over fold columns (lower is better).
    pub dr: Vec<f64>,
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub dataset_name: String,
    pub sensitive_attr: String,
    pub methods: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub summaries: Vec<MethodSummary>,
    /// Ranks computed with folds as the comparison columns.
    pub fold_ranks: RankTable,
    /// Per-(fold, method) pooling of the correlation study.
    pub correlations_per_fold: CorrelationTable,
    /// Method-mean pooling of the correlation study.
    pub correlations_method_means: CorrelationTable,
}

impl Report {
    /// Observations for the correlation study, one per (fold, method).
    pub fn correlation_rows(&self) -> Vec<CorrelationRow> {
        self.folds
            .iter()
            .flat_map(|f| f.methods.iter())
            .map(|m| CorrelationRow {
                dr: m.dr,
                dp: m.dp,
                eo: m.eo,
                pqp: m.pqp,
                accuracy_variation: m.accuracy - m.accuracy_perturbed,
            })
            .collect()
    }

    pub fn method_mean_dr(&self, method: &str) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.method == method)
            .map(|s| s.dr.mean)
    }
}

fn load_source(source: &DataSource, seed: u64) -> Result<(Dataset, String), HarnessError> {
    match source {
        DataSource::Csv { path, schema } => {
            let schema = DatasetSchema::load(schema)?;
            let d = load_csv(path, &schema)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into());
            Ok((d, name))
        }
        DataSource::Synthetic { n, bias, d_g } => {
            Ok((synth_biased(*n, *bias, *d_g, seed), "synthetic".into()))
        }
    }
}

fn evaluate_on_test(
    method: &str,
    e: &WeightedEnsemble,
    test: &Dataset,
    test_seed: u64,
) -> Result<MethodRecord, HarnessError> {
    let view = perturb_sensitive(test, test_seed)?;
    let profile = build_profile(e, test, &view)?;
    let labels = test.labels();
    let cm = classification_metrics(&profile.vote_orig, labels)?;
    let acc_pert = classification_metrics(&profile.vote_pert, labels)?.accuracy;
    let dr = empirical_dr_pair(&profile.vote_orig, &profile.vote_pert)?;
    let group = test.privileged_group(0);
    let binary = test.n_c() == 2;
    let gf = |measure| -> Result<Option<f64>, HarnessError> {
        if !binary {
            return Ok(None);
        }
        Ok(group_fairness(measure, &profile.vote_orig, labels, &group)?.value)
    };
    let bounds = audit_profile(&profile, "test")?;
    Ok(MethodRecord {
        method: method.to_string(),
        ensemble_size: e.len(),
        accuracy: cm.accuracy,
        accuracy_perturbed: acc_pert,
        precision: cm.precision,
        recall: cm.recall,
        f1: cm.f1,
        specificity: cm.specificity,
        dr,
        dp: gf(GroupMeasure::Dp)?,
        eo: gf(GroupMeasure::Eo)?,
        pqp: gf(GroupMeasure::Pqp)?,
        bounds,
    })
}

fn train_ensemble(
    spec: &EnsembleSpec,
    d: &Dataset,
    seed: u64,
) -> Result<WeightedEnsemble, HarnessError> {
    Ok(match spec.trainer {
        TrainerKind::Bagging => train_bagging(d, spec.m, spec.depth, seed)?,
        TrainerKind::AdaboostM1 => train_adaboost(d, spec.m, spec.depth, BoostVariant::M1, seed)?,
        TrainerKind::Samme => train_adaboost(d, spec.m, spec.depth, BoostVariant::Samme, seed)?,
    })
}

// Seed-stream roles within one experiment; fold indices are mixed in so folds
// are independent but reproducible.
const STREAM_DATA: u64 = 1;
const STREAM_FOLDS: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_PERTURB_TRAIN: u64 = 4;
const STREAM_PERTURB_TEST: u64 = 5;
const STREAM_PRUNE: u64 = 6;

fn run_fold(
    cfg: &ExperimentConfig,
    d: &Dataset,
    plan: &crate::dataset::FoldPlan,
    fold: usize,
) -> Result<FoldResult, HarnessError> {
    let master = cfg.master_seed;
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let train = d.subset(&train_idx);
    let test = d.subset(&test_idx);

    let e = train_ensemble(
        &cfg.ensemble,
        &train,
        stream_seed(stream_seed(master, STREAM_TRAIN), fold as u64),
    )?;
    let test_seed = stream_seed(stream_seed(master, STREAM_PERTURB_TEST), fold as u64);

    let mut methods = Vec::with_capacity(1 + cfg.pruners.len());
    methods.push(evaluate_on_test("unpruned", &e, &test, test_seed)?);

    if !cfg.pruners.is_empty() {
        let train_view = perturb_sensitive(
            &train,
            stream_seed(stream_seed(master, STREAM_PERTURB_TRAIN), fold as u64),
        )?;
        let train_profile = build_profile(&e, &train, &train_view)?;
        for (pi, spec) in cfg.pruners.iter().enumerate() {
            let prune_cfg = PruneConfig {
                k: spec.k.min(e.len()),
                lambda: spec.lambda,
                n_m: spec.n_m.min(e.len()),
                seed: stream_seed(stream_seed(master, STREAM_PRUNE), (fold * 64 + pi) as u64),
                iter_multiplier: spec.iter_multiplier.max(1),
            };
            let outcome = match spec.algo {
                PruneAlgo::Poaf => poaf(&train_profile, train.labels(), &prune_cfg)?,
                PruneAlgo::EpafC => {
                    epaf_c(&train_profile, train.labels(), prune_cfg.k, prune_cfg.lambda)?
                }
                PruneAlgo::EpafD => epaf_d(&train_profile, train.labels(), &prune_cfg)?,
            };
            let sub = e.subensemble(&outcome.selected)?;
            methods.push(evaluate_on_test(spec.algo.name(), &sub, &test, test_seed)?);
        }
    }

    Ok(FoldResult {
        fold,
        test_size: test_idx.len(),
        methods,
    })
}

/// Runs the full cross-validation protocol: per fold, train on the k-1 train
/// folds, prune on the training split, and evaluate every method on the
/// held-out split under a fold-specific perturbation seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    run_experiment_threads(cfg, 1)
}

/// Same protocol with folds processed on up to `threads` worker threads; the
/// report is assembled in fold order regardless of completion order.
pub fn run_experiment_threads(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let threads = threads.max(1);
    let master = cfg.master_seed;
    let (d, dataset_name) = load_source(&cfg.data, stream_seed(master, STREAM_DATA))?;
    if d.n_a() == 0 {
        return Err(HarnessError::InvalidConfig(
            "experiment dataset needs at least one sensitive attribute".into(),
        ));
    }
    let plan = kfold_split(d.n(), cfg.k_folds, stream_seed(master, STREAM_FOLDS))?;

    let mut method_names = vec!["unpruned".to_string()];
    for p in &cfg.pruners {
        method_names.push(p.algo.name().to_string());
    }

    let fold_ids: Vec<usize> = (0..cfg.k_folds).collect();
    let mut folds = Vec::with_capacity(cfg.k_folds);
    let (d_ref, plan_ref) = (&d, &plan);
    for chunk in fold_ids.chunks(threads) {
        let results: Vec<Result<FoldResult, HarnessError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&fold| scope.spawn(move || run_fold(cfg, d_ref, plan_ref, fold)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold worker panicked"))
                .collect()
        });
        for (&fold, result) in chunk.iter().zip(results) {
            folds.push(result.map_err(|e| HarnessError::Fold {
                fold,
                source: Box::new(e),
            })?);
        }
    }

    let summaries = summarize(&method_names, &folds);
    let fold_ranks = fold_rank_table(&method_names, &folds)?;

    let per_fold_rows: Vec<CorrelationRow> = folds
        .iter()
        .flat_map(|f| f.methods.iter())
        .map(|m| CorrelationRow {
            dr: m.dr,
            dp: m.dp,
            eo: m.eo,
            pqp: m.pqp,
            accuracy_variation: m.accuracy - m.accuracy_perturbed,
        })
        .collect();
    let mean_rows: Vec<CorrelationRow> = summaries
        .iter()
        .map(|s| CorrelationRow {
            dr: s.dr.mean,
            dp: s.dp.map(|v| v.mean),
            eo: s.eo.map(|v| v.mean),
            pqp: s.pqp.map(|v| v.mean),
            accuracy_variation: s.accuracy.mean - s.accuracy_perturbed.mean,
        })
        .collect();

    let sensitive_attr = d.sensitive_names().first().cloned().unwrap_or_default();
    Ok(Report {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        dataset_name,
        sensitive_attr,
        methods: method_names,
        folds,
        summaries,
        fold_ranks,
        correlations_per_fold: correlation_study(&per_fold_rows),
        correlations_method_means: correlation_study(&mean_rows),
    })
}

fn summarize(methods: &[String], folds: &[FoldResult]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|name| {
            let records: Vec<&MethodRecord> = folds
                .iter()
                .flat_map(|f| f.methods.iter())
                .filter(|m| &m.method == name)
                .collect();
            let collect = |f: &dyn Fn(&MethodRecord) -> Option<f64>| -> Vec<f64> {
                records.iter().filter_map(|r| f(r)).collect()
            };
            MethodSummary {
                method: name.clone(),
                accuracy: mean_std(&collect(&|r| Some(r.accuracy))).expect("folds nonempty"),
                accuracy_perturbed: mean_std(&collect(&|r| Some(r.accuracy_perturbed)))
                    .expect("folds nonempty"),
                dr: mean_std(&collect(&|r| Some(r.dr))).expect("folds nonempty"),
                f1: mean_std(&collect(&|r| r.f1)),
                precision: mean_std(&collect(&|r| r.precision)),
                recall: mean_std(&collect(&|r| r.recall)),
                specificity: mean_std(&collect(&|r| r.specificity)),
                dp: mean_std(&collect(&|r| r.dp)),
                eo: mean_std(&collect(&|r| r.eo)),
                pqp: mean_std(&collect(&|r| r.pqp)),
            }
        })
        .collect()
}

fn fold_rank_table(
    methods: &[String],
    folds: &[FoldResult],
) -> Result<RankTable, HarnessError> {
    let matrix = |f: &dyn Fn(&MethodRecord) -> f64| -> Vec<Vec<f64>> {
        methods
            .iter()
            .map(|name| {
                folds
                    .iter()
                    .map(|fold| {
                        fold.methods
                            .iter()
                            .find(|m| &m.method == name)
                            .map(f)
                            .expect("method present in every fold")
                    })
                    .collect()
            })
            .collect()
    };
    if methods.len() < 2 {
        // a single method is trivially rank 1 everywhere
        return Ok(RankTable {
            dr: vec![1.0; methods.len()],
            accuracy: vec![1.0; methods.len()],
        });
    }
    Ok(RankTable {
        dr: friedman_avg_rank(&matrix(&|m| m.dr), true)?,
        accuracy: friedman_avg_rank(&matrix(&|m| m.accuracy), false)?,
    })
}

/// Per-column ranks 1..M with tie-averaging, then the per-method mean rank
/// across columns. `scores[method][column]`.
pub fn friedman_avg_rank(
    scores: &[Vec<f64>],
    lower_is_better: bool,
) -> Result<Vec<f64>, HarnessError> {
    let m = scores.len();
    if m < 2 {
        return Err(HarnessError::ShapeMismatch);
    }
    let cols = scores[0].len();
    if cols == 0 || scores.iter().any(|r| r.len() != cols) {
        return Err(HarnessError::ShapeMismatch);
    }
    let mut totals = vec![0.0; m];
    for c in 0..cols {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (scores[a][c], scores[b][c]);
            if lower_is_better {
                x.partial_cmp(&y).unwrap()
            } else {
                y.partial_cmp(&x).unwrap()
            }
        });
        // tie-averaged ranks
        let mut i = 0;
        while i < m {
            let mut j = i;
            while j + 1 < m && scores[order[j + 1]][c] == scores[order[i]][c] {
                j += 1;
            }
            let avg = (i + 1 + j + 1) as f64 / 2.0;
            for &idx in &order[i..=j] {
                totals[idx] += avg;
            }
            i = j + 1;
        }
    }
    Ok(totals.iter().map(|t| t / cols as f64).collect())
}

fn fmt_cell(v: Option<MeanStd>) -> String {
    match v {
        Some(ms) => format!("{:.4}±{:.4}", ms.mean, ms.std),
        None => "undefined".to_string(),
    }
}

/// Writes the report bundle: `summary.json` plus one CSV table per metric
/// (rows = dataset×sensitive-attribute, columns = methods).
pub fn write_report(report: &Report, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    let metrics: [(&str, Box<dyn Fn(&MethodSummary) -> Option<MeanStd>>); 6] = [
        ("accuracy", Box::new(|s| Some(s.accuracy))),
        ("f1", Box::new(|s| s.f1)),
        ("dr", Box::new(|s| Some(s.dr))),
        ("dp", Box::new(|s| s.dp)),
        ("eo", Box::new(|s| s.eo)),
        ("pqp", Box::new(|s| s.pqp)),
    ];
    for (name, select) in metrics {
        let mut w = csv::WriterBuilder::new().from_path(dir.join(format!("table_{name}.csv")))?;
        let mut header = vec!["dataset".to_string(), "attr".to_string()];
        header.extend(report.methods.iter().cloned());
        w.write_record(&header)?;
        let mut row = vec![report.dataset_name.clone(), report.sensitive_attr.clone()];
        for s in &report.summaries {
            row.push(fmt_cell(select(s)));
        }
        w.write_record(&row)?;
        w.flush()?;
    }
    Ok(())
}
