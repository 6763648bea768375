//! Depth-limited CART base learners, ensemble trainers (bagging, AdaBoost.M1,
//! SAMME), weighted majority vote, and prediction-profile caching.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, PerturbedView};
use crate::metrics::PredictionProfile;
use crate::seeding::stream_seed;

/// Raw member weight cap used when a boosting round is error-free.
const ALPHA_CAP: f64 = 27.631021115928547; // ln(1e12)
const MAX_BOOST_RETRIES: usize = 10;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("row weights are all zero")]
    AllZeroWeights,
    #[error("input lengths disagree")]
    LengthMismatch,
    #[error("no useful weak learner found after {0} resampling retries")]
    NoUsefulWeakLearner(usize),
    #[error("perturbed view fingerprint does not match the dataset")]
    FingerprintMismatch,
    #[error("invalid ensemble: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Tree,
    Bagging,
    AdaBoostM1,
    Samme,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub max_depth: usize,
    pub learner: LearnerKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// A trained predictor: deterministic for a fixed model and input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hypothesis {
    root: TreeNode,
    n_c: usize,
    pub meta: TrainingMeta,
}

impl Hypothesis {
    pub fn predict(&self, features: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if features[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }
}

/// Weighted-majority class of weighted class counts; ties break to the
/// lowest class index so results are reproducible.
fn argmax_class(counts: &[f64]) -> usize {
    let mut best = 0usize;
    for (c, &v) in counts.iter().enumerate().skip(1) {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let mut g = 1.0;
    for &c in counts {
        let p = c / total;
        g -= p * p;
    }
    g
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    weights: &'a [f64],
    n_c: usize,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, rows: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_c];
        for &i in rows {
            counts[self.labels[i]] += self.weights[i];
        }
        counts
    }

    fn build(&self, rows: &[usize], depth: usize) -> TreeNode {
        let counts = self.class_counts(rows);
        let total: f64 = counts.iter().sum();
        let majority = argmax_class(&counts);
        if depth == 0 || gini(&counts, total) <= 1e-15 {
            return TreeNode::Leaf { class: majority };
        }
        let Some((feature, threshold)) = self.best_split(rows, &counts, total) else {
            return TreeNode::Leaf { class: majority };
        };
        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for &i in rows {
            if self.features[i][feature] <= threshold {
                left_rows.push(i);
            } else {
                right_rows.push(i);
            }
        }
        if left_rows.is_empty() || right_rows.is_empty() {
            return TreeNode::Leaf { class: majority };
        }
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.build(&left_rows, depth - 1)),
            right: Box::new(self.build(&right_rows, depth - 1)),
        }
    }

    /// Minimum weighted-Gini split over all features and midpoints; ties break
    /// to the lowest feature index, then the lowest threshold.
    fn best_split(&self, rows: &[usize], counts: &[f64], total: f64) -> Option<(usize, f64)> {
        let parent = gini(counts, total) * total;
        let d = self.features[rows[0]].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for f in 0..d {
            order.sort_by(|&a, &b| {
                self.features[a][f]
                    .partial_cmp(&self.features[b][f])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut left = vec![0.0; self.n_c];
            let mut left_total = 0.0;
            for w in 0..order.len() - 1 {
                let i = order[w];
                left[self.labels[i]] += self.weights[i];
                left_total += self.weights[i];
                let v = self.features[i][f];
                let next = self.features[order[w + 1]][f];
                if next <= v {
                    continue;
                }
                let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let right_total = total - left_total;
                let score = gini(&left, left_total) * left_total
                    + gini(&right, right_total) * right_total;
                if parent - score <= 1e-12 {
                    continue;
                }
                let threshold = v + (next - v) / 2.0;
                let better = match best {
                    None => true,
                    Some((bs, _, _)) => score < bs - 1e-15,
                };
                if better {
                    best = Some((score, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Trains a CART tree with weighted Gini splitting over the combined
/// general + sensitive feature matrix.
pub fn train_tree(
    d: &Dataset,
    row_weights: &[f64],
    max_depth: usize,
    seed: u64,
) -> Result<Hypothesis, EnsembleError> {
    if row_weights.len() != d.n() {
        return Err(EnsembleError::LengthMismatch);
    }
    if row_weights.iter().any(|&w| w < 0.0) {
        return Err(EnsembleError::Invalid("negative row weight".into()));
    }
    if row_weights.iter().sum::<f64>() <= 0.0 {
        return Err(EnsembleError::AllZeroWeights);
    }
    let features: Vec<Vec<f64>> = (0..d.n()).map(|i| d.feature_row(i)).collect();
    let builder = TreeBuilder {
        features: &features,
        labels: d.labels(),
        weights: row_weights,
        n_c: d.n_c(),
    };
    let rows: Vec<usize> = (0..d.n()).filter(|&i| row_weights[i] > 0.0).collect();
    let root = builder.build(&rows, max_depth);
    Ok(Hypothesis {
        root,
        n_c: d.n_c(),
        meta: TrainingMeta {
            seed,
            max_depth,
            learner: LearnerKind::Tree,
        },
    })
}

/// Argmax over classes of the total weight behind each predicted class; ties
/// break to the lowest class index.
pub fn weighted_vote(member_preds: &[usize], weights: &[f64]) -> Result<usize, EnsembleError> {
    if member_preds.len() != weights.len() {
        return Err(EnsembleError::LengthMismatch);
    }
    let n_c = member_preds.iter().max().map_or(1, |&m| m + 1);
    let mut scores = vec![0.0; n_c];
    for (&p, &w) in member_preds.iter().zip(weights) {
        scores[p] += w;
    }
    Ok(argmax_class(&scores))
}

/// Member hypotheses plus a normalized weight vector ρ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedEnsemble {
    members: Vec<Hypothesis>,
    weights: Vec<f64>,
    pub meta: TrainingMeta,
}

impl WeightedEnsemble {
    pub fn new(
        members: Vec<Hypothesis>,
        weights: Vec<f64>,
        meta: TrainingMeta,
    ) -> Result<Self, EnsembleError> {
        if members.is_empty() {
            return Err(EnsembleError::Invalid("ensemble must have members".into()));
        }
        if members.len() != weights.len() {
            return Err(EnsembleError::LengthMismatch);
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(EnsembleError::Invalid("negative member weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(EnsembleError::Invalid(format!(
                "member weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self {
            members,
            weights,
            meta,
        })
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn predict(&self, features: &[f64]) -> usize {
        let preds: Vec<usize> = self.members.iter().map(|m| m.predict(features)).collect();
        weighted_vote(&preds, &self.weights).expect("lengths match by construction")
    }

    /// Uniform-weight sub-ensemble over the selected member indices; the
    /// original ρ is discarded, matching how pruned sub-ensembles vote.
    pub fn subensemble(&self, indices: &[usize]) -> Result<WeightedEnsemble, EnsembleError> {
        if indices.is_empty() {
            return Err(EnsembleError::Invalid("empty member selection".into()));
        }
        let members: Vec<Hypothesis> =
            indices.iter().map(|&i| self.members[i].clone()).collect();
        let w = 1.0 / indices.len() as f64;
        let mut weights = vec![w; indices.len()];
        // renormalize exactly
        let sum: f64 = weights.iter().sum();
        for v in &mut weights {
            *v /= sum;
        }
        WeightedEnsemble::new(members, weights, self.meta)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), EnsembleError> {
        let doc = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            ensemble: self.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, EnsembleError> {
        let doc: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(EnsembleError::UnsupportedVersion(doc.format_version));
        }
        WeightedEnsemble::new(doc.ensemble.members, doc.ensemble.weights, doc.ensemble.meta)
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    tool_version: String,
    ensemble: WeightedEnsemble,
}

fn bootstrap_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for _ in 0..n {
        counts[rng.gen_range(0..n)] += 1.0;
    }
    counts
}

/// Trains `m` trees on seeded bootstrap resamples with uniform member weights.
/// Each member index owns its own seed stream, so member j is reproducible
/// independently of `m`.
pub fn train_bagging(
    d: &Dataset,
    m: usize,
    max_depth: usize,
    seed: u64,
) -> Result<WeightedEnsemble, EnsembleError> {
    if m == 0 {
        return Err(EnsembleError::Invalid("member count must be positive".into()));
    }
    let mut members = Vec::with_capacity(m);
    for j in 0..m {
        let member_seed = stream_seed(seed, j as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(member_seed);
        let weights = bootstrap_weights(d.n(), &mut rng);
        members.push(train_tree(d, &weights, max_depth, member_seed)?);
    }
    let weights = vec![1.0 / m as f64; m];
    WeightedEnsemble::new(
        members,
        weights,
        TrainingMeta {
            seed,
            max_depth,
            learner: LearnerKind::Bagging,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoostVariant {
    M1,
    Samme,
}

/// Raw member weight for a round with weighted error `eps`:
/// ln((1-eps)/eps), plus ln(n_c - 1) for SAMME.
pub fn boost_alpha(eps: f64, n_c: usize, variant: BoostVariant) -> f64 {
    let base = if eps <= 0.0 {
        ALPHA_CAP
    } else {
        (((1.0 - eps) / eps).ln()).min(ALPHA_CAP)
    };
    match variant {
        BoostVariant::M1 => base,
        BoostVariant::Samme => base + ((n_c - 1) as f64).ln(),
    }
}

/// Sequential reweighting with trees as weak learners. Rounds whose weighted
/// error reaches 1 - 1/n_c are discarded and retried on a bootstrap resample
/// drawn from the current weights (fresh seed stream, at most 10 retries);
/// an error-free round stops training early keeping that member.
pub fn train_adaboost(
    d: &Dataset,
    m: usize,
    max_depth: usize,
    variant: BoostVariant,
    seed: u64,
) -> Result<WeightedEnsemble, EnsembleError> {
    if m == 0 {
        return Err(EnsembleError::Invalid("member count must be positive".into()));
    }
    if variant == BoostVariant::M1 && d.n_c() > 2 {
        return Err(EnsembleError::Invalid(
            "AdaBoost.M1 requires a binary task; use SAMME".into(),
        ));
    }
    let n = d.n();
    let n_c = d.n_c();
    let features: Vec<Vec<f64>> = (0..n).map(|i| d.feature_row(i)).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut alphas = Vec::new();
    let breakdown = 1.0 - 1.0 / n_c as f64;

    'rounds: for t in 0..m {
        let round_seed = stream_seed(seed, t as u64);
        let mut tree = train_tree(d, &w, max_depth, round_seed)?;
        let mut eps = weighted_error(&tree, &features, d.labels(), &w);

        let mut retries = 0;
        while eps >= breakdown {
            retries += 1;
            if retries > MAX_BOOST_RETRIES {
                return Err(EnsembleError::NoUsefulWeakLearner(MAX_BOOST_RETRIES));
            }
            let retry_seed = stream_seed(round_seed, retries as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(retry_seed);
            let resample = weighted_resample(&w, n, &mut rng);
            tree = train_tree(d, &resample, max_depth, retry_seed)?;
            eps = weighted_error(&tree, &features, d.labels(), &w);
        }

        let alpha = boost_alpha(eps, n_c, variant);
        let stop = eps <= 0.0;
        for i in 0..n {
            if tree.predict(&features[i]) != d.labels()[i] {
                w[i] *= alpha.exp().min(1e12);
            }
        }
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        members.push(tree);
        alphas.push(alpha);
        if stop {
            break 'rounds;
        }
    }

    let positive_sum: f64 = alphas.iter().filter(|&&a| a > 0.0).sum();
    if positive_sum <= 0.0 {
        return Err(EnsembleError::NoUsefulWeakLearner(0));
    }
    let weights: Vec<f64> = alphas
        .iter()
        .map(|&a| if a > 0.0 { a / positive_sum } else { 0.0 })
        .collect();
    WeightedEnsemble::new(
        members,
        weights,
        TrainingMeta {
            seed,
            max_depth,
            learner: match variant {
                BoostVariant::M1 => LearnerKind::AdaBoostM1,
                BoostVariant::Samme => LearnerKind::Samme,
            },
        },
    )
}

fn weighted_error(tree: &Hypothesis, features: &[Vec<f64>], labels: &[usize], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let miss: f64 = (0..labels.len())
        .filter(|&i| tree.predict(&features[i]) != labels[i])
        .map(|i| w[i])
        .sum();
    miss / total
}

/// Multinomial resample of size n from the weight distribution, returned as
/// integer multiplicities.
fn weighted_resample(w: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut cumulative = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for &wi in w {
        acc += wi / total;
        cumulative.push(acc);
    }
    let mut counts = vec![0.0; w.len()];
    for _ in 0..n {
        let u: f64 = rng.gen_range(0.0..1.0);
        let idx = cumulative.partition_point(|&c| c < u).min(w.len() - 1);
        counts[idx] += 1.0;
    }
    counts
}

/// Per-member prediction profiles on original and perturbed features plus the
/// cached weighted-vote vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleProfile {
    pub members: Vec<PredictionProfile>,
    pub vote_orig: Vec<usize>,
    pub vote_pert: Vec<usize>,
    pub weights: Vec<f64>,
}

impl EnsembleProfile {
    pub fn n(&self) -> usize {
        self.vote_orig.len()
    }

    pub fn m(&self) -> usize {
        self.members.len()
    }
}

/// Evaluates every member on the original and perturbed feature matrices
/// (general features identical, sensitive columns swapped) and caches the
/// per-row weighted votes.
pub fn build_profile(
    e: &WeightedEnsemble,
    d: &Dataset,
    view: &PerturbedView,
) -> Result<EnsembleProfile, EnsembleError> {
    if view.source_fingerprint() != d.fingerprint() {
        return Err(EnsembleError::FingerprintMismatch);
    }
    let n = d.n();
    let mut members = Vec::with_capacity(e.len());
    for (j, h) in e.members().iter().enumerate() {
        let mut preds_orig = Vec::with_capacity(n);
        let mut preds_pert = Vec::with_capacity(n);
        for i in 0..n {
            preds_orig.push(h.predict(&d.feature_row(i)));
            preds_pert.push(h.predict(&d.feature_row_perturbed(i, view)));
        }
        members.push(PredictionProfile {
            member_id: j,
            preds_orig,
            preds_pert,
        });
    }
    let mut vote_orig = Vec::with_capacity(n);
    let mut vote_pert = Vec::with_capacity(n);
    for i in 0..n {
        let po: Vec<usize> = members.iter().map(|p| p.preds_orig[i]).collect();
        let pp: Vec<usize> = members.iter().map(|p| p.preds_pert[i]).collect();
        vote_orig.push(weighted_vote(&po, e.weights())?);
        vote_pert.push(weighted_vote(&pp, e.weights())?);
    }
    Ok(EnsembleProfile {
        members,
        vote_orig,
        vote_pert,
        weights: e.weights().to_vec(),
    })
}
