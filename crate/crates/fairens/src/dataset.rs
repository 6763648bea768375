//! Data model, CSV ingestion, sensitive-attribute perturbation, k-fold
//! splitting, and synthetic biased-data generation.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column '{0}' in CSV header")]
    MissingColumn(String),
    #[error("unparseable value at row {row}, column '{column}'")]
    UnparseableValue { row: usize, column: String },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("dataset has no sensitive attributes")]
    NoSensitiveAttributes,
    #[error("sensitive attribute '{0}' has cardinality < 2")]
    DegenerateAttribute(String),
    #[error("cannot split {n} rows into {k} folds")]
    TooFewRows { n: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
}

/// A sensitive-attribute column declaration: values in the CSV must be
/// integers in `0..cardinality`; `privileged_value` defines the a=1 group
/// for the group-fairness measures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitiveColumn {
    pub name: String,
    pub cardinality: u32,
    pub privileged_value: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
}

/// How a CSV maps onto a [`Dataset`]. Supplied as a JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub label: String,
    /// When present, the task is binary: rows whose label equals this string
    /// map to class 1, everything else to class 0. When absent, labels must
    /// parse as non-negative integer class indices.
    #[serde(default)]
    pub positive_label: Option<String>,
    #[serde(default)]
    pub sensitive: Vec<SensitiveColumn>,
    #[serde(default)]
    pub categorical: Vec<CategoricalColumn>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
}

fn default_delimiter() -> String {
    ",".to_string()
}

impl DatasetSchema {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let schema: DatasetSchema =
            serde_json::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        for s in &schema.sensitive {
            if s.privileged_value >= s.cardinality {
                return Err(DataError::Schema(format!(
                    "privileged value {} out of range for '{}' (cardinality {})",
                    s.privileged_value, s.name, s.cardinality
                )));
            }
        }
        if schema.delimiter.as_bytes().len() != 1 {
            return Err(DataError::Schema("delimiter must be one byte".into()));
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn delimiter_byte(&self) -> u8 {
        self.delimiter.as_bytes()[0]
    }
}

/// Feature matrix split into general and sensitive attributes, plus labels.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    general: Vec<Vec<f64>>,
    sensitive: Vec<Vec<u32>>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    sensitive_names: Vec<String>,
    sensitive_cards: Vec<u32>,
    privileged_values: Vec<u32>,
    n_c: usize,
}

impl Dataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        general: Vec<Vec<f64>>,
        sensitive: Vec<Vec<u32>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        sensitive_names: Vec<String>,
        sensitive_cards: Vec<u32>,
        privileged_values: Vec<u32>,
        n_c: usize,
    ) -> Result<Self, DataError> {
        let n = labels.len();
        if general.len() != n || sensitive.len() != n {
            return Err(DataError::Invalid("row counts disagree".into()));
        }
        if n_c < 2 {
            return Err(DataError::Invalid("n_c must be at least 2".into()));
        }
        if labels.iter().any(|&y| y >= n_c) {
            return Err(DataError::Invalid("label out of range".into()));
        }
        let n_a = sensitive_cards.len();
        if sensitive_names.len() != n_a || privileged_values.len() != n_a {
            return Err(DataError::Invalid("sensitive metadata lengths disagree".into()));
        }
        for row in &sensitive {
            if row.len() != n_a {
                return Err(DataError::Invalid("sensitive row width disagrees".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v >= sensitive_cards[j] {
                    return Err(DataError::Invalid(format!(
                        "sensitive value {} exceeds cardinality of '{}'",
                        v, sensitive_names[j]
                    )));
                }
            }
        }
        let d_g = feature_names.len();
        if general.iter().any(|r| r.len() != d_g) {
            return Err(DataError::Invalid("general row width disagrees".into()));
        }
        Ok(Self {
            general,
            sensitive,
            labels,
            feature_names,
            sensitive_names,
            sensitive_cards,
            privileged_values,
            n_c,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_a(&self) -> usize {
        self.sensitive_cards.len()
    }

    pub fn d_g(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sensitive_names(&self) -> &[String] {
        &self.sensitive_names
    }

    pub fn sensitive_cards(&self) -> &[u32] {
        &self.sensitive_cards
    }

    pub fn privileged_values(&self) -> &[u32] {
        &self.privileged_values
    }

    pub fn sensitive_value(&self, row: usize, attr: usize) -> u32 {
        self.sensitive[row][attr]
    }

    /// Binary privileged-group membership vector for sensitive attribute `attr`
    /// (true = privileged). Multi-valued attributes pool everything that is not
    /// the privileged value into the marginalised group.
    pub fn privileged_group(&self, attr: usize) -> Vec<bool> {
        let p = self.privileged_values[attr];
        self.sensitive.iter().map(|r| r[attr] == p).collect()
    }

    /// Combined feature row seen by the learners: general features followed by
    /// the sensitive attributes cast to f64.
    pub fn feature_row(&self, row: usize) -> Vec<f64> {
        let mut v = self.general[row].clone();
        v.extend(self.sensitive[row].iter().map(|&a| a as f64));
        v
    }

    /// Same as [`feature_row`](Self::feature_row) but with the sensitive columns
    /// replaced by the perturbed assignment.
    pub fn feature_row_perturbed(&self, row: usize, view: &PerturbedView) -> Vec<f64> {
        let mut v = self.general[row].clone();
        v.extend(view.perturbed[row].iter().map(|&a| a as f64));
        v
    }

    /// Content hash over all fields; identifies a dataset for perturbed views.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.n_c as u64).to_le_bytes());
        for row in &self.general {
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for row in &self.sensitive {
            for v in row {
                h.update(v.to_le_bytes());
            }
        }
        for y in &self.labels {
            h.update((*y as u64).to_le_bytes());
        }
        for c in &self.sensitive_cards {
            h.update(c.to_le_bytes());
        }
        let mut out = String::new();
        for b in h.finalize() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    /// Row-subset copy, preserving order of `indices`.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            general: indices.iter().map(|&i| self.general[i].clone()).collect(),
            sensitive: indices.iter().map(|&i| self.sensitive[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            sensitive_names: self.sensitive_names.clone(),
            sensitive_cards: self.sensitive_cards.clone(),
            privileged_values: self.privileged_values.clone(),
            n_c: self.n_c,
        }
    }
}

/// A paired sensitive-attribute assignment aligned row-for-row with its source
/// dataset; input to all discriminative-risk computations.
#[derive(Debug, Clone)]
pub struct PerturbedView {
    perturbed: Vec<Vec<u32>>,
    source_fingerprint: String,
    seed: u64,
}

impl PerturbedView {
    pub fn perturbed(&self) -> &[Vec<u32>] {
        &self.perturbed
    }

    pub fn source_fingerprint(&self) -> &str {
        &self.source_fingerprint
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws, for every row and attribute, a value uniformly from the attribute's
/// domain minus the original value. Binary attributes therefore flip.
pub fn perturb_sensitive(d: &Dataset, seed: u64) -> Result<PerturbedView, DataError> {
    if d.n_a() == 0 {
        return Err(DataError::NoSensitiveAttributes);
    }
    for (j, &c) in d.sensitive_cards.iter().enumerate() {
        if c < 2 {
            return Err(DataError::DegenerateAttribute(d.sensitive_names[j].clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbed = Vec::with_capacity(d.n());
    for row in &d.sensitive {
        let mut out = Vec::with_capacity(row.len());
        for (j, &orig) in row.iter().enumerate() {
            let c = d.sensitive_cards[j];
            // Sample over the domain with the original value removed.
            let r = rng.gen_range(0..c - 1);
            out.push(if r < orig { r } else { r + 1 });
        }
        perturbed.push(out);
    }
    Ok(PerturbedView {
        perturbed,
        source_fingerprint: d.fingerprint(),
        seed,
    })
}

/// Seeded k-fold assignment; fold sizes differ by at most one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    if k < 2 {
        return Err(DataError::InvalidFoldCount(k));
    }
    if k > n {
        return Err(DataError::TooFewRows { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut assignments = vec![0usize; n];
    for (pos, &row) in perm.iter().enumerate() {
        assignments[row] = pos % k;
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Generates a binary task with one binary sensitive attribute. With
/// probability `bias` a row's label is copied from its sensitive attribute;
/// otherwise it comes from a fixed linear rule on the general features plus
/// bounded noise.
pub fn synth_biased(n: usize, bias: f64, d_g: usize, seed: u64) -> Dataset {
    assert!(n >= 10, "synth_biased requires n >= 10");
    assert!(d_g >= 1, "synth_biased requires d_g >= 1");
    assert!((0.0..=1.0).contains(&bias), "bias must lie in [0,1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..d_g).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut general = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d_g).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a: u32 = rng.gen_range(0..2);
        let u: f64 = rng.gen_range(0.0..1.0);
        let noise: f64 = rng.gen_range(-0.3..0.3);
        let y = if u < bias {
            a as usize
        } else {
            let score: f64 = w.iter().zip(&x).map(|(wi, xi)| wi * xi).sum::<f64>() + noise;
            usize::from(score > 0.0)
        };
        general.push(x);
        sensitive.push(vec![a]);
        labels.push(y);
    }
    Dataset::new(
        general,
        sensitive,
        labels,
        (0..d_g).map(|j| format!("x{j}")).collect(),
        vec!["attr".to_string()],
        vec![2],
        vec![1],
        2,
    )
    .expect("synthetic dataset construction is infallible")
}

/// Schema matching the CSV layout written by [`write_csv`] for a synthetic
/// dataset.
pub fn synth_schema() -> DatasetSchema {
    DatasetSchema {
        label: "label".to_string(),
        positive_label: Some("1".to_string()),
        sensitive: vec![SensitiveColumn {
            name: "attr".to_string(),
            cardinality: 2,
            privileged_value: 1,
        }],
        categorical: vec![],
        delimiter: ",".to_string(),
    }
}

/// Loads a dataset from a delimited file per the schema. Categorical columns
/// are one-hot binarized (one 0/1 feature per distinct value, values sorted);
/// every remaining non-label, non-sensitive column must parse as f64.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte())
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();

    let col_index = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };

    let label_idx = col_index(&schema.label)?;
    let sensitive_idx: Vec<usize> = schema
        .sensitive
        .iter()
        .map(|s| col_index(&s.name))
        .collect::<Result<_, _>>()?;
    let categorical_idx: Vec<usize> = schema
        .categorical
        .iter()
        .map(|c| col_index(&c.name))
        .collect::<Result<_, _>>()?;

    let numeric_idx: Vec<usize> = (0..headers.len())
        .filter(|i| {
            *i != label_idx && !sensitive_idx.contains(i) && !categorical_idx.contains(i)
        })
        .collect();

    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
    if records.is_empty() {
        return Err(DataError::EmptyFile);
    }

    // First pass: collect categorical vocabularies (sorted for determinism).
    let mut vocab: Vec<Vec<String>> = vec![Vec::new(); categorical_idx.len()];
    for rec in &records {
        for (slot, &ci) in categorical_idx.iter().enumerate() {
            let v = rec.get(ci).unwrap_or("").to_string();
            if !vocab[slot].contains(&v) {
                vocab[slot].push(v);
            }
        }
    }
    for v in &mut vocab {
        v.sort();
    }

    let mut general = Vec::with_capacity(records.len());
    let mut sensitive = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut max_label = 0usize;

    for (row, rec) in records.iter().enumerate() {
        let field = |idx: usize| rec.get(idx).unwrap_or("");

        let raw_label = field(label_idx);
        let y = match &schema.positive_label {
            Some(pos) => usize::from(raw_label == pos),
            None => raw_label
                .trim()
                .parse::<usize>()
                .map_err(|_| DataError::UnparseableValue {
                    row,
                    column: schema.label.clone(),
                })?,
        };
        max_label = max_label.max(y);

        let mut srow = Vec::with_capacity(sensitive_idx.len());
        for (s, &si) in schema.sensitive.iter().zip(&sensitive_idx) {
            let v: u32 = field(si)
                .trim()
                .parse()
                .map_err(|_| DataError::UnparseableValue {
                    row,
                    column: s.name.clone(),
                })?;
            if v >= s.cardinality {
                return Err(DataError::UnparseableValue {
                    row,
                    column: s.name.clone(),
                });
            }
            srow.push(v);
        }

        let mut grow = Vec::new();
        for &ni in &numeric_idx {
            let raw = field(ni);
            if raw.trim().is_empty() {
                return Err(DataError::UnparseableValue {
                    row,
                    column: headers[ni].clone(),
                });
            }
            let v: f64 = raw.trim().parse().map_err(|_| DataError::UnparseableValue {
                row,
                column: headers[ni].clone(),
            })?;
            grow.push(v);
        }
        for (slot, _) in categorical_idx.iter().enumerate() {
            let v = field(categorical_idx[slot]);
            for known in &vocab[slot] {
                grow.push(if known == v { 1.0 } else { 0.0 });
            }
        }
        general.push(grow);
        sensitive.push(srow);
        labels.push(y);
    }

    let mut feature_names: Vec<String> =
        numeric_idx.iter().map(|&i| headers[i].clone()).collect();
    for (slot, &ci) in categorical_idx.iter().enumerate() {
        for v in &vocab[slot] {
            feature_names.push(format!("{}={}", headers[ci], v));
        }
    }

    let n_c = if schema.positive_label.is_some() {
        2
    } else {
        (max_label + 1).max(2)
    };

    Dataset::new(
        general,
        sensitive,
        labels,
        feature_names,
        schema.sensitive.iter().map(|s| s.name.clone()).collect(),
        schema.sensitive.iter().map(|s| s.cardinality).collect(),
        schema.sensitive.iter().map(|s| s.privileged_value).collect(),
        n_c,
    )
}

/// Writes a dataset back to CSV in the layout [`load_csv`] accepts with
/// [`synth_schema`]-style schemas: general features, sensitive columns, label.
/// f64 values use the shortest round-trip representation, so load ∘ save is
/// bit-exact on all fields.
pub fn write_csv(d: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    let mut header: Vec<String> = d.feature_names.to_vec();
    header.extend(d.sensitive_names.iter().cloned());
    header.push("label".to_string());
    w.write_record(&header)?;
    for i in 0..d.n() {
        let mut rec: Vec<String> = d.general[i].iter().map(|v| format!("{v}")).collect();
        rec.extend(d.sensitive[i].iter().map(|v| v.to_string()));
        rec.push(d.labels[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Schema describing a dataset as written by [`write_csv`].
pub fn csv_schema_for(d: &Dataset) -> DatasetSchema {
    DatasetSchema {
        label: "label".to_string(),
        positive_label: if d.n_c == 2 { Some("1".to_string()) } else { None },
        sensitive: d
            .sensitive_names
            .iter()
            .zip(&d.sensitive_cards)
            .zip(&d.privileged_values)
            .map(|((name, &cardinality), &privileged_value)| SensitiveColumn {
                name: name.clone(),
                cardinality,
                privileged_value,
            })
            .collect(),
        categorical: vec![],
        delimiter: ",".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn toy() -> Dataset {
        synth_biased(40, 0.5, 3, 11)
    }

    #[test]
    fn perturb_binary_attribute_flips() {
        let d = Dataset::new(
            vec![vec![0.0]; 4],
            vec![vec![0], vec![1], vec![1], vec![0]],
            vec![0, 1, 0, 1],
            vec!["x0".into()],
            vec!["a".into()],
            vec![2],
            vec![1],
            2,
        )
        .unwrap();
        let v = perturb_sensitive(&d, 3).unwrap();
        let col: Vec<u32> = v.perturbed().iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![1, 0, 0, 1]);
    }

    #[test]
    fn perturb_ternary_never_reproduces_original() {
        let d = Dataset::new(
            vec![vec![0.0]; 30],
            (0..30).map(|i| vec![(i % 3) as u32]).collect(),
            vec![0; 30],
            vec!["x0".into()],
            vec!["a".into()],
            vec![3],
            vec![0],
            2,
        )
        .unwrap();
        let v = perturb_sensitive(&d, 7).unwrap();
        for i in 0..30 {
            let p = v.perturbed()[i][0];
            assert_ne!(p, d.sensitive_value(i, 0));
            assert!(p < 3);
        }
    }

    #[test]
    fn perturb_without_sensitive_attrs_errors() {
        let d = Dataset::new(
            vec![vec![0.0]; 4],
            vec![vec![]; 4],
            vec![0, 1, 0, 1],
            vec!["x0".into()],
            vec![],
            vec![],
            vec![],
            2,
        )
        .unwrap();
        assert!(matches!(
            perturb_sensitive(&d, 1),
            Err(DataError::NoSensitiveAttributes)
        ));
    }

    #[test]
    fn perturb_is_deterministic_and_binary_flip_is_involution() {
        let d = toy();
        let v1 = perturb_sensitive(&d, 5).unwrap();
        let v2 = perturb_sensitive(&d, 5).unwrap();
        assert_eq!(v1.perturbed(), v2.perturbed());
        // For binary attributes, perturbing the perturbed assignment with any
        // seed returns the original.
        let d2 = Dataset::new(
            (0..d.n()).map(|i| d.feature_row(i)[..d.d_g()].to_vec()).collect(),
            v1.perturbed().to_vec(),
            d.labels().to_vec(),
            d.feature_names().to_vec(),
            d.sensitive_names().to_vec(),
            d.sensitive_cards().to_vec(),
            d.privileged_values().to_vec(),
            d.n_c(),
        )
        .unwrap();
        let v3 = perturb_sensitive(&d2, 999).unwrap();
        for i in 0..d.n() {
            assert_eq!(v3.perturbed()[i][0], d.sensitive_value(i, 0));
        }
    }

    #[test]
    fn kfold_exact_division() {
        let plan = kfold_split(10, 5, 1).unwrap();
        for f in 0..5 {
            assert_eq!(plan.test_indices(f).len(), 2);
        }
    }

    #[test]
    fn kfold_118_rows_5_folds() {
        let plan = kfold_split(118, 5, 42).unwrap();
        let mut sizes: Vec<usize> = (0..5).map(|f| plan.test_indices(f).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![23, 23, 24, 24, 24]);
    }

    #[test]
    fn kfold_too_few_rows() {
        assert!(matches!(
            kfold_split(3, 5, 0),
            Err(DataError::TooFewRows { n: 3, k: 5 })
        ));
    }

    proptest! {
        #[test]
        fn kfold_partitions_all_rows(n in 5usize..200, k in 2usize..5, seed in 0u64..1000) {
            prop_assume!(k <= n);
            let plan = kfold_split(n, k, seed).unwrap();
            let mut seen = vec![false; n];
            for f in 0..k {
                for i in plan.test_indices(f) {
                    prop_assert!(!seen[i], "row {} assigned twice", i);
                    seen[i] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
            let sizes: Vec<usize> = (0..k).map(|f| plan.test_indices(f).len()).collect();
            let lo = *sizes.iter().min().unwrap();
            let hi = *sizes.iter().max().unwrap();
            prop_assert!(hi - lo <= 1);
            prop_assert!(lo >= 1);
        }
    }

    #[test]
    fn synth_full_bias_copies_sensitive() {
        let d = synth_biased(100, 1.0, 4, 9);
        for i in 0..d.n() {
            assert_eq!(d.labels()[i], d.sensitive_value(i, 0) as usize);
        }
    }

    #[test]
    fn synth_shape_and_determinism() {
        let a = synth_biased(200, 0.5, 3, 3);
        let b = synth_biased(200, 0.5, 3, 3);
        assert_eq!(a.n(), 200);
        assert_eq!(a.n_c(), 2);
        assert_eq!(a.n_a(), 1);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = synth_biased(60, 0.4, 3, 21);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.csv");
        write_csv(&d, &path).unwrap();
        let schema = csv_schema_for(&d);
        let d2 = load_csv(&path, &schema).unwrap();
        assert_eq!(d.fingerprint(), d2.fingerprint());
    }

    #[test]
    fn load_csv_header_only_is_empty() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("empty.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "x0,attr,label").unwrap();
        let err = load_csv(&path, &synth_schema()).unwrap_err();
        assert!(matches!(err, DataError::EmptyFile));
    }

    #[test]
    fn load_csv_bad_label_value() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "x0,attr,label").unwrap();
        writeln!(f, "0.5,1,abc").unwrap();
        let mut schema = synth_schema();
        schema.positive_label = None; // numeric label column
        let err = load_csv(&path, &schema).unwrap_err();
        assert!(matches!(err, DataError::UnparseableValue { row: 0, .. }));
    }

    #[test]
    fn load_csv_missing_column() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "x0,label").unwrap();
        writeln!(f, "0.5,1").unwrap();
        let err = load_csv(&path, &synth_schema()).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(_)));
    }

    #[test]
    fn categorical_one_hot() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("c.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "city,attr,label").unwrap();
        writeln!(f, "b,1,1").unwrap();
        writeln!(f, "a,0,0").unwrap();
        writeln!(f, "b,0,1").unwrap();
        let mut schema = synth_schema();
        schema.categorical = vec![CategoricalColumn { name: "city".into() }];
        let d = load_csv(&path, &schema).unwrap();
        assert_eq!(d.feature_names(), &["city=a".to_string(), "city=b".to_string()]);
        assert_eq!(d.feature_row(0)[..2], [0.0, 1.0]);
        assert_eq!(d.feature_row(1)[..2], [1.0, 0.0]);
    }

    #[test]
    fn subset_preserves_metadata() {
        let d = toy();
        let s = d.subset(&[3, 1, 7]);
        assert_eq!(s.n(), 3);
        assert_eq!(s.labels()[0], d.labels()[3]);
        assert_eq!(s.n_c(), d.n_c());
    }
}
