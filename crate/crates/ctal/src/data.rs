//! Dataset ingestion, train/test splitting, feature standardization and
//! pool-state bookkeeping.
//!
//! A [`Dataset`] is immutable ground truth: an `N×D` feature matrix plus one
//! class id per row. The active-learning loop never mutates it; the only
//! mutable state is the [`PoolState`] tracking which pool rows have had
//! their labels revealed.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

/// How the label column is addressed in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// Header name of the label column.
    Name(String),
    /// 0-based column index into the raw CSV record.
    Index(usize),
}

/// Encoding applied to non-numeric feature columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CategoricalMode {
    /// Integer codes in order of first appearance.
    #[default]
    Ordinal,
    /// One indicator column per distinct value.
    OneHot,
}

/// CSV ingestion options.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
    pub categorical_mode: CategoricalMode,
    /// Whether the first row is a header. Without a header, columns are
    /// named `x0..x{k}` and the label column must be given by index.
    pub has_header: bool,
}

impl CsvOptions {
    pub fn new(label_column: LabelColumn) -> Self {
        Self {
            label_column,
            categorical_mode: CategoricalMode::Ordinal,
            has_header: true,
        }
    }
}

/// An immutable classification dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `N×D` feature matrix; all values finite.
    pub features: Array2<f64>,
    /// Class id per row, each in `0..n_classes`.
    pub labels: Vec<usize>,
    /// Number of classes, at least 2.
    pub n_classes: usize,
    /// One name per feature column.
    pub feature_names: Vec<String>,
    /// Original label strings, indexed by class id.
    pub class_names: Vec<String>,
    /// Dataset name, usually the file stem.
    pub name: String,
}

impl Dataset {
    /// Builds a dataset, validating the structural invariants: non-empty
    /// finite features, contiguous class ids with every class present, and
    /// matching name lists.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        feature_names: Vec<String>,
        class_names: Vec<String>,
        name: impl Into<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || labels.is_empty() {
            return Err(Error::EmptyDataset { path: name.into().into() });
        }
        if d == 0 {
            return Err(Error::InvalidConfig("dataset has zero feature columns".into()));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
        }
        if n_classes < 2 {
            return Err(Error::SingleClass);
        }
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: feature_names.len() });
        }
        if class_names.len() != n_classes {
            return Err(Error::DimensionMismatch { expected: n_classes, found: class_names.len() });
        }
        let mut seen = vec![false; n_classes];
        for &label in &labels {
            if label >= n_classes {
                return Err(Error::ClassOutOfRange { id: label, n_classes });
            }
            seen[label] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::InvalidConfig(
                "some class id never appears in the dataset".into(),
            ));
        }
        for (idx, &v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BadNumericCell {
                    row: idx / d,
                    column: feature_names[idx % d].clone(),
                    value: v.to_string(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            feature_names,
            class_names,
            name: name.into(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Original label string for a class id.
    pub fn decode_label(&self, class_id: usize) -> &str {
        &self.class_names[class_id]
    }
}

/// Loads a CSV file into a [`Dataset`].
///
/// The file must be UTF-8 with comma separators and `.` decimal points.
/// Feature columns where every cell parses as a finite number are taken as
/// numeric; all other columns are treated as categorical and encoded per
/// `options.categorical_mode`. Labels are re-encoded to contiguous ids in
/// order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .from_reader(file);

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let row: Vec<String> = record.iter().map(|s| s.trim().to_string()).collect();
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset { path: path.to_path_buf() });
    }
    let n_columns = rows[0].len();

    let column_names: Vec<String> = if options.has_header {
        let headers = reader.headers().map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if headers.len() != n_columns {
            return Err(Error::RaggedRow {
                row: 0,
                expected: headers.len(),
                found: n_columns,
            });
        }
        headers.iter().map(|s| s.trim().to_string()).collect()
    } else {
        (0..n_columns).map(|i| format!("x{i}")).collect()
    };

    let label_index = match &options.label_column {
        LabelColumn::Index(i) => {
            if *i >= n_columns {
                return Err(Error::LabelColumnNotFound(i.to_string()));
            }
            *i
        }
        LabelColumn::Name(name) => column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::LabelColumnNotFound(name.clone()))?,
    };

    // Reject missing values anywhere before any type detection.
    for (r, row) in rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    row: r + 1,
                    column: column_names[c].clone(),
                });
            }
        }
    }

    // Label encoding by first appearance.
    let mut class_names: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(rows.len());
    for row in &rows {
        let raw = &row[label_index];
        let id = match class_names.iter().position(|c| c == raw) {
            Some(id) => id,
            None => {
                class_names.push(raw.clone());
                class_names.len() - 1
            }
        };
        labels.push(id);
    }
    if class_names.len() < 2 {
        return Err(Error::SingleClass);
    }

    // Per-column type detection over the feature columns.
    let feature_columns: Vec<usize> = (0..n_columns).filter(|&c| c != label_index).collect();
    let mut encoded_columns: Vec<(String, Vec<f64>)> = Vec::new();
    for &c in &feature_columns {
        let parsed: Option<Vec<f64>> = rows
            .iter()
            .map(|row| row[c].parse::<f64>().ok())
            .collect();
        match parsed {
            Some(values) => {
                if let Some(r) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::BadNumericCell {
                        row: r + 1,
                        column: column_names[c].clone(),
                        value: rows[r][c].clone(),
                    });
                }
                encoded_columns.push((column_names[c].clone(), values));
            }
            None => {
                let mut categories: Vec<String> = Vec::new();
                let codes: Vec<usize> = rows
                    .iter()
                    .map(|row| {
                        let cell = &row[c];
                        match categories.iter().position(|v| v == cell) {
                            Some(code) => code,
                            None => {
                                categories.push(cell.clone());
                                categories.len() - 1
                            }
                        }
                    })
                    .collect();
                match options.categorical_mode {
                    CategoricalMode::Ordinal => {
                        encoded_columns.push((
                            column_names[c].clone(),
                            codes.iter().map(|&code| code as f64).collect(),
                        ));
                    }
                    CategoricalMode::OneHot => {
                        for (code, category) in categories.iter().enumerate() {
                            let indicator: Vec<f64> = codes
                                .iter()
                                .map(|&v| if v == code { 1.0 } else { 0.0 })
                                .collect();
                            encoded_columns.push((
                                format!("{}={}", column_names[c], category),
                                indicator,
                            ));
                        }
                    }
                }
            }
        }
    }
    if encoded_columns.is_empty() {
        return Err(Error::InvalidConfig("dataset has zero feature columns".into()));
    }

    let n = rows.len();
    let d = encoded_columns.len();
    let mut features = Array2::zeros((n, d));
    let mut feature_names = Vec::with_capacity(d);
    for (j, (name, values)) in encoded_columns.into_iter().enumerate() {
        feature_names.push(name);
        for (i, v) in values.into_iter().enumerate() {
            features[[i, j]] = v;
        }
    }

    let dataset_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Dataset::new(
        features,
        labels,
        class_names.len(),
        feature_names,
        class_names,
        dataset_name,
    )
}

/// Splits row indices into a training pool and a test set.
///
/// The test size is `N·test_fraction` rounded half-up; the draw is uniform
/// without replacement and deterministic given the seed. Both halves are
/// returned sorted.
pub fn train_test_split(
    dataset: &Dataset,
    test_fraction: f64,
    rng_seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidTestFraction(test_fraction));
    }
    let n = dataset.n_samples();
    let test_size = (n as f64 * test_fraction + 0.5).floor() as usize;
    if test_size >= n {
        return Err(Error::EmptyTrainSide { n, test_size });
    }
    let mut rng = rng_from_seed(rng_seed);
    let mut test: Vec<usize> = sample(&mut rng, n, test_size).into_vec();
    test.sort_unstable();
    let test_set: BTreeSet<usize> = test.iter().copied().collect();
    let train: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
    Ok((train, test))
}

/// Per-feature affine transform to zero mean and unit variance, fitted on
/// the training pool only. Zero-variance features map to zero.
#[derive(Debug, Clone)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    /// Fits per-feature mean and (population) standard deviation over the
    /// given rows.
    pub fn fit(features: ArrayView2<'_, f64>, train_indices: &[usize]) -> Result<Self> {
        if train_indices.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let d = features.ncols();
        let n = train_indices.len() as f64;
        let mut means = vec![0.0; d];
        for &i in train_indices {
            for j in 0..d {
                means[j] += features[[i, j]];
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; d];
        for &i in train_indices {
            for j in 0..d {
                let diff = features[[i, j]] - means[j];
                stds[j] += diff * diff;
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
        }
        Ok(Self { means, stds })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// Applies the transform to a whole matrix.
    pub fn transform(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(features.ncols(), self.means.len(), "feature dimension mismatch");
        let mut out = features.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if self.stds[j] > 0.0 {
                    (*v - self.means[j]) / self.stds[j]
                } else {
                    0.0
                };
            }
        }
        out
    }
}

/// Disjoint labeled/unlabeled index sets over the training pool.
///
/// The labeled set only ever grows; there is no API to unlabel a sample.
#[derive(Debug, Clone)]
pub struct PoolState {
    pool: Vec<usize>,
    labeled: BTreeSet<usize>,
    unlabeled: BTreeSet<usize>,
}

impl PoolState {
    /// A fresh pool with every index unlabeled.
    pub fn new(pool_indices: &[usize]) -> Self {
        let mut pool = pool_indices.to_vec();
        pool.sort_unstable();
        pool.dedup();
        let unlabeled: BTreeSet<usize> = pool.iter().copied().collect();
        Self {
            pool,
            labeled: BTreeSet::new(),
            unlabeled,
        }
    }

    /// Moves indices from unlabeled to labeled. Panics on an index that is
    /// not currently unlabeled; the harness never produces one.
    pub fn label(&mut self, indices: &[usize]) {
        for &i in indices {
            assert!(
                self.unlabeled.remove(&i),
                "index {i} is not in the unlabeled pool"
            );
            self.labeled.insert(i);
        }
    }

    pub fn pool_indices(&self) -> &[usize] {
        &self.pool
    }

    pub fn labeled(&self) -> impl Iterator<Item = usize> + '_ {
        self.labeled.iter().copied()
    }

    pub fn unlabeled(&self) -> impl Iterator<Item = usize> + '_ {
        self.unlabeled.iter().copied()
    }

    /// Labeled indices in ascending order.
    pub fn labeled_vec(&self) -> Vec<usize> {
        self.labeled.iter().copied().collect()
    }

    /// Unlabeled indices in ascending order.
    pub fn unlabeled_vec(&self) -> Vec<usize> {
        self.unlabeled.iter().copied().collect()
    }

    pub fn is_labeled(&self, index: usize) -> bool {
        self.labeled.contains(&index)
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled.len()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    /// Size of the whole pool.
    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }
}
