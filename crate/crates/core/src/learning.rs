//! Desk-scale learning substrate: datasets, softmax-regression training,
//! evaluation, and the aggregation rules (mean and coordinate-wise median).
//!
//! The model is multinomial logistic regression with bias. A model for
//! `d` features and `C` classes has shape `[d+1, C]`: entry `(j, c)` at
//! `j·C + c` is the weight of feature `j` for class `c`, and row `d` holds
//! the per-class biases. Updates travel as parameter deltas (trained model
//! minus global), so aggregating deltas or models coincides when local
//! training starts from the current global model.
//!
//! Everything here is a pure function of its inputs; training is bitwise
//! deterministic given the config seed.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::params::{ParamError, ParamVector};
use crate::seed;

/// Standard deviation of freshly initialized model parameters.
pub const INIT_SCALE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("label {label} out of range for {classes} classes (row {row})")]
    LabelOutOfRange {
        row: usize,
        label: i64,
        classes: usize,
    },
    #[error("csv record {record}: {msg}")]
    CsvParse { record: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

/// A labeled feature matrix kept locally by one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>, // n × d, row-major
    labels: Vec<u32>,
    d: usize,
    n_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<u32>,
        d: usize,
        n_classes: usize,
    ) -> Result<Self, LearnError> {
        if labels.is_empty() {
            return Err(LearnError::InvalidArgument(
                "dataset must contain at least one sample".into(),
            ));
        }
        if d == 0 || n_classes == 0 {
            return Err(LearnError::InvalidArgument(
                "feature and class counts must be positive".into(),
            ));
        }
        if features.len() != labels.len() * d {
            return Err(LearnError::InvalidArgument(format!(
                "feature matrix has {} values, expected {} × {}",
                features.len(),
                labels.len(),
                d
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::InvalidArgument(format!(
                "non-finite feature at flat index {i}"
            )));
        }
        for (row, &label) in labels.iter().enumerate() {
            if label as usize >= n_classes {
                return Err(LearnError::LabelOutOfRange {
                    row,
                    label: label as i64,
                    classes: n_classes,
                });
            }
        }
        Ok(Self {
            features,
            labels,
            d,
            n_classes,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// Count of samples carrying each label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self, LearnError> {
        let mut features = Vec::with_capacity(rows.len() * self.d);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.n() {
                return Err(LearnError::InvalidArgument(format!(
                    "row {i} out of bounds for {} samples",
                    self.n()
                )));
            }
            features.extend_from_slice(self.feature_row(i));
            labels.push(self.labels[i]);
        }
        Self::new(features, labels, self.d, self.n_classes)
    }

    /// Loads a dataset from CSV with header `f0,...,f{d-1},label`.
    /// Labels must be plain non-negative integers. When `n_classes` is
    /// `None`, the class count is inferred as max label + 1.
    pub fn from_csv<R: Read>(reader: R, n_classes: Option<usize>) -> Result<Self, LearnError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| LearnError::CsvParse {
                record: 0,
                msg: e.to_string(),
            })?
            .clone();
        if headers.len() < 2 || headers.iter().next_back() != Some("label") {
            return Err(LearnError::CsvParse {
                record: 0,
                msg: "header must be f0,...,f{d-1},label".into(),
            });
        }
        let d = headers.len() - 1;
        for (i, name) in headers.iter().take(d).enumerate() {
            if name != format!("f{i}") {
                return Err(LearnError::CsvParse {
                    record: 0,
                    msg: format!("feature column {i} must be named f{i}, got {name}"),
                });
            }
        }

        let mut features = Vec::new();
        let mut labels: Vec<u32> = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| LearnError::CsvParse {
                record: row + 1,
                msg: e.to_string(),
            })?;
            if record.len() != d + 1 {
                return Err(LearnError::CsvParse {
                    record: row + 1,
                    msg: format!("expected {} fields, got {}", d + 1, record.len()),
                });
            }
            for field in record.iter().take(d) {
                let v: f64 = field.parse().map_err(|_| LearnError::CsvParse {
                    record: row + 1,
                    msg: format!("bad feature value {field:?}"),
                })?;
                features.push(v);
            }
            let label_field = &record[d];
            let label: u32 = label_field.parse().map_err(|_| LearnError::CsvParse {
                record: row + 1,
                msg: format!("label must be a non-negative integer, got {label_field:?}"),
            })?;
            labels.push(label);
        }
        let classes = match n_classes {
            Some(c) => c,
            None => labels.iter().max().map(|&m| m as usize + 1).unwrap_or(0),
        };
        Self::new(features, labels, d, classes)
    }

    pub fn from_csv_path<P: AsRef<Path>>(
        path: P,
        n_classes: Option<usize>,
    ) -> Result<Self, LearnError> {
        let file = File::open(&path).map_err(|e| LearnError::Io(e.to_string()))?;
        Self::from_csv(file, n_classes)
    }
}

/// Local training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<(), LearnError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(LearnError::InvalidArgument(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(LearnError::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Shape of a softmax-regression model: `[d+1, C]` (weights plus bias row).
pub fn model_shape(d: usize, n_classes: usize) -> Vec<usize> {
    vec![d + 1, n_classes]
}

/// Deterministic random model: i.i.d. N(0, INIT_SCALE²) entries.
pub fn init_model(seed_value: u64, shape: &[usize]) -> Result<ParamVector, LearnError> {
    if shape.is_empty() || shape.iter().product::<usize>() == 0 {
        return Err(LearnError::InvalidArgument(
            "model shape must be non-empty with positive dimensions".into(),
        ));
    }
    let len: usize = shape.iter().product();
    let normal = Normal::new(0.0, INIT_SCALE).expect("valid normal");
    let mut rng = seed::rng(seed_value);
    let values = (0..len).map(|_| normal.sample(&mut rng)).collect();
    Ok(ParamVector::new(values, shape.to_vec())?)
}

fn check_model(model: &ParamVector, data: &Dataset) -> Result<(), LearnError> {
    let expected = (data.d() + 1) * data.n_classes();
    if model.len() != expected {
        return Err(LearnError::InvalidArgument(format!(
            "model has {} parameters but the dataset needs {} (d={}, classes={})",
            model.len(),
            expected,
            data.d(),
            data.n_classes()
        )));
    }
    Ok(())
}

fn logits_into(w: &[f64], x: &[f64], n_classes: usize, out: &mut [f64]) {
    let d = x.len();
    out.copy_from_slice(&w[d * n_classes..(d + 1) * n_classes]);
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let row = &w[j * n_classes..(j + 1) * n_classes];
        for (o, &wj) in out.iter_mut().zip(row) {
            *o += xj * wj;
        }
    }
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of argmax-correct predictions; argmax ties break toward the
/// lowest class index.
pub fn evaluate(model: &ParamVector, data: &Dataset) -> Result<f64, LearnError> {
    check_model(model, data)?;
    let c = data.n_classes();
    let mut z = vec![0.0; c];
    let mut correct = 0usize;
    for i in 0..data.n() {
        logits_into(model.values(), data.feature_row(i), c, &mut z);
        if argmax_lowest(&z) == data.label(i) as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.n() as f64)
}

/// Mini-batch gradient descent on softmax cross-entropy, starting from the
/// global model. Returns the update delta (trained − global).
pub fn local_train(
    global: &ParamVector,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<ParamVector, LearnError> {
    cfg.validate()?;
    check_model(global, data)?;
    let d = data.d();
    let c = data.n_classes();
    let mut w = global.values().to_vec();
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut grad = vec![0.0; w.len()];
    let mut probs = vec![0.0; c];

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let x = data.feature_row(i);
                let y = data.label(i) as usize;
                logits_into(&w, x, c, &mut probs);
                softmax_in_place(&mut probs);
                for cls in 0..c {
                    let g = probs[cls] - if cls == y { 1.0 } else { 0.0 };
                    if g == 0.0 {
                        continue;
                    }
                    for (j, &xj) in x.iter().enumerate() {
                        grad[j * c + cls] += xj * g;
                    }
                    grad[d * c + cls] += g;
                }
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= step * gi;
            }
        }
    }
    let trained = ParamVector::new(w, global.shape().to_vec())?;
    Ok(trained.sub(global)?)
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn check_deltas(global: &ParamVector, deltas: &[ParamVector]) -> Result<(), LearnError> {
    if deltas.is_empty() {
        return Err(LearnError::InvalidArgument(
            "at least one delta is required".into(),
        ));
    }
    for delta in deltas {
        if delta.len() != global.len() {
            return Err(LearnError::Param(ParamError::LengthMismatch {
                expected: global.len(),
                got: delta.len(),
            }));
        }
    }
    Ok(())
}

/// FedAvg-style aggregation: global plus the uniform mean of the deltas.
pub fn aggregate_mean(
    global: &ParamVector,
    deltas: &[ParamVector],
) -> Result<ParamVector, LearnError> {
    check_deltas(global, deltas)?;
    let inv = 1.0 / deltas.len() as f64;
    let values = (0..global.len())
        .map(|i| global.values()[i] + inv * deltas.iter().map(|d| d.values()[i]).sum::<f64>())
        .collect();
    Ok(ParamVector::new(values, global.shape().to_vec())?)
}

/// Coordinate-wise-median aggregation: each entry of the applied delta is
/// the median of the deltas' entries with the same coordinate (even count:
/// mean of the two middle values).
pub fn aggregate_cwmed(
    global: &ParamVector,
    deltas: &[ParamVector],
) -> Result<ParamVector, LearnError> {
    check_deltas(global, deltas)?;
    let mut column = vec![0.0; deltas.len()];
    let mut values = Vec::with_capacity(global.len());
    for i in 0..global.len() {
        for (slot, delta) in column.iter_mut().zip(deltas) {
            *slot = delta.values()[i];
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let mid = column.len() / 2;
        let med = if column.len() % 2 == 1 {
            column[mid]
        } else {
            0.5 * (column[mid - 1] + column[mid])
        };
        values.push(global.values()[i] + med);
    }
    Ok(ParamVector::new(values, global.shape().to_vec())?)
}

/// Synthetic classification data: one unit-variance Gaussian cluster per
/// class, with class means `class_separation` apart along (near-)orthogonal
/// seeded random directions. Labels are balanced round-robin and sample
/// order is shuffled.
pub fn generate_synthetic(
    seed_value: u64,
    n_samples: usize,
    d: usize,
    n_classes: usize,
    class_separation: f64,
) -> Result<Dataset, LearnError> {
    if n_classes < 2 {
        return Err(LearnError::InvalidArgument(
            "at least two classes are required".into(),
        ));
    }
    if n_samples < n_classes {
        return Err(LearnError::InvalidArgument(format!(
            "need at least one sample per class ({n_samples} < {n_classes})"
        )));
    }
    if d == 0 {
        return Err(LearnError::InvalidArgument(
            "feature dimension must be positive".into(),
        ));
    }
    if !class_separation.is_finite() || class_separation < 0.0 {
        return Err(LearnError::InvalidArgument(
            "class separation must be finite and non-negative".into(),
        ));
    }

    let mut rng = seed::rng(seed_value);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");

    // Class directions: Gram-Schmidt over seeded Gaussian draws, so means
    // are exactly orthogonal whenever n_classes ≤ d.
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let mut v: Vec<f64> = (0..d).map(|_| std_normal.sample(&mut rng)).collect();
        for prev in &dirs {
            let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (vi, pi) in v.iter_mut().zip(prev) {
                *vi -= dot * pi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            for vi in &mut v {
                *vi /= norm;
            }
        }
        dirs.push(v);
    }

    let mut features = Vec::with_capacity(n_samples * d);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let label = (i % n_classes) as u32;
        let mean = &dirs[label as usize];
        for mj in mean.iter().take(d) {
            features.push(class_separation * mj + std_normal.sample(&mut rng));
        }
        labels.push(label);
    }

    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut rng);
    let dataset = Dataset::new(features, labels, d, n_classes)?;
    dataset.subset(&order)
}
