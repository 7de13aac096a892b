//! Value types shared by the generator, learners, evaluators and stream I/O.

use std::fmt;

use thiserror::Error;

/// Errors raised when constructing shared value types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("feature matrix has {rows} rows but {labels} labels were given")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("matrix data length {len} does not match shape ({rows}, {cols})")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// Dense row-major matrix of 64-bit reals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DataError> {
        if data.len() != rows * cols {
            return Err(DataError::ShapeMismatch { rows, cols, len: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a matrix from row slices; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, DataError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Appends one row. The first row pushed into an empty 0-column matrix fixes the width.
    pub fn push_row(&mut self, row: &[f64]) -> Result<(), DataError> {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(DataError::ShapeMismatch {
                rows: self.rows + 1,
                cols: self.cols,
                len: self.data.len() + row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// New matrix holding the selected rows in the given order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), cols: self.cols, data }
    }
}

/// One batch of labeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    features: Matrix,
    labels: Vec<usize>,
}

impl Chunk {
    /// Rejects mismatched lengths and non-finite feature values.
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self, DataError> {
        if features.rows() != labels.len() {
            return Err(DataError::LengthMismatch { rows: features.rows(), labels: labels.len() });
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = features.cols().max(1);
            return Err(DataError::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Per-class sample counts over `0..n_classes`; labels outside the range are ignored.
    pub fn class_counts(&self, n_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; n_classes];
        for &l in &self.labels {
            if l < n_classes {
                counts[l] += 1;
            }
        }
        counts
    }

    /// Chunk made of the selected rows, repeats allowed.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn into_parts(self) -> (Matrix, Vec<usize>) {
        (self.features, self.labels)
    }
}

/// Kind of concept drift injected by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftType {
    #[default]
    Sudden,
    Gradual,
    Incremental,
}

impl DriftType {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sudden" | "abrupt" => Some(Self::Sudden),
            "gradual" => Some(Self::Gradual),
            "incremental" => Some(Self::Incremental),
            _ => None,
        }
    }
}

impl fmt::Display for DriftType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sudden => "sudden",
            Self::Gradual => "gradual",
            Self::Incremental => "incremental",
        })
    }
}

/// Label-noise setting.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelNoise {
    /// Proportion of all instances in a chunk whose labels are inverted.
    Uniform(f64),
    /// Proportion inverted within each class separately.
    PerClass(Vec<f64>),
}

impl Default for LabelNoise {
    fn default() -> Self {
        Self::Uniform(0.01)
    }
}

/// Prior class distribution of the stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ClassWeights {
    #[default]
    Balanced,
    /// `weights[k]` is the probability of class `k`.
    Static(Vec<f64>),
    /// Oscillating binary imbalance; class 1 is the oscillating class.
    Dynamic { n_cycles: usize, sigmoid_spacing: f64, oscillation_range: f64 },
}

/// Declarative description of a synthetic stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub n_chunks: usize,
    pub chunk_size: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub n_redundant: usize,
    pub n_repeated: usize,
    pub n_clusters_per_class: usize,
    pub class_sep: f64,
    pub n_drifts: usize,
    pub drift_type: DriftType,
    pub concept_sigmoid_spacing: f64,
    pub recurring: bool,
    pub y_flip: LabelNoise,
    pub weights: ClassWeights,
    pub random_seed: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            n_chunks: 250,
            chunk_size: 200,
            n_classes: 2,
            n_features: 20,
            n_informative: 2,
            n_redundant: 2,
            n_repeated: 0,
            n_clusters_per_class: 2,
            class_sep: 1.0,
            n_drifts: 0,
            drift_type: DriftType::Sudden,
            concept_sigmoid_spacing: 999.0,
            recurring: false,
            y_flip: LabelNoise::default(),
            weights: ClassWeights::Balanced,
            random_seed: 1410,
        }
    }
}

impl StreamConfig {
    pub fn total_instances(&self) -> usize {
        self.n_chunks * self.chunk_size
    }

    /// Class labels `0..n_classes`.
    pub fn classes(&self) -> Vec<usize> {
        (0..self.n_classes).collect()
    }
}

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Collects every violated invariant of `config`; an empty list means the config is valid.
pub fn validate_config(config: &StreamConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |field: &'static str, message: String| out.push(Violation { field, message });

    if config.n_chunks == 0 {
        bad("n_chunks", "n_chunks must be positive".into());
    }
    if config.chunk_size == 0 {
        bad("chunk_size", "chunk_size must be positive".into());
    }
    if config.n_classes < 2 {
        bad("n_classes", format!("n_classes must be at least 2, got {}", config.n_classes));
    }
    if config.n_features == 0 {
        bad("n_features", "n_features must be positive".into());
    }
    if config.n_informative == 0 {
        bad("n_informative", "n_informative must be positive".into());
    }
    let used = config.n_informative + config.n_redundant + config.n_repeated;
    if used > config.n_features {
        bad(
            "n_features",
            format!(
                "n_informative + n_redundant + n_repeated = {used} exceeds n_features = {}",
                config.n_features
            ),
        );
    }
    if config.n_clusters_per_class == 0 {
        bad("n_clusters_per_class", "n_clusters_per_class must be positive".into());
    }
    if config.n_informative > 0 && config.n_informative < 64 {
        let vertices = 1u128 << config.n_informative;
        let clusters = (config.n_classes * config.n_clusters_per_class) as u128;
        if clusters > vertices {
            bad(
                "n_informative",
                format!(
                    "n_classes * n_clusters_per_class = {clusters} exceeds the {vertices} hypercube vertices"
                ),
            );
        }
    }
    if !(config.class_sep > 0.0 && config.class_sep.is_finite()) {
        bad("class_sep", format!("class_sep must be a positive real, got {}", config.class_sep));
    }
    if !(config.concept_sigmoid_spacing > 0.0 && config.concept_sigmoid_spacing.is_finite()) {
        bad(
            "concept_sigmoid_spacing",
            format!("concept_sigmoid_spacing must be > 0, got {}", config.concept_sigmoid_spacing),
        );
    }
    match &config.y_flip {
        LabelNoise::Uniform(p) => {
            if !(0.0..1.0).contains(p) {
                bad("y_flip", format!("y_flip must lie in [0,1), got {p}"));
            }
        }
        LabelNoise::PerClass(ps) => {
            if ps.len() != config.n_classes {
                bad(
                    "y_flip",
                    format!("per-class y_flip needs {} entries, got {}", config.n_classes, ps.len()),
                );
            }
            if let Some(p) = ps.iter().find(|p| !(0.0..1.0).contains(*p)) {
                bad("y_flip", format!("every y_flip proportion must lie in [0,1), got {p}"));
            }
        }
    }
    match &config.weights {
        ClassWeights::Balanced => {}
        ClassWeights::Static(ws) => {
            if ws.len() != config.n_classes {
                bad(
                    "weights",
                    format!("weights needs {} entries, got {}", config.n_classes, ws.len()),
                );
            }
            if let Some(w) = ws.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
                bad("weights", format!("every weight must lie in (0,1), got {w}"));
            }
            let sum: f64 = ws.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                bad("weights", format!("weights must sum to 1, got {sum}"));
            }
        }
        ClassWeights::Dynamic { n_cycles, sigmoid_spacing, oscillation_range } => {
            if *n_cycles == 0 {
                bad("weights", "dynamic imbalance n_cycles must be positive".into());
            }
            if !(*sigmoid_spacing > 0.0 && sigmoid_spacing.is_finite()) {
                bad(
                    "weights",
                    format!("dynamic imbalance spacing must be > 0, got {sigmoid_spacing}"),
                );
            }
            if !(*oscillation_range > 0.0 && *oscillation_range <= 1.0) {
                bad(
                    "weights",
                    format!("oscillation range must lie in (0,1], got {oscillation_range}"),
                );
            }
            if config.n_classes != 2 {
                bad("weights", "dynamic imbalance requires n_classes = 2".into());
            }
        }
    }
    out
}

/// Binary confusion counts; class 1 is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Exchanges the roles of the positive and negative class.
    pub fn swap(&self) -> Self {
        Self { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }

    pub fn scale(&self, k: u64) -> Self {
        Self { tp: self.tp * k, fp: self.fp * k, fn_: self.fn_ * k, tn: self.tn * k }
    }
}

/// Predicted labels plus optional per-class supports (columns follow declared class order).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub support: Option<Matrix>,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Results indexed `[classifier, evaluation step, metric]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTensor {
    classifier_names: Vec<String>,
    metric_names: Vec<String>,
    n_steps: usize,
    values: Vec<f64>,
}

impl ScoreTensor {
    pub fn zeros(classifier_names: Vec<String>, n_steps: usize, metric_names: Vec<String>) -> Self {
        let len = classifier_names.len() * n_steps * metric_names.len();
        Self { classifier_names, metric_names, n_steps, values: vec![0.0; len] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.classifier_names.len(), self.n_steps, self.metric_names.len())
    }

    pub fn classifier_names(&self) -> &[String] {
        &self.classifier_names
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    fn offset(&self, classifier: usize, step: usize, metric: usize) -> usize {
        (classifier * self.n_steps + step) * self.metric_names.len() + metric
    }

    pub fn get(&self, classifier: usize, step: usize, metric: usize) -> f64 {
        self.values[self.offset(classifier, step, metric)]
    }

    pub fn set(&mut self, classifier: usize, step: usize, metric: usize, value: f64) {
        let off = self.offset(classifier, step, metric);
        self.values[off] = value;
    }

    /// Series over evaluation steps for one classifier and metric.
    pub fn series(&self, classifier: usize, metric: usize) -> Vec<f64> {
        (0..self.n_steps).map(|s| self.get(classifier, s, metric)).collect()
    }

    /// Same as [`series`](Self::series) but addressed by names.
    pub fn column(&self, classifier: &str, metric: &str) -> Option<Vec<f64>> {
        let c = self.classifier_names.iter().position(|n| n == classifier)?;
        let m = self.metric_names.iter().position(|n| n == metric)?;
        Some(self.series(c, m))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest absolute cell difference, or `None` when shapes or names differ.
    pub fn max_abs_diff(&self, other: &ScoreTensor) -> Option<f64> {
        if self.shape() != other.shape()
            || self.classifier_names != other.classifier_names
            || self.metric_names != other.metric_names
        {
            return None;
        }
        Some(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Anything that yields a stream chunk by chunk.
pub trait ChunkSource {
    type Error: std::error::Error + Send + Sync + 'static;

    /// Declared class labels of the stream, in index order.
    fn classes(&self) -> Vec<usize>;

    /// Next chunk, or `None` once the stream is exhausted.
    fn next_chunk(&mut self) -> Option<Result<Chunk, Self::Error>>;
}

/// Materialized stream replayed from memory.
#[derive(Debug, Clone)]
pub struct InMemoryStream {
    chunks: Vec<Chunk>,
    classes: Vec<usize>,
    pos: usize,
}

impl InMemoryStream {
    pub fn new(chunks: Vec<Chunk>, classes: Vec<usize>) -> Self {
        Self { chunks, classes, pos: 0 }
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn rewind(&mut self) {
        self.pos = 0;
    }
}

impl ChunkSource for InMemoryStream {
    type Error = std::convert::Infallible;

    fn classes(&self) -> Vec<usize> {
        self.classes.clone()
    }

    fn next_chunk(&mut self) -> Option<Result<Chunk, Self::Error>> {
        let c = self.chunks.get(self.pos)?.clone();
        self.pos += 1;
        Some(Ok(c))
    }
}
