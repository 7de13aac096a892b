//! Incremental base classifiers and meta-wrappers sharing one learner contract.

use std::any::Any;
use std::fmt;

use thiserror::Error;

use crate::datamodel::{Chunk, Matrix, Prediction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("predict called before any partial_fit")]
    NotFitted,
    #[error("declared classes must be non-empty and distinct")]
    InvalidClasses,
    #[error("declared classes changed from {first:?} to {now:?}")]
    ClassesChanged { first: Vec<usize>, now: Vec<usize> },
    #[error("label {0} is not among the declared classes")]
    UnknownLabel(usize),
    #[error("sample weight {weight} at position {index} is negative or not finite")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("{weights} sample weights given for {samples} samples")]
    WeightLength { weights: usize, samples: usize },
    #[error("expected {expected} features, got {got}")]
    FeatureArity { expected: usize, got: usize },
    #[error("{0} does not accept sample weights")]
    WeightsUnsupported(String),
    #[error("ensemble pool is empty")]
    EmptyPool,
    #[error("{0}")]
    Invalid(String),
}

/// Incremental classifier driven chunk by chunk.
///
/// `classes` is the full label space of the stream and must be identical on
/// every call. Predicting before the first `partial_fit` fails with
/// [`LearnerError::NotFitted`].
pub trait Learner: Send + fmt::Debug {
    fn name(&self) -> &str;

    fn partial_fit(
        &mut self,
        chunk: &Chunk,
        classes: &[usize],
        sample_weights: Option<&[f64]>,
    ) -> Result<(), LearnerError>;

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError>;

    fn supports_weights(&self) -> bool {
        false
    }

    /// Fresh, unfitted learner with the same configuration (and seed).
    fn clone_unfitted(&self) -> Box<dyn Learner>;

    fn as_any(&self) -> &dyn Any;
}

/// Remembers the declared label space and checks every chunk against it.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct ClassSpace {
    classes: Option<Vec<usize>>,
}

impl ClassSpace {
    pub(crate) fn check(&mut self, classes: &[usize], labels: &[usize]) -> Result<(), LearnerError> {
        match &self.classes {
            None => {
                let mut sorted = classes.to_vec();
                sorted.sort_unstable();
                sorted.dedup();
                if classes.is_empty() || sorted.len() != classes.len() {
                    return Err(LearnerError::InvalidClasses);
                }
            }
            Some(first) if first != classes => {
                return Err(LearnerError::ClassesChanged { first: first.clone(), now: classes.to_vec() })
            }
            Some(_) => {}
        }
        if let Some(&bad) = labels.iter().find(|l| !classes.contains(l)) {
            return Err(LearnerError::UnknownLabel(bad));
        }
        if self.classes.is_none() {
            self.classes = Some(classes.to_vec());
        }
        Ok(())
    }

    pub(crate) fn get(&self) -> Option<&[usize]> {
        self.classes.as_deref()
    }

    pub(crate) fn index_of(&self, label: usize) -> usize {
        self.classes
            .as_ref()
            .and_then(|c| c.iter().position(|&x| x == label))
            .expect("label was checked against the class space")
    }
}

pub(crate) fn check_weights(weights: Option<&[f64]>, samples: usize) -> Result<(), LearnerError> {
    if let Some(w) = weights {
        if w.len() != samples {
            return Err(LearnerError::WeightLength { weights: w.len(), samples });
        }
        if let Some((index, &weight)) = w.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
            return Err(LearnerError::InvalidWeight { index, weight });
        }
    }
    Ok(())
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-class support matrix of a prediction, falling back to one-hot rows.
pub fn support_or_one_hot(prediction: &Prediction, classes: &[usize]) -> Matrix {
    if let Some(s) = &prediction.support {
        return s.clone();
    }
    let mut m = Matrix::zeros(prediction.labels.len(), classes.len());
    for (i, l) in prediction.labels.iter().enumerate() {
        if let Some(k) = classes.iter().position(|c| c == l) {
            m.set(i, k, 1.0);
        }
    }
    m
}

/// Weighted running moments of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Weighted sum of squared deviations from `mean`.
    pub m2: Vec<f64>,
}

impl ClassStats {
    fn empty(n_features: usize) -> Self {
        Self { weight: 0.0, mean: vec![0.0; n_features], m2: vec![0.0; n_features] }
    }

    pub fn variance(&self) -> Vec<f64> {
        self.m2.iter().map(|m| if self.weight > 0.0 { m / self.weight } else { 0.0 }).collect()
    }

    /// Pairwise (Chan et al.) merge of two weighted moment summaries.
    fn merge(&mut self, other: &ClassStats) {
        if other.weight == 0.0 {
            return;
        }
        if self.weight == 0.0 {
            *self = other.clone();
            return;
        }
        let total = self.weight + other.weight;
        for j in 0..self.mean.len() {
            let delta = other.mean[j] - self.mean[j];
            self.mean[j] += delta * other.weight / total;
            self.m2[j] += other.m2[j] + delta * delta * self.weight * other.weight / total;
        }
        self.weight = total;
    }
}

/// Gaussian naive Bayes with weight-aware streaming moments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaussianNb {
    space: ClassSpace,
    n_features: Option<usize>,
    stats: Vec<ClassStats>,
}

impl GaussianNb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn classes(&self) -> Option<&[usize]> {
        self.space.get()
    }

    /// Per-class moments in declared class order.
    pub fn class_stats(&self) -> &[ClassStats] {
        &self.stats
    }

    pub fn priors(&self) -> Vec<f64> {
        let total: f64 = self.stats.iter().map(|s| s.weight).sum();
        self.stats.iter().map(|s| if total > 0.0 { s.weight / total } else { 0.0 }).collect()
    }

    /// `1e-9 x` the largest per-feature variance over all samples seen, at least `1e-12`.
    fn variance_floor(&self) -> f64 {
        let n = self.n_features.unwrap_or(0);
        let mut all = ClassStats::empty(n);
        for s in &self.stats {
            all.merge(s);
        }
        let max_var = all.variance().into_iter().fold(0.0, f64::max);
        (1e-9 * max_var).max(1e-12)
    }
}

impl Learner for GaussianNb {
    fn name(&self) -> &str {
        "gnb"
    }

    fn partial_fit(
        &mut self,
        chunk: &Chunk,
        classes: &[usize],
        sample_weights: Option<&[f64]>,
    ) -> Result<(), LearnerError> {
        check_weights(sample_weights, chunk.len())?;
        match self.n_features {
            Some(n) if n != chunk.n_features() && !chunk.is_empty() => {
                return Err(LearnerError::FeatureArity { expected: n, got: chunk.n_features() })
            }
            _ => {}
        }
        self.space.check(classes, chunk.labels())?;
        let n = *self.n_features.get_or_insert(chunk.n_features());
        if self.stats.is_empty() {
            self.stats = vec![ClassStats::empty(n); classes.len()];
        }

        let x = chunk.features();
        let weight = |i: usize| sample_weights.map_or(1.0, |w| w[i]);
        let mut batch = vec![ClassStats::empty(n); classes.len()];
        for (i, &label) in chunk.labels().iter().enumerate() {
            let s = &mut batch[self.space.index_of(label)];
            let w = weight(i);
            s.weight += w;
            for (m, v) in s.mean.iter_mut().zip(x.row(i)) {
                *m += w * v;
            }
        }
        for s in &mut batch {
            if s.weight > 0.0 {
                for m in &mut s.mean {
                    *m /= s.weight;
                }
            }
        }
        for (i, &label) in chunk.labels().iter().enumerate() {
            let s = &mut batch[self.space.index_of(label)];
            let w = weight(i);
            for j in 0..n {
                let d = x.get(i, j) - s.mean[j];
                s.m2[j] += w * d * d;
            }
        }
        for (acc, b) in self.stats.iter_mut().zip(&batch) {
            acc.merge(b);
        }
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        let classes = self.space.get().ok_or(LearnerError::NotFitted)?;
        let n = self.n_features.unwrap_or(0);
        if features.rows() > 0 && features.cols() != n {
            return Err(LearnerError::FeatureArity { expected: n, got: features.cols() });
        }
        let k = classes.len();
        let priors = self.priors();
        let floor = self.variance_floor();
        let vars: Vec<Vec<f64>> =
            self.stats.iter().map(|s| s.variance().into_iter().map(|v| v.max(floor)).collect()).collect();
        let log_norm: Vec<f64> = vars
            .iter()
            .map(|v| v.iter().map(|v| -0.5 * (2.0 * std::f64::consts::PI * v).ln()).sum())
            .collect();

        let mut labels = Vec::with_capacity(features.rows());
        let mut support = Matrix::zeros(features.rows(), k);
        let mut joint = vec![0.0; k];
        for (i, x) in features.iter_rows().enumerate() {
            for c in 0..k {
                joint[c] = if priors[c] > 0.0 {
                    let s = &self.stats[c];
                    let mut lj = priors[c].ln() + log_norm[c];
                    for j in 0..n {
                        let d = x[j] - s.mean[j];
                        lj -= d * d / (2.0 * vars[c][j]);
                    }
                    lj
                } else {
                    f64::NEG_INFINITY
                };
            }
            let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let row = support.row_mut(i);
            if max == f64::NEG_INFINITY {
                row.fill(1.0 / k as f64);
            } else {
                let mut total = 0.0;
                for c in 0..k {
                    row[c] = (joint[c] - max).exp();
                    total += row[c];
                }
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            labels.push(classes[argmax(row)]);
        }
        Ok(Prediction { labels, support: Some(support) })
    }

    fn supports_weights(&self) -> bool {
        true
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(GaussianNb::new())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Refits a fresh base model on every sample seen so far.
#[derive(Debug)]
pub struct AccumulatedSamples {
    template: Box<dyn Learner>,
    features: Matrix,
    labels: Vec<usize>,
    space: ClassSpace,
    model: Option<Box<dyn Learner>>,
}

impl AccumulatedSamples {
    pub fn new(base: Box<dyn Learner>) -> Self {
        Self {
            template: base.clone_unfitted(),
            features: Matrix::default(),
            labels: Vec::new(),
            space: ClassSpace::default(),
            model: None,
        }
    }

    pub fn buffer_len(&self) -> usize {
        self.labels.len()
    }

    pub fn model(&self) -> Option<&dyn Learner> {
        self.model.as_deref()
    }
}

impl Learner for AccumulatedSamples {
    fn name(&self) -> &str {
        "accumulated"
    }

    fn partial_fit(
        &mut self,
        chunk: &Chunk,
        classes: &[usize],
        sample_weights: Option<&[f64]>,
    ) -> Result<(), LearnerError> {
        if sample_weights.is_some() {
            return Err(LearnerError::WeightsUnsupported(self.name().into()));
        }
        if self.buffer_len() > 0 && chunk.n_features() != self.features.cols() && !chunk.is_empty() {
            return Err(LearnerError::FeatureArity {
                expected: self.features.cols(),
                got: chunk.n_features(),
            });
        }
        self.space.check(classes, chunk.labels())?;
        for row in chunk.features().iter_rows() {
            self.features.push_row(row).expect("row width checked above");
        }
        self.labels.extend_from_slice(chunk.labels());
        let all = Chunk::new(self.features.clone(), self.labels.clone())
            .expect("buffer rows and labels stay aligned");
        let mut model = self.template.clone_unfitted();
        model.partial_fit(&all, classes, None)?;
        self.model = Some(model);
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        self.model.as_ref().ok_or(LearnerError::NotFitted)?.predict(features)
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(AccumulatedSamples::new(self.template.clone_unfitted()))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Per-sample weighting rule for [`SampleWeighted`].
#[derive(Clone, Copy)]
pub enum WeightPolicy {
    Uniform,
    /// `n / (n_present_classes * count(class))`, computed within the chunk.
    InverseClassFrequency,
    Custom(fn(&[usize]) -> Vec<f64>),
}

impl fmt::Debug for WeightPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => f.write_str("Uniform"),
            Self::InverseClassFrequency => f.write_str("InverseClassFrequency"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl WeightPolicy {
    pub fn weights(&self, labels: &[usize]) -> Vec<f64> {
        match self {
            Self::Uniform => vec![1.0; labels.len()],
            Self::InverseClassFrequency => {
                let mut counts = std::collections::BTreeMap::new();
                for &l in labels {
                    *counts.entry(l).or_insert(0usize) += 1;
                }
                let n = labels.len() as f64;
                let k = counts.len() as f64;
                labels.iter().map(|l| n / (k * counts[l] as f64)).collect()
            }
            Self::Custom(f) => f(labels),
        }
    }
}

/// Forwards policy-derived sample weights to a weight-aware learner.
#[derive(Debug)]
pub struct SampleWeighted {
    inner: Box<dyn Learner>,
    policy: WeightPolicy,
}

impl SampleWeighted {
    pub fn new(inner: Box<dyn Learner>, policy: WeightPolicy) -> Result<Self, LearnerError> {
        if !inner.supports_weights() {
            return Err(LearnerError::WeightsUnsupported(inner.name().into()));
        }
        Ok(Self { inner, policy })
    }

    pub fn inner(&self) -> &dyn Learner {
        self.inner.as_ref()
    }
}

impl Learner for SampleWeighted {
    fn name(&self) -> &str {
        "sample_weighted"
    }

    /// External weights, when given, are multiplied with the policy weights.
    fn partial_fit(
        &mut self,
        chunk: &Chunk,
        classes: &[usize],
        sample_weights: Option<&[f64]>,
    ) -> Result<(), LearnerError> {
        check_weights(sample_weights, chunk.len())?;
        let mut w = self.policy.weights(chunk.labels());
        check_weights(Some(&w), chunk.len())?;
        if let Some(ext) = sample_weights {
            for (a, b) in w.iter_mut().zip(ext) {
                *a *= b;
            }
        }
        self.inner.partial_fit(chunk, classes, Some(&w))
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        self.inner.predict(features)
    }

    fn supports_weights(&self) -> bool {
        true
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(SampleWeighted { inner: self.inner.clone_unfitted(), policy: self.policy })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
