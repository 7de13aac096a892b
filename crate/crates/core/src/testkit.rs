//! Deterministic mock learners for exercising ensembles and evaluators.

use std::any::Any;
use std::sync::{Arc, Mutex};

use crate::datamodel::{Chunk, Matrix, Prediction};
use crate::learners::{ClassSpace, Learner, LearnerError};

/// Always predicts one label.
#[derive(Debug, Clone)]
pub struct ConstantLearner {
    label: usize,
    space: ClassSpace,
}

impl ConstantLearner {
    pub fn new(label: usize) -> Self {
        Self { label, space: ClassSpace::default() }
    }
}

impl Learner for ConstantLearner {
    fn name(&self) -> &str {
        "constant"
    }

    fn partial_fit(&mut self, chunk: &Chunk, classes: &[usize], _: Option<&[f64]>) -> Result<(), LearnerError> {
        self.space.check(classes, chunk.labels())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        self.space.get().ok_or(LearnerError::NotFitted)?;
        Ok(Prediction { labels: vec![self.label; features.rows()], support: None })
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(Self::new(self.label))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Emits the same support row for every sample; fitted from construction.
#[derive(Debug, Clone)]
pub struct FixedSupport {
    classes: Vec<usize>,
    support: Vec<f64>,
}

impl FixedSupport {
    pub fn new(classes: Vec<usize>, support: Vec<f64>) -> Self {
        Self { classes, support }
    }
}

impl Learner for FixedSupport {
    fn name(&self) -> &str {
        "fixed_support"
    }

    fn partial_fit(&mut self, _: &Chunk, _: &[usize], _: Option<&[f64]>) -> Result<(), LearnerError> {
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        let mut s = Matrix::zeros(features.rows(), self.support.len());
        for i in 0..features.rows() {
            s.row_mut(i).copy_from_slice(&self.support);
        }
        let best = crate::learners::argmax(&self.support);
        Ok(Prediction { labels: vec![self.classes[best]; features.rows()], support: Some(s) })
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Replays the true labels of chunk `k` when predicting after `k` fits.
#[derive(Debug, Clone)]
pub struct LabelOracle {
    labels: Vec<Vec<usize>>,
    fits: usize,
}

impl LabelOracle {
    pub fn new(labels: Vec<Vec<usize>>) -> Self {
        Self { labels, fits: 0 }
    }
}

impl Learner for LabelOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn partial_fit(&mut self, _: &Chunk, _: &[usize], _: Option<&[f64]>) -> Result<(), LearnerError> {
        self.fits += 1;
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        if self.fits == 0 {
            return Err(LearnerError::NotFitted);
        }
        let labels = self.labels.get(self.fits).cloned().unwrap_or_default();
        if labels.len() != features.rows() {
            return Err(LearnerError::Invalid("oracle out of sync with stream".into()));
        }
        Ok(Prediction { labels, support: None })
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(Self::new(self.labels.clone()))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// One observed call, keyed by the first feature of the first (and last) row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Call {
    Fit { key: f64, last: f64, rows: usize, weighted: bool },
    Predict { key: f64, rows: usize },
}

/// Records every call into a shared log and predicts class 0.
#[derive(Debug, Clone)]
pub struct CallRecorder {
    log: Arc<Mutex<Vec<Call>>>,
    weights: bool,
    fitted: bool,
    fail_on_fit: Option<usize>,
}

impl CallRecorder {
    pub fn new(log: Arc<Mutex<Vec<Call>>>, supports_weights: bool) -> Self {
        Self { log, weights: supports_weights, fitted: false, fail_on_fit: None }
    }

    /// Fails the `n`-th call to `partial_fit` (0-based).
    pub fn failing_on_fit(mut self, n: usize) -> Self {
        self.fail_on_fit = Some(n);
        self
    }

    fn key(m: &Matrix) -> f64 {
        if m.rows() == 0 || m.cols() == 0 {
            f64::NAN
        } else {
            m.get(0, 0)
        }
    }
}

impl Learner for CallRecorder {
    fn name(&self) -> &str {
        "recorder"
    }

    fn partial_fit(&mut self, chunk: &Chunk, _: &[usize], w: Option<&[f64]>) -> Result<(), LearnerError> {
        let mut log = self.log.lock().expect("log lock");
        let fits = log.iter().filter(|c| matches!(c, Call::Fit { .. })).count();
        if self.fail_on_fit == Some(fits) {
            return Err(LearnerError::Invalid("planted failure".into()));
        }
        let f = chunk.features();
        let last = if f.rows() == 0 || f.cols() == 0 { f64::NAN } else { f.get(f.rows() - 1, 0) };
        log.push(Call::Fit { key: Self::key(f), last, rows: chunk.len(), weighted: w.is_some() });
        self.fitted = true;
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        if !self.fitted {
            return Err(LearnerError::NotFitted);
        }
        self.log
            .lock()
            .expect("log lock")
            .push(Call::Predict { key: Self::key(features), rows: features.rows() });
        Ok(Prediction { labels: vec![0; features.rows()], support: None })
    }

    fn supports_weights(&self) -> bool {
        self.weights
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(Self { fitted: false, ..self.clone() })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
