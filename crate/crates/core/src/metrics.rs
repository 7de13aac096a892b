//! Binary classification metrics computed from one confusion-matrix pass.
//!
//! Class 1 is the positive class. Every ratio with a zero denominator is 0.

use std::fmt;

use thiserror::Error;

use crate::datamodel::ConfusionMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("label vectors differ in length: {truth} true vs {predicted} predicted")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {label} at position {position} is not binary (expected 0 or 1)")]
    NonBinaryLabel { label: usize, position: usize },
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("unknown metric {name:?}; valid names: {}", Metric::NAMES.join(", "))]
    UnknownMetric { name: String },
}

/// Counts TP/FP/FN/TN in one pass.
pub fn confusion(truth: &[usize], predicted: &[usize]) -> Result<ConfusionMatrix, MetricError> {
    if truth.len() != predicted.len() {
        return Err(MetricError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            _ => {
                let label = if t > 1 { t } else { p };
                return Err(MetricError::NonBinaryLabel { label, position: i });
            }
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn recall(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.tp, cm.tp + cm.fn_)
}

pub fn precision(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.tp, cm.tp + cm.fp)
}

pub fn specificity(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.tn, cm.tn + cm.fp)
}

pub fn f_beta(cm: &ConfusionMatrix, beta: f64) -> Result<f64, MetricError> {
    if !(beta > 0.0) {
        return Err(MetricError::NonPositiveBeta(beta));
    }
    let p = precision(cm);
    let r = recall(cm);
    let b2 = beta * beta;
    let den = b2 * p + r;
    Ok(if den == 0.0 { 0.0 } else { (1.0 + b2) * p * r / den })
}

pub fn f1(cm: &ConfusionMatrix) -> f64 {
    f_beta(cm, 1.0).expect("beta = 1 is positive")
}

pub fn balanced_accuracy(cm: &ConfusionMatrix) -> f64 {
    (recall(cm) + specificity(cm)) / 2.0
}

/// sqrt(recall * specificity).
pub fn geometric_mean_1(cm: &ConfusionMatrix) -> f64 {
    (recall(cm) * specificity(cm)).sqrt()
}

/// sqrt(recall * precision).
pub fn geometric_mean_2(cm: &ConfusionMatrix) -> f64 {
    (recall(cm) * precision(cm)).sqrt()
}

/// Fraction of equal positions; works for any label alphabet. Empty input scores 0.
pub fn accuracy(truth: &[usize], predicted: &[usize]) -> Result<f64, MetricError> {
    if truth.len() != predicted.len() {
        return Err(MetricError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(ratio(hits as u64, truth.len() as u64))
}

/// Chunk-level metric taking `(true labels, predicted labels)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Accuracy,
    BalancedAccuracy,
    Recall,
    Precision,
    Specificity,
    F1,
    FBeta(f64),
    GeometricMean1,
    GeometricMean2,
}

impl Metric {
    pub const NAMES: [&'static str; 9] = [
        "accuracy",
        "balanced_accuracy",
        "recall",
        "precision",
        "specificity",
        "f1",
        "f_beta:<beta>",
        "geometric_mean_1",
        "geometric_mean_2",
    ];

    /// Default metric pair when none is configured.
    pub fn defaults() -> Vec<Metric> {
        vec![Metric::Accuracy, Metric::BalancedAccuracy]
    }

    pub fn parse(name: &str) -> Result<Metric, MetricError> {
        let n = name.trim().to_ascii_lowercase();
        let m = match n.as_str() {
            "accuracy" | "accuracy_score" => Metric::Accuracy,
            "balanced_accuracy" | "bac" => Metric::BalancedAccuracy,
            "recall" => Metric::Recall,
            "precision" => Metric::Precision,
            "specificity" => Metric::Specificity,
            "f1" | "f1_score" => Metric::F1,
            "geometric_mean_1" | "gmean1" => Metric::GeometricMean1,
            "geometric_mean_2" | "gmean2" => Metric::GeometricMean2,
            other => match other.strip_prefix("f_beta:").map(str::parse::<f64>) {
                Some(Ok(beta)) if beta > 0.0 => Metric::FBeta(beta),
                _ => return Err(MetricError::UnknownMetric { name: name.trim().to_string() }),
            },
        };
        Ok(m)
    }

    pub fn name(&self) -> String {
        match self {
            Metric::Accuracy => "accuracy".into(),
            Metric::BalancedAccuracy => "balanced_accuracy".into(),
            Metric::Recall => "recall".into(),
            Metric::Precision => "precision".into(),
            Metric::Specificity => "specificity".into(),
            Metric::F1 => "f1".into(),
            Metric::FBeta(b) => format!("f_beta:{b}"),
            Metric::GeometricMean1 => "geometric_mean_1".into(),
            Metric::GeometricMean2 => "geometric_mean_2".into(),
        }
    }

    pub fn evaluate(&self, truth: &[usize], predicted: &[usize]) -> Result<f64, MetricError> {
        if let Metric::Accuracy = self {
            return accuracy(truth, predicted);
        }
        let cm = confusion(truth, predicted)?;
        Ok(match self {
            Metric::Accuracy => unreachable!(),
            Metric::BalancedAccuracy => balanced_accuracy(&cm),
            Metric::Recall => recall(&cm),
            Metric::Precision => precision(&cm),
            Metric::Specificity => specificity(&cm),
            Metric::F1 => f1(&cm),
            Metric::FBeta(beta) => f_beta(&cm, *beta)?,
            Metric::GeometricMean1 => geometric_mean_1(&cm),
            Metric::GeometricMean2 => geometric_mean_2(&cm),
        })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
