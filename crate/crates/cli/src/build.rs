//! Classifier construction from `[[classifiers]]` entries.

use std::collections::BTreeMap;

use driftlab::ensembles::{
    AboveChanceAging, OnlineBagging, OnlineImbalanceBagging, Sea, Wae, DEFAULT_AGING, DEFAULT_DECAY,
    DEFAULT_POOL_SIZE, LAMBDA_CAP,
};
use driftlab::learners::{AccumulatedSamples, GaussianNb, Learner, SampleWeighted, WeightPolicy};
use driftlab::metrics::Metric;
use toml::Value;

use crate::config::ClassifierSpec;
use crate::CliError;

pub const KINDS: [&str; 8] = ["gnb", "accumulated", "sample_weighted", "sea", "online_bagging", "oob", "uob", "wae"];

struct Params<'a> {
    name: &'a str,
    values: &'a BTreeMap<String, Value>,
    allowed: &'static [&'static str],
}

impl Params<'_> {
    fn check(&self) -> Result<(), CliError> {
        match self.values.keys().find(|k| !self.allowed.contains(&k.as_str())) {
            None => Ok(()),
            Some(k) => Err(CliError::Invalid(format!(
                "classifier {:?}: unknown parameter {k:?}; allowed: {}",
                self.name,
                if self.allowed.is_empty() { "none".to_string() } else { self.allowed.join(", ") }
            ))),
        }
    }

    fn invalid(&self, key: &str, want: &str) -> CliError {
        CliError::Invalid(format!("classifier {:?}: {key} must be {want}", self.name))
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i > 0 => Ok(*i as usize),
            Some(_) => Err(self.invalid(key, "a positive integer")),
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => Err(self.invalid(key, "a non-negative integer")),
        }
    }

    fn unit(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match self.values.get(key) {
            None => return Ok(default),
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(_) => return Err(self.invalid(key, "a number in (0, 1)")),
        };
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err(self.invalid(key, "a number in (0, 1)"))
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match self.values.get(key) {
            None => return Ok(default),
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(_) => return Err(self.invalid(key, "a positive number")),
        };
        if v >= 1.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(key, "a number >= 1"))
        }
    }

    fn str(&self, key: &str) -> Result<Option<&str>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.invalid(key, "a string")),
        }
    }

    fn base(&self) -> Result<Box<dyn Learner>, CliError> {
        match self.str("base")?.unwrap_or("gnb") {
            "gnb" => Ok(Box::new(GaussianNb::new())),
            other => Err(CliError::Invalid(format!(
                "classifier {:?}: unknown base learner {other:?}; valid: gnb",
                self.name
            ))),
        }
    }
}

/// Builds one learner; bagging members default to `seed` when none is given.
pub fn build(spec: &ClassifierSpec, seed: u64) -> Result<Box<dyn Learner>, CliError> {
    let allowed: &'static [&'static str] = match spec.kind.as_str() {
        "gnb" => &[],
        "accumulated" => &["base"],
        "sample_weighted" => &["base", "policy"],
        "sea" => &["base", "max_pool_size", "metric"],
        "online_bagging" => &["base", "n_members", "seed"],
        "oob" | "uob" => &["base", "n_members", "seed", "decay", "lambda_cap"],
        "wae" => &["base", "max_pool_size", "aging"],
        other => {
            return Err(CliError::Invalid(format!(
                "classifier {:?}: unknown kind {other:?}; valid kinds: {}",
                spec.name,
                KINDS.join(", ")
            )))
        }
    };
    let p = Params { name: &spec.name, values: &spec.params, allowed };
    p.check()?;
    let learner: Box<dyn Learner> = match spec.kind.as_str() {
        "gnb" => Box::new(GaussianNb::new()),
        "accumulated" => Box::new(AccumulatedSamples::new(p.base()?)),
        "sample_weighted" => {
            let policy = match p.str("policy")?.unwrap_or("uniform") {
                "uniform" => WeightPolicy::Uniform,
                "inverse_class_frequency" => WeightPolicy::InverseClassFrequency,
                other => {
                    return Err(CliError::Invalid(format!(
                        "classifier {:?}: unknown policy {other:?}; valid: uniform, inverse_class_frequency",
                        spec.name
                    )))
                }
            };
            Box::new(SampleWeighted::new(p.base()?, policy).map_err(|e| CliError::Invalid(e.to_string()))?)
        }
        "sea" => {
            let mut sea = Sea::new(p.base()?, p.usize("max_pool_size", DEFAULT_POOL_SIZE)?);
            if let Some(m) = p.str("metric")? {
                let metric = Metric::parse(m).map_err(|_| {
                    CliError::Invalid(format!("unknown metric {m:?}; valid metrics: {}", Metric::NAMES.join(", ")))
                })?;
                sea = sea.with_metric(metric);
            }
            Box::new(sea)
        }
        "online_bagging" => {
            Box::new(OnlineBagging::new(p.base()?, p.usize("n_members", DEFAULT_POOL_SIZE)?, p.u64("seed", seed)?))
        }
        "oob" | "uob" => {
            let n = p.usize("n_members", DEFAULT_POOL_SIZE)?;
            let s = p.u64("seed", seed)?;
            let e = if spec.kind == "oob" {
                OnlineImbalanceBagging::oob(p.base()?, n, s)
            } else {
                OnlineImbalanceBagging::uob(p.base()?, n, s)
            };
            Box::new(e.with_decay(p.unit("decay", DEFAULT_DECAY)?).with_lambda_cap(p.positive("lambda_cap", LAMBDA_CAP)?))
        }
        "wae" => {
            let aging = p.unit("aging", DEFAULT_AGING)?;
            Box::new(
                Wae::new(p.base()?, p.usize("max_pool_size", DEFAULT_POOL_SIZE)?)
                    .with_weighting(Box::new(AboveChanceAging { aging })),
            )
        }
        _ => unreachable!(),
    };
    Ok(learner)
}
