//! Experiment configuration: a TOML document with `stream`, `classifiers`,
//! `metrics`, `protocol` and `output` sections, plus `key=value` overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use driftlab::datamodel::{validate_config, ClassWeights, DriftType, LabelNoise, StreamConfig};
use driftlab::evaluators::Protocol;
use driftlab::metrics::Metric;
use driftlab::stream_io::Format;
use serde::Deserialize;
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    stream: RawStream,
    #[serde(default)]
    classifiers: Vec<RawClassifier>,
    #[serde(default)]
    metrics: Vec<String>,
    #[serde(default)]
    protocol: RawProtocol,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStream {
    path: Option<PathBuf>,
    format: Option<String>,
    n_chunks: Option<usize>,
    chunk_size: Option<usize>,
    n_classes: Option<usize>,
    n_features: Option<usize>,
    n_informative: Option<usize>,
    n_redundant: Option<usize>,
    n_repeated: Option<usize>,
    n_clusters_per_class: Option<usize>,
    class_sep: Option<f64>,
    n_drifts: Option<usize>,
    drift_type: Option<String>,
    concept_sigmoid_spacing: Option<f64>,
    recurring: Option<bool>,
    y_flip: Option<RawNoise>,
    weights: Option<RawWeights>,
    random_seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawNoise {
    Uniform(f64),
    PerClass(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawWeights {
    Named(String),
    Static(Vec<f64>),
    Dynamic { n_cycles: usize, sigmoid_spacing: f64, oscillation_range: f64 },
}

#[derive(Debug, Deserialize)]
struct RawClassifier {
    name: Option<String>,
    kind: String,
    #[serde(flatten)]
    params: BTreeMap<String, Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    kind: Option<String>,
    window_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    scores: Option<PathBuf>,
    plot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamSource {
    Synthetic(StreamConfig),
    File { path: PathBuf, format: Format, chunk_size: usize, n_classes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub name: String,
    pub kind: String,
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stream: StreamSource,
    pub classifiers: Vec<ClassifierSpec>,
    pub metrics: Vec<Metric>,
    pub protocol: Protocol,
    pub scores: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

/// Parsed document plus pending overrides, resolved on demand.
#[derive(Debug, Clone, Default)]
pub struct Document {
    table: Table,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table = text.parse::<Table>().map_err(|e| CliError::Invalid(format!("config: {e}")))?;
        Ok(Self { table })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `a.b[2].c=value`; the value is read as TOML, falling back to a string.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("override {assignment:?} is not key=value")))?;
        let value = parse_value(raw.trim());
        self.set_value(key.trim(), value)
    }

    pub fn set_value(&mut self, key: &str, value: Value) -> Result<(), CliError> {
        let bad = || CliError::Invalid(format!("invalid override key {key:?}"));
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(bad());
        }
        let mut table = &mut self.table;
        for (i, part) in parts.iter().enumerate() {
            let last = i + 1 == parts.len();
            let (name, index) = match part.split_once('[') {
                Some((n, rest)) => {
                    let idx = rest.strip_suffix(']').and_then(|s| s.parse::<usize>().ok()).ok_or_else(bad)?;
                    (n, Some(idx))
                }
                None => (*part, None),
            };
            match index {
                None if last => {
                    table.insert(name.to_string(), value);
                    return Ok(());
                }
                None => {
                    let entry = table.entry(name.to_string()).or_insert_with(|| Value::Table(Table::new()));
                    table = entry.as_table_mut().ok_or_else(bad)?;
                }
                Some(idx) => {
                    let entry = table.entry(name.to_string()).or_insert_with(|| Value::Array(Vec::new()));
                    let array = entry.as_array_mut().ok_or_else(bad)?;
                    while array.len() <= idx {
                        array.push(Value::Table(Table::new()));
                    }
                    if last {
                        array[idx] = value;
                        return Ok(());
                    }
                    table = array[idx].as_table_mut().ok_or_else(bad)?;
                }
            }
        }
        Ok(())
    }

    fn raw(&self) -> Result<RawConfig, CliError> {
        Value::Table(self.table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Invalid(format!("config: {}", e.message())))
    }

    /// Resolves only the synthetic `stream` section.
    pub fn stream_config(&self) -> Result<StreamConfig, CliError> {
        let raw = self.raw()?;
        if raw.stream.path.is_some() {
            return Err(CliError::Invalid("stream.path is not allowed when generating a stream".into()));
        }
        synthetic(&raw.stream)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let raw = self.raw()?;
        let stream = match &raw.stream.path {
            None => StreamSource::Synthetic(synthetic(&raw.stream)?),
            Some(path) => file_source(&raw.stream, path)?,
        };

        if raw.classifiers.is_empty() {
            return Err(CliError::Invalid("at least one [[classifiers]] entry is required".into()));
        }
        let mut seen = BTreeSet::new();
        let mut classifiers = Vec::new();
        for c in raw.classifiers {
            let name = c.name.unwrap_or_else(|| c.kind.clone());
            if !seen.insert(name.clone()) {
                return Err(CliError::Invalid(format!("duplicate classifier name {name:?}")));
            }
            classifiers.push(ClassifierSpec { name, kind: c.kind, params: c.params });
        }

        let metrics = raw
            .metrics
            .iter()
            .map(|m| {
                Metric::parse(m).map_err(|_| {
                    CliError::Invalid(format!("unknown metric {m:?}; valid metrics: {}", Metric::NAMES.join(", ")))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let protocol = match raw.protocol.kind.as_deref().unwrap_or("test_then_train") {
            "test_then_train" | "ttt" => {
                if raw.protocol.window_size.is_some() {
                    return Err(CliError::Invalid("protocol.window_size requires kind = \"prequential\"".into()));
                }
                Protocol::TestThenTrain
            }
            "prequential" => {
                let w = raw
                    .protocol
                    .window_size
                    .ok_or_else(|| CliError::Invalid("prequential protocol needs protocol.window_size".into()))?;
                let chunk_size = match &stream {
                    StreamSource::Synthetic(c) => c.chunk_size,
                    StreamSource::File { chunk_size, .. } => *chunk_size,
                };
                if w < chunk_size {
                    return Err(CliError::Invalid(format!(
                        "protocol.window_size = {w} is smaller than the chunk size {chunk_size}"
                    )));
                }
                Protocol::Prequential { window_size: w }
            }
            other => {
                return Err(CliError::Invalid(format!(
                    "unknown protocol {other:?}; valid protocols: test_then_train, prequential"
                )))
            }
        };

        Ok(ExperimentConfig {
            stream,
            classifiers,
            metrics,
            protocol,
            scores: raw.output.scores,
            plot: raw.output.plot,
        })
    }
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn synthetic(s: &RawStream) -> Result<StreamConfig, CliError> {
    if s.format.is_some() {
        return Err(CliError::Invalid("stream.format needs stream.path".into()));
    }
    let d = StreamConfig::default();
    let drift_type = match &s.drift_type {
        None => d.drift_type,
        Some(t) => DriftType::parse(t).ok_or_else(|| {
            CliError::Invalid(format!("unknown drift_type {t:?}; valid: sudden, gradual, incremental"))
        })?,
    };
    let weights = match &s.weights {
        None => d.weights,
        Some(RawWeights::Named(n)) if n == "balanced" => ClassWeights::Balanced,
        Some(RawWeights::Named(n)) => {
            return Err(CliError::Invalid(format!(
                "weights {n:?} not understood; use \"balanced\", a list, or a dynamic table"
            )))
        }
        Some(RawWeights::Static(w)) => ClassWeights::Static(w.clone()),
        Some(RawWeights::Dynamic { n_cycles, sigmoid_spacing, oscillation_range }) => ClassWeights::Dynamic {
            n_cycles: *n_cycles,
            sigmoid_spacing: *sigmoid_spacing,
            oscillation_range: *oscillation_range,
        },
    };
    let config = StreamConfig {
        n_chunks: s.n_chunks.unwrap_or(d.n_chunks),
        chunk_size: s.chunk_size.unwrap_or(d.chunk_size),
        n_classes: s.n_classes.unwrap_or(d.n_classes),
        n_features: s.n_features.unwrap_or(d.n_features),
        n_informative: s.n_informative.unwrap_or(d.n_informative),
        n_redundant: s.n_redundant.unwrap_or(d.n_redundant),
        n_repeated: s.n_repeated.unwrap_or(d.n_repeated),
        n_clusters_per_class: s.n_clusters_per_class.unwrap_or(d.n_clusters_per_class),
        class_sep: s.class_sep.unwrap_or(d.class_sep),
        n_drifts: s.n_drifts.unwrap_or(d.n_drifts),
        drift_type,
        concept_sigmoid_spacing: s.concept_sigmoid_spacing.unwrap_or(d.concept_sigmoid_spacing),
        recurring: s.recurring.unwrap_or(d.recurring),
        y_flip: match &s.y_flip {
            None => d.y_flip,
            Some(RawNoise::Uniform(p)) => LabelNoise::Uniform(*p),
            Some(RawNoise::PerClass(ps)) => LabelNoise::PerClass(ps.clone()),
        },
        weights,
        random_seed: s.random_seed.unwrap_or(d.random_seed),
    };
    let violations = validate_config(&config);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| format!("invalid stream config: {v}")).collect();
        return Err(CliError::Invalid(lines.join("\n")));
    }
    Ok(config)
}

fn file_source(s: &RawStream, path: &std::path::Path) -> Result<StreamSource, CliError> {
    let synthetic_keys = [
        ("n_chunks", s.n_chunks.is_some()),
        ("n_features", s.n_features.is_some()),
        ("n_informative", s.n_informative.is_some()),
        ("n_redundant", s.n_redundant.is_some()),
        ("n_repeated", s.n_repeated.is_some()),
        ("n_clusters_per_class", s.n_clusters_per_class.is_some()),
        ("class_sep", s.class_sep.is_some()),
        ("n_drifts", s.n_drifts.is_some()),
        ("drift_type", s.drift_type.is_some()),
        ("concept_sigmoid_spacing", s.concept_sigmoid_spacing.is_some()),
        ("recurring", s.recurring.is_some()),
        ("y_flip", s.y_flip.is_some()),
        ("weights", s.weights.is_some()),
        ("random_seed", s.random_seed.is_some()),
    ];
    if let Some((key, _)) = synthetic_keys.iter().find(|(_, set)| *set) {
        return Err(CliError::Invalid(format!(
            "stream.{key} conflicts with stream.path; configure exactly one stream source"
        )));
    }
    let format = match &s.format {
        Some(f) => Format::parse(f).ok_or_else(|| CliError::Invalid(format!("unknown format {f:?}; valid: arff, csv")))?,
        None => format_from_path(path),
    };
    let chunk_size = s.chunk_size.unwrap_or(StreamConfig::default().chunk_size);
    if chunk_size == 0 {
        return Err(CliError::Invalid("stream.chunk_size must be positive".into()));
    }
    Ok(StreamSource::File { path: path.to_path_buf(), format, chunk_size, n_classes: s.n_classes.unwrap_or(2) })
}

pub fn format_from_path(path: &std::path::Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Arff,
    }
}
