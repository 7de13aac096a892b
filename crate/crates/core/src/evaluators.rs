//! Test-Then-Train and Prequential evaluation over chunked streams.

use std::collections::VecDeque;
use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::datamodel::{Chunk, ChunkSource, DataError, Matrix, ScoreTensor};
use crate::learners::{Learner, LearnerError};
use crate::metrics::{Metric, MetricError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("classifier {classifier} ({name}) failed on chunk {chunk}: {source}")]
    Learner { classifier: usize, name: String, chunk: usize, source: LearnerError },
    #[error("metric {metric} failed for classifier {classifier} on chunk {chunk}: {source}")]
    Metric { classifier: usize, chunk: usize, metric: String, source: MetricError },
    #[error("stream failed at chunk {chunk}: {message}")]
    Stream { chunk: usize, message: String },
    #[error("window size {window_size} is smaller than the chunk size {chunk_size}")]
    WindowTooSmall { window_size: usize, chunk_size: usize },
    #[error("at least one classifier is required")]
    NoClassifiers,
    #[error("expected {expected} classifier names, got {got}")]
    NameCount { expected: usize, got: usize },
    #[error("{0}")]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    TestThenTrain,
    Prequential { window_size: usize },
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::TestThenTrain => f.write_str("test_then_train"),
            Protocol::Prequential { window_size } => write!(f, "prequential({window_size})"),
        }
    }
}

/// Most recent samples of a stream, each tagged with its chunk index.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    capacity: usize,
    rows: VecDeque<(usize, Vec<f64>, usize)>,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, rows: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a chunk and evicts the oldest samples beyond capacity.
    pub fn push(&mut self, chunk_index: usize, chunk: &Chunk) {
        for (x, &y) in chunk.features().iter_rows().zip(chunk.labels()) {
            self.rows.push_back((chunk_index, x.to_vec(), y));
        }
        while self.rows.len() > self.capacity {
            self.rows.pop_front();
        }
    }

    /// Buffer contents and linear recency weights: chunk age `a` gets
    /// `1 - a / m`, with `m` the number of chunks the window can span.
    pub fn weighted_batch(&self, newest: usize, chunk_size: usize) -> Result<(Chunk, Vec<f64>), DataError> {
        let span = self.capacity.div_ceil(chunk_size.max(1)).max(1) as f64;
        let cols = self.rows.front().map_or(0, |r| r.1.len());
        let mut features = Matrix::zeros(0, cols);
        let mut labels = Vec::with_capacity(self.rows.len());
        let mut weights = Vec::with_capacity(self.rows.len());
        for (k, x, y) in &self.rows {
            features.push_row(x)?;
            labels.push(*y);
            weights.push(1.0 - (newest - k) as f64 / span);
        }
        Ok((Chunk::new(features, labels)?, weights))
    }
}

/// Runs learners over a stream and collects a [`ScoreTensor`].
#[derive(Debug, Clone)]
pub struct Evaluator {
    metrics: Vec<Metric>,
    protocol: Protocol,
}

impl Evaluator {
    pub fn new(metrics: Vec<Metric>, protocol: Protocol) -> Self {
        let metrics = if metrics.is_empty() { Metric::defaults() } else { metrics };
        Self { metrics, protocol }
    }

    pub fn test_then_train(metrics: Vec<Metric>) -> Self {
        Self::new(metrics, Protocol::TestThenTrain)
    }

    pub fn prequential(metrics: Vec<Metric>, window_size: usize) -> Self {
        Self::new(metrics, Protocol::Prequential { window_size })
    }

    pub fn metrics(&self) -> &[Metric] {
        &self.metrics
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    /// Evaluates with tensor rows named after each learner.
    pub fn process<S: ChunkSource>(
        &self,
        source: S,
        learners: &mut [Box<dyn Learner>],
    ) -> Result<ScoreTensor, EvalError> {
        let names = learners.iter().map(|l| l.name().to_string()).collect();
        self.process_named(source, learners, names)
    }

    pub fn process_named<S: ChunkSource>(
        &self,
        mut source: S,
        learners: &mut [Box<dyn Learner>],
        names: Vec<String>,
    ) -> Result<ScoreTensor, EvalError> {
        if learners.is_empty() {
            return Err(EvalError::NoClassifiers);
        }
        if names.len() != learners.len() {
            return Err(EvalError::NameCount { expected: learners.len(), got: names.len() });
        }
        let classes = source.classes();
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); learners.len()];
        let mut window = match self.protocol {
            Protocol::TestThenTrain => None,
            Protocol::Prequential { window_size } => Some(SlidingWindow::new(window_size)),
        };
        let mut chunk_size = 0;
        let mut k = 0;
        while let Some(next) = source.next_chunk() {
            let chunk = next.map_err(|e| EvalError::Stream { chunk: k, message: e.to_string() })?;
            if k == 0 {
                chunk_size = chunk.len();
                if let Some(w) = &window {
                    if w.capacity() < chunk_size {
                        return Err(EvalError::WindowTooSmall { window_size: w.capacity(), chunk_size });
                    }
                }
            }
            let batch = match &mut window {
                None => None,
                Some(w) => {
                    w.push(k, &chunk);
                    if w.len() > chunk.len() {
                        Some(w.weighted_batch(k, chunk_size)?)
                    } else {
                        None
                    }
                }
            };
            let step = Step { index: k, chunk: &chunk, batch: batch.as_ref(), classes: &classes };
            let results = self.run_step(&step, learners);
            for (row, res) in rows.iter_mut().zip(results) {
                row.extend(res?);
            }
            k += 1;
        }

        let n_steps = k.saturating_sub(1);
        let metric_names = self.metrics.iter().map(Metric::name).collect();
        let mut tensor = ScoreTensor::zeros(names, n_steps, metric_names);
        for (c, row) in rows.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                tensor.set(c, i / self.metrics.len(), i % self.metrics.len(), *v);
            }
        }
        Ok(tensor)
    }

    /// One worker per learner when there are several; sequential on wasm.
    fn run_step(&self, step: &Step<'_>, learners: &mut [Box<dyn Learner>]) -> Vec<Result<Vec<f64>, EvalError>> {
        if learners.len() == 1 || cfg!(target_arch = "wasm32") {
            return learners.iter_mut().enumerate().map(|(c, l)| self.step_one(c, l, step)).collect();
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = learners
                .iter_mut()
                .enumerate()
                .map(|(c, l)| scope.spawn(move || self.step_one(c, l, step)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
        })
    }

    fn step_one(&self, c: usize, learner: &mut Box<dyn Learner>, step: &Step<'_>) -> Result<Vec<f64>, EvalError> {
        let fault = |source: LearnerError, learner: &dyn Learner| EvalError::Learner {
            classifier: c,
            name: learner.name().to_string(),
            chunk: step.index,
            source,
        };
        let mut scores = Vec::new();
        if step.index > 0 {
            let pred = learner.predict(step.chunk.features()).map_err(|e| fault(e, learner.as_ref()))?;
            for m in &self.metrics {
                let v = m.evaluate(step.chunk.labels(), &pred.labels).map_err(|source| EvalError::Metric {
                    classifier: c,
                    chunk: step.index,
                    metric: m.name(),
                    source,
                })?;
                scores.push(v);
            }
        }
        let fitted = match step.batch {
            Some((buffer, weights)) if learner.supports_weights() => {
                learner.partial_fit(buffer, step.classes, Some(weights))
            }
            _ => learner.partial_fit(step.chunk, step.classes, None),
        };
        fitted.map_err(|e| fault(e, learner.as_ref()))?;
        Ok(scores)
    }
}

struct Step<'a> {
    index: usize,
    chunk: &'a Chunk,
    batch: Option<&'a (Chunk, Vec<f64>)>,
    classes: &'a [usize],
}

/// Writes `classifier,chunk,metric,value` rows with values rounded to 9
/// significant digits; `chunk` is the stream chunk index, so step 0 is
/// chunk 1. Returns the number of data rows.
pub fn export_scores<W: Write>(tensor: &ScoreTensor, sink: &mut W) -> io::Result<usize> {
    writeln!(sink, "classifier,chunk,metric,value")?;
    let (n_c, n_s, n_m) = tensor.shape();
    for c in 0..n_c {
        for s in 0..n_s {
            for m in 0..n_m {
                writeln!(
                    sink,
                    "{},{},{},{}",
                    tensor.classifier_names()[c],
                    s + 1,
                    tensor.metric_names()[m],
                    significant(tensor.get(c, s, m))
                )?;
            }
        }
    }
    sink.flush()?;
    Ok(n_c * n_s * n_m)
}

/// Rounds to 9 significant digits, printed in the shortest form.
fn significant(v: f64) -> f64 {
    format!("{v:.8e}").parse().unwrap_or(v)
}

#[derive(Debug, Error)]
pub enum ScoreParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Rebuilds a tensor from [`export_scores`] output. Names keep first-seen order.
pub fn parse_scores<R: BufRead>(source: R) -> Result<ScoreTensor, ScoreParseError> {
    let mut classifiers: Vec<String> = Vec::new();
    let mut metrics: Vec<String> = Vec::new();
    let mut cells = Vec::new();
    let mut n_steps = 0;
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let no = i + 1;
        if no == 1 {
            if line != "classifier,chunk,metric,value" {
                return Err(ScoreParseError::Syntax { line: no, message: "unexpected header".into() });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let bad = |message: &str| ScoreParseError::Syntax { line: no, message: message.into() };
        let parts: Vec<&str> = line.rsplitn(4, ',').collect();
        let [value, metric, chunk, classifier] = parts[..] else {
            return Err(bad("expected 4 columns"));
        };
        let step: usize = chunk.parse().ok().filter(|&c| c >= 1).ok_or_else(|| bad("bad chunk index"))?;
        let value: f64 = value.parse().map_err(|_| bad("bad value"))?;
        let position = |names: &mut Vec<String>, name: &str| {
            names.iter().position(|n| n == name).unwrap_or_else(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let c = position(&mut classifiers, classifier);
        let m = position(&mut metrics, metric);
        n_steps = n_steps.max(step);
        cells.push((c, step - 1, m, value));
    }
    let mut tensor = ScoreTensor::zeros(classifiers, n_steps, metrics);
    for (c, s, m, v) in cells {
        tensor.set(c, s, m, v);
    }
    Ok(tensor)
}
