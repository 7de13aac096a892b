//! Browser bindings: drift schedules, imbalance schedules and a small
//! Test-Then-Train run, all computed by `driftlab`.

use driftlab::datamodel::{ClassWeights, DriftType, StreamConfig};
use driftlab::ensembles::{OnlineBagging, OnlineImbalanceBagging, Sea, Wae};
use driftlab::evaluators::Evaluator;
use driftlab::generator::{DriftSchedule, StreamGenerator};
use driftlab::learners::{AccumulatedSamples, GaussianNb, Learner};
use driftlab::metrics::Metric;
use wasm_bindgen::prelude::*;

pub const DEMO_LEARNERS: [&str; 7] = ["gnb", "accumulated", "sea", "wae", "online_bagging", "oob", "uob"];

fn schedule(n_chunks: usize, chunk_size: usize, n_drifts: usize, spacing: f64, recurring: bool) -> DriftSchedule {
    DriftSchedule { n_drifts, spacing, recurring, total_instances: n_chunks * chunk_size }
}

/// Drift probability at the centre of every chunk.
pub fn drift_probabilities(
    n_chunks: usize,
    chunk_size: usize,
    n_drifts: usize,
    spacing: f64,
    recurring: bool,
) -> Vec<f64> {
    let s = schedule(n_chunks, chunk_size, n_drifts, spacing, recurring);
    (0..n_chunks).map(|k| s.drift_probability(k * chunk_size + chunk_size / 2)).collect()
}

/// Observed class-1 share of every chunk of a dynamically imbalanced stream.
pub fn imbalance_shares(
    n_chunks: usize,
    chunk_size: usize,
    n_cycles: usize,
    spacing: f64,
    range: f64,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let cfg = StreamConfig {
        n_chunks,
        chunk_size,
        weights: ClassWeights::Dynamic { n_cycles, sigmoid_spacing: spacing, oscillation_range: range },
        random_seed: seed,
        ..Default::default()
    };
    let g = StreamGenerator::new(cfg).map_err(|e| e.to_string())?;
    Ok(g.map(|c| c.labels().iter().filter(|&&y| y == 1).count() as f64 / c.len() as f64).collect())
}

fn learner(kind: &str, seed: u64) -> Result<Box<dyn Learner>, String> {
    let gnb = || Box::new(GaussianNb::new());
    Ok(match kind {
        "gnb" => gnb(),
        "accumulated" => Box::new(AccumulatedSamples::new(gnb())),
        "sea" => Box::new(Sea::new(gnb(), 10)),
        "wae" => Box::new(Wae::new(gnb(), 10)),
        "online_bagging" => Box::new(OnlineBagging::new(gnb(), 10, seed)),
        "oob" => Box::new(OnlineImbalanceBagging::oob(gnb(), 10, seed)),
        "uob" => Box::new(OnlineImbalanceBagging::uob(gnb(), 10, seed)),
        other => return Err(format!("unknown learner {other:?}; valid: {}", DEMO_LEARNERS.join(", "))),
    })
}

/// Test-Then-Train scores of each learner on one stream, concatenated
/// learner by learner (`n_chunks - 1` values each).
#[allow(clippy::too_many_arguments)]
pub fn experiment(
    n_chunks: usize,
    chunk_size: usize,
    n_drifts: usize,
    drift_type: &str,
    minority_share: f64,
    seed: u64,
    learners: &str,
    metric: &str,
) -> Result<Vec<f64>, String> {
    let drift_type = DriftType::parse(drift_type).ok_or_else(|| format!("unknown drift type {drift_type:?}"))?;
    let weights = if minority_share > 0.0 && minority_share < 0.5 {
        ClassWeights::Static(vec![1.0 - minority_share, minority_share])
    } else {
        ClassWeights::Balanced
    };
    let cfg = StreamConfig {
        n_chunks,
        chunk_size,
        n_drifts,
        drift_type,
        concept_sigmoid_spacing: 5.0,
        weights,
        random_seed: seed,
        ..Default::default()
    };
    let metric = Metric::parse(metric).map_err(|e| e.to_string())?;
    let mut pool: Vec<Box<dyn Learner>> =
        learners.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|k| learner(k, seed)).collect::<Result<_, _>>()?;
    let stream = StreamGenerator::new(cfg).map_err(|e| e.to_string())?;
    let t = Evaluator::test_then_train(vec![metric]).process(stream, &mut pool).map_err(|e| e.to_string())?;
    Ok((0..pool.len()).flat_map(|c| t.series(c, 0)).collect())
}

// Seeds cross the boundary as u32 so JS can pass plain numbers.

#[wasm_bindgen]
pub fn drift_curve(n_chunks: usize, chunk_size: usize, n_drifts: usize, spacing: f64, recurring: bool) -> Vec<f64> {
    drift_probabilities(n_chunks, chunk_size, n_drifts, spacing, recurring)
}

#[wasm_bindgen]
pub fn imbalance_curve(
    n_chunks: usize,
    chunk_size: usize,
    n_cycles: usize,
    spacing: f64,
    range: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    imbalance_shares(n_chunks, chunk_size, n_cycles, spacing, range, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    n_chunks: usize,
    chunk_size: usize,
    n_drifts: usize,
    drift_type: &str,
    minority_share: f64,
    seed: u32,
    learners: &str,
    metric: &str,
) -> Result<Vec<f64>, JsError> {
    experiment(n_chunks, chunk_size, n_drifts, drift_type, minority_share, seed.into(), learners, metric)
        .map_err(|e| JsError::new(&e))
}
