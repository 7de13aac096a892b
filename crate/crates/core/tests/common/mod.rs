//! Shared learner conformance checks and call-order checks.
#![allow(dead_code)]

use std::sync::{Arc, Mutex};

use driftlab::ensembles::{OnlineBagging, OnlineImbalanceBagging, Sea, Wae};
use driftlab::evaluators::Evaluator;
use driftlab::learners::{AccumulatedSamples, GaussianNb, Learner, SampleWeighted, WeightPolicy};
use driftlab::prelude::*;
use driftlab::testkit::{Call, CallRecorder};

pub type Factory = fn() -> Box<dyn Learner>;

pub fn gnb() -> Box<dyn Learner> {
    Box::new(GaussianNb::new())
}

/// Every learner and ensemble shipped by the library.
pub fn all_learners() -> Vec<(&'static str, Factory)> {
    vec![
        ("gnb", gnb),
        ("accumulated", || Box::new(AccumulatedSamples::new(gnb()))),
        ("sample_weighted_uniform", || Box::new(SampleWeighted::new(gnb(), WeightPolicy::Uniform).unwrap())),
        ("sample_weighted_inverse", || {
            Box::new(SampleWeighted::new(gnb(), WeightPolicy::InverseClassFrequency).unwrap())
        }),
        ("sea", || Box::new(Sea::new(gnb(), 4))),
        ("online_bagging", || Box::new(OnlineBagging::new(gnb(), 4, 11))),
        ("oob", || Box::new(OnlineImbalanceBagging::oob(gnb(), 4, 12))),
        ("uob", || Box::new(OnlineImbalanceBagging::uob(gnb(), 4, 13))),
        ("wae", || Box::new(Wae::new(gnb(), 4))),
    ]
}

pub fn small_stream(seed: u64, n_chunks: usize) -> Vec<Chunk> {
    let cfg = StreamConfig {
        n_chunks,
        chunk_size: 60,
        n_features: 6,
        n_drifts: 1,
        random_seed: seed,
        ..Default::default()
    };
    StreamGenerator::new(cfg).unwrap().collect()
}

/// Fit-then-predict, predict-before-fit, length and determinism checks.
pub fn check_contract(name: &str, make: Factory) -> Result<(), String> {
    let chunks = small_stream(21, 6);
    let classes = [0, 1];
    let probe = chunks[5].features();

    let fresh = make();
    if fresh.predict(probe).is_ok() {
        return Err(format!("{name}: predict before partial_fit must fail"));
    }

    let mut a = make();
    let mut b = make();
    for c in &chunks[..5] {
        a.partial_fit(c, &classes, None).map_err(|e| format!("{name}: fit failed: {e}"))?;
        b.partial_fit(c, &classes, None).map_err(|e| format!("{name}: fit failed: {e}"))?;
    }
    let pa = a.predict(probe).map_err(|e| format!("{name}: predict after fit failed: {e}"))?;
    let pb = b.predict(probe).map_err(|e| format!("{name}: predict failed: {e}"))?;
    if pa.labels.len() != probe.rows() {
        return Err(format!("{name}: {} labels for {} rows", pa.labels.len(), probe.rows()));
    }
    if let Some(s) = &pa.support {
        if s.rows() != probe.rows() || s.cols() != classes.len() {
            return Err(format!("{name}: support shape {}x{}", s.rows(), s.cols()));
        }
        for r in s.iter_rows() {
            let total: f64 = r.iter().sum();
            if (total - 1.0).abs() > 1e-9 || r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("{name}: support row {r:?} is not a distribution"));
            }
        }
    }
    if pa.labels.iter().any(|l| !classes.contains(l)) {
        return Err(format!("{name}: predicted an undeclared label"));
    }
    if pa != pb {
        return Err(format!("{name}: two identically seeded learners disagree"));
    }

    let empty = a.predict(&Matrix::zeros(0, probe.cols())).map_err(|e| format!("{name}: empty predict: {e}"))?;
    if !empty.labels.is_empty() {
        return Err(format!("{name}: empty input gave labels"));
    }
    if a.predict(&Matrix::zeros(2, probe.cols() + 1)).is_ok() {
        return Err(format!("{name}: wrong feature arity accepted"));
    }
    if a.clone_unfitted().predict(probe).is_ok() {
        return Err(format!("{name}: clone_unfitted returned a fitted learner"));
    }
    let mut c = a.clone_unfitted();
    for ch in &chunks[..5] {
        c.partial_fit(ch, &classes, None).map_err(|e| format!("{name}: refit failed: {e}"))?;
    }
    if c.predict(probe).map_err(|e| e.to_string())? != pa {
        return Err(format!("{name}: clone_unfitted does not reproduce the original"));
    }
    Ok(())
}

/// Chunk `k` carries the constant feature value `k`, so calls can be attributed.
pub fn keyed_stream(n_chunks: usize, chunk_size: usize) -> InMemoryStream {
    let chunks = (0..n_chunks)
        .map(|k| {
            let rows: Vec<[f64; 2]> = (0..chunk_size).map(|i| [k as f64, i as f64]).collect();
            let labels = (0..chunk_size).map(|i| i % 2).collect();
            Chunk::new(Matrix::from_rows(&rows).unwrap(), labels).unwrap()
        })
        .collect();
    InMemoryStream::new(chunks, vec![0, 1])
}

/// Runs a recording learner and checks that chunk `k` is never trained on
/// before it has been predicted.
pub fn check_no_leakage(evaluator: &Evaluator, weights: bool) -> Result<(), String> {
    let n_chunks = 12;
    let log: Arc<Mutex<Vec<Call>>> = Arc::default();
    let mut learners: Vec<Box<dyn Learner>> = vec![Box::new(CallRecorder::new(log.clone(), weights))];
    evaluator.process(keyed_stream(n_chunks, 10), &mut learners).map_err(|e| e.to_string())?;
    let calls = log.lock().unwrap().clone();
    for k in 1..n_chunks {
        let key = k as f64;
        let predicted = calls
            .iter()
            .position(|c| matches!(c, Call::Predict { key: p, .. } if *p == key))
            .ok_or_else(|| format!("chunk {k} was never predicted"))?;
        let trained = calls
            .iter()
            .position(|c| matches!(c, Call::Fit { last, .. } if *last >= key))
            .ok_or_else(|| format!("chunk {k} was never trained on"))?;
        if trained < predicted {
            return Err(format!("chunk {k} trained on (call {trained}) before predicted (call {predicted})"));
        }
    }
    Ok(())
}
