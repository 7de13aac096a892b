//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs::File;
use std::io::BufReader;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use driftlab::datamodel::{Chunk, ClassWeights, InMemoryStream, LabelNoise, StreamConfig};
use driftlab::ensembles::{poisson_draws, OnlineBagging, OnlineImbalanceBagging, Sea, Wae};
use driftlab::evaluators::Evaluator;
use driftlab::generator::{DriftSchedule, StreamGenerator};
use driftlab::learners::{GaussianNb, Learner};
use driftlab::metrics::{self, Metric};
use driftlab::rng::{sub_stream, Channel};
use driftlab::stream_io::{write_stream, ArffReader, Format, StreamLayout};
use rand::Rng;

const WRITE_ENV: &str = "DRIFTLAB_ACCEPTANCE_WRITE";

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn example_config() -> StreamConfig {
    StreamConfig { n_chunks: 100, n_drifts: 1, ..Default::default() }
}

fn gnb() -> Vec<Box<dyn Learner>> {
    vec![Box::new(GaussianNb::new())]
}

fn score_tensor_contract() -> Outcome {
    let ev = Evaluator::test_then_train(vec![Metric::Accuracy, Metric::Precision]);
    let t = ev.process(StreamGenerator::new(example_config()).unwrap(), &mut gnb()).map_err(|e| e.to_string())?;
    ensure(t.shape() == (1, 99, 2), || format!("shape {:?}", t.shape()))?;
    Ok(format!("shape {:?}", t.shape()))
}

fn drift_dip() -> Outcome {
    let ev = Evaluator::test_then_train(vec![Metric::Accuracy]);
    let t = ev.process(StreamGenerator::new(example_config()).unwrap(), &mut gnb()).map_err(|e| e.to_string())?;
    let acc = t.series(0, 0);
    // Step s evaluates chunk s + 1.
    let at = |chunk: usize| acc[chunk - 1];
    let baseline = (30..=45).map(at).sum::<f64>() / 16.0;
    let (chunk, low) = (47..=53).map(|c| (c, at(c))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    ensure(low <= at(chunk - 1) && low <= at(chunk + 1), || format!("chunk {chunk} is not a local minimum"))?;
    ensure(baseline - low >= 0.05, || format!("dip {low:.3} vs baseline {baseline:.3}"))?;
    Ok(format!("minimum {low:.3} at chunk {chunk}, chunks 30-45 mean {baseline:.3}"))
}

fn write_arff(config: &StreamConfig, path: &Path) {
    let layout = StreamLayout { relation: "stream".into(), n_features: config.n_features, n_classes: config.n_classes };
    let chunks: Vec<Chunk> = StreamGenerator::new(config.clone()).unwrap().collect();
    write_stream(&mut File::create(path).unwrap(), &layout, &chunks, Format::Arff).unwrap();
}

fn determinism_config() -> StreamConfig {
    StreamConfig { n_chunks: 40, chunk_size: 100, n_drifts: 2, drift_type: driftlab::datamodel::DriftType::Incremental,
        concept_sigmoid_spacing: 5.0, random_seed: 99, ..Default::default() }
}

fn generator_determinism(dir: &Path) -> Outcome {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.join(format!("run{run}.arff"));
        let status = Command::new(&exe).env(WRITE_ENV, &path).status().map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("child process {run} failed: {status}"))?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(!outputs[0].is_empty() && outputs[0] == outputs[1], || "ARFF bytes differ between processes".into())?;
    Ok(format!("{} identical bytes from two processes", outputs[0].len()))
}

fn drift_anchors() -> Outcome {
    let total = 20_000;
    for spacing in [999.0, 5.0, 0.5] {
        let s = DriftSchedule { n_drifts: 1, spacing, recurring: false, total_instances: total };
        let p = s.drift_probability(total / 2);
        ensure((p - 0.5).abs() <= 1e-9, || format!("p(midpoint) = {p} at spacing {spacing}"))?;
    }
    let s = DriftSchedule { n_drifts: 1, spacing: 999.0, recurring: false, total_instances: total };
    let (first, last) = (s.drift_probability(0), s.drift_probability(total - 1));
    ensure(first < 1e-6 && last > 1.0 - 1e-6, || format!("p(0) = {first}, p(last) = {last}"))?;

    let visited = |recurring: bool| {
        let cfg = StreamConfig { n_chunks: 100, n_drifts: 4, recurring, ..Default::default() };
        let generator = StreamGenerator::new(cfg.clone()).unwrap();
        let sched = DriftSchedule::from_config(&cfg);
        let mut used = std::collections::BTreeSet::new();
        for i in 0..cfg.total_instances() {
            let (a, b, _) = sched.active_concepts(i);
            used.insert(a);
            used.insert(b);
        }
        (generator.concepts().len(), used.len())
    };
    let rec = visited(true);
    let non = visited(false);
    ensure(rec == (2, 2), || format!("recurring uses {rec:?} concepts"))?;
    ensure(non == (5, 5), || format!("non-recurring uses {non:?} concepts"))?;
    Ok(format!("p(mid) = 0.5, p(0) = {first:.1e}, recurring 2 concepts, non-recurring 5"))
}

fn class_one_frequencies(cfg: StreamConfig) -> Vec<f64> {
    StreamGenerator::new(cfg)
        .unwrap()
        .map(|c| c.labels().iter().filter(|&&y| y == 1).count() as f64 / c.len() as f64)
        .collect()
}

fn static_imbalance() -> Outcome {
    let cfg = StreamConfig { n_chunks: 100, chunk_size: 500, weights: ClassWeights::Static(vec![0.1, 0.9]), ..Default::default() };
    let freq = class_one_frequencies(cfg);
    let band = 4.0 * (0.09f64 / 500.0).sqrt();
    let inside = freq.iter().filter(|f| (*f - 0.9).abs() <= band).count();
    ensure(inside >= 99, || format!("{inside}/100 chunks within 0.9 +- {band:.4}"))?;
    Ok(format!("{inside}/100 chunks within 0.9 +- {band:.4}"))
}

fn dynamic_imbalance() -> Outcome {
    let cfg = StreamConfig {
        n_chunks: 200,
        chunk_size: 500,
        weights: ClassWeights::Dynamic { n_cycles: 2, sigmoid_spacing: 5.0, oscillation_range: 0.9 },
        ..Default::default()
    };
    let n = cfg.chunk_size as f64;
    let freq = class_one_frequencies(cfg);
    let lo = freq.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = freq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ensure(lo <= 0.15 && hi >= 0.85, || format!("range [{lo:.3}, {hi:.3}] does not span [0.15, 0.85]"))?;
    let sigma = (0.05f64 * 0.95 / n).sqrt();
    ensure(lo >= 0.05 - 3.0 * sigma && hi <= 0.95 + 3.0 * sigma, || format!("range [{lo:.3}, {hi:.3}] leaves the band"))?;
    // Sign of the excursion around 0.5, with a dead zone against sampling noise.
    let mut signs: Vec<i8> = freq
        .iter()
        .filter_map(|&f| if f > 0.6 { Some(1) } else if f < 0.4 { Some(-1) } else { None })
        .collect();
    signs.dedup();
    let highs = signs.iter().filter(|&&s| s == 1).count();
    let lows = signs.iter().filter(|&&s| s == -1).count();
    ensure(highs == 2 && lows == 2, || format!("excursions: {highs} high, {lows} low"))?;
    Ok(format!("range [{lo:.3}, {hi:.3}], {highs} full cycles"))
}

/// Independent per-sample counting oracle for the binary metrics.
fn oracle(truth: &[usize], pred: &[usize], beta: f64) -> [f64; 7] {
    let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (1, 1) => tp += 1.0,
            (0, 1) => fp += 1.0,
            (1, 0) => fn_ += 1.0,
            _ => tn += 1.0,
        }
    }
    let safe = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let r = safe(tp, tp + fn_);
    let p = safe(tp, tp + fp);
    let s = safe(tn, tn + fp);
    let b2 = beta * beta;
    [
        r,
        p,
        safe((1.0 + b2) * p * r, b2 * p + r),
        safe(2.0 * p * r, p + r),
        (r + s) / 2.0,
        (r * s).sqrt(),
        (r * p).sqrt(),
    ]
}

fn metric_oracle() -> Outcome {
    let beta = 2.0;
    let metrics = [
        Metric::Recall,
        Metric::Precision,
        Metric::FBeta(beta),
        Metric::F1,
        Metric::BalancedAccuracy,
        Metric::GeometricMean1,
        Metric::GeometricMean2,
    ];
    let mut rng = sub_stream(2024, Channel::Labels);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = rng.random_range(1..200);
        let truth: Vec<usize> = (0..len).map(|_| rng.random_range(0..2)).collect();
        let pred: Vec<usize> = (0..len).map(|_| rng.random_range(0..2)).collect();
        let want = oracle(&truth, &pred, beta);
        for (m, w) in metrics.iter().zip(want) {
            let got = m.evaluate(&truth, &pred).map_err(|e| e.to_string())?;
            worst = worst.max((got - w).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max oracle deviation {worst:e}"))?;

    // tp 3, fn 2, fp 1, tn 4
    let truth = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
    let pred = [1, 1, 1, 0, 0, 1, 0, 0, 0, 0];
    let cm = metrics::confusion(&truth, &pred).map_err(|e| e.to_string())?;
    let hand = [
        ("recall", metrics::recall(&cm), 0.6),
        ("precision", metrics::precision(&cm), 0.75),
        ("f1", metrics::f1(&cm), 0.6667),
        ("balanced_accuracy", metrics::balanced_accuracy(&cm), 0.7),
        ("geometric_mean_1", metrics::geometric_mean_1(&cm), 0.6928),
        ("geometric_mean_2", metrics::geometric_mean_2(&cm), 0.6708),
    ];
    for (name, got, want) in hand {
        ensure((got - want).abs() <= 1e-4, || format!("{name} = {got}, expected {want}"))?;
    }
    Ok(format!("1000 vectors, max deviation {worst:.1e}; hand values match"))
}

fn imbalanced_rate(variant_uob: bool) -> (f64, f64) {
    let cfg = StreamConfig {
        n_chunks: 100,
        chunk_size: 500,
        n_features: 4,
        weights: ClassWeights::Static(vec![0.9, 0.1]),
        y_flip: LabelNoise::Uniform(0.0),
        ..Default::default()
    };
    let base = Box::new(GaussianNb::new());
    let mut e = if variant_uob {
        OnlineImbalanceBagging::uob(base, 3, 5)
    } else {
        OnlineImbalanceBagging::oob(base, 3, 5)
    }
    .with_decay(0.999);
    let label = if variant_uob { 0 } else { 1 };
    let chunks: Vec<Chunk> = StreamGenerator::new(cfg).unwrap().collect();
    let (mut sum, mut n) = (0.0, 0);
    for (k, c) in chunks.iter().enumerate() {
        e.partial_fit(c, &[0, 1], None).unwrap();
        if k >= 50 {
            for (&y, &r) in c.labels().iter().zip(e.last_rates()) {
                if y == label {
                    sum += r;
                    n += 1;
                }
            }
        }
    }
    (sum / n as f64, e.class_sizes()[1])
}

fn poisson_machinery() -> Outcome {
    let draws = poisson_draws(7, 1.0, 100_000);
    let mean = draws.iter().map(|&k| k as f64).sum::<f64>() / draws.len() as f64;
    let zero = draws.iter().filter(|&&k| k == 0).count() as f64 / draws.len() as f64;
    ensure((mean - 1.0).abs() <= 0.02, || format!("mean {mean}"))?;
    ensure((zero - 0.368).abs() <= 0.01, || format!("P(K=0) {zero}"))?;
    let (oob, w1) = imbalanced_rate(false);
    let (uob, _) = imbalanced_rate(true);
    ensure((oob - 9.0).abs() <= 0.5, || format!("OOB minority rate {oob:.3} (w1 {w1:.4})"))?;
    ensure((uob - 1.0 / 9.0).abs() <= 0.01, || format!("UOB majority rate {uob:.4}"))?;
    Ok(format!("mean {mean:.4}, P(0) {zero:.4}, OOB {oob:.3}, UOB {uob:.4}"))
}

fn ensemble_caps_and_conformance() -> Outcome {
    let cfg = StreamConfig { n_chunks: 200, chunk_size: 100, n_drifts: 3, ..Default::default() };
    let mut sea = Sea::new(Box::new(GaussianNb::new()), 10);
    let mut wae = Wae::new(Box::new(GaussianNb::new()), 10);
    let mut largest = 0;
    for c in StreamGenerator::new(cfg).unwrap() {
        sea.partial_fit(&c, &[0, 1], None).map_err(|e| e.to_string())?;
        wae.partial_fit(&c, &[0, 1], None).map_err(|e| e.to_string())?;
        largest = largest.max(sea.len()).max(wae.len());
    }
    ensure(largest <= 10, || format!("pool reached {largest}"))?;
    let learners = common::all_learners();
    for (name, make) in &learners {
        common::check_contract(name, *make)?;
    }
    common::check_no_leakage(&Evaluator::test_then_train(vec![]), false)?;
    common::check_no_leakage(&Evaluator::prequential(vec![], 30), true)?;
    Ok(format!("largest pool {largest}; {} learners conform; no leakage in either protocol", learners.len()))
}

fn prequential_anchor() -> Outcome {
    let cfg = StreamConfig { n_chunks: 60, chunk_size: 150, n_drifts: 1, random_seed: 31, ..Default::default() };
    let make = || -> Vec<Box<dyn Learner>> {
        vec![Box::new(GaussianNb::new()), Box::new(OnlineBagging::new(Box::new(GaussianNb::new()), 5, 3))]
    };
    let metrics = vec![Metric::Accuracy, Metric::BalancedAccuracy, Metric::F1];
    let ttt = Evaluator::test_then_train(metrics.clone())
        .process(StreamGenerator::new(cfg.clone()).unwrap(), &mut make())
        .map_err(|e| e.to_string())?;
    let pq = Evaluator::prequential(metrics, cfg.chunk_size)
        .process(StreamGenerator::new(cfg).unwrap(), &mut make())
        .map_err(|e| e.to_string())?;
    let diff = ttt.max_abs_diff(&pq).ok_or("tensor shapes differ")?;
    ensure(diff <= 1e-9, || format!("max difference {diff:e}"))?;
    Ok(format!("max difference {diff:.1e}"))
}

fn arff_round_trip(dir: &Path) -> Outcome {
    let cfg = StreamConfig { n_chunks: 50, chunk_size: 200, n_drifts: 1, random_seed: 17, ..Default::default() };
    let path = dir.join("round_trip.arff");
    write_arff(&cfg, &path);
    let ev = Evaluator::test_then_train(vec![Metric::Accuracy, Metric::Recall, Metric::GeometricMean2]);
    let memory = ev
        .process(InMemoryStream::new(StreamGenerator::new(cfg.clone()).unwrap().collect(), vec![0, 1]), &mut gnb())
        .map_err(|e| e.to_string())?;
    let reader = ArffReader::new(BufReader::new(File::open(&path).map_err(|e| e.to_string())?), cfg.chunk_size)
        .map_err(|e| e.to_string())?;
    let parsed = ev.process(reader, &mut gnb()).map_err(|e| e.to_string())?;
    let diff = memory.max_abs_diff(&parsed).ok_or("tensor shapes differ")?;
    ensure(diff <= 1e-9, || format!("max difference {diff:e}"))?;

    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let cases = [
        ("missing_data.arff", 5),
        ("string_attribute.arff", 3),
        ("duplicate_attribute.arff", 4),
        ("single_class.arff", 4),
        ("no_class.arff", 4),
    ];
    for (name, line) in cases {
        let file = File::open(fixtures.join(name)).map_err(|e| e.to_string())?;
        match ArffReader::new(BufReader::new(file), 10) {
            Ok(_) => return Err(format!("{name} was accepted")),
            Err(e) => ensure(e.line() == Some(line), || format!("{name}: {e}"))?,
        }
    }
    Ok(format!("max difference {diff:.1e}; 5 malformed headers rejected with line numbers"))
}

fn main() {
    if let Ok(path) = std::env::var(WRITE_ENV) {
        write_arff(&determinism_config(), Path::new(&path));
        return;
    }
    let dir = std::env::temp_dir().join(format!("driftlab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("score tensor contract", Box::new(score_tensor_contract)),
        ("drift dip after the midpoint", Box::new(drift_dip)),
        ("generator determinism across processes", Box::new(|| generator_determinism(&dir))),
        ("drift schedule anchors", Box::new(drift_anchors)),
        ("static imbalance", Box::new(static_imbalance)),
        ("dynamic imbalance", Box::new(dynamic_imbalance)),
        ("metric oracle equivalence", Box::new(metric_oracle)),
        ("Poisson machinery and OOB/UOB equilibrium", Box::new(poisson_machinery)),
        ("ensemble caps and conformance", Box::new(ensemble_caps_and_conformance)),
        ("prequential anchor", Box::new(prequential_anchor)),
        ("ARFF round trip and malformed headers", Box::new(|| arff_round_trip(&dir))),
    ];

    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail} ({secs:.2}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {detail} ({secs:.2}s)", i + 1);
            }
        }
    }
    let _ = panic::take_hook();
    std::fs::remove_dir_all(&dir).ok();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
