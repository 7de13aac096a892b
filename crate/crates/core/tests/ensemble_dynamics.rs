use driftlab::datamodel::{ClassWeights, LabelNoise, StreamConfig};
use driftlab::ensembles::{OnlineBagging, OnlineImbalanceBagging, Wae};
use driftlab::evaluators::Evaluator;
use driftlab::generator::StreamGenerator;
use driftlab::learners::{AccumulatedSamples, GaussianNb, Learner};
use driftlab::metrics::Metric;

fn drift_stream(seed: u64) -> StreamGenerator {
    let cfg = StreamConfig { n_chunks: 40, chunk_size: 200, n_drifts: 1, random_seed: seed, ..Default::default() };
    StreamGenerator::new(cfg).unwrap()
}

#[test]
fn wae_prunes_pre_drift_members_after_a_sudden_drift() {
    let cap = 5;
    let mut wae = Wae::new(Box::new(GaussianNb::new()), cap);
    let drift_chunk = 20;
    for (k, chunk) in drift_stream(1410).enumerate() {
        wae.partial_fit(&chunk, &[0, 1], None).unwrap();
        if k == drift_chunk + cap {
            let joined = wae.member_join_chunks();
            assert!(joined.iter().all(|&j| j >= drift_chunk), "pool after drift: {joined:?}");
            return;
        }
    }
    unreachable!();
}

#[test]
fn fresh_candidate_weight_is_quality_above_chance() {
    let mut wae = Wae::new(Box::new(GaussianNb::new()), 3);
    let chunk = drift_stream(3).next().unwrap();
    wae.partial_fit(&chunk, &[0, 1], None).unwrap();
    let nb = {
        let mut nb = GaussianNb::new();
        nb.partial_fit(&chunk, &[0, 1], None).unwrap();
        nb
    };
    let pred = nb.predict(chunk.features()).unwrap();
    let b = Metric::BalancedAccuracy.evaluate(chunk.labels(), &pred.labels).unwrap();
    assert!((wae.weights()[0] - (b - 0.5).max(0.0)).abs() < 1e-12);
}

fn imbalanced_chunks(n_chunks: usize, seed: u64) -> Vec<driftlab::datamodel::Chunk> {
    let cfg = StreamConfig {
        n_chunks,
        chunk_size: 500,
        n_features: 4,
        weights: ClassWeights::Static(vec![0.9, 0.1]),
        y_flip: LabelNoise::Uniform(0.0),
        random_seed: seed,
        ..Default::default()
    };
    StreamGenerator::new(cfg).unwrap().collect()
}

/// Mean rate applied to instances of `label` over the last `tail` chunks,
/// and the rate implied by the realised class frequency over those chunks.
fn equilibrium_rate(mut e: OnlineImbalanceBagging, label: usize, tail: usize) -> (f64, f64) {
    let chunks = imbalanced_chunks(100, 1410);
    let (mut sum, mut n, mut seen) = (0.0, 0, 0);
    for (k, c) in chunks.iter().enumerate() {
        e.partial_fit(c, &[0, 1], None).unwrap();
        if k >= chunks.len() - tail {
            seen += c.len();
            for (&y, &r) in c.labels().iter().zip(e.last_rates()) {
                if y == label {
                    sum += r;
                    n += 1;
                }
            }
        }
    }
    let own = n as f64 / seen as f64;
    (sum / n as f64, (1.0 - own) / own)
}

#[test]
fn oob_minority_rate_settles_near_nine() {
    let oob = OnlineImbalanceBagging::oob(Box::new(GaussianNb::new()), 3, 5).with_decay(0.999);
    let (rate, implied) = equilibrium_rate(oob, 1, 50);
    assert!((rate - implied).abs() <= 0.05 * implied, "rate {rate} implied {implied}");
    assert!((rate - 9.0).abs() <= 0.5, "rate {rate}");
}

#[test]
fn uob_majority_rate_settles_near_one_ninth() {
    let uob = OnlineImbalanceBagging::uob(Box::new(GaussianNb::new()), 3, 5).with_decay(0.999);
    let (rate, implied) = equilibrium_rate(uob, 0, 50);
    assert!((rate - implied).abs() <= 0.05 * implied, "rate {rate} implied {implied}");
    assert!((rate - 1.0 / 9.0).abs() <= 0.01, "rate {rate}");
}

#[test]
fn balanced_stream_keeps_rates_near_one() {
    let cfg = StreamConfig { n_chunks: 30, chunk_size: 500, n_features: 4, random_seed: 8, ..Default::default() };
    let mut oob = OnlineImbalanceBagging::oob(Box::new(GaussianNb::new()), 3, 5).with_decay(0.999);
    for c in StreamGenerator::new(cfg).unwrap() {
        oob.partial_fit(&c, &[0, 1], None).unwrap();
    }
    let w = oob.class_sizes();
    assert!((w[0] - 0.5).abs() < 0.05, "{w:?}");
    let mean: f64 = oob.last_rates().iter().sum::<f64>() / oob.last_rates().len() as f64;
    assert!((mean - 1.0).abs() < 0.1, "{mean}");
}

#[test]
fn constant_draw_bagging_matches_a_plain_learner() {
    let chunks: Vec<_> = drift_stream(4).take(5).collect();
    let mut bag = OnlineBagging::new(Box::new(GaussianNb::new()), 3, 9).with_constant_draw(1);
    let mut plain = GaussianNb::new();
    for c in &chunks {
        bag.partial_fit(c, &[0, 1], None).unwrap();
        plain.partial_fit(c, &[0, 1], None).unwrap();
    }
    for m in bag.members() {
        let m = m.as_any().downcast_ref::<GaussianNb>().unwrap();
        for (a, b) in m.class_stats().iter().zip(plain.class_stats()) {
            assert!((a.weight - b.weight).abs() < 1e-9);
            assert!(a.mean.iter().zip(&b.mean).all(|(x, y)| (x - y).abs() < 1e-9));
            assert!(a.m2.iter().zip(&b.m2).all(|(x, y)| (x - y).abs() < 1e-6));
        }
    }
}

#[test]
fn accumulated_samples_improves_on_its_early_chunks() {
    let cfg = StreamConfig { n_chunks: 100, chunk_size: 100, random_seed: 12, ..Default::default() };
    let mut learners: Vec<Box<dyn Learner>> = vec![Box::new(AccumulatedSamples::new(Box::new(GaussianNb::new())))];
    let t = Evaluator::test_then_train(vec![Metric::Accuracy])
        .process(StreamGenerator::new(cfg).unwrap(), &mut learners)
        .unwrap();
    let acc = t.series(0, 0);
    let early = acc[..10].iter().sum::<f64>() / 10.0;
    let late = acc[49..].iter().sum::<f64>() / 50.0;
    assert!(late >= early, "early {early} late {late}");
}
