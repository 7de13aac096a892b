//! Chunk-based and online classifier ensembles.
//!
//! * [`Sea`] keeps one member per chunk and prunes the worst scorer.
//! * [`OnlineBagging`] updates each member with a Poisson(1) multiplicity per instance.
//! * [`OnlineImbalanceBagging`] (OOB / UOB) sets the Poisson rate from
//!   time-decayed class sizes to over- or undersample.
//! * [`Wae`] weights members by above-chance balanced accuracy with
//!   geometric aging and prunes the lightest member.
//!
//! WAE's weighting is a reconstruction: the member quality is its balanced
//! accuracy on the newest chunk minus the chance level, multiplied by
//! `aging^age`. It sits behind [`MemberWeighting`] so other rules can be swapped in.

use std::any::Any;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::datamodel::{Chunk, Matrix, Prediction};
use crate::learners::{argmax, support_or_one_hot, ClassSpace, Learner, LearnerError};
use crate::metrics::Metric;
use crate::rng::{sub_stream, Channel};

pub const DEFAULT_POOL_SIZE: usize = 10;
pub const DEFAULT_DECAY: f64 = 0.9;
pub const DEFAULT_AGING: f64 = 0.95;
pub const LAMBDA_CAP: f64 = 100.0;

fn reject_weights(name: &str, w: Option<&[f64]>) -> Result<(), LearnerError> {
    match w {
        Some(_) => Err(LearnerError::WeightsUnsupported(name.into())),
        None => Ok(()),
    }
}

/// Weighted soft vote: `sum_j w_j * support_j / sum_j w_j`, uniform when all
/// weights are zero, argmax with ties to the lowest class index.
pub fn weighted_vote(supports: &[Matrix], weights: &[f64], classes: &[usize]) -> Result<Prediction, LearnerError> {
    let first = supports.first().ok_or(LearnerError::EmptyPool)?;
    let total: f64 = weights.iter().sum();
    let uniform = total <= 0.0;
    let mut out = Matrix::zeros(first.rows(), classes.len());
    for (s, &w) in supports.iter().zip(weights) {
        let w = if uniform { 1.0 / supports.len() as f64 } else { w / total };
        if w == 0.0 {
            continue;
        }
        for i in 0..s.rows() {
            for (o, v) in out.row_mut(i).iter_mut().zip(s.row(i)) {
                *o += w * v;
            }
        }
    }
    let labels = out.iter_rows().map(|r| classes[argmax(r)]).collect();
    Ok(Prediction { labels, support: Some(out) })
}

fn supports_of<'a>(
    learners: impl Iterator<Item = &'a dyn Learner>,
    features: &Matrix,
    classes: &[usize],
) -> Result<Vec<Matrix>, LearnerError> {
    learners.map(|l| l.predict(features).map(|p| support_or_one_hot(&p, classes))).collect()
}

/// Mean per-class recall over the declared classes (balanced accuracy for the binary case).
pub(crate) fn mean_class_recall(truth: &[usize], predicted: &[usize], classes: &[usize]) -> f64 {
    let mut hits = vec![0usize; classes.len()];
    let mut totals = vec![0usize; classes.len()];
    for (t, p) in truth.iter().zip(predicted) {
        if let Some(k) = classes.iter().position(|c| c == t) {
            totals[k] += 1;
            if t == p {
                hits[k] += 1;
            }
        }
    }
    let sum: f64 = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &n)| if n == 0 { 0.0 } else { h as f64 / n as f64 })
        .sum();
    sum / classes.len() as f64
}

#[derive(Debug)]
struct Member {
    learner: Box<dyn Learner>,
    joined: usize,
}

/// Streaming Ensemble Algorithm.
#[derive(Debug)]
pub struct Sea {
    template: Box<dyn Learner>,
    members: Vec<Member>,
    max_pool_size: usize,
    metric: Metric,
    space: ClassSpace,
    chunks_seen: usize,
}

impl Sea {
    pub fn new(base: Box<dyn Learner>, max_pool_size: usize) -> Self {
        Self {
            template: base.clone_unfitted(),
            members: Vec::new(),
            max_pool_size: max_pool_size.max(1),
            metric: Metric::Accuracy,
            space: ClassSpace::default(),
            chunks_seen: 0,
        }
    }

    /// Quality metric used for pruning.
    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn max_pool_size(&self) -> usize {
        self.max_pool_size
    }

    /// Chunk index at which each member joined, oldest first.
    pub fn member_join_chunks(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.joined).collect()
    }

    pub fn members(&self) -> impl Iterator<Item = &dyn Learner> {
        self.members.iter().map(|m| m.learner.as_ref())
    }

    /// Appends an already-built member without pruning.
    pub fn push_member(&mut self, learner: Box<dyn Learner>) {
        self.members.push(Member { learner, joined: self.chunks_seen });
    }

    fn prune(&mut self, chunk: &Chunk) -> Result<(), LearnerError> {
        let mut worst: Option<(usize, f64)> = None;
        for (j, m) in self.members.iter().enumerate() {
            let p = m.learner.predict(chunk.features())?;
            let score = self
                .metric
                .evaluate(chunk.labels(), &p.labels)
                .map_err(|e| LearnerError::Invalid(e.to_string()))?;
            // strict comparison keeps the oldest among ties
            if worst.is_none_or(|(_, s)| score < s) {
                worst = Some((j, score));
            }
        }
        if let Some((j, _)) = worst {
            self.members.remove(j);
        }
        Ok(())
    }
}

impl Learner for Sea {
    fn name(&self) -> &str {
        "sea"
    }

    fn partial_fit(&mut self, chunk: &Chunk, classes: &[usize], w: Option<&[f64]>) -> Result<(), LearnerError> {
        reject_weights(self.name(), w)?;
        self.space.check(classes, chunk.labels())?;
        let mut fresh = self.template.clone_unfitted();
        fresh.partial_fit(chunk, classes, None)?;
        self.push_member(fresh);
        while self.members.len() > self.max_pool_size {
            self.prune(chunk)?;
        }
        self.chunks_seen += 1;
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        let classes = self.space.get().ok_or(LearnerError::NotFitted)?;
        if self.members.is_empty() {
            return Err(LearnerError::EmptyPool);
        }
        let supports = supports_of(self.members(), features, classes)?;
        weighted_vote(&supports, &vec![1.0; supports.len()], classes)
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(Sea::new(self.template.clone_unfitted(), self.max_pool_size).with_metric(self.metric))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// How many times a member sees an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResampleDraw {
    Poisson,
    /// Every member sees every instance this many times, ignoring the rate.
    Constant(u32),
}

impl ResampleDraw {
    pub fn draw(&self, rng: &mut ChaCha8Rng, lambda: f64) -> u32 {
        match self {
            Self::Constant(k) => *k,
            Self::Poisson => {
                if lambda <= 0.0 {
                    return 0;
                }
                let d = Poisson::new(lambda).expect("positive finite rate");
                d.sample(rng) as u32
            }
        }
    }
}

/// `n` Poisson(`lambda`) draws from the resampling channel of `seed`.
pub fn poisson_draws(seed: u64, lambda: f64, n: usize) -> Vec<u32> {
    let mut rng = sub_stream(seed, Channel::Resampling);
    (0..n).map(|_| ResampleDraw::Poisson.draw(&mut rng, lambda)).collect()
}

/// Pool shared by the online bagging family.
#[derive(Debug)]
struct BaggingPool {
    template: Box<dyn Learner>,
    members: Vec<Box<dyn Learner>>,
    seed: u64,
    rng: ChaCha8Rng,
    draw: ResampleDraw,
    space: ClassSpace,
}

impl BaggingPool {
    fn new(base: Box<dyn Learner>, n_members: usize, seed: u64) -> Self {
        let template = base.clone_unfitted();
        let members = (0..n_members.max(1)).map(|_| template.clone_unfitted()).collect();
        Self {
            template,
            members,
            seed,
            rng: sub_stream(seed, Channel::Resampling),
            draw: ResampleDraw::Poisson,
            space: ClassSpace::default(),
        }
    }

    /// For each instance `i`, every member draws a multiplicity with rate `rates[i]`.
    fn fit(&mut self, chunk: &Chunk, classes: &[usize], rates: &[f64]) -> Result<(), LearnerError> {
        let n = chunk.len();
        let m = self.members.len();
        let mut counts = vec![vec![0u32; n]; m];
        for (i, &rate) in rates.iter().enumerate() {
            for row in counts.iter_mut() {
                row[i] = self.draw.draw(&mut self.rng, rate);
            }
        }
        for (member, k) in self.members.iter_mut().zip(&counts) {
            if member.supports_weights() {
                let w: Vec<f64> = k.iter().map(|&c| c as f64).collect();
                member.partial_fit(chunk, classes, Some(&w))?;
            } else {
                let idx: Vec<usize> =
                    k.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize)).collect();
                member.partial_fit(&chunk.select(&idx), classes, None)?;
            }
        }
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        let classes = self.space.get().ok_or(LearnerError::NotFitted)?;
        let supports = supports_of(self.members.iter().map(|m| m.as_ref()), features, classes)?;
        weighted_vote(&supports, &vec![1.0; supports.len()], classes)
    }

    fn fresh(&self) -> Self {
        let mut p = Self::new(self.template.clone_unfitted(), self.members.len(), self.seed);
        p.draw = self.draw;
        p
    }
}

/// Online bagging with Poisson(1) instance multiplicities.
#[derive(Debug)]
pub struct OnlineBagging {
    pool: BaggingPool,
}

impl OnlineBagging {
    pub fn new(base: Box<dyn Learner>, n_members: usize, seed: u64) -> Self {
        Self { pool: BaggingPool::new(base, n_members, seed) }
    }

    /// Replaces the Poisson draw with a constant multiplicity.
    pub fn with_constant_draw(mut self, k: u32) -> Self {
        self.pool.draw = ResampleDraw::Constant(k);
        self
    }

    pub fn members(&self) -> impl Iterator<Item = &dyn Learner> {
        self.pool.members.iter().map(|m| m.as_ref())
    }
}

impl Learner for OnlineBagging {
    fn name(&self) -> &str {
        "online_bagging"
    }

    fn partial_fit(&mut self, chunk: &Chunk, classes: &[usize], w: Option<&[f64]>) -> Result<(), LearnerError> {
        reject_weights(self.name(), w)?;
        self.pool.space.check(classes, chunk.labels())?;
        self.pool.fit(chunk, classes, &vec![1.0; chunk.len()])
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        self.pool.predict(features)
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(Self { pool: self.pool.fresh() })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResamplingVariant {
    /// OOB: minority instances get rate `w_major / w_minor`.
    Oversample,
    /// UOB: majority instances get rate `w_minor / w_major`.
    Undersample,
}

/// Rate for an instance of class `c` given time-decayed sizes of `c` and the other class.
pub fn resampling_rate(variant: ResamplingVariant, own: f64, other: f64, cap: f64) -> f64 {
    let ratio = |num: f64, den: f64| if den <= 0.0 { cap } else { (num / den).min(cap) };
    match variant {
        ResamplingVariant::Oversample if own < other => ratio(other, own),
        ResamplingVariant::Undersample if own > other => ratio(other, own),
        _ => 1.0,
    }
}

/// Oversampling / undersampling online bagging for binary imbalanced streams.
#[derive(Debug)]
pub struct OnlineImbalanceBagging {
    pool: BaggingPool,
    variant: ResamplingVariant,
    decay: f64,
    lambda_cap: f64,
    class_sizes: [f64; 2],
    last_rates: Vec<f64>,
}

impl OnlineImbalanceBagging {
    pub fn new(base: Box<dyn Learner>, n_members: usize, seed: u64, variant: ResamplingVariant) -> Self {
        Self {
            pool: BaggingPool::new(base, n_members, seed),
            variant,
            decay: DEFAULT_DECAY,
            lambda_cap: LAMBDA_CAP,
            class_sizes: [0.5, 0.5],
            last_rates: Vec::new(),
        }
    }

    pub fn oob(base: Box<dyn Learner>, n_members: usize, seed: u64) -> Self {
        Self::new(base, n_members, seed, ResamplingVariant::Oversample)
    }

    pub fn uob(base: Box<dyn Learner>, n_members: usize, seed: u64) -> Self {
        Self::new(base, n_members, seed, ResamplingVariant::Undersample)
    }

    /// Time-decay factor of the class-size estimate, in (0, 1).
    pub fn with_decay(mut self, decay: f64) -> Self {
        self.decay = decay;
        self
    }

    pub fn with_lambda_cap(mut self, cap: f64) -> Self {
        self.lambda_cap = cap;
        self
    }

    pub fn with_constant_draw(mut self, k: u32) -> Self {
        self.pool.draw = ResampleDraw::Constant(k);
        self
    }

    pub fn variant(&self) -> ResamplingVariant {
        self.variant
    }

    /// Current time-decayed class sizes in declared class order.
    pub fn class_sizes(&self) -> [f64; 2] {
        self.class_sizes
    }

    /// Poisson rates used for each instance of the last chunk.
    pub fn last_rates(&self) -> &[f64] {
        &self.last_rates
    }

    pub fn members(&self) -> impl Iterator<Item = &dyn Learner> {
        self.pool.members.iter().map(|m| m.as_ref())
    }
}

impl Learner for OnlineImbalanceBagging {
    fn name(&self) -> &str {
        match self.variant {
            ResamplingVariant::Oversample => "oob",
            ResamplingVariant::Undersample => "uob",
        }
    }

    fn partial_fit(&mut self, chunk: &Chunk, classes: &[usize], w: Option<&[f64]>) -> Result<(), LearnerError> {
        reject_weights(self.name(), w)?;
        if classes.len() != 2 {
            return Err(LearnerError::Invalid(format!(
                "{} needs exactly two classes, got {}",
                self.name(),
                classes.len()
            )));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(LearnerError::Invalid(format!("decay must lie in (0,1), got {}", self.decay)));
        }
        self.pool.space.check(classes, chunk.labels())?;
        let mut rates = Vec::with_capacity(chunk.len());
        for &label in chunk.labels() {
            let c = self.pool.space.index_of(label);
            for k in 0..2 {
                let hit = if k == c { 1.0 } else { 0.0 };
                self.class_sizes[k] = self.decay * self.class_sizes[k] + (1.0 - self.decay) * hit;
            }
            let own = self.class_sizes[c];
            let other = self.class_sizes[1 - c];
            rates.push(resampling_rate(self.variant, own, other, self.lambda_cap));
        }
        self.pool.fit(chunk, classes, &rates)?;
        self.last_rates = rates;
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        self.pool.predict(features)
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(Self {
            pool: self.pool.fresh(),
            variant: self.variant,
            decay: self.decay,
            lambda_cap: self.lambda_cap,
            class_sizes: [0.5, 0.5],
            last_rates: Vec::new(),
        })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Member weighting rule for [`Wae`].
pub trait MemberWeighting: Send + fmt::Debug {
    fn weight(&self, quality: f64, n_classes: usize, age: usize) -> f64;
    fn boxed_clone(&self) -> Box<dyn MemberWeighting>;
}

/// `max(0, quality - 1/n_classes) * aging^age`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AboveChanceAging {
    pub aging: f64,
}

impl Default for AboveChanceAging {
    fn default() -> Self {
        Self { aging: DEFAULT_AGING }
    }
}

impl MemberWeighting for AboveChanceAging {
    fn weight(&self, quality: f64, n_classes: usize, age: usize) -> f64 {
        let base = (quality - 1.0 / n_classes as f64).max(0.0);
        base * self.aging.powi(age as i32)
    }

    fn boxed_clone(&self) -> Box<dyn MemberWeighting> {
        Box::new(*self)
    }
}

#[derive(Debug)]
struct WeightedMember {
    learner: Box<dyn Learner>,
    joined: usize,
    weight: f64,
}

/// Weighted Aging Ensemble.
#[derive(Debug)]
pub struct Wae {
    template: Box<dyn Learner>,
    members: Vec<WeightedMember>,
    max_pool_size: usize,
    weighting: Box<dyn MemberWeighting>,
    space: ClassSpace,
    chunks_seen: usize,
}

impl Wae {
    pub fn new(base: Box<dyn Learner>, max_pool_size: usize) -> Self {
        Self {
            template: base.clone_unfitted(),
            members: Vec::new(),
            max_pool_size: max_pool_size.max(1),
            weighting: Box::new(AboveChanceAging::default()),
            space: ClassSpace::default(),
            chunks_seen: 0,
        }
    }

    pub fn with_weighting(mut self, weighting: Box<dyn MemberWeighting>) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Current member weights, oldest member first.
    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    pub fn member_join_chunks(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.joined).collect()
    }
}

impl Learner for Wae {
    fn name(&self) -> &str {
        "wae"
    }

    fn partial_fit(&mut self, chunk: &Chunk, classes: &[usize], w: Option<&[f64]>) -> Result<(), LearnerError> {
        reject_weights(self.name(), w)?;
        self.space.check(classes, chunk.labels())?;
        let mut candidate = self.template.clone_unfitted();
        candidate.partial_fit(chunk, classes, None)?;
        self.members.push(WeightedMember { learner: candidate, joined: self.chunks_seen, weight: 0.0 });

        for m in &mut self.members {
            let p = m.learner.predict(chunk.features())?;
            let quality = mean_class_recall(chunk.labels(), &p.labels, classes);
            let age = self.chunks_seen - m.joined;
            m.weight = self.weighting.weight(quality, classes.len(), age);
        }
        while self.members.len() > self.max_pool_size {
            let mut lightest = 0;
            for (j, m) in self.members.iter().enumerate().skip(1) {
                if m.weight < self.members[lightest].weight {
                    lightest = j;
                }
            }
            self.members.remove(lightest);
        }
        self.chunks_seen += 1;
        Ok(())
    }

    fn predict(&self, features: &Matrix) -> Result<Prediction, LearnerError> {
        let classes = self.space.get().ok_or(LearnerError::NotFitted)?;
        if self.members.is_empty() {
            return Err(LearnerError::EmptyPool);
        }
        let supports = supports_of(self.members.iter().map(|m| m.learner.as_ref()), features, classes)?;
        weighted_vote(&supports, &self.weights(), classes)
    }

    fn clone_unfitted(&self) -> Box<dyn Learner> {
        Box::new(
            Wae::new(self.template.clone_unfitted(), self.max_pool_size)
                .with_weighting(self.weighting.boxed_clone()),
        )
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
