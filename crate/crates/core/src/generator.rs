//! Replicable synthetic stream generation.
//!
//! Base concepts follow the Madelon recipe: class clusters sit on distinct
//! vertices of a `±class_sep` hypercube in the informative subspace, each
//! cluster gets its own random linear map applied to standard-normal noise,
//! redundant features are random linear combinations of the informative ones
//! and repeated features copy earlier columns. Concept drift switches between
//! (or interpolates across) several such concepts following a sigmoid
//! schedule, and class priors follow a static or oscillating schedule.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::datamodel::{
    validate_config, Chunk, ChunkSource, ClassWeights, DriftType, LabelNoise, Matrix,
    StreamConfig, Violation,
};
use crate::rng::{sub_stream, Channel};

/// Spacing used for sudden drift regardless of the configured value.
pub const SUDDEN_SPACING: f64 = 999.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid stream config: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("{clusters} clusters need distinct hypercube vertices but only {vertices} exist")]
    NotEnoughVertices { clusters: usize, vertices: u128 },
    #[error("stream exhausted after {0} chunks")]
    Exhausted(usize),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One base class distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    n_classes: usize,
    n_clusters_per_class: usize,
    n_features: usize,
    /// Row `class * n_clusters_per_class + j` is cluster `j` of `class`.
    centroids: Matrix,
    cluster_transforms: Vec<Matrix>,
    redundant_map: Matrix,
    repeated_indices: Vec<usize>,
    seed: u64,
}

/// Random inputs shared by every concept for one instance, so that the same
/// draw can be pushed through two concepts and blended.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub cluster_choice: usize,
    pub noise: Vec<f64>,
    pub filler: Vec<f64>,
}

impl Latent {
    pub fn draw(concept: &Concept, rng: &mut impl Rng) -> Self {
        let cluster_choice = rng.random_range(0..concept.n_clusters_per_class);
        let noise = (0..concept.n_informative()).map(|_| rng.sample(StandardNormal)).collect();
        let filler = (0..concept.n_filler()).map(|_| rng.sample(StandardNormal)).collect();
        Self { cluster_choice, noise, filler }
    }

    /// All-zero noise and filler.
    pub fn zero(concept: &Concept, cluster_choice: usize) -> Self {
        Self {
            cluster_choice,
            noise: vec![0.0; concept.n_informative()],
            filler: vec![0.0; concept.n_filler()],
        }
    }
}

/// Builds the concept for `seed`; equal inputs always give equal matrices.
pub fn build_concept(seed: u64, config: &StreamConfig) -> Result<Concept, GeneratorError> {
    let n_inf = config.n_informative;
    let n_clusters = config.n_classes * config.n_clusters_per_class;
    let vertices: u128 = if n_inf >= 127 { u128::MAX } else { 1u128 << n_inf };
    if n_clusters as u128 > vertices {
        return Err(GeneratorError::NotEnoughVertices { clusters: n_clusters, vertices });
    }
    let mut rng = sub_stream(seed, Channel::Concept);

    let mut centroids = Matrix::zeros(n_clusters, n_inf);
    if n_inf <= 24 {
        let picks = index::sample(&mut rng, 1usize << n_inf, n_clusters);
        for (k, v) in picks.iter().enumerate() {
            for b in 0..n_inf {
                let sign = if (v >> b) & 1 == 1 { 1.0 } else { -1.0 };
                centroids.set(k, b, sign * config.class_sep);
            }
        }
    } else {
        let mut seen = HashSet::new();
        let mut k = 0;
        while k < n_clusters {
            let bits: Vec<bool> = (0..n_inf).map(|_| rng.random()).collect();
            if seen.insert(bits.clone()) {
                for (b, &on) in bits.iter().enumerate() {
                    centroids.set(k, b, if on { config.class_sep } else { -config.class_sep });
                }
                k += 1;
            }
        }
    }

    let mut uniform_matrix = |rows: usize, cols: usize| {
        let data = (0..rows * cols).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        Matrix::new(rows, cols, data).expect("shape is consistent")
    };
    let cluster_transforms = (0..n_clusters).map(|_| uniform_matrix(n_inf, n_inf)).collect();
    let redundant_map = uniform_matrix(n_inf, config.n_redundant);
    let pool = n_inf + config.n_redundant;
    let repeated_indices = (0..config.n_repeated).map(|_| rng.random_range(0..pool)).collect();

    Ok(Concept {
        n_classes: config.n_classes,
        n_clusters_per_class: config.n_clusters_per_class,
        n_features: config.n_features,
        centroids,
        cluster_transforms,
        redundant_map,
        repeated_indices,
        seed,
    })
}

impl Concept {
    pub fn n_informative(&self) -> usize {
        self.centroids.cols()
    }

    pub fn n_redundant(&self) -> usize {
        self.redundant_map.cols()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_filler(&self) -> usize {
        self.n_features - self.n_informative() - self.n_redundant() - self.repeated_indices.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn centroids(&self) -> &Matrix {
        &self.centroids
    }

    pub fn centroid(&self, class: usize, cluster_choice: usize) -> &[f64] {
        self.centroids.row(class * self.n_clusters_per_class + cluster_choice)
    }

    pub fn cluster_transform(&self, class: usize, cluster_choice: usize) -> &Matrix {
        &self.cluster_transforms[class * self.n_clusters_per_class + cluster_choice]
    }

    pub fn redundant_map(&self) -> &Matrix {
        &self.redundant_map
    }

    pub fn repeated_indices(&self) -> &[usize] {
        &self.repeated_indices
    }

    /// Copy of this concept with every cluster transform set to the identity.
    pub fn with_identity_transforms(mut self) -> Self {
        let n = self.n_informative();
        for t in &mut self.cluster_transforms {
            for r in 0..n {
                for c in 0..n {
                    t.set(r, c, if r == c { 1.0 } else { 0.0 });
                }
            }
        }
        self
    }

    /// Writes the feature row for `class` driven by `latent` into `out`.
    pub fn project(&self, class: usize, latent: &Latent, out: &mut [f64]) {
        debug_assert!(class < self.n_classes);
        let n_inf = self.n_informative();
        let n_red = self.n_redundant();
        let centroid = self.centroid(class, latent.cluster_choice);
        let transform = self.cluster_transform(class, latent.cluster_choice);
        // row vector noise times transform, plus centroid
        for j in 0..n_inf {
            let mut v = centroid[j];
            for (k, z) in latent.noise.iter().enumerate() {
                v += z * transform.get(k, j);
            }
            out[j] = v;
        }
        for r in 0..n_red {
            let mut v = 0.0;
            for k in 0..n_inf {
                v += out[k] * self.redundant_map.get(k, r);
            }
            out[n_inf + r] = v;
        }
        let base = n_inf + n_red;
        for (i, &src) in self.repeated_indices.iter().enumerate() {
            out[base + i] = out[src];
        }
        let base = base + self.repeated_indices.len();
        out[base..].copy_from_slice(&latent.filler);
    }
}

/// Draws `count` samples of `class` from `concept`.
pub fn sample_concept(concept: &Concept, class: usize, count: usize, rng: &mut impl Rng) -> Matrix {
    let mut out = Matrix::zeros(count, concept.n_features());
    for i in 0..count {
        let latent = Latent::draw(concept, rng);
        concept.project(class, &latent, out.row_mut(i));
    }
    out
}

/// Sigmoid-shaped concept-drift schedule over the whole stream.
///
/// The stream is cut into `n_drifts` equal segments; the transition of segment
/// `j` is centred on `x_j = (2j+1)/(2 n_drifts)` with a linear phase running
/// from -1 at the segment start to +1 at its end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSchedule {
    pub n_drifts: usize,
    pub spacing: f64,
    pub recurring: bool,
    pub total_instances: usize,
}

impl DriftSchedule {
    pub fn from_config(config: &StreamConfig) -> Self {
        let spacing = match config.drift_type {
            DriftType::Sudden => SUDDEN_SPACING,
            _ => config.concept_sigmoid_spacing,
        };
        Self {
            n_drifts: config.n_drifts,
            spacing,
            recurring: config.recurring,
            total_instances: config.total_instances(),
        }
    }

    /// Segment index and its local phase in [0, 1).
    fn segment(&self, instance_index: usize) -> (usize, f64) {
        let d = self.n_drifts as f64;
        let pos = instance_index as f64 / self.total_instances as f64 * d;
        let j = (pos.floor() as usize).min(self.n_drifts - 1);
        (j, pos - j as f64)
    }

    /// Probability of the incoming concept within the current segment.
    fn transition_probability(&self, instance_index: usize) -> (usize, f64) {
        let (j, t) = self.segment(instance_index);
        (j, sigmoid(self.spacing * (2.0 * t - 1.0)))
    }

    /// Concept of the current segment (old, incoming) and the incoming probability.
    pub fn active_concepts(&self, instance_index: usize) -> (usize, usize, f64) {
        if self.n_drifts == 0 {
            return (0, 0, 0.0);
        }
        let (j, p) = self.transition_probability(instance_index);
        if self.recurring {
            (j % 2, (j + 1) % 2, p)
        } else {
            (j, j + 1, p)
        }
    }

    /// Drift probability at `instance_index`. Non-recurring: the incoming
    /// concept's probability, rising 0 -> 1 in every segment. Recurring: the
    /// probability of concept 1, oscillating between the two concepts.
    pub fn drift_probability(&self, instance_index: usize) -> f64 {
        if self.n_drifts == 0 {
            return 0.0;
        }
        let (j, p) = self.transition_probability(instance_index);
        if self.recurring && j % 2 == 1 {
            1.0 - p
        } else {
            p
        }
    }

    /// Number of distinct concepts the schedule visits.
    pub fn n_concepts(&self) -> usize {
        match (self.n_drifts, self.recurring) {
            (0, _) => 1,
            (_, true) => 2,
            (d, false) => d + 1,
        }
    }
}

/// Prior class distribution over the stream.
#[derive(Debug, Clone, PartialEq)]
pub enum ImbalanceSchedule {
    Balanced { n_classes: usize },
    Static(Vec<f64>),
    Dynamic { n_cycles: usize, spacing: f64, range: f64 },
}

impl ImbalanceSchedule {
    pub fn from_config(config: &StreamConfig) -> Self {
        match &config.weights {
            ClassWeights::Balanced => Self::Balanced { n_classes: config.n_classes },
            ClassWeights::Static(w) => Self::Static(w.clone()),
            ClassWeights::Dynamic { n_cycles, sigmoid_spacing, oscillation_range } => Self::Dynamic {
                n_cycles: *n_cycles,
                spacing: *sigmoid_spacing,
                range: *oscillation_range,
            },
        }
    }

    /// Class-1 proportion at `instance_index`.
    ///
    /// Dynamic mode: `0.5 + range/2 * (2 sigmoid(spacing * tri) - 1)` where `tri`
    /// is a triangular wave starting at 0, peaking at +1 a quarter into each
    /// cycle and reaching -1 at three quarters; `range` is the full band width.
    pub fn proportion(&self, instance_index: usize, total_instances: usize) -> f64 {
        match self {
            Self::Balanced { n_classes } => 1.0 / *n_classes as f64,
            Self::Static(w) => w[1],
            Self::Dynamic { n_cycles, spacing, range } => {
                let x = instance_index as f64 / total_instances as f64;
                let phase = (x * *n_cycles as f64).fract();
                let tri = if phase < 0.25 {
                    4.0 * phase
                } else if phase < 0.75 {
                    2.0 - 4.0 * phase
                } else {
                    4.0 * phase - 4.0
                };
                0.5 + range / 2.0 * (2.0 * sigmoid(spacing * tri) - 1.0)
            }
        }
    }

    /// Full class distribution at `instance_index`.
    pub fn class_probabilities(&self, instance_index: usize, total_instances: usize) -> Vec<f64> {
        match self {
            Self::Balanced { n_classes } => vec![1.0 / *n_classes as f64; *n_classes],
            Self::Static(w) => w.clone(),
            Self::Dynamic { .. } => {
                let p = self.proportion(instance_index, total_instances);
                vec![1.0 - p, p]
            }
        }
    }
}

fn draw_class(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

fn flip_count(proportion: f64, n: usize) -> usize {
    ((proportion * n as f64) + 1e-9).floor() as usize
}

/// A chunk plus the labels as drawn, before label noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedChunk {
    pub chunk: Chunk,
    pub clean_labels: Vec<usize>,
}

/// Chunk-by-chunk synthetic stream.
#[derive(Debug, Clone)]
pub struct StreamGenerator {
    config: StreamConfig,
    concepts: Vec<Concept>,
    drift: DriftSchedule,
    imbalance: ImbalanceSchedule,
    label_rng: ChaCha8Rng,
    mix_rng: ChaCha8Rng,
    feature_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    emitted: usize,
}

impl StreamGenerator {
    pub fn new(config: StreamConfig) -> Result<Self, GeneratorError> {
        let violations = validate_config(&config);
        if !violations.is_empty() {
            return Err(GeneratorError::InvalidConfig(violations));
        }
        let drift = DriftSchedule::from_config(&config);
        let concepts = (0..drift.n_concepts())
            .map(|j| build_concept(config.random_seed.wrapping_add(j as u64), &config))
            .collect::<Result<Vec<_>, _>>()?;
        let imbalance = ImbalanceSchedule::from_config(&config);
        let seed = config.random_seed;
        Ok(Self {
            concepts,
            drift,
            imbalance,
            label_rng: sub_stream(seed, Channel::Labels),
            mix_rng: sub_stream(seed, Channel::ConceptMix),
            feature_rng: sub_stream(seed, Channel::Features),
            noise_rng: sub_stream(seed, Channel::LabelNoise),
            emitted: 0,
            config,
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn drift_schedule(&self) -> &DriftSchedule {
        &self.drift
    }

    pub fn imbalance_schedule(&self) -> &ImbalanceSchedule {
        &self.imbalance
    }

    pub fn chunks_emitted(&self) -> usize {
        self.emitted
    }

    /// Rewinds to chunk 0; re-emission reproduces identical chunks.
    pub fn reset(&mut self) {
        let seed = self.config.random_seed;
        self.label_rng = sub_stream(seed, Channel::Labels);
        self.mix_rng = sub_stream(seed, Channel::ConceptMix);
        self.feature_rng = sub_stream(seed, Channel::Features);
        self.noise_rng = sub_stream(seed, Channel::LabelNoise);
        self.emitted = 0;
    }

    pub fn next_chunk(&mut self) -> Result<Chunk, GeneratorError> {
        self.next_chunk_detailed().map(|g| g.chunk)
    }

    pub fn next_chunk_detailed(&mut self) -> Result<GeneratedChunk, GeneratorError> {
        if self.emitted >= self.config.n_chunks {
            return Err(GeneratorError::Exhausted(self.emitted));
        }
        let size = self.config.chunk_size;
        let total = self.config.total_instances();
        let start = self.emitted * size;
        let mut features = Matrix::zeros(size, self.config.n_features);
        let mut labels = Vec::with_capacity(size);
        let mut blend = vec![0.0; self.config.n_features];

        for i in 0..size {
            let g = start + i;
            let probs = self.imbalance.class_probabilities(g, total);
            let class = draw_class(&probs, &mut self.label_rng);
            labels.push(class);

            let (old, new, p) = self.drift.active_concepts(g);
            let latent = Latent::draw(&self.concepts[old], &mut self.feature_rng);
            let row = features.row_mut(i);
            match self.config.drift_type {
                DriftType::Sudden | DriftType::Gradual => {
                    let u: f64 = self.mix_rng.random();
                    let concept = if u < p { new } else { old };
                    self.concepts[concept].project(class, &latent, row);
                }
                DriftType::Incremental => {
                    self.concepts[old].project(class, &latent, row);
                    self.concepts[new].project(class, &latent, &mut blend);
                    for (x, y) in row.iter_mut().zip(&blend) {
                        *x = (1.0 - p) * *x + p * y;
                    }
                }
            }
        }

        let clean_labels = labels.clone();
        self.apply_label_noise(&mut labels);
        self.emitted += 1;
        let chunk = Chunk::new(features, labels).expect("generator emits consistent chunks");
        Ok(GeneratedChunk { chunk, clean_labels })
    }

    fn flip(&mut self, label: usize) -> usize {
        let n = self.config.n_classes;
        if n == 2 {
            1 - label
        } else {
            (label + 1 + self.noise_rng.random_range(0..n - 1)) % n
        }
    }

    fn apply_label_noise(&mut self, labels: &mut [usize]) {
        match self.config.y_flip.clone() {
            LabelNoise::Uniform(p) => {
                let k = flip_count(p, labels.len());
                for i in index::sample(&mut self.noise_rng, labels.len(), k).into_vec() {
                    labels[i] = self.flip(labels[i]);
                }
            }
            LabelNoise::PerClass(ps) => {
                let clean = labels.to_vec();
                for (class, p) in ps.iter().enumerate() {
                    let members: Vec<usize> =
                        (0..clean.len()).filter(|&i| clean[i] == class).collect();
                    let k = flip_count(*p, members.len());
                    for j in index::sample(&mut self.noise_rng, members.len(), k).into_vec() {
                        let i = members[j];
                        labels[i] = self.flip(clean[i]);
                    }
                }
            }
        }
    }
}

impl Iterator for StreamGenerator {
    type Item = Chunk;

    fn next(&mut self) -> Option<Chunk> {
        self.next_chunk().ok()
    }
}

impl ChunkSource for StreamGenerator {
    type Error = GeneratorError;

    fn classes(&self) -> Vec<usize> {
        self.config.classes()
    }

    fn next_chunk(&mut self) -> Option<Result<Chunk, GeneratorError>> {
        if self.emitted >= self.config.n_chunks {
            None
        } else {
            Some(StreamGenerator::next_chunk(self))
        }
    }
}
