//! Synthetic drifting and imbalanced data streams, incremental learners and
//! classifier ensembles, and batch Test-Then-Train / Prequential evaluation.
//!
//! ```
//! use driftlab::prelude::*;
//!
//! let config = StreamConfig { n_chunks: 10, chunk_size: 100, n_drifts: 1, ..Default::default() };
//! let stream = StreamGenerator::new(config).unwrap();
//! let evaluator = Evaluator::test_then_train(vec![Metric::Accuracy, Metric::Precision]);
//! let mut learners: Vec<Box<dyn Learner>> = vec![Box::new(GaussianNb::new())];
//! let scores = evaluator.process(stream, &mut learners).unwrap();
//! assert_eq!(scores.shape(), (1, 9, 2));
//! ```

pub mod datamodel;
pub mod ensembles;
pub mod evaluators;
pub mod generator;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod stream_io;
pub mod testkit;

pub mod prelude {
    pub use crate::datamodel::{
        validate_config, Chunk, ChunkSource, ClassWeights, ConfusionMatrix, DriftType,
        InMemoryStream, LabelNoise, Matrix, Prediction, ScoreTensor, StreamConfig,
    };
    pub use crate::ensembles::{OnlineBagging, OnlineImbalanceBagging, ResamplingVariant, Sea, Wae};
    pub use crate::evaluators::{Evaluator, Protocol};
    pub use crate::generator::StreamGenerator;
    pub use crate::learners::{
        AccumulatedSamples, GaussianNb, Learner, SampleWeighted, WeightPolicy,
    };
    pub use crate::metrics::Metric;
}
