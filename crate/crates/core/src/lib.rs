//! Ego-network features for social bot classification: graph measures,
//! a synthetic corpus generator, in-repo base learners, the Super Learner
//! stacking ensemble and evaluation metrics.

pub mod config;
pub mod corpus;
pub mod error;
pub mod graph;
pub mod learners;
pub mod measures;
pub mod metrics;
pub mod model_io;
pub mod pipeline;
pub mod seed;
pub mod simplex;
pub mod super_learner;
pub mod synth;

pub use config::Config;
pub use corpus::{CorpusRecord, FeatureMatrix, Scaler};
pub use error::{Error, Result};
pub use graph::{DirectedGraph, EgoNetwork, UndirectedGraph};
pub use learners::{Family, LearnerKind, LearnerModel, LearnerSpec};
pub use measures::{FeatureVector, NetworkMeasures};
pub use metrics::{CurvePoint, MetricsReport};
pub use pipeline::Formula;
pub use super_learner::{CvReport, LevelOneMatrix, SuperLearnerModel};
pub use synth::{GeneratorProfile, ProfileKind, SynthConfig};
