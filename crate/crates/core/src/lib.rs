//! Many-objective search for image characteristics that make a facial
//! key-point detector mispredict, with metrics, statistics and tree-based
//! explanations of the results.

pub mod error;
pub mod explainer;
pub mod fitness;
pub mod metrics;
pub mod search;
pub mod stats;
pub mod sut;
pub mod types;

pub use error::{Error, Result};
pub use search::{Algorithm, SearchConfig, SearchOutcome};
pub use sut::{SyntheticSut, SystemUnderTest};
pub use types::{
    Archive, EvaluatedTestCase, GeneBounds, GroundTruth, ImageCharacteristics, ObjectiveState, Point2D, Prediction,
    SearchSpace,
};
