//! Systems under test: anything mapping image characteristics to a ground
//! truth and a detector prediction.

pub mod external;
pub mod geometry;
pub mod protocol;
pub mod synthetic;

use crate::error::Result;
use crate::types::{EvaluatedTestCase, ImageCharacteristics};

pub use external::{ExternalSut, ExternalSutOptions};
pub use synthetic::{Defect, DefectMagnitude, DefectRegion, SyntheticSut, SyntheticSutConfig};

/// Simulator plus detector plus fitness calculation, seen as a black box.
///
/// Implementations must be deterministic: the same characteristics always
/// yield the same evaluated test case.
pub trait SystemUnderTest: Send + Sync {
    fn key_points(&self) -> usize;

    fn evaluate(&self, ic: &ImageCharacteristics) -> Result<EvaluatedTestCase>;

    /// Evaluates a batch; results come back in submission order.
    fn evaluate_batch(&self, ics: &[ImageCharacteristics]) -> Result<Vec<EvaluatedTestCase>> {
        ics.iter().map(|ic| self.evaluate(ic)).collect()
    }

    /// Evaluations performed so far.
    fn evaluations(&self) -> u64;
}

impl<T: SystemUnderTest + ?Sized> SystemUnderTest for Box<T> {
    fn key_points(&self) -> usize {
        (**self).key_points()
    }

    fn evaluate(&self, ic: &ImageCharacteristics) -> Result<EvaluatedTestCase> {
        (**self).evaluate(ic)
    }

    fn evaluate_batch(&self, ics: &[ImageCharacteristics]) -> Result<Vec<EvaluatedTestCase>> {
        (**self).evaluate_batch(ics)
    }

    fn evaluations(&self) -> u64 {
        (**self).evaluations()
    }
}
