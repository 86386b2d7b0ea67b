use serde::{Deserialize, Serialize};

use crate::types::{EvaluatedTestCase, ImageCharacteristics};

/// Snapshot taken after each generation (generation 0 is the initial population).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Cumulative SUT evaluations.
    pub evaluations: u64,
    pub covered: usize,
    pub uncovered: usize,
    pub population: usize,
    /// Effectiveness score of the archive so far.
    pub es: f64,
    /// Archived fitness per objective, 0 where nothing is archived yet.
    pub archive_fitness: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub generations: Vec<GenerationRecord>,
}

impl SearchTrace {
    pub fn last(&self) -> Option<&GenerationRecord> {
        self.generations.last()
    }
}

/// One SUT evaluation, in the order it was submitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub generation: usize,
    pub ic: ImageCharacteristics,
    pub fitness: Vec<f64>,
    pub visible: Vec<bool>,
}

impl EvaluationRecord {
    pub fn from_test(generation: usize, test: &EvaluatedTestCase) -> Self {
        Self {
            generation,
            ic: test.ic,
            fitness: test.fitness.clone(),
            visible: test.truth.visibility_mask(),
        }
    }
}
