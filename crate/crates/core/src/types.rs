//! Shared value types: genomes, key-point geometry, evaluated test cases,
//! objective bookkeeping and the archive that forms the final test suite.
//!
//! Key-point and objective indices are 0-based inside the library. Files and
//! command-line flags use 1-based key-point labels (`KP1`..`KPk`).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness;

/// Number of key-points produced by the default detector.
pub const DEFAULT_KEY_POINTS: usize = 27;

/// Severity threshold above which a key-point counts as severely mispredicted.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Closed interval for one continuous gene, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct GeneBounds {
    lo: f64,
    hi: f64,
}

impl GeneBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::config(format!("invalid gene bounds [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

impl TryFrom<[f64; 2]> for GeneBounds {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        GeneBounds::new(v[0], v[1])
    }
}

impl From<GeneBounds> for [f64; 2] {
    fn from(b: GeneBounds) -> Self {
        [b.lo, b.hi]
    }
}

/// The input domain explored by search: angle ranges and the set of 3D models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub roll: GeneBounds,
    pub pitch: GeneBounds,
    pub yaw: GeneBounds,
    pub models: Vec<u32>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let thirty = GeneBounds { lo: -30.0, hi: 30.0 };
        Self {
            roll: thirty,
            pitch: thirty,
            yaw: thirty,
            models: (0..10).collect(),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::config("model set is empty"));
        }
        let distinct: BTreeSet<_> = self.models.iter().collect();
        if distinct.len() != self.models.len() {
            return Err(Error::config("model set contains duplicates"));
        }
        Ok(())
    }

    /// Bounds of the continuous genes in (roll, pitch, yaw) order.
    pub fn angle_bounds(&self) -> [GeneBounds; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn contains(&self, ic: &ImageCharacteristics) -> bool {
        self.roll.contains(ic.roll)
            && self.pitch.contains(ic.pitch)
            && self.yaw.contains(ic.yaw)
            && self.models.contains(&ic.model_id)
    }

    pub fn check(&self, ic: &ImageCharacteristics) -> Result<()> {
        if self.contains(ic) {
            Ok(())
        } else {
            Err(Error::invalid(format!("image characteristics out of bounds: {ic:?}")))
        }
    }
}

/// Search genome: head pose in degrees plus a categorical 3D model label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageCharacteristics {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub model_id: u32,
}

impl ImageCharacteristics {
    pub fn new(roll: f64, pitch: f64, yaw: f64, model_id: u32) -> Self {
        Self { roll, pitch, yaw, model_id }
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn with_angles(&self, angles: [f64; 3]) -> Self {
        Self {
            roll: angles[0],
            pitch: angles[1],
            yaw: angles[2],
            model_id: self.model_id,
        }
    }
}

/// Pixel coordinates. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2D {
    fn from(v: [f64; 2]) -> Self {
        Point2D { x: v[0], y: v[1] }
    }
}

impl From<Point2D> for [f64; 2] {
    fn from(p: Point2D) -> Self {
        [p.x, p.y]
    }
}

/// Actual key-point positions; `None` marks an invisible key-point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGroundTruth")]
pub struct GroundTruth {
    positions: Vec<Option<Point2D>>,
    face_width: f64,
    face_height: f64,
}

#[derive(Deserialize)]
struct RawGroundTruth {
    positions: Vec<Option<Point2D>>,
    face_width: f64,
    face_height: f64,
}

impl TryFrom<RawGroundTruth> for GroundTruth {
    type Error = Error;

    fn try_from(raw: RawGroundTruth) -> Result<Self> {
        GroundTruth::new(raw.positions, raw.face_width, raw.face_height)
    }
}

impl GroundTruth {
    pub fn new(positions: Vec<Option<Point2D>>, face_width: f64, face_height: f64) -> Result<Self> {
        if !(face_width.is_finite() && face_width > 0.0) || !(face_height.is_finite() && face_height > 0.0) {
            return Err(Error::invalid(format!(
                "face dimensions must be positive, got {face_width} x {face_height}"
            )));
        }
        if positions.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite key-point coordinate"));
        }
        if positions.iter().all(Option::is_none) {
            return Err(Error::invalid("ground truth has no visible key-point"));
        }
        Ok(Self { positions, face_width, face_height })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Option<Point2D>] {
        &self.positions
    }

    pub fn face_width(&self) -> f64 {
        self.face_width
    }

    pub fn face_height(&self) -> f64 {
        self.face_height
    }

    pub fn is_visible(&self, i: usize) -> bool {
        matches!(self.positions.get(i), Some(Some(_)))
    }

    /// Indices of visible key-points, in increasing order.
    pub fn visible(&self) -> Vec<usize> {
        self.positions
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|_| i))
            .collect()
    }

    pub fn visibility_mask(&self) -> Vec<bool> {
        self.positions.iter().map(Option::is_some).collect()
    }
}

/// Predicted key-point positions; a detector always outputs all k of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Prediction {
    positions: Vec<Point2D>,
}

impl Prediction {
    pub fn new(positions: Vec<Point2D>) -> Result<Self> {
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite predicted coordinate"));
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point2D] {
        &self.positions
    }
}

/// A genome after simulation, prediction and fitness calculation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedTestCase {
    pub ic: ImageCharacteristics,
    pub truth: GroundTruth,
    pub prediction: Prediction,
    pub fitness: Vec<f64>,
}

impl EvaluatedTestCase {
    /// Builds a test case, deriving its fitness vector from truth and prediction.
    pub fn new(ic: ImageCharacteristics, truth: GroundTruth, prediction: Prediction) -> Result<Self> {
        let fitness = fitness::fitness_vector(&truth, &prediction)?;
        Ok(Self { ic, truth, prediction, fitness })
    }

    pub fn key_points(&self) -> usize {
        self.fitness.len()
    }

    /// Highest fitness over `objectives`; 0 when the set is empty.
    pub fn best_on(&self, objectives: &BTreeSet<usize>) -> f64 {
        objectives.iter().map(|&u| self.fitness[u]).fold(0.0, f64::max)
    }
}

/// Covered (`C`) and uncovered (`U`) objectives for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveState {
    epsilon: f64,
    covered: BTreeSet<usize>,
    uncovered: BTreeSet<usize>,
}

impl ObjectiveState {
    pub fn new(k: usize, epsilon: f64) -> Self {
        Self {
            epsilon,
            covered: BTreeSet::new(),
            uncovered: (0..k).collect(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn covered(&self) -> &BTreeSet<usize> {
        &self.covered
    }

    pub fn uncovered(&self) -> &BTreeSet<usize> {
        &self.uncovered
    }

    pub fn all_covered(&self) -> bool {
        self.uncovered.is_empty()
    }

    /// Moves every objective the archive covers from `U` to `C`.
    pub fn absorb(&mut self, archive: &Archive) {
        for &i in archive.entries.keys() {
            if self.uncovered.remove(&i) {
                self.covered.insert(i);
            }
        }
    }
}

/// Best qualifying test case per objective; the emitted test suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    epsilon: f64,
    entries: BTreeMap<usize, EvaluatedTestCase>,
}

impl Archive {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, entries: BTreeMap::new() }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, objective: usize) -> Option<&EvaluatedTestCase> {
        self.entries.get(&objective)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &EvaluatedTestCase)> {
        self.entries.iter().map(|(&i, t)| (i, t))
    }

    pub fn objectives(&self) -> BTreeSet<usize> {
        self.entries.keys().copied().collect()
    }

    /// Inserts an entry verbatim. Used when loading archives from disk.
    pub fn insert_raw(&mut self, objective: usize, test: EvaluatedTestCase) {
        self.entries.insert(objective, test);
    }

    /// Offers one test to the archive. For every objective the test qualifies
    /// for, it replaces the current entry only when strictly better, so the
    /// first-seen test wins ties. Returns the objectives whose entry changed.
    pub fn offer(&mut self, test: &EvaluatedTestCase) -> Vec<usize> {
        let mut changed = Vec::new();
        for (i, &f) in test.fitness.iter().enumerate() {
            if f < self.epsilon {
                continue;
            }
            let better = match self.entries.get(&i) {
                None => true,
                Some(cur) => f > cur.fitness[i],
            };
            if better {
                self.entries.insert(i, test.clone());
                changed.push(i);
            }
        }
        changed
    }
}
