//! Normalized per-key-point error (NE), its visible-point mean (NME), and
//! objective coverage.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::types::{GroundTruth, Point2D, Prediction};

/// Euclidean distance between the actual and predicted position divided by
/// the larger face dimension, clamped to `[0, 1]`.
pub fn normalized_error(actual: Point2D, predicted: Point2D, face_width: f64, face_height: f64) -> Result<f64> {
    if !actual.is_finite() || !predicted.is_finite() {
        return Err(Error::invalid("non-finite key-point coordinate"));
    }
    if !(face_width.is_finite() && face_width > 0.0 && face_height.is_finite() && face_height > 0.0) {
        return Err(Error::invalid(format!(
            "face dimensions must be positive, got {face_width} x {face_height}"
        )));
    }
    let ratio = actual.distance(&predicted) / face_width.max(face_height);
    Ok(ratio.min(1.0))
}

fn check_lengths(truth: &GroundTruth, prediction: &Prediction) -> Result<()> {
    if truth.len() != prediction.len() {
        return Err(Error::invalid(format!(
            "ground truth has {} key-points but prediction has {}",
            truth.len(),
            prediction.len()
        )));
    }
    Ok(())
}

/// Mean NE over the visible key-points.
pub fn nme(truth: &GroundTruth, prediction: &Prediction) -> Result<f64> {
    check_lengths(truth, prediction)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (actual, predicted) in truth.positions().iter().zip(prediction.positions()) {
        if let Some(actual) = actual {
            sum += normalized_error(*actual, *predicted, truth.face_width(), truth.face_height())?;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("no visible key-point"));
    }
    Ok(sum / n as f64)
}

/// One fitness value per key-point: NE when visible, 0 otherwise.
pub fn fitness_vector(truth: &GroundTruth, prediction: &Prediction) -> Result<Vec<f64>> {
    check_lengths(truth, prediction)?;
    truth
        .positions()
        .iter()
        .zip(prediction.positions())
        .map(|(actual, predicted)| match actual {
            Some(a) => normalized_error(*a, *predicted, truth.face_width(), truth.face_height()),
            None => Ok(0.0),
        })
        .collect()
}

/// Objectives `i` with `fitness[i] >= epsilon`.
pub fn covered_objectives(fitness: &[f64], epsilon: f64) -> BTreeSet<usize> {
    fitness
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= epsilon)
        .map(|(i, _)| i)
        .collect()
}
