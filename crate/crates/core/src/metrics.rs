//! Test-suite quality: effectiveness score (ES) and misprediction severity (MS).

use crate::search::EvaluationRecord;
use crate::types::Archive;

/// Fraction of the `k` objectives covered by the archive.
pub fn effectiveness_score(archive: &Archive, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    archive.len() as f64 / k as f64
}

/// Per key-point maximum NE over the archived test cases.
pub fn misprediction_severity(archive: &Archive, k: usize) -> Vec<f64> {
    let mut ms = vec![0.0; k];
    for (_, test) in archive.entries() {
        for (m, &f) in ms.iter_mut().zip(&test.fitness) {
            *m = f64::max(*m, f);
        }
    }
    ms
}

/// Like [`misprediction_severity`] but also maximizing over every evaluation of a run.
pub fn misprediction_severity_with(archive: &Archive, k: usize, evaluations: &[EvaluationRecord]) -> Vec<f64> {
    let mut ms = misprediction_severity(archive, k);
    for rec in evaluations {
        for (m, &f) in ms.iter_mut().zip(&rec.fitness) {
            *m = f64::max(*m, f);
        }
    }
    ms
}
