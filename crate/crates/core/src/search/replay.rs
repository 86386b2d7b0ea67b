use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sut::SystemUnderTest;
use crate::types::Archive;

/// Largest absolute fitness difference accepted on replay.
pub const REPLAY_TOLERANCE: f64 = 1e-9;

/// Replay verdict for one archive entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    /// 0-based objective the entry is archived for.
    pub objective: usize,
    pub stored: f64,
    pub replayed: f64,
    /// Largest absolute difference over the whole fitness vector.
    pub max_abs_diff: f64,
    /// Stored fitness on its objective reaches epsilon.
    pub covering: bool,
}

impl ReplayEntry {
    pub fn passed(&self) -> bool {
        self.covering && self.max_abs_diff <= REPLAY_TOLERANCE
    }
}

/// Re-evaluates every archived test and compares the fitness vectors.
pub fn replay_archive<S: SystemUnderTest + ?Sized>(archive: &Archive, sut: &S) -> Result<Vec<ReplayEntry>> {
    let mut out = Vec::with_capacity(archive.len());
    for (objective, test) in archive.entries() {
        let again = sut.evaluate(&test.ic)?;
        let max_abs_diff = if again.fitness.len() == test.fitness.len() {
            test.fitness
                .iter()
                .zip(&again.fitness)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        out.push(ReplayEntry {
            objective,
            stored: test.fitness[objective],
            replayed: again.fitness.get(objective).copied().unwrap_or(f64::NAN),
            max_abs_diff,
            covering: test.fitness[objective] >= archive.epsilon(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sut::SyntheticSut;
    use crate::types::ImageCharacteristics;

    #[test]
    fn tampered_entries_fail() {
        let sut = SyntheticSut::default_plant();
        let ic = ImageCharacteristics::new(-25.0, 25.0, 0.0, 9);
        let mut test = sut.evaluate(&ic).unwrap();
        let mut archive = Archive::new(0.05);
        archive.offer(&test);
        assert!(archive.get(25).is_some());
        assert!(replay_archive(&archive, &sut).unwrap().iter().all(ReplayEntry::passed));

        test.fitness[0] += 1e-3;
        archive.insert_raw(25, test.clone());
        let report = replay_archive(&archive, &sut).unwrap();
        assert_eq!(report.iter().filter(|e| !e.passed()).count(), 1);
        assert!((report[0].max_abs_diff - 1e-3).abs() < 1e-12);

        test.fitness[3] = 0.01;
        archive.insert_raw(3, test);
        let report = replay_archive(&archive, &sut).unwrap();
        let bad = report.iter().find(|e| e.objective == 3).unwrap();
        assert!(!bad.covering && !bad.passed());
    }
}
