//! On-disk formats.
//!
//! A run directory holds:
//!
//! * `archive.jsonl`: one archived test per line,
//!   `{"key_point": <1-based label>, "ic": .., "truth": .., "prediction": .., "fitness": [..]}`
//! * `trace.jsonl`: one SUT evaluation per line in submission order,
//!   `{"generation": g, "ic": .., "fitness": [..], "visible": [..]}`
//! * `generations.csv`: `generation,evaluations,covered,uncovered,population,es`
//! * `summary.json`: algorithm, seeds, budget, evaluations used, ES, per-key-point MS

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use kpsearch_core::search::{EvaluationRecord, SearchTrace};
use kpsearch_core::{Archive, EvaluatedTestCase};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const ARCHIVE_FILE: &str = "archive.jsonl";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const GENERATIONS_FILE: &str = "generations.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveLine {
    pub key_point: usize,
    #[serde(flatten)]
    pub test: EvaluatedTestCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub algorithm: String,
    pub master_seed: u64,
    pub rep: usize,
    pub seed: u64,
    pub budget: u64,
    pub epsilon: f64,
    pub key_points: usize,
    pub sut: String,
    pub evaluations: u64,
    pub es: f64,
    /// 1-based labels of the covered objectives.
    pub covered: Vec<usize>,
    /// Misprediction severity per key-point, KP1 first.
    pub ms: Vec<f64>,
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::runtime(format!("writing {}: {e}", path.display()))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> CliResult<()> {
    let mut w = create(path)?;
    for item in items {
        let line = serde_json::to_string(&item).map_err(|e| CliError::runtime(e.to_string()))?;
        writeln!(w, "{line}").map_err(write_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

/// Streams the records of a line-delimited file.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<impl Iterator<Item = CliResult<T>>> {
    let reader = open(path)?;
    let shown = path.display().to_string();
    Ok(reader.lines().enumerate().filter_map(move |(n, line)| match line {
        Err(e) => Some(Err(CliError::usage(format!("{shown}:{}: {e}", n + 1)))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(serde_json::from_str(&l).map_err(|e| CliError::usage(format!("{shown}:{}: {e}", n + 1)))),
    }))
}

pub fn write_archive(path: &Path, archive: &Archive) -> CliResult<()> {
    write_jsonl(
        path,
        archive.entries().map(|(i, t)| ArchiveLine { key_point: i + 1, test: t.clone() }),
    )
}

pub fn read_archive(path: &Path, epsilon: f64, key_points: usize) -> CliResult<Archive> {
    let mut archive = Archive::new(epsilon);
    for line in read_jsonl::<ArchiveLine>(path)? {
        let line = line?;
        if line.key_point == 0 || line.key_point > key_points {
            return Err(CliError::usage(format!(
                "{}: key_point {} outside 1..={key_points}",
                path.display(),
                line.key_point
            )));
        }
        if line.test.key_points() != key_points {
            return Err(CliError::usage(format!(
                "{}: entry for KP{} has {} fitness values, expected {key_points}",
                path.display(),
                line.key_point,
                line.test.key_points()
            )));
        }
        archive.insert_raw(line.key_point - 1, line.test);
    }
    Ok(archive)
}

pub fn write_trace(path: &Path, records: &[EvaluationRecord]) -> CliResult<()> {
    write_jsonl(path, records)
}

pub fn write_generations(path: &Path, trace: &SearchTrace) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| CliError::runtime(format!("writing {}: {e}", path.display()));
    w.write_record(["generation", "evaluations", "covered", "uncovered", "population", "es"])
        .map_err(err)?;
    for g in &trace.generations {
        w.write_record([
            g.generation.to_string(),
            g.evaluations.to_string(),
            g.covered.to_string(),
            g.uncovered.to_string(),
            g.population.to_string(),
            g.es.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(write_err(path))
}

pub fn write_summary(path: &Path, summary: &Summary) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, summary).map_err(|e| CliError::runtime(e.to_string()))?;
    writeln!(w).map_err(write_err(path))?;
    w.flush().map_err(write_err(path))
}

pub fn read_summary(path: &Path) -> CliResult<Summary> {
    serde_json::from_reader(open(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// `dir` itself when it holds `file`, otherwise its immediate subdirectories that do, sorted.
pub fn find_runs(dir: &Path, file: &str) -> CliResult<Vec<PathBuf>> {
    if dir.join(file).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::usage(format!("cannot list {}: {e}", dir.display())))?;
    let mut runs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(file).is_file())
        .collect();
    runs.sort();
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kpsearch_core::{ImageCharacteristics, SyntheticSut, SystemUnderTest};

    #[test]
    fn archive_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let sut = SyntheticSut::default_plant();
        let mut archive = Archive::new(0.05);
        for ic in [
            ImageCharacteristics::new(-25.123456789, 24.987654321, 0.1, 9),
            ImageCharacteristics::new(10.0, -12.0, 5.0, 2),
        ] {
            archive.offer(&sut.evaluate(&ic).unwrap());
        }
        assert!(!archive.is_empty());
        let path = dir.path().join(ARCHIVE_FILE);
        write_archive(&path, &archive).unwrap();
        assert_eq!(read_archive(&path, 0.05, 27).unwrap(), archive);
        assert!(read_archive(&path, 0.05, 5).is_err());
    }

    #[test]
    fn finds_nested_runs() {
        let dir = tempfile::tempdir().unwrap();
        for sub in ["rep-01", "rep-00", "junk"] {
            std::fs::create_dir(dir.path().join(sub)).unwrap();
        }
        for sub in ["rep-01", "rep-00"] {
            std::fs::write(dir.path().join(sub).join(SUMMARY_FILE), "{}").unwrap();
        }
        let runs = find_runs(dir.path(), SUMMARY_FILE).unwrap();
        assert_eq!(runs, vec![dir.path().join("rep-00"), dir.path().join("rep-01")]);
    }
}
