use std::path::Path;

use kpsearch_core::stats::{mann_whitney_u, vargha_delaney, wilcoxon_signed_rank};
use kpsearch_core::Error as CoreError;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{self, Summary};

/// Runs of one algorithm, loaded from `summary.json` files.
#[derive(Debug, Clone)]
pub struct RunSet {
    pub name: String,
    pub runs: Vec<Summary>,
}

impl RunSet {
    pub fn load(name: &str, dir: &Path) -> CliResult<Self> {
        let dirs = io::find_runs(dir, io::SUMMARY_FILE)?;
        let runs = dirs
            .iter()
            .map(|d| io::read_summary(&d.join(io::SUMMARY_FILE)))
            .collect::<CliResult<Vec<_>>>()?;
        if runs.len() < 2 {
            return Err(CliError::usage(format!(
                "set '{name}' has {} run(s) under {}; at least 2 are needed",
                runs.len(),
                dir.display()
            )));
        }
        Ok(Self { name: name.into(), runs })
    }

    fn es(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.es).collect()
    }

    /// Mean MS per key-point over the runs.
    fn mean_ms(&self) -> Vec<f64> {
        let k = self.runs[0].ms.len();
        (0..k)
            .map(|i| self.runs.iter().map(|r| r.ms[i]).sum::<f64>() / self.runs.len() as f64)
            .collect()
    }
}

/// One row of the comparison table. Columns keep this order in CSV output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub a: String,
    pub b: String,
    pub runs_a: usize,
    pub runs_b: usize,
    pub es_median_a: f64,
    pub es_median_b: f64,
    pub es_p: f64,
    pub es_a12: f64,
    pub ms_p: f64,
    pub ms_a12: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn compare_pair(a: &RunSet, b: &RunSet) -> CliResult<ComparisonRow> {
    let k = a.runs[0].key_points;
    if let Some(r) = a.runs.iter().chain(&b.runs).find(|r| r.key_points != k || r.ms.len() != k) {
        return Err(CliError::usage(format!(
            "runs disagree on the number of key-points ({k} vs {} in a {} run)",
            r.key_points, r.algorithm
        )));
    }
    let (es_a, es_b) = (a.es(), b.es());
    let es = mann_whitney_u(&es_a, &es_b)?;
    let (ms_a, ms_b) = (a.mean_ms(), b.mean_ms());
    let diffs: Vec<f64> = ms_a.iter().zip(&ms_b).map(|(x, y)| x - y).collect();
    let ms_p = match wilcoxon_signed_rank(&diffs) {
        Ok(w) => w.p_value,
        Err(CoreError::UndefinedTest(_)) => 1.0,
        Err(e) => return Err(e.into()),
    };
    Ok(ComparisonRow {
        a: a.name.clone(),
        b: b.name.clone(),
        runs_a: a.runs.len(),
        runs_b: b.runs.len(),
        es_median_a: median(es_a.clone()),
        es_median_b: median(es_b.clone()),
        es_p: es.p_value,
        es_a12: vargha_delaney(&es_a, &es_b)?,
        ms_p,
        ms_a12: vargha_delaney(&ms_a, &ms_b)?,
    })
}

/// Compares the named pairs, or every pair in order when `pairs` is empty.
pub fn execute(sets: &[RunSet], pairs: &[(String, String)]) -> CliResult<Vec<ComparisonRow>> {
    let find = |n: &str| {
        sets.iter()
            .find(|s| s.name == n)
            .ok_or_else(|| CliError::usage(format!("--pair names unknown set '{n}'")))
    };
    let mut rows = Vec::new();
    if pairs.is_empty() {
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                rows.push(compare_pair(a, b)?);
            }
        }
    } else {
        for (a, b) in pairs {
            rows.push(compare_pair(find(a)?, find(b)?)?);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[ComparisonRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::runtime(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(es: f64, ms: Vec<f64>) -> Summary {
        Summary {
            algorithm: "mosa".into(),
            master_seed: 0,
            rep: 0,
            seed: 0,
            budget: 100,
            epsilon: 0.05,
            key_points: ms.len(),
            sut: "synthetic".into(),
            evaluations: 100,
            es,
            covered: vec![],
            ms,
        }
    }

    fn set(name: &str, es: &[f64], ms: f64) -> RunSet {
        RunSet { name: name.into(), runs: es.iter().map(|&e| summary(e, vec![ms, ms * 2.0, ms * 3.0])).collect() }
    }

    #[test]
    fn self_comparison_is_neutral() {
        let a = set("a", &[0.5, 0.7, 0.6, 0.9], 0.1);
        let row = compare_pair(&a, &a).unwrap();
        assert_eq!(row.es_a12, 0.5);
        assert_eq!(row.ms_a12, 0.5);
        assert!(row.es_p > 0.99);
        assert_eq!(row.ms_p, 1.0);
    }

    #[test]
    fn one_row_per_pair() {
        let sets = vec![set("a", &[0.9, 0.8], 0.3), set("b", &[0.1, 0.2], 0.1), set("c", &[0.5, 0.4], 0.2)];
        assert_eq!(execute(&sets, &[]).unwrap().len(), 3);
        let rows = execute(&sets, &[("b".into(), "a".into())]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].es_a12, 0.0);
        assert!(execute(&sets, &[("a".into(), "z".into())]).is_err());
    }

    #[test]
    fn mismatched_key_points_rejected() {
        let a = set("a", &[0.9, 0.8], 0.3);
        let mut b = set("b", &[0.1, 0.2], 0.1);
        b.runs[1] = summary(0.2, vec![0.1; 5]);
        assert!(matches!(compare_pair(&a, &b), Err(CliError::Usage(_))));
    }
}
