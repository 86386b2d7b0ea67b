use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kpsearch_core::explainer::{
    build_tree, cv_mae, extract_rules_within, observations_for, render_text, Observation, RegressionTree, Rule,
    TreeParams,
};
use kpsearch_core::search::EvaluationRecord;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Clone)]
pub struct ExplainOptions {
    /// 0-based key-point indices; empty means all.
    pub key_points: Vec<usize>,
    pub params: TreeParams,
    pub folds: usize,
    pub models: Vec<u32>,
    pub out: PathBuf,
}

/// Parses a 1-based selector such as `1-5,26` into sorted 0-based indices.
pub fn parse_selector(s: &str, k: usize) -> CliResult<Vec<usize>> {
    let mut picked = BTreeSet::new();
    let bad = |part: &str| CliError::usage(format!("bad key-point selector '{part}' (expected e.g. 1-5,26 within 1..={k})"));
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse::<usize>(), b.trim().parse::<usize>()),
            None => (part.parse::<usize>(), part.parse::<usize>()),
        };
        let (lo, hi) = (lo.map_err(|_| bad(part))?, hi.map_err(|_| bad(part))?);
        if lo == 0 || hi > k || lo > hi {
            return Err(bad(part));
        }
        picked.extend(lo - 1..hi);
    }
    Ok(picked.into_iter().collect())
}

/// Reads every trace, accepting trace files or directories holding runs.
pub fn load_traces(inputs: &[PathBuf]) -> CliResult<Vec<EvaluationRecord>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_file() {
            files.push(input.clone());
        } else {
            let runs = io::find_runs(input, io::TRACE_FILE)?;
            if runs.is_empty() {
                return Err(CliError::usage(format!("no {} under {}", io::TRACE_FILE, input.display())));
            }
            files.extend(runs.into_iter().map(|d| d.join(io::TRACE_FILE)));
        }
    }
    let mut records: Vec<EvaluationRecord> = Vec::new();
    let mut k = None;
    for f in &files {
        for r in io::read_jsonl::<EvaluationRecord>(f)? {
            let r = r?;
            if r.fitness.len() != r.visible.len() || *k.get_or_insert(r.fitness.len()) != r.fitness.len() {
                return Err(CliError::usage(format!(
                    "{}: records disagree on the number of key-points",
                    f.display()
                )));
            }
            records.push(r);
        }
    }
    if records.is_empty() {
        return Err(CliError::usage("the traces contain no evaluations"));
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRow {
    pub key_point: usize,
    pub observations: usize,
    pub leaves: usize,
    pub cv_mae: f64,
}

#[derive(Debug, Clone)]
pub struct Explanation {
    /// 0-based key-point index.
    pub index: usize,
    pub observations: usize,
    pub tree: RegressionTree,
    pub rules: Vec<Rule>,
    pub cv_mae: f64,
}

pub enum Outcome {
    Built(Box<Explanation>),
    Skipped { index: usize, reason: String },
}

fn explain_one(obs: &[Observation], index: usize, opts: &ExplainOptions) -> Outcome {
    let params = &opts.params;
    let built = build_tree(obs, params).and_then(|tree| Ok((cv_mae(obs, opts.folds, params)?, tree)));
    match built {
        Ok((cv, tree)) => {
            let rules = extract_rules_within(&tree, &opts.models);
            Outcome::Built(Box::new(Explanation { index, observations: obs.len(), tree, rules, cv_mae: cv }))
        }
        Err(e) => Outcome::Skipped { index, reason: e.to_string() },
    }
}

pub fn explain(records: &[EvaluationRecord], opts: &ExplainOptions) -> Vec<Outcome> {
    let k = records[0].fitness.len();
    let indices: Vec<usize> = if opts.key_points.is_empty() { (0..k).collect() } else { opts.key_points.clone() };
    indices
        .par_iter()
        .map(|&i| {
            let obs = observations_for(records, i);
            explain_one(&obs, i, opts)
        })
        .collect()
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::runtime(format!("writing {}: {e}", path.display()))
}

/// Writes `tree-KPxx.{txt,json}`, `rules-KPxx.csv` and `cv_mae.csv`, returning the warnings.
pub fn write_outputs(outcomes: &[Outcome], out: &Path) -> CliResult<Vec<String>> {
    std::fs::create_dir_all(out).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    let mut warnings = Vec::new();
    let mut cv_rows = Vec::new();
    for o in outcomes {
        let e = match o {
            Outcome::Built(e) => e,
            Outcome::Skipped { index, reason } => {
                warnings.push(format!("warning: KP{} skipped: {reason}", index + 1));
                continue;
            }
        };
        let label = format!("KP{:02}", e.index + 1);
        let mut text = String::new();
        let _ = writeln!(text, "KP{} ({} observations)", e.index + 1, e.observations);
        text.push_str(&render_text(&e.tree));
        write_file(&out.join(format!("tree-{label}.txt")), &text)?;
        let json = serde_json::to_string_pretty(&e.tree).map_err(|err| CliError::runtime(err.to_string()))?;
        write_file(&out.join(format!("tree-{label}.json")), &(json + "\n"))?;

        let path = out.join(format!("rules-{label}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["condition", "mean_ne", "count"]).map_err(csv_err(&path))?;
        for r in &e.rules {
            w.write_record([r.condition(), format!("{:.6}", r.mean), r.count.to_string()])
                .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|err| CliError::runtime(err.to_string()))?;
        cv_rows.push(CvRow {
            key_point: e.index + 1,
            observations: e.observations,
            leaves: e.tree.leaves().len(),
            cv_mae: e.cv_mae,
        });
    }
    let path = out.join("cv_mae.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    if cv_rows.is_empty() {
        w.write_record(["key_point", "observations", "leaves", "cv_mae"]).map_err(csv_err(&path))?;
    }
    for row in &cv_rows {
        w.serialize(row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|err| CliError::runtime(err.to_string()))?;
    Ok(warnings)
}
