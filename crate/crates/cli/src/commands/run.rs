use std::path::{Path, PathBuf};

use kpsearch_core::metrics::{effectiveness_score, misprediction_severity};
use kpsearch_core::search::{run as run_search, SearchConfig, SearchOutcome};
use rayon::prelude::*;

use crate::config::RunSettings;
use crate::error::{CliError, CliResult};
use crate::io::{self, Summary};
use crate::seeds::run_seed;

/// Directory of repetition `rep`: the output directory itself for single runs.
pub fn rep_dir(out: &Path, reps: usize, rep: usize) -> PathBuf {
    if reps == 1 {
        out.to_path_buf()
    } else {
        let width = (reps - 1).to_string().len().max(2);
        out.join(format!("rep-{rep:0width$}"))
    }
}

pub fn summarize(settings: &RunSettings, cfg: &SearchConfig, rep: usize, outcome: &SearchOutcome) -> Summary {
    let k = cfg.key_points;
    Summary {
        algorithm: cfg.algorithm.name().into(),
        master_seed: settings.search.seed,
        rep,
        seed: cfg.seed,
        budget: cfg.budget,
        epsilon: cfg.epsilon,
        key_points: k,
        sut: settings.sut.label(),
        evaluations: outcome.evaluations_used(),
        es: effectiveness_score(&outcome.archive, k),
        covered: outcome.archive.objectives().into_iter().map(|i| i + 1).collect(),
        ms: misprediction_severity(&outcome.archive, k),
    }
}

pub fn write_run(dir: &Path, summary: &Summary, outcome: &SearchOutcome) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    io::write_archive(&dir.join(io::ARCHIVE_FILE), &outcome.archive)?;
    io::write_trace(&dir.join(io::TRACE_FILE), &outcome.evaluations)?;
    io::write_generations(&dir.join(io::GENERATIONS_FILE), &outcome.trace)?;
    io::write_summary(&dir.join(io::SUMMARY_FILE), summary)
}

fn one_rep(settings: &RunSettings, rep: usize) -> CliResult<Summary> {
    let cfg = SearchConfig { seed: run_seed(settings.search.seed, rep), ..settings.search.clone() };
    let sut = settings.sut.connect(cfg.key_points)?;
    let dir = rep_dir(&settings.out, settings.reps, rep);
    match run_search(&cfg, sut.as_ref()) {
        Ok(outcome) => {
            let summary = summarize(settings, &cfg, rep, &outcome);
            write_run(&dir, &summary, &outcome)?;
            Ok(summary)
        }
        Err(aborted) => {
            // keep what was evaluated so the failure can be inspected
            let summary = summarize(settings, &cfg, rep, &aborted.partial);
            write_run(&dir, &summary, &aborted.partial)?;
            let cause: CliError = aborted.error.into();
            Err(CliError::runtime(format!("rep {rep} ({}): {cause}", dir.display())))
        }
    }
}

/// Runs every repetition, `jobs` at a time, and returns their summaries in order.
pub fn execute(settings: &RunSettings) -> CliResult<Vec<Summary>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let results: Vec<CliResult<Summary>> =
        pool.install(|| (0..settings.reps).into_par_iter().map(|rep| one_rep(settings, rep)).collect());
    results.into_iter().collect()
}
