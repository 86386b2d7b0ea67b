use std::path::{Path, PathBuf};

use kpsearch_core::search::{replay_archive, ReplayEntry};

use crate::config::SutSpec;
use crate::error::{CliError, CliResult};
use crate::io;

/// Resolves an archive file or run directory to the archive and its run summary.
pub fn locate(input: &Path) -> CliResult<(PathBuf, io::Summary)> {
    let (archive, dir) = if input.is_dir() {
        (input.join(io::ARCHIVE_FILE), input.to_path_buf())
    } else {
        (input.to_path_buf(), input.parent().unwrap_or(Path::new(".")).to_path_buf())
    };
    let summary = io::read_summary(&dir.join(io::SUMMARY_FILE))?;
    Ok((archive, summary))
}

pub fn execute(archive_path: &Path, summary: &io::Summary, sut: &SutSpec) -> CliResult<Vec<ReplayEntry>> {
    let archive = io::read_archive(archive_path, summary.epsilon, summary.key_points)?;
    let sut = sut.connect(summary.key_points)?;
    Ok(replay_archive(&archive, sut.as_ref())?)
}

/// One line per entry, then the differing fitness values of every failure.
pub fn report(entries: &[ReplayEntry]) -> (String, usize) {
    let mut out = String::new();
    let mut failed = 0;
    for e in entries {
        let status = if e.passed() { "pass" } else { "FAIL" };
        out.push_str(&format!("KP{:<2} {status} max_abs_diff={:.3e}\n", e.objective + 1, e.max_abs_diff));
    }
    for e in entries.iter().filter(|e| !e.passed()) {
        failed += 1;
        out.push_str(&format!(
            "diff KP{}: stored {} replayed {} (largest difference over the vector {:e}{})\n",
            e.objective + 1,
            e.stored,
            e.replayed,
            e.max_abs_diff,
            if e.covering { "" } else { ", stored value below epsilon" }
        ));
    }
    out.push_str(&format!("{} entries, {} passed, {failed} failed\n", entries.len(), entries.len() - failed));
    (out, failed)
}

pub fn check(entries: &[ReplayEntry]) -> CliResult<String> {
    let (text, failed) = report(entries);
    if failed == 0 {
        Ok(text)
    } else {
        Err(CliError::runtime(text.trim_end().to_string()))
    }
}
