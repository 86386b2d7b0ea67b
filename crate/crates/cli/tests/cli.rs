use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kpsearch::io::{self, Summary};
use kpsearch_core::metrics::effectiveness_score;

fn kpsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpsearch")).args(args).output().expect("spawn kpsearch")
}

fn ok(args: &[&str]) -> String {
    let out = kpsearch(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn run_into(dir: &Path, extra: &[&str]) {
    let mut args = vec!["run", "--out", p(dir)];
    args.extend_from_slice(extra);
    ok(&args);
}

fn stub_sut() -> String {
    format!("external:{}", env!("CARGO_BIN_EXE_kpsearch-stub"))
}

#[test]
fn run_writes_a_consistent_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("mosa");
    run_into(&dir, &["--algorithm", "mosa", "--budget", "20000", "--seed", "7"]);
    for f in [io::ARCHIVE_FILE, io::TRACE_FILE, io::GENERATIONS_FILE, io::SUMMARY_FILE] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let s = io::read_summary(&dir.join(io::SUMMARY_FILE)).unwrap();
    assert!((0.0..=1.0).contains(&s.es));
    assert_eq!(s.ms.len(), 27);
    assert_eq!(s.evaluations, 20000);
    let archive = io::read_archive(&dir.join(io::ARCHIVE_FILE), s.epsilon, s.key_points).unwrap();
    assert_eq!(effectiveness_score(&archive, s.key_points), s.es);
    assert_eq!(archive.objectives().into_iter().map(|i| i + 1).collect::<Vec<_>>(), s.covered);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let flags = ["--algorithm", "fitest+", "--budget", "3000", "--seed", "11", "--reps", "3", "--jobs", "3"];
    run_into(&a, &flags);
    run_into(&b, &["--jobs", "1"].iter().chain(&flags[..8]).copied().collect::<Vec<_>>());
    for rep in ["rep-00", "rep-01", "rep-02"] {
        for f in [io::ARCHIVE_FILE, io::TRACE_FILE, io::GENERATIONS_FILE, io::SUMMARY_FILE] {
            let x = std::fs::read(a.join(rep).join(f)).unwrap();
            let y = std::fs::read(b.join(rep).join(f)).unwrap();
            assert!(x == y, "{rep}/{f} differs");
        }
    }
}

fn read_rows(csv_text: &str) -> Vec<Vec<String>> {
    csv_text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn mosa_plus_beats_random_search_over_paired_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let (plus, rs) = (tmp.path().join("plus"), tmp.path().join("rs"));
    let common = ["--budget", "20000", "--seed", "5", "--reps", "10", "--jobs", "4"];
    run_into(&plus, &[&["--algorithm", "mosa+"], &common[..]].concat());
    run_into(&rs, &[&["--algorithm", "rs"], &common[..]].concat());
    let report = tmp.path().join("report.csv");
    let stdout = ok(&[
        "compare",
        "--set",
        &format!("mosa+={}", p(&plus)),
        "--set",
        &format!("rs={}", p(&rs)),
        "--out",
        p(&report),
    ]);
    assert_eq!(std::fs::read_to_string(&report).unwrap(), stdout);
    let rows = read_rows(&stdout);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..4], ["mosa+", "rs", "10", "10"]);
    let median_plus: f64 = rows[0][4].parse().unwrap();
    let median_rs: f64 = rows[0][5].parse().unwrap();
    assert!(median_plus > median_rs, "{median_plus} vs {median_rs}");

    // self comparison and pair selection
    let stdout = ok(&[
        "compare",
        "--set",
        &format!("a={}", p(&plus)),
        "--set",
        &format!("b={}", p(&plus)),
        "--set",
        &format!("c={}", p(&rs)),
        "--pair",
        "a:b",
        "--pair",
        "c:a",
    ]);
    let rows = read_rows(&stdout);
    assert_eq!(rows.len(), 2);
    let (es_p, es_a12, ms_p, ms_a12): (f64, f64, f64, f64) =
        (rows[0][6].parse().unwrap(), rows[0][7].parse().unwrap(), rows[0][8].parse().unwrap(), rows[0][9].parse().unwrap());
    assert_eq!((es_a12, ms_a12), (0.5, 0.5));
    assert!(es_p > 0.99 && ms_p > 0.99);
}

#[test]
fn compare_rejects_thin_or_mismatched_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("one");
    run_into(&one, &["--budget", "500"]);
    let out = kpsearch(&["compare", "--set", &format!("a={}", p(&one)), "--set", &format!("b={}", p(&one))]);
    assert_eq!(out.status.code(), Some(2));

    let (x, y) = (tmp.path().join("x"), tmp.path().join("y"));
    run_into(&x, &["--budget", "500", "--reps", "2"]);
    run_into(&y, &["--budget", "500", "--reps", "2"]);
    let path = y.join("rep-01").join(io::SUMMARY_FILE);
    let mut s: Summary = io::read_summary(&path).unwrap();
    s.key_points = 5;
    s.ms.truncate(5);
    io::write_summary(&path, &s).unwrap();
    let out = kpsearch(&["compare", "--set", &format!("x={}", p(&x)), "--set", &format!("y={}", p(&y))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("key-points"));
}

fn perturb_first_entry(archive: &Path, delta: f64) {
    let text = std::fs::read_to_string(archive).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut first: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    let kp = first["key_point"].as_u64().unwrap() as usize - 1;
    let f = first["fitness"][kp].as_f64().unwrap();
    first["fitness"][kp] = serde_json::json!(f + delta);
    lines[0] = first.to_string();
    std::fs::write(archive, lines.join("\n") + "\n").unwrap();
}

#[test]
fn replay_detects_exactly_the_tampered_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    run_into(&dir, &["--budget", "4000", "--seed", "3"]);
    let stdout = ok(&["replay", p(&dir)]);
    let entries = stdout.lines().filter(|l| l.starts_with("KP")).count();
    assert!(entries > 0 && !stdout.contains("FAIL"), "{stdout}");

    perturb_first_entry(&dir.join(io::ARCHIVE_FILE), 1e-3);
    let out = kpsearch(&["replay", p(&dir.join(io::ARCHIVE_FILE))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().filter(|l| l.contains(" FAIL ")).count(), 1, "{stderr}");
    assert!(stderr.contains("diff KP"));
    assert!(stderr.contains(&format!("{} passed, 1 failed", entries - 1)), "{stderr}");
}

#[test]
fn external_runs_match_and_replay_through_the_stub() {
    let tmp = tempfile::tempdir().unwrap();
    let (ext, local) = (tmp.path().join("ext"), tmp.path().join("local"));
    let sut = stub_sut();
    run_into(&ext, &["--algorithm", "mosa+", "--budget", "3000", "--seed", "21", "--sut", &sut]);
    run_into(&local, &["--algorithm", "mosa+", "--budget", "3000", "--seed", "21"]);
    let a = std::fs::read(ext.join(io::ARCHIVE_FILE)).unwrap();
    let b = std::fs::read(local.join(io::ARCHIVE_FILE)).unwrap();
    assert!(a == b, "loopback archive differs");
    // the recorded SUT is used when no --sut is given
    let stdout = ok(&["replay", p(&ext)]);
    assert!(stdout.contains(" 0 failed"), "{stdout}");
    let stdout = ok(&["replay", p(&local), "--sut", &sut]);
    assert!(stdout.contains(" 0 failed"), "{stdout}");
}

fn explain_dir(tmp: &Path) -> (PathBuf, String) {
    let runs = tmp.join("runs");
    run_into(&runs, &["--algorithm", "mosa+", "--budget", "20000", "--seed", "2024", "--reps", "5", "--jobs", "5"]);
    let out = tmp.join("explain");
    let stdout = ok(&["explain", p(&runs), "--out", p(&out)]);
    (out, stdout)
}

#[test]
fn explain_recovers_the_planted_rule_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let (out, stdout) = explain_dir(tmp.path());
    let trees = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".txt"))
        .count();
    assert!(trees > 0 && trees <= 27, "{trees} trees");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("KP")).count(), trees);

    let mut cv = csv::Reader::from_path(out.join("cv_mae.csv")).unwrap();
    assert_eq!(cv.headers().unwrap(), vec!["key_point", "observations", "leaves", "cv_mae"]);
    assert_eq!(cv.records().count(), trees);

    let mut rules = csv::Reader::from_path(out.join("rules-KP26.csv")).unwrap();
    assert_eq!(rules.headers().unwrap(), vec!["condition", "mean_ne", "count"]);
    let top = rules.records().next().unwrap().unwrap();
    let condition = &top[0];
    assert!(condition.split(" ∧ ").any(|c| c == "M=9"), "{condition}");
    let pitch: f64 = condition
        .split(" ∧ ")
        .find_map(|c| c.strip_prefix("P ≥ "))
        .unwrap_or_else(|| panic!("no pitch bound in {condition}"))
        .parse()
        .unwrap();
    assert!((pitch - 18.41).abs() <= 2.0, "{condition}");
    let tree: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("tree-KP26.json")).unwrap()).unwrap();
    assert_eq!(tree["min_leaf"], 40);
}

#[test]
fn explain_warns_and_skips_thin_key_points() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");
    run_into(&runs, &["--budget", "100", "--seed", "1"]);
    let out = tmp.path().join("explain");
    let res = kpsearch(&["explain", p(&runs), "--out", p(&out), "--key-points", "1-2,26", "--min-leaf", "60"]);
    assert!(res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert_eq!(stderr.lines().filter(|l| l.starts_with("warning: KP")).count(), 3, "{stderr}");
    assert!(out.join("cv_mae.csv").is_file());
    assert!(!out.join("tree-KP26.txt").exists());

    let ok_now = kpsearch(&["explain", p(&runs), "--out", p(&out), "--key-points", "1", "--min-leaf", "5"]);
    assert!(ok_now.status.success());
    assert!(out.join("tree-KP01.txt").is_file());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(kpsearch(&["run", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(kpsearch(&["run", "--algorithm", "nsga2", "--out", p(tmp.path())]).status.code(), Some(2));
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "budget = \"lots\"\n").unwrap();
    assert_eq!(kpsearch(&["run", "--config", p(&cfg)]).status.code(), Some(2));
    assert_eq!(kpsearch(&["replay", p(&tmp.path().join("missing"))]).status.code(), Some(2));

    let crash = format!("{} crash", stub_sut());
    let out = kpsearch(&["run", "--sut", &crash, "--budget", "500", "--out", p(&tmp.path().join("c"))]);
    assert_eq!(out.status.code(), Some(1));
    let garbage = format!("{} garbage", stub_sut());
    let out = kpsearch(&["run", "--sut", &garbage, "--budget", "500", "--out", p(&tmp.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("protocol error"));
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "algorithm = \"fitest\"\nbudget = 1500\nseed = 9\nreps = 2\nout = \"from-config\"\n\n[operators]\neta_c = 10.0\n",
    )
    .unwrap();
    ok(&["run", "--config", p(&cfg), "--reps", "1"]);
    let s = io::read_summary(&tmp.path().join("from-config").join(io::SUMMARY_FILE)).unwrap();
    assert_eq!((s.algorithm.as_str(), s.budget, s.master_seed), ("fitest", 1500, 9));
}
