use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn toy(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy").join(name)
}

fn lexmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexmatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = lexmatch(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn index_toy(dir: &Path) -> PathBuf {
    let idx = dir.join("toy.idx");
    ok(&["index", "--collection", s(&toy("collection.tsv")), "--out", s(&idx)]);
    idx
}

fn rsj_toy(dir: &Path, idx: &Path, run: &Path, out: &Path) -> Output {
    let run_arg = format!("hand={}", s(run));
    lexmatch(&[
        "rsj",
        "--index",
        s(idx),
        "--queries",
        s(&toy("queries.tsv")),
        "--qrels",
        s(&toy("qrels.txt")),
        "--run",
        &run_arg,
        "--k",
        "3",
        "--out-dir",
        s(&dir.join(out)),
    ])
}

#[test]
fn toy_rsj_matches_reference_records() {
    let dir = TempDir::new().unwrap();
    let idx = index_toy(dir.path());
    let out = rsj_toy(dir.path(), &idx, &toy("run.trec"), Path::new("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = fs::read_to_string(dir.path().join("out/rsj_hand.csv")).unwrap();
    let expected = fs::read_to_string(toy("rsj_hand.csv")).unwrap();
    assert_eq!(got.lines().count(), 8);
    assert_eq!(got, expected);
}

#[test]
fn rsj_output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let idx = index_toy(dir.path());
    for out in ["a", "b"] {
        assert!(rsj_toy(dir.path(), &idx, &toy("run.trec"), Path::new(out)).status.success());
    }
    let a = fs::read(dir.path().join("a/rsj_hand.csv")).unwrap();
    let b = fs::read(dir.path().join("b/rsj_hand.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_missing_a_judged_query_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let idx = index_toy(dir.path());
    let run = dir.path().join("partial.trec");
    let text = fs::read_to_string(toy("run.trec")).unwrap();
    fs::write(&run, text.lines().filter(|l| l.starts_with("q1")).collect::<Vec<_>>().join("\n")).unwrap();
    let out = rsj_toy(dir.path(), &idx, &run, Path::new("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q2"));
}

#[test]
fn malformed_run_reports_line_and_exit_code() {
    let dir = TempDir::new().unwrap();
    let idx = index_toy(dir.path());
    let run = dir.path().join("bad.trec");
    fs::write(&run, "q1 Q0 d01 1 2.0 t\nq1 Q0 d02 two 1.0 t\n").unwrap();
    let out = rsj_toy(dir.path(), &idx, &run, Path::new("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.trec:2"));
}

#[test]
fn help_and_usage_exit_codes() {
    for cmd in ["index", "retrieve", "rsj", "analyze", "repro"] {
        let out = lexmatch(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
    }
    assert_eq!(lexmatch(&["rsj", "--bogus"]).status.code(), Some(1));
}

#[test]
fn retrieve_writes_a_strict_run() {
    let dir = TempDir::new().unwrap();
    let idx = index_toy(dir.path());
    let run = dir.path().join("bm25.trec");
    ok(&["retrieve", "--index", s(&idx), "--queries", s(&toy("queries.tsv")), "--k", "5", "--out", s(&run)]);
    let text = fs::read_to_string(&run).unwrap();
    let q1: Vec<&str> = text.lines().filter(|l| l.starts_with("q1 ")).collect();
    assert_eq!(q1.len(), 5);
    assert!(q1[0].starts_with("q1 Q0 d08 1 ") || q1[0].starts_with("q1 Q0 d01 1 "));
    assert!(text.lines().all(|l| l.ends_with(" bm25")));
    let parsed = lexmatch::trec_io::read_run(&run, lexmatch::trec_io::RunOrdering::Strict).unwrap();
    assert_eq!(parsed.queries.len(), 2);
}

fn analyze(dir: &Path, extra: &[&str]) -> (String, serde_json::Value) {
    let idx = index_toy(dir);
    assert!(rsj_toy(dir, &idx, &toy("run.trec"), Path::new("rsj")).status.success());
    let rsj = format!("hand={}", s(&dir.join("rsj/rsj_hand.csv")));
    let out = dir.join("report");
    let mut args = vec!["analyze", "--rsj", &rsj, "--out-dir", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    let bins = fs::read_to_string(out.join("report_bins.csv")).unwrap();
    let json = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    (bins, json)
}

#[test]
fn analyze_without_split_sources_degrades_with_warnings() {
    let dir = TempDir::new().unwrap();
    let (bins, json) = analyze(dir.path(), &[]);
    let mut lines = bins.lines();
    assert_eq!(lines.next(), Some("system,split,bin_lo,bin_hi,mean_delta,std_delta,count"));
    assert!(lines.all(|l| l.starts_with("hand,all,")));
    let warnings = json["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("IT/OOT")));
    assert_eq!(json["t_tests"].as_array().unwrap().len(), 0);
    // (0,5] holds all 7 user weights.
    assert!(bins.contains("hand,all,0.000000,5.000000,"));
    assert!(bins.lines().any(|l| l.starts_with("hand,all,0.000000,5.000000,") && l.ends_with(",7")));
    assert_eq!(json["metadata"]["k"], "100");
}

#[test]
fn analyze_with_training_queries_and_two_collections() {
    let dir = TempDir::new().unwrap();
    let training = dir.path().join("train.tsv");
    let lines: Vec<String> = (0..12).map(|i| format!("t{i}\tcheap cat flights {i}")).collect();
    fs::write(&training, lines.join("\n")).unwrap();
    let source_docs = dir.path().join("source.tsv");
    fs::write(&source_docs, "s1\tcheap paris\ns2\tzebra food\ns3\tcat\ns4\tdogs\n").unwrap();
    let source_idx = dir.path().join("source.idx");
    ok(&["index", "--collection", s(&source_docs), "--out", s(&source_idx)]);
    let target_idx = dir.path().join("toy.idx");
    let (bins, json) = analyze(
        dir.path(),
        &[
            "--training-queries",
            s(&training),
            "--source-index",
            s(&source_idx),
            "--target-index",
            s(&target_idx),
            "--bins",
            "-inf,0,5,8,17",
        ],
    );
    for split in ["IT", "OOT", "IDF+", "IDF-"] {
        assert!(bins.contains(&format!("hand,{split},")), "{split}");
    }
    let ttest = fs::read_to_string(dir.path().join("report/report_ttest.csv")).unwrap();
    assert!(ttest.starts_with("system,bin_lo,bin_hi,t,p,n_it,n_oot\n"));
    assert_eq!(ttest.lines().count(), 5);
    let splits = json["systems"][0]["splits"].as_array().unwrap();
    let it = splits.iter().find(|s| s["split"] == "IT").unwrap();
    // cheap, flight and cat occur in 12 training queries.
    assert_eq!(it["distinct_terms"], 3);
}

fn write_config(dir: &Path, collection: &Path) -> PathBuf {
    let cfg = dir.join("pipeline.cfg");
    let text = format!(
        "# toy pipeline\ncollection = {}\nqueries = {}\nqrels = {}\nruns = hand={}\nk = 3\nretrieve_k = 5\nrandom_baseline = true\nseed = 7\nout_dir = {}\n",
        s(collection),
        s(&toy("queries.tsv")),
        s(&toy("qrels.txt")),
        s(&toy("run.trec")),
        s(&dir.join("out")),
    );
    fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn repro_runs_all_stages_and_resumes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &toy("collection.tsv"));
    ok(&["repro", "--config", s(&cfg)]);
    let out = dir.path().join("out");
    for f in ["collection.idx", "run_bm25.trec", "run_random.trec", "rsj_bm25.csv", "rsj_random.csv", "rsj_hand.csv", "report.json", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(
        fs::read_to_string(out.join("rsj_hand.csv")).unwrap(),
        fs::read_to_string(toy("rsj_hand.csv")).unwrap()
    );
    let first_report = fs::read(out.join("report.json")).unwrap();

    ok(&["repro", "--config", s(&cfg), "--resume"]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let stages = summary["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 4);
    assert!(stages.iter().all(|s| s["status"] == "skipped"));
    assert_eq!(fs::read(out.join("report.json")).unwrap(), first_report);

    fs::remove_file(out.join(".analyze.done")).unwrap();
    ok(&["repro", "--config", s(&cfg), "--resume"]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["stages"][3]["status"], "done");
    assert_eq!(summary["stages"][2]["status"], "skipped");
    assert_eq!(fs::read(out.join("report.json")).unwrap(), first_report);
}

#[test]
fn repro_rejects_missing_inputs_before_any_work() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &dir.path().join("nope.tsv"));
    let out = lexmatch(&["repro", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("collection"));
    assert!(!dir.path().join("out").exists());
}
