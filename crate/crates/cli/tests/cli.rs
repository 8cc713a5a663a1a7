// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/fixtures/motivating.ipynb")
}

fn headergen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_headergen")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn notebook(dir: &Path, name: &str, cells: &[&str]) -> PathBuf {
    let cells: Vec<_> = cells
        .iter()
        .map(|src| serde_json::json!({"cell_type": "code", "metadata": {}, "source": src, "outputs": [], "execution_count": null}))
        .collect();
    let nb = serde_json::json!({"cells": cells, "metadata": {}, "nbformat": 4, "nbformat_minor": 4});
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string(&nb).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_prints_the_report() {
    let out = headergen(&["analyze", s(&fixture())]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["cells"]["2"]["2"], serde_json::json!(["seaborn.utils.load_dataset"]));
}

#[test]
fn empty_notebook_gives_an_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let nb = notebook(dir.path(), "empty.ipynb", &[]);
    let out = headergen(&["analyze", s(&nb)]);
    assert_eq!(code(&out), 0);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&stdout(&out)).unwrap(), serde_json::json!({"cells": {}}));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let broken = notebook(dir.path(), "broken.ipynb", &["x = 1", "y = ("]);
    let out = headergen(&["analyze", s(&broken)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("(C2,"), "{}", String::from_utf8_lossy(&out.stderr));

    let missing = dir.path().join("nope");
    assert_eq!(code(&headergen(&["analyze", s(&fixture()), "--stubs", s(&missing)])), 2);
    assert_eq!(code(&headergen(&["analyze", s(&dir.path().join("absent.ipynb"))])), 2);
    fs::write(dir.path().join("garbage.ipynb"), "not json").unwrap();
    assert_eq!(code(&headergen(&["analyze", s(&dir.path().join("garbage.ipynb"))])), 2);
}

#[test]
fn annotate_needs_an_output_mode() {
    let out = headergen(&["annotate", s(&fixture())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn report_only_writes_no_notebook() {
    let dir = tempfile::tempdir().unwrap();
    let nb = dir.path().join("copy.ipynb");
    fs::copy(fixture(), &nb).unwrap();
    let before = fs::read(&nb).unwrap();
    let out = headergen(&["annotate", s(&nb), "--report-only"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("load_dataset"));
    assert_eq!(fs::read(&nb).unwrap(), before);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn annotation_is_byte_identical_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.ipynb"), dir.path().join("b.ipynb"), dir.path().join("c.ipynb"));
    assert_eq!(code(&headergen(&["annotate", s(&fixture()), "--out", s(&a)])), 0);
    assert_eq!(code(&headergen(&["annotate", s(&fixture()), "--out", s(&b)])), 0);
    assert_eq!(code(&headergen(&["annotate", s(&a), "--out", s(&c)])), 0);
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    assert_eq!(first, fs::read(&c).unwrap());
    assert!(String::from_utf8(first).unwrap().contains("Index of ML Operations"));

    fs::copy(&a, dir.path().join("d.ipynb")).unwrap();
    assert_eq!(code(&headergen(&["annotate", s(&dir.path().join("d.ipynb")), "--inplace"])), 0);
    assert_eq!(fs::read(dir.path().join("d.ipynb")).unwrap(), fs::read(&a).unwrap());
}

#[test]
fn eval_scores_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    assert_eq!(code(&headergen(&["analyze", s(&fixture()), "--out", s(&report)])), 0);
    let same = headergen(&["eval", s(&report), s(&report)]);
    assert_eq!(code(&same), 0);
    let pr: serde_json::Value = serde_json::from_str(&stdout(&same)).unwrap();
    assert_eq!((pr["precision"].as_f64(), pr["recall"].as_f64()), (Some(1.0), Some(1.0)));

    let other = dir.path().join("other.json");
    fs::write(&other, r#"{"cells": {"9": {"1": ["x.y"]}}}"#).unwrap();
    let disjoint: serde_json::Value =
        serde_json::from_str(&stdout(&headergen(&["eval", s(&report), s(&other)]))).unwrap();
    assert_eq!((disjoint["precision"].as_f64(), disjoint["recall"].as_f64()), (Some(0.0), Some(0.0)));
}

#[test]
fn batch_annotation_continues_past_failures() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    notebook(&input, "good.ipynb", &["import pandas as pd\ndf = pd.read_csv('a.csv')"]);
    notebook(&input, "bad.ipynb", &["def ("]);
    let (out, reports) = (dir.path().join("out"), dir.path().join("reports"));
    let run = headergen(&["annotate", s(&input), "--out", s(&out), "--report", s(&reports)]);
    assert_eq!(code(&run), 2);
    assert!(out.join("good.ipynb").is_file());
    assert!(!out.join("bad.ipynb").exists());
    assert!(fs::read_to_string(reports.join("good.json")).unwrap().contains("read_csv"));
}

#[test]
fn bench_summarizes_a_suite() {
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/flow");
    let out = headergen(&["bench", s(&suite), "--json"]);
    assert_eq!(code(&out), 0);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["total"], 8);
    assert_eq!(code(&headergen(&["bench", "/nonexistent/suite"])), 2);
}
