// SPDX-License-Identifier: Apache-2.0

//! Command implementations behind the `headergen` binary.

use std::fmt;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use headergen::callgraph::{average, score, CallSiteReport, GroundTruth, PrecisionRecall};
use headergen::classify::TaxonomyDB;
use headergen::notebook::{load_notebook, write_notebook, NotebookDoc};
use headergen::pipeline::{analyze, Analysis, Options};
use headergen::stubs::TypeStubDB;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Malformed notebook, stub or taxonomy file, or unparsable code.
    Input,
    /// The analysis itself broke.
    Internal,
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl fmt::Display) -> Self {
        Failure { kind: FailureKind::Input, message: message.to_string() }
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        Failure { kind: FailureKind::Internal, message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Input => 2,
            FailureKind::Internal => 1,
        }
    }

    fn context(self, what: impl fmt::Display) -> Self {
        Failure { message: format!("{what}: {}", self.message), ..self }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub type Result<T> = std::result::Result<T, Failure>;

/// Read-only databases shared by every notebook of a run.
pub struct Engine {
    pub stubs: TypeStubDB,
    pub taxonomy: TaxonomyDB,
}

impl Engine {
    pub fn shipped() -> Self {
        Engine { stubs: TypeStubDB::shipped(), taxonomy: TaxonomyDB::shipped() }
    }

    pub fn load(stubs: Option<&Path>, taxonomy: Option<&Path>) -> Result<Self> {
        let stubs = match stubs {
            Some(dir) if !dir.is_dir() => {
                return Err(Failure::input(format!("stub directory {} does not exist", dir.display())))
            }
            Some(dir) => TypeStubDB::load_dir(dir).map_err(Failure::input)?,
            None => TypeStubDB::shipped(),
        };
        let taxonomy = match taxonomy {
            Some(path) => TaxonomyDB::load(path).map_err(Failure::input)?,
            None => TaxonomyDB::shipped(),
        };
        Ok(Engine { stubs, taxonomy })
    }

    pub fn analyze(&self, nb: &NotebookDoc, options: Options) -> Result<Analysis> {
        let run = panic::catch_unwind(AssertUnwindSafe(|| analyze(nb, &self.stubs, &self.taxonomy, options)));
        match run {
            Ok(result) => result.map_err(Failure::input),
            Err(payload) => {
                let message = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "analysis panicked".to_string());
                Err(Failure::internal(format!("internal analysis failure: {message}")))
            }
        }
    }

    pub fn analyze_path(&self, path: &Path, options: Options) -> Result<(NotebookDoc, Analysis)> {
        let nb = load_notebook(path).map_err(|e| Failure::input(e).context(path.display()))?;
        let analysis = self.analyze(&nb, options).map_err(|e| e.context(path.display()))?;
        Ok((nb, analysis))
    }

    pub fn annotate(&self, nb: &NotebookDoc, analysis: &Analysis) -> NotebookDoc {
        headergen::annotate::apply(nb, &analysis.annotations(&self.taxonomy, &self.stubs))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputMode {
    Out(PathBuf),
    InPlace,
    ReportOnly,
}

#[derive(Debug, Clone)]
pub struct AnnotateConfig {
    pub mode: OutputMode,
    pub report: Option<PathBuf>,
    pub dump_eag: Option<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::input(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Report JSON for one notebook, plus the graph dump when requested.
pub fn cmd_analyze(engine: &Engine, nb_path: &Path, dump_eag: Option<&Path>) -> Result<String> {
    let options = Options { dump_eag: dump_eag.is_some() };
    let (_, analysis) = engine.analyze_path(nb_path, options)?;
    if let (Some(path), Some(dot)) = (dump_eag, &analysis.eag_dot) {
        write(path, dot)?;
    }
    Ok(analysis.report.to_json_string())
}

/// Annotates one notebook. Returns the report JSON when no notebook is
/// written and no report path was given.
pub fn annotate_file(engine: &Engine, nb_path: &Path, config: &AnnotateConfig) -> Result<Option<String>> {
    let options = Options { dump_eag: config.dump_eag.is_some() };
    let (nb, analysis) = engine.analyze_path(nb_path, options)?;
    if let (Some(path), Some(dot)) = (&config.dump_eag, &analysis.eag_dot) {
        write(path, dot)?;
    }
    let report = analysis.report.to_json_string();
    let target = match &config.mode {
        OutputMode::Out(p) => Some(p.clone()),
        OutputMode::InPlace => Some(nb_path.to_path_buf()),
        OutputMode::ReportOnly => None,
    };
    if let Some(target) = target {
        let out = engine.annotate(&nb, &analysis);
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Failure::input(format!("{}: {e}", parent.display())))?;
        }
        write_notebook(&out, &target).map_err(|e| Failure::input(e).context(target.display()))?;
    }
    match &config.report {
        Some(path) => {
            write(path, &report)?;
            Ok(None)
        }
        None if config.mode == OutputMode::ReportOnly => Ok(Some(report)),
        None => Ok(None),
    }
}

/// Notebooks directly inside `dir`, sorted by name.
pub fn notebooks_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "ipynb"))
        .collect();
    paths.sort();
    Ok(paths)
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub path: PathBuf,
    pub result: Result<()>,
}

/// Annotates every notebook of `dir` independently. With an output
/// directory, each notebook keeps its file name; reports go to
/// `<report dir>/<stem>.json`.
pub fn annotate_dir(engine: &Engine, dir: &Path, config: &AnnotateConfig) -> Result<Vec<BatchOutcome>> {
    if config.dump_eag.is_some() {
        return Err(Failure::input("--dump-eag takes a single notebook"));
    }
    let paths = notebooks_in(dir)?;
    Ok(paths
        .par_iter()
        .map(|path| {
            let name = path.file_name().expect("listed files have names");
            let stem = path.file_stem().expect("listed files have stems").to_string_lossy();
            let mode = match &config.mode {
                OutputMode::Out(out) => OutputMode::Out(out.join(name)),
                other => other.clone(),
            };
            let report = config.report.as_ref().map(|r| r.join(format!("{stem}.json")));
            let single = AnnotateConfig { mode, report, dump_eag: None };
            let result = annotate_file(engine, path, &single).map(|_| ());
            BatchOutcome { path: path.clone(), result }
        })
        .collect())
}

fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    GroundTruth::parse(&text).map_err(|e| Failure::input(e).context(path.display()))
}

pub fn cmd_eval(report_path: &Path, truth_path: &Path) -> Result<PrecisionRecall> {
    let found = read_truth(report_path)?;
    let truth = read_truth(truth_path)?;
    Ok(headergen::callgraph::score_pairs(&found.pairs, &truth.pairs))
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub sound: bool,
    pub complete: bool,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub elapsed_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub cases: Vec<CaseResult>,
    pub total: usize,
    pub sound: usize,
    pub complete: usize,
    pub average_precision: f64,
    pub average_recall: f64,
}

impl BenchSummary {
    pub fn case(&self, name: &str) -> Option<&CaseResult> {
        self.cases.iter().find(|c| c.name == name)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let width = self.cases.iter().map(|c| c.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<width$}  sound  complete  precision  recall\n", "case");
        let mark = |b: bool| if b { "yes" } else { "NO" };
        for c in &self.cases {
            out.push_str(&format!(
                "{:<width$}  {:<5}  {:<8}  {:>9.3}  {:>6.3}",
                c.name,
                mark(c.sound),
                mark(c.complete),
                c.precision,
                c.recall
            ));
            if let Some(e) = &c.error {
                out.push_str(&format!("  error: {e}"));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "sound {}/{}  complete {}/{}  average precision {:.3}  average recall {:.3}\n",
            self.sound, self.total, self.complete, self.total, self.average_precision, self.average_recall
        ));
        out
    }
}

/// The notebook of a benchmark case: the only `.ipynb` in its directory.
pub fn case_notebook(dir: &Path) -> Result<PathBuf> {
    let mut found = notebooks_in(dir)?;
    match found.len() {
        1 => Ok(found.remove(0)),
        n => Err(Failure::input(format!("{}: expected one notebook, found {n}", dir.display()))),
    }
}

pub fn run_case(engine: &Engine, dir: &Path) -> CaseResult {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let start = Instant::now();
    let outcome = (|| {
        let truth = read_truth(&dir.join(TRUTH_FILE))?;
        let (_, analysis) = engine.analyze_path(&case_notebook(dir)?, Options::default())?;
        Ok::<_, Failure>(score(&analysis.report, &truth))
    })();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1000.0;
    match outcome {
        Ok(pr) => CaseResult {
            name,
            sound: pr.sound(),
            complete: pr.complete(),
            precision: pr.precision,
            recall: pr.recall,
            tp: pr.tp,
            fp: pr.fp,
            fn_: pr.fn_,
            elapsed_ms,
            error: None,
        },
        Err(e) => CaseResult {
            name,
            sound: false,
            complete: false,
            precision: 0.0,
            recall: 0.0,
            tp: 0,
            fp: 0,
            fn_: 0,
            elapsed_ms,
            error: Some(e.message),
        },
    }
}

pub fn cmd_bench(engine: &Engine, suite: &Path) -> Result<BenchSummary> {
    let entries = fs::read_dir(suite).map_err(|e| Failure::input(format!("{}: {e}", suite.display())))?;
    let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    dirs.sort();
    let cases: Vec<CaseResult> = dirs.par_iter().map(|d| run_case(engine, d)).collect();
    let prs: Vec<PrecisionRecall> = cases
        .iter()
        .map(|c| PrecisionRecall { precision: c.precision, recall: c.recall, tp: c.tp, fp: c.fp, fn_: c.fn_ })
        .collect();
    let (average_precision, average_recall) = average(&prs);
    Ok(BenchSummary {
        total: cases.len(),
        sound: cases.iter().filter(|c| c.sound).count(),
        complete: cases.iter().filter(|c| c.complete).count(),
        cases,
        average_precision,
        average_recall,
    })
}

pub fn pr_json(pr: &PrecisionRecall) -> String {
    let mut s = serde_json::to_string_pretty(&pr.to_json()).expect("json");
    s.push('\n');
    s
}

/// `{"cells": {}}` for an empty report.
pub fn empty_report() -> String {
    CallSiteReport::new().to_json_string()
}

pub fn batch_summary(outcomes: &[BatchOutcome]) -> serde_json::Value {
    let failed: Vec<_> = outcomes
        .iter()
        .filter_map(|o| {
            o.result.as_ref().err().map(|e| json!({"path": o.path.display().to_string(), "error": e.message}))
        })
        .collect();
    json!({"processed": outcomes.len(), "failed": failed})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_failures_outrank_internal_ones_in_exit_codes() {
        assert_eq!(Failure::input("x").exit_code(), 2);
        assert_eq!(Failure::internal("x").exit_code(), 1);
        assert_eq!(Failure::input("bad").context("nb.ipynb").to_string(), "nb.ipynb: bad");
    }

    #[test]
    fn a_case_needs_exactly_one_notebook() {
        let dir = tempfile::tempdir().unwrap();
        assert!(case_notebook(dir.path()).is_err());
        fs::write(dir.path().join("a.ipynb"), "{}").unwrap();
        fs::write(dir.path().join("notes.txt"), "").unwrap();
        assert_eq!(case_notebook(dir.path()).unwrap(), dir.path().join("a.ipynb"));
        fs::write(dir.path().join("b.ipynb"), "{}").unwrap();
        assert!(case_notebook(dir.path()).is_err());
    }

    #[test]
    fn missing_truth_is_a_case_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("main.ipynb"),
            r#"{"cells": [], "metadata": {}, "nbformat": 4, "nbformat_minor": 4}"#,
        )
        .unwrap();
        let result = run_case(&Engine::shipped(), dir.path());
        assert!(result.error.is_some());
        assert!(!result.sound && !result.complete);
    }

    #[test]
    fn batch_summary_lists_failures() {
        let outcomes = vec![
            BatchOutcome { path: "a.ipynb".into(), result: Ok(()) },
            BatchOutcome { path: "b.ipynb".into(), result: Err(Failure::input("syntax error")) },
        ];
        let summary = batch_summary(&outcomes);
        assert_eq!(summary["processed"], 2);
        assert_eq!(summary["failed"][0]["path"], "b.ipynb");
    }

    #[test]
    fn empty_report_is_an_empty_cell_map() {
        let v: serde_json::Value = serde_json::from_str(&empty_report()).unwrap();
        assert_eq!(v, json!({"cells": {}}));
    }
}
