// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance checks. Prints one line per criterion and fails if
//! any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use headergen::annotate::apply;
use headergen::classify::TaxonomyDB;
use headergen::notebook::{load_notebook, CellKind, CellLocation, NotebookDoc};
use headergen::stubs::TypeStubDB;
use headergen::{analyze, Analysis, Options};
use headergen_cli::{cmd_bench, Engine};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn analysis_of(engine: &Engine, nb: &NotebookDoc) -> Result<Analysis, String> {
    engine.analyze(nb, Options::default()).map_err(|e| e.message)
}

fn fqns(a: &Analysis, cell: u32, line: u32) -> BTreeSet<String> {
    a.report.fqns_at(CellLocation::new(cell, line)).into_iter().map(str::to_string).collect()
}

fn tops(a: &Analysis, db: &TaxonomyDB, cell: u32) -> Vec<String> {
    a.classification.top_level(cell, &db.taxonomy).into_iter().map(str::to_string).collect()
}

fn motivating_example(engine: &Engine) -> Outcome {
    let nb = load_notebook(&corpus().join("fixtures/motivating.ipynb")).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let a = analysis_of(engine, &nb)?;
    let annotated = engine.annotate(&nb, &a);
    let elapsed = start.elapsed();
    let loading = fqns(&a, 2, 2).contains("seaborn.utils.load_dataset");
    let fit4: BTreeSet<_> = fqns(&a, 4, 3).into_iter().filter(|f| f.ends_with(".fit")).collect();
    let fit5: BTreeSet<_> = fqns(&a, 5, 6).into_iter().filter(|f| f.ends_with(".fit")).collect();
    let distinct = !fit4.is_empty() && !fit5.is_empty() && fit4.is_disjoint(&fit5);
    let model = "Model Building and Training".to_string();
    let cell5 = tops(&a, &engine.taxonomy, 5).contains(&model);
    let index = annotated.cells.iter().map(|c| c.source.as_str()).find(|s| s.contains("Index of ML Operations"));
    let indexed = index.is_some_and(|s| s.contains("goto cell # 5"));
    check(
        loading && distinct && cell5 && indexed && elapsed < Duration::from_secs(2),
        format!(
            "load_dataset at (2,2): {loading}; fit {fit4:?} vs {fit5:?}; cell 5 model: {cell5}; indexed: {indexed}; {elapsed:?}"
        ),
    )
}

fn typed_access_chains(engine: &Engine) -> Outcome {
    let src = "import pandas as pd\n\ndf = pd.read_csv('./input.csv')\n\
               x1 = df['a'].map(lambda x: x + 1.0)\n\
               x2 = df.iloc[[False]].reset_index().copy()\n\
               x3 = df.a.fillna(0)\n\
               x4 = df.groupby(['a'])[['b']].agg({'b': ['min']})\n\
               x5 = df[['b', 'c']]\n\
               x6 = df.c.values.astype(int)\n";
    let a = analysis_of(engine, &NotebookDoc::from_sources([(CellKind::Code, src)]))?;
    let expected: [(u32, &[&str]); 6] = [
        (3, &["pandas.io.parsers.readers.read_csv"]),
        (4, &["pandas.core.series.Series.map"]),
        (5, &["pandas.core.frame.DataFrame.copy", "pandas.core.frame.DataFrame.reset_index"]),
        (6, &["pandas.core.series.Series.fillna"]),
        (7, &["pandas.core.frame.DataFrame.groupby", "pandas.core.groupby.generic.DataFrameGroupBy.agg"]),
        (9, &["numpy.ndarray.astype"]),
    ];
    let wrong: Vec<u32> = expected
        .iter()
        .filter(|(line, want)| fqns(&a, 1, *line) != want.iter().map(|s| s.to_string()).collect())
        .map(|(line, _)| *line)
        .collect();
    let projection = a.hits.iter().any(|h| h.location == CellLocation::new(1, 8) && h.pattern_id == 4);
    check(wrong.is_empty() && projection, format!("mismatched lines {wrong:?}; x5 projection: {projection}"))
}

fn usage_patterns(engine: &Engine) -> Outcome {
    let frame = "import pandas as pd\ndf = pd.read_csv('f')";
    let user = "class Frame:\n    pass\ndf = Frame()";
    let cases = [
        ("df['xy'] = df.x * df.y", 1),
        ("df.x = 1", 2),
        ("df.x[df.x == 1] = 1", 3),
        ("x = df[['f1', 'f2']]", 4),
        ("print(df[0:20])", 5),
    ];
    let mut bad = Vec::new();
    for (src, id) in cases {
        let on_frame =
            analysis_of(engine, &NotebookDoc::from_sources([(CellKind::Code, frame), (CellKind::Code, src)]))?;
        let ids: Vec<u8> = on_frame.hits.iter().map(|h| h.pattern_id).collect();
        let on_user = analysis_of(engine, &NotebookDoc::from_sources([(CellKind::Code, user), (CellKind::Code, src)]))?;
        if ids != [id] || !on_user.hits.is_empty() {
            bad.push(format!("P{id}: {ids:?} / {} on non-frame", on_user.hits.len()));
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() { "5/5 patterns, no hits without a dataframe".into() } else { bad.join("; ") },
    )
}

fn flow_suite(engine: &Engine) -> Outcome {
    let s = cmd_bench(engine, &corpus().join("flow")).map_err(|e| e.message)?;
    check(
        s.total == 8 && s.sound == 8 && s.complete == 8,
        format!("{}/{} sound, {}/{} complete", s.sound, s.total, s.complete, s.total),
    )
}

fn micro_suite(engine: &Engine) -> Outcome {
    let s = cmd_bench(engine, &corpus().join("micro")).map_err(|e| e.message)?;
    let sound = s.sound as f64 / s.total as f64;
    let complete = s.complete as f64 / s.total as f64;
    let failing: Vec<&str> = s.cases.iter().filter(|c| !c.sound || !c.complete).map(|c| c.name.as_str()).collect();
    let unexplained: Vec<&&str> =
        failing.iter().filter(|n| !n.starts_with("decorators_") && !n.starts_with("context_")).collect();
    check(
        s.total > 0 && sound >= 0.93 && complete >= 0.93 && unexplained.is_empty(),
        format!(
            "{:.1}% sound, {:.1}% complete over {} cases; failing {failing:?}; unexplained {unexplained:?}",
            sound * 100.0,
            complete * 100.0,
            s.total
        ),
    )
}

fn realistic_notebooks(engine: &Engine) -> Outcome {
    let s = cmd_bench(engine, &corpus().join("notebooks")).map_err(|e| e.message)?;
    let mut slow = Vec::new();
    for case in &s.cases {
        let path = corpus().join("notebooks").join(&case.name).join("main.ipynb");
        let nb = load_notebook(&path).map_err(|e| e.to_string())?;
        let cells = nb.code_cells().count() as f64;
        let start = Instant::now();
        analysis_of(engine, &nb)?;
        let per_50 = start.elapsed().as_secs_f64() * 50.0 / cells.max(50.0);
        if per_50 >= 5.0 {
            slow.push(case.name.clone());
        }
    }
    check(
        s.total == 5 && s.average_precision >= 0.90 && s.average_recall >= 0.90 && slow.is_empty(),
        format!(
            "{} notebooks, P {:.3}, R {:.3}; over 5 s per 50 cells: {slow:?}",
            s.total, s.average_precision, s.average_recall
        ),
    )
}

fn headers(engine: &Engine) -> Outcome {
    let db = &engine.taxonomy;
    let (mut hit, mut total) = (0usize, 0usize);
    let mut inconsistent = Vec::new();
    let mut multi = 0usize;
    let dir = corpus().join("notebooks");
    let mut cases: Vec<PathBuf> = fs::read_dir(&dir).map_err(|e| e.to_string())?.map(|e| e.unwrap().path()).collect();
    cases.sort();
    for case in cases {
        let text = fs::read_to_string(case.join("headers.json")).map_err(|e| e.to_string())?;
        let truth: BTreeMap<String, BTreeMap<String, Vec<String>>> =
            serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let nb = load_notebook(&case.join("main.ipynb")).map_err(|e| e.to_string())?;
        let a = analysis_of(engine, &nb)?;
        let ann = a.annotations(db, &engine.stubs);
        for (cell, want) in &truth["cells"] {
            let got = tops(&a, db, cell.parse().map_err(|_| format!("bad cell {cell}"))?);
            total += want.len();
            hit += want.iter().filter(|w| got.contains(w)).count();
        }
        for (&ci, subs) in &a.classification.cells {
            let got = tops(&a, db, ci);
            let parents: BTreeSet<&str> = subs.iter().filter_map(|s| db.taxonomy.parent(s)).collect();
            let title = ann.header_cells.get(&ci).map(String::as_str).unwrap_or("");
            let listed = got.iter().all(|t| title.contains(t.as_str()));
            if parents != got.iter().map(String::as_str).collect() || !listed {
                inconsistent.push(format!("{}:{ci}", case.file_name().unwrap().to_string_lossy()));
            }
            if got.len() > 1 && title.contains(&got.join(" | ")) {
                multi += 1;
            }
        }
    }
    let recall = hit as f64 / total.max(1) as f64;

    let nb = load_notebook(&corpus().join("fixtures/motivating.ipynb")).map_err(|e| e.to_string())?;
    let a = analysis_of(engine, &nb)?;
    let ann = a.annotations(db, &engine.stubs);
    let index = ann.index_cell.unwrap_or_default();
    let struck = index.contains("<s>Visualization</s>") && !index.contains("<s>Model Training</s>");
    check(
        recall >= 0.90 && inconsistent.is_empty() && multi > 0 && struck,
        format!(
            "top-level recall {recall:.3} ({hit}/{total}); inconsistent {inconsistent:?}; multi-category headers {multi}; struck-out: {struck}"
        ),
    )
}

fn robustness(engine: &Engine) -> Outcome {
    let mut problems = Vec::new();
    let empty = NotebookDoc::from_sources([]);
    match analysis_of(engine, &empty) {
        Ok(a) if a.report.is_empty() && engine.annotate(&empty, &a) == empty => {}
        other => problems.push(format!("empty notebook: {:?}", other.map(|a| a.report.to_json_string()))),
    }

    let nb = load_notebook(&corpus().join("fixtures/motivating.ipynb")).map_err(|e| e.to_string())?;
    let bare = Engine { stubs: TypeStubDB::empty(), taxonomy: TaxonomyDB::shipped() };
    if let Err(e) = analysis_of(&bare, &nb) {
        problems.push(format!("zero stubs: {e}"));
    }

    let unknown = NotebookDoc::from_sources([
        (CellKind::Code, "import mystery\nfrom enigma import thing"),
        (CellKind::Code, "x = mystery.load('a')\nthing(x).run()"),
    ]);
    match analysis_of(engine, &unknown) {
        Ok(a) if a.report.sites().all(|s| s.is_unresolved()) => {}
        Ok(a) => problems.push(format!("unresolved-only resolved something: {}", a.report.to_json_string())),
        Err(e) => problems.push(format!("unresolved-only: {e}")),
    }

    let once = annotate(engine, &nb)?;
    let twice = annotate(engine, &once)?;
    let again = annotate(engine, &nb)?;
    if once.to_json_string() != twice.to_json_string() {
        problems.push("double annotation changed the notebook".into());
    }
    if once.to_json_string() != again.to_json_string() {
        problems.push("reruns differ".into());
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            "empty, zero-stub and unresolved-only notebooks; idempotent, byte-identical reruns".into()
        } else {
            problems.join("; ")
        },
    )
}

fn annotate(engine: &Engine, nb: &NotebookDoc) -> Result<NotebookDoc, String> {
    let a = analyze(nb, &engine.stubs, &engine.taxonomy, Options::default()).map_err(|e| e.to_string())?;
    Ok(apply(nb, &a.annotations(&engine.taxonomy, &engine.stubs)))
}

fn main() -> ExitCode {
    let engine = Engine::shipped();
    let criteria: [(&str, fn(&Engine) -> Outcome); 8] = [
        ("motivating example", motivating_example),
        ("typed access chains", typed_access_chains),
        ("usage patterns", usage_patterns),
        ("flow-sensitivity suite", flow_suite),
        ("micro-benchmark", micro_suite),
        ("realistic notebooks", realistic_notebooks),
        ("cell headers", headers),
        ("robustness", robustness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run(&engine) {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
