// SPDX-License-Identifier: Apache-2.0

//! Index of ML operations, per-cell headers and table of contents,
//! rendered as markdown cells with HTML anchors and `<details>` blocks.

use std::collections::{BTreeMap, BTreeSet};

use crate::callgraph::{CallSiteReport, UNRESOLVED};
use crate::classify::{CellClassification, PatternHit, Taxonomy, TaxonomyDB, LIBRARY_LOADING};
use crate::notebook::{AnnotationKind, AnnotationMarker, Cell, NotebookDoc};
use crate::stubs::TypeStubDB;

pub const INDEX_ANCHOR: &str = "hg-index";
pub const TOC_ANCHOR: &str = "hg-toc";

/// What a cell contributes to one sub-category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Entry {
    Function(String),
    Import(String),
    Pattern(u8),
}

impl Entry {
    fn library(&self) -> &str {
        match self {
            Entry::Function(p) | Entry::Import(p) => p.split('.').next().unwrap_or(p),
            Entry::Pattern(_) => "dataframe patterns",
        }
    }
}

/// Sub-category -> code cell -> entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Operations {
    pub by_sub: BTreeMap<String, BTreeMap<u32, BTreeSet<Entry>>>,
    /// Argument texts seen per `(code cell, fqn)`.
    pub arguments: BTreeMap<(u32, String), BTreeSet<String>>,
}

impl Operations {
    pub fn collect(
        report: &CallSiteReport,
        hits: &[PatternHit],
        imports: &BTreeMap<u32, BTreeSet<String>>,
        db: &TaxonomyDB,
    ) -> Self {
        let mut ops = Operations::default();
        for site in report.sites() {
            for fqn in &site.callee_fqns {
                if fqn == UNRESOLVED {
                    continue;
                }
                for sub in db.classify_callsite(fqn) {
                    ops.add(sub, site.location.code_index, Entry::Function(fqn.clone()));
                }
            }
        }
        for hit in hits {
            for sub in &hit.categories {
                ops.add(sub.clone(), hit.location.code_index, Entry::Pattern(hit.pattern_id));
            }
        }
        if db.taxonomy.is_sub(LIBRARY_LOADING) {
            for (ci, paths) in imports {
                for p in paths {
                    ops.add(LIBRARY_LOADING.to_string(), *ci, Entry::Import(p.clone()));
                }
            }
        }
        ops
    }

    fn add(&mut self, sub: String, code_index: u32, entry: Entry) {
        self.by_sub.entry(sub).or_default().entry(code_index).or_default().insert(entry);
    }

    fn cell_entries(&self, code_index: u32) -> BTreeSet<&Entry> {
        self.by_sub.values().filter_map(|cells| cells.get(&code_index)).flatten().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub title: String,
    pub anchor: String,
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    pub index_cell: Option<String>,
    /// code_index -> header source
    pub header_cells: BTreeMap<u32, String>,
    pub toc_cell: Option<String>,
}

impl AnnotationSet {
    pub fn is_empty(&self) -> bool {
        self.index_cell.is_none() && self.header_cells.is_empty() && self.toc_cell.is_none()
    }
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// Lowercase words joined by `-`.
pub fn slug(title: &str) -> String {
    let mut out = String::new();
    for c in title.chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("cell");
    }
    out
}

fn pattern_label(id: u8) -> &'static str {
    match id {
        1 => "new column from column arithmetic",
        2 => "scalar assigned to a column",
        3 => "masked assignment to a column",
        4 => "column subset selection",
        _ => "printed dataframe slice",
    }
}

struct Render<'a> {
    ops: &'a Operations,
    docs: Option<&'a TypeStubDB>,
}

impl Render<'_> {
    fn entry(&self, code_index: u32, e: &Entry) -> String {
        match e {
            Entry::Function(fqn) => {
                let args = self.ops.arguments.get(&(code_index, fqn.clone()));
                let doc = self.docs.and_then(|d| d.docstring(fqn));
                if args.is_none() && doc.is_none() {
                    return format!("<li><code>{}</code></li>", escape(fqn));
                }
                let mut body = String::new();
                for a in args.into_iter().flatten() {
                    body.push_str(&format!("<code>{}</code><br>", escape(a)));
                }
                if let Some(d) = doc {
                    body.push_str(&format!("<i>{}</i>", escape(d)));
                }
                format!("<li><details><summary><code>{}</code></summary>{body}</details></li>", escape(fqn))
            }
            Entry::Import(p) => format!("<li>import <code>{}</code></li>", escape(p)),
            Entry::Pattern(id) => format!("<li>{}</li>", pattern_label(*id)),
        }
    }

    /// Entries grouped by library, libraries sorted by name.
    fn libraries<'e>(&self, code_index: u32, entries: impl IntoIterator<Item = &'e Entry>, out: &mut Vec<String>) {
        let mut groups: BTreeMap<&str, Vec<&Entry>> = BTreeMap::new();
        for e in entries {
            groups.entry(e.library()).or_default().push(e);
        }
        for (lib, items) in groups {
            out.push(format!("<li><b>{}</b><ul>", escape(lib)));
            for e in items {
                out.push(self.entry(code_index, e));
            }
            out.push("</ul></li>".to_string());
        }
    }
}

/// Headers for classified cells, listing every top-level category of the
/// cell. Anchors are unique; repeated titles get `-2`, `-3`, ...
pub fn build_headers(
    classification: &CellClassification,
    taxonomy: &Taxonomy,
    ops: &Operations,
    docs: Option<&TypeStubDB>,
) -> BTreeMap<u32, Header> {
    let render = Render { ops, docs };
    let mut used: BTreeSet<String> = BTreeSet::from([INDEX_ANCHOR.to_string(), TOC_ANCHOR.to_string()]);
    let mut out = BTreeMap::new();
    for &ci in classification.cells.keys() {
        let tops = classification.top_level(ci, taxonomy);
        if tops.is_empty() {
            continue;
        }
        let title = tops.join(" | ");
        let base = slug(&title);
        let mut anchor = base.clone();
        let mut n = 1;
        while used.contains(&anchor) {
            n += 1;
            anchor = format!("{base}-{n}");
        }
        used.insert(anchor.clone());
        let mut lines = vec![format!("<a name=\"{anchor}\"></a>"), format!("### {}", escape(&title))];
        let functions: Vec<&Entry> =
            ops.cell_entries(ci).into_iter().filter(|e| matches!(e, Entry::Function(_))).collect();
        if !functions.is_empty() {
            lines.push("<details><summary>Functions in this cell</summary><ul>".to_string());
            render.libraries(ci, functions, &mut lines);
            lines.push("</ul></details>".to_string());
        }
        lines.push(format!("<a href=\"#{INDEX_ANCHOR}\">back to top</a>"));
        out.insert(ci, Header { title, anchor, source: lines.join("\n") });
    }
    out
}

/// One linked entry per header in cell order; `None` without headers.
pub fn build_toc(headers: &BTreeMap<u32, Header>) -> Option<String> {
    if headers.is_empty() {
        return None;
    }
    let mut lines =
        vec![format!("<a name=\"{TOC_ANCHOR}\"></a>"), "## Table of Contents".to_string(), "<ul>".to_string()];
    for (ci, h) in headers {
        lines.push(format!("<li><a href=\"#{}\">{}</a> (cell #{ci})</li>", h.anchor, escape(&h.title)));
    }
    lines.push("</ul>".to_string());
    Some(lines.join("\n"))
}

/// Nested index: top-level category, sub-category, cell, library.
/// Categories without entries are struck out.
pub fn build_index(
    taxonomy: &Taxonomy,
    ops: &Operations,
    headers: &BTreeMap<u32, Header>,
    docs: Option<&TypeStubDB>,
) -> String {
    let render = Render { ops, docs };
    let mut lines = vec![format!("<a name=\"{INDEX_ANCHOR}\"></a>"), "## Index of ML Operations".to_string()];
    for (top, subs) in taxonomy.top_level() {
        let filled = subs.iter().any(|s| ops.by_sub.get(s).is_some_and(|c| !c.is_empty()));
        if !filled {
            lines.push(format!("<details><summary><s>{}</s></summary><ul>", escape(top)));
        } else {
            lines.push(format!("<details open><summary><b>{}</b></summary><ul>", escape(top)));
        }
        for sub in subs {
            let cells = ops.by_sub.get(sub).filter(|c| !c.is_empty());
            let Some(cells) = cells else {
                lines.push(format!("<li><s>{}</s></li>", escape(sub)));
                continue;
            };
            lines.push(format!("<li><details><summary>{}</summary><ul>", escape(sub)));
            for (ci, entries) in cells {
                let link = match headers.get(ci) {
                    Some(h) => format!(" <a href=\"#{}\">goto cell # {ci}</a>", h.anchor),
                    None => String::new(),
                };
                lines.push(format!("<li><details><summary>cell #{ci}{link}</summary><ul>"));
                render.libraries(*ci, entries, &mut lines);
                lines.push("</ul></details></li>".to_string());
            }
            lines.push("</ul></details></li>".to_string());
        }
        lines.push("</ul></details>".to_string());
    }
    lines.join("\n")
}

/// All three artifacts. A notebook without code cells gets none.
pub fn build_annotations(
    code_cells: usize,
    classification: &CellClassification,
    ops: &Operations,
    taxonomy: &Taxonomy,
    docs: Option<&TypeStubDB>,
) -> AnnotationSet {
    if code_cells == 0 {
        return AnnotationSet::default();
    }
    let headers = build_headers(classification, taxonomy, ops, docs);
    AnnotationSet {
        index_cell: Some(build_index(taxonomy, ops, &headers, docs)),
        toc_cell: build_toc(&headers),
        header_cells: headers.into_iter().map(|(ci, h)| (ci, h.source)).collect(),
    }
}

/// Removes earlier tool cells, then inserts the index at the top, the TOC
/// after it, and each header right before its code cell.
pub fn apply(nb: &NotebookDoc, ann: &AnnotationSet) -> NotebookDoc {
    let mut out = nb.clone();
    let with_ids = nb.nbformat_minor >= 5;
    let id = |s: String| with_ids.then_some(s);
    let kept: Vec<Cell> = nb.cells.iter().filter(|c| c.annotation.is_none()).cloned().collect();
    let mut cells = Vec::with_capacity(kept.len() + ann.header_cells.len() + 2);
    if let Some(src) = &ann.index_cell {
        let marker = AnnotationMarker::new(AnnotationKind::Index);
        cells.push(Cell::generated_markdown(src, marker, id(INDEX_ANCHOR.to_string()).as_deref()));
    }
    if let Some(src) = &ann.toc_cell {
        let marker = AnnotationMarker::new(AnnotationKind::Toc);
        cells.push(Cell::generated_markdown(src, marker, id(TOC_ANCHOR.to_string()).as_deref()));
    }
    let mut code_index = 0u32;
    for cell in kept {
        if cell.is_code() {
            code_index += 1;
            if let Some(src) = ann.header_cells.get(&code_index) {
                let marker = AnnotationMarker::new(AnnotationKind::Header);
                let cid = id(format!("hg-header-{code_index}"));
                cells.push(Cell::generated_markdown(src, marker, cid.as_deref()));
            }
        }
        cells.push(cell);
    }
    out.cells = cells;
    out.renumber();
    out
}

/// Anchor names defined and link targets used in tool cells.
pub fn anchors(nb: &NotebookDoc) -> (Vec<String>, Vec<String>) {
    let grab = |src: &str, prefix: &str| -> Vec<String> {
        src.split(prefix).skip(1).filter_map(|rest| rest.split('"').next().map(String::from)).collect()
    };
    let mut names = Vec::new();
    let mut links = Vec::new();
    for c in nb.cells.iter().filter(|c| c.annotation.is_some()) {
        names.extend(grab(&c.source, "name=\""));
        links.extend(grab(&c.source, "href=\"#"));
    }
    (names, links)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notebook::CellKind;

    fn classification(cells: &[(u32, &[&str])]) -> CellClassification {
        CellClassification {
            cells: cells.iter().map(|(ci, subs)| (*ci, subs.iter().map(|s| s.to_string()).collect())).collect(),
        }
    }

    fn ops(entries: &[(&str, u32, &str)]) -> Operations {
        let mut o = Operations::default();
        for (sub, ci, fqn) in entries {
            o.add(sub.to_string(), *ci, Entry::Function(fqn.to_string()));
        }
        o
    }

    #[test]
    fn slugs_are_lowercase_words() {
        assert_eq!(slug("Model Building and Training"), "model-building-and-training");
        assert_eq!(slug("Generic Operations | Feature Engineering"), "generic-operations-feature-engineering");
        assert_eq!(slug("!!"), "cell");
    }

    #[test]
    fn headers_list_every_top_level_category() {
        let db = TaxonomyDB::shipped();
        let c = classification(&[(1, &["Library Loading"]), (3, &["Model Training", "Data Loading"]), (4, &[])]);
        let h = build_headers(&c, &db.taxonomy, &Operations::default(), None);
        assert_eq!(h.len(), 2);
        assert_eq!(h[&3].title, "Data Preparation and Exploration | Model Building and Training");
        assert!(h[&3].source.contains("### Data Preparation and Exploration | Model Building and Training"));
        assert!(!h.contains_key(&4));
    }

    #[test]
    fn repeated_titles_get_distinct_anchors() {
        let db = TaxonomyDB::shipped();
        let c = classification(&[(2, &["Model Training"]), (5, &["Model Training"]), (7, &["Model Training"])]);
        let h = build_headers(&c, &db.taxonomy, &Operations::default(), None);
        let anchors: Vec<_> = h.values().map(|x| x.anchor.as_str()).collect();
        assert_eq!(
            anchors,
            ["model-building-and-training", "model-building-and-training-2", "model-building-and-training-3"]
        );
        let toc = build_toc(&h).unwrap();
        assert_eq!(toc.matches("<li>").count(), 3);
        assert!(build_toc(&BTreeMap::new()).is_none());
    }

    #[test]
    fn empty_categories_are_struck_out() {
        let db = TaxonomyDB::shipped();
        let index = build_index(&db.taxonomy, &Operations::default(), &BTreeMap::new(), None);
        for (top, subs) in db.taxonomy.top_level() {
            assert!(index.contains(&format!("<s>{top}</s>")));
            for s in subs {
                assert!(index.contains(&format!("<s>{s}</s>")));
            }
        }
    }

    #[test]
    fn index_lists_cells_in_order_with_links() {
        let db = TaxonomyDB::shipped();
        let c = classification(&[(2, &["Model Training"]), (5, &["Model Training"])]);
        let o = ops(&[
            ("Model Training", 5, "keras.engine.sequential.Sequential.fit"),
            ("Model Training", 2, "sklearn.linear_model._logistic.LogisticRegressionCV.fit"),
        ]);
        let h = build_headers(&c, &db.taxonomy, &o, None);
        let index = build_index(&db.taxonomy, &o, &h, None);
        let first = index.find("cell #2").unwrap();
        let second = index.find("cell #5").unwrap();
        assert!(first < second);
        assert!(index.contains("<a href=\"#model-building-and-training-2\">goto cell # 5</a>"));
        assert!(index.contains("<s>Visualization</s>"));
        assert!(!index.contains("<s>Model Training</s>"));
    }

    #[test]
    fn docstrings_make_entries_expandable() {
        let db = TaxonomyDB::shipped();
        let stubs = TypeStubDB::shipped();
        let mut o = ops(&[("Data Loading", 1, "seaborn.utils.load_dataset")]);
        o.arguments.insert((1, "seaborn.utils.load_dataset".into()), BTreeSet::from(["(\"iris\")".to_string()]));
        let index = build_index(&db.taxonomy, &o, &BTreeMap::new(), Some(&stubs));
        assert!(index.contains(
            "<details><summary><code>seaborn.utils.load_dataset</code></summary><code>(&quot;iris&quot;)</code><br><i>"
        ));
        let plain = build_index(&db.taxonomy, &ops(&[("Data Loading", 1, "x.y")]), &BTreeMap::new(), None);
        assert!(plain.contains("<li><code>x.y</code></li>"));
    }

    #[test]
    fn apply_is_idempotent_and_preserves_code() {
        let db = TaxonomyDB::shipped();
        let nb = NotebookDoc::from_sources([
            (CellKind::Markdown, "# My notes"),
            (CellKind::Code, "import numpy"),
            (CellKind::Code, "x = 1"),
        ]);
        let c = classification(&[(1, &["Library Loading"])]);
        let ann = build_annotations(2, &c, &Operations::default(), &db.taxonomy, None);
        let once = apply(&nb, &ann);
        let twice = apply(&once, &ann);
        assert_eq!(once.to_json_string(), twice.to_json_string());
        let kinds: Vec<_> = once.cells.iter().map(|c| c.annotation.as_ref().map(|m| m.kind)).collect();
        assert_eq!(
            kinds,
            [Some(AnnotationKind::Index), Some(AnnotationKind::Toc), None, Some(AnnotationKind::Header), None, None]
        );
        let code = |n: &NotebookDoc| n.code_cells().map(|c| c.source.clone()).collect::<Vec<_>>();
        assert_eq!(code(&nb), code(&once));
        assert_eq!(once.cells[2].source, "# My notes");
        assert_eq!(apply(&nb, &AnnotationSet::default()), nb);
    }

    #[test]
    fn every_link_target_exists_once() {
        let db = TaxonomyDB::shipped();
        let nb = NotebookDoc::from_sources([(CellKind::Code, "a"), (CellKind::Code, "b"), (CellKind::Code, "c")]);
        let c = classification(&[(1, &["Model Training"]), (2, &["Model Training"]), (3, &["Visualization"])]);
        let o = ops(&[("Model Training", 1, "k.fit"), ("Model Training", 2, "k.fit"), ("Visualization", 3, "m.plot")]);
        let out = apply(&nb, &build_annotations(3, &c, &o, &db.taxonomy, None));
        let (names, links) = anchors(&out);
        let unique: BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert!(!links.is_empty());
        for l in links {
            assert!(unique.contains(&l), "{l}");
        }
    }
}
