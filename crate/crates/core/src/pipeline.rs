// SPDX-License-Identifier: Apache-2.0

//! End-to-end analysis of one notebook: flatten, parse, build the graph,
//! extract and attribute callsites, classify, and annotate.

use std::collections::{BTreeMap, BTreeSet};

use crate::annotate::{apply, build_annotations, AnnotationSet, Operations};
use crate::callgraph::{attribute_transitive, callee_fqns, extract_callsites, CallSiteReport};
use crate::classify::{classify_cells, import_locations, match_patterns, CellClassification, PatternHit, TaxonomyDB};
use crate::eag::ExtendedAssignmentGraph;
use crate::frontend::ir::{walk_body, ExprKind, Item, StmtKind};
use crate::frontend::{parse_script, DefUseChains, FrontendError, ImportTable, ScopeId};
use crate::notebook::{flatten, CompositeScript, NotebookDoc};
use crate::stubs::TypeStubDB;

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    /// Keep a Graphviz rendering of the assignment graph.
    pub dump_eag: bool,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub script: CompositeScript,
    /// Direct and transitive callsites.
    pub report: CallSiteReport,
    pub hits: Vec<PatternHit>,
    pub classification: CellClassification,
    pub operations: Operations,
    pub code_cells: usize,
    pub eag_dot: Option<String>,
}

pub fn analyze(
    nb: &NotebookDoc,
    stubs: &TypeStubDB,
    taxonomy: &TaxonomyDB,
    options: Options,
) -> Result<Analysis, FrontendError> {
    let script = flatten(nb);
    let mut ir = parse_script(&script)?;
    ir.expand_star_imports(|m| stubs.star_exports(m));
    let duc = DefUseChains::build(&ir);
    let imports = ImportTable::build(&ir);
    let mut eag = ExtendedAssignmentGraph::build(&ir, &duc, stubs);
    let direct = extract_callsites(&mut eag, &imports, &script.map);
    let report = attribute_transitive(&direct, &mut eag, &imports, &script.map);
    let hits = match_patterns(&mut eag, &script.map, taxonomy);
    let classification = classify_cells(&report, &hits, &import_locations(&ir, &script.map), taxonomy);

    let mut import_paths: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
    walk_body(&ir.body, ScopeId::MODULE, &mut |_, item| {
        let Item::Stmt(s) = item else { return };
        let StmtKind::Import(bindings) = &s.kind else { return };
        if let Some(loc) = script.map.location(s.line) {
            import_paths.entry(loc.code_index).or_default().extend(bindings.iter().map(|b| b.path.clone()));
        }
    });
    let mut operations = Operations::collect(&report, &hits, &import_paths, taxonomy);
    for (scope, expr) in ir.index().calls {
        let ExprKind::Call(call) = &expr.kind else { continue };
        let Some(loc) = script.map.location(expr.line) else { continue };
        for fqn in callee_fqns(&mut eag, &imports, &call.func, scope) {
            operations.arguments.entry((loc.code_index, fqn)).or_default().insert(call.arg_text.clone());
        }
    }
    let eag_dot = options.dump_eag.then(|| eag.to_dot());
    Ok(Analysis { code_cells: script.map.code_cell_count(), script, report, hits, classification, operations, eag_dot })
}

impl Analysis {
    pub fn annotations(&self, taxonomy: &TaxonomyDB, stubs: &TypeStubDB) -> AnnotationSet {
        build_annotations(self.code_cells, &self.classification, &self.operations, &taxonomy.taxonomy, Some(stubs))
    }
}

/// Analyzes and annotates; earlier tool cells are replaced.
pub fn annotate_notebook(
    nb: &NotebookDoc,
    stubs: &TypeStubDB,
    taxonomy: &TaxonomyDB,
) -> Result<(NotebookDoc, Analysis), FrontendError> {
    let analysis = analyze(nb, stubs, taxonomy, Options::default())?;
    let out = apply(nb, &analysis.annotations(taxonomy, stubs));
    Ok((out, analysis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notebook::{CellKind, CellLocation};

    #[test]
    fn syntax_errors_carry_their_cell_location() {
        let nb = NotebookDoc::from_sources([(CellKind::Code, "x = 1"), (CellKind::Code, "y = (")]);
        let err = analyze(&nb, &TypeStubDB::shipped(), &TaxonomyDB::shipped(), Options::default()).unwrap_err();
        assert!(matches!(err, FrontendError::Syntax { location, .. } if location.code_index == 2), "{err}");
    }

    #[test]
    fn empty_notebook_has_no_annotations() {
        let nb = NotebookDoc::from_sources([]);
        let (out, a) = annotate_notebook(&nb, &TypeStubDB::shipped(), &TaxonomyDB::shipped()).unwrap();
        assert!(a.report.is_empty());
        assert_eq!(out, nb);
    }

    #[test]
    fn shell_lines_keep_locations() {
        let nb =
            NotebookDoc::from_sources([(CellKind::Code, "%matplotlib inline\nimport numpy as np\na = np.zeros(2)")]);
        let a = analyze(&nb, &TypeStubDB::shipped(), &TaxonomyDB::shipped(), Options { dump_eag: true }).unwrap();
        assert_eq!(a.report.fqns_at(CellLocation::new(1, 3)), BTreeSet::from(["numpy.zeros"]));
        assert!(a.eag_dot.unwrap().contains("numpy.ndarray"));
    }
}
