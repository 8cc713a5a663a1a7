// SPDX-License-Identifier: Apache-2.0

//! Per-cell callsite extraction, transitive attribution through user
//! functions, and precision/recall scoring against ground truth.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::eag::{ExtendedAssignmentGraph, Value};
use crate::frontend::ir::Expr;
use crate::frontend::{ImportTable, ScopeId};
use crate::notebook::{CellLineMap, CellLocation};
use crate::stubs::resolve_fqn;

/// Callee name for calls whose target could not be determined.
pub const UNRESOLVED: &str = "<unresolved>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Direct,
    Transitive,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallSite {
    pub location: CellLocation,
    pub callee_fqns: BTreeSet<String>,
    pub origin: Origin,
}

impl CallSite {
    pub fn is_unresolved(&self) -> bool {
        self.callee_fqns.contains(UNRESOLVED)
    }
}

/// Callsites grouped by code cell, sorted by line, fqns and origin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallSiteReport {
    cells: BTreeMap<u32, Vec<CallSite>>,
}

impl CallSiteReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, site: CallSite) {
        let sites = self.cells.entry(site.location.code_index).or_default();
        if let Err(pos) = sites.binary_search(&site) {
            sites.insert(pos, site);
        }
    }

    pub fn cells(&self) -> &BTreeMap<u32, Vec<CallSite>> {
        &self.cells
    }

    pub fn sites(&self) -> impl Iterator<Item = &CallSite> {
        self.cells.values().flatten()
    }

    pub fn cell(&self, code_index: u32) -> &[CallSite] {
        self.cells.get(&code_index).map_or(&[], Vec::as_slice)
    }

    /// All fqns recorded at a location, any origin.
    pub fn fqns_at(&self, loc: CellLocation) -> BTreeSet<&str> {
        self.cell(loc.code_index)
            .iter()
            .filter(|s| s.location == loc)
            .flat_map(|s| s.callee_fqns.iter().map(String::as_str))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `(location, fqn)` pairs, the unit of scoring.
    pub fn pairs(&self) -> BTreeSet<(CellLocation, String)> {
        self.sites().flat_map(|s| s.callee_fqns.iter().map(move |f| (s.location, f.clone()))).collect()
    }

    /// `{"cells": {"<code_index>": {"<cell_line>": [fqn, ...]}}}` with
    /// numeric key order and sorted fqn lists.
    pub fn to_json(&self) -> Json {
        pairs_to_json(&self.pairs())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }
}

fn pairs_to_json(pairs: &BTreeSet<(CellLocation, String)>) -> Json {
    let mut cells: BTreeMap<u32, BTreeMap<u32, Vec<&str>>> = BTreeMap::new();
    for (loc, fqn) in pairs {
        cells.entry(loc.code_index).or_default().entry(loc.cell_line).or_default().push(fqn);
    }
    let mut out = Map::new();
    for (ci, lines) in cells {
        let mut m = Map::new();
        for (line, fqns) in lines {
            m.insert(line.to_string(), Json::from(fqns));
        }
        out.insert(ci.to_string(), Json::Object(m));
    }
    let mut root = Map::new();
    root.insert("cells".into(), Json::Object(out));
    Json::Object(root)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TruthFormatError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Shape { path: String, message: String },
}

fn shape(path: impl Into<String>, message: impl Into<String>) -> TruthFormatError {
    TruthFormatError::Shape { path: path.into(), message: message.into() }
}

/// Expected `(location, fqn)` pairs, in the report JSON format.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub pairs: BTreeSet<(CellLocation, String)>,
}

impl GroundTruth {
    pub fn parse(text: &str) -> Result<Self, TruthFormatError> {
        let root: Json = serde_json::from_str(text).map_err(|e| TruthFormatError::Json(e.to_string()))?;
        let cells = root
            .as_object()
            .and_then(|o| o.get("cells"))
            .ok_or_else(|| shape("$", "expected an object with a \"cells\" key"))?
            .as_object()
            .ok_or_else(|| shape("$.cells", "expected an object"))?;
        let index = |key: &str, path: &str| -> Result<u32, TruthFormatError> {
            key.parse::<u32>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| shape(path, format!("key {key:?} is not a positive integer")))
        };
        let mut pairs = BTreeSet::new();
        for (ci, lines) in cells {
            let path = format!("$.cells.{ci}");
            let code_index = index(ci, &path)?;
            let lines = lines.as_object().ok_or_else(|| shape(&path, "expected an object"))?;
            for (line, fqns) in lines {
                let path = format!("{path}.{line}");
                let cell_line = index(line, &path)?;
                let fqns = fqns.as_array().ok_or_else(|| shape(&path, "expected a list of fqns"))?;
                for f in fqns {
                    let f = f.as_str().ok_or_else(|| shape(&path, "fqn is not a string"))?;
                    pairs.insert((CellLocation::new(code_index, cell_line), f.to_string()));
                }
            }
        }
        Ok(GroundTruth { pairs })
    }

    pub fn from_report(report: &CallSiteReport) -> Self {
        GroundTruth { pairs: report.pairs() }
    }

    pub fn to_json(&self) -> Json {
        pairs_to_json(&self.pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl PrecisionRecall {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if a + b == 0 { 1.0 } else { a as f64 / (a + b) as f64 };
        PrecisionRecall { precision: ratio(tp, fp), recall: ratio(tp, fn_), tp, fp, fn_ }
    }

    /// No missing truth pair.
    pub fn sound(&self) -> bool {
        self.fn_ == 0
    }

    /// No extra pair.
    pub fn complete(&self) -> bool {
        self.fp == 0
    }

    pub fn to_json(&self) -> Json {
        serde_json::json!({
            "precision": self.precision,
            "recall": self.recall,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn_,
        })
    }
}

pub fn score_pairs(
    found: &BTreeSet<(CellLocation, String)>,
    truth: &BTreeSet<(CellLocation, String)>,
) -> PrecisionRecall {
    let tp = found.iter().filter(|p| p.1 != UNRESOLVED && truth.contains(*p)).count();
    let fp = found.len() - tp;
    let fn_ = truth.len() - truth.iter().filter(|p| p.1 != UNRESOLVED && found.contains(*p)).count();
    PrecisionRecall::from_counts(tp, fp, fn_)
}

pub fn score(found: &CallSiteReport, truth: &GroundTruth) -> PrecisionRecall {
    score_pairs(&found.pairs(), &truth.pairs)
}

/// Mean precision and recall over several results, each weighted equally.
pub fn average(results: &[PrecisionRecall]) -> (f64, f64) {
    if results.is_empty() {
        return (1.0, 1.0);
    }
    let n = results.len() as f64;
    (results.iter().map(|r| r.precision).sum::<f64>() / n, results.iter().map(|r| r.recall).sum::<f64>() / n)
}

/// Resolves the callee of one call expression.
pub fn callee_fqns<'a>(
    eag: &mut ExtendedAssignmentGraph<'a>,
    imports: &ImportTable,
    func: &'a Expr,
    scope: ScopeId,
) -> BTreeSet<String> {
    let values = eag.eval(func, scope);
    let mut out = BTreeSet::new();
    for v in &values {
        if let Some(f) = value_fqn(eag, v) {
            out.insert(f);
        }
    }
    if out.is_empty() {
        if let Some(f) = func.dotted_path().and_then(|d| resolve_fqn(imports, &d, eag.db())) {
            if eag.db().function(&f).is_some() || eag.db().is_class(&f) {
                out.insert(f);
            }
        }
    }
    out
}

fn value_fqn(eag: &mut ExtendedAssignmentGraph<'_>, v: &Value) -> Option<String> {
    let scopes = &eag.ir().scopes;
    match v {
        Value::Function(f) | Value::BoundMethod(f, _) | Value::Class(f) => Some(scopes.fqn(*f)),
        Value::ExtFunction(f) | Value::ExtClass(f) => Some(f.clone()),
        Value::ExtInstance(t) => {
            let fqn = format!("{t}.__call__");
            eag.db().function(&fqn).map(|_| fqn)
        }
        Value::ContainerMethod(kind, _, name) => {
            let fqn = format!("{}.{name}", kind.builtin());
            eag.db().function(&fqn).map(|_| fqn)
        }
        Value::Instance(c) => {
            let c = *c;
            eag.instance_attr(c, "__call__").iter().find_map(|t| match t {
                Value::BoundMethod(f, _) | Value::Function(f) => Some(eag.ir().scopes.fqn(*f)),
                _ => None,
            })
        }
        Value::Super(..) | Value::Module(_) | Value::Generator(_) | Value::Container(..) | Value::Unknown => None,
    }
}

/// One direct callsite per call expression, at the call's own line.
pub fn extract_callsites(
    eag: &mut ExtendedAssignmentGraph<'_>,
    imports: &ImportTable,
    map: &CellLineMap,
) -> CallSiteReport {
    let ir = eag.ir();
    let mut report = CallSiteReport::new();
    for (scope, expr) in ir.index().calls {
        let Some(location) = map.location(expr.line) else { continue };
        let crate::frontend::ir::ExprKind::Call(call) = &expr.kind else { continue };
        let mut fqns = callee_fqns(eag, imports, &call.func, scope);
        if fqns.is_empty() {
            fqns.insert(UNRESOLVED.to_string());
        }
        report.push(CallSite { location, callee_fqns: fqns, origin: Origin::Direct });
    }
    report
}

/// User functions a value invokes when called.
fn user_targets(eag: &mut ExtendedAssignmentGraph<'_>, v: &Value) -> Vec<ScopeId> {
    match v {
        Value::Function(f) | Value::BoundMethod(f, _) => {
            if eag.is_generator(*f) {
                Vec::new()
            } else {
                vec![*f]
            }
        }
        Value::Class(c) => eag.init_targets(*c),
        Value::Instance(c) => {
            let c = *c;
            eag.instance_attr(c, "__call__")
                .iter()
                .filter_map(|t| match t {
                    Value::BoundMethod(f, _) | Value::Function(f) => Some(*f),
                    _ => None,
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

/// Adds, at each cell-level call of a user function, every callsite
/// reachable inside that function's body through user calls. Existing
/// direct pairs at the location take precedence.
pub fn attribute_transitive(
    report: &CallSiteReport,
    eag: &mut ExtendedAssignmentGraph<'_>,
    imports: &ImportTable,
    map: &CellLineMap,
) -> CallSiteReport {
    let ir = eag.ir();
    let mut edges: BTreeMap<ScopeId, BTreeSet<ScopeId>> = BTreeMap::new();
    let mut body_fqns: BTreeMap<ScopeId, BTreeSet<String>> = BTreeMap::new();
    let mut roots: Vec<(CellLocation, Vec<ScopeId>)> = Vec::new();
    for (scope, expr) in ir.index().calls {
        let crate::frontend::ir::ExprKind::Call(call) = &expr.kind else { continue };
        let values = eag.eval(&call.func, scope);
        let mut targets = Vec::new();
        for v in &values {
            targets.extend(user_targets(eag, v));
        }
        match ir.scopes.enclosing_function(scope) {
            Some(region) => {
                edges.entry(region).or_default().extend(targets);
                let fqns = callee_fqns(eag, imports, &call.func, scope);
                body_fqns.entry(region).or_default().extend(fqns);
            }
            None => {
                if let Some(loc) = map.location(expr.line) {
                    roots.push((loc, targets));
                }
            }
        }
    }
    for (caller, callee) in eag.implicit_edges() {
        edges.entry(*caller).or_default().insert(*callee);
    }
    for (line, f) in eag.implicit_roots() {
        if let Some(loc) = map.location(*line) {
            roots.push((loc, vec![*f]));
        }
    }
    let mut out = report.clone();
    for (loc, targets) in roots {
        let mut seen: BTreeSet<ScopeId> = BTreeSet::new();
        let mut queue: VecDeque<ScopeId> = targets.into_iter().collect();
        let mut gathered = BTreeSet::new();
        while let Some(f) = queue.pop_front() {
            if !seen.insert(f) {
                continue;
            }
            if let Some(fqns) = body_fqns.get(&f) {
                gathered.extend(fqns.iter().cloned());
            }
            if let Some(next) = edges.get(&f) {
                queue.extend(next.iter().copied());
            }
        }
        let direct: BTreeSet<String> = report
            .cell(loc.code_index)
            .iter()
            .filter(|s| s.location == loc && s.origin == Origin::Direct)
            .flat_map(|s| s.callee_fqns.iter().cloned())
            .collect();
        for fqn in gathered {
            if fqn == UNRESOLVED || direct.contains(&fqn) {
                continue;
            }
            out.push(CallSite { location: loc, callee_fqns: BTreeSet::from([fqn]), origin: Origin::Transitive });
        }
    }
    out
}
