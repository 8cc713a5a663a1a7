// SPDX-License-Identifier: Apache-2.0

//! Taxonomy of ML operations, the callee-to-category rule database, and
//! type-guarded dataframe usage patterns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use thiserror::Error;

use crate::callgraph::{CallSiteReport, UNRESOLVED};
use crate::eag::{ExtendedAssignmentGraph, Value};
use crate::frontend::ir::{walk_body, Expr, ExprKind, Item, Literal, StmtKind, Target, UnaryOp};
use crate::frontend::ScopeId;
use crate::notebook::{CellLineMap, CellLocation};

/// Type whose instances the usage patterns require.
pub const DATAFRAME: &str = "pandas.core.frame.DataFrame";

/// Sub-category assigned to cells containing import statements.
pub const LIBRARY_LOADING: &str = "Library Loading";

const SHIPPED: &str = include_str!("../data/taxonomy.json");

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Format(String),
    #[error("duplicate key {key:?} in {section}")]
    DuplicateKey { section: &'static str, key: String },
    #[error("sub-category {sub:?} listed under both {first:?} and {second:?}")]
    DuplicateSubCategory { sub: String, first: String, second: String },
    #[error("rule {rule:?} refers to unknown sub-category {sub:?}")]
    UnknownCategory { rule: String, sub: String },
    #[error("rule {0:?} has no categories")]
    EmptyRule(String),
    #[error("table2_mapping is missing {0:?}")]
    MissingMapping(&'static str),
}

/// Map entries in file order, keeping duplicates so they can be reported.
#[derive(Debug)]
struct Entries<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Entries<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V2<V>(std::marker::PhantomData<V>);
        impl<'de, V: Deserialize<'de>> Visitor<'de> for V2<V> {
            type Value = Entries<V>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = map.next_entry()? {
                    out.push(entry);
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V2(std::marker::PhantomData))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    categories: Entries<Vec<String>>,
    rules: Entries<Vec<String>>,
    table2_mapping: Entries<String>,
}

/// Two-level category hierarchy. Category names double as ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    top: Vec<(String, Vec<String>)>,
    parent: BTreeMap<String, String>,
}

impl Taxonomy {
    pub fn top_level(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.top.iter().map(|(t, s)| (t.as_str(), s.as_slice()))
    }

    pub fn parent(&self, sub: &str) -> Option<&str> {
        self.parent.get(sub).map(String::as_str)
    }

    pub fn is_sub(&self, sub: &str) -> bool {
        self.parent.contains_key(sub)
    }

    /// Parents of the given sub-categories, in taxonomy order.
    pub fn parents_of<'s>(&self, subs: impl IntoIterator<Item = &'s String>) -> Vec<&str> {
        let set: BTreeSet<&str> = subs.into_iter().filter_map(|s| self.parent(s)).collect();
        self.top.iter().map(|(t, _)| t.as_str()).filter(|t| set.contains(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyDB {
    pub taxonomy: Taxonomy,
    exact: BTreeMap<String, BTreeSet<String>>,
    /// Prefix rules keyed without the trailing `.*`.
    prefixes: BTreeMap<String, BTreeSet<String>>,
    feature_engineering: String,
    data_preparation: String,
}

impl TaxonomyDB {
    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("shipped taxonomy is valid")
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| TaxonomyError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let file: TaxonomyFile = serde_json::from_str(text).map_err(|e| TaxonomyError::Format(e.to_string()))?;
        let mut top = Vec::new();
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        let mut seen_top = BTreeSet::new();
        for (t, subs) in file.categories.0 {
            if !seen_top.insert(t.clone()) {
                return Err(TaxonomyError::DuplicateKey { section: "categories", key: t });
            }
            for s in &subs {
                if let Some(first) = parent.insert(s.clone(), t.clone()) {
                    return Err(TaxonomyError::DuplicateSubCategory { sub: s.clone(), first, second: t });
                }
            }
            top.push((t, subs));
        }
        let taxonomy = Taxonomy { top, parent };
        let mut exact = BTreeMap::new();
        let mut prefixes = BTreeMap::new();
        for (rule, subs) in file.rules.0 {
            if subs.is_empty() {
                return Err(TaxonomyError::EmptyRule(rule));
            }
            if let Some(sub) = subs.iter().find(|s| !taxonomy.is_sub(s)) {
                return Err(TaxonomyError::UnknownCategory { rule: rule.clone(), sub: sub.clone() });
            }
            let subs: BTreeSet<String> = subs.into_iter().collect();
            let (table, key) = match rule.strip_suffix(".*") {
                Some(p) => (&mut prefixes, p.to_string()),
                None => (&mut exact, rule.clone()),
            };
            if table.insert(key, subs).is_some() {
                return Err(TaxonomyError::DuplicateKey { section: "rules", key: rule });
            }
        }
        let mut mapping = BTreeMap::new();
        for (k, v) in file.table2_mapping.0 {
            if !taxonomy.is_sub(&v) {
                return Err(TaxonomyError::UnknownCategory { rule: format!("table2_mapping.{k}"), sub: v });
            }
            if mapping.insert(k.clone(), v).is_some() {
                return Err(TaxonomyError::DuplicateKey { section: "table2_mapping", key: k });
            }
        }
        let mut take = |key: &'static str| mapping.remove(key).ok_or(TaxonomyError::MissingMapping(key));
        Ok(TaxonomyDB {
            feature_engineering: take("Feature Engineering")?,
            data_preparation: take("Data Preparation")?,
            taxonomy,
            exact,
            prefixes,
        })
    }

    /// Adds or replaces a rule.
    pub fn with_rule(mut self, rule: &str, subs: &[&str]) -> Self {
        let subs = subs.iter().map(|s| s.to_string()).collect();
        match rule.strip_suffix(".*") {
            Some(p) => self.prefixes.insert(p.to_string(), subs),
            None => self.exact.insert(rule.to_string(), subs),
        };
        self
    }

    pub fn rule_count(&self) -> usize {
        self.exact.len() + self.prefixes.len()
    }

    /// Exact rule, else the longest matching prefix rule, else nothing.
    pub fn classify_callsite(&self, fqn: &str) -> BTreeSet<String> {
        if let Some(subs) = self.exact.get(fqn) {
            return subs.clone();
        }
        let mut end = fqn.len();
        while let Some(dot) = fqn[..end].rfind('.') {
            if let Some(subs) = self.prefixes.get(&fqn[..dot]) {
                return subs.clone();
            }
            end = dot;
        }
        BTreeSet::new()
    }

    fn pattern_categories(&self, id: u8) -> BTreeSet<String> {
        match id {
            1 => BTreeSet::from([self.feature_engineering.clone()]),
            2 | 3 => BTreeSet::from(["Feature Transformation".to_string(), self.data_preparation.clone()]),
            4 => BTreeSet::from(["Feature Selection".to_string()]),
            _ => BTreeSet::from(["Exploratory Data Analysis".to_string()]),
        }
        .into_iter()
        .filter(|s| self.taxonomy.is_sub(s))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PatternHit {
    pub location: CellLocation,
    pub pattern_id: u8,
    pub categories: BTreeSet<String>,
}

struct Matcher<'e, 'a> {
    eag: &'e mut ExtendedAssignmentGraph<'a>,
    dataframe_known: bool,
}

impl<'a> Matcher<'_, 'a> {
    /// A name whose values at this point include a dataframe.
    fn is_frame(&mut self, e: &'a Expr, scope: ScopeId) -> bool {
        if !self.dataframe_known || !matches!(e.kind, ExprKind::Name(_)) {
            return false;
        }
        self.eag.eval(e, scope).contains(&Value::ExtInstance(DATAFRAME.to_string()))
    }

    /// `df.col` or `df['col']` on a dataframe-typed name.
    fn is_column(&mut self, e: &'a Expr, scope: ScopeId) -> bool {
        match &e.kind {
            ExprKind::Attribute { value, .. } => self.is_frame(value, scope),
            ExprKind::Subscript { value, index } => index.str_literal().is_some() && self.is_frame(value, scope),
            _ => false,
        }
    }

    fn is_frame_or_column(&mut self, e: &'a Expr, scope: ScopeId) -> bool {
        self.is_frame(e, scope) || self.is_column(e, scope)
    }

    fn mentions_column(&mut self, e: &'a Expr, scope: ScopeId) -> bool {
        if self.is_column(e, scope) {
            return true;
        }
        match &e.kind {
            ExprKind::Compare { left, comparators, .. } => {
                self.mentions_column(left, scope) || comparators.iter().any(|c| self.mentions_column(c, scope))
            }
            ExprKind::BinOp { left, right, .. } => {
                self.mentions_column(left, scope) || self.mentions_column(right, scope)
            }
            ExprKind::BoolOp(items) => items.iter().any(|i| self.mentions_column(i, scope)),
            ExprKind::UnaryOp { operand, .. } => self.mentions_column(operand, scope),
            _ => false,
        }
    }

    fn assignment(&mut self, target: &'a Target, value: &'a Expr, scope: ScopeId) -> Option<u8> {
        match target {
            Target::Subscript { value: base, index, .. } => {
                if index.str_literal().is_some() && self.is_frame(base, scope) {
                    if let ExprKind::BinOp { left, right, .. } = &value.kind {
                        if self.is_column(left, scope) && self.is_column(right, scope) {
                            return Some(1);
                        }
                    }
                    if is_scalar(value) {
                        return Some(2);
                    }
                }
                if self.is_column(base, scope) && self.mentions_column(index, scope) {
                    return Some(3);
                }
                None
            }
            Target::Attribute { value: base, .. } => (is_scalar(value) && self.is_frame(base, scope)).then_some(2),
            _ => None,
        }
    }

    /// Column-subset projection `df[['a', 'b']]` or `df.x[['a', 'b']]`.
    fn projection(&mut self, e: &'a Expr, scope: ScopeId) -> bool {
        let ExprKind::Subscript { value, index } = &e.kind else { return false };
        let ExprKind::List(items) = &index.kind else { return false };
        !items.is_empty() && items.iter().all(|i| i.str_literal().is_some()) && self.is_frame_or_column(value, scope)
    }

    /// `print(df[0:20])` or `display(...)` of a sliced dataframe.
    fn sliced_print(&mut self, e: &'a Expr, scope: ScopeId) -> bool {
        let ExprKind::Call(call) = &e.kind else { return false };
        let ExprKind::Name(n) = &call.func.kind else { return false };
        if n != "print" && n != "display" {
            return false;
        }
        call.args.iter().any(|a| match &a.kind {
            ExprKind::Subscript { value, index } => {
                matches!(index.kind, ExprKind::Slice(_)) && self.is_frame_or_column(value, scope)
            }
            _ => false,
        })
    }
}

fn is_scalar(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Literal(l) => !matches!(l, Literal::Ellipsis),
        ExprKind::UnaryOp { op: UnaryOp::USub | UnaryOp::UAdd, operand } => {
            matches!(operand.kind, ExprKind::Literal(_))
        }
        _ => false,
    }
}

/// Dataframe usage patterns. A pattern fires only when its base name
/// holds a dataframe at that point.
pub fn match_patterns(eag: &mut ExtendedAssignmentGraph<'_>, map: &CellLineMap, db: &TaxonomyDB) -> Vec<PatternHit> {
    let ir = eag.ir();
    let mut stmts = Vec::new();
    let mut exprs = Vec::new();
    walk_body(&ir.body, ScopeId::MODULE, &mut |scope, item| match item {
        Item::Stmt(s) => stmts.push((scope, s)),
        Item::Expr(e) => exprs.push((scope, e)),
    });
    let dataframe_known = eag.db().is_class(DATAFRAME);
    let mut m = Matcher { eag, dataframe_known };
    let mut found: BTreeSet<(u32, u8)> = BTreeSet::new();
    for (scope, stmt) in stmts {
        if let StmtKind::Assign { targets, value } = &stmt.kind {
            for t in targets {
                if let Some(id) = m.assignment(t, value, scope) {
                    found.insert((stmt.line, id));
                }
            }
        }
    }
    for (scope, e) in exprs {
        if m.projection(e, scope) {
            found.insert((e.line, 4));
        }
        if m.sliced_print(e, scope) {
            found.insert((e.line, 5));
        }
    }
    let mut hits: Vec<PatternHit> = found
        .into_iter()
        .filter_map(|(line, id)| {
            Some(PatternHit { location: map.location(line)?, pattern_id: id, categories: db.pattern_categories(id) })
        })
        .collect();
    hits.sort();
    hits
}

/// Sub-categories per code cell.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellClassification {
    pub cells: BTreeMap<u32, BTreeSet<String>>,
}

impl CellClassification {
    pub fn subs(&self, code_index: u32) -> Option<&BTreeSet<String>> {
        self.cells.get(&code_index).filter(|s| !s.is_empty())
    }

    /// Top-level categories of a cell: the parents of its sub-categories.
    pub fn top_level<'t>(&self, code_index: u32, taxonomy: &'t Taxonomy) -> Vec<&'t str> {
        match self.cells.get(&code_index) {
            Some(subs) => taxonomy.parents_of(subs),
            None => Vec::new(),
        }
    }
}

/// Unions callsite categories (direct and transitive), pattern-hit
/// categories, and Library Loading for cells with imports.
pub fn classify_cells(
    report: &CallSiteReport,
    hits: &[PatternHit],
    import_locations: &[CellLocation],
    db: &TaxonomyDB,
) -> CellClassification {
    let mut out = CellClassification::default();
    for site in report.sites() {
        for fqn in &site.callee_fqns {
            if fqn == UNRESOLVED {
                continue;
            }
            let subs = db.classify_callsite(fqn);
            if !subs.is_empty() {
                out.cells.entry(site.location.code_index).or_default().extend(subs);
            }
        }
    }
    for hit in hits {
        out.cells.entry(hit.location.code_index).or_default().extend(hit.categories.iter().cloned());
    }
    if db.taxonomy.is_sub(LIBRARY_LOADING) {
        for loc in import_locations {
            out.cells.entry(loc.code_index).or_default().insert(LIBRARY_LOADING.to_string());
        }
    }
    out.cells.retain(|_, s| !s.is_empty());
    out
}

/// Locations of import statements.
pub fn import_locations(ir: &crate::frontend::ModuleIr, map: &CellLineMap) -> Vec<CellLocation> {
    let mut out = Vec::new();
    walk_body(&ir.body, ScopeId::MODULE, &mut |_, item| {
        if let Item::Stmt(s) = item {
            if matches!(s.kind, StmtKind::Import(_)) {
                if let Some(loc) = map.location(s.line) {
                    out.push(loc);
                }
            }
        }
    });
    out.sort();
    out.dedup();
    out
}
