// SPDX-License-Identifier: Apache-2.0

//! Extended assignment graph.
//!
//! Program variables are keyed by definition site, so each redefinition of
//! a name is a separate node and the def-use chains decide which node a use
//! reads. Values are computed by whole-program rounds: every statement and
//! expression is evaluated against the current graph, results are unioned
//! into their target nodes, and rounds repeat until nothing changes.
//! Parameter binding is context-insensitive. External library values come
//! from the stub database; library bodies are never analyzed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::frontend::ir::*;
use crate::frontend::{DefUseChains, ModuleIr, NodeId, ScopeId};
use crate::stubs::{Member, Symbol, TypeStubDB};

/// Nesting limit for expression evaluation; deeper chains yield `Unknown`.
pub const DEPTH_CAP: u32 = 32;

const MAX_ROUNDS: usize = 10_000;

pub type Values = BTreeSet<Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContainerKind {
    List,
    Tuple,
    Dict,
    Set,
}

impl ContainerKind {
    pub fn builtin(self) -> &'static str {
        match self {
            ContainerKind::List => "builtins.list",
            ContainerKind::Tuple => "builtins.tuple",
            ContainerKind::Dict => "builtins.dict",
            ContainerKind::Set => "builtins.set",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Function(ScopeId),
    Class(ScopeId),
    Instance(ScopeId),
    /// Method bound to an instance, or to a class for classmethods.
    BoundMethod(ScopeId, Box<Value>),
    /// `super()` proxy: the class it was taken from and the receiver.
    Super(ScopeId, Box<Value>),
    Module(String),
    ExtClass(String),
    /// External function or method, by fully-qualified name.
    ExtFunction(String),
    /// Object of an external type.
    ExtInstance(String),
    /// Container created at a site; elements are smashed per container.
    Container(ContainerKind, NodeId),
    ContainerMethod(ContainerKind, NodeId, String),
    Generator(ScopeId),
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElemKey {
    Int(i64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    /// Variable at a definition site.
    Def(NodeId),
    Return(ScopeId),
    Yield(ScopeId),
    /// Attribute stored on instances or the class object of a user class.
    Field(ScopeId, String),
    Contents(NodeId),
    Keys(NodeId),
    Elem(NodeId, ElemKey),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClassRef {
    User(ScopeId),
    Ext(String),
}

#[derive(Debug, Default)]
struct Args {
    pos: Vec<(Values, bool)>,
    kw: Vec<(Option<String>, Values)>,
}

impl Args {
    fn positional(vals: Vec<Values>) -> Self {
        Args { pos: vals.into_iter().map(|v| (v, false)).collect(), kw: Vec::new() }
    }

    fn arg(&self, i: usize) -> Values {
        self.pos.get(i).map(|(v, _)| v.clone()).unwrap_or_default()
    }
}

fn one(v: Value) -> Values {
    BTreeSet::from([v])
}

fn unknown() -> Values {
    one(Value::Unknown)
}

fn key_of(e: &Expr) -> Option<ElemKey> {
    match &e.kind {
        ExprKind::Literal(Literal::Str(s)) => Some(ElemKey::Str(s.clone())),
        ExprKind::Literal(Literal::Int(Some(i))) if *i >= 0 => Some(ElemKey::Int(*i)),
        _ => None,
    }
}

pub struct ExtendedAssignmentGraph<'a> {
    ir: &'a ModuleIr,
    duc: &'a DefUseChains,
    db: &'a TypeStubDB,
    functions: BTreeMap<ScopeId, &'a Function>,
    pts: BTreeMap<Node, Values>,
    bases: BTreeMap<ScopeId, Vec<Values>>,
    implicit: BTreeSet<(ScopeId, ScopeId)>,
    /// Implicit invocations outside any function, by script line.
    implicit_roots: BTreeSet<(u32, ScopeId)>,
    line: u32,
    changed: bool,
    depth: u32,
    rounds: usize,
}

impl<'a> ExtendedAssignmentGraph<'a> {
    /// Builds the graph and propagates to a fixed point.
    pub fn build(ir: &'a ModuleIr, duc: &'a DefUseChains, db: &'a TypeStubDB) -> Self {
        let mut g = Self::new(ir, duc, db);
        while g.propagate_once() && g.rounds < MAX_ROUNDS {}
        g
    }

    /// An empty graph; call [`Self::propagate_once`] to fill it.
    pub fn new(ir: &'a ModuleIr, duc: &'a DefUseChains, db: &'a TypeStubDB) -> Self {
        ExtendedAssignmentGraph {
            ir,
            duc,
            db,
            functions: ir.index().functions,
            pts: BTreeMap::new(),
            bases: BTreeMap::new(),
            implicit: BTreeSet::new(),
            implicit_roots: BTreeSet::new(),
            line: 0,
            changed: false,
            depth: 0,
            rounds: 0,
        }
    }

    /// One evaluation round over the whole module. Returns whether any
    /// points-to set grew.
    pub fn propagate_once(&mut self) -> bool {
        self.changed = false;
        self.rounds += 1;
        self.run_body(&self.ir.body, ScopeId::MODULE);
        self.changed
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn ir(&self) -> &'a ModuleIr {
        self.ir
    }

    pub fn db(&self) -> &'a TypeStubDB {
        self.db
    }

    /// Values of `name` at script `line`, through the definitions that
    /// govern the line. `{Unknown}` when nothing is known.
    pub fn points_to(&self, name: &str, line: u32) -> Values {
        let mut out = Values::new();
        if let Some(entries) = self.duc.locations().get(&line) {
            for (n, def) in entries {
                if n == name {
                    out.extend(self.get(&Node::Def(*def)));
                }
            }
        }
        if out.is_empty() {
            out.insert(Value::Unknown);
        }
        out
    }

    pub fn values(&self, node: &Node) -> Values {
        self.get(node)
    }

    pub fn nodes(&self) -> &BTreeMap<Node, Values> {
        &self.pts
    }

    /// Evaluates an expression against the graph. At the fixed point this
    /// has no effect on the graph.
    pub fn eval(&mut self, e: &'a Expr, scope: ScopeId) -> Values {
        self.ev(e, scope)
    }

    /// Calls made without call syntax (properties, operators, iteration
    /// protocol) from inside a function: `(caller, callee)`.
    pub fn implicit_edges(&self) -> &BTreeSet<(ScopeId, ScopeId)> {
        &self.implicit
    }

    /// Functions invoked without call syntax at cell level (properties,
    /// operators), with the script line of the triggering expression.
    pub fn implicit_roots(&self) -> &BTreeSet<(u32, ScopeId)> {
        &self.implicit_roots
    }

    fn note_implicit(&mut self, scope: ScopeId, f: ScopeId) {
        match self.region(scope) {
            Some(region) => self.implicit.insert((region, f)),
            None => self.implicit_roots.insert((self.line, f)),
        };
    }

    pub fn function(&self, f: ScopeId) -> Option<&'a Function> {
        self.functions.get(&f).copied()
    }

    pub fn is_generator(&self, f: ScopeId) -> bool {
        self.function(f).is_some_and(|f| f.is_generator)
    }

    /// User `__init__` functions run when class `c` is instantiated.
    pub fn init_targets(&mut self, c: ScopeId) -> Vec<ScopeId> {
        let vals = self.class_lookup(c, "__init__", &Value::Instance(c), ScopeId::MODULE, false);
        vals.into_iter()
            .filter_map(|v| match v {
                Value::BoundMethod(f, _) | Value::Function(f) => Some(f),
                _ => None,
            })
            .collect()
    }

    /// Attribute `name` looked up on an instance of user class `c`.
    pub fn instance_attr(&mut self, c: ScopeId, name: &str) -> Values {
        self.class_lookup(c, name, &Value::Instance(c), ScopeId::MODULE, false)
    }

    /// Human-readable name of a value.
    pub fn describe(&self, v: &Value) -> String {
        let scopes = &self.ir.scopes;
        match v {
            Value::Function(f) => scopes.fqn(*f),
            Value::Class(c) => scopes.fqn(*c),
            Value::Instance(c) => format!("{} instance", scopes.fqn(*c)),
            Value::BoundMethod(f, _) => scopes.fqn(*f),
            Value::Super(c, _) => format!("super({})", scopes.fqn(*c)),
            Value::Module(m) => format!("module {m}"),
            Value::ExtClass(t) | Value::ExtFunction(t) => t.clone(),
            Value::ExtInstance(t) => format!("{t} instance"),
            Value::Container(k, site) => format!("{} {site}", k.builtin()),
            Value::ContainerMethod(k, site, name) => format!("{}.{name} {site}", k.builtin()),
            Value::Generator(f) => format!("generator {}", scopes.fqn(*f)),
            Value::Unknown => "unknown".to_string(),
        }
    }

    /// Graphviz rendering for debugging.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph eag {\n  rankdir=LR;\n");
        let mut values = BTreeSet::new();
        for (node, vals) in &self.pts {
            let from = self.node_label(node);
            for v in vals {
                let to = self.describe(v);
                values.insert(to.clone());
                let _ = writeln!(out, "  {:?} -> {:?};", from, to);
            }
        }
        for v in values {
            let _ = writeln!(out, "  {:?} [shape=box];", v);
        }
        out.push_str("}\n");
        out
    }

    fn node_label(&self, node: &Node) -> String {
        let scopes = &self.ir.scopes;
        match node {
            Node::Def(d) => match self.duc.def_info(*d) {
                Some(info) => {
                    let owner = scopes.get(info.owner);
                    let prefix = if owner.qualname.is_empty() { String::new() } else { format!("{}.", owner.qualname) };
                    format!("{prefix}{}@{}", info.name, info.line)
                }
                None => format!("def {d}"),
            },
            Node::Return(f) => format!("return {}", scopes.fqn(*f)),
            Node::Yield(f) => format!("yield {}", scopes.fqn(*f)),
            Node::Field(c, a) => format!("{}.{a}", scopes.fqn(*c)),
            Node::Contents(s) => format!("contents {s}"),
            Node::Keys(s) => format!("keys {s}"),
            Node::Elem(s, ElemKey::Int(i)) => format!("{s}[{i}]"),
            Node::Elem(s, ElemKey::Str(k)) => format!("{s}[{k:?}]"),
        }
    }

    fn get(&self, node: &Node) -> Values {
        self.pts.get(node).cloned().unwrap_or_default()
    }

    fn add(&mut self, node: Node, vals: &Values) {
        if vals.is_empty() {
            return;
        }
        let entry = self.pts.entry(node).or_default();
        let before = entry.len();
        entry.extend(vals.iter().cloned());
        if entry.len() != before {
            self.changed = true;
        }
    }

    fn add_one(&mut self, node: Node, v: Value) {
        self.add(node, &one(v));
    }

    fn region(&self, scope: ScopeId) -> Option<ScopeId> {
        self.ir.scopes.enclosing_function(scope)
    }

    fn builtin_instance(&self, ty: &str) -> Values {
        if self.db.is_class(ty) {
            one(Value::ExtInstance(ty.to_string()))
        } else {
            unknown()
        }
    }

    // Statements

    fn run_body(&mut self, body: &'a [Stmt], scope: ScopeId) {
        for stmt in body {
            self.run_stmt(stmt, scope);
        }
    }

    fn run_stmt(&mut self, stmt: &'a Stmt, scope: ScopeId) {
        self.line = stmt.line;
        match &stmt.kind {
            StmtKind::Expr(e) => {
                self.ev(e, scope);
            }
            StmtKind::Assign { targets, value } => {
                let v = self.ev(value, scope);
                for t in targets {
                    self.assign(t, &v, scope);
                }
            }
            StmtKind::AugAssign { target, read, op, value } => {
                let l = self.ev(read, scope);
                let r = self.ev(value, scope);
                let res = self.binop(&l, *op, &r, scope);
                self.assign(target, &res, scope);
            }
            StmtKind::Import(bindings) => {
                for b in bindings {
                    let v = self.import_value(&b.path);
                    self.add(Node::Def(b.binding.id), &v);
                }
            }
            StmtKind::FunctionDef(f) => {
                for d in &f.decorators {
                    self.ev(d, scope);
                }
                if let Some(b) = &f.binding {
                    self.add_one(Node::Def(b.id), Value::Function(f.scope));
                }
                self.run_body(&f.body, f.scope);
            }
            StmtKind::ClassDef(c) => {
                for d in &c.decorators {
                    self.ev(d, scope);
                }
                for k in &c.keywords {
                    self.ev(&k.value, scope);
                }
                let bases: Vec<Values> = c.bases.iter().map(|b| self.ev(b, scope)).collect();
                if self.bases.get(&c.scope) != Some(&bases) {
                    self.bases.insert(c.scope, bases);
                    self.changed = true;
                }
                self.add_one(Node::Def(c.binding.id), Value::Class(c.scope));
                self.run_body(&c.body, c.scope);
            }
            StmtKind::Return(Some(e)) => {
                let v = self.ev(e, scope);
                if let Some(f) = self.region(scope) {
                    if !self.is_generator(f) {
                        self.add(Node::Return(f), &v);
                    }
                }
            }
            StmtKind::If { test, body, orelse } | StmtKind::While { test, body, orelse } => {
                self.ev(test, scope);
                self.run_body(body, scope);
                self.run_body(orelse, scope);
            }
            StmtKind::For { target, iter, body, orelse } => {
                let it = self.ev(iter, scope);
                let elems = self.iterate(&it, scope);
                self.assign(target, &elems, scope);
                self.run_body(body, scope);
                self.run_body(orelse, scope);
            }
            StmtKind::With { items, body } => {
                for item in items {
                    let ctx = self.ev(&item.context, scope);
                    let entered = self.enter(&ctx, scope);
                    if let Some(t) = &item.target {
                        self.assign(t, &entered, scope);
                    }
                }
                self.run_body(body, scope);
            }
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                self.run_body(body, scope);
                for h in handlers {
                    if let Some(typ) = &h.typ {
                        let classes = self.ev(typ, scope);
                        let inst = self.exception_instances(&classes);
                        if let Some(name) = &h.name {
                            self.add(Node::Def(name.id), &inst);
                        }
                    }
                    self.run_body(&h.body, scope);
                }
                self.run_body(orelse, scope);
                self.run_body(finalbody, scope);
            }
            StmtKind::Eval(exprs) => {
                for e in exprs {
                    self.ev(e, scope);
                }
            }
            StmtKind::Return(None)
            | StmtKind::Global(_)
            | StmtKind::Nonlocal(_)
            | StmtKind::Break
            | StmtKind::Continue
            | StmtKind::Pass
            | StmtKind::Opaque => {}
        }
    }

    fn exception_instances(&self, classes: &Values) -> Values {
        let mut out = Values::new();
        for c in classes {
            match c {
                Value::Class(k) => {
                    out.insert(Value::Instance(*k));
                }
                Value::ExtClass(t) => {
                    out.insert(Value::ExtInstance(t.clone()));
                }
                Value::Container(_, site) => {
                    let inner = self.get(&Node::Contents(*site));
                    out.extend(self.exception_instances(&inner));
                }
                _ => {}
            }
        }
        out
    }

    fn assign(&mut self, target: &'a Target, vals: &Values, scope: ScopeId) {
        match target {
            Target::Name(b) => self.add(Node::Def(b.id), vals),
            Target::Attribute { value, attr, line } => {
                let objs = self.ev(value, scope);
                let outer = std::mem::replace(&mut self.line, *line);
                for o in objs {
                    self.store_attr(&o, attr, vals, scope);
                }
                self.line = outer;
            }
            Target::Subscript { value, index, .. } => {
                let objs = self.ev(value, scope);
                let idx = self.ev(index, scope);
                let key = key_of(index);
                for o in objs {
                    match o {
                        Value::Container(kind, site) => {
                            if let Some(k) = &key {
                                self.add(Node::Elem(site, k.clone()), vals);
                            }
                            self.add(Node::Contents(site), vals);
                            if kind == ContainerKind::Dict {
                                self.add(Node::Keys(site), &idx);
                            }
                        }
                        Value::Instance(c) => {
                            let recv = Value::Instance(c);
                            self.call_dunder(c, &recv, "__setitem__", vec![idx.clone(), vals.clone()], scope);
                        }
                        _ => {}
                    }
                }
            }
            Target::Sequence(ts) => self.destructure(ts, vals, scope),
            Target::Starred(t) => self.assign(t, vals, scope),
        }
    }

    fn destructure(&mut self, ts: &'a [Target], vals: &Values, scope: ScopeId) {
        let star = ts.iter().position(|t| matches!(t, Target::Starred(_)));
        for v in vals {
            match v {
                Value::Container(kind, site) if *kind != ContainerKind::Dict => {
                    let site = *site;
                    // Known length when every position was stored separately.
                    let len = (0..).find(|j| !self.pts.contains_key(&Node::Elem(site, ElemKey::Int(*j))));
                    let len = len.filter(|n| *n > 0);
                    for (i, t) in ts.iter().enumerate() {
                        let index = match (star, len) {
                            (Some(s), _) if i < s => Some(i as i64),
                            (Some(_), Some(n)) => Some(n - (ts.len() - i) as i64),
                            (Some(_), None) => None,
                            (None, _) => Some(i as i64),
                        };
                        if Some(i) == star {
                            self.assign_starred(
                                t,
                                site,
                                i as i64,
                                len.map(|n| n - (ts.len() - i - 1) as i64),
                                v,
                                scope,
                            );
                            continue;
                        }
                        let mut el = match index {
                            Some(j) if j >= 0 => self.get(&Node::Elem(site, ElemKey::Int(j))),
                            _ => Values::new(),
                        };
                        if el.is_empty() {
                            el = self.get(&Node::Contents(site));
                        }
                        self.assign(t, &el, scope);
                    }
                }
                other => {
                    let el = self.iterate(&one(other.clone()), scope);
                    for t in ts {
                        self.assign(t, &el, scope);
                    }
                }
            }
        }
    }

    /// Binds a starred target to a fresh list holding positions
    /// `from..to` of the source (all of it when the length is unknown).
    fn assign_starred(
        &mut self,
        t: &'a Target,
        site: NodeId,
        from: i64,
        to: Option<i64>,
        source: &Value,
        scope: ScopeId,
    ) {
        let (Target::Starred(inner), Some(to)) = (t, to) else {
            return self.assign(t, &one(source.clone()), scope);
        };
        let Target::Name(b) = inner.as_ref() else {
            return self.assign(t, &one(source.clone()), scope);
        };
        for (k, j) in (from..to).enumerate() {
            let el = self.get(&Node::Elem(site, ElemKey::Int(j)));
            self.add(Node::Elem(b.id, ElemKey::Int(k as i64)), &el);
            self.add(Node::Contents(b.id), &el);
        }
        self.assign(t, &one(Value::Container(ContainerKind::List, b.id)), scope);
    }

    fn store_attr(&mut self, obj: &Value, attr: &str, vals: &Values, scope: ScopeId) {
        match obj {
            Value::Instance(c) => {
                for cls in self.mro(*c) {
                    let ClassRef::User(k) = cls else { continue };
                    if self.duc.class_members(k).is_some_and(|m| m.contains_key(attr)) {
                        if let Some(setter) = self.accessor(k, attr, Descriptor::Setter) {
                            self.implicit_invoke(setter, obj.clone(), vec![vals.clone()], scope);
                            return;
                        }
                        break;
                    }
                }
                self.add(Node::Field(*c, attr.to_string()), vals);
            }
            Value::Class(c) => self.add(Node::Field(*c, attr.to_string()), vals),
            _ => {}
        }
    }

    // Expressions

    fn ev(&mut self, e: &'a Expr, scope: ScopeId) -> Values {
        if self.depth >= DEPTH_CAP {
            return unknown();
        }
        self.depth += 1;
        let outer = std::mem::replace(&mut self.line, e.line);
        let out = self.ev_inner(e, scope);
        self.line = outer;
        self.depth -= 1;
        out
    }

    fn ev_inner(&mut self, e: &'a Expr, scope: ScopeId) -> Values {
        match &e.kind {
            ExprKind::Name(n) => {
                let defs = self.duc.defs_of(e.id);
                if defs.is_empty() {
                    return self.builtin(n);
                }
                let mut out = Values::new();
                for d in defs {
                    out.extend(self.get(&Node::Def(*d)));
                }
                out
            }
            ExprKind::Attribute { value, attr } => {
                let base = self.ev(value, scope);
                let mut out = Values::new();
                for v in &base {
                    out.extend(self.attr_of(v, attr, scope));
                }
                out
            }
            ExprKind::Subscript { value, index } => {
                let base = self.ev(value, scope);
                self.subscript(&base, index, scope)
            }
            ExprKind::Call(call) => self.ev_call(e, call, scope),
            ExprKind::Literal(lit) => match lit {
                Literal::Str(_) => self.builtin_instance("builtins.str"),
                Literal::Int(_) => self.builtin_instance("builtins.int"),
                Literal::Float => self.builtin_instance("builtins.float"),
                Literal::Complex => self.builtin_instance("builtins.complex"),
                Literal::Bool(_) => self.builtin_instance("builtins.bool"),
                Literal::None => self.builtin_instance("builtins.NoneType"),
                Literal::Bytes => self.builtin_instance("builtins.bytes"),
                Literal::Ellipsis => unknown(),
            },
            ExprKind::FString(parts) => {
                for p in parts {
                    self.ev(p, scope);
                }
                self.builtin_instance("builtins.str")
            }
            ExprKind::Tuple(items) => self.sequence(e.id, ContainerKind::Tuple, items, scope),
            ExprKind::List(items) => self.sequence(e.id, ContainerKind::List, items, scope),
            ExprKind::Set(items) => self.sequence(e.id, ContainerKind::Set, items, scope),
            ExprKind::Dict(entries) => {
                let site = e.id;
                for (k, v) in entries {
                    let vv = self.ev(v, scope);
                    match k {
                        Some(k) => {
                            let kv = self.ev(k, scope);
                            self.add(Node::Keys(site), &kv);
                            if let Some(key) = key_of(k) {
                                self.add(Node::Elem(site, key), &vv);
                            }
                            self.add(Node::Contents(site), &vv);
                        }
                        None => {
                            for o in vv {
                                if let Value::Container(ContainerKind::Dict, s2) = o {
                                    let keys = self.get(&Node::Keys(s2));
                                    let contents = self.get(&Node::Contents(s2));
                                    self.add(Node::Keys(site), &keys);
                                    self.add(Node::Contents(site), &contents);
                                }
                            }
                        }
                    }
                }
                one(Value::Container(ContainerKind::Dict, site))
            }
            ExprKind::Slice(items) => {
                for i in items {
                    self.ev(i, scope);
                }
                self.builtin_instance("builtins.slice")
            }
            ExprKind::BinOp { left, op, right } => {
                let l = self.ev(left, scope);
                let r = self.ev(right, scope);
                self.binop(&l, *op, &r, scope)
            }
            ExprKind::UnaryOp { op, operand } => {
                let v = self.ev(operand, scope);
                self.unary(*op, &v, scope)
            }
            ExprKind::BoolOp(items) => {
                let mut out = Values::new();
                for i in items {
                    out.extend(self.ev(i, scope));
                }
                out
            }
            ExprKind::Compare { left, ops, comparators } => {
                let mut lhs = self.ev(left, scope);
                let mut out = Values::new();
                for (op, c) in ops.iter().zip(comparators) {
                    let rhs = self.ev(c, scope);
                    out.extend(self.compare(&lhs, *op, &rhs, scope));
                    lhs = rhs;
                }
                out
            }
            ExprKind::IfExp { test, body, orelse } => {
                self.ev(test, scope);
                let mut out = self.ev(body, scope);
                out.extend(self.ev(orelse, scope));
                out
            }
            ExprKind::Lambda(f) => {
                self.run_body(&f.body, f.scope);
                one(Value::Function(f.scope))
            }
            ExprKind::Comprehension(comp) => {
                for (i, g) in comp.generators.iter().enumerate() {
                    let s = if i == 0 { scope } else { comp.scope };
                    let it = self.ev(&g.iter, s);
                    let elems = self.iterate(&it, comp.scope);
                    self.assign(&g.target, &elems, comp.scope);
                    for cond in &g.ifs {
                        self.ev(cond, comp.scope);
                    }
                }
                let site = e.id;
                let elt = self.ev(&comp.elt, comp.scope);
                let kind = match comp.kind {
                    CompKind::Dict => {
                        self.add(Node::Keys(site), &elt);
                        if let Some(v) = &comp.value {
                            let vv = self.ev(v, comp.scope);
                            self.add(Node::Contents(site), &vv);
                        }
                        return one(Value::Container(ContainerKind::Dict, site));
                    }
                    CompKind::Set => ContainerKind::Set,
                    CompKind::List | CompKind::Generator => ContainerKind::List,
                };
                self.add(Node::Contents(site), &elt);
                one(Value::Container(kind, site))
            }
            ExprKind::Starred(inner) | ExprKind::Await(inner) => self.ev(inner, scope),
            ExprKind::NamedExpr { target, value } => {
                let v = self.ev(value, scope);
                self.add(Node::Def(target.id), &v);
                v
            }
            ExprKind::Yield(v) => {
                if let Some(v) = v {
                    let vals = self.ev(v, scope);
                    if let Some(f) = self.region(scope) {
                        self.add(Node::Yield(f), &vals);
                    }
                }
                Values::new()
            }
            ExprKind::YieldFrom(v) => {
                let vals = self.ev(v, scope);
                let elems = self.iterate(&vals, scope);
                if let Some(f) = self.region(scope) {
                    self.add(Node::Yield(f), &elems);
                }
                Values::new()
            }
        }
    }

    fn sequence(&mut self, site: NodeId, kind: ContainerKind, items: &'a [Expr], scope: ScopeId) -> Values {
        let mut positional = true;
        for (i, item) in items.iter().enumerate() {
            if let ExprKind::Starred(inner) = &item.kind {
                let v = self.ev(inner, scope);
                let elems = self.iterate(&v, scope);
                self.add(Node::Contents(site), &elems);
                positional = false;
            } else {
                let v = self.ev(item, scope);
                if positional {
                    self.add(Node::Elem(site, ElemKey::Int(i as i64)), &v);
                }
                self.add(Node::Contents(site), &v);
            }
        }
        one(Value::Container(kind, site))
    }

    fn builtin(&self, name: &str) -> Values {
        match self.db.lookup(&format!("builtins.{name}")) {
            Some(Symbol::Function(f)) => one(Value::ExtFunction(f.fqn.clone())),
            Some(Symbol::Class(c)) => one(Value::ExtClass(c.fqn.clone())),
            _ => unknown(),
        }
    }

    fn import_value(&self, path: &str) -> Values {
        match self.db.lookup(path) {
            Some(Symbol::Function(f)) => one(Value::ExtFunction(f.fqn.clone())),
            Some(Symbol::Class(c)) => one(Value::ExtClass(c.fqn.clone())),
            Some(Symbol::Method(_, m)) => one(Value::ExtFunction(m.fqn.clone())),
            Some(Symbol::Module(m)) => one(Value::Module(m)),
            None => one(Value::Module(path.to_string())),
        }
    }

    fn ext_path(&self, path: &str) -> Values {
        match self.db.lookup(path) {
            Some(Symbol::Function(f)) => one(Value::ExtFunction(f.fqn.clone())),
            Some(Symbol::Class(c)) => one(Value::ExtClass(c.fqn.clone())),
            Some(Symbol::Method(_, m)) => one(Value::ExtFunction(m.fqn.clone())),
            Some(Symbol::Module(m)) => one(Value::Module(m)),
            None => unknown(),
        }
    }

    fn instances(types: &[String]) -> Values {
        types.iter().map(|t| Value::ExtInstance(t.clone())).collect()
    }

    /// Member of an external type, falling back to `__getattr__`.
    fn ext_member(&self, ty: &str, attr: &str) -> Values {
        match self.db.member_type(ty, attr) {
            Some(Member::Attribute(t)) => one(Value::ExtInstance(t.to_string())),
            Some(Member::Method(m)) => one(Value::ExtFunction(m.fqn.clone())),
            None => match self.db.member_type(ty, "__getattr__") {
                Some(Member::Attribute(t)) => one(Value::ExtInstance(t.to_string())),
                Some(Member::Method(m)) => Self::instances(&m.returns),
                None => unknown(),
            },
        }
    }

    /// Return types of an external type's method, if declared.
    fn ext_method_returns(&self, ty: &str, name: &str) -> Option<Values> {
        match self.db.member_type(ty, name) {
            Some(Member::Method(m)) => Some(Self::instances(&m.returns)),
            Some(Member::Attribute(t)) => Some(one(Value::ExtInstance(t.to_string()))),
            None => None,
        }
    }

    fn attr_of(&mut self, v: &Value, attr: &str, scope: ScopeId) -> Values {
        match v {
            Value::Module(p) => self.ext_path(&format!("{p}.{attr}")),
            Value::ExtClass(t) => match self.db.member_type(t, attr) {
                Some(Member::Attribute(ty)) => one(Value::ExtInstance(ty.to_string())),
                Some(Member::Method(m)) => one(Value::ExtFunction(m.fqn.clone())),
                None => unknown(),
            },
            Value::ExtInstance(t) => self.ext_member(t, attr),
            Value::Instance(c) => {
                let mut out = self.get(&Node::Field(*c, attr.to_string()));
                out.extend(self.class_lookup(*c, attr, v, scope, true));
                out
            }
            Value::Class(c) => {
                let mut out = self.get(&Node::Field(*c, attr.to_string()));
                out.extend(self.class_lookup(*c, attr, v, scope, true));
                out
            }
            Value::Super(c, recv) => {
                let Some(k) = self.class_of(recv) else { return Values::new() };
                let mro = self.mro(k);
                let start = mro.iter().position(|r| *r == ClassRef::User(*c)).map_or(mro.len(), |i| i + 1);
                self.lookup_in(&mro[start..], attr, recv, scope, true)
            }
            Value::Container(kind, site) => one(Value::ContainerMethod(*kind, *site, attr.to_string())),
            Value::Function(_)
            | Value::ExtFunction(_)
            | Value::BoundMethod(..)
            | Value::Generator(_)
            | Value::ContainerMethod(..)
            | Value::Unknown => unknown(),
        }
    }

    fn class_of(&self, recv: &Value) -> Option<ScopeId> {
        match recv {
            Value::Instance(c) | Value::Class(c) => Some(*c),
            _ => None,
        }
    }

    /// Attribute lookup along the MRO of user class `c`, bound to `recv`.
    fn class_lookup(&mut self, c: ScopeId, attr: &str, recv: &Value, scope: ScopeId, record: bool) -> Values {
        let mro = self.mro(c);
        self.lookup_in(&mro, attr, recv, scope, record)
    }

    fn lookup_in(&mut self, mro: &[ClassRef], attr: &str, recv: &Value, scope: ScopeId, record: bool) -> Values {
        for cls in mro {
            match cls {
                ClassRef::User(k) => {
                    let Some(defs) = self.duc.class_members(*k).and_then(|m| m.get(attr)).cloned() else {
                        continue;
                    };
                    let mut found = Values::new();
                    for d in defs {
                        found.extend(self.get(&Node::Def(d)));
                    }
                    let mut out = Values::new();
                    for v in found {
                        out.extend(self.bind(v, recv, scope, record));
                    }
                    return out;
                }
                ClassRef::Ext(t) => {
                    if let Some(m) = self.db.member_type(t, attr) {
                        return match m {
                            Member::Attribute(ty) => one(Value::ExtInstance(ty.to_string())),
                            Member::Method(f) => one(Value::ExtFunction(f.fqn.clone())),
                        };
                    }
                }
            }
        }
        Values::new()
    }

    fn bind(&mut self, v: Value, recv: &Value, scope: ScopeId, record: bool) -> Values {
        let Value::Function(f) = v else { return one(v) };
        let Some(func) = self.function(f) else { return one(v) };
        let on_instance = matches!(recv, Value::Instance(_));
        match func.descriptor {
            Descriptor::None if on_instance => one(Value::BoundMethod(f, Box::new(recv.clone()))),
            Descriptor::None | Descriptor::StaticMethod => one(Value::Function(f)),
            Descriptor::ClassMethod => match self.class_of(recv) {
                Some(c) => one(Value::BoundMethod(f, Box::new(Value::Class(c)))),
                None => Values::new(),
            },
            Descriptor::Property | Descriptor::Setter | Descriptor::Deleter => {
                if !on_instance {
                    return one(Value::Function(f));
                }
                let getter = if func.descriptor == Descriptor::Property {
                    Some(f)
                } else {
                    self.ir.scopes.get(f).parent.and_then(|c| self.accessor(c, &func.name, Descriptor::Property))
                };
                match getter {
                    Some(g) if record => self.implicit_invoke(g, recv.clone(), Vec::new(), scope),
                    Some(g) => self.get(&Node::Return(g)),
                    None => Values::new(),
                }
            }
        }
    }

    /// Last accessor of property `name` with the given role in class `c`.
    fn accessor(&self, c: ScopeId, name: &str, role: Descriptor) -> Option<ScopeId> {
        self.functions
            .values()
            .filter(|f| f.name == name && f.descriptor == role && self.ir.scopes.get(f.scope).parent == Some(c))
            .map(|f| f.scope)
            .next_back()
    }

    /// Method resolution order of a user class (C3, falling back to a
    /// left-to-right depth-first order when C3 fails).
    pub fn mro(&self, c: ScopeId) -> Vec<ClassRef> {
        self.mro_rec(c, &mut Vec::new())
    }

    fn mro_rec(&self, c: ScopeId, stack: &mut Vec<ScopeId>) -> Vec<ClassRef> {
        if stack.contains(&c) {
            return vec![ClassRef::User(c)];
        }
        stack.push(c);
        let mut direct = Vec::new();
        for base in self.bases.get(&c).into_iter().flatten() {
            for v in base {
                let r = match v {
                    Value::Class(k) => ClassRef::User(*k),
                    Value::ExtClass(t) => ClassRef::Ext(t.clone()),
                    _ => continue,
                };
                if !direct.contains(&r) {
                    direct.push(r);
                }
            }
        }
        let mut seqs: Vec<Vec<ClassRef>> = direct
            .iter()
            .map(|b| match b {
                ClassRef::User(k) => self.mro_rec(*k, stack),
                ClassRef::Ext(t) => vec![ClassRef::Ext(t.clone())],
            })
            .collect();
        seqs.push(direct);
        stack.pop();
        let mut out = vec![ClassRef::User(c)];
        match c3_merge(seqs.clone()) {
            Some(merged) => out.extend(merged),
            None => {
                for r in seqs.into_iter().flatten() {
                    if !out.contains(&r) {
                        out.push(r);
                    }
                }
            }
        }
        out
    }

    fn subscript(&mut self, base: &Values, index: &'a Expr, scope: ScopeId) -> Values {
        let idx = self.ev(index, scope);
        let key = key_of(index);
        let mut out = Values::new();
        for v in base {
            match v {
                Value::Container(kind, site) => {
                    if matches!(index.kind, ExprKind::Slice(_)) {
                        out.insert(v.clone());
                        continue;
                    }
                    let mut el = match &key {
                        Some(k) => self.get(&Node::Elem(*site, k.clone())),
                        None => Values::new(),
                    };
                    if el.is_empty() {
                        el = self.get(&Node::Contents(*site));
                    }
                    let _ = kind;
                    out.extend(el);
                }
                Value::ExtInstance(t) => {
                    let mut hit = false;
                    for kind in self.index_kinds(index, &idx) {
                        if let Some(r) = self.ext_method_returns(t, &format!("__getitem__[{kind}]")) {
                            out.extend(r);
                            hit = true;
                        }
                    }
                    if !hit {
                        match self.ext_method_returns(t, "__getitem__") {
                            Some(r) => out.extend(r),
                            None => {
                                out.insert(Value::Unknown);
                            }
                        }
                    }
                }
                Value::Instance(c) => {
                    out.extend(self.call_dunder(*c, v, "__getitem__", vec![idx.clone()], scope));
                }
                Value::ExtClass(_) => {
                    out.insert(v.clone());
                }
                _ => {
                    out.insert(Value::Unknown);
                }
            }
        }
        out
    }

    /// Key-type names used to select a `__getitem__[K]` stub entry.
    fn index_kinds(&self, index: &Expr, vals: &Values) -> BTreeSet<String> {
        let syntactic = match &index.kind {
            ExprKind::Literal(Literal::Str(_)) => Some("str"),
            ExprKind::Literal(Literal::Int(_)) => Some("int"),
            ExprKind::Literal(Literal::Bool(_)) => Some("bool"),
            ExprKind::List(_) => Some("list"),
            ExprKind::Tuple(_) => Some("tuple"),
            ExprKind::Slice(_) => Some("slice"),
            _ => None,
        };
        if let Some(k) = syntactic {
            return BTreeSet::from([k.to_string()]);
        }
        vals.iter()
            .filter_map(|v| match v {
                Value::ExtInstance(t) => Some(t.rsplit('.').next().unwrap_or(t).to_string()),
                Value::Container(k, _) => Some(k.builtin().trim_start_matches("builtins.").to_string()),
                _ => None,
            })
            .collect()
    }

    fn binop(&mut self, l: &Values, op: BinOp, r: &Values, scope: ScopeId) -> Values {
        let (fwd, refl) = op.dunders();
        let mut out = Values::new();
        for lv in l {
            for rv in r {
                out.extend(self.binop_pair(lv, rv, fwd, refl, scope));
            }
        }
        out
    }

    fn binop_pair(&mut self, lv: &Value, rv: &Value, fwd: &str, refl: &str, scope: ScopeId) -> Values {
        let scalar = |v: &Value| matches!(v, Value::ExtInstance(t) if t.starts_with("builtins."));
        // Builtin scalars defer to a richer right operand, as the runtime
        // does when the scalar's operator returns NotImplemented.
        if scalar(lv) && !scalar(rv) {
            if let Some(res) = self.dunder_on(rv, refl, lv, scope) {
                return res;
            }
        }
        if let Some(res) = self.dunder_on(lv, fwd, rv, scope) {
            return res;
        }
        if let Some(res) = self.dunder_on(rv, refl, lv, scope) {
            return res;
        }
        match (lv, rv) {
            (Value::Container(k, site), Value::Container(_, other)) => {
                let contents = self.get(&Node::Contents(*other));
                self.add(Node::Contents(*site), &contents);
                one(Value::Container(*k, *site))
            }
            _ => unknown(),
        }
    }

    fn dunder_on(&mut self, recv: &Value, name: &str, arg: &Value, scope: ScopeId) -> Option<Values> {
        match recv {
            Value::ExtInstance(t) => self.ext_method_returns(t, name),
            Value::Instance(c) => {
                let has = self.mro(*c).iter().any(|r| match r {
                    ClassRef::User(k) => self.duc.class_members(*k).is_some_and(|m| m.contains_key(name)),
                    ClassRef::Ext(_) => false,
                });
                has.then(|| self.call_dunder(*c, recv, name, vec![one(arg.clone())], scope))
            }
            _ => None,
        }
    }

    fn unary(&mut self, op: UnaryOp, vals: &Values, scope: ScopeId) -> Values {
        if op == UnaryOp::Not {
            return self.builtin_instance("builtins.bool");
        }
        let name = match op {
            UnaryOp::Invert => "__invert__",
            UnaryOp::UAdd => "__pos__",
            _ => "__neg__",
        };
        let mut out = Values::new();
        for v in vals {
            match v {
                Value::ExtInstance(t) => match self.ext_method_returns(t, name) {
                    Some(r) => out.extend(r),
                    None => {
                        out.insert(v.clone());
                    }
                },
                Value::Instance(c) => out.extend(self.call_dunder(*c, v, name, Vec::new(), scope)),
                _ => {
                    out.insert(Value::Unknown);
                }
            }
        }
        out
    }

    fn compare(&mut self, l: &Values, op: CmpOp, r: &Values, scope: ScopeId) -> Values {
        let mut out = Values::new();
        if let Some(name) = op.dunder() {
            for lv in l {
                for rv in r {
                    if let Some(res) = self.dunder_on(lv, name, rv, scope) {
                        out.extend(res);
                    }
                }
            }
        }
        if out.is_empty() {
            out = self.builtin_instance("builtins.bool");
        }
        out
    }

    /// Element values produced by iterating over `vals`.
    fn iterate(&mut self, vals: &Values, scope: ScopeId) -> Values {
        let mut out = Values::new();
        for v in vals {
            match v {
                Value::Container(ContainerKind::Dict, site) => out.extend(self.get(&Node::Keys(*site))),
                Value::Container(_, site) => out.extend(self.get(&Node::Contents(*site))),
                Value::Generator(f) => {
                    self.note_implicit(scope, *f);
                    out.extend(self.get(&Node::Yield(*f)));
                }
                Value::ExtInstance(t) => match self.ext_method_returns(t, "__iter__") {
                    Some(r) => out.extend(r),
                    None => {
                        out.insert(Value::Unknown);
                    }
                },
                Value::Instance(c) => {
                    let iters = self.call_dunder(*c, v, "__iter__", Vec::new(), scope);
                    for it in iters {
                        match &it {
                            Value::Instance(k) => out.extend(self.call_dunder(*k, &it, "__next__", Vec::new(), scope)),
                            Value::Generator(f) => {
                                self.note_implicit(scope, *f);
                                out.extend(self.get(&Node::Yield(*f)));
                            }
                            Value::Container(ContainerKind::Dict, s) => out.extend(self.get(&Node::Keys(*s))),
                            Value::Container(_, s) => out.extend(self.get(&Node::Contents(*s))),
                            _ => {
                                out.insert(Value::Unknown);
                            }
                        }
                    }
                }
                _ => {
                    out.insert(Value::Unknown);
                }
            }
        }
        out
    }

    fn enter(&mut self, vals: &Values, scope: ScopeId) -> Values {
        let mut out = Values::new();
        for v in vals {
            match v {
                Value::Instance(c) => out.extend(self.call_dunder(*c, v, "__enter__", Vec::new(), scope)),
                Value::ExtInstance(t) => match self.ext_method_returns(t, "__enter__") {
                    Some(r) => out.extend(r),
                    None => {
                        out.insert(v.clone());
                    }
                },
                other => {
                    out.insert(other.clone());
                }
            }
        }
        out
    }

    /// Calls a special method of a user instance without call syntax.
    fn call_dunder(&mut self, c: ScopeId, recv: &Value, name: &str, args: Vec<Values>, scope: ScopeId) -> Values {
        let targets = self.class_lookup(c, name, recv, scope, true);
        let mut out = Values::new();
        for t in targets {
            match t {
                Value::BoundMethod(f, r) => out.extend(self.implicit_invoke(f, *r, args.clone(), scope)),
                Value::Function(f) => {
                    let mut all = vec![one(recv.clone())];
                    all.extend(args.iter().cloned());
                    self.note_implicit(scope, f);
                    self.invoke(f, None, &Args::positional(all));
                    out.extend(self.result_of(f));
                }
                Value::ExtFunction(fqn) => match self.db.return_type(&fqn) {
                    Some(r) => out.extend(Self::instances(r)),
                    None => {
                        out.insert(Value::Unknown);
                    }
                },
                _ => {}
            }
        }
        out
    }

    fn implicit_invoke(&mut self, f: ScopeId, recv: Value, args: Vec<Values>, scope: ScopeId) -> Values {
        self.note_implicit(scope, f);
        self.invoke(f, Some(recv), &Args::positional(args));
        self.result_of(f)
    }

    fn result_of(&self, f: ScopeId) -> Values {
        if self.is_generator(f) {
            one(Value::Generator(f))
        } else {
            self.get(&Node::Return(f))
        }
    }

    fn ev_call(&mut self, e: &'a Expr, call: &'a Call, scope: ScopeId) -> Values {
        let funcs = self.ev(&call.func, scope);
        let mut args = Args::default();
        for a in &call.args {
            match &a.kind {
                ExprKind::Starred(inner) => {
                    let v = self.ev(inner, scope);
                    args.pos.push((v, true));
                }
                _ => {
                    let v = self.ev(a, scope);
                    args.pos.push((v, false));
                }
            }
        }
        for k in &call.keywords {
            let v = self.ev(&k.value, scope);
            args.kw.push((k.name.clone(), v));
        }
        let mut out = Values::new();
        for f in funcs {
            out.extend(self.apply(&f, &args, e, call, scope));
        }
        out
    }

    fn apply(&mut self, f: &Value, args: &Args, e: &'a Expr, call: &'a Call, scope: ScopeId) -> Values {
        match f {
            Value::Function(fid) => {
                self.invoke(*fid, None, args);
                self.result_of(*fid)
            }
            Value::BoundMethod(fid, recv) => {
                self.invoke(*fid, Some((**recv).clone()), args);
                self.result_of(*fid)
            }
            Value::Class(c) => {
                let inst = Value::Instance(*c);
                for init in self.class_lookup(*c, "__init__", &inst, scope, false) {
                    if let Value::BoundMethod(fid, recv) = init {
                        self.invoke(fid, Some(*recv), args);
                    }
                }
                one(inst)
            }
            Value::Instance(c) => {
                let mut out = Values::new();
                for t in self.class_lookup(*c, "__call__", f, scope, false) {
                    out.extend(self.apply(&t, args, e, call, scope));
                }
                out
            }
            Value::ExtFunction(fqn) | Value::ExtClass(fqn) => {
                if let Some(res) = self.special_builtin(fqn, args, e, call, scope) {
                    return res;
                }
                if matches!(f, Value::ExtClass(_)) {
                    return one(Value::ExtInstance(fqn.clone()));
                }
                match self.db.return_type(fqn) {
                    Some(r) => Self::instances(r),
                    None => unknown(),
                }
            }
            Value::ExtInstance(t) => self.ext_method_returns(t, "__call__").unwrap_or_else(unknown),
            Value::ContainerMethod(kind, site, name) => self.container_method(*kind, *site, name, args, e, call),
            Value::Super(..) | Value::Module(_) | Value::Generator(_) | Value::Container(..) | Value::Unknown => {
                unknown()
            }
        }
    }

    /// Binds arguments to the parameters of user function `f`.
    fn invoke(&mut self, f: ScopeId, recv: Option<Value>, args: &Args) {
        let Some(func) = self.function(f) else { return };
        let params = &func.params;
        let positional: Vec<usize> = params
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p.kind, ParamKind::PositionalOnly | ParamKind::Positional))
            .map(|(i, _)| i)
            .collect();
        let vararg = params.iter().position(|p| p.kind == ParamKind::VarArgs);
        let varkw = params.iter().position(|p| p.kind == ParamKind::VarKeywords);
        let mut supplied = vec![false; params.len()];
        let mut next = 0;
        if let Some(r) = recv {
            if let Some(&p0) = positional.first() {
                self.add(Node::Def(params[p0].binding.id), &one(r));
                supplied[p0] = true;
                next = 1;
            }
        }
        let mut spread = false;
        let mut extra = 0i64;
        for (vals, starred) in &args.pos {
            let vals = if *starred {
                spread = true;
                self.iterate(vals, f)
            } else {
                vals.clone()
            };
            if spread {
                for &p in &positional[next.min(positional.len())..] {
                    self.add(Node::Def(params[p].binding.id), &vals);
                }
                if let Some(v) = vararg {
                    self.add(Node::Contents(params[v].binding.id), &vals);
                }
            } else if next < positional.len() {
                let p = positional[next];
                self.add(Node::Def(params[p].binding.id), &vals);
                supplied[p] = true;
                next += 1;
            } else if let Some(v) = vararg {
                let site = params[v].binding.id;
                self.add(Node::Elem(site, ElemKey::Int(extra)), &vals);
                self.add(Node::Contents(site), &vals);
                extra += 1;
            }
        }
        for (name, vals) in &args.kw {
            match name {
                Some(n) => {
                    let target = params.iter().position(|p| {
                        p.binding.name == *n && matches!(p.kind, ParamKind::Positional | ParamKind::KeywordOnly)
                    });
                    match (target, varkw) {
                        (Some(p), _) => {
                            self.add(Node::Def(params[p].binding.id), vals);
                            supplied[p] = true;
                        }
                        (None, Some(k)) => {
                            let site = params[k].binding.id;
                            self.add(Node::Elem(site, ElemKey::Str(n.clone())), vals);
                            self.add(Node::Contents(site), vals);
                            self.add(Node::Keys(site), &self.builtin_instance("builtins.str"));
                        }
                        (None, None) => {}
                    }
                }
                None => {
                    for v in vals {
                        let Value::Container(ContainerKind::Dict, s) = v else { continue };
                        let contents = self.get(&Node::Contents(*s));
                        for (i, p) in params.iter().enumerate() {
                            if supplied[i] || !matches!(p.kind, ParamKind::Positional | ParamKind::KeywordOnly) {
                                continue;
                            }
                            let el = self.get(&Node::Elem(*s, ElemKey::Str(p.binding.name.clone())));
                            let el = if el.is_empty() { contents.clone() } else { el };
                            self.add(Node::Def(p.binding.id), &el);
                        }
                        if let Some(k) = varkw {
                            self.add(Node::Contents(params[k].binding.id), &contents);
                        }
                    }
                }
            }
        }
        let outer = self.ir.scopes.get(f).parent.unwrap_or(ScopeId::MODULE);
        for (i, p) in params.iter().enumerate() {
            if supplied[i] {
                continue;
            }
            if let Some(d) = &p.default {
                let v = self.ev(d, outer);
                self.add(Node::Def(p.binding.id), &v);
            }
        }
        if let Some(v) = vararg {
            let id = params[v].binding.id;
            self.add_one(Node::Def(id), Value::Container(ContainerKind::Tuple, id));
        }
        if let Some(k) = varkw {
            let id = params[k].binding.id;
            self.add_one(Node::Def(id), Value::Container(ContainerKind::Dict, id));
        }
    }

    fn special_builtin(
        &mut self,
        fqn: &str,
        args: &Args,
        e: &'a Expr,
        call: &'a Call,
        scope: ScopeId,
    ) -> Option<Values> {
        let site = e.id;
        let inner = call.func.id;
        let container = |kind| one(Value::Container(kind, site));
        Some(match fqn {
            "builtins.list" | "builtins.sorted" | "builtins.reversed" | "builtins.tuple" | "builtins.set"
            | "builtins.frozenset" | "builtins.filter" => {
                let kind = match fqn {
                    "builtins.tuple" => ContainerKind::Tuple,
                    "builtins.set" | "builtins.frozenset" => ContainerKind::Set,
                    _ => ContainerKind::List,
                };
                let src = if fqn == "builtins.filter" { args.arg(1) } else { args.arg(0) };
                let elems = self.iterate(&src, scope);
                self.add(Node::Contents(site), &elems);
                container(kind)
            }
            "builtins.staticmethod" => args.arg(0),
            "builtins.dict" => {
                for v in args.arg(0) {
                    if let Value::Container(ContainerKind::Dict, s) = v {
                        let keys = self.get(&Node::Keys(s));
                        let contents = self.get(&Node::Contents(s));
                        self.add(Node::Keys(site), &keys);
                        self.add(Node::Contents(site), &contents);
                    }
                }
                for (name, vals) in &args.kw {
                    if let Some(n) = name {
                        self.add(Node::Elem(site, ElemKey::Str(n.clone())), vals);
                    }
                    self.add(Node::Contents(site), vals);
                }
                container(ContainerKind::Dict)
            }
            "builtins.iter" => args.arg(0),
            "builtins.next" => {
                let mut out = self.iterate(&args.arg(0), scope);
                out.extend(args.arg(1));
                out
            }
            "builtins.enumerate" | "builtins.zip" => {
                let columns: Vec<Values> = if fqn == "builtins.enumerate" {
                    vec![self.builtin_instance("builtins.int"), self.iterate(&args.arg(0), scope)]
                } else {
                    (0..args.pos.len()).map(|i| self.iterate(&args.arg(i), scope)).collect()
                };
                for (i, col) in columns.iter().enumerate() {
                    self.add(Node::Elem(inner, ElemKey::Int(i as i64)), col);
                    self.add(Node::Contents(inner), col);
                }
                self.add_one(Node::Contents(site), Value::Container(ContainerKind::Tuple, inner));
                container(ContainerKind::List)
            }
            "builtins.map" => {
                let elems = self.iterate(&args.arg(1), scope);
                let mut results = Values::new();
                for f in args.arg(0) {
                    let a = Args::positional(vec![elems.clone()]);
                    results.extend(self.apply(&f, &a, e, call, scope));
                }
                self.add(Node::Contents(site), &results);
                container(ContainerKind::List)
            }
            "builtins.getattr" => {
                let name = call.args.get(1).and_then(|a| a.str_literal())?;
                let mut out = Values::new();
                for v in args.arg(0) {
                    out.extend(self.attr_of(&v, name, scope));
                }
                out.extend(args.arg(2));
                out
            }
            "builtins.setattr" => {
                let name = call.args.get(1).and_then(|a| a.str_literal())?;
                let vals = args.arg(2);
                for v in args.arg(0) {
                    self.store_attr(&v, name, &vals, scope);
                }
                self.builtin_instance("builtins.NoneType")
            }
            "builtins.type" if args.pos.len() == 1 => args
                .arg(0)
                .into_iter()
                .map(|v| match v {
                    Value::Instance(c) => Value::Class(c),
                    Value::ExtInstance(t) => Value::ExtClass(t),
                    _ => Value::Unknown,
                })
                .collect(),
            "builtins.super" => {
                let mut out = Values::new();
                if args.pos.is_empty() {
                    let Some(f) = self.region(scope) else { return Some(unknown()) };
                    let Some(cls) = self.ir.scopes.enclosing_class(f) else { return Some(unknown()) };
                    let Some(first) = self.function(f).and_then(|func| func.params.first()) else {
                        return Some(unknown());
                    };
                    for r in self.get(&Node::Def(first.binding.id)) {
                        if matches!(r, Value::Instance(_) | Value::Class(_)) {
                            out.insert(Value::Super(cls, Box::new(r)));
                        }
                    }
                } else {
                    for c in args.arg(0) {
                        let Value::Class(cls) = c else { continue };
                        for r in args.arg(1) {
                            if matches!(r, Value::Instance(_) | Value::Class(_)) {
                                out.insert(Value::Super(cls, Box::new(r)));
                            }
                        }
                    }
                }
                out
            }
            _ => return None,
        })
    }

    fn container_method(
        &mut self,
        kind: ContainerKind,
        site: NodeId,
        name: &str,
        args: &Args,
        e: &'a Expr,
        call: &'a Call,
    ) -> Values {
        let result_site = e.id;
        let inner = call.func.id;
        let scope = ScopeId::MODULE;
        match name {
            "append" | "add" => {
                self.add(Node::Contents(site), &args.arg(0));
                self.builtin_instance("builtins.NoneType")
            }
            "insert" => {
                self.add(Node::Contents(site), &args.arg(1));
                self.builtin_instance("builtins.NoneType")
            }
            "extend" | "update" => {
                for v in args.arg(0) {
                    match v {
                        Value::Container(ContainerKind::Dict, s) if kind == ContainerKind::Dict => {
                            let keys = self.get(&Node::Keys(s));
                            let contents = self.get(&Node::Contents(s));
                            self.add(Node::Keys(site), &keys);
                            self.add(Node::Contents(site), &contents);
                        }
                        other => {
                            let elems = self.iterate(&one(other), scope);
                            self.add(Node::Contents(site), &elems);
                        }
                    }
                }
                for (n, vals) in &args.kw {
                    if let Some(n) = n {
                        self.add(Node::Elem(site, ElemKey::Str(n.clone())), vals);
                    }
                    self.add(Node::Contents(site), vals);
                }
                self.builtin_instance("builtins.NoneType")
            }
            "setdefault" => {
                let v = args.arg(1);
                if let Some(k) = call.args.first().and_then(key_of) {
                    self.add(Node::Elem(site, k), &v);
                }
                self.add(Node::Contents(site), &v);
                self.get(&Node::Contents(site))
            }
            "get" | "pop" => {
                let mut out = match call.args.first().and_then(key_of) {
                    Some(k) if kind == ContainerKind::Dict => self.get(&Node::Elem(site, k)),
                    _ => Values::new(),
                };
                if out.is_empty() {
                    out = self.get(&Node::Contents(site));
                }
                out.extend(args.arg(1));
                out
            }
            "copy" => one(Value::Container(kind, site)),
            "items" => {
                let keys = self.get(&Node::Keys(site));
                let contents = self.get(&Node::Contents(site));
                self.add(Node::Elem(inner, ElemKey::Int(0)), &keys);
                self.add(Node::Elem(inner, ElemKey::Int(1)), &contents);
                self.add(Node::Contents(inner), &keys);
                self.add(Node::Contents(inner), &contents);
                self.add_one(Node::Contents(result_site), Value::Container(ContainerKind::Tuple, inner));
                one(Value::Container(ContainerKind::List, result_site))
            }
            "keys" | "values" => {
                let src = if name == "keys" { Node::Keys(site) } else { Node::Contents(site) };
                let vals = self.get(&src);
                self.add(Node::Contents(result_site), &vals);
                one(Value::Container(ContainerKind::List, result_site))
            }
            _ => match self.db.return_type(&format!("{}.{name}", kind.builtin())) {
                Some(r) => Self::instances(r),
                None => unknown(),
            },
        }
    }
}

fn c3_merge(mut seqs: Vec<Vec<ClassRef>>) -> Option<Vec<ClassRef>> {
    let mut out = Vec::new();
    loop {
        seqs.retain(|s| !s.is_empty());
        if seqs.is_empty() {
            return Some(out);
        }
        let head = seqs.iter().map(|s| &s[0]).find(|h| !seqs.iter().any(|s| s[1..].contains(h)))?.clone();
        for s in &mut seqs {
            if s[0] == head {
                s.remove(0);
            }
        }
        out.push(head);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_module;

    struct Fixture {
        ir: ModuleIr,
        duc: DefUseChains,
        db: TypeStubDB,
    }

    impl Fixture {
        fn new(src: &str) -> Self {
            let db = TypeStubDB::shipped();
            let mut ir = parse_module(src).unwrap();
            ir.expand_star_imports(|m| db.star_exports(m));
            let duc = DefUseChains::build(&ir);
            Fixture { ir, duc, db }
        }

        fn eag(&self) -> ExtendedAssignmentGraph<'_> {
            ExtendedAssignmentGraph::build(&self.ir, &self.duc, &self.db)
        }
    }

    fn ext(t: &str) -> Values {
        one(Value::ExtInstance(t.to_string()))
    }

    const DF: &str = "pandas.core.frame.DataFrame";
    const SERIES: &str = "pandas.core.series.Series";
    const NDARRAY: &str = "numpy.ndarray";

    #[test]
    fn library_return_types_flow_into_variables() {
        let f = Fixture::new("import seaborn as sns\niris = sns.load_dataset('iris')\nx = iris.values\n");
        let g = f.eag();
        assert_eq!(g.points_to("iris", 2), ext(DF));
        assert_eq!(g.points_to("x", 3), ext(NDARRAY));
    }

    #[test]
    fn redefinitions_are_separate_nodes() {
        let src = "from sklearn.linear_model import LogisticRegressionCV\nfrom keras.models import Sequential\n\
                   model = LogisticRegressionCV()\nmodel.fit(1, 2)\nmodel = Sequential()\nmodel.fit(1, 2)\n";
        let f = Fixture::new(src);
        let g = f.eag();
        assert_eq!(g.points_to("model", 4), ext("sklearn.linear_model._logistic.LogisticRegressionCV"));
        assert_eq!(g.points_to("model", 6), ext("keras.engine.sequential.Sequential"));
    }

    #[test]
    fn strong_update_replaces_earlier_values() {
        let f =
            Fixture::new("class A:\n    def f(self): pass\nclass B:\n    def f(self): pass\nm = A()\nm = B()\nm.f()\n");
        let g = f.eag();
        let vals = g.points_to("m", 7);
        assert_eq!(vals.len(), 1);
        assert!(matches!(vals.iter().next(), Some(Value::Instance(c)) if f.ir.scopes.fqn(*c) == "__main__.B"));
    }

    #[test]
    fn undefined_source_is_unknown() {
        let f = Fixture::new("x = y\n");
        assert_eq!(f.eag().points_to("x", 1), unknown());
        assert_eq!(f.eag().points_to("nosuch", 1), unknown());
    }

    #[test]
    fn pandas_access_chains_are_typed() {
        let src = "import pandas as pd\n\ndf = pd.read_csv('./input.csv')\n\
                   x1 = df['a'].map(lambda x: x + 1.0)\n\
                   x2 = df.iloc[[False]].reset_index().copy()\n\
                   x3 = df.a.fillna(0)\n\
                   x4 = df.groupby(['a'])[['b']].agg({'b': ['min']})\n\
                   x5 = df[['b', 'c']]\n\
                   x6 = df.c.values.astype(int)\n";
        let f = Fixture::new(src);
        let g = f.eag();
        let rows = [("df", 3, DF), ("x1", 4, SERIES), ("x2", 5, DF), ("x3", 6, SERIES), ("x4", 7, DF), ("x5", 8, DF)];
        for (name, line, ty) in rows {
            assert_eq!(g.points_to(name, line), ext(ty), "{name}");
        }
        assert_eq!(g.points_to("x6", 9), ext(NDARRAY));
    }

    #[test]
    fn methods_bind_through_inheritance_and_super() {
        let src = "class Base:\n    def __init__(self, cb):\n        self.cb = cb\n    def run(self):\n        return self.cb\n\
                   class Child(Base):\n    def __init__(self, cb):\n        super().__init__(cb)\n\
                   def hook():\n    pass\n\
                   c = Child(hook)\nr = c.run()\n";
        let f = Fixture::new(src);
        let g = f.eag();
        let r = g.points_to("r", 12);
        assert!(matches!(r.iter().next(), Some(Value::Function(s)) if f.ir.scopes.fqn(*s) == "__main__.hook"), "{r:?}");
    }

    #[test]
    fn properties_call_their_getter() {
        let src = "def make():\n    return 1\nclass C:\n    @property\n    def p(self):\n        return make\n    @p.setter\n    def p(self, v):\n        pass\n\
                   x = C().p\n";
        let f = Fixture::new(src);
        let g = f.eag();
        let x = g.points_to("x", 10);
        assert!(matches!(x.iter().next(), Some(Value::Function(s)) if f.ir.scopes.fqn(*s) == "__main__.make"), "{x:?}");
    }

    #[test]
    fn containers_carry_callables() {
        let src = "def a(): pass\ndef b(): pass\nd = {'x': a, 'y': b}\nfx = d['x']\nfs = [a]\nfs.append(b)\n\
                   for h in fs:\n    h()\nt = (a, b)\np, q = t\n";
        let f = Fixture::new(src);
        let g = f.eag();
        let name = |v: &Values| -> Vec<String> { v.iter().map(|x| g.describe(x)).collect() };
        assert_eq!(name(&g.points_to("fx", 4)), ["__main__.a"]);
        assert_eq!(name(&g.points_to("h", 7)), ["__main__.a", "__main__.b"]);
        assert_eq!(name(&g.points_to("q", 10)), ["__main__.b"]);
    }

    #[test]
    fn generators_yield_into_loops() {
        let src = "def a(): pass\ndef gen():\n    yield a\nfor x in gen():\n    x()\n";
        let f = Fixture::new(src);
        let g = f.eag();
        assert_eq!(g.points_to("x", 4).iter().map(|v| g.describe(v)).collect::<Vec<_>>(), ["__main__.a"]);
    }

    #[test]
    fn fixed_point_is_stable() {
        let f = Fixture::new("import pandas as pd\ndf = pd.read_csv('f')\ndef g(x):\n    return x.head()\ny = g(df)\n");
        let mut g = f.eag();
        let before = g.nodes().clone();
        assert!(!g.propagate_once());
        assert_eq!(&before, g.nodes());
        assert_eq!(g.points_to("y", 5), ext(DF));
    }

    #[test]
    fn deep_chains_hit_the_cap() {
        let chain = format!("import pandas as pd\nx = pd.read_csv('f'){}\n", ".copy()".repeat(40));
        let f = Fixture::new(&chain);
        assert_eq!(f.eag().points_to("x", 2), unknown());
    }

    #[test]
    fn zero_stub_db_degrades_to_unknown() {
        let ir = parse_module("import seaborn as sns\nx = sns.load_dataset('iris')\n").unwrap();
        let duc = DefUseChains::build(&ir);
        let db = TypeStubDB::empty();
        let g = ExtendedAssignmentGraph::build(&ir, &duc, &db);
        assert_eq!(g.points_to("x", 2), unknown());
    }

    #[test]
    fn dot_dump_names_definition_sites() {
        let f = Fixture::new("import numpy as np\nm = np.array(1)\nm = 2\n");
        let dot = f.eag().to_dot();
        assert!(dot.starts_with("digraph eag"));
        assert!(dot.contains("\"m@2\" -> \"numpy.ndarray instance\""));
    }
}
