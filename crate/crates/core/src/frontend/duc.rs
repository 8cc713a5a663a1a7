// SPDX-License-Identifier: Apache-2.0

//! Flow-sensitive def-use chains.
//!
//! Each function, lambda and the module body is analyzed as its own flow
//! region with reaching definitions over structured control flow. Class
//! bodies and comprehensions run inline in their enclosing region. Reads of
//! names owned by another region are resolved afterwards through the
//! region's escape points: the places where the function (or its class) is
//! referenced. A direct call sees the caller's state at the call; any other
//! reference conservatively sees that state plus every later definition.

use std::collections::{BTreeMap, BTreeSet};

use super::ir::*;
use super::scope::{ScopeId, ScopeKind, ScopeTree};

/// A variable slot: owning scope and name.
pub type Key = (ScopeId, String);

/// Line to the `(name, definition)` pairs defined or used on it.
pub type LocationMap = BTreeMap<u32, BTreeSet<(String, NodeId)>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefInfo {
    pub name: String,
    pub owner: ScopeId,
    pub line: u32,
}

#[derive(Debug, Clone, Default)]
pub struct DefUseChains {
    uses: BTreeMap<NodeId, BTreeSet<NodeId>>,
    builtins: BTreeSet<NodeId>,
    defs: BTreeMap<NodeId, DefInfo>,
    members: BTreeMap<ScopeId, BTreeMap<String, BTreeSet<NodeId>>>,
    locations: LocationMap,
}

static EMPTY: BTreeSet<NodeId> = BTreeSet::new();

impl DefUseChains {
    pub fn build(ir: &ModuleIr) -> Self {
        let statics = Statics::collect(ir);
        let index = ir.index();
        let mut c = Collector::default();
        Flow::new(&ir.scopes, &statics, ScopeId::MODULE, &mut c).run_body(&ir.body, ScopeId::MODULE, State::default());
        for (scope, func) in &index.functions {
            let mut flow = Flow::new(&ir.scopes, &statics, *scope, &mut c);
            let mut st = State::default();
            for p in &func.params {
                flow.define(&mut st, &p.binding);
            }
            flow.run_body(&func.body, *scope, st);
        }
        Self::resolve(ir, &statics, c)
    }

    fn resolve(ir: &ModuleIr, statics: &Statics, c: Collector) -> Self {
        let mut out = DefUseChains { members: c.members.clone(), ..Default::default() };
        for (id, (key, line)) in &statics.binding_key {
            out.defs.insert(*id, DefInfo { name: key.1.clone(), owner: key.0, line: *line });
            out.locations.entry(*line).or_default().insert((key.1.clone(), *id));
        }
        let resolver = Resolver { scopes: &ir.scopes, statics, c: &c };
        for (id, u) in &c.uses {
            let mut defs = u.slot.defs.clone();
            if let (Some(key), true) = (&u.key, u.slot.external) {
                let mut visited = BTreeSet::new();
                defs.extend(resolver.escape_defs(u.region, key, &mut visited));
            }
            if defs.is_empty() {
                out.builtins.insert(*id);
            }
            for d in &defs {
                out.locations.entry(u.line).or_default().insert((u.name.clone(), *d));
            }
            out.uses.insert(*id, defs);
        }
        out
    }

    /// Definitions reaching a name-load expression.
    pub fn defs_of(&self, use_id: NodeId) -> &BTreeSet<NodeId> {
        self.uses.get(&use_id).unwrap_or(&EMPTY)
    }

    /// True if the name load may refer to a builtin: nothing user-defined reaches it.
    pub fn is_builtin(&self, use_id: NodeId) -> bool {
        self.builtins.contains(&use_id)
    }

    pub fn def_info(&self, def: NodeId) -> Option<&DefInfo> {
        self.defs.get(&def)
    }

    /// Definitions of class-body names live at the end of the class body.
    pub fn class_members(&self, class: ScopeId) -> Option<&BTreeMap<String, BTreeSet<NodeId>>> {
        self.members.get(&class)
    }

    pub fn uses(&self) -> impl Iterator<Item = (NodeId, &BTreeSet<NodeId>)> {
        self.uses.iter().map(|(k, v)| (*k, v))
    }

    pub fn locations(&self) -> &LocationMap {
        &self.locations
    }
}

/// Facts read off the IR before any flow analysis.
#[derive(Debug, Default)]
struct Statics {
    binding_key: BTreeMap<NodeId, (Key, u32)>,
    all_defs: BTreeMap<Key, BTreeSet<NodeId>>,
    /// Function/class binding id to the scope it creates.
    callable_of: BTreeMap<NodeId, ScopeId>,
    callable_by_key: BTreeMap<Key, BTreeSet<ScopeId>>,
    /// Bindings an activation of the scope may perform in outer scopes.
    escaping: BTreeMap<ScopeId, BTreeSet<NodeId>>,
    /// Functions whose body runs exactly when a direct call is evaluated.
    direct: BTreeSet<ScopeId>,
}

impl Statics {
    fn collect(ir: &ModuleIr) -> Self {
        let scopes = &ir.scopes;
        let mut s = Statics::default();
        let mut binding_scopes: Vec<(ScopeId, NodeId)> = Vec::new();
        let mut refs: Vec<(ScopeId, String)> = Vec::new();
        let mut add = |s: &mut Statics, scope: ScopeId, b: &Binding| {
            let owner = scopes.binding_owner(scope, &b.name);
            let key = (owner, b.name.clone());
            s.binding_key.insert(b.id, (key.clone(), b.line));
            s.all_defs.entry(key).or_default().insert(b.id);
            binding_scopes.push((scope, b.id));
        };
        walk_body(&ir.body, ScopeId::MODULE, &mut |scope, item| match item {
            Item::Stmt(stmt) => match &stmt.kind {
                StmtKind::Assign { targets, .. } => {
                    for t in targets {
                        for b in target_bindings(t) {
                            add(&mut s, scope, b);
                        }
                    }
                }
                StmtKind::AugAssign { target, .. } => {
                    for b in target_bindings(target) {
                        add(&mut s, scope, b);
                    }
                }
                StmtKind::For { target, .. } => {
                    for b in target_bindings(target) {
                        add(&mut s, scope, b);
                    }
                }
                StmtKind::With { items, .. } => {
                    for t in items.iter().filter_map(|i| i.target.as_ref()) {
                        for b in target_bindings(t) {
                            add(&mut s, scope, b);
                        }
                    }
                }
                StmtKind::Try { handlers, .. } => {
                    for b in handlers.iter().filter_map(|h| h.name.as_ref()) {
                        add(&mut s, scope, b);
                    }
                }
                StmtKind::Import(bs) => {
                    for ib in bs.iter().filter(|ib| ib.kind != ImportKind::Star) {
                        add(&mut s, scope, &ib.binding);
                    }
                }
                StmtKind::FunctionDef(f) => {
                    if let Some(b) = &f.binding {
                        add(&mut s, scope, b);
                        s.callable_of.insert(b.id, f.scope);
                    }
                    for p in &f.params {
                        add(&mut s, f.scope, &p.binding);
                    }
                    if f.decorators.is_empty() && !f.is_generator && f.descriptor == Descriptor::None {
                        s.direct.insert(f.scope);
                    }
                }
                StmtKind::ClassDef(c) => {
                    add(&mut s, scope, &c.binding);
                    s.callable_of.insert(c.binding.id, c.scope);
                }
                _ => {}
            },
            Item::Expr(expr) => match &expr.kind {
                ExprKind::Name(n) => refs.push((scope, n.clone())),
                ExprKind::Lambda(f) => {
                    for p in &f.params {
                        add(&mut s, f.scope, &p.binding);
                    }
                    if !f.is_generator {
                        s.direct.insert(f.scope);
                    }
                }
                ExprKind::Comprehension(c) => {
                    for g in &c.generators {
                        for b in target_bindings(&g.target) {
                            add(&mut s, c.scope, b);
                        }
                    }
                }
                ExprKind::NamedExpr { target, .. } => {
                    let owner = scopes.inline_owner(scope);
                    add(&mut s, owner, target);
                }
                _ => {}
            },
        });
        for (id, scope) in &s.callable_of {
            let key = s.binding_key[id].0.clone();
            s.callable_by_key.entry(key).or_default().insert(*scope);
        }

        // Escaping bindings of every function, lambda and class scope, closed
        // over statically referenced callables.
        let callables: Vec<ScopeId> = scopes
            .iter()
            .filter(|sc| matches!(sc.kind, ScopeKind::Function | ScopeKind::Lambda | ScopeKind::Class))
            .map(|sc| sc.id)
            .collect();
        let mut referenced: BTreeMap<ScopeId, BTreeSet<ScopeId>> = BTreeMap::new();
        for (scope, name) in &refs {
            let Some(owner) = scopes.resolve(*scope, name) else { continue };
            let Some(targets) = s.callable_by_key.get(&(owner, name.clone())) else { continue };
            for c in &callables {
                if scopes.is_within(*scope, *c) {
                    referenced.entry(*c).or_default().extend(targets.iter().copied());
                }
            }
        }
        for c in &callables {
            let set: BTreeSet<NodeId> = binding_scopes
                .iter()
                .filter(|(bs, id)| scopes.is_within(*bs, *c) && !scopes.is_within(s.binding_key[id].0 .0, *c))
                .map(|(_, id)| *id)
                .collect();
            s.escaping.insert(*c, set);
        }
        loop {
            let mut changed = false;
            for c in &callables {
                let Some(targets) = referenced.get(c) else { continue };
                let mut extra = BTreeSet::new();
                for t in targets {
                    for id in &s.escaping[t] {
                        if !scopes.is_within(s.binding_key[id].0 .0, *c) {
                            extra.insert(*id);
                        }
                    }
                }
                let set = s.escaping.get_mut(c).expect("callable scope");
                let before = set.len();
                set.extend(extra);
                changed |= set.len() != before;
            }
            if !changed {
                break;
            }
        }
        s
    }
}

fn target_bindings(t: &Target) -> Vec<&Binding> {
    let mut out = Vec::new();
    fn go<'a>(t: &'a Target, out: &mut Vec<&'a Binding>) {
        match t {
            Target::Name(b) => out.push(b),
            Target::Sequence(ts) => ts.iter().for_each(|t| go(t, out)),
            Target::Starred(t) => go(t, out),
            Target::Attribute { .. } | Target::Subscript { .. } => {}
        }
    }
    go(t, &mut out);
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Slot {
    defs: BTreeSet<NodeId>,
    /// Whatever reaches the region's entry from outside also reaches here.
    external: bool,
}

/// Reaching definitions. Absent keys hold the region default: unbound for
/// locals, entry-only for names owned by other regions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct State {
    slots: BTreeMap<Key, Slot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EscapeMode {
    Call,
    After,
}

#[derive(Debug, Clone)]
struct Escape {
    region: ScopeId,
    state: State,
    mode: EscapeMode,
    /// Definitions with ids from here on may run after the escape.
    horizon: u32,
}

#[derive(Debug)]
struct UseRecord {
    region: ScopeId,
    key: Option<Key>,
    name: String,
    line: u32,
    slot: Slot,
}

#[derive(Debug, Default)]
struct Collector {
    uses: BTreeMap<NodeId, UseRecord>,
    escapes: BTreeMap<ScopeId, BTreeMap<NodeId, Escape>>,
    members: BTreeMap<ScopeId, BTreeMap<String, BTreeSet<NodeId>>>,
}

#[derive(Default)]
struct LoopCtx {
    breaks: Option<State>,
    continues: Option<State>,
}

struct Flow<'a> {
    scopes: &'a ScopeTree,
    statics: &'a Statics,
    region: ScopeId,
    c: &'a mut Collector,
    horizon: Option<u32>,
    loops: Vec<LoopCtx>,
    tries: Vec<Option<State>>,
}

impl<'a> Flow<'a> {
    fn new(scopes: &'a ScopeTree, statics: &'a Statics, region: ScopeId, c: &'a mut Collector) -> Self {
        Flow { scopes, statics, region, c, horizon: None, loops: Vec::new(), tries: Vec::new() }
    }

    fn default_slot(&self, key: &Key) -> Slot {
        Slot { defs: BTreeSet::new(), external: self.scopes.flow_region(key.0) != self.region }
    }

    fn slot(&self, st: &State, key: &Key) -> Slot {
        st.slots.get(key).cloned().unwrap_or_else(|| self.default_slot(key))
    }

    fn join(&self, a: Option<State>, b: Option<State>) -> Option<State> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(mut a), Some(b)) => {
                let keys: BTreeSet<Key> = a.slots.keys().chain(b.slots.keys()).cloned().collect();
                for key in keys {
                    let mut sa = self.slot(&a, &key);
                    let sb = self.slot(&b, &key);
                    sa.defs.extend(sb.defs);
                    sa.external |= sb.external;
                    a.slots.insert(key, sa);
                }
                Some(a)
            }
        }
    }

    fn key_of(&self, b: &Binding) -> Key {
        self.statics.binding_key[&b.id].0.clone()
    }

    fn define(&mut self, st: &mut State, b: &Binding) {
        let key = self.key_of(b);
        st.slots.insert(key, Slot { defs: BTreeSet::from([b.id]), external: false });
    }

    fn run_body(&mut self, body: &[Stmt], scope: ScopeId, st: State) -> Option<State> {
        self.stmts(body, scope, Some(st))
    }

    fn stmts(&mut self, body: &[Stmt], scope: ScopeId, mut st: Option<State>) -> Option<State> {
        for stmt in body {
            let Some(s) = st else { return None };
            st = self.stmt(stmt, scope, s);
            if self.tries.last().is_some() {
                let acc = self.tries.pop().flatten();
                let joined = self.join(acc, st.clone());
                self.tries.push(joined);
            }
        }
        st
    }

    fn stmt(&mut self, stmt: &Stmt, scope: ScopeId, mut st: State) -> Option<State> {
        match &stmt.kind {
            StmtKind::Expr(e) => self.expr(e, scope, &mut st),
            StmtKind::Assign { targets, value } => {
                self.expr(value, scope, &mut st);
                for t in targets {
                    self.target(t, scope, &mut st);
                }
            }
            StmtKind::AugAssign { target, read, value, .. } => {
                self.expr(read, scope, &mut st);
                self.expr(value, scope, &mut st);
                self.target(target, scope, &mut st);
            }
            StmtKind::Import(bs) => {
                for ib in bs.iter().filter(|ib| ib.kind != ImportKind::Star) {
                    self.define(&mut st, &ib.binding);
                }
            }
            StmtKind::FunctionDef(f) => {
                for d in &f.decorators {
                    self.expr(d, scope, &mut st);
                }
                for d in f.params.iter().filter_map(|p| p.default.as_ref()) {
                    self.expr(d, scope, &mut st);
                }
                if let Some(b) = &f.binding {
                    self.define(&mut st, b);
                    if !f.decorators.is_empty() {
                        // The decorator may call or store the function right away.
                        self.escape(f.scope, b.id, EscapeMode::After, &mut st);
                    }
                }
            }
            StmtKind::ClassDef(c) => {
                for e in c.decorators.iter().chain(&c.bases) {
                    self.expr(e, scope, &mut st);
                }
                for k in &c.keywords {
                    self.expr(&k.value, scope, &mut st);
                }
                let end = self.stmts(&c.body, c.scope, Some(st.clone()));
                let mut members: BTreeMap<String, BTreeSet<NodeId>> = BTreeMap::new();
                if let Some(end) = &end {
                    for ((owner, name), slot) in &end.slots {
                        if *owner == c.scope {
                            members.entry(name.clone()).or_default().extend(slot.defs.iter().copied());
                        }
                    }
                }
                let entry = self.c.members.entry(c.scope).or_default();
                for (k, v) in members {
                    entry.entry(k).or_default().extend(v);
                }
                st = end.unwrap_or(st);
                self.define(&mut st, &c.binding);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e, scope, &mut st);
                }
                return None;
            }
            StmtKind::If { test, body, orelse } => {
                self.expr(test, scope, &mut st);
                let a = self.stmts(body, scope, Some(st.clone()));
                let b = self.stmts(orelse, scope, Some(st));
                return self.join(a, b);
            }
            StmtKind::While { test, body, orelse } => {
                return self.while_loop(test, body, orelse, scope, st);
            }
            StmtKind::For { target, iter, body, orelse } => {
                self.expr(iter, scope, &mut st);
                return self.for_loop(target, iter.id, body, orelse, scope, st);
            }
            StmtKind::With { items, body } => {
                for item in items {
                    self.expr(&item.context, scope, &mut st);
                    if let Some(t) = &item.target {
                        self.target(t, scope, &mut st);
                    }
                }
                return self.stmts(body, scope, Some(st));
            }
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                self.tries.push(Some(st.clone()));
                let body_end = self.stmts(body, scope, Some(st));
                let acc = self.tries.pop().flatten();
                let mut exits = self.stmts(orelse, scope, body_end);
                for h in handlers {
                    let Some(mut hs) = acc.clone() else { continue };
                    if let Some(t) = &h.typ {
                        self.expr(t, scope, &mut hs);
                    }
                    if let Some(n) = &h.name {
                        self.define(&mut hs, n);
                    }
                    let end = self.stmts(&h.body, scope, Some(hs));
                    exits = self.join(exits, end);
                }
                if finalbody.is_empty() {
                    return exits;
                }
                // Exceptional path through `finally`, for its uses only.
                self.stmts(finalbody, scope, acc);
                return self.stmts(finalbody, scope, exits);
            }
            StmtKind::Eval(es) => {
                for e in es {
                    self.expr(e, scope, &mut st);
                }
            }
            StmtKind::Break => {
                if let Some(ctx) = self.loops.pop() {
                    let breaks = self.join(ctx.breaks, Some(st));
                    self.loops.push(LoopCtx { breaks, continues: ctx.continues });
                }
                return None;
            }
            StmtKind::Continue => {
                if let Some(ctx) = self.loops.pop() {
                    let continues = self.join(ctx.continues, Some(st));
                    self.loops.push(LoopCtx { breaks: ctx.breaks, continues });
                }
                return None;
            }
            StmtKind::Global(_) | StmtKind::Nonlocal(_) | StmtKind::Pass | StmtKind::Opaque => {}
        }
        Some(st)
    }

    fn enter_loop(&mut self, start: NodeId) -> Option<u32> {
        let saved = self.horizon;
        self.horizon = Some(saved.map_or(start.0, |h| h.min(start.0)));
        saved
    }

    fn while_loop(
        &mut self,
        test: &Expr,
        body: &[Stmt],
        orelse: &[Stmt],
        scope: ScopeId,
        entry: State,
    ) -> Option<State> {
        let saved = self.enter_loop(test.id);
        let mut head = entry.clone();
        let (after_test, breaks) = loop {
            let mut s = head.clone();
            self.expr(test, scope, &mut s);
            self.loops.push(LoopCtx::default());
            let end = self.stmts(body, scope, Some(s.clone()));
            let ctx = self.loops.pop().unwrap_or_default();
            let next = self.join(Some(entry.clone()), end);
            let next = self.join(next, ctx.continues).unwrap_or_default();
            let next = self.join(Some(next), Some(head.clone())).unwrap_or_default();
            if next == head {
                break (s, ctx.breaks);
            }
            head = next;
        };
        self.horizon = saved;
        let end = self.stmts(orelse, scope, Some(after_test));
        self.join(end, breaks)
    }

    fn for_loop(
        &mut self,
        target: &Target,
        start: NodeId,
        body: &[Stmt],
        orelse: &[Stmt],
        scope: ScopeId,
        entry: State,
    ) -> Option<State> {
        let saved = self.enter_loop(start);
        let mut head = entry.clone();
        let breaks = loop {
            let mut s = head.clone();
            self.target(target, scope, &mut s);
            self.loops.push(LoopCtx::default());
            let end = self.stmts(body, scope, Some(s));
            let ctx = self.loops.pop().unwrap_or_default();
            let next = self.join(Some(entry.clone()), end);
            let next = self.join(next, ctx.continues).unwrap_or_default();
            let next = self.join(Some(next), Some(head.clone())).unwrap_or_default();
            if next == head {
                break ctx.breaks;
            }
            head = next;
        };
        self.horizon = saved;
        let end = self.stmts(orelse, scope, Some(head));
        self.join(end, breaks)
    }

    fn target(&mut self, t: &Target, scope: ScopeId, st: &mut State) {
        match t {
            Target::Name(b) => self.define(st, b),
            Target::Attribute { value, .. } => self.expr(value, scope, st),
            Target::Subscript { value, index, .. } => {
                self.expr(value, scope, st);
                self.expr(index, scope, st);
            }
            Target::Sequence(ts) => {
                for t in ts {
                    self.target(t, scope, st);
                }
            }
            Target::Starred(t) => self.target(t, scope, st),
        }
    }

    fn expr(&mut self, e: &Expr, scope: ScopeId, st: &mut State) {
        match &e.kind {
            ExprKind::Name(n) => self.use_name(e, n, scope, st, false),
            ExprKind::Literal(_) => {}
            ExprKind::Attribute { value, .. } => self.expr(value, scope, st),
            ExprKind::Subscript { value, index } => {
                self.expr(value, scope, st);
                self.expr(index, scope, st);
            }
            ExprKind::Call(call) => {
                match &call.func.kind {
                    ExprKind::Name(n) => self.use_name(&call.func, n, scope, st, true),
                    _ => self.expr(&call.func, scope, st),
                }
                for a in &call.args {
                    self.expr(a, scope, st);
                }
                for k in &call.keywords {
                    self.expr(&k.value, scope, st);
                }
            }
            ExprKind::FString(items)
            | ExprKind::Tuple(items)
            | ExprKind::List(items)
            | ExprKind::Set(items)
            | ExprKind::Slice(items)
            | ExprKind::BoolOp(items) => {
                for i in items {
                    self.expr(i, scope, st);
                }
            }
            ExprKind::Dict(entries) => {
                for (k, v) in entries {
                    if let Some(k) = k {
                        self.expr(k, scope, st);
                    }
                    self.expr(v, scope, st);
                }
            }
            ExprKind::BinOp { left, right, .. } => {
                self.expr(left, scope, st);
                self.expr(right, scope, st);
            }
            ExprKind::UnaryOp { operand, .. } => self.expr(operand, scope, st),
            ExprKind::Compare { left, comparators, .. } => {
                self.expr(left, scope, st);
                for c in comparators {
                    self.expr(c, scope, st);
                }
            }
            ExprKind::IfExp { test, body, orelse } => {
                self.expr(test, scope, st);
                let mut other = st.clone();
                self.expr(body, scope, st);
                self.expr(orelse, scope, &mut other);
                if let Some(j) = self.join(Some(st.clone()), Some(other)) {
                    *st = j;
                }
            }
            ExprKind::Lambda(f) => {
                for d in f.params.iter().filter_map(|p| p.default.as_ref()) {
                    self.expr(d, scope, st);
                }
                self.escape(f.scope, e.id, EscapeMode::After, st);
            }
            ExprKind::Comprehension(comp) => {
                for (i, g) in comp.generators.iter().enumerate() {
                    let s = if i == 0 { scope } else { comp.scope };
                    self.expr(&g.iter, s, st);
                    self.target(&g.target, comp.scope, st);
                    for cond in &g.ifs {
                        self.expr(cond, comp.scope, st);
                    }
                }
                self.expr(&comp.elt, comp.scope, st);
                if let Some(v) = &comp.value {
                    self.expr(v, comp.scope, st);
                }
            }
            ExprKind::Starred(x) | ExprKind::Await(x) | ExprKind::YieldFrom(x) => self.expr(x, scope, st),
            ExprKind::Yield(x) => {
                if let Some(x) = x {
                    self.expr(x, scope, st);
                }
            }
            ExprKind::NamedExpr { target, value } => {
                self.expr(value, scope, st);
                self.define(st, target);
            }
        }
    }

    fn use_name(&mut self, e: &Expr, name: &str, scope: ScopeId, st: &mut State, callee: bool) {
        let mut lookup = scope;
        let mut found = None;
        while let Some(owner) = self.scopes.resolve(lookup, name) {
            let key = (owner, name.to_string());
            let slot = self.slot(st, &key);
            let owner_scope = self.scopes.get(owner);
            // An unbound class-body name falls back to the enclosing scopes.
            if owner_scope.kind == ScopeKind::Class && slot.defs.is_empty() && !slot.external {
                match owner_scope.parent {
                    Some(p) => {
                        lookup = p;
                        continue;
                    }
                    None => break,
                }
            }
            found = Some((key, slot));
            break;
        }
        let (key, slot) = match found {
            Some((k, s)) => (Some(k), s),
            None => (None, Slot::default()),
        };

        let mut callables: BTreeSet<ScopeId> =
            slot.defs.iter().filter_map(|d| self.statics.callable_of.get(d).copied()).collect();
        if slot.external {
            if let Some(set) = key.as_ref().and_then(|k| self.statics.callable_by_key.get(k)) {
                callables.extend(set.iter().copied());
            }
        }
        for c in callables {
            let mode = if callee && self.statics.direct.contains(&c) { EscapeMode::Call } else { EscapeMode::After };
            self.escape(c, e.id, mode, st);
        }

        let record = self.c.uses.entry(e.id).or_insert_with(|| UseRecord {
            region: self.region,
            key,
            name: name.to_string(),
            line: e.line,
            slot: Slot::default(),
        });
        record.slot.defs.extend(slot.defs);
        record.slot.external |= slot.external;
    }

    /// Records that `callable` may run from this point and applies its
    /// writes to outer scopes.
    fn escape(&mut self, callable: ScopeId, point: NodeId, mode: EscapeMode, st: &mut State) {
        let horizon = self.horizon.map_or(point.0, |h| h.min(point.0));
        let esc = Escape { region: self.region, state: st.clone(), mode, horizon };
        let prev = self.c.escapes.get_mut(&callable).and_then(|m| m.remove(&point));
        let esc = match prev {
            Some(prev) => Escape {
                state: self.join(Some(prev.state), Some(esc.state)).unwrap_or_default(),
                mode: if prev.mode == EscapeMode::After { EscapeMode::After } else { mode },
                ..esc
            },
            None => esc,
        };
        self.c.escapes.entry(callable).or_default().insert(point, esc);
        if let Some(writes) = self.statics.escaping.get(&callable) {
            for id in writes {
                let key = self.statics.binding_key[id].0.clone();
                let mut s = self.slot(st, &key);
                s.defs.insert(*id);
                st.slots.insert(key, s);
            }
        }
    }
}

struct Resolver<'a> {
    scopes: &'a ScopeTree,
    statics: &'a Statics,
    c: &'a Collector,
}

impl Resolver<'_> {
    /// Definitions of `key` visible on entry to `region` (a function or lambda).
    fn escape_defs(&self, region: ScopeId, key: &Key, visited: &mut BTreeSet<ScopeId>) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        if region == ScopeId::MODULE || !visited.insert(region) {
            return out;
        }
        let all = self.statics.all_defs.get(key);
        // A method escapes with its class.
        let mut chain = vec![region];
        let mut cur = self.scopes.get(region).parent;
        while let Some(p) = cur {
            if self.scopes.get(p).kind != ScopeKind::Class {
                break;
            }
            chain.push(p);
            cur = self.scopes.get(p).parent;
        }
        let points: Vec<&Escape> =
            chain.iter().filter_map(|s| self.c.escapes.get(s)).flat_map(|m| m.values()).collect();
        if points.is_empty() {
            return all.cloned().unwrap_or_default();
        }
        let owner_region = self.scopes.flow_region(key.0);
        for esc in points {
            let slot = esc
                .state
                .slots
                .get(key)
                .cloned()
                .unwrap_or_else(|| Slot { defs: BTreeSet::new(), external: owner_region != esc.region });
            out.extend(slot.defs.iter().copied());
            if esc.mode == EscapeMode::After {
                if let Some(all) = all {
                    out.extend(all.iter().filter(|d| d.0 >= esc.horizon));
                }
            }
            if slot.external {
                out.extend(self.escape_defs(esc.region, key, visited));
            }
        }
        out
    }
}
