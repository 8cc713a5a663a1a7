// SPDX-License-Identifier: Apache-2.0

//! Lowering from the parser's AST into [`ModuleIr`].

use rustpython_parser::ast::{self, Ranged};

use super::ir::*;
use super::scope::{ScopeId, ScopeKind, ScopeTree};

/// Byte offset to 1-based line number.
pub(crate) struct LineIndex {
    starts: Vec<u32>,
}

impl LineIndex {
    pub(crate) fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i as u32 + 1));
        LineIndex { starts }
    }

    pub(crate) fn line(&self, offset: u32) -> u32 {
        match self.starts.binary_search(&offset) {
            Ok(i) => i as u32 + 1,
            Err(i) => i as u32,
        }
    }
}

pub(crate) struct Lowerer<'s> {
    src: &'s str,
    lines: LineIndex,
    scopes: ScopeTree,
    next_id: u32,
    /// Yield seen per open function-like scope.
    yields: Vec<bool>,
}

impl<'s> Lowerer<'s> {
    pub(crate) fn new(src: &'s str) -> Self {
        Lowerer { src, lines: LineIndex::new(src), scopes: ScopeTree::new(), next_id: 0, yields: Vec::new() }
    }

    pub(crate) fn finish(mut self, suite: &[ast::Stmt]) -> ModuleIr {
        declare(&mut self.scopes, ScopeId::MODULE, suite);
        let body = self.body(suite, ScopeId::MODULE);
        ModuleIr { body, scopes: self.scopes, node_count: self.next_id }
    }

    fn id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    fn line_of(&self, node: &impl Ranged) -> u32 {
        self.lines.line(node.start().into())
    }

    fn binding(&mut self, scope: ScopeId, name: &str, line: u32) -> Binding {
        self.scopes.bind(scope, name);
        Binding { id: self.id(), name: name.to_string(), line }
    }

    fn body(&mut self, stmts: &[ast::Stmt], scope: ScopeId) -> Vec<Stmt> {
        stmts.iter().map(|s| self.stmt(s, scope)).collect()
    }

    fn stmt(&mut self, stmt: &ast::Stmt, scope: ScopeId) -> Stmt {
        use ast::Stmt as S;
        let line = self.line_of(stmt);
        let kind = match stmt {
            S::FunctionDef(f) => {
                let line = self.header_line(stmt, &f.decorator_list, "def");
                self.function_def(scope, &f.name, &f.args, &f.body, &f.decorator_list, line)
            }
            S::AsyncFunctionDef(f) => {
                let line = self.header_line(stmt, &f.decorator_list, "def");
                self.function_def(scope, &f.name, &f.args, &f.body, &f.decorator_list, line)
            }
            S::ClassDef(c) => {
                let line = self.header_line(stmt, &c.decorator_list, "class");
                let decorators = self.exprs(&c.decorator_list, scope);
                let bases = self.exprs(&c.bases, scope);
                let keywords = self.keywords(&c.keywords, scope);
                let cscope = self.scopes.add(ScopeKind::Class, scope, &c.name, line);
                declare(&mut self.scopes, cscope, &c.body);
                let body = self.body(&c.body, cscope);
                let binding = self.binding(scope, &c.name, line);
                StmtKind::ClassDef(Box::new(Class {
                    binding,
                    name: c.name.to_string(),
                    scope: cscope,
                    bases,
                    keywords,
                    body,
                    decorators,
                    line,
                }))
            }
            S::Return(r) => StmtKind::Return(r.value.as_ref().map(|v| self.expr(v, scope))),
            S::Delete(d) => StmtKind::Eval(self.exprs(&d.targets, scope)),
            S::Assign(a) => {
                let value = self.expr(&a.value, scope);
                let targets = a.targets.iter().map(|t| self.target(t, scope)).collect();
                StmtKind::Assign { targets, value }
            }
            S::AnnAssign(a) => match &a.value {
                Some(v) => {
                    let value = self.expr(v, scope);
                    let target = self.target(&a.target, scope);
                    StmtKind::Assign { targets: vec![target], value }
                }
                None => StmtKind::Opaque,
            },
            S::AugAssign(a) => {
                let read = self.expr(&a.target, scope);
                let value = self.expr(&a.value, scope);
                let target = self.target(&a.target, scope);
                StmtKind::AugAssign { target, read, op: binop(a.op), value }
            }
            S::For(f) => self.for_stmt(&f.target, &f.iter, &f.body, &f.orelse, scope),
            S::AsyncFor(f) => self.for_stmt(&f.target, &f.iter, &f.body, &f.orelse, scope),
            S::While(w) => StmtKind::While {
                test: self.expr(&w.test, scope),
                body: self.body(&w.body, scope),
                orelse: self.body(&w.orelse, scope),
            },
            S::If(i) => StmtKind::If {
                test: self.expr(&i.test, scope),
                body: self.body(&i.body, scope),
                orelse: self.body(&i.orelse, scope),
            },
            S::With(w) => self.with_stmt(&w.items, &w.body, scope),
            S::AsyncWith(w) => self.with_stmt(&w.items, &w.body, scope),
            S::Raise(r) => {
                let mut exprs = Vec::new();
                for e in r.exc.iter().chain(r.cause.iter()) {
                    exprs.push(self.expr(e, scope));
                }
                StmtKind::Eval(exprs)
            }
            S::Try(t) => self.try_stmt(&t.body, &t.handlers, &t.orelse, &t.finalbody, scope),
            S::TryStar(t) => self.try_stmt(&t.body, &t.handlers, &t.orelse, &t.finalbody, scope),
            S::Assert(a) => {
                let mut exprs = vec![self.expr(&a.test, scope)];
                if let Some(m) = &a.msg {
                    exprs.push(self.expr(m, scope));
                }
                StmtKind::Eval(exprs)
            }
            S::Import(i) => {
                let mut out = Vec::new();
                for alias in &i.names {
                    let path = alias.name.to_string();
                    let (local, kind) = match &alias.asname {
                        Some(a) => (a.to_string(), ImportKind::ModuleAs),
                        None => (path.split('.').next().unwrap_or_default().to_string(), ImportKind::Module),
                    };
                    let path = if kind == ImportKind::Module { local.clone() } else { path };
                    let binding = self.binding(scope, &local, line);
                    out.push(ImportBinding { binding, path, kind });
                }
                StmtKind::Import(out)
            }
            S::ImportFrom(i) => {
                let level = i.level.map(|l| l.to_u32()).unwrap_or(0);
                let module = format!(
                    "{}{}",
                    ".".repeat(level as usize),
                    i.module.as_ref().map(|m| m.as_str()).unwrap_or_default()
                );
                let mut out = Vec::new();
                for alias in &i.names {
                    if alias.name.as_str() == "*" {
                        out.push(ImportBinding {
                            binding: Binding { id: self.id(), name: "*".into(), line },
                            path: module.clone(),
                            kind: ImportKind::Star,
                        });
                        continue;
                    }
                    let local = alias.asname.as_ref().unwrap_or(&alias.name).to_string();
                    let binding = self.binding(scope, &local, line);
                    out.push(ImportBinding {
                        binding,
                        path: format!("{module}.{}", alias.name),
                        kind: ImportKind::From,
                    });
                }
                StmtKind::Import(out)
            }
            S::Global(g) => StmtKind::Global(g.names.iter().map(|n| n.to_string()).collect()),
            S::Nonlocal(n) => StmtKind::Nonlocal(n.names.iter().map(|n| n.to_string()).collect()),
            S::Expr(e) => StmtKind::Expr(self.expr(&e.value, scope)),
            S::Pass(_) => StmtKind::Pass,
            S::Break(_) => StmtKind::Break,
            S::Continue(_) => StmtKind::Continue,
            S::Match(_) | S::TypeAlias(_) => StmtKind::Opaque,
        };
        Stmt { line, kind }
    }

    /// Line of the `def`/`class` keyword, past any decorators.
    fn header_line(&self, stmt: &ast::Stmt, decorators: &[ast::Expr], keyword: &str) -> u32 {
        let from: u32 = decorators.last().map(|d| d.end()).unwrap_or(stmt.start()).into();
        let rest = &self.src[from as usize..];
        let pat = format!("{keyword} ");
        let off = rest.find(&pat).map(|i| i as u32).unwrap_or(0);
        self.lines.line(from + off)
    }

    fn function_def(
        &mut self,
        scope: ScopeId,
        name: &str,
        args: &ast::Arguments,
        body: &[ast::Stmt],
        decorator_list: &[ast::Expr],
        line: u32,
    ) -> StmtKind {
        let mut descriptor = Descriptor::None;
        let mut decorators = Vec::new();
        for d in decorator_list {
            match descriptor_of(d) {
                Some(desc) if descriptor == Descriptor::None => descriptor = desc,
                _ => decorators.push(self.expr(d, scope)),
            }
        }
        let fscope = self.scopes.add(ScopeKind::Function, scope, name, line);
        declare(&mut self.scopes, fscope, body);
        let params = self.params(args, scope, fscope, line);
        self.yields.push(false);
        let body = self.body(body, fscope);
        let is_generator = self.yields.pop().unwrap_or(false);
        let binding = Some(self.binding(scope, name, line));
        StmtKind::FunctionDef(Box::new(Function {
            binding,
            name: name.to_string(),
            scope: fscope,
            params,
            body,
            decorators,
            descriptor,
            is_generator,
            line,
        }))
    }

    /// Defaults are evaluated in `outer`; parameter names bind in `inner`.
    fn params(&mut self, args: &ast::Arguments, outer: ScopeId, inner: ScopeId, line: u32) -> Vec<Param> {
        let mut out = Vec::new();
        let groups = [(&args.posonlyargs, ParamKind::PositionalOnly), (&args.args, ParamKind::Positional)];
        for (group, kind) in groups {
            for a in group.iter() {
                let default = a.default.as_ref().map(|d| self.expr(d, outer));
                let binding = self.binding(inner, &a.def.arg, line);
                out.push(Param { binding, default, kind });
            }
        }
        if let Some(v) = &args.vararg {
            let binding = self.binding(inner, &v.arg, line);
            out.push(Param { binding, default: None, kind: ParamKind::VarArgs });
        }
        for a in &args.kwonlyargs {
            let default = a.default.as_ref().map(|d| self.expr(d, outer));
            let binding = self.binding(inner, &a.def.arg, line);
            out.push(Param { binding, default, kind: ParamKind::KeywordOnly });
        }
        if let Some(k) = &args.kwarg {
            let binding = self.binding(inner, &k.arg, line);
            out.push(Param { binding, default: None, kind: ParamKind::VarKeywords });
        }
        out
    }

    fn for_stmt(
        &mut self,
        target: &ast::Expr,
        iter: &ast::Expr,
        body: &[ast::Stmt],
        orelse: &[ast::Stmt],
        scope: ScopeId,
    ) -> StmtKind {
        let iter = self.expr(iter, scope);
        let target = self.target(target, scope);
        StmtKind::For { target, iter, body: self.body(body, scope), orelse: self.body(orelse, scope) }
    }

    fn with_stmt(&mut self, items: &[ast::WithItem], body: &[ast::Stmt], scope: ScopeId) -> StmtKind {
        let items = items
            .iter()
            .map(|item| {
                let context = self.expr(&item.context_expr, scope);
                let target = item.optional_vars.as_ref().map(|t| self.target(t, scope));
                WithItem { context, target }
            })
            .collect();
        StmtKind::With { items, body: self.body(body, scope) }
    }

    fn try_stmt(
        &mut self,
        body: &[ast::Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[ast::Stmt],
        finalbody: &[ast::Stmt],
        scope: ScopeId,
    ) -> StmtKind {
        let body = self.body(body, scope);
        let handlers = handlers
            .iter()
            .map(|h| {
                let ast::ExceptHandler::ExceptHandler(h) = h;
                let line = self.line_of(h);
                let typ = h.type_.as_ref().map(|t| self.expr(t, scope));
                let name = h.name.as_ref().map(|n| self.binding(scope, n, line));
                Handler { typ, name, body: self.body(&h.body, scope), line }
            })
            .collect();
        StmtKind::Try { body, handlers, orelse: self.body(orelse, scope), finalbody: self.body(finalbody, scope) }
    }

    fn target(&mut self, t: &ast::Expr, scope: ScopeId) -> Target {
        use ast::Expr as E;
        let line = self.line_of(t);
        match t {
            E::Name(n) => Target::Name(self.binding(scope, &n.id, line)),
            E::Attribute(a) => Target::Attribute { value: self.expr(&a.value, scope), attr: a.attr.to_string(), line },
            E::Subscript(s) => {
                Target::Subscript { value: self.expr(&s.value, scope), index: self.expr(&s.slice, scope), line }
            }
            E::Tuple(t) => Target::Sequence(t.elts.iter().map(|e| self.target(e, scope)).collect()),
            E::List(t) => Target::Sequence(t.elts.iter().map(|e| self.target(e, scope)).collect()),
            E::Starred(s) => Target::Starred(Box::new(self.target(&s.value, scope))),
            // Not a valid assignment target; evaluate it and discard.
            other => Target::Subscript {
                value: self.expr(other, scope),
                index: Expr { id: self.id(), line, kind: ExprKind::Literal(Literal::None) },
                line,
            },
        }
    }

    fn exprs(&mut self, es: &[ast::Expr], scope: ScopeId) -> Vec<Expr> {
        es.iter().map(|e| self.expr(e, scope)).collect()
    }

    fn keywords(&mut self, ks: &[ast::Keyword], scope: ScopeId) -> Vec<Keyword> {
        ks.iter()
            .map(|k| Keyword { name: k.arg.as_ref().map(|a| a.to_string()), value: self.expr(&k.value, scope) })
            .collect()
    }

    fn expr(&mut self, e: &ast::Expr, scope: ScopeId) -> Expr {
        use ast::Expr as E;
        let line = self.line_of(e);
        let id = self.id();
        let kind = match e {
            E::BoolOp(b) => ExprKind::BoolOp(self.exprs(&b.values, scope)),
            E::NamedExpr(n) => {
                let value = Box::new(self.expr(&n.value, scope));
                let name = match n.target.as_ref() {
                    E::Name(n) => n.id.to_string(),
                    _ => String::new(),
                };
                let owner = self.scopes.inline_owner(scope);
                let target = self.binding(owner, &name, line);
                ExprKind::NamedExpr { target, value }
            }
            E::BinOp(b) => ExprKind::BinOp {
                left: Box::new(self.expr(&b.left, scope)),
                op: binop(b.op),
                right: Box::new(self.expr(&b.right, scope)),
            },
            E::UnaryOp(u) => ExprKind::UnaryOp {
                op: match u.op {
                    ast::UnaryOp::Invert => UnaryOp::Invert,
                    ast::UnaryOp::Not => UnaryOp::Not,
                    ast::UnaryOp::UAdd => UnaryOp::UAdd,
                    ast::UnaryOp::USub => UnaryOp::USub,
                },
                operand: Box::new(self.expr(&u.operand, scope)),
            },
            E::Lambda(l) => {
                let lscope = self.scopes.add(ScopeKind::Lambda, scope, "<lambda>", line);
                let params = self.params(&l.args, scope, lscope, line);
                self.yields.push(false);
                let ret = self.expr(&l.body, lscope);
                let is_generator = self.yields.pop().unwrap_or(false);
                ExprKind::Lambda(Box::new(Function {
                    binding: None,
                    name: "<lambda>".into(),
                    scope: lscope,
                    params,
                    body: vec![Stmt { line: ret.line, kind: StmtKind::Return(Some(ret)) }],
                    decorators: Vec::new(),
                    descriptor: Descriptor::None,
                    is_generator,
                    line,
                }))
            }
            E::IfExp(i) => ExprKind::IfExp {
                test: Box::new(self.expr(&i.test, scope)),
                body: Box::new(self.expr(&i.body, scope)),
                orelse: Box::new(self.expr(&i.orelse, scope)),
            },
            E::Dict(d) => {
                let mut entries = Vec::new();
                for (k, v) in d.keys.iter().zip(&d.values) {
                    let k = k.as_ref().map(|k| self.expr(k, scope));
                    entries.push((k, self.expr(v, scope)));
                }
                ExprKind::Dict(entries)
            }
            E::Set(s) => ExprKind::Set(self.exprs(&s.elts, scope)),
            E::ListComp(c) => self.comprehension(CompKind::List, &c.generators, &c.elt, None, scope, line),
            E::SetComp(c) => self.comprehension(CompKind::Set, &c.generators, &c.elt, None, scope, line),
            E::DictComp(c) => self.comprehension(CompKind::Dict, &c.generators, &c.key, Some(&c.value), scope, line),
            E::GeneratorExp(c) => self.comprehension(CompKind::Generator, &c.generators, &c.elt, None, scope, line),
            E::Await(a) => ExprKind::Await(Box::new(self.expr(&a.value, scope))),
            E::Yield(y) => {
                self.mark_yield();
                ExprKind::Yield(y.value.as_ref().map(|v| Box::new(self.expr(v, scope))))
            }
            E::YieldFrom(y) => {
                self.mark_yield();
                ExprKind::YieldFrom(Box::new(self.expr(&y.value, scope)))
            }
            E::Compare(c) => ExprKind::Compare {
                left: Box::new(self.expr(&c.left, scope)),
                ops: c.ops.iter().map(|o| cmpop(*o)).collect(),
                comparators: self.exprs(&c.comparators, scope),
            },
            E::Call(c) => {
                let func = self.expr(&c.func, scope);
                let args = self.exprs(&c.args, scope);
                let keywords = self.keywords(&c.keywords, scope);
                let start: u32 = c.func.end().into();
                let end: u32 = c.end().into();
                let arg_text = self.src.get(start as usize..end as usize).unwrap_or_default().to_string();
                ExprKind::Call(Box::new(Call { func, args, keywords, arg_text }))
            }
            E::FormattedValue(f) => {
                let mut parts = vec![self.expr(&f.value, scope)];
                if let Some(spec) = &f.format_spec {
                    parts.push(self.expr(spec, scope));
                }
                ExprKind::FString(parts)
            }
            E::JoinedStr(j) => {
                let parts = j.values.iter().filter(|v| !matches!(v, E::Constant(_))).collect::<Vec<_>>();
                ExprKind::FString(parts.into_iter().map(|p| self.expr(p, scope)).collect())
            }
            E::Constant(c) => self.constant(&c.value, line),
            E::Attribute(a) => {
                ExprKind::Attribute { value: Box::new(self.expr(&a.value, scope)), attr: a.attr.to_string() }
            }
            E::Subscript(s) => ExprKind::Subscript {
                value: Box::new(self.expr(&s.value, scope)),
                index: Box::new(self.expr(&s.slice, scope)),
            },
            E::Starred(s) => ExprKind::Starred(Box::new(self.expr(&s.value, scope))),
            E::Name(n) => ExprKind::Name(n.id.to_string()),
            E::List(l) => ExprKind::List(self.exprs(&l.elts, scope)),
            E::Tuple(t) => ExprKind::Tuple(self.exprs(&t.elts, scope)),
            E::Slice(s) => {
                let mut parts = Vec::new();
                for p in [&s.lower, &s.upper, &s.step].into_iter().flatten() {
                    parts.push(self.expr(p, scope));
                }
                ExprKind::Slice(parts)
            }
        };
        Expr { id, line, kind }
    }

    fn mark_yield(&mut self) {
        if let Some(y) = self.yields.last_mut() {
            *y = true;
        }
    }

    fn constant(&mut self, c: &ast::Constant, line: u32) -> ExprKind {
        use ast::Constant as C;
        ExprKind::Literal(match c {
            C::None => Literal::None,
            C::Bool(b) => Literal::Bool(*b),
            C::Str(s) => Literal::Str(s.clone()),
            C::Bytes(_) => Literal::Bytes,
            C::Int(i) => Literal::Int(i.to_string().parse().ok()),
            C::Float(_) => Literal::Float,
            C::Complex { .. } => Literal::Complex,
            C::Ellipsis => Literal::Ellipsis,
            C::Tuple(items) => {
                let elts = items
                    .iter()
                    .map(|c| {
                        let id = self.id();
                        Expr { id, line, kind: self.constant(c, line) }
                    })
                    .collect();
                return ExprKind::Tuple(elts);
            }
        })
    }

    fn comprehension(
        &mut self,
        kind: CompKind,
        generators: &[ast::Comprehension],
        elt: &ast::Expr,
        value: Option<&ast::Expr>,
        scope: ScopeId,
        line: u32,
    ) -> ExprKind {
        let name = match kind {
            CompKind::List => "<listcomp>",
            CompKind::Set => "<setcomp>",
            CompKind::Dict => "<dictcomp>",
            CompKind::Generator => "<genexpr>",
        };
        let cscope = self.scopes.add(ScopeKind::Comprehension, scope, name, line);
        let mut gens = Vec::new();
        for (i, g) in generators.iter().enumerate() {
            let iter = self.expr(&g.iter, if i == 0 { scope } else { cscope });
            let target = self.target(&g.target, cscope);
            let ifs = self.exprs(&g.ifs, cscope);
            gens.push(Generator { target, iter, ifs });
        }
        let elt = self.expr(elt, cscope);
        let value = value.map(|v| self.expr(v, cscope));
        ExprKind::Comprehension(Box::new(Comprehension { kind, scope: cscope, generators: gens, elt, value }))
    }
}

/// Records `global`/`nonlocal` declarations of a body before any of its
/// bindings are lowered. Nested function and class bodies are skipped.
fn declare(scopes: &mut ScopeTree, scope: ScopeId, body: &[ast::Stmt]) {
    use ast::Stmt as S;
    for stmt in body {
        match stmt {
            S::Global(g) => {
                scopes.get_mut(scope).globals.extend(g.names.iter().map(|n| n.to_string()));
            }
            S::Nonlocal(n) => {
                scopes.get_mut(scope).nonlocals.extend(n.names.iter().map(|n| n.to_string()));
            }
            S::For(s) => {
                declare(scopes, scope, &s.body);
                declare(scopes, scope, &s.orelse);
            }
            S::AsyncFor(s) => {
                declare(scopes, scope, &s.body);
                declare(scopes, scope, &s.orelse);
            }
            S::While(s) => {
                declare(scopes, scope, &s.body);
                declare(scopes, scope, &s.orelse);
            }
            S::If(s) => {
                declare(scopes, scope, &s.body);
                declare(scopes, scope, &s.orelse);
            }
            S::With(s) => declare(scopes, scope, &s.body),
            S::AsyncWith(s) => declare(scopes, scope, &s.body),
            S::Try(s) => {
                declare(scopes, scope, &s.body);
                for ast::ExceptHandler::ExceptHandler(h) in &s.handlers {
                    declare(scopes, scope, &h.body);
                }
                declare(scopes, scope, &s.orelse);
                declare(scopes, scope, &s.finalbody);
            }
            S::TryStar(s) => {
                declare(scopes, scope, &s.body);
                for ast::ExceptHandler::ExceptHandler(h) in &s.handlers {
                    declare(scopes, scope, &h.body);
                }
                declare(scopes, scope, &s.orelse);
                declare(scopes, scope, &s.finalbody);
            }
            _ => {}
        }
    }
}

fn descriptor_of(d: &ast::Expr) -> Option<Descriptor> {
    match d {
        ast::Expr::Name(n) => match n.id.as_str() {
            "staticmethod" => Some(Descriptor::StaticMethod),
            "classmethod" => Some(Descriptor::ClassMethod),
            "property" => Some(Descriptor::Property),
            _ => None,
        },
        ast::Expr::Attribute(a) => match a.attr.as_str() {
            "getter" => Some(Descriptor::Property),
            "setter" => Some(Descriptor::Setter),
            "deleter" => Some(Descriptor::Deleter),
            _ => None,
        },
        _ => None,
    }
}

fn binop(op: ast::Operator) -> BinOp {
    use ast::Operator as O;
    match op {
        O::Add => BinOp::Add,
        O::Sub => BinOp::Sub,
        O::Mult => BinOp::Mult,
        O::MatMult => BinOp::MatMult,
        O::Div => BinOp::Div,
        O::Mod => BinOp::Mod,
        O::Pow => BinOp::Pow,
        O::LShift => BinOp::LShift,
        O::RShift => BinOp::RShift,
        O::BitOr => BinOp::BitOr,
        O::BitXor => BinOp::BitXor,
        O::BitAnd => BinOp::BitAnd,
        O::FloorDiv => BinOp::FloorDiv,
    }
}

fn cmpop(op: ast::CmpOp) -> CmpOp {
    use ast::CmpOp as C;
    match op {
        C::Eq => CmpOp::Eq,
        C::NotEq => CmpOp::NotEq,
        C::Lt => CmpOp::Lt,
        C::LtE => CmpOp::LtE,
        C::Gt => CmpOp::Gt,
        C::GtE => CmpOp::GtE,
        C::Is => CmpOp::Is,
        C::IsNot => CmpOp::IsNot,
        C::In => CmpOp::In,
        C::NotIn => CmpOp::NotIn,
    }
}
