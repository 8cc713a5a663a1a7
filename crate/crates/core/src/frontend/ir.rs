// SPDX-License-Identifier: Apache-2.0

//! Line-annotated intermediate representation of the subject-language
//! module. Every expression and every binding occurrence carries a unique
//! [`NodeId`]; binding ids double as definition ids in the def-use chains.

use std::collections::BTreeMap;
use std::fmt;

use super::scope::{ScopeId, ScopeTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A name definition occurrence (assignment target, parameter, import, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub id: NodeId,
    pub name: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub id: NodeId,
    pub line: u32,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Int(Option<i64>),
    Float,
    Complex,
    Bool(bool),
    None,
    Bytes,
    Ellipsis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mult,
    MatMult,
    Div,
    Mod,
    Pow,
    LShift,
    RShift,
    BitOr,
    BitXor,
    BitAnd,
    FloorDiv,
}

impl BinOp {
    /// Dunder method implementing the operator, and its reflected form.
    pub fn dunders(self) -> (&'static str, &'static str) {
        match self {
            BinOp::Add => ("__add__", "__radd__"),
            BinOp::Sub => ("__sub__", "__rsub__"),
            BinOp::Mult => ("__mul__", "__rmul__"),
            BinOp::MatMult => ("__matmul__", "__rmatmul__"),
            BinOp::Div => ("__truediv__", "__rtruediv__"),
            BinOp::Mod => ("__mod__", "__rmod__"),
            BinOp::Pow => ("__pow__", "__rpow__"),
            BinOp::LShift => ("__lshift__", "__rlshift__"),
            BinOp::RShift => ("__rshift__", "__rrshift__"),
            BinOp::BitOr => ("__or__", "__ror__"),
            BinOp::BitXor => ("__xor__", "__rxor__"),
            BinOp::BitAnd => ("__and__", "__rand__"),
            BinOp::FloorDiv => ("__floordiv__", "__rfloordiv__"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Invert,
    Not,
    UAdd,
    USub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    Is,
    IsNot,
    In,
    NotIn,
}

impl CmpOp {
    pub fn dunder(self) -> Option<&'static str> {
        Some(match self {
            CmpOp::Eq => "__eq__",
            CmpOp::NotEq => "__ne__",
            CmpOp::Lt => "__lt__",
            CmpOp::LtE => "__le__",
            CmpOp::Gt => "__gt__",
            CmpOp::GtE => "__ge__",
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyword {
    pub name: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub func: Expr,
    pub args: Vec<Expr>,
    pub keywords: Vec<Keyword>,
    /// Source text of the parenthesized argument list.
    pub arg_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompKind {
    List,
    Set,
    Dict,
    Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub target: Target,
    pub iter: Expr,
    pub ifs: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comprehension {
    pub kind: CompKind,
    pub scope: ScopeId,
    pub generators: Vec<Generator>,
    /// Element, or key for dict comprehensions.
    pub elt: Expr,
    /// Value for dict comprehensions.
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Name(String),
    Attribute {
        value: Box<Expr>,
        attr: String,
    },
    Subscript {
        value: Box<Expr>,
        index: Box<Expr>,
    },
    Call(Box<Call>),
    Literal(Literal),
    FString(Vec<Expr>),
    Tuple(Vec<Expr>),
    List(Vec<Expr>),
    Set(Vec<Expr>),
    Dict(Vec<(Option<Expr>, Expr)>),
    Slice(Vec<Expr>),
    BinOp {
        left: Box<Expr>,
        op: BinOp,
        right: Box<Expr>,
    },
    UnaryOp {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    BoolOp(Vec<Expr>),
    Compare {
        left: Box<Expr>,
        ops: Vec<CmpOp>,
        comparators: Vec<Expr>,
    },
    IfExp {
        test: Box<Expr>,
        body: Box<Expr>,
        orelse: Box<Expr>,
    },
    /// Lambdas are lowered to a function whose body is a single `return`.
    Lambda(Box<Function>),
    Comprehension(Box<Comprehension>),
    Starred(Box<Expr>),
    NamedExpr {
        target: Binding,
        value: Box<Expr>,
    },
    Await(Box<Expr>),
    Yield(Option<Box<Expr>>),
    YieldFrom(Box<Expr>),
}

impl Expr {
    /// Dotted path of a pure `a.b.c` name/attribute chain.
    pub fn dotted_path(&self) -> Option<String> {
        match &self.kind {
            ExprKind::Name(n) => Some(n.clone()),
            ExprKind::Attribute { value, attr } => Some(format!("{}.{attr}", value.dotted_path()?)),
            _ => None,
        }
    }

    /// Innermost name of an attribute/subscript/call chain (`df` in `df.a[0].b()`).
    pub fn root_name(&self) -> Option<(&str, NodeId)> {
        match &self.kind {
            ExprKind::Name(n) => Some((n, self.id)),
            ExprKind::Attribute { value, .. } | ExprKind::Subscript { value, .. } => value.root_name(),
            ExprKind::Call(call) => call.func.root_name(),
            _ => None,
        }
    }

    pub fn str_literal(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Literal(Literal::Str(s)) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Name(Binding),
    Attribute { value: Expr, attr: String, line: u32 },
    Subscript { value: Expr, index: Expr, line: u32 },
    Sequence(Vec<Target>),
    Starred(Box<Target>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    PositionalOnly,
    Positional,
    VarArgs,
    KeywordOnly,
    VarKeywords,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub binding: Binding,
    pub default: Option<Expr>,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Descriptor {
    None,
    StaticMethod,
    ClassMethod,
    /// Property getter (`@property`, `@x.getter`).
    Property,
    /// `@x.setter`.
    Setter,
    /// `@x.deleter`.
    Deleter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    /// Absent for lambdas.
    pub binding: Option<Binding>,
    pub name: String,
    pub scope: ScopeId,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub decorators: Vec<Expr>,
    /// Builtin descriptor decorator, if any (`@staticmethod` and friends).
    pub descriptor: Descriptor,
    pub is_generator: bool,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Class {
    pub binding: Binding,
    pub name: String,
    pub scope: ScopeId,
    pub bases: Vec<Expr>,
    pub keywords: Vec<Keyword>,
    pub body: Vec<Stmt>,
    pub decorators: Vec<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportKind {
    /// `import a.b` binds `a`.
    Module,
    /// `import a.b as x` binds `x` to `a.b`.
    ModuleAs,
    /// `from m import n [as p]`.
    From,
    /// `from m import *`, before expansion against the stub database.
    Star,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportBinding {
    pub binding: Binding,
    /// Fully dotted path the local name refers to.
    pub path: String,
    pub kind: ImportKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithItem {
    pub context: Expr,
    pub target: Option<Target>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Handler {
    pub typ: Option<Expr>,
    pub name: Option<Binding>,
    pub body: Vec<Stmt>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub line: u32,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Expr(Expr),
    Assign {
        targets: Vec<Target>,
        value: Expr,
    },
    /// `read` is the load form of `target`, evaluated before the update.
    AugAssign {
        target: Target,
        read: Expr,
        op: BinOp,
        value: Expr,
    },
    Import(Vec<ImportBinding>),
    FunctionDef(Box<Function>),
    ClassDef(Box<Class>),
    Return(Option<Expr>),
    If {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    While {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    For {
        target: Target,
        iter: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    With {
        items: Vec<WithItem>,
        body: Vec<Stmt>,
    },
    Try {
        body: Vec<Stmt>,
        handlers: Vec<Handler>,
        orelse: Vec<Stmt>,
        finalbody: Vec<Stmt>,
    },
    Global(Vec<String>),
    Nonlocal(Vec<String>),
    /// Expressions evaluated for effect only (`raise`, `assert`, `del`).
    Eval(Vec<Expr>),
    Break,
    Continue,
    Pass,
    /// Unsupported statement forms; contribute nothing.
    Opaque,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleIr {
    pub body: Vec<Stmt>,
    pub scopes: ScopeTree,
    pub node_count: u32,
}

/// Borrowed lookup tables over a [`ModuleIr`].
#[derive(Debug, Default)]
pub struct IrIndex<'a> {
    pub functions: BTreeMap<ScopeId, &'a Function>,
    pub classes: BTreeMap<ScopeId, &'a Class>,
    /// Every call expression with the scope it is evaluated in.
    pub calls: Vec<(ScopeId, &'a Expr)>,
}

impl ModuleIr {
    pub fn index(&self) -> IrIndex<'_> {
        let mut index = IrIndex::default();
        walk_body(&self.body, ScopeId::MODULE, &mut |scope, item| match item {
            Item::Stmt(stmt) => match &stmt.kind {
                StmtKind::FunctionDef(f) => {
                    index.functions.insert(f.scope, f);
                }
                StmtKind::ClassDef(c) => {
                    index.classes.insert(c.scope, c);
                }
                _ => {}
            },
            Item::Expr(expr) => match &expr.kind {
                ExprKind::Call(_) => index.calls.push((scope, expr)),
                ExprKind::Lambda(f) => {
                    index.functions.insert(f.scope, f);
                }
                _ => {}
            },
        });
        index
    }
}

/// A node visited by [`walk_body`].
#[derive(Debug, Clone, Copy)]
pub enum Item<'a> {
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

/// Pre-order walk over statements and expressions, reporting the scope
/// each node is evaluated in.
pub fn walk_body<'a>(body: &'a [Stmt], scope: ScopeId, f: &mut impl FnMut(ScopeId, Item<'a>)) {
    for stmt in body {
        walk_stmt(stmt, scope, f);
    }
}

fn walk_stmt<'a>(stmt: &'a Stmt, scope: ScopeId, f: &mut impl FnMut(ScopeId, Item<'a>)) {
    f(scope, Item::Stmt(stmt));
    match &stmt.kind {
        StmtKind::Expr(e) | StmtKind::Return(Some(e)) => walk_expr(e, scope, f),
        StmtKind::Assign { targets, value } => {
            walk_expr(value, scope, f);
            for t in targets {
                walk_target(t, scope, f);
            }
        }
        // The target's sub-expressions are already covered by `read`.
        StmtKind::AugAssign { read, value, .. } => {
            walk_expr(read, scope, f);
            walk_expr(value, scope, f);
        }
        StmtKind::FunctionDef(func) => walk_function(func, scope, f),
        StmtKind::ClassDef(class) => {
            for d in &class.decorators {
                walk_expr(d, scope, f);
            }
            for b in &class.bases {
                walk_expr(b, scope, f);
            }
            for k in &class.keywords {
                walk_expr(&k.value, scope, f);
            }
            walk_body(&class.body, class.scope, f);
        }
        StmtKind::If { test, body, orelse } | StmtKind::While { test, body, orelse } => {
            walk_expr(test, scope, f);
            walk_body(body, scope, f);
            walk_body(orelse, scope, f);
        }
        StmtKind::For { target, iter, body, orelse } => {
            walk_expr(iter, scope, f);
            walk_target(target, scope, f);
            walk_body(body, scope, f);
            walk_body(orelse, scope, f);
        }
        StmtKind::With { items, body } => {
            for item in items {
                walk_expr(&item.context, scope, f);
                if let Some(t) = &item.target {
                    walk_target(t, scope, f);
                }
            }
            walk_body(body, scope, f);
        }
        StmtKind::Try { body, handlers, orelse, finalbody } => {
            walk_body(body, scope, f);
            for h in handlers {
                if let Some(t) = &h.typ {
                    walk_expr(t, scope, f);
                }
                walk_body(&h.body, scope, f);
            }
            walk_body(orelse, scope, f);
            walk_body(finalbody, scope, f);
        }
        StmtKind::Eval(exprs) => {
            for e in exprs {
                walk_expr(e, scope, f);
            }
        }
        StmtKind::Return(None)
        | StmtKind::Import(_)
        | StmtKind::Global(_)
        | StmtKind::Nonlocal(_)
        | StmtKind::Break
        | StmtKind::Continue
        | StmtKind::Pass
        | StmtKind::Opaque => {}
    }
}

fn walk_function<'a>(func: &'a Function, scope: ScopeId, f: &mut impl FnMut(ScopeId, Item<'a>)) {
    for d in &func.decorators {
        walk_expr(d, scope, f);
    }
    for p in &func.params {
        if let Some(d) = &p.default {
            walk_expr(d, scope, f);
        }
    }
    walk_body(&func.body, func.scope, f);
}

fn walk_target<'a>(target: &'a Target, scope: ScopeId, f: &mut impl FnMut(ScopeId, Item<'a>)) {
    match target {
        Target::Name(_) => {}
        Target::Attribute { value, .. } => walk_expr(value, scope, f),
        Target::Subscript { value, index, .. } => {
            walk_expr(value, scope, f);
            walk_expr(index, scope, f);
        }
        Target::Sequence(ts) => {
            for t in ts {
                walk_target(t, scope, f);
            }
        }
        Target::Starred(t) => walk_target(t, scope, f),
    }
}

pub fn walk_expr<'a>(expr: &'a Expr, scope: ScopeId, f: &mut impl FnMut(ScopeId, Item<'a>)) {
    f(scope, Item::Expr(expr));
    match &expr.kind {
        ExprKind::Name(_) | ExprKind::Literal(_) => {}
        ExprKind::Attribute { value, .. } => walk_expr(value, scope, f),
        ExprKind::Subscript { value, index } => {
            walk_expr(value, scope, f);
            walk_expr(index, scope, f);
        }
        ExprKind::Call(call) => {
            walk_expr(&call.func, scope, f);
            for a in &call.args {
                walk_expr(a, scope, f);
            }
            for k in &call.keywords {
                walk_expr(&k.value, scope, f);
            }
        }
        ExprKind::FString(items)
        | ExprKind::Tuple(items)
        | ExprKind::List(items)
        | ExprKind::Set(items)
        | ExprKind::Slice(items)
        | ExprKind::BoolOp(items) => {
            for e in items {
                walk_expr(e, scope, f);
            }
        }
        ExprKind::Dict(entries) => {
            for (k, v) in entries {
                if let Some(k) = k {
                    walk_expr(k, scope, f);
                }
                walk_expr(v, scope, f);
            }
        }
        ExprKind::BinOp { left, right, .. } => {
            walk_expr(left, scope, f);
            walk_expr(right, scope, f);
        }
        ExprKind::UnaryOp { operand, .. } => walk_expr(operand, scope, f),
        ExprKind::Compare { left, comparators, .. } => {
            walk_expr(left, scope, f);
            for c in comparators {
                walk_expr(c, scope, f);
            }
        }
        ExprKind::IfExp { test, body, orelse } => {
            walk_expr(test, scope, f);
            walk_expr(body, scope, f);
            walk_expr(orelse, scope, f);
        }
        ExprKind::Lambda(func) => walk_function(func, scope, f),
        ExprKind::Comprehension(comp) => {
            for (i, g) in comp.generators.iter().enumerate() {
                // The first iterable is evaluated in the enclosing scope.
                let s = if i == 0 { scope } else { comp.scope };
                walk_expr(&g.iter, s, f);
                walk_target(&g.target, comp.scope, f);
                for cond in &g.ifs {
                    walk_expr(cond, comp.scope, f);
                }
            }
            walk_expr(&comp.elt, comp.scope, f);
            if let Some(v) = &comp.value {
                walk_expr(v, comp.scope, f);
            }
        }
        ExprKind::Starred(e) | ExprKind::Await(e) | ExprKind::YieldFrom(e) => walk_expr(e, scope, f),
        ExprKind::Yield(e) => {
            if let Some(e) = e {
                walk_expr(e, scope, f);
            }
        }
        ExprKind::NamedExpr { value, .. } => walk_expr(value, scope, f),
    }
}
