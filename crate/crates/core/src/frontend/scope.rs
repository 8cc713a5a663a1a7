// SPDX-License-Identifier: Apache-2.0

//! Lexical scopes and name resolution following the subject language's
//! rules: class bodies are invisible to nested functions, `global` and
//! `nonlocal` redirect bindings, comprehensions get their own scope.

use std::collections::BTreeSet;
use std::fmt;

/// Module name under which user definitions are qualified.
pub const USER_MODULE: &str = "__main__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScopeId(pub u32);

impl ScopeId {
    pub const MODULE: ScopeId = ScopeId(0);
}

impl fmt::Display for ScopeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScopeKind {
    Module,
    Function,
    Class,
    Lambda,
    Comprehension,
}

impl ScopeKind {
    /// Function-like scopes run their body later, when called.
    pub fn is_deferred(self) -> bool {
        matches!(self, ScopeKind::Function | ScopeKind::Lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    pub id: ScopeId,
    pub kind: ScopeKind,
    pub parent: Option<ScopeId>,
    pub name: String,
    /// Dotted qualified name without the `<locals>` markers.
    pub qualname: String,
    pub bindings: BTreeSet<String>,
    pub globals: BTreeSet<String>,
    pub nonlocals: BTreeSet<String>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeTree {
    scopes: Vec<Scope>,
}

impl Default for ScopeTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ScopeTree {
    pub fn new() -> Self {
        ScopeTree {
            scopes: vec![Scope {
                id: ScopeId::MODULE,
                kind: ScopeKind::Module,
                parent: None,
                name: USER_MODULE.to_string(),
                qualname: String::new(),
                bindings: BTreeSet::new(),
                globals: BTreeSet::new(),
                nonlocals: BTreeSet::new(),
                line: 0,
            }],
        }
    }

    pub fn add(&mut self, kind: ScopeKind, parent: ScopeId, name: &str, line: u32) -> ScopeId {
        let id = ScopeId(self.scopes.len() as u32);
        let parent_q = &self.scopes[parent.0 as usize].qualname;
        let qualname = if parent_q.is_empty() { name.to_string() } else { format!("{parent_q}.{name}") };
        self.scopes.push(Scope {
            id,
            kind,
            parent: Some(parent),
            name: name.to_string(),
            qualname,
            bindings: BTreeSet::new(),
            globals: BTreeSet::new(),
            nonlocals: BTreeSet::new(),
            line,
        });
        id
    }

    pub fn get(&self, id: ScopeId) -> &Scope {
        &self.scopes[id.0 as usize]
    }

    pub fn get_mut(&mut self, id: ScopeId) -> &mut Scope {
        &mut self.scopes[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.scopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Scope> {
        self.scopes.iter()
    }

    /// Fully qualified name of a function or class scope (`__main__.C.m`).
    pub fn fqn(&self, id: ScopeId) -> String {
        let q = &self.get(id).qualname;
        if q.is_empty() {
            USER_MODULE.to_string()
        } else {
            format!("{USER_MODULE}.{q}")
        }
    }

    /// Records a binding of `name` made by code in `scope`, honoring
    /// `global`/`nonlocal` declarations. Returns the scope that owns it.
    pub fn bind(&mut self, scope: ScopeId, name: &str) -> ScopeId {
        let owner = self.binding_owner(scope, name);
        self.get_mut(owner).bindings.insert(name.to_string());
        owner
    }

    /// Scope that owns a binding of `name` made by code in `scope`.
    pub fn binding_owner(&self, scope: ScopeId, name: &str) -> ScopeId {
        let s = self.get(scope);
        if s.globals.contains(name) {
            return ScopeId::MODULE;
        }
        if s.nonlocals.contains(name) {
            let mut cur = s.parent;
            while let Some(id) = cur {
                let p = self.get(id);
                if p.kind.is_deferred() && (p.bindings.contains(name) || p.nonlocals.contains(name)) {
                    return self.binding_owner(id, name);
                }
                cur = p.parent;
            }
            return ScopeId::MODULE;
        }
        scope
    }

    /// Scope whose binding of `name` is visible from `scope`; `None` for
    /// builtins and undefined names.
    pub fn resolve(&self, scope: ScopeId, name: &str) -> Option<ScopeId> {
        let s = self.get(scope);
        if s.globals.contains(name) {
            return self.get(ScopeId::MODULE).bindings.contains(name).then_some(ScopeId::MODULE);
        }
        if s.nonlocals.contains(name) {
            return Some(self.binding_owner(scope, name));
        }
        if s.bindings.contains(name) {
            return Some(scope);
        }
        let mut cur = s.parent;
        while let Some(id) = cur {
            let p = self.get(id);
            if p.kind != ScopeKind::Class || id == ScopeId::MODULE {
                if p.globals.contains(name) {
                    return self.resolve(ScopeId::MODULE, name);
                }
                if p.bindings.contains(name) {
                    return Some(id);
                }
            }
            cur = p.parent;
        }
        None
    }

    /// Nearest enclosing scope that is not a comprehension. Comprehensions
    /// execute inline, so their effects belong to this scope.
    pub fn inline_owner(&self, mut scope: ScopeId) -> ScopeId {
        loop {
            let s = self.get(scope);
            match (s.kind, s.parent) {
                (ScopeKind::Comprehension, Some(p)) => scope = p,
                _ => return scope,
            }
        }
    }

    /// Scope whose statements run in the same flow as `scope`: the nearest
    /// function, lambda or module, looking through classes and comprehensions.
    pub fn flow_region(&self, mut scope: ScopeId) -> ScopeId {
        loop {
            let s = self.get(scope);
            match (s.kind, s.parent) {
                (ScopeKind::Class | ScopeKind::Comprehension, Some(p)) => scope = p,
                _ => return scope,
            }
        }
    }

    /// True if `inner` is `outer` or lexically nested in it.
    pub fn is_within(&self, inner: ScopeId, outer: ScopeId) -> bool {
        let mut cur = Some(inner);
        while let Some(id) = cur {
            if id == outer {
                return true;
            }
            cur = self.get(id).parent;
        }
        false
    }

    /// The class a method scope is directly defined in.
    pub fn enclosing_class(&self, func: ScopeId) -> Option<ScopeId> {
        let parent = self.get(func).parent?;
        (self.get(parent).kind == ScopeKind::Class).then_some(parent)
    }

    /// Nearest function-like scope enclosing `scope` (including itself),
    /// looking through comprehensions.
    pub fn enclosing_function(&self, scope: ScopeId) -> Option<ScopeId> {
        let owner = self.inline_owner(scope);
        self.get(owner).kind.is_deferred().then_some(owner)
    }
}
