// SPDX-License-Identifier: Apache-2.0

//! Import aliases per scope.

use std::collections::BTreeMap;

use super::ir::{walk_body, ImportKind, Item, ModuleIr, NodeId, StmtKind};
use super::scope::ScopeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportEntry {
    pub def: NodeId,
    pub line: u32,
    pub path: String,
    pub kind: ImportKind,
}

/// Local name to imported path, per scope. Later imports of the same name
/// replace earlier ones; flow-sensitive shadowing is left to the def-use
/// chains. Star imports are kept under the key `*` with the module path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportTable {
    scopes: BTreeMap<ScopeId, BTreeMap<String, ImportEntry>>,
    stars: Vec<(ScopeId, ImportEntry)>,
}

impl ImportTable {
    pub fn build(ir: &ModuleIr) -> Self {
        let mut table = ImportTable::default();
        walk_body(&ir.body, ScopeId::MODULE, &mut |scope, item| {
            let Item::Stmt(stmt) = item else { return };
            let StmtKind::Import(bindings) = &stmt.kind else { return };
            for b in bindings {
                let entry =
                    ImportEntry { def: b.binding.id, line: b.binding.line, path: b.path.clone(), kind: b.kind.clone() };
                if b.kind == ImportKind::Star {
                    table.stars.push((scope, entry));
                } else {
                    let owner = ir.scopes.binding_owner(scope, &b.binding.name);
                    table.scopes.entry(owner).or_default().insert(b.binding.name.clone(), entry);
                }
            }
        });
        table
    }

    /// Path a local name imported in `scope` refers to.
    pub fn alias(&self, scope: ScopeId, local: &str) -> Option<&str> {
        self.scopes.get(&scope)?.get(local).map(|e| e.path.as_str())
    }

    /// Resolves `local` from `scope` outward to the module scope.
    pub fn lookup(&self, ir: &ModuleIr, scope: ScopeId, local: &str) -> Option<&ImportEntry> {
        let owner = ir.scopes.resolve(scope, local)?;
        self.scopes.get(&owner)?.get(local)
    }

    pub fn entries(&self) -> impl Iterator<Item = (ScopeId, &str, &ImportEntry)> {
        self.scopes.iter().flat_map(|(s, m)| m.iter().map(move |(k, e)| (*s, k.as_str(), e)))
    }

    /// Unexpanded star imports.
    pub fn stars(&self) -> &[(ScopeId, ImportEntry)] {
        &self.stars
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty() && self.stars.is_empty()
    }

    /// Expands the head of a dotted name through the module-scope aliases
    /// (`sns.load_dataset` to `seaborn.load_dataset`).
    pub fn expand(&self, dotted: &str) -> Option<String> {
        let (head, rest) = match dotted.split_once('.') {
            Some((h, r)) => (h, Some(r)),
            None => (dotted, None),
        };
        let path = self.alias(ScopeId::MODULE, head)?;
        Some(match rest {
            Some(r) => format!("{path}.{r}"),
            None => path.to_string(),
        })
    }
}
