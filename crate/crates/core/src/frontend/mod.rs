// SPDX-License-Identifier: Apache-2.0

//! Front end: parsing the composite script, lowering to IR, scopes and
//! def-use chains.

pub mod duc;
pub mod imports;
pub mod ir;
mod lower;
pub mod scope;

use rustpython_parser::{ast, Parse};
use thiserror::Error;

use crate::notebook::{CellLocation, CompositeScript};

pub use duc::{DefInfo, DefUseChains, Key, LocationMap};
pub use imports::{ImportEntry, ImportTable};
pub use ir::{ImportBinding, ImportKind, ModuleIr, NodeId};
pub use scope::{ScopeId, ScopeKind, ScopeTree, USER_MODULE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("syntax error at {location}: {message}")]
    Syntax { location: CellLocation, message: String },
    #[error("syntax error on line {line}: {message}")]
    SyntaxAtLine { line: u32, message: String },
}

/// Parses and lowers a plain module.
pub fn parse_module(src: &str) -> Result<ModuleIr, FrontendError> {
    let suite = ast::Suite::parse(src, "<notebook>").map_err(|e| {
        let line = lower::LineIndex::new(src).line(e.offset.into());
        FrontendError::SyntaxAtLine { line, message: e.error.to_string() }
    })?;
    Ok(lower::Lowerer::new(src).finish(&suite))
}

/// Parses the composite script of a notebook; syntax errors are reported
/// at their cell location.
pub fn parse_script(script: &CompositeScript) -> Result<ModuleIr, FrontendError> {
    parse_module(&script.text).map_err(|e| match e {
        FrontendError::SyntaxAtLine { line, message } => {
            // Errors at end of input point one past the last line.
            let line = line.clamp(1, script.map.len().max(1) as u32);
            match script.map.location(line) {
                Some(location) => FrontendError::Syntax { location, message },
                None => FrontendError::SyntaxAtLine { line, message },
            }
        }
        other => other,
    })
}

impl ModuleIr {
    /// Replaces `from m import *` with one binding per name `exports`
    /// yields for `m`. Modules it cannot enumerate are left untouched.
    pub fn expand_star_imports(&mut self, exports: impl Fn(&str) -> Option<Vec<String>>) {
        let mut next = self.node_count;
        let mut bound = Vec::new();
        expand_in(&mut self.body, &exports, &mut next, &mut bound);
        self.node_count = next;
        for name in bound {
            self.scopes.bind(ScopeId::MODULE, &name);
        }
    }
}

fn expand_in(
    body: &mut [ir::Stmt],
    exports: &impl Fn(&str) -> Option<Vec<String>>,
    next: &mut u32,
    bound: &mut Vec<String>,
) {
    use ir::StmtKind as K;
    for stmt in body {
        match &mut stmt.kind {
            K::Import(bs) => {
                if !bs.iter().any(|b| b.kind == ImportKind::Star) {
                    continue;
                }
                let mut out = Vec::new();
                for b in bs.drain(..) {
                    if b.kind != ImportKind::Star {
                        out.push(b);
                        continue;
                    }
                    let Some(names) = exports(&b.path) else {
                        out.push(b);
                        continue;
                    };
                    for name in names {
                        let id = NodeId(*next);
                        *next += 1;
                        bound.push(name.clone());
                        out.push(ImportBinding {
                            binding: ir::Binding { id, name: name.clone(), line: b.binding.line },
                            path: format!("{}.{name}", b.path),
                            kind: ImportKind::From,
                        });
                    }
                }
                *bs = out;
            }
            K::If { body, orelse, .. } | K::While { body, orelse, .. } | K::For { body, orelse, .. } => {
                expand_in(body, exports, next, bound);
                expand_in(orelse, exports, next, bound);
            }
            K::With { body, .. } => expand_in(body, exports, next, bound),
            K::Try { body, handlers, orelse, finalbody } => {
                expand_in(body, exports, next, bound);
                for h in handlers {
                    expand_in(&mut h.body, exports, next, bound);
                }
                expand_in(orelse, exports, next, bound);
                expand_in(finalbody, exports, next, bound);
            }
            _ => {}
        }
    }
}
