// SPDX-License-Identifier: Apache-2.0

//! Declarative type stubs for external libraries.
//!
//! One JSON file per package (`*.stub.json`) declares functions and their
//! return types, classes with attribute types and methods, and an export
//! table mapping public names to defining fully-qualified names. Name
//! resolution is purely static: aliases are expanded by the caller and the
//! export table is followed transitively here.
//!
//! Besides ordinary members, classes may declare a few pseudo-members that
//! the points-to analysis consults:
//!
//! - `__getitem__[K]`: subscript with a key whose type name ends in `K`
//!   (`str`, `int`, `list`, `slice`, `Series`, ...), falling back to
//!   `__getitem__`;
//! - `__getattr__`: type of an undeclared attribute (column access);
//! - `__iter__`: element type produced by iteration.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::frontend::ImportTable;

pub const STUB_EXTENSION: &str = ".stub.json";
pub const DOCSTRINGS_FILE: &str = "docstrings.json";

#[derive(Debug, Error)]
pub enum StubError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: invalid stub at `{path}`: {message}")]
    Format { file: String, path: String, message: String },
    #[error("duplicate fully-qualified name `{fqn}` (in {first} and {second})")]
    DuplicateFqn { fqn: String, first: String, second: String },
    #[error("export cycle: {}", .cycle.join(" -> "))]
    ExportCycle { cycle: Vec<String> },
    #[error("{file}: export `{name}` resolves to `{target}`, which is not declared")]
    DanglingExport { file: String, name: String, target: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StubFile {
    package: String,
    #[serde(default)]
    exports: BTreeMap<String, String>,
    #[serde(default)]
    functions: BTreeMap<String, FunctionSpec>,
    #[serde(default)]
    classes: BTreeMap<String, ClassSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionSpec {
    returns: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassSpec {
    #[serde(default)]
    attributes: BTreeMap<String, String>,
    #[serde(default)]
    methods: BTreeMap<String, FunctionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionStub {
    pub fqn: String,
    /// Sorted, deduplicated; more than one entry is a union.
    pub returns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassStub {
    pub fqn: String,
    pub attributes: BTreeMap<String, String>,
    pub methods: BTreeMap<String, FunctionStub>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageStub {
    pub package: String,
    pub file: String,
}

/// What a dotted path denotes after export resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Symbol<'a> {
    Function(&'a FunctionStub),
    Class(&'a ClassStub),
    /// A method reached through its class path (`pandas.DataFrame.head`).
    Method(&'a ClassStub, &'a FunctionStub),
    Module(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Member<'a> {
    Attribute(&'a str),
    Method(&'a FunctionStub),
}

#[derive(Debug, Clone, Default)]
pub struct TypeStubDB {
    packages: Vec<PackageStub>,
    functions: BTreeMap<String, FunctionStub>,
    classes: BTreeMap<String, ClassStub>,
    exports: BTreeMap<String, String>,
    modules: BTreeSet<String>,
    docstrings: BTreeMap<String, String>,
}

const SHIPPED: &[(&str, &str)] = &[
    ("builtins.stub.json", include_str!("../data/stubs/builtins.stub.json")),
    ("keras.stub.json", include_str!("../data/stubs/keras.stub.json")),
    ("matplotlib.stub.json", include_str!("../data/stubs/matplotlib.stub.json")),
    ("numpy.stub.json", include_str!("../data/stubs/numpy.stub.json")),
    ("pandas.stub.json", include_str!("../data/stubs/pandas.stub.json")),
    ("seaborn.stub.json", include_str!("../data/stubs/seaborn.stub.json")),
    ("sklearn.stub.json", include_str!("../data/stubs/sklearn.stub.json")),
];

const SHIPPED_DOCSTRINGS: &str = include_str!("../data/stubs/docstrings.json");

impl TypeStubDB {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The stub set bundled with the tool.
    pub fn shipped() -> Self {
        let mut db = Self::from_sources(SHIPPED.iter().copied()).expect("bundled stubs are valid");
        db.docstrings = parse_docstrings("docstrings.json", SHIPPED_DOCSTRINGS).expect("bundled docstrings are valid");
        db
    }

    /// Loads every `*.stub.json` in `dir` (sorted by file name) and the
    /// optional docstring sidecar.
    pub fn load_dir(dir: &Path) -> Result<Self, StubError> {
        let io = |source| StubError::Io { path: dir.to_path_buf(), source };
        let mut names: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(STUB_EXTENSION)))
            .collect();
        names.sort();
        let mut sources = Vec::new();
        for path in &names {
            let text = fs::read_to_string(path).map_err(|source| StubError::Io { path: path.clone(), source })?;
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            sources.push((name, text));
        }
        let mut db = Self::from_sources(sources.iter().map(|(n, t)| (n.as_str(), t.as_str())))?;
        let doc_path = dir.join(DOCSTRINGS_FILE);
        if doc_path.is_file() {
            let text =
                fs::read_to_string(&doc_path).map_err(|source| StubError::Io { path: doc_path.clone(), source })?;
            db.docstrings = parse_docstrings(DOCSTRINGS_FILE, &text)?;
        }
        Ok(db)
    }

    /// Builds a database from `(file name, JSON text)` pairs.
    pub fn from_sources<'a>(sources: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, StubError> {
        let mut db = TypeStubDB::default();
        // fqn -> file that declared it
        let mut owner: BTreeMap<String, String> = BTreeMap::new();
        let mut export_file: BTreeMap<String, String> = BTreeMap::new();
        let mut claim = |fqn: &str, file: &str| -> Result<(), StubError> {
            if let Some(first) = owner.get(fqn) {
                return Err(StubError::DuplicateFqn {
                    fqn: fqn.to_string(),
                    first: first.clone(),
                    second: file.to_string(),
                });
            }
            owner.insert(fqn.to_string(), file.to_string());
            Ok(())
        };
        for (file, text) in sources {
            let de = &mut serde_json::Deserializer::from_str(text);
            let parsed: StubFile = serde_path_to_error::deserialize(de).map_err(|e| StubError::Format {
                file: file.to_string(),
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
            let format = |path: String, message: &str| StubError::Format {
                file: file.to_string(),
                path,
                message: message.to_string(),
            };
            for (fqn, spec) in parsed.functions {
                claim(&fqn, file)?;
                let returns = canonical_returns(spec.returns)
                    .ok_or_else(|| format(format!("functions.{fqn}.returns"), "return list is empty"))?;
                db.functions.insert(fqn.clone(), FunctionStub { fqn, returns });
            }
            for (fqn, spec) in parsed.classes {
                claim(&fqn, file)?;
                let mut methods = BTreeMap::new();
                for (name, m) in spec.methods {
                    let mfqn = format!("{fqn}.{name}");
                    claim(&mfqn, file)?;
                    let returns = canonical_returns(m.returns).ok_or_else(|| {
                        format(format!("classes.{fqn}.methods.{name}.returns"), "return list is empty")
                    })?;
                    methods.insert(name, FunctionStub { fqn: mfqn, returns });
                }
                db.classes.insert(fqn.clone(), ClassStub { fqn, attributes: spec.attributes, methods });
            }
            for (name, target) in parsed.exports {
                if let Some(first) = export_file.get(&name) {
                    return Err(StubError::DuplicateFqn { fqn: name, first: first.clone(), second: file.to_string() });
                }
                export_file.insert(name.clone(), file.to_string());
                db.exports.insert(name, target);
            }
            db.packages.push(PackageStub { package: parsed.package, file: file.to_string() });
        }
        for (name, file) in &export_file {
            if let Some(first) = owner.get(name) {
                return Err(StubError::DuplicateFqn { fqn: name.clone(), first: first.clone(), second: file.clone() });
            }
        }
        db.validate_exports(&export_file)?;
        db.index_modules();
        Ok(db)
    }

    fn validate_exports(&self, export_file: &BTreeMap<String, String>) -> Result<(), StubError> {
        for name in self.exports.keys() {
            let mut chain = vec![name.clone()];
            let mut cur = name.clone();
            loop {
                let next = match self.exports.get(&cur) {
                    Some(t) => t.clone(),
                    None => match self.rewrite_prefix(&cur) {
                        Some(t) if t != cur => t,
                        _ => break,
                    },
                };
                if let Some(pos) = chain.iter().position(|c| *c == next) {
                    let mut cycle = chain[pos..].to_vec();
                    cycle.push(next);
                    return Err(StubError::ExportCycle { cycle });
                }
                chain.push(next.clone());
                cur = next;
                if self.is_declared(&cur) {
                    break;
                }
            }
            if !self.is_declared(&cur) && self.method_of(&cur).is_none() {
                return Err(StubError::DanglingExport {
                    file: export_file.get(name).cloned().unwrap_or_default(),
                    name: name.clone(),
                    target: cur,
                });
            }
        }
        Ok(())
    }

    fn index_modules(&mut self) {
        let mut modules = BTreeSet::new();
        let names =
            self.functions.keys().chain(self.classes.keys()).chain(self.exports.keys()).chain(self.exports.values());
        for name in names {
            let mut end = name.len();
            while let Some(i) = name[..end].rfind('.') {
                modules.insert(name[..i].to_string());
                end = i;
            }
        }
        modules.retain(|m| !self.classes.contains_key(m) && !self.functions.contains_key(m));
        self.modules = modules;
    }

    fn is_declared(&self, fqn: &str) -> bool {
        self.functions.contains_key(fqn) || self.classes.contains_key(fqn)
    }

    fn method_of(&self, fqn: &str) -> Option<(&ClassStub, &FunctionStub)> {
        let (class, name) = fqn.rsplit_once('.')?;
        let c = self.classes.get(class)?;
        Some((c, c.methods.get(name)?))
    }

    /// Rewrites the longest exported proper prefix of `path`.
    fn rewrite_prefix(&self, path: &str) -> Option<String> {
        let mut end = path.len();
        while let Some(i) = path[..end].rfind('.') {
            if let Some(target) = self.exports.get(&path[..i]) {
                return Some(format!("{target}{}", &path[i..]));
            }
            end = i;
        }
        None
    }

    /// Follows the export table (and exported prefixes) to a defining fqn.
    /// Paths that are not exported are returned unchanged.
    pub fn canonical(&self, path: &str) -> String {
        let mut cur = path.to_string();
        // Export chains are validated acyclic; the bound is defensive.
        for _ in 0..=self.exports.len() {
            if self.is_declared(&cur) {
                return cur;
            }
            match self.exports.get(&cur).cloned().or_else(|| self.rewrite_prefix(&cur)) {
                Some(next) => cur = next,
                None => return cur,
            }
        }
        cur
    }

    /// Resolves a dotted path (already alias-expanded) to what it denotes.
    pub fn lookup(&self, path: &str) -> Option<Symbol<'_>> {
        let fqn = self.canonical(path);
        if let Some(f) = self.functions.get(&fqn) {
            return Some(Symbol::Function(f));
        }
        if let Some(c) = self.classes.get(&fqn) {
            return Some(Symbol::Class(c));
        }
        if let Some((c, m)) = self.method_of(&fqn) {
            return Some(Symbol::Method(c, m));
        }
        self.modules.contains(&fqn).then_some(Symbol::Module(fqn))
    }

    pub fn function(&self, fqn: &str) -> Option<&FunctionStub> {
        self.functions.get(fqn).or_else(|| self.method_of(fqn).map(|(_, m)| m))
    }

    pub fn class(&self, fqn: &str) -> Option<&ClassStub> {
        self.classes.get(fqn)
    }

    pub fn is_class(&self, fqn: &str) -> bool {
        self.classes.contains_key(fqn)
    }

    pub fn is_module(&self, path: &str) -> bool {
        self.modules.contains(path)
    }

    /// Declared return types of a function or method.
    pub fn return_type(&self, fqn: &str) -> Option<&[String]> {
        self.function(fqn).map(|f| f.returns.as_slice())
    }

    /// Direct member lookup; no inheritance.
    pub fn member_type(&self, class_fqn: &str, member: &str) -> Option<Member<'_>> {
        let c = self.classes.get(class_fqn)?;
        if let Some(t) = c.attributes.get(member) {
            return Some(Member::Attribute(t));
        }
        c.methods.get(member).map(Member::Method)
    }

    /// Public names `from module import *` binds: the export keys directly
    /// under `module`. `None` when the module declares none.
    pub fn star_exports(&self, module: &str) -> Option<Vec<String>> {
        let module = self.canonical(module);
        let prefix = format!("{module}.");
        let names: BTreeSet<String> = self
            .exports
            .keys()
            .chain(self.functions.keys())
            .chain(self.classes.keys())
            .filter_map(|k| k.strip_prefix(&prefix))
            .filter(|rest| !rest.contains('.') && !rest.starts_with('_'))
            .map(str::to_string)
            .collect();
        let names: Vec<String> = names.into_iter().collect();
        (!names.is_empty()).then_some(names)
    }

    pub fn docstring(&self, fqn: &str) -> Option<&str> {
        self.docstrings.get(fqn).map(String::as_str)
    }

    pub fn packages(&self) -> &[PackageStub] {
        &self.packages
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty() && self.classes.is_empty() && self.exports.is_empty()
    }

    /// Copy of the database without `class_fqn` and its methods.
    pub fn without_class(&self, class_fqn: &str) -> Self {
        let mut db = self.clone();
        db.classes.remove(class_fqn);
        db
    }
}

/// Alias expansion through module-level imports followed by export
/// resolution. `None` if the head is not imported or the path does not
/// name a declared function, class or method.
pub fn resolve_fqn(imports: &ImportTable, dotted: &str, db: &TypeStubDB) -> Option<String> {
    let path = imports.expand(dotted)?;
    match db.lookup(&path)? {
        Symbol::Function(f) => Some(f.fqn.clone()),
        Symbol::Class(c) => Some(c.fqn.clone()),
        Symbol::Method(_, m) => Some(m.fqn.clone()),
        Symbol::Module(_) => None,
    }
}

fn canonical_returns(mut returns: Vec<String>) -> Option<Vec<String>> {
    returns.sort();
    returns.dedup();
    (!returns.is_empty()).then_some(returns)
}

fn parse_docstrings(file: &str, text: &str) -> Result<BTreeMap<String, String>, StubError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| StubError::Format {
        file: file.to_string(),
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
