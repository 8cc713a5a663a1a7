// SPDX-License-Identifier: Apache-2.0

//! Notebook (`.ipynb`, nbformat 4) loading, flattening and writing.
//!
//! Code cells are flattened into one composite script so the frontend can
//! parse the notebook as a single module. [`CellLineMap`] keeps a bijection
//! between script lines and `(code cell, cell line)` locations.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Metadata key that marks cells generated by this tool.
pub const MARKER_KEY: &str = "headergen";

/// Statement that replaces notebook-shell lines (`%magic`, `!cmd`).
const PLACEHOLDER: &str = "pass";

#[derive(Debug, Error)]
pub enum NotebookError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed notebook: {0}")]
    Malformed(String),
    #[error("unsupported nbformat major version {0} (only 4 is supported)")]
    UnsupportedVersion(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Code,
    Markdown,
    Raw,
}

impl CellKind {
    fn as_str(self) -> &'static str {
        match self {
            CellKind::Code => "code",
            CellKind::Markdown => "markdown",
            CellKind::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationKind {
    Index,
    Header,
    Toc,
}

/// Tool-owned tag stored under `metadata.headergen` of generated cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationMarker {
    pub kind: AnnotationKind,
    pub version: String,
}

impl AnnotationMarker {
    pub fn new(kind: AnnotationKind) -> Self {
        Self { kind, version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub kind: CellKind,
    pub source: String,
    /// 0-based position among all cells.
    pub index: usize,
    /// 1-based position among code cells.
    pub code_index: Option<usize>,
    pub annotation: Option<AnnotationMarker>,
    raw: Map<String, Value>,
}

impl Cell {
    /// Builds a tool-generated markdown cell. A fixed `id` keeps regenerated
    /// cells stable across runs; pass `None` for formats without cell ids.
    pub fn generated_markdown(source: &str, marker: AnnotationMarker, id: Option<&str>) -> Self {
        let mut metadata = Map::new();
        metadata.insert(MARKER_KEY.to_string(), serde_json::to_value(&marker).expect("marker serializes"));
        let mut raw = Map::new();
        raw.insert("cell_type".into(), Value::String("markdown".into()));
        if let Some(id) = id {
            raw.insert("id".into(), Value::String(id.to_string()));
        }
        raw.insert("metadata".into(), Value::Object(metadata));
        raw.insert("source".into(), source_lines(source));
        Cell {
            kind: CellKind::Markdown,
            source: source.to_string(),
            index: 0,
            code_index: None,
            annotation: Some(marker),
            raw,
        }
    }

    pub fn is_code(&self) -> bool {
        self.kind == CellKind::Code
    }

    fn from_value(index: usize, value: &Value) -> Result<Self, NotebookError> {
        let obj =
            value.as_object().ok_or_else(|| NotebookError::Malformed(format!("cell {index} is not an object")))?;
        let kind = match obj.get("cell_type").and_then(Value::as_str) {
            Some("code") => CellKind::Code,
            Some("markdown") => CellKind::Markdown,
            Some("raw") => CellKind::Raw,
            Some(other) => {
                return Err(NotebookError::Malformed(format!("cell {index} has unknown cell_type {other:?}")))
            }
            None => return Err(NotebookError::Malformed(format!("cell {index} is missing cell_type"))),
        };
        let source = match obj.get("source") {
            Some(v) => {
                join_source(v).ok_or_else(|| NotebookError::Malformed(format!("cell {index} has invalid source")))?
            }
            None => return Err(NotebookError::Malformed(format!("cell {index} is missing source"))),
        };
        let annotation = obj
            .get("metadata")
            .and_then(|m| m.get(MARKER_KEY))
            .and_then(|m| serde_json::from_value::<AnnotationMarker>(m.clone()).ok());
        Ok(Cell { kind, source, index, code_index: None, annotation, raw: obj.clone() })
    }

    fn to_value(&self) -> Value {
        let mut raw = self.raw.clone();
        raw.insert("cell_type".into(), Value::String(self.kind.as_str().into()));
        let unchanged = raw.get("source").and_then(join_source).as_deref() == Some(&self.source);
        if !unchanged {
            raw.insert("source".into(), source_lines(&self.source));
        }
        let metadata = raw.entry("metadata").or_insert_with(|| Value::Object(Map::new()));
        if let Value::Object(m) = metadata {
            match &self.annotation {
                Some(marker) => {
                    m.insert(MARKER_KEY.into(), serde_json::to_value(marker).expect("marker serializes"));
                }
                None => {
                    m.shift_remove(MARKER_KEY);
                }
            }
        }
        Value::Object(raw)
    }
}

fn join_source(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => parts.iter().map(Value::as_str).collect::<Option<Vec<_>>>().map(|p| p.concat()),
        _ => None,
    }
}

/// Jupyter's list-of-lines form: every line keeps its `\n` except the last.
fn source_lines(source: &str) -> Value {
    Value::Array(source.split_inclusive('\n').map(|l| Value::String(l.to_string())).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NotebookDoc {
    pub nbformat_major: u32,
    pub nbformat_minor: u32,
    pub cells: Vec<Cell>,
    pub notebook_metadata: Map<String, Value>,
    /// Top-level keys other than cells/metadata/nbformat/nbformat_minor.
    extra: Map<String, Value>,
}

impl NotebookDoc {
    pub fn parse(text: &str) -> Result<Self, NotebookError> {
        let value: Value = serde_json::from_str(text).map_err(|e| NotebookError::Malformed(e.to_string()))?;
        let mut obj = match value {
            Value::Object(obj) => obj,
            _ => return Err(NotebookError::Malformed("top level is not an object".into())),
        };
        let major = obj
            .shift_remove("nbformat")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| NotebookError::Malformed("missing integer nbformat".into()))?;
        if major != 4 {
            return Err(NotebookError::UnsupportedVersion(major));
        }
        let minor = obj
            .shift_remove("nbformat_minor")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| NotebookError::Malformed("missing integer nbformat_minor".into()))?;
        let cells = match obj.shift_remove("cells") {
            Some(Value::Array(cells)) => {
                cells.iter().enumerate().map(|(i, c)| Cell::from_value(i, c)).collect::<Result<Vec<_>, _>>()?
            }
            _ => return Err(NotebookError::Malformed("missing cells array".into())),
        };
        let notebook_metadata = match obj.shift_remove("metadata") {
            Some(Value::Object(m)) => m,
            None => Map::new(),
            Some(_) => return Err(NotebookError::Malformed("metadata is not an object".into())),
        };
        let mut doc =
            NotebookDoc { nbformat_major: 4, nbformat_minor: minor as u32, cells, notebook_metadata, extra: obj };
        doc.renumber();
        Ok(doc)
    }

    /// Builds a notebook from `(kind, source)` pairs; mostly useful in tests.
    pub fn from_sources<'a>(cells: impl IntoIterator<Item = (CellKind, &'a str)>) -> Self {
        let cells = cells
            .into_iter()
            .map(|(kind, source)| {
                let mut raw = Map::new();
                raw.insert("cell_type".into(), Value::String(kind.as_str().into()));
                raw.insert("metadata".into(), Value::Object(Map::new()));
                raw.insert("source".into(), source_lines(source));
                if kind == CellKind::Code {
                    raw.insert("execution_count".into(), Value::Null);
                    raw.insert("outputs".into(), Value::Array(vec![]));
                }
                Cell { kind, source: source.to_string(), index: 0, code_index: None, annotation: None, raw }
            })
            .collect();
        let mut doc = NotebookDoc {
            nbformat_major: 4,
            nbformat_minor: 4,
            cells,
            notebook_metadata: Map::new(),
            extra: Map::new(),
        };
        doc.renumber();
        doc
    }

    /// Recomputes `index` and `code_index` after cells were inserted or removed.
    pub fn renumber(&mut self) {
        let mut code = 0;
        for (i, cell) in self.cells.iter_mut().enumerate() {
            cell.index = i;
            cell.code_index = if cell.is_code() {
                code += 1;
                Some(code)
            } else {
                None
            };
        }
    }

    pub fn code_cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.is_code())
    }

    pub fn to_value(&self) -> Value {
        let mut obj = self.extra.clone();
        obj.insert("cells".into(), Value::Array(self.cells.iter().map(Cell::to_value).collect()));
        obj.insert("metadata".into(), Value::Object(self.notebook_metadata.clone()));
        obj.insert("nbformat".into(), Value::from(self.nbformat_major));
        obj.insert("nbformat_minor".into(), Value::from(self.nbformat_minor));
        Value::Object(obj)
    }

    /// Serializes the way Jupyter does: sorted keys, one-space indent,
    /// trailing newline.
    pub fn to_json_string(&self) -> String {
        let mut out = to_canonical_json(&self.to_value(), b" ");
        out.push('\n');
        out
    }
}

/// Pretty-prints `value` with recursively sorted object keys.
pub fn to_canonical_json(value: &Value, indent: &[u8]) -> String {
    let sorted = canonicalize(value);
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(indent);
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    sorted.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Returns a copy of `value` whose object keys are sorted at every level.
pub fn canonicalize(value: &Value) -> Value {
    match value {
        Value::Object(m) => {
            let mut entries: Vec<_> = m.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), canonicalize(v))).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}

pub fn load_notebook(path: &Path) -> Result<NotebookDoc, NotebookError> {
    let bytes = fs::read(path).map_err(|source| NotebookError::Io { path: path.to_path_buf(), source })?;
    let text = String::from_utf8(bytes)
        .map_err(|_| NotebookError::Malformed(format!("{} is not valid UTF-8", path.display())))?;
    NotebookDoc::parse(&text)
}

pub fn write_notebook(nb: &NotebookDoc, path: &Path) -> Result<(), NotebookError> {
    fs::write(path, nb.to_json_string()).map_err(|source| NotebookError::Io { path: path.to_path_buf(), source })
}

/// A `(code cell, line)` location; both components are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellLocation {
    pub code_index: u32,
    pub cell_line: u32,
}

impl CellLocation {
    pub const fn new(code_index: u32, cell_line: u32) -> Self {
        Self { code_index, cell_line }
    }
}

impl fmt::Display for CellLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(C{},{})", self.code_index, self.cell_line)
    }
}

/// Bijection between composite-script lines and cell locations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellLineMap {
    /// `entries[script_line - 1]`
    entries: Vec<CellLocation>,
    /// code_index -> (first script line, line count); empty cells are kept.
    cells: Vec<(u32, u32)>,
}

impl CellLineMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn code_cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn location(&self, script_line: u32) -> Option<CellLocation> {
        let idx = script_line.checked_sub(1)? as usize;
        self.entries.get(idx).copied()
    }

    pub fn script_line(&self, loc: CellLocation) -> Option<u32> {
        let idx = loc.code_index.checked_sub(1)? as usize;
        let (first, count) = *self.cells.get(idx)?;
        (loc.cell_line >= 1 && loc.cell_line <= count).then(|| first + loc.cell_line - 1)
    }

    /// Number of lines contributed by code cell `code_index`.
    pub fn cell_line_count(&self, code_index: u32) -> Option<u32> {
        let idx = code_index.checked_sub(1)? as usize;
        self.cells.get(idx).map(|c| c.1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, CellLocation)> + '_ {
        self.entries.iter().enumerate().map(|(i, loc)| (i as u32 + 1, *loc))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeScript {
    pub text: String,
    pub map: CellLineMap,
}

impl CompositeScript {
    pub fn line_count(&self) -> usize {
        self.map.len()
    }
}

/// True for notebook-shell lines (`%magic`, `%%cell_magic`, `!shell`).
pub fn is_shell_line(line: &str) -> bool {
    matches!(line.trim_start().chars().next(), Some('%') | Some('!'))
}

fn sanitize_line(line: &str) -> String {
    if is_shell_line(line) {
        let indent = &line[..line.len() - line.trim_start().len()];
        format!("{indent}{PLACEHOLDER}")
    } else {
        line.to_string()
    }
}

/// Concatenates code cells into a single script. Shell lines become a
/// placeholder statement so line counts are unchanged.
pub fn flatten(nb: &NotebookDoc) -> CompositeScript {
    let mut lines: Vec<String> = Vec::new();
    let mut entries = Vec::new();
    let mut cells = Vec::new();
    for (i, cell) in nb.code_cells().enumerate() {
        let code_index = i as u32 + 1;
        let first = lines.len() as u32 + 1;
        let mut count = 0;
        for line in cell.source.lines() {
            count += 1;
            lines.push(sanitize_line(line));
            entries.push(CellLocation::new(code_index, count));
        }
        cells.push((first, count));
    }
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    CompositeScript { text, map: CellLineMap { entries, cells } }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nb_json(cells: &str, major: u32) -> String {
        format!(
            r#"{{"cells": [{cells}], "metadata": {{"kernelspec": {{"name": "python3"}}}}, "nbformat": {major}, "nbformat_minor": 5}}"#
        )
    }

    #[test]
    fn empty_notebook_parses() {
        let nb = NotebookDoc::parse(&nb_json("", 4)).unwrap();
        assert!(nb.cells.is_empty());
        let script = flatten(&nb);
        assert_eq!(script.text, "");
        assert!(script.map.is_empty());
    }

    #[test]
    fn version_three_is_rejected() {
        let err = NotebookDoc::parse(&nb_json("", 3)).unwrap_err();
        assert!(matches!(err, NotebookError::UnsupportedVersion(3)));
    }

    #[test]
    fn missing_fields_are_malformed() {
        assert!(matches!(NotebookDoc::parse("{\"cells\": []}"), Err(NotebookError::Malformed(_))));
        assert!(matches!(NotebookDoc::parse("not json"), Err(NotebookError::Malformed(_))));
        assert!(matches!(
            NotebookDoc::parse(&nb_json(r#"{"cell_type": "code"}"#, 4)),
            Err(NotebookError::Malformed(_))
        ));
    }

    #[test]
    fn code_index_counts_code_cells_only() {
        let nb = NotebookDoc::from_sources([
            (CellKind::Markdown, "# Title"),
            (CellKind::Code, "a = 1"),
            (CellKind::Code, ""),
            (CellKind::Raw, "raw"),
            (CellKind::Code, "b = 2"),
        ]);
        let idx: Vec<_> = nb.cells.iter().map(|c| c.code_index).collect();
        assert_eq!(idx, vec![None, Some(1), Some(2), None, Some(3)]);
    }

    #[test]
    fn flatten_maps_lines_across_cells() {
        let nb = NotebookDoc::from_sources([
            (CellKind::Code, "a = 1\nb = 2\nc = 3"),
            (CellKind::Markdown, "text\nmore"),
            (CellKind::Code, "d = 4\ne = 5\nf = 6\ng = 7\n"),
        ]);
        let script = flatten(&nb);
        assert_eq!(script.line_count(), 7);
        assert_eq!(script.map.location(5), Some(CellLocation::new(2, 2)));
        assert_eq!(script.map.script_line(CellLocation::new(2, 2)), Some(5));
        assert_eq!(script.map.location(8), None);
        assert_eq!(script.map.location(0), None);
    }

    #[test]
    fn empty_cells_keep_code_index_without_lines() {
        let nb =
            NotebookDoc::from_sources([(CellKind::Code, "a = 1"), (CellKind::Code, ""), (CellKind::Code, "b = a")]);
        let script = flatten(&nb);
        assert_eq!(script.line_count(), 2);
        assert_eq!(script.map.code_cell_count(), 3);
        assert_eq!(script.map.cell_line_count(2), Some(0));
        assert_eq!(script.map.location(2), Some(CellLocation::new(3, 1)));
    }

    #[test]
    fn shell_lines_become_placeholders() {
        let nb = NotebookDoc::from_sources([(
            CellKind::Code,
            "%matplotlib inline\nimport os\nif True:\n    !ls -la\n    x = 1",
        )]);
        let script = flatten(&nb);
        let lines: Vec<_> = script.text.lines().collect();
        assert_eq!(lines, vec!["pass", "import os", "if True:", "    pass", "    x = 1"]);
        assert_eq!(script.line_count(), 5);
    }

    #[test]
    fn round_trip_preserves_document() {
        let text = nb_json(
            r##"{"cell_type": "markdown", "metadata": {}, "source": ["# T\n", "body"]},
               {"cell_type": "code", "execution_count": 3, "metadata": {"tags": ["x"]},
                "outputs": [{"output_type": "stream", "name": "stdout", "text": ["hi\n"]}],
                "source": "print('hi')"}"##,
            4,
        );
        let nb = NotebookDoc::parse(&text).unwrap();
        let again = NotebookDoc::parse(&nb.to_json_string()).unwrap();
        assert_eq!(nb, again);
        let original: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(canonicalize(&original), canonicalize(&nb.to_value()));
    }

    #[test]
    fn marker_round_trips() {
        let mut nb = NotebookDoc::from_sources([(CellKind::Code, "x = 1")]);
        nb.cells.insert(
            0,
            Cell::generated_markdown("## Index", AnnotationMarker::new(AnnotationKind::Index), Some("hg-index")),
        );
        nb.renumber();
        let again = NotebookDoc::parse(&nb.to_json_string()).unwrap();
        assert_eq!(again.cells[0].annotation.as_ref().map(|m| m.kind), Some(AnnotationKind::Index));
        assert_eq!(again.cells[0].source, "## Index");
        assert!(again.cells[1].annotation.is_none());
    }

    #[test]
    fn write_to_missing_directory_fails() {
        let nb = NotebookDoc::from_sources([]);
        let err = write_notebook(&nb, Path::new("/nonexistent-dir/out.ipynb")).unwrap_err();
        assert!(matches!(err, NotebookError::Io { .. }));
    }

    #[test]
    fn non_utf8_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ipynb");
        fs::write(&path, b"{\"cells\": [\xff]}").unwrap();
        assert!(matches!(load_notebook(&path), Err(NotebookError::Malformed(_))));
    }
}
