//! Language-level model of Python source files.
//!
//! A [`FileModel`] captures what the graph builder needs from one file:
//! declarations (classes, functions, class-bound attributes), import
//! statements and the attribute/call chains used inside function bodies.
//! Bodies are never executed or type checked.

mod fragments;
mod parser;
mod scan;

pub use fragments::slice_fragments;
pub use parser::{parse_file, ParseDiagnostic};
pub use scan::{scan_repository, ScanOutcome, SourceFile};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    Class,
    Function,
    Attribute,
}

/// Inclusive 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start <= end && start <= self.end
    }
}

/// An access or invocation chain such as `self.spec_helper.iterate_option_specs()`.
///
/// `inner_calls` lists the indices of segments that were invoked before the
/// next member access, e.g. `a.b().c` has `inner_calls = [1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallSite {
    pub receiver_chain: Vec<String>,
    pub line: usize,
    pub is_invocation: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inner_calls: Vec<usize>,
}

impl CallSite {
    pub fn new(receiver_chain: Vec<String>, line: usize, is_invocation: bool) -> Self {
        assert!(!receiver_chain.is_empty(), "call site needs at least one segment");
        Self {
            receiver_chain,
            line,
            is_invocation,
            inner_calls: Vec::new(),
        }
    }

    /// Whether segment `idx` is followed by an argument list.
    pub fn invoked_at(&self, idx: usize) -> bool {
        if idx + 1 == self.receiver_chain.len() {
            self.is_invocation
        } else {
            self.inner_calls.contains(&idx)
        }
    }

    pub fn dotted(&self) -> String {
        self.receiver_chain.join(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub annotation: String,
}

/// A name bound inside a function body, used for lightweight type propagation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalBinding {
    pub name: String,
    pub annotation: String,
    pub value: Option<CallSite>,
}

/// Right-hand side of a `self.<attr> = <value>` assignment, with the method it occurs in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSource {
    pub method: String,
    pub value: CallSite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDecl {
    pub kind: DeclKind,
    pub name: String,
    pub qualified_name: String,
    /// Header text without the trailing colon; decorators included.
    pub signature_text: String,
    pub docstring: String,
    pub annotation_text: String,
    pub parent: String,
    pub line_span: LineSpan,
    pub body_call_sites: Vec<CallSite>,
    pub base_class_names: Vec<String>,
    pub params: Vec<Param>,
    pub return_annotation: String,
    pub decorators: Vec<String>,
    pub locals: Vec<LocalBinding>,
    pub attribute_sources: Vec<AttributeSource>,
    /// Verbatim source of the declaration (functions only).
    pub source_text: String,
}

impl RawDecl {
    pub(crate) fn empty(kind: DeclKind, name: &str, qualified_name: String, parent: String) -> Self {
        Self {
            kind,
            name: name.to_string(),
            qualified_name,
            signature_text: String::new(),
            docstring: String::new(),
            annotation_text: String::new(),
            parent,
            line_span: LineSpan::new(1, 1),
            body_call_sites: Vec::new(),
            base_class_names: Vec::new(),
            params: Vec::new(),
            return_annotation: String::new(),
            decorators: Vec::new(),
            locals: Vec::new(),
            attribute_sources: Vec::new(),
            source_text: String::new(),
        }
    }

    pub fn is_static(&self) -> bool {
        self.decorators.iter().any(|d| d == "staticmethod")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportDecl {
    pub imported_name: String,
    pub alias: String,
    /// Module the name is imported from; empty for plain `import a.b` statements.
    /// Relative imports keep their leading dots.
    pub source_module: String,
    pub line: usize,
}

impl ImportDecl {
    /// The name the import binds in the importing module.
    pub fn bound_name(&self) -> &str {
        if !self.alias.is_empty() {
            &self.alias
        } else if self.source_module.is_empty() {
            self.imported_name.split('.').next().unwrap_or(&self.imported_name)
        } else {
            &self.imported_name
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileModel {
    pub path: String,
    pub declarations: Vec<RawDecl>,
    pub imports: Vec<ImportDecl>,
    pub module_call_sites: Vec<CallSite>,
    /// Verbatim module-level import statements, in source order.
    pub import_statements: Vec<String>,
    pub line_count: usize,
}

impl FileModel {
    pub fn empty(path: &str) -> Self {
        Self {
            path: normalize_path(path),
            declarations: Vec::new(),
            imports: Vec::new(),
            module_call_sites: Vec::new(),
            import_statements: Vec::new(),
            line_count: 0,
        }
    }

    pub fn declaration(&self, qualified_name: &str) -> Option<&RawDecl> {
        self.declarations.iter().find(|d| d.qualified_name == qualified_name)
    }

    /// Dotted module name, `pkg/__init__.py` maps to `pkg`.
    pub fn module_name(&self) -> String {
        module_name_of(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub path: String,
    pub start_line: usize,
    pub end_line: usize,
    pub text: String,
}

/// Forward slashes, no `.` or `..` segments, no leading `/`.
pub fn normalize_path(path: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for part in path.split(['/', '\\']) {
        match part {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            p => parts.push(p),
        }
    }
    parts.join("/")
}

pub fn module_name_of(path: &str) -> String {
    let stem = path.strip_suffix(".py").unwrap_or(path);
    let stem = stem.strip_suffix("/__init__").unwrap_or(stem);
    if stem == "__init__" {
        return String::new();
    }
    stem.replace('/', ".")
}
