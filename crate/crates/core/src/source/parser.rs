use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser};

use super::{
    normalize_path, AttributeSource, CallSite, DeclKind, FileModel, ImportDecl, LineSpan, LocalBinding, Param, RawDecl,
};

/// Why a file could not be turned into a [`FileModel`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Files whose top-level error nodes cover more than this share of the bytes are skipped.
const MAX_ERROR_SHARE: f64 = 0.5;

pub fn parse_file(path: &str, source: &str) -> Result<FileModel, ParseDiagnostic> {
    let path = normalize_path(path);
    let mut model = FileModel::empty(&path);
    model.line_count = source.lines().count();
    if source.trim().is_empty() {
        return Ok(model);
    }

    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("python grammar is ABI compatible");
    let tree = parser.parse(source, None).ok_or_else(|| ParseDiagnostic {
        path: path.clone(),
        message: "parser produced no tree".into(),
    })?;
    let root = tree.root_node();
    if root.has_error() {
        let error_bytes = error_coverage(root);
        let share = error_bytes as f64 / source.len().max(1) as f64;
        if root.is_error() || share > MAX_ERROR_SHARE {
            return Err(ParseDiagnostic {
                path,
                message: format!(
                    "unrecoverable syntax error ({:.0}% of the file inside error nodes)",
                    share * 100.0
                ),
            });
        }
    }

    let mut walker = FileWalker {
        src: source.as_bytes(),
        lines: source.lines().collect(),
        model: &mut model,
    };
    walker.module_statements(root);
    Ok(model)
}

fn error_coverage(root: Node) -> usize {
    if root.is_error() {
        return root.end_byte() - root.start_byte();
    }
    let mut cursor = root.walk();
    root.children(&mut cursor)
        .filter(|c| c.is_error())
        .map(|c| c.end_byte() - c.start_byte())
        .sum()
}

/// `self.<name> = ...` assignments collected while walking a class's methods.
#[derive(Default)]
struct SelfAttributes {
    by_name: BTreeMap<String, SelfAttribute>,
}

struct SelfAttribute {
    first_line: usize,
    annotation: String,
    sources: Vec<AttributeSource>,
}

#[derive(Default)]
struct BodyFacts {
    call_sites: Vec<CallSite>,
    locals: Vec<LocalBinding>,
    self_assignments: Vec<(String, String, Option<CallSite>, usize)>,
}

struct FileWalker<'a> {
    src: &'a [u8],
    lines: Vec<&'a str>,
    model: &'a mut FileModel,
}

impl<'a> FileWalker<'a> {
    fn text(&self, node: Node) -> &'a str {
        node.utf8_text(self.src).unwrap_or("")
    }

    fn push_decl(&mut self, decl: RawDecl) -> bool {
        if self.model.declaration(&decl.qualified_name).is_some() {
            return false;
        }
        self.model.declarations.push(decl);
        true
    }

    fn module_statements(&mut self, node: Node) {
        let mut cursor = node.walk();
        let children: Vec<Node> = node.named_children(&mut cursor).collect();
        for child in children {
            match child.kind() {
                "import_statement" | "import_from_statement" => self.import(child),
                "class_definition" => self.class(child, child, &[], ""),
                "function_definition" => self.function(child, child, &[], "", None),
                "decorated_definition" => self.decorated(child, "", None),
                "if_statement" | "try_statement" | "with_statement" | "block" | "else_clause" | "elif_clause"
                | "except_clause" | "finally_clause" => self.module_compound(child),
                _ => {
                    let mut facts = BodyFacts::default();
                    self.walk(child, &mut facts, None);
                    self.model.module_call_sites.extend(facts.call_sites);
                }
            }
        }
    }

    fn module_compound(&mut self, node: Node) {
        let mut cursor = node.walk();
        let children: Vec<Node> = node.named_children(&mut cursor).collect();
        for child in children {
            match child.kind() {
                "block" => self.module_statements(child),
                k if k.ends_with("_clause") => self.module_compound(child),
                _ => {
                    let mut facts = BodyFacts::default();
                    self.walk(child, &mut facts, None);
                    self.model.module_call_sites.extend(facts.call_sites);
                }
            }
        }
    }

    fn import(&mut self, node: Node) {
        let line = node.start_position().row + 1;
        self.model.import_statements.push(self.text(node).to_string());
        let source_module = if node.kind() == "import_from_statement" {
            node.child_by_field_name("module_name")
                .map(|m| self.text(m).to_string())
                .unwrap_or_default()
        } else {
            String::new()
        };
        let mut cursor = node.walk();
        let names: Vec<Node> = node.children_by_field_name("name", &mut cursor).collect();
        for name in names {
            let (imported, alias) = match name.kind() {
                "aliased_import" => (
                    name.child_by_field_name("name").map(|n| self.text(n)).unwrap_or(""),
                    name.child_by_field_name("alias").map(|n| self.text(n)).unwrap_or(""),
                ),
                _ => (self.text(name), ""),
            };
            if imported.is_empty() {
                continue;
            }
            self.model.imports.push(ImportDecl {
                imported_name: imported.to_string(),
                alias: alias.to_string(),
                source_module: source_module.clone(),
                line,
            });
        }
        let mut cursor = node.walk();
        if node.named_children(&mut cursor).any(|c| c.kind() == "wildcard_import") {
            self.model.imports.push(ImportDecl {
                imported_name: "*".into(),
                alias: String::new(),
                source_module,
                line,
            });
        }
    }

    fn decorated(&mut self, node: Node, parent: &str, owner: Option<&mut SelfAttributes>) {
        let mut decorators = Vec::new();
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            if child.kind() == "decorator" {
                let text = self.text(child).trim_start_matches('@').trim();
                let name = text.split('(').next().unwrap_or(text).trim();
                decorators.push(name.to_string());
            }
        }
        let Some(def) = node.child_by_field_name("definition") else {
            return;
        };
        match def.kind() {
            "class_definition" => self.class(def, node, &decorators, parent),
            "function_definition" => self.function(def, node, &decorators, parent, owner),
            _ => {}
        }
    }

    /// Header text from `outer`'s start up to the colon that opens `node`'s body.
    fn header(&self, node: Node, outer: Node) -> String {
        let body_start = node
            .child_by_field_name("body")
            .map(|b| b.start_byte())
            .unwrap_or(node.end_byte());
        let mut end = body_start;
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            if child.kind() == ":" && child.end_byte() <= body_start {
                end = child.start_byte();
            }
        }
        String::from_utf8_lossy(&self.src[outer.start_byte()..end])
            .trim_end()
            .to_string()
    }

    fn docstring(&self, body: Option<Node>) -> String {
        let Some(body) = body else {
            return String::new();
        };
        let mut cursor = body.walk();
        let Some(first) = body.named_children(&mut cursor).next() else {
            return String::new();
        };
        if first.kind() != "expression_statement" {
            return String::new();
        }
        match first.named_child(0) {
            Some(s) if s.kind() == "string" => clean_docstring(self.text(s)),
            _ => String::new(),
        }
    }

    fn span(&self, outer: Node) -> LineSpan {
        LineSpan::new(outer.start_position().row + 1, outer.end_position().row + 1)
    }

    fn verbatim_lines(&self, span: LineSpan) -> String {
        let end = span.end.min(self.lines.len());
        if span.start > end {
            return String::new();
        }
        self.lines[span.start - 1..end].join("\n")
    }

    fn class(&mut self, node: Node, outer: Node, decorators: &[String], parent: &str) {
        let Some(name_node) = node.child_by_field_name("name") else {
            return;
        };
        let name = self.text(name_node).to_string();
        let qualified = qualify(parent, &name);
        let body = node.child_by_field_name("body");

        let mut decl = RawDecl::empty(DeclKind::Class, &name, qualified.clone(), parent.to_string());
        decl.signature_text = self.header(node, outer);
        decl.docstring = self.docstring(body);
        decl.line_span = self.span(outer);
        decl.decorators = decorators.to_vec();
        if let Some(bases) = node.child_by_field_name("superclasses") {
            let mut cursor = bases.walk();
            for base in bases.named_children(&mut cursor) {
                if matches!(base.kind(), "identifier" | "attribute") {
                    decl.base_class_names.push(self.text(base).to_string());
                }
            }
        }
        if !self.push_decl(decl) {
            return;
        }

        let Some(body) = body else {
            return;
        };
        let mut self_attrs = SelfAttributes::default();
        let mut cursor = body.walk();
        let members: Vec<Node> = body.named_children(&mut cursor).collect();
        for member in members {
            match member.kind() {
                "function_definition" => self.function(member, member, &[], &qualified, Some(&mut self_attrs)),
                "decorated_definition" => self.decorated(member, &qualified, Some(&mut self_attrs)),
                "class_definition" => self.class(member, member, &[], &qualified),
                "expression_statement" => self.class_attribute(member, &qualified),
                _ => {}
            }
        }

        for (attr_name, attr) in self_attrs.by_name {
            let attr_qualified = qualify(&qualified, &attr_name);
            if let Some(existing) = self
                .model
                .declarations
                .iter_mut()
                .find(|d| d.qualified_name == attr_qualified)
            {
                if existing.kind == DeclKind::Attribute {
                    existing.attribute_sources.extend(attr.sources);
                    if existing.annotation_text.is_empty() {
                        existing.annotation_text = attr.annotation;
                    }
                }
                continue;
            }
            let mut decl = RawDecl::empty(DeclKind::Attribute, &attr_name, attr_qualified, qualified.clone());
            if !attr.annotation.is_empty() {
                decl.signature_text = format!("{attr_name}: {}", attr.annotation);
            }
            decl.annotation_text = attr.annotation;
            decl.line_span = LineSpan::new(attr.first_line, attr.first_line);
            decl.attribute_sources = attr.sources;
            self.model.declarations.push(decl);
        }
    }

    /// Annotated class-body assignment, `x: int = 0`.
    fn class_attribute(&mut self, stmt: Node, class_qualified: &str) {
        let Some(assign) = stmt.named_child(0) else {
            return;
        };
        if assign.kind() != "assignment" {
            return;
        }
        let (Some(left), Some(ty)) = (assign.child_by_field_name("left"), assign.child_by_field_name("type")) else {
            return;
        };
        if left.kind() != "identifier" {
            return;
        }
        let name = self.text(left).to_string();
        let annotation = self.text(ty).to_string();
        let mut decl = RawDecl::empty(
            DeclKind::Attribute,
            &name,
            qualify(class_qualified, &name),
            class_qualified.to_string(),
        );
        decl.signature_text = format!("{name}: {annotation}");
        decl.annotation_text = annotation;
        decl.line_span = self.span(stmt);
        if let Some(value) = assign.child_by_field_name("right") {
            if let Some(site) = self.chain(value).map(|c| c.site) {
                decl.attribute_sources.push(AttributeSource {
                    method: String::new(),
                    value: site,
                });
            }
        }
        self.push_decl(decl);
    }

    fn function(
        &mut self,
        node: Node,
        outer: Node,
        decorators: &[String],
        parent: &str,
        owner: Option<&mut SelfAttributes>,
    ) {
        let Some(name_node) = node.child_by_field_name("name") else {
            return;
        };
        let name = self.text(name_node).to_string();
        let qualified = qualify(parent, &name);
        let body = node.child_by_field_name("body");

        let mut decl = RawDecl::empty(DeclKind::Function, &name, qualified.clone(), parent.to_string());
        decl.signature_text = self.header(node, outer);
        decl.docstring = self.docstring(body);
        decl.line_span = self.span(outer);
        decl.decorators = decorators.to_vec();
        decl.source_text = self.verbatim_lines(decl.line_span);
        if let Some(params) = node.child_by_field_name("parameters") {
            decl.params = self.params(params);
        }
        if let Some(ret) = node.child_by_field_name("return_type") {
            decl.return_annotation = self.text(ret).to_string();
        }

        let self_name = match (&owner, decl.params.first()) {
            (Some(_), Some(first)) if !decl.is_static() => Some(first.name.clone()),
            _ => None,
        };
        let mut facts = BodyFacts::default();
        if let Some(body) = body {
            self.walk(body, &mut facts, self_name.as_deref());
        }
        decl.body_call_sites = facts.call_sites;
        decl.locals = facts.locals;

        if let Some(owner) = owner {
            for (attr, annotation, value, line) in facts.self_assignments {
                let entry = owner.by_name.entry(attr).or_insert_with(|| SelfAttribute {
                    first_line: line,
                    annotation: String::new(),
                    sources: Vec::new(),
                });
                if entry.annotation.is_empty() {
                    entry.annotation = annotation;
                }
                if let Some(value) = value {
                    entry.sources.push(AttributeSource {
                        method: qualified.clone(),
                        value,
                    });
                }
            }
        }
        self.push_decl(decl);
    }

    fn params(&self, params: Node) -> Vec<Param> {
        let mut out = Vec::new();
        let mut cursor = params.walk();
        for p in params.named_children(&mut cursor) {
            let (name, annotation) = match p.kind() {
                "identifier" => (self.text(p), ""),
                "typed_parameter" => {
                    let ty = p.child_by_field_name("type").map(|t| self.text(t)).unwrap_or("");
                    let name = p.named_child(0).map(|n| self.text(n)).unwrap_or("");
                    (name, ty)
                }
                "default_parameter" | "typed_default_parameter" => (
                    p.child_by_field_name("name").map(|n| self.text(n)).unwrap_or(""),
                    p.child_by_field_name("type").map(|t| self.text(t)).unwrap_or(""),
                ),
                "list_splat_pattern" | "dictionary_splat_pattern" => (self.text(p), ""),
                _ => continue,
            };
            let name = name.trim_start_matches('*');
            if !name.is_empty() {
                out.push(Param {
                    name: name.to_string(),
                    annotation: annotation.to_string(),
                });
            }
        }
        out
    }

    /// Collects call sites and bindings from a function body or module statement.
    fn walk(&self, node: Node, facts: &mut BodyFacts, self_name: Option<&str>) {
        match node.kind() {
            "function_definition" | "class_definition" | "lambda" => {
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk(body, facts, self_name);
                }
            }
            "assignment" => self.assignment(node, facts, self_name),
            "call" | "attribute" => {
                if let Some(chain) = self.chain(node) {
                    facts.call_sites.push(chain.site);
                    for side in chain.side_nodes {
                        self.walk(side, facts, self_name);
                    }
                } else if node.kind() == "attribute" {
                    if let Some(object) = node.child_by_field_name("object") {
                        self.walk(object, facts, self_name);
                    }
                } else {
                    self.walk_children(node, facts, self_name);
                }
            }
            "keyword_argument" => {
                if let Some(value) = node.child_by_field_name("value") {
                    self.walk(value, facts, self_name);
                }
            }
            _ => self.walk_children(node, facts, self_name),
        }
    }

    fn walk_children(&self, node: Node, facts: &mut BodyFacts, self_name: Option<&str>) {
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            self.walk(child, facts, self_name);
        }
    }

    fn assignment(&self, node: Node, facts: &mut BodyFacts, self_name: Option<&str>) {
        let left = node.child_by_field_name("left");
        let right = node.child_by_field_name("right");
        let annotation = node
            .child_by_field_name("type")
            .map(|t| self.text(t).to_string())
            .unwrap_or_default();
        let value = right.and_then(|r| self.chain(r)).map(|c| c.site);
        let line = node.start_position().row + 1;
        if let Some(left) = left {
            match left.kind() {
                "identifier" => facts.locals.push(LocalBinding {
                    name: self.text(left).to_string(),
                    annotation: annotation.clone(),
                    value: value.clone(),
                }),
                "attribute" => {
                    let object = left.child_by_field_name("object");
                    let attr = left.child_by_field_name("attribute");
                    if let (Some(object), Some(attr), Some(self_name)) = (object, attr, self_name) {
                        if object.kind() == "identifier" && self.text(object) == self_name {
                            facts.self_assignments.push((
                                self.text(attr).to_string(),
                                annotation.clone(),
                                value.clone(),
                                line,
                            ));
                        }
                    }
                }
                _ => {}
            }
        }
        if let Some(right) = right {
            self.walk(right, facts, self_name);
        }
    }

    /// Flattens an identifier/attribute/call chain into a [`CallSite`].
    fn chain<'t>(&self, node: Node<'t>) -> Option<Chain<'t>> {
        let mut reversed: Vec<String> = Vec::new();
        let mut invoked_rev: Vec<bool> = Vec::new();
        let mut side_nodes = Vec::new();
        let mut cur = node;
        let mut pending_call = false;
        loop {
            match cur.kind() {
                "call" => {
                    if let Some(args) = cur.child_by_field_name("arguments") {
                        side_nodes.push(args);
                    }
                    pending_call = true;
                    cur = cur.child_by_field_name("function")?;
                }
                "identifier" => {
                    reversed.push(self.text(cur).to_string());
                    invoked_rev.push(pending_call);
                    break;
                }
                "attribute" => {
                    let attr = cur.child_by_field_name("attribute")?;
                    reversed.push(self.text(attr).to_string());
                    invoked_rev.push(pending_call);
                    pending_call = false;
                    cur = cur.child_by_field_name("object")?;
                }
                _ => return None,
            }
        }
        reversed.reverse();
        invoked_rev.reverse();
        let last = reversed.len() - 1;
        let mut site = CallSite::new(reversed, node.start_position().row + 1, invoked_rev[last]);
        site.inner_calls = invoked_rev[..last]
            .iter()
            .enumerate()
            .filter(|(_, &called)| called)
            .map(|(i, _)| i)
            .collect();
        Some(Chain { site, side_nodes })
    }
}

struct Chain<'t> {
    site: CallSite,
    side_nodes: Vec<Node<'t>>,
}

fn qualify(parent: &str, name: &str) -> String {
    if parent.is_empty() {
        name.to_string()
    } else {
        format!("{parent}.{name}")
    }
}

/// Strips string prefix and quotes, then trims and dedents like `inspect.cleandoc`.
fn clean_docstring(literal: &str) -> String {
    let body = literal.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    let body = ["\"\"\"", "'''", "\"", "'"]
        .iter()
        .find_map(|q| body.strip_prefix(q).and_then(|b| b.strip_suffix(q)))
        .unwrap_or(body);

    let lines: Vec<&str> = body.lines().collect();
    if lines.is_empty() {
        return String::new();
    }
    let indent = lines[1..]
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    out.push(lines[0].trim().to_string());
    for line in &lines[1..] {
        let trimmed = if line.len() >= indent {
            &line[indent..]
        } else {
            line.trim_start()
        };
        out.push(trimmed.trim_end().to_string());
    }
    while out.first().is_some_and(|l| l.is_empty()) {
        out.remove(0);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    out.join("\n")
}
