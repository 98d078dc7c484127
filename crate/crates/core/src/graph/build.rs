//! Entity extraction, name resolution and relation emission.
//!
//! Types come from annotations plus two propagation rules: calling a class
//! yields an instance of it, and `self.x = <expr of known class>` types the
//! attribute `x`. Chains that cannot be resolved emit no `Calls` edge.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{entity_path, Entity, EntityId, EntityKind, ModuleInfo, Relation, RelationTriple, Rssg};
use crate::source::{CallSite, FileModel, RawDecl};

/// Counts of references the resolver could not bind to repository entities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    pub resolved_call_sites: usize,
    pub unresolved_call_sites: usize,
    pub unresolved_imports: usize,
    pub unresolved_bases: usize,
    /// Entity references resolved from each function body; equals the sum of
    /// that function's outgoing `Calls` weights.
    pub resolved_references: BTreeMap<EntityId, u32>,
}

pub fn build_graph(files: &[FileModel]) -> Rssg {
    build_graph_with_diagnostics(files).0
}

pub fn build_graph_with_diagnostics(files: &[FileModel]) -> (Rssg, BuildDiagnostics) {
    let mut order: Vec<usize> = (0..files.len()).collect();
    order.sort_by(|&a, &b| files[a].path.cmp(&files[b].path));
    let files: Vec<&FileModel> = order.iter().map(|&i| &files[i]).collect();

    let mut resolver = Resolver::new(&files);
    let mut triples = Vec::new();
    resolver.contains(&mut triples);
    resolver.inherits(&mut triples);
    resolver.type_relations(&mut triples);
    resolver.imports(&mut triples);
    resolver.calls(&mut triples);

    let modules = files
        .iter()
        .map(|f| ModuleInfo {
            path: f.path.clone(),
            import_statements: f.import_statements.clone(),
        })
        .collect();
    let diagnostics = resolver.diagnostics.into_inner();
    let graph = Rssg::from_parts(resolver.entities, triples, modules);
    (graph, diagnostics)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Binding {
    Entity(EntityId),
    Module(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Value {
    /// An instance of a class. `via_type` is set when the class was reached
    /// through an entity's type (attribute annotation or return type), which
    /// makes the class itself part of the access.
    Instance {
        class: EntityId,
        via_type: bool,
    },
    Class(EntityId),
    Module(String),
}

/// Lexical context a chain is evaluated in.
#[derive(Clone, Copy)]
struct Scope<'s> {
    file: usize,
    owner: Option<EntityId>,
    self_name: Option<&'s str>,
    decl: Option<&'s RawDecl>,
}

#[derive(Default)]
struct Walk {
    refs: Vec<EntityId>,
    value: Option<Value>,
    complete: bool,
}

const MAX_DEPTH: u8 = 6;

struct Resolver<'a> {
    files: &'a [&'a FileModel],
    entities: Vec<Entity>,
    entity_file: Vec<usize>,
    entity_decl: Vec<&'a RawDecl>,
    file_decls: Vec<HashMap<&'a str, EntityId>>,
    modules: HashMap<String, usize>,
    packages: HashSet<String>,
    members: HashMap<EntityId, HashMap<&'a str, EntityId>>,
    bases: HashMap<EntityId, Vec<EntityId>>,
    attr_types: RefCell<HashMap<EntityId, Option<EntityId>>>,
    diagnostics: RefCell<BuildDiagnostics>,
}

impl<'a> Resolver<'a> {
    fn new(files: &'a [&'a FileModel]) -> Self {
        let mut entities = Vec::new();
        let mut entity_file = Vec::new();
        let mut entity_decl = Vec::new();
        let mut file_decls = Vec::with_capacity(files.len());
        let mut modules = HashMap::new();
        let mut packages = HashSet::new();

        for (fi, file) in files.iter().enumerate() {
            let module = file.module_name();
            let mut prefix = String::new();
            for part in module.split('.').filter(|p| !p.is_empty()) {
                if !prefix.is_empty() {
                    prefix.push('.');
                }
                prefix.push_str(part);
                packages.insert(prefix.clone());
            }
            modules.insert(module, fi);

            let mut decls: Vec<&RawDecl> = file.declarations.iter().collect();
            decls.sort_by_key(|d| d.line_span.start);
            let mut by_name = HashMap::new();
            for decl in decls {
                let id = EntityId(entities.len() as u32);
                by_name.insert(decl.qualified_name.as_str(), id);
                entities.push(Entity {
                    id,
                    kind: decl.kind,
                    name: decl.name.clone(),
                    qualified_name: decl.qualified_name.clone(),
                    signature: decl.signature_text.clone(),
                    docstring: decl.docstring.clone(),
                    path: entity_path(&file.path, &decl.qualified_name),
                    file: file.path.clone(),
                    line_span: decl.line_span,
                    annotation: decl.annotation_text.clone(),
                    source_text: decl.source_text.clone(),
                    embedding: None,
                });
                entity_file.push(fi);
                entity_decl.push(decl);
            }
            file_decls.push(by_name);
        }

        Self {
            files,
            entities,
            entity_file,
            entity_decl,
            file_decls,
            modules,
            packages,
            members: HashMap::new(),
            bases: HashMap::new(),
            attr_types: RefCell::new(HashMap::new()),
            diagnostics: RefCell::new(BuildDiagnostics::default()),
        }
    }

    fn kind(&self, id: EntityId) -> EntityKind {
        self.entities[id.index()].kind
    }

    fn contains(&mut self, triples: &mut Vec<RelationTriple>) {
        for idx in 0..self.entities.len() {
            let decl = self.entity_decl[idx];
            if decl.parent.is_empty() {
                continue;
            }
            let fi = self.entity_file[idx];
            let Some(&parent) = self.file_decls[fi].get(decl.parent.as_str()) else {
                continue;
            };
            if self.kind(parent) != EntityKind::Class {
                continue;
            }
            let child = EntityId(idx as u32);
            triples.push(RelationTriple::new(parent, Relation::Contains, child));
            self.members
                .entry(parent)
                .or_default()
                .insert(decl.name.as_str(), child);
        }
    }

    fn inherits(&mut self, triples: &mut Vec<RelationTriple>) {
        let mut bases = HashMap::new();
        for idx in 0..self.entities.len() {
            let decl = self.entity_decl[idx];
            if decl.kind != EntityKind::Class || decl.base_class_names.is_empty() {
                continue;
            }
            let id = EntityId(idx as u32);
            let scope = self.class_scope(id);
            let mut resolved = Vec::new();
            for base in &decl.base_class_names {
                match self.resolve_dotted(base, &scope, 0) {
                    Some(Binding::Entity(b)) if self.kind(b) == EntityKind::Class && b != id => {
                        if !resolved.contains(&b) {
                            resolved.push(b);
                            triples.push(RelationTriple::new(id, Relation::Inherits, b));
                        }
                    }
                    _ => {
                        if base != "object" {
                            self.diagnostics.borrow_mut().unresolved_bases += 1;
                        }
                    }
                }
            }
            bases.insert(id, resolved);
        }
        self.bases = bases;
    }

    fn type_relations(&self, triples: &mut Vec<RelationTriple>) {
        for idx in 0..self.entities.len() {
            let id = EntityId(idx as u32);
            let decl = self.entity_decl[idx];
            match decl.kind {
                EntityKind::Function => {
                    let scope = self.function_scope(id);
                    for class in self.annotation_classes(&decl.return_annotation, &scope) {
                        triples.push(RelationTriple::new(id, Relation::Returns, class));
                    }
                    let mut seen = BTreeSet::new();
                    for param in &decl.params {
                        for class in self.annotation_classes(&param.annotation, &scope) {
                            if seen.insert(class) {
                                triples.push(RelationTriple::new(class, Relation::AsParameter, id));
                            }
                        }
                    }
                }
                EntityKind::Attribute => {
                    let scope = self.class_scope(id);
                    let mut classes = self.annotation_classes(&decl.annotation_text, &scope);
                    if classes.is_empty() {
                        classes.extend(self.attribute_type(id));
                    }
                    for class in classes {
                        triples.push(RelationTriple::new(id, Relation::Returns, class));
                    }
                }
                EntityKind::Class => {}
            }
        }
    }

    fn imports(&self, triples: &mut Vec<RelationTriple>) {
        for (fi, file) in self.files.iter().enumerate() {
            let mut visible: BTreeSet<EntityId> = BTreeSet::new();
            for decl in &file.declarations {
                if decl.parent.is_empty() && decl.kind != EntityKind::Attribute {
                    visible.insert(self.file_decls[fi][decl.qualified_name.as_str()]);
                }
            }
            for import in &file.imports {
                if import.imported_name == "*" {
                    let Some(module) = self.resolve_module(&import.source_module, fi) else {
                        self.diagnostics.borrow_mut().unresolved_imports += 1;
                        continue;
                    };
                    if let Some(&mfi) = self.modules.get(&module) {
                        for decl in &self.files[mfi].declarations {
                            if decl.parent.is_empty()
                                && decl.kind != EntityKind::Attribute
                                && !decl.name.starts_with('_')
                            {
                                visible.insert(self.file_decls[mfi][decl.qualified_name.as_str()]);
                            }
                        }
                    }
                    continue;
                }
                match self.import_binding(fi, import, 0) {
                    Some(Binding::Entity(e)) if self.kind(e) != EntityKind::Attribute => {
                        visible.insert(e);
                    }
                    Some(_) => {}
                    None => self.diagnostics.borrow_mut().unresolved_imports += 1,
                }
            }

            for &f in self.file_decls[fi].values() {
                if self.kind(f) != EntityKind::Function {
                    continue;
                }
                for &e in &visible {
                    if e != f {
                        triples.push(RelationTriple::new(f, Relation::Imports, e));
                    }
                }
            }
        }
    }

    fn calls(&self, triples: &mut Vec<RelationTriple>) {
        for idx in 0..self.entities.len() {
            let decl = self.entity_decl[idx];
            if decl.kind != EntityKind::Function {
                continue;
            }
            let id = EntityId(idx as u32);
            let scope = self.function_scope(id);
            let mut weights: BTreeMap<EntityId, u32> = BTreeMap::new();
            for site in &decl.body_call_sites {
                let walk = self.walk_chain(site, &scope, 0);
                let mut diag = self.diagnostics.borrow_mut();
                if walk.refs.is_empty() {
                    diag.unresolved_call_sites += 1;
                } else {
                    diag.resolved_call_sites += 1;
                }
                for r in walk.refs {
                    *weights.entry(r).or_insert(0) += 1;
                }
            }
            let total: u32 = weights.values().sum();
            if total > 0 {
                self.diagnostics.borrow_mut().resolved_references.insert(id, total);
            }
            for (tail, weight) in weights {
                triples.push(RelationTriple::calls(id, tail, weight));
            }
        }
    }

    fn function_scope(&self, id: EntityId) -> Scope<'a> {
        let decl = self.entity_decl[id.index()];
        let owner = self.owner_class(id);
        let self_name = match (owner, decl.params.first()) {
            (Some(_), Some(first)) if !decl.is_static() => Some(first.name.as_str()),
            _ => None,
        };
        Scope {
            file: self.entity_file[id.index()],
            owner,
            self_name,
            decl: Some(decl),
        }
    }

    /// Scope for annotations written in a class body (or on one of its attributes).
    fn class_scope(&self, id: EntityId) -> Scope<'a> {
        let owner = if self.kind(id) == EntityKind::Class {
            Some(id)
        } else {
            self.owner_class(id)
        };
        Scope {
            file: self.entity_file[id.index()],
            owner,
            self_name: None,
            decl: None,
        }
    }

    fn owner_class(&self, id: EntityId) -> Option<EntityId> {
        let decl = self.entity_decl[id.index()];
        if decl.parent.is_empty() {
            return None;
        }
        let fi = self.entity_file[id.index()];
        self.file_decls[fi]
            .get(decl.parent.as_str())
            .copied()
            .filter(|&p| self.kind(p) == EntityKind::Class)
    }

    /// Absolute dotted module for an import's `source_module` as seen from file `fi`.
    fn resolve_module(&self, spec: &str, fi: usize) -> Option<String> {
        let dots = spec.chars().take_while(|&c| c == '.').count();
        if dots > 0 {
            let file = self.files[fi];
            let module = file.module_name();
            let mut package: Vec<&str> = module.split('.').filter(|p| !p.is_empty()).collect();
            let is_package = file.path.ends_with("__init__.py");
            if !is_package {
                package.pop();
            }
            for _ in 1..dots {
                package.pop()?;
            }
            let rest = &spec[dots..];
            let mut parts = package.join(".");
            if !rest.is_empty() {
                if !parts.is_empty() {
                    parts.push('.');
                }
                parts.push_str(rest);
            }
            return Some(parts);
        }
        if self.modules.contains_key(spec) || self.packages.contains(spec) {
            return Some(spec.to_string());
        }
        let suffix = format!(".{spec}");
        let mut candidates: Vec<&String> = self
            .modules
            .keys()
            .chain(self.packages.iter())
            .filter(|m| m.ends_with(&suffix))
            .collect();
        candidates.sort();
        candidates.first().map(|m| m.to_string())
    }

    fn is_module(&self, dotted: &str) -> bool {
        self.modules.contains_key(dotted) || self.packages.contains(dotted)
    }

    fn import_binding(&self, fi: usize, import: &crate::source::ImportDecl, depth: u8) -> Option<Binding> {
        if import.source_module.is_empty() {
            let target = if import.alias.is_empty() {
                import.imported_name.split('.').next().unwrap_or_default()
            } else {
                import.imported_name.as_str()
            };
            return self.resolve_module(target, fi).map(Binding::Module);
        }
        let module = self.resolve_module(&import.source_module, fi)?;
        self.lookup_in_module(&module, &import.imported_name, depth + 1)
    }

    /// Resolves `name` at module level in file `fi`: definitions first, then imports.
    fn lookup_name(&self, fi: usize, name: &str, depth: u8) -> Option<Binding> {
        if depth > MAX_DEPTH {
            return None;
        }
        let file = self.files[fi];
        if let Some(&id) = self.file_decls[fi].get(name) {
            if self.entity_decl[id.index()].parent.is_empty() {
                return Some(Binding::Entity(id));
            }
        }
        for import in file.imports.iter().rev() {
            if import.imported_name == "*" {
                continue;
            }
            if import.bound_name() == name {
                return self.import_binding(fi, import, depth);
            }
        }
        if !name.starts_with('_') {
            for import in file.imports.iter().filter(|i| i.imported_name == "*") {
                let Some(module) = self.resolve_module(&import.source_module, fi) else {
                    continue;
                };
                if let Some(b) = self.lookup_in_module(&module, name, depth + 1) {
                    return Some(b);
                }
            }
        }
        None
    }

    fn lookup_in_module(&self, module: &str, name: &str, depth: u8) -> Option<Binding> {
        if depth > MAX_DEPTH {
            return None;
        }
        if let Some(&mfi) = self.modules.get(module) {
            if let Some(b) = self.lookup_name(mfi, name, depth + 1) {
                return Some(b);
            }
        }
        let sub = if module.is_empty() {
            name.to_string()
        } else {
            format!("{module}.{name}")
        };
        self.is_module(&sub).then_some(Binding::Module(sub))
    }

    /// Class member lookup through the inheritance closure, left to right.
    fn member(&self, class: EntityId, name: &str) -> Option<EntityId> {
        let mut queue = std::collections::VecDeque::from([class]);
        let mut seen = HashSet::new();
        while let Some(c) = queue.pop_front() {
            if !seen.insert(c) {
                continue;
            }
            if let Some(m) = self.members.get(&c).and_then(|m| m.get(name)) {
                return Some(*m);
            }
            if let Some(bases) = self.bases.get(&c) {
                queue.extend(bases.iter().copied());
            }
        }
        None
    }

    /// Resolves a dotted name such as `helper.SpecDictHelper` in `scope`.
    fn resolve_dotted(&self, dotted: &str, scope: &Scope, depth: u8) -> Option<Binding> {
        let mut parts = dotted.split('.');
        let head = parts.next()?;
        let mut cur = scope
            .owner
            .and_then(|o| self.member(o, head))
            .filter(|&m| self.kind(m) == EntityKind::Class)
            .map(Binding::Entity)
            .or_else(|| self.lookup_name(scope.file, head, depth))?;
        for part in parts {
            cur = match cur {
                Binding::Entity(e) if self.kind(e) == EntityKind::Class => Binding::Entity(self.member(e, part)?),
                Binding::Module(m) => self.lookup_in_module(&m, part, depth)?,
                Binding::Entity(_) => return None,
            };
        }
        Some(cur)
    }

    /// Repository classes mentioned in an annotation, in order of appearance.
    fn annotation_classes(&self, annotation: &str, scope: &Scope) -> Vec<EntityId> {
        let mut out = Vec::new();
        for token in dotted_identifiers(annotation) {
            if let Some(Binding::Entity(e)) = self.resolve_dotted(token, scope, 0) {
                if self.kind(e) == EntityKind::Class && !out.contains(&e) {
                    out.push(e);
                }
            }
        }
        out
    }

    fn return_class(&self, function: EntityId) -> Option<EntityId> {
        let decl = self.entity_decl[function.index()];
        let scope = self.function_scope(function);
        self.annotation_classes(&decl.return_annotation, &scope)
            .first()
            .copied()
    }

    /// Type of an attribute from its annotation, else from the values assigned to it.
    fn attribute_type(&self, attr: EntityId) -> Option<EntityId> {
        if let Some(cached) = self.attr_types.borrow().get(&attr) {
            return *cached;
        }
        self.attr_types.borrow_mut().insert(attr, None);

        let decl = self.entity_decl[attr.index()];
        let scope = self.class_scope(attr);
        let mut ty = self.annotation_classes(&decl.annotation_text, &scope).first().copied();
        if ty.is_none() {
            for source in &decl.attribute_sources {
                let fi = self.entity_file[attr.index()];
                let method_scope = match self.file_decls[fi].get(source.method.as_str()) {
                    Some(&m) => self.function_scope(m),
                    None => scope,
                };
                let walk = self.walk_chain(&source.value, &method_scope, 1);
                if let Some(Value::Instance { class, .. }) = walk.value {
                    ty = Some(class);
                    break;
                }
            }
        }
        self.attr_types.borrow_mut().insert(attr, ty);
        ty
    }

    fn value_of(&self, e: EntityId, invoked: bool) -> Option<Value> {
        let decl = self.entity_decl[e.index()];
        match decl.kind {
            EntityKind::Class if invoked => Some(Value::Instance {
                class: e,
                via_type: false,
            }),
            EntityKind::Class => Some(Value::Class(e)),
            EntityKind::Function => {
                let property = decl
                    .decorators
                    .iter()
                    .any(|d| d == "property" || d.ends_with("cached_property"));
                if invoked || property {
                    self.return_class(e)
                        .map(|class| Value::Instance { class, via_type: true })
                } else {
                    None
                }
            }
            EntityKind::Attribute if !invoked => self
                .attribute_type(e)
                .map(|class| Value::Instance { class, via_type: true }),
            EntityKind::Attribute => None,
        }
    }

    /// Type of a parameter or local name. `Some(None)` means the name is bound
    /// locally but its type is unknown, which shadows module-level names.
    fn local_value(&self, name: &str, scope: &Scope, depth: u8) -> Option<Option<Value>> {
        let decl = scope.decl?;
        let mut bound = false;
        if let Some(param) = decl.params.iter().find(|p| p.name == name) {
            bound = true;
            let class = self.annotation_classes(&param.annotation, scope).first().copied();
            if let Some(class) = class {
                return Some(Some(Value::Instance { class, via_type: false }));
            }
        }
        if depth < MAX_DEPTH {
            for local in decl.locals.iter().filter(|l| l.name == name) {
                bound = true;
                if let Some(&class) = self.annotation_classes(&local.annotation, scope).first() {
                    return Some(Some(Value::Instance { class, via_type: false }));
                }
                if let Some(value) = &local.value {
                    if value.receiver_chain.first().map(String::as_str) == Some(name) {
                        continue;
                    }
                    let walk = self.walk_chain(value, scope, depth + 1);
                    if walk.value.is_some() {
                        return Some(walk.value);
                    }
                }
            }
        }
        bound.then_some(None)
    }

    fn walk_chain(&self, site: &CallSite, scope: &Scope, depth: u8) -> Walk {
        let mut walk = Walk::default();
        let chain = &site.receiver_chain;
        let head = chain[0].as_str();
        let invoked0 = site.invoked_at(0);

        let mut cur = if scope.self_name == Some(head) && scope.owner.is_some() {
            (!invoked0).then(|| Value::Instance {
                class: scope.owner.unwrap(),
                via_type: false,
            })
        } else if head == "super" && invoked0 && scope.owner.is_some() {
            self.bases
                .get(&scope.owner.unwrap())
                .and_then(|b| b.first())
                .map(|&class| Value::Instance { class, via_type: false })
        } else if let Some(local) = self.local_value(head, scope, depth) {
            local
        } else {
            match self.lookup_name(scope.file, head, 0) {
                Some(Binding::Entity(e)) => {
                    walk.refs.push(e);
                    self.value_of(e, invoked0)
                }
                Some(Binding::Module(m)) if !invoked0 => Some(Value::Module(m)),
                _ => None,
            }
        };

        for (i, segment) in chain.iter().enumerate().skip(1) {
            let invoked = site.invoked_at(i);
            cur = match cur.take() {
                Some(Value::Instance { class, via_type }) => match self.member(class, segment) {
                    Some(m) => {
                        if via_type {
                            walk.refs.push(class);
                        }
                        walk.refs.push(m);
                        self.value_of(m, invoked)
                    }
                    None => None,
                },
                Some(Value::Class(class)) => match self.member(class, segment) {
                    Some(m) => {
                        walk.refs.push(m);
                        self.value_of(m, invoked)
                    }
                    None => None,
                },
                Some(Value::Module(module)) => match self.lookup_in_module(&module, segment, 0) {
                    Some(Binding::Entity(e)) => {
                        walk.refs.push(e);
                        self.value_of(e, invoked)
                    }
                    Some(Binding::Module(sub)) if !invoked => Some(Value::Module(sub)),
                    _ => None,
                },
                None => {
                    return walk;
                }
            };
        }
        walk.complete = true;
        walk.value = cur;
        walk
    }
}

/// Dotted identifier tokens of an annotation, quotes removed
/// (`Optional["a.B"]` yields `Optional`, `a.B`).
fn dotted_identifiers(annotation: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let bytes = annotation.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            out.push(annotation[start..i].trim_end_matches('.'));
        } else {
            i += 1;
        }
    }
    out
}
