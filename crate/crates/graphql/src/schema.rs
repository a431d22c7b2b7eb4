//! SDL parsing and the resolved schema model.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::Serialize;

use crate::ast::{OperationKind, TypeRef};
use crate::error::{ParseError, SchemaError};
use crate::lexer::TokenKind;
use crate::parser::Parser;

pub const BUILTIN_SCALARS: [&str; 5] = ["Int", "Float", "String", "Boolean", "ID"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeKind {
    Object,
    Interface,
    Union,
    Enum,
    Scalar,
    InputObject,
}

impl TypeKind {
    /// Object, interface and union types carry selection sets.
    pub fn is_composite(self) -> bool {
        matches!(self, TypeKind::Object | TypeKind::Interface | TypeKind::Union)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputValueDefinition {
    pub name: String,
    pub ty: TypeRef,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDefinition {
    pub name: String,
    pub ty: TypeRef,
    pub arguments: Vec<InputValueDefinition>,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeDefinition {
    pub name: String,
    pub kind: TypeKind,
    pub description: Option<String>,
    /// Fields of object, interface and input types, in declaration order.
    pub fields: IndexMap<String, FieldDefinition>,
    pub interfaces: Vec<String>,
    /// Union member types.
    pub members: Vec<String>,
    pub enum_values: Vec<String>,
}

impl TypeDefinition {
    fn new(name: String, kind: TypeKind, description: Option<String>) -> Self {
        Self {
            name,
            kind,
            description,
            fields: IndexMap::new(),
            interfaces: Vec::new(),
            members: Vec::new(),
            enum_values: Vec::new(),
        }
    }
}

/// A parsed, reference-checked schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schema {
    pub types: BTreeMap<String, TypeDefinition>,
    pub query_type: String,
    pub mutation_type: Option<String>,
    pub subscription_type: Option<String>,
    /// Object/interface type → named composite types reachable through one field.
    pub adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl Schema {
    pub fn get(&self, name: &str) -> Option<&TypeDefinition> {
        self.types.get(name)
    }

    pub fn root_type(&self, kind: OperationKind) -> Option<&str> {
        match kind {
            OperationKind::Query => Some(self.query_type.as_str()),
            OperationKind::Mutation => self.mutation_type.as_deref(),
            OperationKind::Subscription => self.subscription_type.as_deref(),
        }
    }

    pub fn is_composite(&self, name: &str) -> bool {
        self.get(name).is_some_and(|t| t.kind.is_composite())
    }

    /// Object types an abstract type may resolve to, sorted by name.
    pub fn possible_types(&self, name: &str) -> Vec<&str> {
        match self.get(name) {
            Some(t) if t.kind == TypeKind::Union => {
                let mut m: Vec<&str> = t.members.iter().map(String::as_str).collect();
                m.sort_unstable();
                m
            }
            Some(t) if t.kind == TypeKind::Interface => self
                .types
                .values()
                .filter(|o| o.interfaces.iter().any(|i| i == &t.name))
                .map(|o| o.name.as_str())
                .collect(),
            Some(t) => vec![t.name.as_str()],
            None => Vec::new(),
        }
    }

    /// Looks up `field` on `parent`.
    ///
    /// Spliced fragment spreads lose their type condition, so for abstract
    /// parents the lookup falls back to the possible types in name order.
    pub fn field(&self, parent: &str, field: &str) -> Option<&FieldDefinition> {
        self.field_owner(parent, field).map(|(_, f)| f)
    }

    /// Like [`Schema::field`], also returning the name of the type that
    /// declares the field.
    pub fn field_owner(&self, parent: &str, field: &str) -> Option<(&str, &FieldDefinition)> {
        let t = self.get(parent)?;
        if let Some(f) = t.fields.get(field) {
            return Some((t.name.as_str(), f));
        }
        if matches!(t.kind, TypeKind::Interface | TypeKind::Union) {
            for p in self.possible_types(parent) {
                if let Some((name, f)) = self.get(p).and_then(|pt| pt.fields.get(field).map(|f| (pt.name.as_str(), f))) {
                    return Some((name, f));
                }
            }
        }
        None
    }

    /// True when the schema declares `Type.field` (used to cross-check weight keys).
    pub fn has_field_path(&self, path: &str) -> bool {
        match path.split_once('.') {
            Some((ty, f)) => self.get(ty).is_some_and(|t| t.fields.contains_key(f)),
            None => false,
        }
    }

    /// Every `Type.field` of output (object/interface) types, in deterministic order.
    pub fn output_fields(&self) -> impl Iterator<Item = (&TypeDefinition, &FieldDefinition)> {
        self.types
            .values()
            .filter(|t| matches!(t.kind, TypeKind::Object | TypeKind::Interface))
            .flat_map(|t| t.fields.values().map(move |f| (t, f)))
    }
}

struct SdlParser<'a> {
    p: Parser<'a>,
    types: BTreeMap<String, TypeDefinition>,
    extensions: Vec<TypeDefinition>,
    roots: BTreeMap<String, String>,
}

impl<'a> SdlParser<'a> {
    fn run(mut self) -> Result<(BTreeMap<String, TypeDefinition>, BTreeMap<String, String>), SchemaError> {
        if self.p.at_eof() {
            return Err(self.p.error("schema contains no definitions").into());
        }
        while !self.p.at_eof() {
            let description = self.p.description()?;
            let extend = if self.p.at_name("extend") {
                self.p.bump()?;
                true
            } else {
                false
            };
            let kw = match self.p.peek() {
                TokenKind::Name(n) => n.clone(),
                _ => return Err(self.p.unexpected("type system definition").into()),
            };
            let def = match kw.as_str() {
                "schema" => {
                    self.schema_definition()?;
                    continue;
                }
                "directive" => {
                    self.directive_definition()?;
                    continue;
                }
                "scalar" => {
                    self.p.bump()?;
                    let name = self.p.name()?;
                    self.p.directives(true)?;
                    TypeDefinition::new(name, TypeKind::Scalar, description)
                }
                "type" | "interface" => {
                    self.p.bump()?;
                    let kind = if kw == "type" { TypeKind::Object } else { TypeKind::Interface };
                    let mut def = TypeDefinition::new(self.p.name()?, kind, description);
                    def.interfaces = self.implements()?;
                    self.p.directives(true)?;
                    def.fields = self.fields_definition(false)?;
                    def
                }
                "input" => {
                    self.p.bump()?;
                    let mut def = TypeDefinition::new(self.p.name()?, TypeKind::InputObject, description);
                    self.p.directives(true)?;
                    def.fields = self.fields_definition(true)?;
                    def
                }
                "union" => {
                    self.p.bump()?;
                    let mut def = TypeDefinition::new(self.p.name()?, TypeKind::Union, description);
                    self.p.directives(true)?;
                    if self.p.eat(&TokenKind::Equals)? {
                        self.p.eat(&TokenKind::Pipe)?;
                        def.members.push(self.p.name()?);
                        while self.p.eat(&TokenKind::Pipe)? {
                            def.members.push(self.p.name()?);
                        }
                    }
                    def
                }
                "enum" => {
                    self.p.bump()?;
                    let mut def = TypeDefinition::new(self.p.name()?, TypeKind::Enum, description);
                    self.p.directives(true)?;
                    if self.p.eat(&TokenKind::BraceL)? {
                        while !self.p.eat(&TokenKind::BraceR)? {
                            self.p.description()?;
                            def.enum_values.push(self.p.name()?);
                            self.p.directives(true)?;
                        }
                    }
                    def
                }
                _ => return Err(self.p.unexpected("type system definition").into()),
            };
            if extend {
                self.extensions.push(def);
            } else {
                if self.types.contains_key(&def.name) {
                    return Err(SchemaError::DuplicateType(def.name));
                }
                self.types.insert(def.name.clone(), def);
            }
        }
        for ext in std::mem::take(&mut self.extensions) {
            match self.types.get_mut(&ext.name) {
                Some(base) => {
                    base.fields.extend(ext.fields);
                    base.interfaces.extend(ext.interfaces);
                    base.members.extend(ext.members);
                    base.enum_values.extend(ext.enum_values);
                }
                None => return Err(SchemaError::UnresolvedType(vec![ext.name])),
            }
        }
        Ok((self.types, self.roots))
    }

    fn implements(&mut self) -> Result<Vec<String>, ParseError> {
        let mut out = Vec::new();
        if self.p.at_name("implements") {
            self.p.bump()?;
            self.p.eat(&TokenKind::Amp)?;
            out.push(self.p.name()?);
            while self.p.eat(&TokenKind::Amp)? {
                out.push(self.p.name()?);
            }
        }
        Ok(out)
    }

    fn input_value(&mut self) -> Result<InputValueDefinition, ParseError> {
        let description = self.p.description()?;
        let name = self.p.name()?;
        self.p.expect(&TokenKind::Colon)?;
        let ty = self.p.type_ref()?;
        if self.p.eat(&TokenKind::Equals)? {
            self.p.value(true)?;
        }
        self.p.directives(true)?;
        Ok(InputValueDefinition { name, ty, description })
    }

    fn fields_definition(&mut self, input: bool) -> Result<IndexMap<String, FieldDefinition>, ParseError> {
        let mut out = IndexMap::new();
        if !self.p.eat(&TokenKind::BraceL)? {
            return Ok(out);
        }
        while !self.p.eat(&TokenKind::BraceR)? {
            if self.p.at_eof() {
                return Err(self.p.unexpected("\"}\""));
            }
            if input {
                let iv = self.input_value()?;
                out.insert(
                    iv.name.clone(),
                    FieldDefinition { name: iv.name, ty: iv.ty, arguments: Vec::new(), description: iv.description },
                );
                continue;
            }
            let description = self.p.description()?;
            let name = self.p.name()?;
            let mut arguments = Vec::new();
            if self.p.eat(&TokenKind::ParenL)? {
                while !self.p.eat(&TokenKind::ParenR)? {
                    arguments.push(self.input_value()?);
                }
            }
            self.p.expect(&TokenKind::Colon)?;
            let ty = self.p.type_ref()?;
            self.p.directives(true)?;
            out.insert(name.clone(), FieldDefinition { name, ty, arguments, description });
        }
        Ok(out)
    }

    fn schema_definition(&mut self) -> Result<(), ParseError> {
        self.p.bump()?;
        self.p.directives(true)?;
        self.p.expect(&TokenKind::BraceL)?;
        while !self.p.eat(&TokenKind::BraceR)? {
            let op = self.p.name()?;
            if !matches!(op.as_str(), "query" | "mutation" | "subscription") {
                return Err(self.p.error(format!("unknown root operation {op:?}")));
            }
            self.p.expect(&TokenKind::Colon)?;
            let ty = self.p.name()?;
            self.roots.insert(op, ty);
        }
        Ok(())
    }

    fn directive_definition(&mut self) -> Result<(), ParseError> {
        self.p.bump()?;
        self.p.expect(&TokenKind::At)?;
        self.p.name()?;
        if self.p.eat(&TokenKind::ParenL)? {
            while !self.p.eat(&TokenKind::ParenR)? {
                self.input_value()?;
            }
        }
        if self.p.at_name("repeatable") {
            self.p.bump()?;
        }
        self.p.expect_keyword("on")?;
        self.p.eat(&TokenKind::Pipe)?;
        self.p.name()?;
        while self.p.eat(&TokenKind::Pipe)? {
            self.p.name()?;
        }
        Ok(())
    }
}

/// Parses SDL text into a [`Schema`], resolving every type reference.
pub fn parse_schema(sdl: &str) -> Result<Schema, SchemaError> {
    let sdl_parser = SdlParser {
        p: Parser::new(sdl)?,
        types: BTreeMap::new(),
        extensions: Vec::new(),
        roots: BTreeMap::new(),
    };
    let (mut types, roots) = sdl_parser.run()?;
    for s in BUILTIN_SCALARS {
        types
            .entry(s.to_string())
            .or_insert_with(|| TypeDefinition::new(s.to_string(), TypeKind::Scalar, None));
    }

    let mut unresolved = BTreeSet::new();
    for t in types.values() {
        for f in t.fields.values() {
            if !types.contains_key(f.ty.named()) {
                unresolved.insert(f.ty.named().to_string());
            }
            for a in &f.arguments {
                if !types.contains_key(a.ty.named()) {
                    unresolved.insert(a.ty.named().to_string());
                }
            }
        }
        for n in t.interfaces.iter().chain(&t.members) {
            if !types.contains_key(n) {
                unresolved.insert(n.clone());
            }
        }
    }
    for root in roots.values() {
        if !types.contains_key(root) {
            unresolved.insert(root.clone());
        }
    }
    if !unresolved.is_empty() {
        return Err(SchemaError::UnresolvedType(unresolved.into_iter().collect()));
    }

    let root_or_default = |op: &str, default: &str| -> Option<String> {
        match roots.get(op) {
            Some(t) => Some(t.clone()),
            None if roots.is_empty() && types.contains_key(default) => Some(default.to_string()),
            None => None,
        }
    };
    let query_type =
        root_or_default("query", "Query").ok_or_else(|| SchemaError::MissingQueryRoot("Query".into()))?;
    let mutation_type = root_or_default("mutation", "Mutation");
    let subscription_type = root_or_default("subscription", "Subscription");

    let mut adjacency = BTreeMap::new();
    for t in types.values() {
        if !matches!(t.kind, TypeKind::Object | TypeKind::Interface) {
            continue;
        }
        let targets: BTreeSet<String> = t
            .fields
            .values()
            .map(|f| f.ty.named())
            .filter(|n| types.get(*n).is_some_and(|d| d.kind.is_composite()))
            .map(str::to_string)
            .collect();
        adjacency.insert(t.name.clone(), targets);
    }

    Ok(Schema { types, query_type, mutation_type, subscription_type, adjacency })
}
