//! Query generator and brute-force static-check oracle.
//!
//! The oracle enumerates every root-to-node field path explicitly and derives
//! each metric from the path list, instead of folding over the tree.

#![allow(dead_code)]

use gqlshield_graphql::ast::{Field, OperationKind, Selection, SelectionSet, Value};
use gqlshield_graphql::{Document, Schema, TypeKind};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub const SOCIAL_SDL: &str = include_str!("../../../../fixtures/schemas/social.graphql");

/// One field occurrence together with the chain of fields above it.
pub struct PathNode<'a> {
    pub chain: Vec<&'a Field>,
    /// Static parent type for each element of `chain` (`None` under meta fields).
    pub parents: Vec<Option<String>>,
    pub root: String,
}

pub fn enumerate_paths<'a>(doc: &'a Document, schema: &Schema) -> Vec<PathNode<'a>> {
    let mut out = Vec::new();
    for op in &doc.operations {
        let root = match op.kind {
            OperationKind::Query => schema.query_type.clone(),
            OperationKind::Mutation => schema.mutation_type.clone().unwrap_or_default(),
            OperationKind::Subscription => schema.subscription_type.clone().unwrap_or_default(),
        };
        let mut stack: Vec<(&SelectionSet, Vec<&Field>, Vec<Option<String>>, Option<String>)> =
            vec![(&op.selection_set, vec![], vec![], Some(root.clone()))];
        while let Some((set, chain, parents, parent)) = stack.pop() {
            for sel in &set.items {
                match sel {
                    Selection::Field(f) => {
                        let mut c = chain.clone();
                        c.push(f);
                        let mut p = parents.clone();
                        p.push(parent.clone());
                        let child_type = parent.as_ref().and_then(|t| {
                            if f.name.starts_with("__") {
                                return None;
                            }
                            schema.types.get(t).and_then(|d| d.fields.get(&f.name)).map(|fd| fd.ty.named().to_string())
                        });
                        if let Some(ss) = &f.selection_set {
                            stack.push((ss, c.clone(), p.clone(), child_type));
                        }
                        out.push(PathNode { chain: c, parents: p, root: root.clone() });
                    }
                    Selection::InlineFragment(i) => {
                        let t = match (&parent, &i.type_condition) {
                            (None, _) => None,
                            (Some(_), Some(tc)) => Some(tc.clone()),
                            (Some(p), None) => Some(p.clone()),
                        };
                        stack.push((&i.selection_set, chain.clone(), parents.clone(), t));
                    }
                    Selection::FragmentSpread(_) => panic!("oracle expects expanded documents"),
                }
            }
        }
    }
    out
}

fn field_def<'s>(schema: &'s Schema, parent: &Option<String>, f: &Field) -> Option<&'s gqlshield_graphql::schema::FieldDefinition> {
    let p = parent.as_ref()?;
    if f.name.starts_with("__") {
        return None;
    }
    schema.types.get(p)?.fields.get(&f.name)
}

fn multiplicity(f: &Field, default: u64) -> u64 {
    for a in &f.arguments {
        if ["first", "limit", "last", "top", "count"].contains(&a.name.as_str()) {
            if let Value::Int(n) = a.value {
                let n = if n < 0 { 0 } else { n as u64 };
                return if n < default { n } else { default };
            }
        }
    }
    default
}

/// Product of list multiplicities of the strict ancestors of the last field.
fn ancestor_product(schema: &Schema, node: &PathNode, default: u64) -> u64 {
    let mut product = 1u64;
    for k in 0..node.chain.len() - 1 {
        if let Some(def) = field_def(schema, &node.parents[k], node.chain[k]) {
            if def.ty.is_list() {
                product *= multiplicity(node.chain[k], default);
            }
        }
    }
    product
}

#[derive(Debug, PartialEq)]
pub struct Metrics {
    pub depth: u64,
    pub aliases: u64,
    pub batch: u64,
    pub directives: u64,
    pub revisits: u64,
    pub payload: u64,
    pub introspection: bool,
    pub directive_complexity: f64,
}

pub fn oracle(doc: &Document, schema: &Schema, weights: &dyn Fn(&str) -> f64, default_list: u64) -> Metrics {
    let paths = enumerate_paths(doc, schema);
    let depth = paths.iter().map(|p| p.chain.len() as u64).max().unwrap_or(0);
    let aliases = paths.iter().filter(|p| p.chain.last().unwrap().alias.is_some()).count() as u64;
    let introspection = paths.iter().any(|p| matches!(p.chain.last().unwrap().name.as_str(), "__schema" | "__type"));

    // Directives: count every "directives" array element in the serialized AST.
    fn count_dirs(j: &serde_json::Value) -> u64 {
        match j {
            serde_json::Value::Object(m) => m
                .iter()
                .map(|(k, v)| if k == "directives" { v.as_array().unwrap().len() as u64 + count_dirs(v) } else { count_dirs(v) })
                .sum(),
            serde_json::Value::Array(a) => a.iter().map(count_dirs).sum(),
            _ => 0,
        }
    }
    let directives = count_dirs(&serde_json::to_value(doc).unwrap());

    // Revisits: for every path, list the root then each composite result type.
    let mut revisits = 0;
    for p in &paths {
        let mut types = vec![p.root.clone()];
        for (k, f) in p.chain.iter().enumerate() {
            if let Some(def) = field_def(schema, &p.parents[k], f) {
                let t = def.ty.named();
                if schema.types.get(t).is_some_and(|d| matches!(d.kind, TypeKind::Object | TypeKind::Interface | TypeKind::Union)) {
                    types.push(t.to_string());
                }
            }
        }
        for t in &types {
            revisits = revisits.max(types.iter().filter(|x| *x == t).count() as u64);
        }
    }

    // Payload: every leaf contributes the product of its ancestors' list sizes,
    // except that nothing multiplies inside meta-field subtrees.
    let payload = paths
        .iter()
        .filter(|p| p.chain.last().unwrap().selection_set.is_none())
        .map(|p| ancestor_product(schema, p, default_list))
        .sum();

    let directive_complexity = paths
        .iter()
        .map(|p| {
            let f = p.chain.last().unwrap();
            let w = match (field_def(schema, p.parents.last().unwrap(), f), p.parents.last().unwrap()) {
                (Some(_), Some(parent)) => weights(&format!("{parent}.{}", f.name)),
                _ => 1.0,
            };
            w * ancestor_product(schema, p, default_list) as f64
        })
        .sum();

    Metrics {
        depth,
        aliases,
        batch: doc.operations.len() as u64,
        directives,
        revisits: revisits.max(1),
        payload,
        introspection,
        directive_complexity,
    }
}

/// Random queries over the social schema: aliases, directives, list limits,
/// inline fragments, named fragments, meta fields and multi-operation batches.
pub struct QueryGen<'s> {
    schema: &'s Schema,
    rng: StdRng,
    fragments: Vec<String>,
}

impl<'s> QueryGen<'s> {
    pub fn new(schema: &'s Schema, seed: u64) -> Self {
        Self { schema, rng: StdRng::seed_from_u64(seed), fragments: Vec::new() }
    }

    pub fn query(&mut self) -> String {
        self.fragments.clear();
        let ops = if self.rng.gen_bool(0.2) { self.rng.gen_range(2..4) } else { 1 };
        let mut out = Vec::new();
        for i in 0..ops {
            let max_depth = self.rng.gen_range(1..7);
            let body = self.selection("Query", max_depth, true);
            let dirs = self.directives();
            out.push(if ops == 1 && dirs.is_empty() && self.rng.gen_bool(0.5) {
                format!("{{ {body} }}")
            } else {
                format!("query Op{i}{dirs} {{ {body} }}")
            });
        }
        out.extend(self.fragments.drain(..));
        out.join("\n")
    }

    fn directives(&mut self) -> String {
        let n = if self.rng.gen_bool(0.25) { self.rng.gen_range(1..4) } else { 0 };
        (0..n)
            .map(|_| if self.rng.gen_bool(0.5) { " @include(if: true)".to_string() } else { " @skip(if: false)".to_string() })
            .collect()
    }

    fn alias(&mut self) -> String {
        if self.rng.gen_bool(0.25) {
            format!("a{}: ", self.rng.gen_range(0..1000))
        } else {
            String::new()
        }
    }

    fn args(&mut self, def: &gqlshield_graphql::schema::FieldDefinition) -> String {
        let mut parts = Vec::new();
        for a in &def.arguments {
            let required = matches!(a.ty, gqlshield_graphql::TypeRef::NonNull(_));
            if !required && !self.rng.gen_bool(0.5) {
                continue;
            }
            let v = match a.ty.named() {
                "Int" => format!("{}", self.rng.gen_range(-2..25)),
                "ID" => format!("\"{}\"", self.rng.gen_range(1..100)),
                _ => "\"text\"".to_string(),
            };
            parts.push(format!("{}: {v}", a.name));
        }
        if parts.is_empty() {
            String::new()
        } else {
            format!("({})", parts.join(", "))
        }
    }

    fn selection(&mut self, ty: &str, depth: u32, root: bool) -> String {
        let schema = self.schema;
        let def = schema.types.get(ty).unwrap();
        let mut items = Vec::new();
        if root && self.rng.gen_bool(0.08) {
            items.push("__schema { queryType { name } types { name fields { name } } }".to_string());
        }
        if self.rng.gen_bool(0.1) {
            items.push("__typename".to_string());
        }
        if matches!(def.kind, TypeKind::Union | TypeKind::Interface) {
            let mut possible: Vec<String> = schema.possible_types(ty).into_iter().map(String::from).collect();
            possible.shuffle(&mut self.rng);
            let take = self.rng.gen_range(1..=possible.len().min(2));
            if def.kind == TypeKind::Interface {
                items.push(format!("{}id", self.alias()));
            }
            for p in possible.into_iter().take(take) {
                let inner = self.selection(&p, depth, false);
                let dirs = self.directives();
                items.push(format!("... on {p}{dirs} {{ {inner} }}"));
            }
            return items.join(" ");
        }
        let fields: Vec<_> = def.fields.values().collect();
        let n = self.rng.gen_range(1..=3.min(fields.len()));
        for _ in 0..n {
            let f = *fields.choose(&mut self.rng).unwrap();
            let target = f.ty.named();
            let composite = schema.is_composite(target);
            if composite && depth <= 1 {
                let leaf = def.fields.values().find(|g| !schema.is_composite(g.ty.named()));
                if let Some(g) = leaf {
                    let a = self.alias();
                    items.push(format!("{a}{}", g.name));
                }
                continue;
            }
            let (a, args, dirs) = (self.alias(), self.args(f), self.directives());
            if composite {
                let inner = self.selection(target, depth - 1, false);
                if self.rng.gen_bool(0.15) && schema.types[target].kind == TypeKind::Object {
                    let name = format!("F{}", self.fragments.len());
                    let spread_dirs = if self.rng.gen_bool(0.3) { " @include(if: true)" } else { "" };
                    self.fragments.push(format!("fragment {name} on {target} {{ {inner} }}"));
                    items.push(format!("{a}{}{args}{dirs} {{ ...{name}{spread_dirs} }}", f.name));
                } else if self.rng.gen_bool(0.1) && schema.types[target].kind == TypeKind::Object {
                    items.push(format!("{a}{}{args}{dirs} {{ ... {{ {inner} }} }}", f.name));
                } else {
                    items.push(format!("{a}{}{args}{dirs} {{ {inner} }}", f.name));
                }
            } else {
                items.push(format!("{a}{}{args}{dirs}", f.name));
            }
        }
        if items.is_empty() {
            items.push("__typename".to_string());
        }
        items.join(" ")
    }
}
