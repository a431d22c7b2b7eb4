//! AST-threshold DoS checks and the two complexity estimators.
//!
//! All functions expect a fragment-expanded document. Depth counts fields
//! only; inline fragments are transparent. Fields under `__schema` and
//! `__type` have no schema types, so they weigh 1, never multiply by list
//! sizes and never count toward type revisits.

use std::collections::HashMap;
use std::time::Instant;

use gqlshield_graphql::ast::{Field, Selection, SelectionSet, Value};
use gqlshield_graphql::{is_meta_field, validate, Document, Schema};

use crate::config::{Estimator, SecurityConfig};
use crate::report::{CheckKind, CheckResult};

/// Argument names whose integer literal bounds a list field's length.
pub const LIMIT_ARGS: [&str; 5] = ["first", "limit", "last", "top", "count"];

fn fields(set: &SelectionSet) -> Vec<&Field> {
    let mut out = Vec::new();
    fn walk<'a>(set: &'a SelectionSet, out: &mut Vec<&'a Field>) {
        for s in &set.items {
            match s {
                Selection::Field(f) => out.push(f),
                Selection::InlineFragment(i) => walk(&i.selection_set, out),
                Selection::FragmentSpread(_) => {}
            }
        }
    }
    walk(set, &mut out);
    out
}

/// Fields of `set` paired with the static parent type each is selected on.
fn typed_fields<'a>(set: &'a SelectionSet, parent: &'a str) -> Vec<(&'a Field, &'a str)> {
    let mut out = Vec::new();
    fn walk<'a>(set: &'a SelectionSet, parent: &'a str, out: &mut Vec<(&'a Field, &'a str)>) {
        for s in &set.items {
            match s {
                Selection::Field(f) => out.push((f, parent)),
                Selection::InlineFragment(i) => walk(&i.selection_set, i.type_condition.as_deref().unwrap_or(parent), out),
                Selection::FragmentSpread(_) => {}
            }
        }
    }
    walk(set, parent, &mut out);
    out
}

pub fn query_depth(doc: &Document) -> u64 {
    fn depth(set: &SelectionSet) -> u64 {
        fields(set)
            .into_iter()
            .map(|f| 1 + f.selection_set.as_ref().map_or(0, depth))
            .max()
            .unwrap_or(0)
    }
    doc.operations.iter().map(|op| depth(&op.selection_set)).max().unwrap_or(0)
}

pub fn count_aliases(doc: &Document) -> u64 {
    fn count(set: &SelectionSet) -> u64 {
        fields(set)
            .into_iter()
            .map(|f| u64::from(f.alias.is_some()) + f.selection_set.as_ref().map_or(0, count))
            .sum()
    }
    doc.operations.iter().map(|op| count(&op.selection_set)).sum()
}

pub fn batch_size(doc: &Document) -> u64 {
    doc.operations.len() as u64
}

/// Directive applications on operations, variable definitions, fields,
/// fragment spreads, inline fragments and fragment definitions.
pub fn count_directives(doc: &Document) -> u64 {
    fn count(set: &SelectionSet) -> u64 {
        set.items
            .iter()
            .map(|s| match s {
                Selection::Field(f) => f.directives.len() as u64 + f.selection_set.as_ref().map_or(0, count),
                Selection::InlineFragment(i) => i.directives.len() as u64 + count(&i.selection_set),
                Selection::FragmentSpread(s) => s.directives.len() as u64,
            })
            .sum()
    }
    let ops: u64 = doc
        .operations
        .iter()
        .map(|op| {
            let vars: usize = op.variables.iter().map(|v| v.directives.len()).sum();
            (op.directives.len() + vars) as u64 + count(&op.selection_set)
        })
        .sum();
    let frags: u64 = doc.fragments.values().map(|f| f.directives.len() as u64 + count(&f.selection_set)).sum();
    ops + frags
}

pub fn detect_introspection(doc: &Document) -> bool {
    fn any(set: &SelectionSet) -> bool {
        fields(set)
            .into_iter()
            .any(|f| matches!(f.name.as_str(), "__schema" | "__type") || f.selection_set.as_ref().is_some_and(any))
    }
    doc.operations.iter().any(|op| any(&op.selection_set))
}

/// Largest number of times one composite type occurs on a single root-to-leaf
/// path. The operation's root type counts as the first element of each path.
pub fn max_type_revisits(doc: &Document, schema: &Schema) -> Result<u64, gqlshield_graphql::ValidationError> {
    validate(doc, schema)?;
    fn walk<'s>(set: &'s SelectionSet, parent: &'s str, schema: &'s Schema, counts: &mut HashMap<&'s str, u64>) -> u64 {
        let mut best = 0;
        for (f, p) in typed_fields(set, parent) {
            if is_meta_field(&f.name) {
                continue;
            }
            let Some(def) = schema.field(p, &f.name) else { continue };
            let ty = def.ty.named();
            if !schema.is_composite(ty) {
                continue;
            }
            let c = counts.entry(ty).or_insert(0);
            *c += 1;
            best = best.max(*c);
            if let Some(ss) = &f.selection_set {
                best = best.max(walk(ss, ty, schema, counts));
            }
            *counts.get_mut(ty).expect("entry inserted above") -= 1;
        }
        best
    }
    let mut best = 0;
    for op in &doc.operations {
        let root = schema
            .root_type(op.kind)
            .ok_or(gqlshield_graphql::ValidationError::MissingRoot(op.kind.as_str()))?;
        let mut counts = HashMap::from([(root, 1)]);
        best = best.max(walk(&op.selection_set, root, schema, &mut counts).max(1));
    }
    Ok(best)
}

/// List multiplicity of `f`: the first integer literal among [`LIMIT_ARGS`]
/// (clamped at 0) capped by `default_list_size`, else `default_list_size`.
pub fn list_multiplicity(f: &Field, default_list_size: u64) -> u64 {
    f.arguments
        .iter()
        .find_map(|a| match (&a.value, LIMIT_ARGS.contains(&a.name.as_str())) {
            (Value::Int(n), true) => Some((*n).max(0) as u64),
            _ => None,
        })
        .map_or(default_list_size, |n| n.min(default_list_size))
}

/// Bottom-up response size estimate in abstract units.
pub fn estimate_payload_size(doc: &Document, schema: &Schema, cfg: &SecurityConfig) -> u64 {
    fn untyped(set: &SelectionSet) -> u64 {
        fields(set)
            .into_iter()
            .map(|f| f.selection_set.as_ref().map_or(1, untyped))
            .fold(0, u64::saturating_add)
    }
    fn size(set: &SelectionSet, parent: &str, schema: &Schema, list: u64) -> u64 {
        typed_fields(set, parent)
            .into_iter()
            .map(|(f, p)| {
                let def = if is_meta_field(&f.name) { None } else { schema.field(p, &f.name) };
                match (def, &f.selection_set) {
                    (_, None) => 1,
                    (None, Some(ss)) => untyped(ss),
                    (Some(def), Some(ss)) => {
                        let inner = size(ss, def.ty.named(), schema, list);
                        if def.ty.is_list() {
                            inner.saturating_mul(list_multiplicity(f, list))
                        } else {
                            inner
                        }
                    }
                }
            })
            .fold(0, u64::saturating_add)
    }
    doc.operations
        .iter()
        .filter_map(|op| schema.root_type(op.kind).map(|root| size(&op.selection_set, root, schema, cfg.default_list_size)))
        .fold(0, u64::saturating_add)
}

pub fn complexity_simple(doc: &Document, cfg: &SecurityConfig) -> f64 {
    cfg.simple_field_cost * query_depth(doc) as f64
}

/// Sum over field nodes of `weight("Type.field")` times the product of the
/// enclosing list multiplicities.
pub fn complexity_directive(doc: &Document, schema: &Schema, cfg: &SecurityConfig) -> f64 {
    fn untyped(set: &SelectionSet, mult: f64) -> f64 {
        fields(set).into_iter().map(|f| mult + f.selection_set.as_ref().map_or(0.0, |ss| untyped(ss, mult))).sum()
    }
    fn cost(set: &SelectionSet, parent: &str, schema: &Schema, cfg: &SecurityConfig, mult: f64) -> f64 {
        typed_fields(set, parent)
            .into_iter()
            .map(|(f, p)| {
                let owner = if is_meta_field(&f.name) { None } else { schema.field_owner(p, &f.name) };
                match owner {
                    None => mult + f.selection_set.as_ref().map_or(0.0, |ss| untyped(ss, mult)),
                    Some((owner, def)) => {
                        let own = cfg.weight(&format!("{owner}.{}", f.name)) * mult;
                        let inner_mult =
                            if def.ty.is_list() { mult * list_multiplicity(f, cfg.default_list_size) as f64 } else { mult };
                        own + f.selection_set.as_ref().map_or(0.0, |ss| cost(ss, def.ty.named(), schema, cfg, inner_mult))
                    }
                }
            })
            .sum()
    }
    doc.operations
        .iter()
        .filter_map(|op| schema.root_type(op.kind).map(|root| cost(&op.selection_set, root, schema, cfg, 1.0)))
        .sum()
}

fn timed(f: impl FnOnce() -> CheckResult) -> CheckResult {
    let start = Instant::now();
    let r = f();
    let micros = start.elapsed().as_micros() as u64;
    r.with_duration(micros)
}

/// Runs every static check in report order. Disabled checks are `skipped`;
/// checks that need a schema are `skipped` when none is given. A document
/// that fails schema validation yields a single blocked `parse` result.
pub fn run_static_checks(doc: &Document, schema: Option<&Schema>, cfg: &SecurityConfig) -> Vec<CheckResult> {
    if let Some(s) = schema {
        if let Err(e) = validate(doc, s) {
            return vec![CheckResult::blocked(CheckKind::Parse, e.to_string())];
        }
    }
    CheckKind::STATIC.into_iter().map(|k| static_check(k, doc, schema, cfg)).collect()
}

/// One static check, assuming the document already passed validation.
pub fn static_check(kind: CheckKind, doc: &Document, schema: Option<&Schema>, cfg: &SecurityConfig) -> CheckResult {
    if !cfg.is_enabled(kind) {
        return CheckResult::skipped(kind, "disabled");
    }
    let no_schema = || CheckResult::skipped(kind, "no schema");
    timed(|| match kind {
        CheckKind::Depth => CheckResult::threshold(kind, query_depth(doc) as f64, cfg.max_depth as f64, "query depth"),
        CheckKind::Aliases => CheckResult::threshold(kind, count_aliases(doc) as f64, cfg.max_aliases as f64, "aliased fields"),
        CheckKind::Batch => CheckResult::threshold(kind, batch_size(doc) as f64, cfg.max_batch as f64, "operations"),
        CheckKind::Directives => {
            CheckResult::threshold(kind, count_directives(doc) as f64, cfg.max_directives as f64, "directive applications")
        }
        CheckKind::Circular => match schema {
            Some(s) => match max_type_revisits(doc, s) {
                Ok(n) => CheckResult::threshold(kind, n as f64, cfg.max_circular_revisits as f64, "max type occurrences on a path"),
                Err(e) => CheckResult::blocked(kind, e.to_string()),
            },
            None => no_schema(),
        },
        CheckKind::PayloadInflation => match schema {
            Some(s) => CheckResult::threshold(
                kind,
                estimate_payload_size(doc, s, cfg) as f64,
                cfg.max_payload_estimate as f64,
                "estimated response units",
            ),
            None => no_schema(),
        },
        CheckKind::Introspection => {
            let limit = if cfg.allow_introspection { 1.0 } else { 0.0 };
            let found = detect_introspection(doc);
            CheckResult::threshold(kind, if found { 1.0 } else { 0.0 }, limit, if found { "__schema/__type present" } else { "none" })
        }
        CheckKind::Complexity => match (cfg.estimator, schema) {
            (Estimator::Simple, _) => CheckResult::threshold(kind, complexity_simple(doc, cfg), cfg.complexity_threshold, "simple estimator"),
            (Estimator::Directive, Some(s)) => {
                CheckResult::threshold(kind, complexity_directive(doc, s, cfg), cfg.complexity_threshold, "directive estimator")
            }
            (Estimator::Directive, None) => no_schema(),
        },
        other => CheckResult::skipped(other, "not a static check"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::CheckStatus;
    use gqlshield_graphql::{expand_fragments, parse_query, parse_schema};

    const SDL: &str = "type Query { me: User a: A node: Node } \
        type User { id: ID name: String friends(first: Int): [User] } \
        type A { b: B c: Int } type B { c: Int a: A } interface Node { id: ID }";

    fn doc(src: &str) -> Document {
        expand_fragments(&parse_query(src).unwrap()).unwrap()
    }

    fn schema() -> Schema {
        parse_schema(SDL).unwrap()
    }

    #[test]
    fn depth_examples() {
        assert_eq!(query_depth(&doc("{ a }")), 1);
        assert_eq!(query_depth(&doc("{ a { b { c } } }")), 3);
        assert_eq!(query_depth(&doc("{ a { ... on T { b { c } } } d }")), 3);
    }

    #[test]
    fn counter_examples() {
        assert_eq!(count_aliases(&doc("{ a }")), 0);
        assert_eq!(count_aliases(&doc("{ x: a, y: a, z: a }")), 3);
        let many: String = (0..100).map(|i| format!("a{i}: a ")).collect();
        assert_eq!(count_aliases(&doc(&format!("{{ {many} }}"))), 100);
        assert_eq!(batch_size(&doc("{ a }")), 1);
        assert_eq!(batch_size(&doc("query A{a} query B{b} query C{c}")), 3);
        assert_eq!(count_directives(&doc("{ a }")), 0);
        assert_eq!(count_directives(&doc("{ a @include(if:true) @skip(if:false) }")), 2);
        assert_eq!(count_directives(&doc("query @x { a }")), 1);
    }

    #[test]
    fn revisit_examples() {
        let s = schema();
        assert_eq!(max_type_revisits(&doc("{ me { id } }"), &s).unwrap(), 1);
        assert_eq!(max_type_revisits(&doc("{ me { friends { friends { id } } } }"), &s).unwrap(), 3);
        assert_eq!(
            max_type_revisits(&doc("{ me { friends { id } } x: me { friends { name } } }"), &s).unwrap(),
            2,
            "max per path, not sum"
        );
        assert!(max_type_revisits(&doc("{ nope }"), &s).is_err());
    }

    #[test]
    fn payload_examples() {
        let s = schema();
        let cfg = SecurityConfig::default();
        assert_eq!(estimate_payload_size(&doc("{ me { id } }"), &s, &cfg), 1);
        assert_eq!(estimate_payload_size(&doc("{ me { friends { id } } }"), &s, &cfg), 10);
        assert_eq!(estimate_payload_size(&doc("{ me { friends(first: 3) { id } } }"), &s, &cfg), 3);
    }

    #[test]
    fn introspection_examples() {
        assert!(detect_introspection(&doc("{ __schema { types { name } } }")));
        assert!(!detect_introspection(&doc("{ user { id } }")));
        assert!(detect_introspection(&doc(r#"{ a { __type(name:"X"){ name } } }"#)));
    }

    #[test]
    fn complexity_examples() {
        let s = schema();
        let mut cfg = SecurityConfig { simple_field_cost: 10.0, ..Default::default() };
        assert_eq!(complexity_simple(&doc("{ a { b { c } } }"), &cfg), 30.0);
        cfg.field_weights = [("Query.me".to_string(), 2.0), ("User.id".to_string(), 1.0)].into();
        assert_eq!(complexity_directive(&doc("{ me { id } }"), &s, &cfg), 3.0);
        cfg.field_weights.insert("User.friends".into(), 20.0);
        assert_eq!(complexity_directive(&doc("{ me { friends { id } } }"), &s, &cfg), 32.0);
        cfg.field_weights.clear();
        assert_eq!(complexity_directive(&doc("{ me { id name } a { c } }"), &s, &cfg), 5.0);
    }

    #[test]
    fn run_checks() {
        let s = schema();
        let cfg = SecurityConfig::default();
        let r = run_static_checks(&doc("{ me { id name } }"), Some(&s), &cfg);
        assert_eq!(r.len(), 8);
        assert!(r.iter().all(|c| c.status == CheckStatus::Pass), "{r:?}");

        let aliases: String = (0..50).map(|i| format!("x{i}: me {{ id }} ")).collect();
        let cfg10 = SecurityConfig { max_aliases: 10, ..Default::default() };
        let r = run_static_checks(&doc(&format!("{{ {aliases} }}")), Some(&s), &cfg10);
        let a = r.iter().find(|c| c.check == CheckKind::Aliases).unwrap();
        assert_eq!((a.status, a.score, a.threshold), (CheckStatus::Blocked, 50.0, 10.0));

        let r = run_static_checks(&doc("{ __schema { types { name } } }"), Some(&s), &cfg);
        assert!(r.iter().find(|c| c.check == CheckKind::Introspection).unwrap().is_blocked());

        let r = run_static_checks(&doc("{ nope }"), Some(&s), &cfg);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].check, CheckKind::Parse);
    }

    #[test]
    fn boundary_passes() {
        let s = schema();
        let cfg = SecurityConfig { max_depth: 3, ..Default::default() };
        let r = run_static_checks(&doc("{ me { friends { id } } }"), Some(&s), &cfg);
        assert_eq!(r[0].status, CheckStatus::Pass);
        let r = run_static_checks(&doc("{ me { friends { friends { id } } } }"), Some(&s), &cfg);
        assert_eq!(r[0].status, CheckStatus::Blocked);
    }
}
