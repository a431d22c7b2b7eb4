//! Extraction of user-supplied strings ("payload sites") from a document.

use serde::Serialize;
use serde_json::Value as Json;

use crate::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteOrigin {
    ArgumentLiteral,
    VariableValue,
    ListItem,
    ObjectField,
}

/// One string from an argument literal or a bound variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PayloadSite {
    /// Raw string content with escapes resolved, untrimmed.
    pub text: String,
    pub origin: SiteOrigin,
    /// Provenance such as `op[0].user.args.filter.names[1]`.
    pub path: String,
    pub operation_index: usize,
}

/// Collects every string reachable from arguments (field, directive and
/// operation directives), descending into lists, objects and bound variables.
///
/// Field segments use the response key (alias when present). Variables that are
/// neither supplied nor defaulted are skipped. Sites appear in document order.
pub fn extract_string_inputs(doc: &Document, variables: &serde_json::Map<String, Json>) -> Vec<PayloadSite> {
    let mut out = Vec::new();
    for (i, op) in doc.operations.iter().enumerate() {
        let mut cx = Walk { op, index: i, vars: variables, out: &mut out };
        let prefix = format!("op[{i}]");
        cx.directives(&op.directives, &prefix);
        cx.selection_set(&op.selection_set, &prefix);
    }
    out
}

struct Walk<'a> {
    op: &'a OperationDefinition,
    index: usize,
    vars: &'a serde_json::Map<String, Json>,
    out: &'a mut Vec<PayloadSite>,
}

impl Walk<'_> {
    fn selection_set(&mut self, set: &SelectionSet, prefix: &str) {
        for sel in &set.items {
            match sel {
                Selection::Field(f) => {
                    let path = format!("{prefix}.{}", f.response_key());
                    for a in &f.arguments {
                        self.value(&a.value, &format!("{path}.args.{}", a.name), SiteOrigin::ArgumentLiteral);
                    }
                    self.directives(&f.directives, &path);
                    if let Some(ss) = &f.selection_set {
                        self.selection_set(ss, &path);
                    }
                }
                Selection::InlineFragment(i) => {
                    self.directives(&i.directives, prefix);
                    self.selection_set(&i.selection_set, prefix);
                }
                Selection::FragmentSpread(s) => self.directives(&s.directives, prefix),
            }
        }
    }

    fn directives(&mut self, dirs: &[Directive], prefix: &str) {
        for d in dirs {
            for a in &d.arguments {
                self.value(&a.value, &format!("{prefix}.@{}.args.{}", d.name, a.name), SiteOrigin::ArgumentLiteral);
            }
        }
    }

    fn push(&mut self, text: &str, origin: SiteOrigin, path: &str) {
        self.out.push(PayloadSite {
            text: text.to_string(),
            origin,
            path: path.to_string(),
            operation_index: self.index,
        });
    }

    fn value(&mut self, v: &Value, path: &str, origin: SiteOrigin) {
        match v {
            Value::String(s) => self.push(s, origin, path),
            Value::List(items) => {
                for (k, item) in items.iter().enumerate() {
                    self.value(item, &format!("{path}[{k}]"), SiteOrigin::ListItem);
                }
            }
            Value::Object(fields) => {
                for (name, item) in fields {
                    self.value(item, &format!("{path}.{name}"), SiteOrigin::ObjectField);
                }
            }
            Value::Variable(name) => {
                if let Some(j) = self.vars.get(name) {
                    self.json(j, path);
                } else if let Some(default) =
                    self.op.variables.iter().find(|d| &d.name == name).and_then(|d| d.default_value.as_ref())
                {
                    self.value(default, path, origin);
                }
            }
            Value::Int(_) | Value::Float(_) | Value::Boolean(_) | Value::Null | Value::Enum(_) => {}
        }
    }

    fn json(&mut self, j: &Json, path: &str) {
        match j {
            Json::String(s) => self.push(s, SiteOrigin::VariableValue, path),
            Json::Array(items) => {
                for (k, item) in items.iter().enumerate() {
                    self.json(item, &format!("{path}[{k}]"));
                }
            }
            Json::Object(map) => {
                for (k, item) in map {
                    self.json(item, &format!("{path}.{k}"));
                }
            }
            Json::Null | Json::Bool(_) | Json::Number(_) => {}
        }
    }
}
