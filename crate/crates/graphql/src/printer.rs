//! Canonical GraphQL printing.
//!
//! The output format is fixed so that `print(parse(print(parse(x))))` is
//! byte-identical to `print(parse(x))`:
//!
//! * definitions are separated by one blank line; the output ends with `\n`;
//! * operations come first (source order), then fragments (source order);
//! * an anonymous query without variables or directives prints as a bare
//!   selection set, every other operation prints its keyword;
//! * selection sets open with ` {` on the owning line, list one selection per
//!   line indented by two spaces per level, and close with `}` on its own line;
//! * arguments, variable definitions, list items and object fields are joined
//!   with `", "`; object literals print as `{a: 1}`;
//! * strings always print in the quoted (non-block) form, escaping `"`, `\`,
//!   `\b \f \n \r \t` and any other control character as `\u00XX`;
//! * floats print their original source text.

use std::fmt::Write;

use crate::ast::*;

pub fn print_document(doc: &Document) -> String {
    let mut out = String::new();
    let mut first = true;
    for op in &doc.operations {
        if !first {
            out.push('\n');
        }
        first = false;
        print_operation(&mut out, op);
    }
    for frag in doc.fragments.values() {
        if !first {
            out.push('\n');
        }
        first = false;
        out.push_str("fragment ");
        out.push_str(&frag.name);
        out.push_str(" on ");
        out.push_str(&frag.type_condition);
        print_directives(&mut out, &frag.directives);
        print_selection_set(&mut out, &frag.selection_set, 0);
        out.push('\n');
    }
    out
}

fn print_operation(out: &mut String, op: &OperationDefinition) {
    let shorthand = op.kind == OperationKind::Query
        && op.name.is_none()
        && op.variables.is_empty()
        && op.directives.is_empty();
    if shorthand {
        out.push('{');
        print_selection_items(out, &op.selection_set, 0);
        out.push('\n');
        return;
    }
    out.push_str(op.kind.as_str());
    if let Some(name) = &op.name {
        out.push(' ');
        out.push_str(name);
    }
    if !op.variables.is_empty() {
        out.push('(');
        for (i, v) in op.variables.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push('$');
            out.push_str(&v.name);
            out.push_str(": ");
            print_type(out, &v.ty);
            if let Some(d) = &v.default_value {
                out.push_str(" = ");
                print_value(out, d);
            }
            print_directives(out, &v.directives);
        }
        out.push(')');
    }
    print_directives(out, &op.directives);
    print_selection_set(out, &op.selection_set, 0);
    out.push('\n');
}

pub fn print_type(out: &mut String, ty: &TypeRef) {
    match ty {
        TypeRef::Named(n) => out.push_str(n),
        TypeRef::List(inner) => {
            out.push('[');
            print_type(out, inner);
            out.push(']');
        }
        TypeRef::NonNull(inner) => {
            print_type(out, inner);
            out.push('!');
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_selection_set(out: &mut String, set: &SelectionSet, level: usize) {
    out.push_str(" {");
    print_selection_items(out, set, level);
}

fn print_selection_items(out: &mut String, set: &SelectionSet, level: usize) {
    for sel in &set.items {
        out.push('\n');
        indent(out, level + 1);
        match sel {
            Selection::Field(f) => {
                if let Some(a) = &f.alias {
                    out.push_str(a);
                    out.push_str(": ");
                }
                out.push_str(&f.name);
                print_arguments(out, &f.arguments);
                print_directives(out, &f.directives);
                if let Some(ss) = &f.selection_set {
                    print_selection_set(out, ss, level + 1);
                }
            }
            Selection::FragmentSpread(s) => {
                out.push_str("...");
                out.push_str(&s.name);
                print_directives(out, &s.directives);
            }
            Selection::InlineFragment(i) => {
                out.push_str("...");
                if let Some(tc) = &i.type_condition {
                    out.push_str(" on ");
                    out.push_str(tc);
                }
                print_directives(out, &i.directives);
                print_selection_set(out, &i.selection_set, level + 1);
            }
        }
    }
    out.push('\n');
    indent(out, level);
    out.push('}');
}

fn print_arguments(out: &mut String, args: &[Argument]) {
    if args.is_empty() {
        return;
    }
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&a.name);
        out.push_str(": ");
        print_value(out, &a.value);
    }
    out.push(')');
}

fn print_directives(out: &mut String, dirs: &[Directive]) {
    for d in dirs {
        out.push_str(" @");
        out.push_str(&d.name);
        print_arguments(out, &d.arguments);
    }
}

pub fn print_value(out: &mut String, v: &Value) {
    match v {
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(f) => out.push_str(f),
        Value::String(s) => print_string(out, s),
        Value::Boolean(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Null => out.push_str("null"),
        Value::Enum(e) => out.push_str(e),
        Value::Variable(n) => {
            out.push('$');
            out.push_str(n);
        }
        Value::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_value(out, item);
            }
            out.push(']');
        }
        Value::Object(fields) => {
            out.push('{');
            for (i, (k, val)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(k);
                out.push_str(": ");
                print_value(out, val);
            }
            out.push('}');
        }
    }
}

pub fn print_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_query;

    #[test]
    fn canonical_layout() {
        let doc = parse_query("query Q($a: [Int!]! = [1], $s: String) @x { a: f(s: \"x\\ny\", o: {k: V}) { ... on T { id } ...F @skip(if: $b) } } fragment F on T { id }").unwrap();
        let expected = "query Q($a: [Int!]! = [1], $s: String) @x {\n  a: f(s: \"x\\ny\", o: {k: V}) {\n    ... on T {\n      id\n    }\n    ...F @skip(if: $b)\n  }\n}\n\nfragment F on T {\n  id\n}\n";
        assert_eq!(print_document(&doc), expected);
    }

    #[test]
    fn shorthand_query() {
        let doc = parse_query("{a b{c}}").unwrap();
        assert_eq!(print_document(&doc), "{\n  a\n  b {\n    c\n  }\n}\n");
    }

    #[test]
    fn control_chars_escaped() {
        let mut s = String::new();
        print_string(&mut s, "a\u{1}\"");
        assert_eq!(s, "\"a\\u0001\\\"\"");
    }
}
