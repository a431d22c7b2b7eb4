//! Fragment expansion.

use std::collections::HashSet;

use crate::ast::*;
use crate::error::ExpansionError;

/// Upper bound on selections produced by expansion. Nested fragments that
/// spread each other repeatedly grow exponentially; past this the document is
/// rejected instead of materialized.
pub const MAX_EXPANDED_SELECTIONS: usize = 100_000;

/// Replaces every fragment spread with the fragment's selections.
///
/// A spread with no directives (on the spread or the definition) is spliced
/// directly into the enclosing selection set. Otherwise it becomes an inline
/// fragment carrying the definition's type condition and both directive lists,
/// so directive counts are preserved. The returned document has no fragment
/// definitions; running it again is the identity.
pub fn expand_fragments(doc: &Document) -> Result<Document, ExpansionError> {
    check_fragments(doc)?;
    let mut budget = MAX_EXPANDED_SELECTIONS;
    let operations = doc
        .operations
        .iter()
        .map(|op| {
            Ok(OperationDefinition {
                selection_set: expand_set(&op.selection_set, doc, &mut budget)?,
                ..op.clone()
            })
        })
        .collect::<Result<Vec<_>, ExpansionError>>()?;
    Ok(Document { operations, fragments: Default::default() })
}

fn check_fragments(doc: &Document) -> Result<(), ExpansionError> {
    fn spreads<'d>(set: &'d SelectionSet, out: &mut Vec<&'d str>) {
        for sel in &set.items {
            match sel {
                Selection::Field(f) => {
                    if let Some(ss) = &f.selection_set {
                        spreads(ss, out);
                    }
                }
                Selection::FragmentSpread(s) => out.push(&s.name),
                Selection::InlineFragment(i) => spreads(&i.selection_set, out),
            }
        }
    }

    let mut from_ops = Vec::new();
    for op in &doc.operations {
        spreads(&op.selection_set, &mut from_ops);
    }
    if let Some(missing) = from_ops.iter().find(|n| !doc.fragments.contains_key(**n)) {
        return Err(ExpansionError::UndefinedFragment(missing.to_string()));
    }

    // Depth-first search over the fragment graph; `stack` holds the current chain.
    let mut done: HashSet<&str> = HashSet::new();
    for start in doc.fragments.keys() {
        let mut stack: Vec<(&str, Vec<&str>, usize)> = Vec::new();
        if done.contains(start.as_str()) {
            continue;
        }
        let mut children = Vec::new();
        spreads(&doc.fragments[start].selection_set, &mut children);
        stack.push((start, children, 0));
        while let Some((name, kids, idx)) = stack.last_mut() {
            if *idx >= kids.len() {
                done.insert(name);
                stack.pop();
                continue;
            }
            let next = kids[*idx];
            *idx += 1;
            if let Some(pos) = stack.iter().position(|(n, _, _)| *n == next) {
                let mut cycle: Vec<String> = stack[pos..].iter().map(|(n, _, _)| n.to_string()).collect();
                cycle.push(next.to_string());
                return Err(ExpansionError::Cycle(cycle));
            }
            if done.contains(next) {
                continue;
            }
            let Some(frag) = doc.fragments.get(next) else {
                return Err(ExpansionError::UndefinedFragment(next.to_string()));
            };
            let mut grand = Vec::new();
            spreads(&frag.selection_set, &mut grand);
            stack.push((next, grand, 0));
        }
    }
    Ok(())
}

fn charge(budget: &mut usize) -> Result<(), ExpansionError> {
    if *budget == 0 {
        return Err(ExpansionError::TooLarge(MAX_EXPANDED_SELECTIONS));
    }
    *budget -= 1;
    Ok(())
}

fn expand_set(set: &SelectionSet, doc: &Document, budget: &mut usize) -> Result<SelectionSet, ExpansionError> {
    let mut items = Vec::with_capacity(set.items.len());
    for sel in &set.items {
        match sel {
            Selection::Field(f) => {
                charge(budget)?;
                let selection_set = match &f.selection_set {
                    Some(ss) => Some(expand_set(ss, doc, budget)?),
                    None => None,
                };
                items.push(Selection::Field(Field { selection_set, ..f.clone() }));
            }
            Selection::InlineFragment(i) => {
                charge(budget)?;
                items.push(Selection::InlineFragment(InlineFragment {
                    selection_set: expand_set(&i.selection_set, doc, budget)?,
                    ..i.clone()
                }));
            }
            Selection::FragmentSpread(s) => {
                let frag = doc
                    .fragments
                    .get(&s.name)
                    .ok_or_else(|| ExpansionError::UndefinedFragment(s.name.clone()))?;
                let inner = expand_set(&frag.selection_set, doc, budget)?;
                if s.directives.is_empty() && frag.directives.is_empty() {
                    items.extend(inner.items);
                } else {
                    charge(budget)?;
                    let mut directives = s.directives.clone();
                    directives.extend(frag.directives.iter().cloned());
                    items.push(Selection::InlineFragment(InlineFragment {
                        type_condition: Some(frag.type_condition.clone()),
                        directives,
                        selection_set: inner,
                        span: s.span,
                    }));
                }
            }
        }
    }
    Ok(SelectionSet { items, span: set.span })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_query;

    fn expand(src: &str) -> Result<Document, ExpansionError> {
        expand_fragments(&parse_query(src).unwrap())
    }

    #[test]
    fn single_spread() {
        let got = expand("{ ...F } fragment F on Query { id }").unwrap();
        let want = parse_query("{ id }").unwrap();
        assert!(got.eq_ignoring_spans(&want));
    }

    #[test]
    fn cycle_detected() {
        let err = expand("{ ...F } fragment F on Q { ...G } fragment G on Q { ...F }").unwrap_err();
        assert_eq!(err, ExpansionError::Cycle(vec!["F".into(), "G".into(), "F".into()]));
    }

    #[test]
    fn self_cycle_and_undefined() {
        assert!(matches!(expand("{ a } fragment F on Q { ...F }"), Err(ExpansionError::Cycle(_))));
        assert_eq!(expand("{ ...Nope }").unwrap_err(), ExpansionError::UndefinedFragment("Nope".into()));
        assert!(matches!(
            expand("{ a } fragment F on Q { ...Nope }"),
            Err(ExpansionError::UndefinedFragment(_))
        ));
    }

    #[test]
    fn identity_without_spreads() {
        let d = parse_query("query Q { a { b ... on T { c } } }").unwrap();
        let e = expand_fragments(&d).unwrap();
        assert_eq!(e, d);
    }

    #[test]
    fn idempotent() {
        let once = expand("{ a { ...F ...G @skip(if: true) } } fragment F on T { x ...G } fragment G on T { y }").unwrap();
        let twice = expand_fragments(&once).unwrap();
        assert_eq!(once, twice);
        assert!(!once.has_fragment_spreads());
    }

    #[test]
    fn directives_preserved_as_inline_fragment() {
        let got = expand("{ ...F @include(if: true) } fragment F on Query { id }").unwrap();
        let want = parse_query("{ ... on Query @include(if: true) { id } }").unwrap();
        assert!(got.eq_ignoring_spans(&want));
    }

    #[test]
    fn exponential_blowup_rejected() {
        let mut src = String::from("{ ...F0 }\nfragment F20 on Q { a }\n");
        for i in 0..20 {
            src.push_str(&format!("fragment F{i} on Q {{ ...F{n} ...F{n} }}\n", n = i + 1));
        }
        assert!(matches!(expand(&src), Err(ExpansionError::TooLarge(_))));
    }
}
