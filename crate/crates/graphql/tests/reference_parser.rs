//! Cross-checks the parser against the independent `graphql-parser` crate.

use gqlshield_graphql::ast::{Selection, SelectionSet};
use gqlshield_graphql::parse_query;
use graphql_parser::query as gp;

fn count_fields(set: &SelectionSet) -> usize {
    set.items
        .iter()
        .map(|s| match s {
            Selection::Field(f) => 1 + f.selection_set.as_ref().map_or(0, count_fields),
            Selection::InlineFragment(i) => count_fields(&i.selection_set),
            Selection::FragmentSpread(_) => 0,
        })
        .sum()
}

fn gp_count_fields(set: &gp::SelectionSet<'_, String>) -> usize {
    set.items
        .iter()
        .map(|s| match s {
            gp::Selection::Field(f) => 1 + gp_count_fields(&f.selection_set),
            gp::Selection::InlineFragment(i) => gp_count_fields(&i.selection_set),
            gp::Selection::FragmentSpread(_) => 0,
        })
        .sum()
}

fn reference_summary(src: &str) -> (Vec<Option<String>>, usize, usize) {
    let doc = gp::parse_query::<String>(src).expect("reference parser accepts input");
    let mut names = Vec::new();
    let mut fields = 0;
    let mut fragments = 0;
    for def in &doc.definitions {
        match def {
            gp::Definition::Operation(op) => match op {
                gp::OperationDefinition::SelectionSet(ss) => {
                    names.push(None);
                    fields += gp_count_fields(ss);
                }
                gp::OperationDefinition::Query(q) => {
                    names.push(q.name.clone());
                    fields += gp_count_fields(&q.selection_set);
                }
                gp::OperationDefinition::Mutation(m) => {
                    names.push(m.name.clone());
                    fields += gp_count_fields(&m.selection_set);
                }
                gp::OperationDefinition::Subscription(s) => {
                    names.push(s.name.clone());
                    fields += gp_count_fields(&s.selection_set);
                }
            },
            gp::Definition::Fragment(f) => {
                fragments += 1;
                fields += gp_count_fields(&f.selection_set);
            }
        }
    }
    (names, fields, fragments)
}

fn our_summary(src: &str) -> (Vec<Option<String>>, usize, usize) {
    let doc = parse_query(src).unwrap();
    let names = doc.operations.iter().map(|o| o.name.clone()).collect();
    let fields = doc.operations.iter().map(|o| count_fields(&o.selection_set)).sum::<usize>()
        + doc.fragments.values().map(|f| count_fields(&f.selection_set)).sum::<usize>();
    (names, fields, doc.fragments.len())
}

#[test]
fn batch_of_two_named_operations() {
    let src = "query A { a } query B { b }";
    assert_eq!(our_summary(src), reference_summary(src));
    assert_eq!(our_summary(src).0, vec![Some("A".to_string()), Some("B".to_string())]);
}

#[test]
fn corpus_agrees_with_reference_parser() {
    let corpus = include_str!("../../../fixtures/queries/corpus.txt");
    let docs: Vec<&str> = corpus.split("\n=====\n").map(str::trim).filter(|d| !d.is_empty()).collect();
    assert!(docs.len() >= 100);
    for src in docs {
        assert_eq!(our_summary(src), reference_summary(src), "{src}");
    }
}
