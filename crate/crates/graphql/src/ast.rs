//! Executable-document AST.
//!
//! Every node carries a [`Span`] of byte offsets into the source it was parsed
//! from. Spans are ignored by [`Document::eq_ignoring_spans`], which is the
//! structural comparison used by round-trip tests.

use indexmap::IndexMap;
use serde::Serialize;

/// Half-open byte range `[start, end)` into the parsed source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperationKind {
    Query,
    Mutation,
    Subscription,
}

impl OperationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperationKind::Query => "query",
            OperationKind::Mutation => "mutation",
            OperationKind::Subscription => "subscription",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Document {
    pub operations: Vec<OperationDefinition>,
    /// Fragment definitions keyed by name, in source order.
    pub fragments: IndexMap<String, FragmentDefinition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperationDefinition {
    pub kind: OperationKind,
    pub name: Option<String>,
    pub variables: Vec<VariableDefinition>,
    pub directives: Vec<Directive>,
    pub selection_set: SelectionSet,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableDefinition {
    pub name: String,
    pub ty: TypeRef,
    pub default_value: Option<Value>,
    pub directives: Vec<Directive>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum TypeRef {
    Named(String),
    List(Box<TypeRef>),
    NonNull(Box<TypeRef>),
}

impl TypeRef {
    /// The innermost named type.
    pub fn named(&self) -> &str {
        match self {
            TypeRef::Named(n) => n,
            TypeRef::List(inner) | TypeRef::NonNull(inner) => inner.named(),
        }
    }

    /// True if a list wrapper appears anywhere in the reference.
    pub fn is_list(&self) -> bool {
        match self {
            TypeRef::Named(_) => false,
            TypeRef::List(_) => true,
            TypeRef::NonNull(inner) => inner.is_list(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FragmentDefinition {
    pub name: String,
    pub type_condition: String,
    pub directives: Vec<Directive>,
    pub selection_set: SelectionSet,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SelectionSet {
    pub items: Vec<Selection>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Selection {
    Field(Field),
    FragmentSpread(FragmentSpread),
    InlineFragment(InlineFragment),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    pub alias: Option<String>,
    pub name: String,
    pub arguments: Vec<Argument>,
    pub directives: Vec<Directive>,
    pub selection_set: Option<SelectionSet>,
    pub span: Span,
}

impl Field {
    /// The key this field occupies in the response: its alias if any, else its name.
    pub fn response_key(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FragmentSpread {
    pub name: String,
    pub directives: Vec<Directive>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InlineFragment {
    pub type_condition: Option<String>,
    pub directives: Vec<Directive>,
    pub selection_set: SelectionSet,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Directive {
    pub name: String,
    pub arguments: Vec<Argument>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Argument {
    pub name: String,
    pub value: Value,
    pub span: Span,
}

/// An input value literal.
///
/// Floats keep their source text so printing is exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Value {
    Int(i64),
    Float(String),
    String(String),
    Boolean(bool),
    Null,
    Enum(String),
    List(Vec<Value>),
    Object(Vec<(String, Value)>),
    Variable(String),
}

/// Returns true if `s` is a valid GraphQL name (`[_A-Za-z][_0-9A-Za-z]*`).
pub fn is_valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

impl Document {
    /// Structural equality that ignores source spans.
    pub fn eq_ignoring_spans(&self, other: &Document) -> bool {
        self.clone().without_spans() == other.clone().without_spans()
    }

    /// Returns a copy with every span reset to `0..0`.
    pub fn without_spans(mut self) -> Document {
        for op in &mut self.operations {
            op.span = Span::default();
            op.variables.iter_mut().for_each(|v| {
                v.span = Span::default();
                clear_directives(&mut v.directives);
            });
            clear_directives(&mut op.directives);
            clear_selection_set(&mut op.selection_set);
        }
        for frag in self.fragments.values_mut() {
            frag.span = Span::default();
            clear_directives(&mut frag.directives);
            clear_selection_set(&mut frag.selection_set);
        }
        self
    }

    /// True if any fragment spread remains anywhere in the operations.
    pub fn has_fragment_spreads(&self) -> bool {
        fn walk(set: &SelectionSet) -> bool {
            set.items.iter().any(|sel| match sel {
                Selection::Field(f) => f.selection_set.as_ref().is_some_and(walk),
                Selection::FragmentSpread(_) => true,
                Selection::InlineFragment(i) => walk(&i.selection_set),
            })
        }
        self.operations.iter().any(|op| walk(&op.selection_set))
    }
}

fn clear_directives(dirs: &mut [Directive]) {
    for d in dirs {
        d.span = Span::default();
        d.arguments.iter_mut().for_each(|a| a.span = Span::default());
    }
}

fn clear_selection_set(set: &mut SelectionSet) {
    set.span = Span::default();
    for sel in &mut set.items {
        match sel {
            Selection::Field(f) => {
                f.span = Span::default();
                f.arguments.iter_mut().for_each(|a| a.span = Span::default());
                clear_directives(&mut f.directives);
                if let Some(ss) = &mut f.selection_set {
                    clear_selection_set(ss);
                }
            }
            Selection::FragmentSpread(s) => {
                s.span = Span::default();
                clear_directives(&mut s.directives);
            }
            Selection::InlineFragment(i) => {
                i.span = Span::default();
                clear_directives(&mut i.directives);
                clear_selection_set(&mut i.selection_set);
            }
        }
    }
}
