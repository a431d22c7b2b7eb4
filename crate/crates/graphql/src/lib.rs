//! GraphQL front end for gqlshield.
//!
//! Parses executable documents and SDL schemas into span-annotated ASTs,
//! expands fragments, prints canonical GraphQL and extracts the user-supplied
//! strings that payload detectors consume. Parsed values are immutable and can
//! be shared freely across threads.

pub mod ast;
mod error;
pub mod expand;
pub mod extract;
pub mod lexer;
mod parser;
pub mod printer;
pub mod schema;
pub mod validate;

pub use ast::{Document, OperationKind, Selection, SelectionSet, Span, TypeRef, Value};
pub use error::{ExpansionError, ParseError, SchemaError, ValidationError};
pub use expand::expand_fragments;
pub use extract::{extract_string_inputs, PayloadSite, SiteOrigin};
pub use parser::{parse_query, parse_value, MAX_NESTING};
pub use printer::print_document;
pub use schema::{parse_schema, Schema, TypeKind};
pub use validate::{is_meta_field, validate};
