use thiserror::Error;

/// Syntax error with a 1-based line/column position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at line {line}, column {column}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
    /// Byte offset into the source.
    pub offset: usize,
}

impl ParseError {
    pub(crate) fn at(src: &str, offset: usize, message: impl Into<String>) -> Self {
        let offset = offset.min(src.len());
        let mut line = 1;
        let mut col = 1;
        for (i, ch) in src.char_indices() {
            if i >= offset {
                break;
            }
            if ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        Self { message: message.into(), line, column: col, offset }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unresolved type reference(s): {}", .0.join(", "))]
    UnresolvedType(Vec<String>),
    #[error("duplicate type definition: {0}")]
    DuplicateType(String),
    #[error("schema has no query root type {0:?}")]
    MissingQueryRoot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpansionError {
    #[error("undefined fragment {0:?}")]
    UndefinedFragment(String),
    #[error("fragment cycle {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("fragment expansion exceeds {0} selections")]
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("unknown field {field:?} on type {parent:?}")]
    UnknownField { parent: String, field: String },
    #[error("unknown type {0:?} in type condition")]
    UnknownType(String),
    #[error("field {field:?} of type {parent:?} requires a selection set")]
    MissingSelection { parent: String, field: String },
    #[error("unknown operation {0:?}")]
    UnknownOperation(String),
    #[error("schema has no {0} root type")]
    MissingRoot(&'static str),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions() {
        let e = ParseError::at("ab\ncd", 4, "x");
        assert_eq!((e.line, e.column), (2, 2));
        let e = ParseError::at("", 10, "x");
        assert_eq!((e.line, e.column, e.offset), (1, 1, 0));
    }
}
