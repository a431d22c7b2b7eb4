//! Recursive-descent parser for executable documents.

use crate::ast::*;
use crate::error::ParseError;
use crate::lexer::{Lexer, Token, TokenKind};

/// Maximum nesting of selection sets, lists and objects before the parser
/// gives up. Keeps the recursion bounded on hostile input.
pub const MAX_NESTING: usize = 512;

pub(crate) struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Token,
    prev_end: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let current = lexer.next_token()?;
        Ok(Self { lexer, current, prev_end: 0, depth: 0 })
    }

    pub(crate) fn peek(&self) -> &TokenKind {
        &self.current.kind
    }

    pub(crate) fn start(&self) -> usize {
        self.current.span.start
    }

    pub(crate) fn span_from(&self, start: usize) -> Span {
        Span::new(start, self.prev_end.max(start))
    }

    pub(crate) fn bump(&mut self) -> Result<Token, ParseError> {
        let next = self.lexer.next_token()?;
        let tok = std::mem::replace(&mut self.current, next);
        self.prev_end = tok.span.end;
        Ok(tok)
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::at(self.lexer.source(), self.current.span.start, message)
    }

    pub(crate) fn unexpected(&self, expected: &str) -> ParseError {
        self.error(format!("expected {expected}, found {}", self.current.kind.describe()))
    }

    pub(crate) fn at(&self, kind: &TokenKind) -> bool {
        &self.current.kind == kind
    }

    pub(crate) fn at_name(&self, name: &str) -> bool {
        matches!(&self.current.kind, TokenKind::Name(n) if n == name)
    }

    pub(crate) fn eat(&mut self, kind: &TokenKind) -> Result<bool, ParseError> {
        if self.at(kind) {
            self.bump()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub(crate) fn expect(&mut self, kind: &TokenKind) -> Result<(), ParseError> {
        if self.at(kind) {
            self.bump()?;
            Ok(())
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    pub(crate) fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_name(kw) {
            self.bump()?;
            Ok(())
        } else {
            Err(self.unexpected(&format!("\"{kw}\"")))
        }
    }

    pub(crate) fn name(&mut self) -> Result<String, ParseError> {
        match &self.current.kind {
            TokenKind::Name(_) => match self.bump()?.kind {
                TokenKind::Name(n) => Ok(n),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected("name")),
        }
    }

    pub(crate) fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.error(format!("nesting exceeds {MAX_NESTING} levels")));
        }
        Ok(())
    }

    pub(crate) fn leave(&mut self) {
        self.depth -= 1;
    }

    pub(crate) fn at_eof(&self) -> bool {
        self.at(&TokenKind::Eof)
    }

    /// Optional string description preceding SDL definitions.
    pub(crate) fn description(&mut self) -> Result<Option<String>, ParseError> {
        if let TokenKind::Str { .. } = self.peek() {
            if let TokenKind::Str { value, .. } = self.bump()?.kind {
                return Ok(Some(value));
            }
        }
        Ok(None)
    }

    // ---- executable definitions ----

    fn document(&mut self) -> Result<Document, ParseError> {
        let mut doc = Document::default();
        if self.at_eof() {
            return Err(self.error("document contains no definitions"));
        }
        while !self.at_eof() {
            match self.peek().clone() {
                TokenKind::BraceL => {
                    let start = self.start();
                    let selection_set = self.selection_set()?;
                    doc.operations.push(OperationDefinition {
                        kind: OperationKind::Query,
                        name: None,
                        variables: Vec::new(),
                        directives: Vec::new(),
                        selection_set,
                        span: self.span_from(start),
                    });
                }
                TokenKind::Name(n) => match n.as_str() {
                    "query" | "mutation" | "subscription" => {
                        let op = self.operation()?;
                        doc.operations.push(op);
                    }
                    "fragment" => {
                        let frag = self.fragment_definition()?;
                        if doc.fragments.contains_key(&frag.name) {
                            return Err(ParseError::at(
                                self.lexer.source(),
                                frag.span.start,
                                format!("duplicate fragment {:?}", frag.name),
                            ));
                        }
                        doc.fragments.insert(frag.name.clone(), frag);
                    }
                    _ => return Err(self.unexpected("operation or fragment definition")),
                },
                _ => return Err(self.unexpected("operation or fragment definition")),
            }
        }
        Ok(doc)
    }

    fn operation(&mut self) -> Result<OperationDefinition, ParseError> {
        let start = self.start();
        let kind = match self.name()?.as_str() {
            "query" => OperationKind::Query,
            "mutation" => OperationKind::Mutation,
            _ => OperationKind::Subscription,
        };
        let name = match self.peek() {
            TokenKind::Name(_) => Some(self.name()?),
            _ => None,
        };
        let variables = if self.at(&TokenKind::ParenL) { self.variable_definitions()? } else { Vec::new() };
        let directives = self.directives(false)?;
        let selection_set = self.selection_set()?;
        Ok(OperationDefinition { kind, name, variables, directives, selection_set, span: self.span_from(start) })
    }

    fn variable_definitions(&mut self) -> Result<Vec<VariableDefinition>, ParseError> {
        self.expect(&TokenKind::ParenL)?;
        let mut out = Vec::new();
        while !self.eat(&TokenKind::ParenR)? {
            let start = self.start();
            self.expect(&TokenKind::Dollar)?;
            let name = self.name()?;
            self.expect(&TokenKind::Colon)?;
            let ty = self.type_ref()?;
            let default_value = if self.eat(&TokenKind::Equals)? { Some(self.value(true)?) } else { None };
            let directives = self.directives(true)?;
            out.push(VariableDefinition { name, ty, default_value, directives, span: self.span_from(start) });
        }
        if out.is_empty() {
            return Err(ParseError::at(self.lexer.source(), self.prev_end, "empty variable definitions"));
        }
        Ok(out)
    }

    pub(crate) fn type_ref(&mut self) -> Result<TypeRef, ParseError> {
        self.enter()?;
        let base = if self.eat(&TokenKind::BracketL)? {
            let inner = self.type_ref()?;
            self.expect(&TokenKind::BracketR)?;
            TypeRef::List(Box::new(inner))
        } else {
            TypeRef::Named(self.name()?)
        };
        self.leave();
        if self.eat(&TokenKind::Bang)? {
            Ok(TypeRef::NonNull(Box::new(base)))
        } else {
            Ok(base)
        }
    }

    fn fragment_definition(&mut self) -> Result<FragmentDefinition, ParseError> {
        let start = self.start();
        self.expect_keyword("fragment")?;
        if self.at_name("on") {
            return Err(self.unexpected("fragment name"));
        }
        let name = self.name()?;
        self.expect_keyword("on")?;
        let type_condition = self.name()?;
        let directives = self.directives(false)?;
        let selection_set = self.selection_set()?;
        Ok(FragmentDefinition { name, type_condition, directives, selection_set, span: self.span_from(start) })
    }

    fn selection_set(&mut self) -> Result<SelectionSet, ParseError> {
        let start = self.start();
        self.expect(&TokenKind::BraceL)?;
        self.enter()?;
        let mut items = Vec::new();
        while !self.eat(&TokenKind::BraceR)? {
            if self.at_eof() {
                return Err(self.error("unbalanced braces: expected \"}\""));
            }
            items.push(self.selection()?);
        }
        self.leave();
        if items.is_empty() {
            return Err(ParseError::at(self.lexer.source(), start, "selection set must not be empty"));
        }
        Ok(SelectionSet { items, span: self.span_from(start) })
    }

    fn selection(&mut self) -> Result<Selection, ParseError> {
        let start = self.start();
        if self.eat(&TokenKind::Spread)? {
            if self.at_name("on") {
                self.bump()?;
                let tc = self.name()?;
                let directives = self.directives(false)?;
                let selection_set = self.selection_set()?;
                return Ok(Selection::InlineFragment(InlineFragment {
                    type_condition: Some(tc),
                    directives,
                    selection_set,
                    span: self.span_from(start),
                }));
            }
            if let TokenKind::Name(_) = self.peek() {
                let name = self.name()?;
                let directives = self.directives(false)?;
                return Ok(Selection::FragmentSpread(FragmentSpread {
                    name,
                    directives,
                    span: self.span_from(start),
                }));
            }
            let directives = self.directives(false)?;
            let selection_set = self.selection_set()?;
            return Ok(Selection::InlineFragment(InlineFragment {
                type_condition: None,
                directives,
                selection_set,
                span: self.span_from(start),
            }));
        }
        let first = self.name()?;
        let (alias, name) = if self.eat(&TokenKind::Colon)? { (Some(first), self.name()?) } else { (None, first) };
        let arguments = self.arguments(false)?;
        let directives = self.directives(false)?;
        let selection_set = if self.at(&TokenKind::BraceL) { Some(self.selection_set()?) } else { None };
        Ok(Selection::Field(Field { alias, name, arguments, directives, selection_set, span: self.span_from(start) }))
    }

    pub(crate) fn arguments(&mut self, is_const: bool) -> Result<Vec<Argument>, ParseError> {
        let mut out = Vec::new();
        if !self.eat(&TokenKind::ParenL)? {
            return Ok(out);
        }
        while !self.eat(&TokenKind::ParenR)? {
            let start = self.start();
            let name = self.name()?;
            self.expect(&TokenKind::Colon)?;
            let value = self.value(is_const)?;
            out.push(Argument { name, value, span: self.span_from(start) });
        }
        if out.is_empty() {
            return Err(ParseError::at(self.lexer.source(), self.prev_end, "empty argument list"));
        }
        Ok(out)
    }

    pub(crate) fn directives(&mut self, is_const: bool) -> Result<Vec<Directive>, ParseError> {
        let mut out = Vec::new();
        while self.at(&TokenKind::At) {
            let start = self.start();
            self.bump()?;
            let name = self.name()?;
            let arguments = self.arguments(is_const)?;
            out.push(Directive { name, arguments, span: self.span_from(start) });
        }
        Ok(out)
    }

    pub(crate) fn value(&mut self, is_const: bool) -> Result<Value, ParseError> {
        match self.peek().clone() {
            TokenKind::Dollar => {
                if is_const {
                    return Err(self.error("variables are not allowed in constant values"));
                }
                self.bump()?;
                Ok(Value::Variable(self.name()?))
            }
            TokenKind::Int(i) => {
                self.bump()?;
                Ok(Value::Int(i))
            }
            TokenKind::Float(f) => {
                self.bump()?;
                Ok(Value::Float(f))
            }
            TokenKind::Str { value, .. } => {
                self.bump()?;
                Ok(Value::String(value))
            }
            TokenKind::Name(n) => {
                self.bump()?;
                Ok(match n.as_str() {
                    "true" => Value::Boolean(true),
                    "false" => Value::Boolean(false),
                    "null" => Value::Null,
                    _ => Value::Enum(n),
                })
            }
            TokenKind::BracketL => {
                self.bump()?;
                self.enter()?;
                let mut items = Vec::new();
                while !self.eat(&TokenKind::BracketR)? {
                    if self.at_eof() {
                        return Err(self.unexpected("\"]\""));
                    }
                    items.push(self.value(is_const)?);
                }
                self.leave();
                Ok(Value::List(items))
            }
            TokenKind::BraceL => {
                self.bump()?;
                self.enter()?;
                let mut fields = Vec::new();
                while !self.eat(&TokenKind::BraceR)? {
                    let name = self.name()?;
                    self.expect(&TokenKind::Colon)?;
                    fields.push((name, self.value(is_const)?));
                }
                self.leave();
                Ok(Value::Object(fields))
            }
            _ => Err(self.unexpected("value")),
        }
    }
}

/// Parses a GraphQL executable document (operations and fragments).
///
/// Never panics; any malformed input yields a [`ParseError`] with position.
pub fn parse_query(source: &str) -> Result<Document, ParseError> {
    let mut p = Parser::new(source)?;
    p.document()
}

/// Parses a standalone value literal, e.g. a variable default.
pub fn parse_value(source: &str) -> Result<Value, ParseError> {
    let mut p = Parser::new(source)?;
    let v = p.value(false)?;
    if !p.at_eof() {
        return Err(p.unexpected("end of input"));
    }
    Ok(v)
}
