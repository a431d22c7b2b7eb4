//! Tokenizer shared by the executable and SDL parsers.
//!
//! Whitespace, commas, the byte-order mark and `#` comments are ignored tokens
//! and never leave the lexer.

use crate::ast::Span;
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Bang,
    Dollar,
    Amp,
    ParenL,
    ParenR,
    Spread,
    Colon,
    Equals,
    At,
    BracketL,
    BracketR,
    BraceL,
    BraceR,
    Pipe,
    Name(String),
    Int(i64),
    Float(String),
    /// String value with escapes resolved; `block` marks `"""` strings.
    Str { value: String, block: bool },
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Bang => "\"!\"".into(),
            TokenKind::Dollar => "\"$\"".into(),
            TokenKind::Amp => "\"&\"".into(),
            TokenKind::ParenL => "\"(\"".into(),
            TokenKind::ParenR => "\")\"".into(),
            TokenKind::Spread => "\"...\"".into(),
            TokenKind::Colon => "\":\"".into(),
            TokenKind::Equals => "\"=\"".into(),
            TokenKind::At => "\"@\"".into(),
            TokenKind::BracketL => "\"[\"".into(),
            TokenKind::BracketR => "\"]\"".into(),
            TokenKind::BraceL => "\"{\"".into(),
            TokenKind::BraceR => "\"}\"".into(),
            TokenKind::Pipe => "\"|\"".into(),
            TokenKind::Name(n) => format!("name \"{n}\""),
            TokenKind::Int(i) => format!("int {i}"),
            TokenKind::Float(f) => format!("float {f}"),
            TokenKind::Str { .. } => "string".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Self { src, bytes: src.as_bytes(), pos: 0 }
    }

    pub fn source(&self) -> &'a str {
        self.src
    }

    fn err(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError::at(self.src, offset, message)
    }

    fn skip_ignored(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | b',' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len()
                        && self.bytes[self.pos] != b'\n'
                        && self.bytes[self.pos] != b'\r'
                    {
                        self.pos += 1;
                    }
                }
                0xEF if self.bytes[self.pos..].starts_with(&[0xEF, 0xBB, 0xBF]) => self.pos += 3,
                _ => break,
            }
        }
    }

    pub fn next_token(&mut self) -> Result<Token, ParseError> {
        self.skip_ignored();
        let start = self.pos;
        let Some(&b) = self.bytes.get(self.pos) else {
            return Ok(Token { kind: TokenKind::Eof, span: Span::new(start, start) });
        };
        let single = |kind| Some(kind);
        let punct = match b {
            b'!' => single(TokenKind::Bang),
            b'$' => single(TokenKind::Dollar),
            b'&' => single(TokenKind::Amp),
            b'(' => single(TokenKind::ParenL),
            b')' => single(TokenKind::ParenR),
            b':' => single(TokenKind::Colon),
            b'=' => single(TokenKind::Equals),
            b'@' => single(TokenKind::At),
            b'[' => single(TokenKind::BracketL),
            b']' => single(TokenKind::BracketR),
            b'{' => single(TokenKind::BraceL),
            b'}' => single(TokenKind::BraceR),
            b'|' => single(TokenKind::Pipe),
            _ => None,
        };
        if let Some(kind) = punct {
            self.pos += 1;
            return Ok(Token { kind, span: Span::new(start, self.pos) });
        }
        match b {
            b'.' => {
                if self.bytes[self.pos..].starts_with(b"...") {
                    self.pos += 3;
                    Ok(Token { kind: TokenKind::Spread, span: Span::new(start, self.pos) })
                } else {
                    Err(self.err(start, "unexpected \".\", did you mean \"...\"?"))
                }
            }
            b'_' | b'a'..=b'z' | b'A'..=b'Z' => {
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos] == b'_' || self.bytes[self.pos].is_ascii_alphanumeric())
                {
                    self.pos += 1;
                }
                let name = self.src[start..self.pos].to_string();
                Ok(Token { kind: TokenKind::Name(name), span: Span::new(start, self.pos) })
            }
            b'-' | b'0'..=b'9' => self.lex_number(start),
            b'"' => {
                if self.bytes[self.pos..].starts_with(b"\"\"\"") {
                    self.lex_block_string(start)
                } else {
                    self.lex_string(start)
                }
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('\u{FFFD}');
                Err(self.err(start, format!("unexpected character {ch:?}")))
            }
        }
    }

    fn lex_digits(&mut self) -> usize {
        let s = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - s
    }

    fn lex_number(&mut self, start: usize) -> Result<Token, ParseError> {
        if self.bytes[self.pos] == b'-' {
            self.pos += 1;
        }
        let int_start = self.pos;
        let n = self.lex_digits();
        if n == 0 {
            return Err(self.err(self.pos, "expected digit"));
        }
        if n > 1 && self.bytes[int_start] == b'0' {
            return Err(self.err(int_start, "invalid number, unexpected digit after 0"));
        }
        let mut is_float = false;
        if self.bytes.get(self.pos) == Some(&b'.') {
            is_float = true;
            self.pos += 1;
            if self.lex_digits() == 0 {
                return Err(self.err(self.pos, "expected digit after \".\""));
            }
        }
        if matches!(self.bytes.get(self.pos), Some(b'e' | b'E')) {
            is_float = true;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.lex_digits() == 0 {
                return Err(self.err(self.pos, "expected digit in exponent"));
            }
        }
        if let Some(&c) = self.bytes.get(self.pos) {
            if c == b'.' || c == b'_' || c.is_ascii_alphabetic() {
                return Err(self.err(self.pos, "invalid number, unexpected trailing character"));
            }
        }
        let text = &self.src[start..self.pos];
        let span = Span::new(start, self.pos);
        if is_float {
            Ok(Token { kind: TokenKind::Float(text.to_string()), span })
        } else {
            let v: i64 = text
                .parse()
                .map_err(|_| self.err(start, format!("integer {text} out of range")))?;
            Ok(Token { kind: TokenKind::Int(v), span })
        }
    }

    fn lex_string(&mut self, start: usize) -> Result<Token, ParseError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(ch) = self.src[self.pos..].chars().next() else {
                return Err(self.err(start, "unterminated string"));
            };
            match ch {
                '"' => {
                    self.pos += 1;
                    break;
                }
                '\n' | '\r' => return Err(self.err(self.pos, "unterminated string")),
                '\\' => {
                    self.pos += 1;
                    let Some(&esc) = self.bytes.get(self.pos) else {
                        return Err(self.err(start, "unterminated string"));
                    };
                    self.pos += 1;
                    match esc {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'b' => out.push('\u{8}'),
                        b'f' => out.push('\u{c}'),
                        b'n' => out.push('\n'),
                        b'r' => out.push('\r'),
                        b't' => out.push('\t'),
                        b'u' => out.push(self.lex_unicode_escape()?),
                        _ => {
                            return Err(self.err(self.pos - 2, "invalid escape sequence in string"))
                        }
                    }
                }
                c if (c as u32) < 0x20 && c != '\t' => {
                    return Err(self.err(self.pos, "invalid control character in string"))
                }
                c => {
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
        Ok(Token { kind: TokenKind::Str { value: out, block: false }, span: Span::new(start, self.pos) })
    }

    fn read_hex(&mut self, count: usize) -> Result<u32, ParseError> {
        let s = self.pos;
        let digits = self.src.get(s..s + count).ok_or_else(|| self.err(s, "invalid unicode escape"))?;
        if !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(self.err(s, "invalid unicode escape"));
        }
        self.pos += count;
        Ok(u32::from_str_radix(digits, 16).expect("validated hex"))
    }

    fn lex_unicode_escape(&mut self) -> Result<char, ParseError> {
        let esc_start = self.pos - 2;
        if self.bytes.get(self.pos) == Some(&b'{') {
            self.pos += 1;
            let s = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_hexdigit() {
                self.pos += 1;
            }
            let digits = &self.src[s..self.pos];
            if digits.is_empty() || digits.len() > 6 || self.bytes.get(self.pos) != Some(&b'}') {
                return Err(self.err(esc_start, "invalid unicode escape"));
            }
            self.pos += 1;
            let cp = u32::from_str_radix(digits, 16).expect("validated hex");
            return char::from_u32(cp).ok_or_else(|| self.err(esc_start, "invalid unicode code point"));
        }
        let hi = self.read_hex(4)?;
        if (0xD800..0xDC00).contains(&hi) {
            if self.bytes[self.pos..].starts_with(b"\\u") {
                self.pos += 2;
                let lo = self.read_hex(4)?;
                if (0xDC00..0xE000).contains(&lo) {
                    let cp = 0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00);
                    return char::from_u32(cp)
                        .ok_or_else(|| self.err(esc_start, "invalid unicode code point"));
                }
            }
            return Err(self.err(esc_start, "unpaired surrogate in unicode escape"));
        }
        char::from_u32(hi).ok_or_else(|| self.err(esc_start, "invalid unicode code point"))
    }

    fn lex_block_string(&mut self, start: usize) -> Result<Token, ParseError> {
        self.pos += 3;
        let mut raw = String::new();
        loop {
            if self.pos >= self.bytes.len() {
                return Err(self.err(start, "unterminated block string"));
            }
            let rest = &self.src[self.pos..];
            if rest.starts_with("\"\"\"") {
                self.pos += 3;
                break;
            }
            if rest.starts_with("\\\"\"\"") {
                raw.push_str("\"\"\"");
                self.pos += 4;
                continue;
            }
            let ch = rest.chars().next().expect("non-empty");
            if (ch as u32) < 0x20 && !matches!(ch, '\t' | '\n' | '\r') {
                return Err(self.err(self.pos, "invalid control character in block string"));
            }
            raw.push(ch);
            self.pos += ch.len_utf8();
        }
        Ok(Token {
            kind: TokenKind::Str { value: block_string_value(&raw), block: true },
            span: Span::new(start, self.pos),
        })
    }
}

/// Common-indentation removal for block strings.
fn block_string_value(raw: &str) -> String {
    let normalized = raw.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = normalized.split('\n').collect();
    let is_ws = |c: char| c == ' ' || c == '\t';
    let common = lines
        .iter()
        .skip(1)
        .filter_map(|l| {
            let indent = l.chars().take_while(|&c| is_ws(c)).count();
            (indent < l.chars().count()).then_some(indent)
        })
        .min();
    let mut out: Vec<String> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| match common {
            Some(n) if i > 0 => l.chars().skip(n).collect(),
            _ => l.to_string(),
        })
        .collect();
    while out.first().is_some_and(|l| l.chars().all(is_ws)) {
        out.remove(0);
    }
    while out.last().is_some_and(|l| l.chars().all(is_ws)) {
        out.pop();
    }
    out.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        let mut lx = Lexer::new(src);
        let mut out = Vec::new();
        loop {
            let t = lx.next_token().unwrap();
            if t.kind == TokenKind::Eof {
                break;
            }
            out.push(t.kind);
        }
        out
    }

    #[test]
    fn punctuation_and_names() {
        assert_eq!(
            kinds("{ a, ...F } # comment\n"),
            vec![
                TokenKind::BraceL,
                TokenKind::Name("a".into()),
                TokenKind::Spread,
                TokenKind::Name("F".into()),
                TokenKind::BraceR
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("-12 3.5e2 0"), vec![
            TokenKind::Int(-12),
            TokenKind::Float("3.5e2".into()),
            TokenKind::Int(0)
        ]);
        assert!(Lexer::new("012").next_token().is_err());
        assert!(Lexer::new("1.").next_token().is_err());
        assert!(Lexer::new("99999999999999999999").next_token().is_err());
    }

    #[test]
    fn string_escapes() {
        let k = kinds(r#""a\"b\\c\u0041\uD83D\uDE00\n""#);
        assert_eq!(k, vec![TokenKind::Str { value: "a\"b\\cA\u{1F600}\n".into(), block: false }]);
        assert!(Lexer::new("\"abc").next_token().is_err());
        assert!(Lexer::new("\"\\q\"").next_token().is_err());
    }

    #[test]
    fn block_strings_dedent() {
        let k = kinds("\"\"\"\n    hello\n      world\n  \"\"\"");
        assert_eq!(k, vec![TokenKind::Str { value: "hello\n  world".into(), block: true }]);
    }
}
