//! N-Triples serialization of the ABox.
//!
//! Export is canonical: one triple per line, lines sorted bytewise, trailing
//! newline.  Plain `"..."` literals are strings; `integer` and `anyURI`
//! literals carry an explicit `^^<datatype>` tag.  Import accepts the same
//! subset plus `#` comment lines and blank lines.

use thiserror::Error;

use crate::error::SyntaxError;
use crate::kb::{
    DatatypeTag, EntityId, KbError, KnowledgeBase, Literal, Object, Triple,
};

/// Serializes the ABox (not the materialized closure) to N-Triples.
pub fn export(kb: &KnowledgeBase) -> String {
    let mut lines: Vec<String> = kb.abox().iter().map(format_triple).collect();
    lines.sort();
    if lines.is_empty() {
        String::new()
    } else {
        lines.join("\n") + "\n"
    }
}

pub fn format_triple(t: &Triple) -> String {
    format!(
        "<{}> <{}> {} .",
        t.subject.as_str(),
        t.predicate,
        format_object(&t.object)
    )
}

fn format_object(o: &Object) -> String {
    match o {
        Object::Entity(e) => format!("<{}>", e.as_str()),
        Object::Literal(l) => match l.datatype {
            DatatypeTag::String => format!("\"{}\"", escape(&l.lexical_form)),
            tag => format!("\"{}\"^^<{}>", escape(&l.lexical_form), tag.iri()),
        },
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}

/// Parses N-Triples text into `(line_number, triple)` pairs without touching
/// any knowledge base.  Stops at the first malformed line.
pub fn parse(text: &str) -> Result<Vec<(usize, Triple)>, SyntaxError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((line_no, parse_line(line, line_no)?));
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize) -> Result<Triple, SyntaxError> {
    let mut cursor = Cursor {
        chars: line.char_indices().collect(),
        pos: 0,
        line: line_no,
    };
    let subject = cursor.iri()?;
    cursor.whitespace()?;
    let predicate = cursor.iri()?;
    cursor.whitespace()?;
    let object = cursor.object()?;
    cursor.skip_spaces();
    cursor.expect('.')?;
    cursor.skip_spaces();
    if !cursor.at_end() {
        return Err(cursor.error("trailing content after `.`"));
    }
    Ok(Triple::new(EntityId::new(subject), predicate, object))
}

struct Cursor {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn error(&self, message: impl Into<String>) -> SyntaxError {
        let col = self
            .chars
            .get(self.pos)
            .map(|(byte, _)| byte + 1)
            .unwrap_or(self.chars.last().map(|(b, c)| b + c.len_utf8() + 1).unwrap_or(1));
        SyntaxError::new(self.line, col, message)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expect(&mut self, want: char) -> Result<(), SyntaxError> {
        match self.bump() {
            Some(c) if c == want => Ok(()),
            _ => Err(self.error(format!("expected `{want}`"))),
        }
    }

    fn skip_spaces(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn whitespace(&mut self) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(' ') | Some('\t') => {
                self.skip_spaces();
                Ok(())
            }
            _ => Err(self.error("expected whitespace")),
        }
    }

    fn iri(&mut self) -> Result<String, SyntaxError> {
        self.expect('<')?;
        let mut iri = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some(c) => iri.push(c),
                None => return Err(self.error("unterminated IRI")),
            }
        }
        if iri.is_empty() {
            return Err(self.error("empty IRI"));
        }
        Ok(iri)
    }

    fn quoted(&mut self) -> Result<String, SyntaxError> {
        self.expect('"')?;
        let mut s = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('\\') => s.push('\\'),
                    Some('"') => s.push('"'),
                    Some('n') => s.push('\n'),
                    Some('r') => s.push('\r'),
                    Some('t') => s.push('\t'),
                    _ => return Err(self.error("bad escape sequence")),
                },
                Some(c) => s.push(c),
                None => return Err(self.error("unterminated literal")),
            }
        }
    }

    fn object(&mut self) -> Result<Object, SyntaxError> {
        match self.peek() {
            Some('<') => Ok(Object::Entity(EntityId::new(self.iri()?))),
            Some('"') => {
                let lexical = self.quoted()?;
                let datatype = if self.peek() == Some('^') {
                    self.expect('^')?;
                    self.expect('^')?;
                    let iri = self.iri()?;
                    match DatatypeTag::from_iri(&iri) {
                        Some(tag) => tag,
                        None => return Err(self.error(format!("unsupported datatype <{iri}>"))),
                    }
                } else {
                    DatatypeTag::String
                };
                if datatype == DatatypeTag::Integer && lexical.parse::<i64>().is_err() {
                    return Err(self.error(format!("`{lexical}` is not a base-10 integer")));
                }
                Ok(Object::Literal(Literal {
                    lexical_form: lexical,
                    datatype,
                }))
            }
            _ => Err(self.error("expected `<` or `\"` to start an object")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: {source}")]
    Rejected { line: usize, source: KbError },
}

/// Parses `text` and asserts every triple into `kb`.  Subjects and entity
/// objects are minted on sight; predicates must be declared.  Returns the
/// number of triple lines read.
pub fn import(kb: &mut KnowledgeBase, text: &str) -> Result<usize, ImportError> {
    let triples = parse(text)?;
    let count = triples.len();
    for (line, triple) in triples {
        kb.import_triple(triple)
            .map_err(|source| ImportError::Rejected { line, source })?;
    }
    Ok(count)
}
