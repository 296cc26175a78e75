//! A conjunctive query language over frozen snapshots.
//!
//! The grammar is a small SPARQL subset:
//!
//! ```text
//! query      := prefixDecl* "SELECT" var+ "WHERE" "{" pattern ("." pattern)* "."? "}"
//! prefixDecl := "PREFIX" name ":" "<" iri ">"
//! pattern    := term term term
//! term       := var | prefixedName | "<" iri ">" | stringLiteral
//! var        := "?" name
//! ```
//!
//! Keywords are matched case-insensitively; names are Unicode alphanumerics
//! plus `_` and `-`.  `#` starts a comment that runs to the end of the line
//! (inside IRIs and string literals it is ordinary text).  Evaluation is a
//! left-to-right substitution join over
//! the snapshot's materialized triples, so subclass and typing inference is
//! already folded in.  A result row is one assignment of all pattern
//! variables; assignments are distinct, but projection onto the selected
//! variables does not deduplicate.  Rows come back sorted by their rendered
//! projected values.
//!
//! Literal constants in patterns match by lexical form alone (`"3"` matches
//! an integer-typed 3 — the grammar has no datatype syntax), while a
//! variable joined across patterns compares bound terms exactly, datatype
//! included.
//!
//! [`brute_force_evaluate`] is an intentionally naive oracle: it enumerates
//! every assignment of pattern variables over the terms occurring in the
//! snapshot and keeps the satisfying ones.  It refuses instances with more
//! than four variables or more than a hundred distinct terms.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::kb::{EntityId, Literal, Object, Snapshot, Triple, RDF_TYPE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("line {line}, col {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("line {line}, col {col}: undeclared prefix `{prefix}`")]
    UndeclaredPrefix {
        prefix: String,
        line: usize,
        col: usize,
    },
    #[error("instance too large for brute-force evaluation")]
    TooLarge,
    #[error("unknown class label `{0}`")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryTerm {
    Var(String),
    Iri(String),
    Prefixed { prefix: String, local: String },
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: QueryTerm,
    pub predicate: QueryTerm,
    pub object: QueryTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub prefixes: BTreeMap<String, String>,
    pub projected: Vec<String>,
    pub patterns: Vec<TriplePattern>,
}

/// A ground value a variable can take.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroundTerm {
    Iri(String),
    Literal(Literal),
}

/// One result row: variable name to ground term, over *all* pattern
/// variables (projection happens at render time).
pub type Row = BTreeMap<String, GroundTerm>;

// ---------------------------------------------------------------------------
// Lexing

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    QName { prefix: String, local: String },
    Var(String),
    Iri(String),
    Str(String),
    LBrace,
    RBrace,
    Dot,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn name(&mut self, first: char) -> String {
        let mut s = String::new();
        s.push(first);
        while matches!(self.chars.peek(), Some(&c) if is_name_char(c)) {
            s.push(self.bump().unwrap());
        }
        s
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, QueryError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
            if self.chars.peek() == Some(&'#') {
                while matches!(self.chars.peek(), Some(&c) if c != '\n') {
                    self.bump();
                }
                continue;
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.bump() else { break };
            let tok = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '.' => Tok::Dot,
                '?' => {
                    let first = match self.chars.peek() {
                        Some(&c) if is_name_char(c) => self.bump().unwrap(),
                        _ => return Err(self.error("expected a variable name after `?`")),
                    };
                    Tok::Var(self.name(first))
                }
                '<' => {
                    let mut iri = String::new();
                    loop {
                        match self.bump() {
                            Some('>') => break,
                            Some(c) if c != '\n' => iri.push(c),
                            _ => return Err(self.error("unterminated IRI")),
                        }
                    }
                    if iri.is_empty() {
                        return Err(self.error("empty IRI"));
                    }
                    Tok::Iri(iri)
                }
                '"' => {
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some('r') => s.push('\r'),
                                _ => return Err(self.error("bad escape in literal")),
                            },
                            Some(c) if c != '\n' => s.push(c),
                            _ => return Err(self.error("unterminated literal")),
                        }
                    }
                    Tok::Str(s)
                }
                c if is_name_char(c) => {
                    let name = self.name(c);
                    if self.chars.peek() == Some(&':') {
                        self.bump();
                        let local = match self.chars.peek() {
                            Some(&c) if is_name_char(c) => {
                                let first = self.bump().unwrap();
                                self.name(first)
                            }
                            _ => String::new(),
                        };
                        Tok::QName {
                            prefix: name,
                            local,
                        }
                    } else {
                        Tok::Name(name)
                    }
                }
                other => return Err(self.error(format!("unexpected character `{other}`"))),
            };
            out.push(Spanned { tok, line, col });
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct TokParser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl TokParser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.peek()
            .map(|s| (s.line, s.col))
            .or_else(|| self.toks.last().map(|s| (s.line, s.col)))
            .unwrap_or((1, 1))
    }

    fn error(&self, message: impl Into<String>) -> QueryError {
        let (line, col) = self.here();
        QueryError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), QueryError> {
        match self.bump() {
            Some(Spanned { tok: Tok::Name(n), .. }) if n.eq_ignore_ascii_case(word) => Ok(()),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error(format!("expected `{word}`")))
            }
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Spanned { tok: Tok::Name(n), .. }) if n.eq_ignore_ascii_case(word))
    }
}

/// Parses a query and checks it statically: at least one variable and one
/// pattern, every projected variable bound by some pattern, every prefixed
/// name declared in the query.
pub fn parse(text: &str) -> Result<Query, QueryError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = TokParser { toks, pos: 0 };
    let mut prefixes = BTreeMap::new();

    while p.at_keyword("PREFIX") {
        p.keyword("PREFIX")?;
        let (prefix, local) = match p.bump() {
            Some(Spanned { tok: Tok::QName { prefix, local }, .. }) => (prefix, local),
            _ => return Err(p.error("expected `name:` after PREFIX")),
        };
        if !local.is_empty() {
            return Err(p.error("prefix declaration must end with a bare colon"));
        }
        let iri = match p.bump() {
            Some(Spanned { tok: Tok::Iri(iri), .. }) => iri,
            _ => return Err(p.error("expected `<iri>` in prefix declaration")),
        };
        prefixes.insert(prefix, iri);
    }

    p.keyword("SELECT")?;
    let mut projected = Vec::new();
    while let Some(Spanned { tok: Tok::Var(_), .. }) = p.peek() {
        let Some(Spanned { tok: Tok::Var(v), .. }) = p.bump() else {
            unreachable!()
        };
        projected.push(v);
    }
    if projected.is_empty() {
        return Err(p.error("SELECT needs at least one variable"));
    }

    p.keyword("WHERE")?;
    match p.bump() {
        Some(Spanned { tok: Tok::LBrace, .. }) => {}
        _ => return Err(p.error("expected `{`")),
    }

    let mut patterns = Vec::new();
    loop {
        if matches!(p.peek(), Some(Spanned { tok: Tok::RBrace, .. })) {
            p.bump();
            break;
        }
        if patterns.is_empty() && p.peek().is_none() {
            return Err(p.error("expected a pattern"));
        }
        let subject = term(&mut p, &prefixes)?;
        let predicate = term(&mut p, &prefixes)?;
        let object = term(&mut p, &prefixes)?;
        patterns.push(TriplePattern {
            subject,
            predicate,
            object,
        });
        match p.peek() {
            Some(Spanned { tok: Tok::Dot, .. }) => {
                p.bump();
            }
            Some(Spanned { tok: Tok::RBrace, .. }) => {}
            _ => return Err(p.error("expected `.` or `}` after a pattern")),
        }
    }
    if patterns.is_empty() {
        return Err(p.error("WHERE block needs at least one pattern"));
    }
    if p.peek().is_some() {
        return Err(p.error("trailing tokens after `}`"));
    }

    let bound: BTreeSet<&String> = patterns
        .iter()
        .flat_map(|pat| [&pat.subject, &pat.predicate, &pat.object])
        .filter_map(|t| match t {
            QueryTerm::Var(v) => Some(v),
            _ => None,
        })
        .collect();
    for v in &projected {
        if !bound.contains(v) {
            return Err(QueryError::Syntax {
                line: 1,
                col: 1,
                message: format!("projected variable ?{v} never occurs in a pattern"),
            });
        }
    }
    Ok(Query {
        prefixes,
        projected,
        patterns,
    })
}

fn term(p: &mut TokParser, prefixes: &BTreeMap<String, String>) -> Result<QueryTerm, QueryError> {
    let (line, col) = p.here();
    match p.bump() {
        Some(Spanned { tok: Tok::Var(v), .. }) => Ok(QueryTerm::Var(v)),
        Some(Spanned { tok: Tok::Iri(iri), .. }) => Ok(QueryTerm::Iri(iri)),
        Some(Spanned { tok: Tok::Str(s), .. }) => Ok(QueryTerm::Literal(s)),
        Some(Spanned { tok: Tok::QName { prefix, local }, .. }) => {
            if local.is_empty() {
                return Err(QueryError::Syntax {
                    line,
                    col,
                    message: format!("prefixed name `{prefix}:` has an empty local part"),
                });
            }
            if !prefixes.contains_key(&prefix) {
                return Err(QueryError::UndeclaredPrefix { prefix, line, col });
            }
            Ok(QueryTerm::Prefixed { prefix, local })
        }
        _ => Err(QueryError::Syntax {
            line,
            col,
            message: "expected a term (variable, IRI, prefixed name, or literal)".into(),
        }),
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq, Eq)]
enum Resolved {
    Var(String),
    Ground(GroundTerm),
    /// A literal written in the query itself: matches by lexical form only.
    LexicalLiteral(String),
}

struct ResolvedPattern {
    parts: [Resolved; 3],
}

fn resolve_patterns(q: &Query) -> Result<Vec<ResolvedPattern>, QueryError> {
    q.patterns
        .iter()
        .map(|pat| {
            let resolve = |t: &QueryTerm| -> Result<Resolved, QueryError> {
                match t {
                    QueryTerm::Var(v) => Ok(Resolved::Var(v.clone())),
                    QueryTerm::Iri(iri) => Ok(Resolved::Ground(GroundTerm::Iri(iri.clone()))),
                    QueryTerm::Literal(s) => Ok(Resolved::LexicalLiteral(s.clone())),
                    QueryTerm::Prefixed { prefix, local } => match q.prefixes.get(prefix) {
                        Some(base) => Ok(Resolved::Ground(GroundTerm::Iri(format!("{base}{local}")))),
                        None => Err(QueryError::UndeclaredPrefix {
                            prefix: prefix.clone(),
                            line: 1,
                            col: 1,
                        }),
                    },
                }
            };
            Ok(ResolvedPattern {
                parts: [
                    resolve(&pat.subject)?,
                    resolve(&pat.predicate)?,
                    resolve(&pat.object)?,
                ],
            })
        })
        .collect()
}

fn triple_parts(t: &Triple) -> [GroundTerm; 3] {
    [
        GroundTerm::Iri(t.subject.as_str().to_string()),
        GroundTerm::Iri(t.predicate.clone()),
        match &t.object {
            Object::Entity(e) => GroundTerm::Iri(e.as_str().to_string()),
            Object::Literal(l) => GroundTerm::Literal(l.clone()),
        },
    ]
}

fn part_matches(resolved: &Resolved, row: &Row, part: &GroundTerm) -> bool {
    match resolved {
        Resolved::Var(v) => match row.get(v) {
            Some(bound) => bound == part,
            None => true,
        },
        Resolved::Ground(g) => g == part,
        Resolved::LexicalLiteral(s) => {
            matches!(part, GroundTerm::Literal(l) if &l.lexical_form == s)
        }
    }
}

fn extend_row(pattern: &ResolvedPattern, row: &Row, parts: &[GroundTerm; 3]) -> Option<Row> {
    // Bind as we scan so a variable repeated within this pattern must take
    // the same value at every position it occupies.
    let mut next = row.clone();
    for (resolved, part) in pattern.parts.iter().zip(parts.iter()) {
        if !part_matches(resolved, &next, part) {
            return None;
        }
        if let Resolved::Var(v) = resolved {
            next.entry(v.clone()).or_insert_with(|| part.clone());
        }
    }
    Some(next)
}

fn sort_rows(snap: &Snapshot, projected: &[String], rows: &mut Vec<Row>) {
    rows.sort_by_cached_key(|row| {
        let rendered: Vec<String> = projected
            .iter()
            .map(|v| render_term(snap, row.get(v).expect("projected var bound")))
            .collect();
        let full: Vec<(String, GroundTerm)> =
            row.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        (rendered, full)
    });
}

/// Evaluates a query over a snapshot.  Rows are sorted by their rendered
/// projected values (ties broken on the full binding).
pub fn evaluate(snap: &Snapshot, q: &Query) -> Result<Vec<Row>, QueryError> {
    let patterns = resolve_patterns(q)?;
    let mut rows: Vec<Row> = vec![Row::new()];
    for pattern in &patterns {
        let mut next: Vec<Row> = Vec::new();
        for row in &rows {
            let mut extensions: BTreeSet<Row> = BTreeSet::new();
            for triple in snap.materialized() {
                if let Some(ext) = extend_row(pattern, row, &triple_parts(triple)) {
                    extensions.insert(ext);
                }
            }
            next.extend(extensions);
        }
        rows = next;
        if rows.is_empty() {
            break;
        }
    }
    sort_rows(snap, &q.projected, &mut rows);
    Ok(rows)
}

/// Exhaustive oracle: enumerates every assignment of the pattern variables
/// over the distinct terms in the snapshot.  Errors with [`QueryError::TooLarge`]
/// beyond 4 variables or 100 terms.
pub fn brute_force_evaluate(snap: &Snapshot, q: &Query) -> Result<Vec<Row>, QueryError> {
    let patterns = resolve_patterns(q)?;
    let mut vars: Vec<String> = Vec::new();
    for pattern in &patterns {
        for part in &pattern.parts {
            if let Resolved::Var(v) = part {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
    }
    if vars.len() > 4 {
        return Err(QueryError::TooLarge);
    }
    let universe: BTreeSet<GroundTerm> = snap
        .materialized()
        .iter()
        .flat_map(|t| triple_parts(t).into_iter())
        .collect();
    if universe.len() > 100 {
        return Err(QueryError::TooLarge);
    }
    let universe: Vec<GroundTerm> = universe.into_iter().collect();
    if !vars.is_empty() && universe.is_empty() {
        // No terms to assign, so no satisfying assignment exists.
        return Ok(Vec::new());
    }

    let mut rows: Vec<Row> = Vec::new();
    let mut counters = vec![0usize; vars.len()];
    'assignments: loop {
        let row: Row = vars
            .iter()
            .zip(&counters)
            .map(|(v, &i)| (v.clone(), universe[i].clone()))
            .collect();
        let satisfied = patterns.iter().all(|pattern| {
            snap.materialized()
                .iter()
                .any(|t| ground_pattern_matches(pattern, &row, &triple_parts(t)))
        });
        if satisfied && (!vars.is_empty() || !patterns.is_empty()) {
            rows.push(row);
        }
        // Odometer over the assignment space.
        if vars.is_empty() {
            break;
        }
        for i in (0..counters.len()).rev() {
            counters[i] += 1;
            if counters[i] < universe.len() {
                continue 'assignments;
            }
            counters[i] = 0;
            if i == 0 {
                break 'assignments;
            }
        }
    }
    sort_rows(snap, &q.projected, &mut rows);
    Ok(rows)
}

fn ground_pattern_matches(pattern: &ResolvedPattern, row: &Row, parts: &[GroundTerm; 3]) -> bool {
    pattern.parts.iter().zip(parts.iter()).all(|(resolved, part)| {
        match resolved {
            Resolved::Var(v) => row.get(v) == Some(part),
            Resolved::Ground(g) => g == part,
            Resolved::LexicalLiteral(s) => {
                matches!(part, GroundTerm::Literal(l) if &l.lexical_form == s)
            }
        }
    })
}

/// Renders a ground term for output: IRIs lose their longest declared prefix
/// base and map underscores back to spaces; literals print their lexical
/// form bare.
pub fn render_term(snap: &Snapshot, term: &GroundTerm) -> String {
    match term {
        GroundTerm::Iri(iri) => snap.kb().display_iri(iri),
        GroundTerm::Literal(l) => l.lexical_form.clone(),
    }
}

/// Projects sorted rows onto the query's variables as rendered strings.
pub fn render_rows(snap: &Snapshot, q: &Query, rows: &[Row]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|row| {
            q.projected
                .iter()
                .map(|v| render_term(snap, row.get(v).expect("projected var bound")))
                .collect()
        })
        .collect()
}

/// All entities typed (in the ABox) to the class with the given label or to
/// any of its descendants.  The label resolves through synonyms.
pub fn type_instances(snap: &Snapshot, class_label: &str) -> Result<Vec<EntityId>, QueryError> {
    let kb = snap.kb();
    let root = kb
        .resolve_label(class_label)
        .ok_or_else(|| QueryError::UnknownLabel(class_label.to_string()))?;
    let class_iris: BTreeSet<String> = kb
        .descendants_with_self(&root)
        .iter()
        .filter_map(|id| kb.class_iri(id))
        .collect();
    let out: BTreeSet<EntityId> = kb
        .abox()
        .iter()
        .filter(|t| t.predicate == RDF_TYPE)
        .filter_map(|t| match &t.object {
            Object::Entity(class) if class_iris.contains(class.as_str()) => {
                Some(t.subject.clone())
            }
            _ => None,
        })
        .collect();
    Ok(out.into_iter().collect())
}
