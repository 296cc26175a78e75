//! The plain-text outline format for schemas.
//!
//! Concepts form an indentation forest (two spaces per level).  Each concept
//! line reads
//!
//! ```text
//! Label | synonym; synonym :: gloss {stereotype obsolete rank=N prov="…"}
//! ```
//!
//! with everything after the label optional.  After the forest come optional
//! sections:
//!
//! * `@isa Child -> Parent` — extra is-a edges that the indentation cannot
//!   express (multiple parents, cycles in raw data),
//! * `@attributes Owner` followed by `- facet: value | synonyms :: gloss`
//!   lines,
//! * `@relations` followed by
//!   `- name: kind Domain -> Range via Relator card 0..1 / 0..*` lines,
//! * `@properties` followed by `- name: datatype` lines for ingest-declared
//!   data properties.
//!
//! `@namespace <iri>` and `@prefix name <iri>` may appear anywhere; `#` starts
//! a comment line.  [`write`] produces a canonical rendering: parsing a
//! canonical document and writing it again is byte-identical.
//!
//! [`Mode::Strict`] routes every statement through the checked constructors,
//! so authoring mistakes (duplicate labels, cycles) fail with a line number.
//! [`Mode::Lenient`] uses raw insertion and accepts structurally defective
//! data; it is used when reloading snapshots so that the validator — not the
//! parser — is the component that reports defects.

use std::collections::BTreeSet;

use crate::error::SyntaxError;
use crate::kb::{
    AttributeValue, Cardinality, Concept, ConceptId, DatatypeTag, KnowledgeBase, RelationDecl,
    RelationKind, Stereotype,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Lenient,
}

/// Parses an outline document into a fresh knowledge base.
pub fn parse(text: &str, mode: Mode) -> Result<KnowledgeBase, SyntaxError> {
    Parser {
        kb: KnowledgeBase::new(),
        mode,
        stack: Vec::new(),
        section: Section::Concepts,
    }
    .run(text)
}

enum Section {
    Concepts,
    Attributes(ConceptId),
    Relations,
    Properties,
}

struct Parser {
    kb: KnowledgeBase,
    mode: Mode,
    stack: Vec<ConceptId>,
    section: Section,
}

impl Parser {
    fn run(mut self, text: &str) -> Result<KnowledgeBase, SyntaxError> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            if let Some(byte) = raw[..raw.len() - raw.trim_start().len()].find('\t') {
                return Err(SyntaxError::new(line_no, byte + 1, "tab in indentation"));
            }
            let trimmed = raw.trim_start();
            if trimmed.starts_with('@') {
                self.directive(trimmed, line_no)?;
            } else if trimmed.starts_with("- ") {
                self.dash_line(&trimmed[2..], line_no)?;
            } else {
                self.concept_line(raw, line_no)?;
            }
        }
        Ok(self.kb)
    }

    fn resolve(&self, label: &str, line: usize) -> Result<ConceptId, SyntaxError> {
        self.kb
            .resolve_label(label)
            .ok_or_else(|| SyntaxError::new(line, 1, format!("unknown concept `{label}`")))
    }

    fn directive(&mut self, line: &str, line_no: usize) -> Result<(), SyntaxError> {
        let err = |msg: &str| SyntaxError::new(line_no, 1, msg.to_string());
        if let Some(rest) = line.strip_prefix("@namespace ") {
            let iri = parse_angle_iri(rest.trim(), line_no)?;
            self.kb.set_namespace(iri);
            Ok(())
        } else if let Some(rest) = line.strip_prefix("@prefix ") {
            let rest = rest.trim();
            let (name, iri_part) = rest
                .split_once(' ')
                .ok_or_else(|| err("expected `@prefix name <iri>`"))?;
            let iri = parse_angle_iri(iri_part.trim(), line_no)?;
            self.kb.add_prefix(name.trim(), iri);
            Ok(())
        } else if let Some(rest) = line.strip_prefix("@isa ") {
            let (child, parent) = rest
                .split_once("->")
                .ok_or_else(|| err("expected `@isa Child -> Parent`"))?;
            let child = self.resolve(child.trim(), line_no)?;
            let parent = self.resolve(parent.trim(), line_no)?;
            match self.mode {
                Mode::Strict => self
                    .kb
                    .add_is_a(&child, &parent)
                    .map_err(|e| SyntaxError::new(line_no, 1, e.to_string())),
                Mode::Lenient => {
                    self.kb.raw_insert_is_a(&child, &parent);
                    Ok(())
                }
            }
        } else if let Some(rest) = line.strip_prefix("@attributes ") {
            let owner = self.resolve(rest.trim(), line_no)?;
            self.section = Section::Attributes(owner);
            Ok(())
        } else if line.trim_end() == "@relations" {
            self.section = Section::Relations;
            Ok(())
        } else if line.trim_end() == "@properties" {
            self.section = Section::Properties;
            Ok(())
        } else {
            Err(err("unknown directive"))
        }
    }

    fn dash_line(&mut self, body: &str, line_no: usize) -> Result<(), SyntaxError> {
        match &self.section {
            Section::Concepts => Err(SyntaxError::new(
                line_no,
                1,
                "`- ` line outside of an @attributes/@relations/@properties section",
            )),
            Section::Attributes(owner) => {
                let owner = owner.clone();
                self.value_line(body, &owner, line_no)
            }
            Section::Relations => self.relation_line(body, line_no),
            Section::Properties => self.property_line(body, line_no),
        }
    }

    fn value_line(
        &mut self,
        body: &str,
        owner: &ConceptId,
        line_no: usize,
    ) -> Result<(), SyntaxError> {
        let (facet, rest) = body.split_once(':').ok_or_else(|| {
            SyntaxError::new(line_no, 1, "expected `- facet: value :: gloss`")
        })?;
        let facet = facet.trim();
        if facet.is_empty() || facet.contains(char::is_whitespace) {
            return Err(SyntaxError::new(line_no, 1, "facet name must be a single token"));
        }
        let (label_part, gloss, _meta) = split_gloss(rest, line_no)?;
        let (label, synonyms) = split_synonyms(&label_part, line_no)?;
        let value = AttributeValue {
            label,
            gloss,
            synonyms,
        };
        match self.mode {
            Mode::Strict => self
                .kb
                .add_attribute_value(facet, owner, value)
                .map_err(|e| SyntaxError::new(line_no, 1, e.to_string())),
            Mode::Lenient => {
                self.kb.raw_add_attribute_value(facet, owner, value);
                Ok(())
            }
        }
    }

    fn relation_line(&mut self, body: &str, line_no: usize) -> Result<(), SyntaxError> {
        let err = |msg: String| SyntaxError::new(line_no, 1, msg);
        let (name, rest) = body
            .split_once(':')
            .ok_or_else(|| err("expected `- name: kind Domain -> Range`".into()))?;
        let name = name.trim().to_string();
        let rest = rest.trim();
        let (kind_token, rest) = rest
            .split_once(' ')
            .ok_or_else(|| err("expected relation kind".into()))?;
        let kind = RelationKind::parse(kind_token)
            .ok_or_else(|| err(format!("unknown relation kind `{kind_token}`")))?;
        let (domain_part, rest) = rest
            .split_once("->")
            .ok_or_else(|| err("expected `Domain -> Range`".into()))?;

        let (rest, card_part) = match rest.split_once(" card ") {
            Some((head, card)) => (head, Some(card)),
            None => (rest, None),
        };
        let (range_part, via_part) = match rest.split_once(" via ") {
            Some((head, via)) => (head, Some(via)),
            None => (rest, None),
        };

        let domain = self.resolve(domain_part.trim(), line_no)?;
        let range = self.resolve(range_part.trim(), line_no)?;
        let via_relator = via_part
            .map(|v| self.resolve(v.trim(), line_no))
            .transpose()?;
        let (domain_card, range_card) = match card_part {
            None => (None, None),
            Some(card) => {
                let (dc, rc) = card
                    .split_once('/')
                    .ok_or_else(|| err("expected `card a..b / c..d`".into()))?;
                (parse_card(dc.trim(), line_no)?, parse_card(rc.trim(), line_no)?)
            }
        };
        let decl = RelationDecl {
            name,
            kind,
            domain,
            range,
            via_relator,
            domain_card,
            range_card,
        };
        match self.mode {
            Mode::Strict => self
                .kb
                .declare_relation(decl)
                .map_err(|e| SyntaxError::new(line_no, 1, e.to_string())),
            Mode::Lenient => {
                self.kb.relations_mut().push(decl);
                Ok(())
            }
        }
    }

    fn property_line(&mut self, body: &str, line_no: usize) -> Result<(), SyntaxError> {
        let (name, tag) = body
            .split_once(':')
            .ok_or_else(|| SyntaxError::new(line_no, 1, "expected `- name: datatype`"))?;
        let tag = DatatypeTag::parse(tag.trim()).ok_or_else(|| {
            SyntaxError::new(line_no, 1, format!("unknown datatype `{}`", tag.trim()))
        })?;
        self.kb
            .declare_data_property(name.trim(), tag)
            .map_err(|e| SyntaxError::new(line_no, 1, e.to_string()))
    }

    fn concept_line(&mut self, raw: &str, line_no: usize) -> Result<(), SyntaxError> {
        if !matches!(self.section, Section::Concepts) {
            return Err(SyntaxError::new(
                line_no,
                1,
                "concept line after a section directive",
            ));
        }
        let indent = raw.len() - raw.trim_start().len();
        if indent % 2 != 0 {
            return Err(SyntaxError::new(
                line_no,
                indent + 1,
                format!("indentation of {indent} spaces is not a multiple of two"),
            ));
        }
        let depth = indent / 2;
        if depth > self.stack.len() {
            return Err(SyntaxError::new(
                line_no,
                indent + 1,
                format!(
                    "indentation skips a level (depth {depth} after depth {})",
                    self.stack.len()
                ),
            ));
        }

        let (label_part, gloss, meta) = split_gloss(raw.trim(), line_no)?;
        let (label, synonyms) = split_synonyms(&label_part, line_no)?;
        let meta = meta.unwrap_or_default();
        let parent = if depth == 0 {
            None
        } else {
            Some(self.stack[depth - 1].clone())
        };

        let id = match self.mode {
            Mode::Strict => {
                let id = self
                    .kb
                    .add_concept(&label, &gloss, meta.stereotype, parent.as_ref())
                    .map_err(|e| SyntaxError::new(line_no, 1, e.to_string()))?;
                for syn in &synonyms {
                    self.kb
                        .add_synonym(&id, syn)
                        .map_err(|e| SyntaxError::new(line_no, 1, e.to_string()))?;
                }
                self.kb.set_provenance(&id, &meta.provenance).unwrap();
                self.kb.set_rank(&id, meta.rank).unwrap();
                if meta.obsolete {
                    self.kb.mark_obsolete(&id).unwrap();
                }
                id
            }
            Mode::Lenient => {
                let id = self.kb.raw_insert_concept(Concept {
                    id: ConceptId::placeholder(),
                    preferred_label: label,
                    synonyms: synonyms.iter().map(|s| s.to_string()).collect(),
                    gloss,
                    stereotype: meta.stereotype,
                    obsolete: meta.obsolete,
                    provenance: meta.provenance,
                    rank: meta.rank,
                });
                if let Some(p) = &parent {
                    self.kb.raw_insert_is_a(&id, p);
                }
                id
            }
        };
        self.stack.truncate(depth);
        self.stack.push(id);
        Ok(())
    }
}

fn parse_angle_iri(s: &str, line_no: usize) -> Result<String, SyntaxError> {
    let inner = s
        .strip_prefix('<')
        .and_then(|x| x.strip_suffix('>'))
        .ok_or_else(|| SyntaxError::new(line_no, 1, "expected `<iri>`"))?;
    if inner.is_empty() {
        return Err(SyntaxError::new(line_no, 1, "empty IRI"));
    }
    Ok(inner.to_string())
}

fn parse_card(s: &str, line_no: usize) -> Result<Option<Cardinality>, SyntaxError> {
    if s == "-" {
        return Ok(None);
    }
    Cardinality::parse(s)
        .map(Some)
        .ok_or_else(|| SyntaxError::new(line_no, 1, format!("bad cardinality `{s}`")))
}

#[derive(Default)]
struct Meta {
    stereotype: Stereotype,
    obsolete: bool,
    rank: Option<i64>,
    provenance: String,
}

/// Splits `label [| syns] :: gloss [{meta}]` into its three parts.
fn split_gloss(content: &str, line_no: usize) -> Result<(String, String, Option<Meta>), SyntaxError> {
    let content = content.trim();
    let (before_meta, meta) = take_meta(content, line_no)?;
    let (label_part, gloss) = before_meta
        .split_once("::")
        .ok_or_else(|| SyntaxError::new(line_no, 1, "expected `::` before the gloss"))?;
    Ok((
        label_part.trim().to_string(),
        gloss.trim().to_string(),
        meta,
    ))
}

/// Pops a trailing `{…}` meta block off the line, if one parses.  Scans
/// candidate `{` positions right to left so that braces inside glosses do not
/// confuse it.
fn take_meta(content: &str, line_no: usize) -> Result<(&str, Option<Meta>), SyntaxError> {
    if !content.ends_with('}') {
        return Ok((content, None));
    }
    let mut search_end = content.len();
    let mut last_err = None;
    while let Some(open) = content[..search_end].rfind(" {") {
        let candidate = &content[open + 1..];
        match parse_meta(candidate, line_no) {
            Ok(meta) => return Ok((&content[..open], Some(meta))),
            Err(e) => {
                last_err = Some(e);
                search_end = open;
            }
        }
    }
    // A trailing `}` with no parsable meta block: treat it as gloss text,
    // unless a block shape was clearly attempted.
    match last_err {
        Some(e) if content.contains(" {") => Err(e),
        _ => Ok((content, None)),
    }
}

fn parse_meta(block: &str, line_no: usize) -> Result<Meta, SyntaxError> {
    let err = |msg: String| SyntaxError::new(line_no, 1, msg);
    let inner = block
        .strip_prefix('{')
        .and_then(|b| b.strip_suffix('}'))
        .ok_or_else(|| err("malformed meta block".into()))?;
    let mut meta = Meta::default();
    let mut saw_stereotype = false;
    let mut rest = inner.trim();
    while !rest.is_empty() {
        if let Some(tail) = rest.strip_prefix("prov=\"") {
            let (value, after) = read_quoted_tail(tail).ok_or_else(|| {
                err("unterminated prov string".into())
            })?;
            meta.provenance = value;
            rest = after.trim_start();
            continue;
        }
        let (token, after) = match rest.split_once(' ') {
            Some((t, a)) => (t, a),
            None => (rest, ""),
        };
        if let Some(st) = Stereotype::parse(token) {
            if saw_stereotype {
                return Err(err("duplicate stereotype token".into()));
            }
            saw_stereotype = true;
            meta.stereotype = st;
        } else if token == "obsolete" {
            meta.obsolete = true;
        } else if let Some(r) = token.strip_prefix("rank=") {
            meta.rank = Some(
                r.parse::<i64>()
                    .map_err(|_| err(format!("bad rank `{r}`")))?,
            );
        } else {
            return Err(err(format!("unknown meta token `{token}`")));
        }
        rest = after.trim_start();
    }
    Ok(meta)
}

/// Reads a quoted string body (after the opening quote) with `\"` and `\\`
/// escapes; returns the value and the remainder after the closing quote.
fn read_quoted_tail(s: &str) -> Option<(String, &str)> {
    let mut out = String::new();
    let mut chars = s.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Some((out, &s[i + 1..])),
            '\\' => match chars.next() {
                Some((_, '"')) => out.push('"'),
                Some((_, '\\')) => out.push('\\'),
                _ => return None,
            },
            other => out.push(other),
        }
    }
    None
}

fn quote_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn split_synonyms(label_part: &str, line_no: usize) -> Result<(String, Vec<String>), SyntaxError> {
    match label_part.split_once('|') {
        None => Ok((label_part.trim().to_string(), Vec::new())),
        Some((label, syns)) => {
            let mut out = Vec::new();
            for syn in syns.split(';') {
                let syn = syn.trim();
                if syn.is_empty() {
                    return Err(SyntaxError::new(line_no, 1, "empty synonym"));
                }
                out.push(syn.to_string());
            }
            Ok((label.trim().to_string(), out))
        }
    }
}

/// Renders a knowledge base schema in canonical outline form.
pub fn write(kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    out.push_str(&format!("@namespace <{}>\n", kb.namespace()));
    for (name, base) in kb.prefixes() {
        out.push_str(&format!("@prefix {name} <{base}>\n"));
    }

    // Spanning forest: each concept hangs under its first parent by concept
    // order; everything the forest cannot reach (cycles) is emitted flat, and
    // all remaining edges become explicit @isa lines.
    let order: Vec<ConceptId> = kb.concepts().keys().cloned().collect();
    let index_of = |id: &ConceptId| order.iter().position(|x| x == id).unwrap_or(usize::MAX);
    let tree_parent = |id: &ConceptId| -> Option<ConceptId> {
        let mut parents: Vec<ConceptId> = kb.parents_of(id).cloned().collect();
        parents.sort_by_key(|p| index_of(p));
        parents.into_iter().next()
    };

    let mut emitted: BTreeSet<ConceptId> = BTreeSet::new();
    let mut realized: BTreeSet<(ConceptId, ConceptId)> = BTreeSet::new();
    let mut body = String::new();

    #[allow(clippy::too_many_arguments)]
    fn emit(
        kb: &KnowledgeBase,
        id: &ConceptId,
        depth: usize,
        body: &mut String,
        emitted: &mut BTreeSet<ConceptId>,
        realized: &mut BTreeSet<(ConceptId, ConceptId)>,
        tree_parent: &dyn Fn(&ConceptId) -> Option<ConceptId>,
    ) {
        emitted.insert(id.clone());
        body.push_str(&concept_line(kb, id, depth));
        for child in kb.children_of(id) {
            if !emitted.contains(&child) && tree_parent(&child).as_ref() == Some(id) {
                realized.insert((child.clone(), id.clone()));
                emit(kb, &child, depth + 1, body, emitted, realized, tree_parent);
            }
        }
    }

    for id in &order {
        if tree_parent(id).is_none() && !emitted.contains(id) {
            emit(kb, id, 0, &mut body, &mut emitted, &mut realized, &tree_parent);
        }
    }
    // Cycle members are reachable from no root; emit them flat.
    for id in &order {
        if !emitted.contains(id) {
            emitted.insert(id.clone());
            body.push_str(&concept_line(kb, id, 0));
        }
    }
    if !body.is_empty() {
        out.push('\n');
        out.push_str(&body);
    }
    // Every edge the indentation did not realize becomes an @isa line, in
    // (child, parent) concept order.
    let mut extra_isa: Vec<(ConceptId, ConceptId)> = kb
        .isa_edges()
        .iter()
        .filter(|e| !realized.contains(e))
        .cloned()
        .collect();
    extra_isa.sort_by_key(|(c, p)| (index_of(c), index_of(p)));
    for (child, parent) in &extra_isa {
        let c = &kb.concepts()[child];
        let p = &kb.concepts()[parent];
        out.push_str(&format!("@isa {} -> {}\n", c.preferred_label, p.preferred_label));
    }

    let mut current_owner: Option<ConceptId> = None;
    let mut attr_body = String::new();
    for facet in kb.attribute_facets() {
        if current_owner.as_ref() != Some(&facet.attached_to) {
            let owner = &kb.concepts()[&facet.attached_to];
            attr_body.push_str(&format!("@attributes {}\n", owner.preferred_label));
            current_owner = Some(facet.attached_to.clone());
        }
        for v in &facet.values {
            let mut line = format!("- {}: {}", facet.name, v.label);
            if !v.synonyms.is_empty() {
                line.push_str(&format!(" | {}", v.synonyms.join("; ")));
            }
            line.push_str(&format!(" :: {}", v.gloss));
            attr_body.push_str(line.trim_end());
            attr_body.push('\n');
        }
    }
    if !attr_body.is_empty() {
        out.push('\n');
        out.push_str(&attr_body);
    }

    if !kb.relation_decls().is_empty() {
        out.push_str("\n@relations\n");
        for decl in kb.relation_decls() {
            let domain = &kb.concepts()[&decl.domain].preferred_label;
            let range = &kb.concepts()[&decl.range].preferred_label;
            let mut line = format!(
                "- {}: {} {} -> {}",
                decl.name,
                decl.kind.token(),
                domain,
                range
            );
            if let Some(via) = &decl.via_relator {
                line.push_str(&format!(" via {}", kb.concepts()[via].preferred_label));
            }
            if decl.domain_card.is_some() || decl.range_card.is_some() {
                let fmt = |c: &Option<Cardinality>| match c {
                    Some(c) => c.to_string(),
                    None => "-".to_string(),
                };
                line.push_str(&format!(
                    " card {} / {}",
                    fmt(&decl.domain_card),
                    fmt(&decl.range_card)
                ));
            }
            out.push_str(&line);
            out.push('\n');
        }
    }

    if !kb.data_properties().is_empty() {
        out.push_str("\n@properties\n");
        for (name, tag) in kb.data_properties() {
            out.push_str(&format!("- {}: {}\n", name, tag.token()));
        }
    }
    out
}

fn concept_line(kb: &KnowledgeBase, id: &ConceptId, depth: usize) -> String {
    let c = &kb.concepts()[id];
    let mut line = String::new();
    line.push_str(&"  ".repeat(depth));
    line.push_str(&c.preferred_label);
    if !c.synonyms.is_empty() {
        let syns: Vec<&str> = c.synonyms.iter().map(String::as_str).collect();
        line.push_str(&format!(" | {}", syns.join("; ")));
    }
    line.push_str(" ::");
    if !c.gloss.is_empty() {
        line.push(' ');
        line.push_str(&c.gloss);
    }
    let mut meta = vec![c.stereotype.token().to_string()];
    if c.obsolete {
        meta.push("obsolete".to_string());
    }
    if let Some(rank) = c.rank {
        meta.push(format!("rank={rank}"));
    }
    if !c.provenance.is_empty() {
        meta.push(format!("prov=\"{}\"", quote_escape(&c.provenance)));
    }
    line.push_str(&format!(" {{{}}}", meta.join(" ")));
    line.push('\n');
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Stereotype;

    #[test]
    fn empty_document_yields_empty_schema() {
        let kb = parse("", Mode::Strict).unwrap();
        assert_eq!(kb.concepts().len(), 0);
        let kb = parse("# only a comment\n\n", Mode::Strict).unwrap();
        assert_eq!(kb.concepts().len(), 0);
    }

    #[test]
    fn forest_attributes_relations_and_properties_round_trip() {
        let text = "\
@namespace <http://example.org/ns#>

Educational Institution :: an institution for education {kind prov=\"seed\"}
  School :: an educational institution {subkind}
    Tertiary school | Post-secondary school :: a school above secondary level {subkind}
  College :: an independent higher education institution {subkind}
Person :: a human being {kind}
  Student :: a person enrolled somewhere {role}
Enrolment :: being enrolled; mediates studiedIn {relator}

@attributes School
- timing: day :: during daylight
- timing: night :: after dark
- modeOfTeaching: correspondence | distance :: teaching by post

@relations
- studiedIn: material Student -> Educational Institution via Enrolment
- memberOf: partitive College -> Educational Institution card 0..1 / 0..*

@properties
- address: string
- pupilRoll: integer
";
        let kb = parse(text, Mode::Strict).unwrap();
        assert_eq!(kb.namespace(), "http://example.org/ns#");
        assert_eq!(kb.concepts().len(), 7);
        let tertiary = kb.resolve_label("post-SECONDARY school").unwrap();
        assert_eq!(
            kb.concepts()[&tertiary].preferred_label,
            "Tertiary school"
        );
        assert_eq!(kb.attribute_facets().len(), 2);
        assert_eq!(kb.attribute_facets()[0].values.len(), 2);
        assert_eq!(kb.relation_decls().len(), 2);
        assert_eq!(kb.relation_decls()[1].domain_card.unwrap().to_string(), "0..1");
        assert_eq!(kb.data_properties().len(), 2);

        // Canonical rendering is a fixpoint of parse-then-write.
        let canonical = write(&kb);
        let reparsed = parse(&canonical, Mode::Strict).unwrap();
        assert_eq!(write(&reparsed), canonical);
        assert_eq!(reparsed.concepts().len(), 7);
    }

    #[test]
    fn odd_indentation_is_rejected_with_position() {
        let text = "A :: g {kind}\n   B :: g {subkind}\n";
        let err = parse(text, Mode::Strict).unwrap_err();
        assert_eq!((err.line, err.col), (2, 4));
        assert!(err.message.contains("multiple of two"));
    }

    #[test]
    fn tabs_in_indentation_are_rejected() {
        let text = "A :: g {kind}\n\tB :: g {subkind}\n";
        let err = parse(text, Mode::Strict).unwrap_err();
        assert_eq!((err.line, err.col), (2, 1));
        assert!(err.message.contains("tab"));
    }

    #[test]
    fn skipped_levels_are_rejected() {
        let text = "A :: g {kind}\n    B :: g {subkind}\n";
        let err = parse(text, Mode::Strict).unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("skips a level"));
    }

    #[test]
    fn missing_gloss_separator_is_rejected() {
        let err = parse("JustALabel\n", Mode::Strict).unwrap_err();
        assert!(err.message.contains("::"));
        assert_eq!(err.line, 1);
    }

    #[test]
    fn duplicate_labels_strict_vs_lenient() {
        let text = "Dup :: one {subkind}\nDup :: two {subkind}\n";
        let err = parse(text, Mode::Strict).unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("duplicate"));
        let kb = parse(text, Mode::Lenient).unwrap();
        assert_eq!(kb.concepts().len(), 2);
    }

    #[test]
    fn isa_cycles_strict_vs_lenient() {
        let text = "A :: g {subkind}\nB :: g {subkind}\n@isa A -> B\n@isa B -> A\n";
        let err = parse(text, Mode::Strict).unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("cycle"));
        let kb = parse(text, Mode::Lenient).unwrap();
        assert_eq!(kb.isa_edges().len(), 2);
        // Cyclic raw data still writes out and reloads.
        let canonical = write(&kb);
        let reloaded = parse(&canonical, Mode::Lenient).unwrap();
        assert_eq!(reloaded.isa_edges().len(), 2);
        assert_eq!(write(&reloaded), canonical);
    }

    #[test]
    fn value_line_outside_section_is_rejected() {
        let err = parse("- timing: day :: g\n", Mode::Strict).unwrap_err();
        assert!(err.message.contains("section"));
    }

    #[test]
    fn unknown_stereotype_is_rejected() {
        let err = parse("A :: g {gadget}\n", Mode::Strict).unwrap_err();
        assert!(err.message.contains("unknown meta token"));
    }

    #[test]
    fn provenance_with_quotes_and_braces_round_trips() {
        let mut kb = KnowledgeBase::new();
        let id = kb
            .add_concept("Boarding school", "pupils \"board\" during term", Stereotype::Subkind, None)
            .unwrap();
        kb.set_provenance(&id, r#"WordNet {45442}; quote: "x\y""#).unwrap();
        let canonical = write(&kb);
        let reparsed = parse(&canonical, Mode::Strict).unwrap();
        let rid = reparsed.resolve_label("Boarding school").unwrap();
        assert_eq!(
            reparsed.concepts()[&rid].provenance,
            r#"WordNet {45442}; quote: "x\y""#
        );
        assert_eq!(
            reparsed.concepts()[&rid].gloss,
            "pupils \"board\" during term"
        );
        assert_eq!(write(&reparsed), canonical);
    }

    #[test]
    fn obsolete_and_rank_metadata_survive() {
        let text = "Old :: superseded {subkind obsolete rank=2 prov=\"note\"}\n";
        let kb = parse(text, Mode::Strict).unwrap();
        let id = kb.resolve_label("Old").unwrap();
        let c = &kb.concepts()[&id];
        assert!(c.obsolete);
        assert_eq!(c.rank, Some(2));
        assert_eq!(c.provenance, "note");
        assert_eq!(write(&kb), format!("@namespace <{}>\n@prefix EI <{}>\n@prefix owl <http://www.w3.org/2002/07/owl#>\n@prefix rdf <http://www.w3.org/1999/02/22-rdf-syntax-ns#>\n@prefix rdfs <http://www.w3.org/2000/01/rdf-schema#>\n@prefix xsd <http://www.w3.org/2001/XMLSchema#>\n\n{text}", crate::kb::DEFAULT_NAMESPACE, crate::kb::DEFAULT_NAMESPACE));
    }

    #[test]
    fn multi_parent_raw_data_emits_extra_isa_lines() {
        let mut kb = KnowledgeBase::new();
        let a = kb.raw_concept("A", "g", Stereotype::Kind);
        let b = kb.raw_concept("B", "g", Stereotype::Kind);
        let x = kb.raw_concept("X", "g", Stereotype::Subkind);
        kb.raw_insert_is_a(&x, &a);
        kb.raw_insert_is_a(&x, &b);
        let canonical = write(&kb);
        assert!(canonical.contains("@isa X -> B"), "{canonical}");
        let reloaded = parse(&canonical, Mode::Lenient).unwrap();
        assert_eq!(reloaded.isa_edges().len(), 2);
        assert_eq!(write(&reloaded), canonical);
    }
}
