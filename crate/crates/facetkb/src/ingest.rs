//! Ingestion of delimited records into the ABox.
//!
//! A *mapping* file describes how rows of a CSV become entities: which
//! columns form the identifying key, how a class is chosen (substring rules
//! over a designated column, with an optional default), and which columns
//! become data-property literals.  Ingestion is deterministic and
//! idempotent: the same row always mints the same entity IRI, and
//! re-ingesting unchanged data is a no-op.
//!
//! Mapping grammar, one directive per line (`#` starts a comment):
//!
//! ```text
//! source "glasgow-schools"
//! key "Establishment Name"
//! class-column "Establishment Type"
//! rule "Nursery" -> "Preschool"
//! default-class "College"
//! prop "Pupil Roll" -> pupilRoll : integer
//! ```
//!
//! `key` takes one or more quoted column names separated by commas.  Rule
//! patterns match case-insensitively as substrings, first match wins.  A
//! mapping must offer at least one way to classify a row (`class-column`
//! with rules, a `default-class`, or both).
//!
//! Entity IRIs are minted as `<namespace><slug>-<hash8>` where the slug is
//! the lowercased key joined with `-` (non-alphanumeric runs collapse to a
//! single dash) and the hash is the first eight hex digits of the 64-bit
//! FNV-1a digest of the source id and the key values, `0x1F`-separated.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::error::SyntaxError;
use crate::kb::{DatatypeTag, EntityId, KbError, KnowledgeBase, Literal, Object, Triple, RDF_TYPE};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("mapped column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("mapping names unknown class label `{0}`")]
    UnknownLabel(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// One `prop` directive: a column feeding a typed data property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyRule {
    pub column: String,
    pub predicate: String,
    pub datatype: DatatypeTag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingSpec {
    pub source_id: String,
    pub key_columns: Vec<String>,
    pub class_column: Option<String>,
    /// `(substring pattern, class label)`, tried in order.
    pub class_rules: Vec<(String, String)>,
    pub default_class: Option<String>,
    pub properties: Vec<PropertyRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows_read: usize,
    pub created: usize,
    pub updated: usize,
    /// `(1-based data row, reason)` for rows that changed nothing.
    pub skipped: Vec<(usize, String)>,
}

// ---------------------------------------------------------------------------
// Mapping parsing

fn syntax(line: usize, col: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError::new(line, col, message)
}

/// Pulls a double-quoted string off the front of `rest`; returns the content
/// and the remainder after the closing quote.
fn take_quoted(rest: &str, line: usize, base_col: usize) -> Result<(String, &str), SyntaxError> {
    let rest_trim = rest.trim_start();
    let col = base_col + (rest.len() - rest_trim.len());
    let mut chars = rest_trim.char_indices();
    match chars.next() {
        Some((_, '"')) => {}
        _ => return Err(syntax(line, col + 1, "expected a double-quoted string")),
    }
    let mut out = String::new();
    let mut escaped = false;
    for (i, c) in chars {
        if escaped {
            match c {
                '"' | '\\' => out.push(c),
                _ => return Err(syntax(line, col + 1 + i, "bad escape in string")),
            }
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '"' {
            return Ok((out, &rest_trim[i + c.len_utf8()..]));
        } else {
            out.push(c);
        }
    }
    Err(syntax(line, col + 1, "unterminated string"))
}

pub fn parse_mapping(text: &str) -> Result<MappingSpec, SyntaxError> {
    let mut source_id: Option<String> = None;
    let mut key_columns: Vec<String> = Vec::new();
    let mut class_column: Option<String> = None;
    let mut class_rules: Vec<(String, String)> = Vec::new();
    let mut default_class: Option<String> = None;
    let mut properties: Vec<PropertyRule> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (directive, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let col_after = raw.find(directive).unwrap_or(0) + directive.len();
        match directive {
            "source" => {
                let (value, tail) = take_quoted(rest, lineno, col_after)?;
                if !tail.trim().is_empty() {
                    return Err(syntax(lineno, 1, "trailing text after source id"));
                }
                if value.trim().is_empty() {
                    return Err(syntax(lineno, 1, "source id must be nonempty"));
                }
                source_id = Some(value);
            }
            "key" => {
                let mut tail = rest;
                loop {
                    let (column, after) = take_quoted(tail, lineno, col_after)?;
                    if column.trim().is_empty() {
                        return Err(syntax(lineno, 1, "key column name must be nonempty"));
                    }
                    key_columns.push(column);
                    let after = after.trim_start();
                    if let Some(more) = after.strip_prefix(',') {
                        tail = more;
                    } else if after.is_empty() {
                        break;
                    } else {
                        return Err(syntax(lineno, 1, "expected `,` between key columns"));
                    }
                }
            }
            "class-column" => {
                let (value, tail) = take_quoted(rest, lineno, col_after)?;
                if !tail.trim().is_empty() {
                    return Err(syntax(lineno, 1, "trailing text after class-column"));
                }
                class_column = Some(value);
            }
            "rule" => {
                let (pattern, tail) = take_quoted(rest, lineno, col_after)?;
                let tail = tail.trim_start();
                let Some(tail) = tail.strip_prefix("->") else {
                    return Err(syntax(lineno, 1, "expected `->` in rule"));
                };
                let (label, after) = take_quoted(tail, lineno, col_after)?;
                if !after.trim().is_empty() {
                    return Err(syntax(lineno, 1, "trailing text after rule"));
                }
                if pattern.is_empty() {
                    return Err(syntax(lineno, 1, "rule pattern must be nonempty"));
                }
                class_rules.push((pattern, label));
            }
            "default-class" => {
                let (value, tail) = take_quoted(rest, lineno, col_after)?;
                if !tail.trim().is_empty() {
                    return Err(syntax(lineno, 1, "trailing text after default-class"));
                }
                default_class = Some(value);
            }
            "prop" => {
                let (column, tail) = take_quoted(rest, lineno, col_after)?;
                let tail = tail.trim_start();
                let Some(tail) = tail.strip_prefix("->") else {
                    return Err(syntax(lineno, 1, "expected `->` in prop"));
                };
                let Some((predicate, dtype)) = tail.split_once(':') else {
                    return Err(syntax(lineno, 1, "expected `: <datatype>` in prop"));
                };
                let predicate = predicate.trim();
                if predicate.is_empty()
                    || !predicate.chars().all(|c| c.is_alphanumeric() || c == '_')
                {
                    return Err(syntax(lineno, 1, "prop predicate must be a bare name"));
                }
                let dtype = dtype.trim();
                let Some(datatype) = DatatypeTag::parse(dtype) else {
                    return Err(syntax(
                        lineno,
                        1,
                        format!("unknown datatype `{dtype}` (expected string, integer, or anyURI)"),
                    ));
                };
                properties.push(PropertyRule {
                    column,
                    predicate: predicate.to_string(),
                    datatype,
                });
            }
            other => {
                return Err(syntax(lineno, 1, format!("unknown directive `{other}`")));
            }
        }
    }

    let Some(source_id) = source_id else {
        return Err(syntax(1, 1, "mapping needs a `source` directive"));
    };
    if key_columns.is_empty() {
        return Err(syntax(1, 1, "mapping needs at least one `key` column"));
    }
    if !class_rules.is_empty() && class_column.is_none() {
        return Err(syntax(1, 1, "`rule` directives need a `class-column`"));
    }
    if class_column.is_none() && default_class.is_none() {
        return Err(syntax(1, 1, "mapping needs a `class-column` or a `default-class`"));
    }
    Ok(MappingSpec {
        source_id,
        key_columns,
        class_column,
        class_rules,
        default_class,
        properties,
    })
}

/// Checks that every class label the mapping names resolves in the KB.
pub fn bind_mapping(kb: &KnowledgeBase, spec: &MappingSpec) -> Result<(), IngestError> {
    for label in spec
        .class_rules
        .iter()
        .map(|(_, label)| label)
        .chain(spec.default_class.iter())
    {
        if kb.resolve_label(label).is_none() {
            return Err(IngestError::UnknownLabel(label.clone()));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Entity minting

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Lowercases and collapses every non-alphanumeric run to a single dash.
pub fn slugify(s: &str) -> String {
    let mut out = String::new();
    let mut pending_dash = false;
    for c in s.chars() {
        if c.is_alphanumeric() {
            if pending_dash && !out.is_empty() {
                out.push('-');
            }
            pending_dash = false;
            out.extend(c.to_lowercase());
        } else {
            pending_dash = true;
        }
    }
    out
}

/// Deterministically mints an entity IRI from a source id and key values.
pub fn mint_entity_id(namespace: &str, source_id: &str, keys: &[&str]) -> EntityId {
    let slug = slugify(&keys.join(" "));
    let mut hash_input = Vec::new();
    hash_input.extend_from_slice(source_id.as_bytes());
    hash_input.push(0x1f);
    for (i, key) in keys.iter().enumerate() {
        if i > 0 {
            hash_input.push(0x1f);
        }
        hash_input.extend_from_slice(key.as_bytes());
    }
    let digest = format!("{:016x}", fnv1a64(&hash_input));
    let hash8 = &digest[..8];
    if slug.is_empty() {
        EntityId::new(format!("{namespace}{hash8}"))
    } else {
        EntityId::new(format!("{namespace}{slug}-{hash8}"))
    }
}

// ---------------------------------------------------------------------------
// Ingestion

fn classify(spec: &MappingSpec, class_cell: Option<&str>) -> Option<String> {
    if let Some(cell) = class_cell {
        let folded = cell.to_lowercase();
        for (pattern, label) in &spec.class_rules {
            if folded.contains(&pattern.to_lowercase()) {
                return Some(label.clone());
            }
        }
    }
    spec.default_class.clone()
}

/// Ingests comma-delimited text under a mapping.  Creates or updates one
/// entity per row; only *managed* predicates (the typing and the mapped
/// properties) are rewritten, so triples asserted elsewhere survive.
pub fn ingest_delimited(
    kb: &mut KnowledgeBase,
    spec: &MappingSpec,
    data: &str,
) -> Result<IngestReport, IngestError> {
    bind_mapping(kb, spec)?;
    for rule in &spec.properties {
        kb.declare_data_property(&rule.predicate, rule.datatype)?;
    }

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(data.as_bytes());
    let headers = reader.headers()?.clone();
    let position = |column: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| IngestError::MissingColumn(column.to_string()))
    };
    let key_idx: Vec<usize> = spec
        .key_columns
        .iter()
        .map(|c| position(c))
        .collect::<Result<_, _>>()?;
    let class_idx = spec.class_column.as_deref().map(position).transpose()?;
    let prop_idx: Vec<usize> = spec
        .properties
        .iter()
        .map(|r| position(&r.column))
        .collect::<Result<_, _>>()?;

    let managed_predicates: BTreeSet<String> = std::iter::once(RDF_TYPE.to_string())
        .chain(spec.properties.iter().map(|r| kb.predicate_iri(&r.predicate)))
        .collect();

    let mut report = IngestReport::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        report.rows_read += 1;

        let keys: Vec<&str> = key_idx.iter().map(|&i| record.get(i).unwrap_or("")).collect();
        if keys.iter().any(|k| k.is_empty()) {
            report.skipped.push((row, "empty key".to_string()));
            continue;
        }

        let class_cell = class_idx.map(|i| record.get(i).unwrap_or(""));
        let Some(class_label) = classify(spec, class_cell) else {
            report.skipped.push((row, "no class rule matched".to_string()));
            continue;
        };
        let class_id = kb
            .resolve_label(&class_label)
            .expect("labels were bound before ingesting");
        let class_iri = kb.class_iri(&class_id).expect("bound class has an IRI");

        let entity = mint_entity_id(kb.namespace(), &spec.source_id, &keys);
        let mut desired: BTreeSet<Triple> = BTreeSet::new();
        desired.insert(Triple::new(
            entity.clone(),
            RDF_TYPE,
            Object::Entity(EntityId::new(class_iri)),
        ));
        for (rule, &idx) in spec.properties.iter().zip(&prop_idx) {
            let cell = record.get(idx).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            let literal = match rule.datatype {
                DatatypeTag::String => Literal::string(cell),
                DatatypeTag::Integer => Literal::integer(cell).map_err(|_| {
                    IngestError::MalformedRow {
                        row,
                        message: format!(
                            "column `{}` has non-integer value `{cell}`",
                            rule.column
                        ),
                    }
                })?,
                DatatypeTag::AnyUri => Literal::any_uri(cell),
            };
            desired.insert(Triple::new(
                entity.clone(),
                kb.predicate_iri(&rule.predicate),
                Object::Literal(literal),
            ));
        }

        let is_new = !kb.entities().contains(&entity);
        let existing: BTreeSet<Triple> = kb
            .abox()
            .iter()
            .filter(|t| t.subject == entity && managed_predicates.contains(&t.predicate))
            .cloned()
            .collect();
        if is_new {
            report.created += 1;
        } else if existing == desired {
            report.skipped.push((row, "no change".to_string()));
            continue;
        } else {
            report.updated += 1;
        }
        kb.register_entity(entity.clone());
        for predicate in &managed_predicates {
            kb.retract_triples(&entity, predicate);
        }
        for triple in desired {
            kb.assert_triple(triple)?;
        }
    }
    Ok(report)
}

/// Convenience for callers that format skip reasons.
pub fn summarize_skips(report: &IngestReport) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (_, reason) in &report.skipped {
        *out.entry(reason.clone()).or_insert(0) += 1;
    }
    out
}
