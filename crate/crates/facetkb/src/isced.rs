//! ISCED 2011 educational attainment levels and their mapping onto schema
//! concepts.
//!
//! The map file has one line per level:
//!
//! ```text
//! level 4 :: "Post-secondary non-tertiary education" :: Tertiary school; Post-secondary school
//! ```
//!
//! A valid file covers codes 0 through 8, each exactly once, each with at
//! least one label.  Lookups are label-normalized and, once bound against a
//! knowledge base, synonym-aware on the schema side.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::error::SyntaxError;
use crate::kb::{normalize_label, KnowledgeBase};

pub const MIN_CODE: u8 = 0;
pub const MAX_CODE: u8 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IscedRow {
    pub code: u8,
    pub unesco_term: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IscedMapping {
    rows: Vec<IscedRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IscedError {
    #[error("ISCED level {0} is outside 0..=8")]
    OutOfRange(i64),
    #[error("label `{0}` is not mapped to any ISCED level")]
    UnknownLabel(String),
    #[error("mapped label `{0}` does not resolve against the schema")]
    UnboundLabel(String),
}

impl IscedMapping {
    pub fn rows(&self) -> &[IscedRow] {
        &self.rows
    }

    /// The label set for one level code.
    pub fn eio_labels_for(&self, code: i64) -> Result<&[String], IscedError> {
        if !(MIN_CODE as i64..=MAX_CODE as i64).contains(&code) {
            return Err(IscedError::OutOfRange(code));
        }
        let row = self
            .rows
            .iter()
            .find(|r| r.code as i64 == code)
            .expect("parser guarantees all codes present");
        Ok(&row.labels)
    }

    /// Every level whose label set contains `label` (after normalization).
    pub fn levels_for(&self, label: &str) -> Result<BTreeSet<u8>, IscedError> {
        let norm = normalize_label(label);
        let codes: BTreeSet<u8> = self
            .rows
            .iter()
            .filter(|r| r.labels.iter().any(|l| normalize_label(l) == norm))
            .map(|r| r.code)
            .collect();
        if codes.is_empty() {
            return Err(IscedError::UnknownLabel(label.to_string()));
        }
        Ok(codes)
    }

    /// Checks that every mapped label resolves (as a label or synonym)
    /// against the schema.
    pub fn bind(&self, kb: &KnowledgeBase) -> Result<(), IscedError> {
        for row in &self.rows {
            for label in &row.labels {
                if kb.resolve_label(label).is_none() {
                    return Err(IscedError::UnboundLabel(label.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Parses an ISCED map file.  Levels 0–8 must each appear exactly once.
pub fn parse(text: &str) -> Result<IscedMapping, SyntaxError> {
    let mut rows: Vec<IscedRow> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| SyntaxError::new(line_no, 1, msg);
        let rest = line
            .strip_prefix("level ")
            .ok_or_else(|| err("expected `level <code> :: \"<term>\" :: <labels>`".into()))?;
        let (code_token, rest) = rest
            .trim()
            .split_once("::")
            .ok_or_else(|| err("expected `::` after the level code".into()))?;
        let code: i64 = code_token
            .trim()
            .parse()
            .map_err(|_| err(format!("bad level code `{}`", code_token.trim())))?;
        if !(MIN_CODE as i64..=MAX_CODE as i64).contains(&code) {
            return Err(err(format!("level code {code} is outside 0..=8")));
        }
        let code = code as u8;
        if rows.iter().any(|r| r.code == code) {
            return Err(err(format!("level {code} appears twice")));
        }
        let rest = rest.trim_start();
        let tail = rest
            .strip_prefix('"')
            .ok_or_else(|| err("expected a quoted UNESCO term".into()))?;
        let close = tail
            .find('"')
            .ok_or_else(|| err("unterminated UNESCO term".into()))?;
        let unesco_term = tail[..close].to_string();
        let after = tail[close + 1..].trim_start();
        let labels_part = after
            .strip_prefix("::")
            .ok_or_else(|| err("expected `::` before the label list".into()))?;
        let mut labels = Vec::new();
        for label in labels_part.split(';') {
            let label = label.trim();
            if label.is_empty() {
                return Err(err("empty label in label list".into()));
            }
            labels.push(label.to_string());
        }
        rows.push(IscedRow {
            code,
            unesco_term,
            labels,
        });
    }
    let missing: Vec<String> = (MIN_CODE..=MAX_CODE)
        .filter(|c| !rows.iter().any(|r| r.code == *c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        let last_line = text.lines().count().max(1);
        return Err(SyntaxError::new(
            last_line,
            1,
            format!("missing ISCED level(s): {}", missing.join(", ")),
        ));
    }
    rows.sort_by_key(|r| r.code);
    Ok(IscedMapping { rows })
}
