//! Consistency, conciseness, and completeness checking.
//!
//! The pitfall scan walks a frozen snapshot and emits [`Finding`]s at three
//! severities.  **Errors** make the knowledge base unusable: taxonomy cycles,
//! concepts with several parents, dangling references, typings to unknown or
//! obsolete classes, relation assertions that contradict declared domains,
//! ranges, or cardinalities, relators that fail to connect two concepts,
//! roles without a material relation, duplicated labels, and concepts with no
//! gloss.  **Warnings** flag sloppiness that still loads: redundant
//! subclass edges, copy-pasted glosses, compound labels that restate a facet
//! value, and undescribed facet values.  **Info** findings note missing
//! provenance.
//!
//! Completeness is judged against *competency questions*: named queries with
//! an expected outcome, either `nonempty` or an exact row listing.  A
//! snapshot is considered sound when it has zero errors and every question
//! passes; warnings and infos never gate.
//!
//! Findings sort by severity, rule, subject, and message, so reports are
//! byte-deterministic for a given snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::SyntaxError;
use crate::kb::{
    Cardinality, ConceptId, EntityId, KnowledgeBase, Object, RelationKind, Snapshot, Stereotype,
    RDF_TYPE,
};
use crate::{ingest, isced, ntriples, outline, query};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub rule: String,
    pub subject: String,
    pub message: String,
}

impl Finding {
    fn new(
        severity: Severity,
        rule: &str,
        subject: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Finding {
            severity,
            rule: rule.to_string(),
            subject: subject.into(),
            message: message.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Consistency (errors)

fn label_of(kb: &KnowledgeBase, id: &ConceptId) -> String {
    kb.concept(id)
        .map(|c| c.preferred_label.clone())
        .unwrap_or_else(|| id.as_str().to_string())
}

/// ABox typings per entity, restricted to objects that resolve to concepts.
fn typings(kb: &KnowledgeBase) -> BTreeMap<EntityId, BTreeSet<ConceptId>> {
    let mut out: BTreeMap<EntityId, BTreeSet<ConceptId>> = BTreeMap::new();
    for t in kb.abox() {
        if t.predicate != RDF_TYPE {
            continue;
        }
        if let Object::Entity(class) = &t.object {
            if let Some(c) = kb.concept_of_iri(class.as_str()) {
                out.entry(t.subject.clone()).or_default().insert(c);
            }
        }
    }
    out
}

fn closure(kb: &KnowledgeBase, root: &ConceptId) -> BTreeSet<ConceptId> {
    kb.descendants_with_self(root).into_iter().collect()
}

fn concept_index(kb: &KnowledgeBase, id: &ConceptId) -> usize {
    kb.concepts().get_index_of(id).unwrap_or(usize::MAX)
}

fn find_cycles(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    // Tarjan-free approach: repeatedly peel nodes with no in-component
    // parent.  What survives is the union of all cycles.
    let ids: BTreeSet<ConceptId> = kb.concepts().values().map(|c| c.id.clone()).collect();
    let mut remaining: BTreeSet<ConceptId> = ids.clone();
    loop {
        let peel: Vec<ConceptId> = remaining
            .iter()
            .filter(|c| {
                !kb.isa_edges()
                    .iter()
                    .any(|(child, parent)| child == *c && remaining.contains(parent))
            })
            .cloned()
            .collect();
        if peel.is_empty() {
            break;
        }
        for c in peel {
            remaining.remove(&c);
        }
    }
    // Group survivors into connected components over the isa edges.
    let mut seen: BTreeSet<ConceptId> = BTreeSet::new();
    for start in &remaining {
        if seen.contains(start) {
            continue;
        }
        let mut component = BTreeSet::new();
        let mut stack = vec![start.clone()];
        while let Some(c) = stack.pop() {
            if !component.insert(c.clone()) {
                continue;
            }
            for (child, parent) in kb.isa_edges() {
                if child == &c && remaining.contains(parent) && !component.contains(parent) {
                    stack.push(parent.clone());
                }
                if parent == &c && remaining.contains(child) && !component.contains(child) {
                    stack.push(child.clone());
                }
            }
        }
        seen.extend(component.iter().cloned());
        let mut members: Vec<&ConceptId> = component.iter().collect();
        members.sort_by_key(|c| concept_index(kb, c));
        let labels: Vec<String> = members.iter().map(|c| label_of(kb, c)).collect();
        findings.push(Finding::new(
            Severity::Error,
            "isa-cycle",
            labels[0].clone(),
            format!("subclass cycle through: {}", labels.join(", ")),
        ));
    }
}

fn find_multiple_parents(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for concept in kb.concepts().values() {
        let parents: Vec<&ConceptId> = kb.parents_of(&concept.id).collect();
        if parents.len() > 1 {
            let labels: Vec<String> = parents.iter().map(|p| label_of(kb, p)).collect();
            findings.push(Finding::new(
                Severity::Error,
                "multiple-parents",
                concept.preferred_label.clone(),
                format!("has {} parents: {}", parents.len(), labels.join(", ")),
            ));
        }
    }
}

fn find_dangling(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    let exists = |c: &ConceptId| kb.concept(c).is_some();
    for (child, parent) in kb.isa_edges() {
        for (end, role) in [(child, "child"), (parent, "parent")] {
            if !exists(end) {
                findings.push(Finding::new(
                    Severity::Error,
                    "dangling-reference",
                    format!("{} -> {}", label_of(kb, child), label_of(kb, parent)),
                    format!("subclass edge {role} names a concept that does not exist"),
                ));
            }
        }
    }
    for facet in kb.attribute_facets() {
        if !exists(&facet.attached_to) {
            findings.push(Finding::new(
                Severity::Error,
                "dangling-reference",
                facet.name.clone(),
                "facet is attached to a concept that does not exist",
            ));
        }
    }
    for decl in kb.relation_decls() {
        for (end, role) in [
            (Some(&decl.domain), "domain"),
            (Some(&decl.range), "range"),
            (decl.via_relator.as_ref(), "relator"),
        ] {
            if let Some(c) = end {
                if !exists(c) {
                    findings.push(Finding::new(
                        Severity::Error,
                        "dangling-reference",
                        decl.name.clone(),
                        format!("relation {role} names a concept that does not exist"),
                    ));
                }
            }
        }
    }
}

fn find_bad_typings(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for t in kb.abox() {
        if t.predicate != RDF_TYPE {
            continue;
        }
        let Object::Entity(class) = &t.object else {
            continue;
        };
        match kb.concept_of_iri(class.as_str()) {
            None => findings.push(Finding::new(
                Severity::Error,
                "unknown-class-typing",
                kb.display_iri(t.subject.as_str()),
                format!("typed to `{}`, which is not a class", class.as_str()),
            )),
            Some(c) => {
                if kb.concept(&c).map(|c| c.obsolete).unwrap_or(false) {
                    findings.push(Finding::new(
                        Severity::Error,
                        "obsolete-class-typing",
                        kb.display_iri(t.subject.as_str()),
                        format!("typed to obsolete class `{}`", label_of(kb, &c)),
                    ));
                }
            }
        }
    }
}

fn find_domain_range_conflicts(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    let typed = typings(kb);
    let check_end = |entity: &EntityId,
                     required: &ConceptId,
                     what: &str,
                     name: &str,
                     findings: &mut Vec<Finding>| {
        let Some(types) = typed.get(entity) else {
            return; // untyped: incomplete, not inconsistent
        };
        if kb.concept(required).is_none() {
            return; // reported as dangling-reference instead
        }
        let allowed = closure(kb, required);
        if types.is_disjoint(&allowed) {
            findings.push(Finding::new(
                Severity::Error,
                "domain-range-conflict",
                kb.display_iri(entity.as_str()),
                format!(
                    "{what} of `{name}` must be a `{}`, but it is typed {}",
                    label_of(kb, required),
                    types
                        .iter()
                        .map(|c| format!("`{}`", label_of(kb, c)))
                        .collect::<Vec<_>>()
                        .join(", "),
                ),
            ));
        }
    };
    for decl in kb.relation_decls() {
        let iri = kb.predicate_iri(&decl.name);
        for t in kb.abox().iter().filter(|t| t.predicate == iri) {
            check_end(&t.subject, &decl.domain, "subject", &decl.name, findings);
            if let Object::Entity(obj) = &t.object {
                check_end(obj, &decl.range, "object", &decl.name, findings);
            }
        }
    }
    for facet in kb.attribute_facets() {
        let iri = kb.predicate_iri(&facet.name);
        for t in kb.abox().iter().filter(|t| t.predicate == iri) {
            check_end(&t.subject, &facet.attached_to, "bearer", &facet.name, findings);
        }
    }
}

fn find_relator_arity(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for concept in kb.concepts().values() {
        if concept.stereotype != Stereotype::Relator || concept.obsolete {
            continue;
        }
        let endpoints: BTreeSet<&ConceptId> = kb
            .relation_decls()
            .iter()
            .filter(|d| d.kind == RelationKind::Material && d.via_relator.as_ref() == Some(&concept.id))
            .flat_map(|d| [&d.domain, &d.range])
            .collect();
        if endpoints.len() < 2 {
            findings.push(Finding::new(
                Severity::Error,
                "relator-arity",
                concept.preferred_label.clone(),
                format!(
                    "relator mediates {} distinct concept(s); it must connect at least two",
                    endpoints.len()
                ),
            ));
        }
    }
}

fn find_lonely_roles(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for concept in kb.concepts().values() {
        if concept.stereotype != Stereotype::Role || concept.obsolete {
            continue;
        }
        let used = kb.relation_decls().iter().any(|d| {
            d.kind == RelationKind::Material
                && (d.domain == concept.id || d.range == concept.id)
        });
        if !used {
            findings.push(Finding::new(
                Severity::Error,
                "role-without-material-relation",
                concept.preferred_label.clone(),
                "a role must take part in at least one material relation",
            ));
        }
    }
}

fn find_cardinality_violations(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    let typed = typings(kb);
    for decl in kb.relation_decls() {
        let iri = kb.predicate_iri(&decl.name);
        let triples: Vec<_> = kb.abox().iter().filter(|t| t.predicate == iri).collect();

        // (constraint, counted-per, group key -> distinct far ends)
        let sides: [(&Option<Cardinality>, &ConceptId, bool); 2] = [
            (&decl.domain_card, &decl.domain, true),
            (&decl.range_card, &decl.range, false),
        ];
        for (card, participant, per_subject) in sides {
            let Some(card) = card else { continue };
            let mut counts: BTreeMap<EntityId, BTreeSet<String>> = BTreeMap::new();
            for t in &triples {
                let (key, far) = if per_subject {
                    let far = match &t.object {
                        Object::Entity(e) => e.as_str().to_string(),
                        Object::Literal(l) => l.lexical_form.clone(),
                    };
                    (t.subject.clone(), far)
                } else {
                    let Object::Entity(obj) = &t.object else { continue };
                    (obj.clone(), t.subject.as_str().to_string())
                };
                counts.entry(key).or_default().insert(far);
            }
            if let Some(max) = card.max {
                for (entity, fars) in &counts {
                    if fars.len() as u32 > max {
                        findings.push(Finding::new(
                            Severity::Error,
                            "cardinality",
                            kb.display_iri(entity.as_str()),
                            format!(
                                "takes part in `{}` {} times; at most {max} allowed",
                                decl.name,
                                fars.len()
                            ),
                        ));
                    }
                }
            }
            if card.min > 0 {
                if kb.concept(participant).is_none() {
                    continue;
                }
                let allowed = closure(kb, participant);
                for (entity, types) in &typed {
                    if types.is_disjoint(&allowed) {
                        continue;
                    }
                    let n = counts.get(entity).map(|s| s.len() as u32).unwrap_or(0);
                    if n < card.min {
                        findings.push(Finding::new(
                            Severity::Error,
                            "cardinality",
                            kb.display_iri(entity.as_str()),
                            format!(
                                "takes part in `{}` {n} times; at least {} required",
                                decl.name, card.min
                            ),
                        ));
                    }
                }
            }
        }
    }
}

fn find_duplicate_labels(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    // Normalized label -> descriptions of its holders.
    let mut holders: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for concept in kb.concepts().values() {
        let norm = crate::kb::normalize_label(&concept.preferred_label);
        holders
            .entry(norm)
            .or_default()
            .push(format!("concept `{}`", concept.preferred_label));
        for syn in &concept.synonyms {
            holders
                .entry(crate::kb::normalize_label(syn))
                .or_default()
                .push(format!("synonym of `{}`", concept.preferred_label));
        }
    }
    for facet in kb.attribute_facets() {
        for value in &facet.values {
            holders
                .entry(crate::kb::normalize_label(&value.label))
                .or_default()
                .push(format!("value of facet `{}`", facet.name));
            for syn in &value.synonyms {
                holders
                    .entry(crate::kb::normalize_label(syn))
                    .or_default()
                    .push(format!("value synonym in facet `{}`", facet.name));
            }
        }
    }
    for (norm, who) in holders {
        if who.len() > 1 {
            findings.push(Finding::new(
                Severity::Error,
                "duplicate-label",
                norm,
                format!("borne by: {}", who.join(", ")),
            ));
        }
    }
}

fn find_missing_annotations(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for concept in kb.concepts().values() {
        if !concept.obsolete && concept.gloss.trim().is_empty() {
            findings.push(Finding::new(
                Severity::Error,
                "missing-annotation",
                concept.preferred_label.clone(),
                "concept has no gloss",
            ));
        }
    }
}

/// All error-severity checks.
pub fn check_consistency(snap: &Snapshot) -> Vec<Finding> {
    let kb = snap.kb();
    let mut findings = Vec::new();
    find_cycles(kb, &mut findings);
    find_multiple_parents(kb, &mut findings);
    find_dangling(kb, &mut findings);
    find_bad_typings(kb, &mut findings);
    find_domain_range_conflicts(kb, &mut findings);
    find_relator_arity(kb, &mut findings);
    find_lonely_roles(kb, &mut findings);
    find_cardinality_violations(kb, &mut findings);
    find_duplicate_labels(kb, &mut findings);
    find_missing_annotations(kb, &mut findings);
    findings.sort();
    findings.dedup();
    findings
}

// ---------------------------------------------------------------------------
// Conciseness (warnings + info)

fn find_redundant_isa(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for (child, parent) in kb.isa_edges() {
        // Redundant when the parent is reachable from the child through some
        // other parent, i.e. the direct edge repeats what transitivity gives.
        let through_another = kb.parents_of(child).filter(|q| *q != parent).any(|q| {
            kb.ancestors(q)
                .map(|a| a.contains(parent))
                .unwrap_or(false)
        });
        if through_another {
            findings.push(Finding::new(
                Severity::Warning,
                "redundant-isa",
                label_of(kb, child),
                format!(
                    "direct subclass edge to `{}` is implied by another parent",
                    label_of(kb, parent)
                ),
            ));
        }
    }
}

fn find_duplicate_glosses(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    let mut by_gloss: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for concept in kb.concepts().values() {
        let gloss = concept.gloss.trim();
        if !gloss.is_empty() && !concept.obsolete {
            by_gloss.entry(gloss).or_default().push(&concept.preferred_label);
        }
    }
    for (gloss, labels) in by_gloss {
        if labels.len() > 1 {
            let mut labels = labels;
            labels.sort();
            findings.push(Finding::new(
                Severity::Warning,
                "duplicate-gloss",
                labels[0].to_string(),
                format!(
                    "gloss {:?} is shared by: {}",
                    crate::kb::normalize_label(gloss),
                    labels.join(", ")
                ),
            ));
        }
    }
}

fn find_complex_concepts(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for concept in kb.concepts().values() {
        if concept.obsolete {
            continue;
        }
        let norm = crate::kb::normalize_label(&concept.preferred_label);
        for facet in kb.attribute_facets() {
            for value in &facet.values {
                let prefix = format!("{} ", crate::kb::normalize_label(&value.label));
                let Some(rest) = norm.strip_prefix(&prefix) else {
                    continue;
                };
                let Some(base) = kb.resolve_label(rest) else {
                    continue;
                };
                if base == concept.id {
                    continue;
                }
                findings.push(Finding::new(
                    Severity::Warning,
                    "complex-concept",
                    concept.preferred_label.clone(),
                    format!(
                        "label combines value `{}` of facet `{}` with `{}`; consider the facet instead",
                        value.label,
                        facet.name,
                        label_of(kb, &base)
                    ),
                ));
            }
        }
    }
}

fn find_value_annotations(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for facet in kb.attribute_facets() {
        for value in &facet.values {
            if value.gloss.trim().is_empty() {
                findings.push(Finding::new(
                    Severity::Warning,
                    "value-missing-annotation",
                    format!("{}:{}", facet.name, value.label),
                    "facet value has no gloss",
                ));
            }
        }
    }
}

fn find_missing_provenance(kb: &KnowledgeBase, findings: &mut Vec<Finding>) {
    for concept in kb.concepts().values() {
        if !concept.obsolete && concept.provenance.trim().is_empty() {
            findings.push(Finding::new(
                Severity::Info,
                "missing-provenance",
                concept.preferred_label.clone(),
                "concept has no provenance note",
            ));
        }
    }
}

/// All warning- and info-severity checks.
pub fn check_conciseness(snap: &Snapshot) -> Vec<Finding> {
    let kb = snap.kb();
    let mut findings = Vec::new();
    find_redundant_isa(kb, &mut findings);
    find_duplicate_glosses(kb, &mut findings);
    find_complex_concepts(kb, &mut findings);
    find_value_annotations(kb, &mut findings);
    find_missing_provenance(kb, &mut findings);
    findings.sort();
    findings.dedup();
    findings
}

/// Runs every check and returns the merged, sorted findings.
pub fn run_pitfall_scan(snap: &Snapshot) -> Vec<Finding> {
    let mut findings = check_consistency(snap);
    findings.extend(check_conciseness(snap));
    findings.sort();
    findings.dedup();
    findings
}

// ---------------------------------------------------------------------------
// Competency questions

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    NonEmpty,
    Rows(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompetencyQuestion {
    pub name: String,
    pub expect: Expectation,
    pub query_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompetencyOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Parses a competency-question file:
///
/// ```text
/// @question enrolled-anywhere
/// @expect nonempty
/// @query
/// PREFIX ...
/// SELECT ...
///
/// @question who-presides
/// @expect rows
/// Maria\tEUA
/// @query
/// ...
/// ```
///
/// Expected rows are tab-separated and must be listed in the engine's sorted
/// order.
pub fn parse_questions(text: &str) -> Result<Vec<CompetencyQuestion>, SyntaxError> {
    let mut questions: Vec<CompetencyQuestion> = Vec::new();
    let mut name: Option<String> = None;
    let mut expect: Option<Expectation> = None;
    let mut in_query = false;
    let mut query_lines: Vec<&str> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();

    let finish = |name: &mut Option<String>,
                      expect: &mut Option<Expectation>,
                      query_lines: &mut Vec<&str>,
                      lineno: usize,
                      questions: &mut Vec<CompetencyQuestion>|
     -> Result<(), SyntaxError> {
        let Some(n) = name.take() else { return Ok(()) };
        let Some(e) = expect.take() else {
            return Err(SyntaxError::new(lineno, 1, format!("question `{n}` has no @expect")));
        };
        let q = query_lines.join("\n");
        query_lines.clear();
        if q.trim().is_empty() {
            return Err(SyntaxError::new(lineno, 1, format!("question `{n}` has no @query")));
        }
        questions.push(CompetencyQuestion {
            name: n,
            expect: e,
            query_text: q.trim_end().to_string(),
        });
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end();
        if let Some(rest) = line.trim().strip_prefix("@question") {
            finish(&mut name, &mut expect, &mut query_lines, lineno, &mut questions)?;
            in_query = false;
            let n = rest.trim();
            if n.is_empty() {
                return Err(SyntaxError::new(lineno, 1, "@question needs a name"));
            }
            if !seen.insert(n.to_string()) {
                return Err(SyntaxError::new(lineno, 1, format!("duplicate question `{n}`")));
            }
            name = Some(n.to_string());
            continue;
        }
        if in_query {
            query_lines.push(line);
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if name.is_none() {
            return Err(SyntaxError::new(lineno, 1, "expected `@question`"));
        }
        if let Some(rest) = trimmed.strip_prefix("@expect") {
            if expect.is_some() {
                return Err(SyntaxError::new(lineno, 1, "duplicate @expect"));
            }
            match rest.trim() {
                "nonempty" => expect = Some(Expectation::NonEmpty),
                "rows" => expect = Some(Expectation::Rows(Vec::new())),
                other => {
                    return Err(SyntaxError::new(
                        lineno,
                        1,
                        format!("@expect must be `nonempty` or `rows`, not `{other}`"),
                    ))
                }
            }
            continue;
        }
        if trimmed == "@query" {
            if expect.is_none() {
                return Err(SyntaxError::new(lineno, 1, "@query before @expect"));
            }
            in_query = true;
            continue;
        }
        match &mut expect {
            Some(Expectation::Rows(rows)) => {
                rows.push(line.trim().split('\t').map(str::to_string).collect());
            }
            Some(Expectation::NonEmpty) => {
                return Err(SyntaxError::new(
                    lineno,
                    1,
                    "unexpected row line under `@expect nonempty`",
                ))
            }
            None => return Err(SyntaxError::new(lineno, 1, "expected `@expect`")),
        }
    }
    let last = text.lines().count();
    finish(&mut name, &mut expect, &mut query_lines, last, &mut questions)?;
    if questions.is_empty() {
        return Err(SyntaxError::new(1, 1, "no questions in file"));
    }
    Ok(questions)
}

/// Evaluates each question against the snapshot.
pub fn check_completeness(
    snap: &Snapshot,
    questions: &[CompetencyQuestion],
) -> Vec<CompetencyOutcome> {
    questions
        .iter()
        .map(|q| {
            let outcome = |passed: bool, detail: String| CompetencyOutcome {
                name: q.name.clone(),
                passed,
                detail,
            };
            let parsed = match query::parse(&q.query_text) {
                Ok(p) => p,
                Err(e) => return outcome(false, format!("query does not parse: {e}")),
            };
            let rows = match query::evaluate(snap, &parsed) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("query failed: {e}")),
            };
            let rendered = query::render_rows(snap, &parsed, &rows);
            match &q.expect {
                Expectation::NonEmpty => {
                    if rendered.is_empty() {
                        outcome(false, "expected at least one row, got none".to_string())
                    } else {
                        outcome(true, format!("{} row(s)", rendered.len()))
                    }
                }
                Expectation::Rows(want) => {
                    if &rendered == want {
                        outcome(true, format!("{} row(s) as expected", want.len()))
                    } else {
                        outcome(
                            false,
                            format!(
                                "expected {} row(s), got {}: {}",
                                want.len(),
                                rendered.len(),
                                rendered
                                    .iter()
                                    .map(|r| r.join(" | "))
                                    .collect::<Vec<_>>()
                                    .join("; "),
                            ),
                        )
                    }
                }
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportSummary {
    pub errors: usize,
    pub warnings: usize,
    pub infos: usize,
    pub questions_passed: usize,
    pub questions_total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub competency: Vec<CompetencyOutcome>,
    pub summary: ReportSummary,
}

impl ValidationReport {
    pub fn build(snap: &Snapshot, questions: &[CompetencyQuestion]) -> Self {
        let findings = run_pitfall_scan(snap);
        let competency = check_completeness(snap, questions);
        let count = |s: Severity| findings.iter().filter(|f| f.severity == s).count();
        let summary = ReportSummary {
            errors: count(Severity::Error),
            warnings: count(Severity::Warning),
            infos: count(Severity::Info),
            questions_passed: competency.iter().filter(|c| c.passed).count(),
            questions_total: competency.len(),
        };
        ValidationReport {
            findings,
            competency,
            summary,
        }
    }

    /// Zero errors and every question passed.
    pub fn is_clean(&self) -> bool {
        self.summary.errors == 0 && self.summary.questions_passed == self.summary.questions_total
    }

    /// Plain-text rendering, one line per finding, deterministic.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for f in &self.findings {
            out.push_str(&format!("{} {} {} :: {}\n", f.severity, f.rule, f.subject, f.message));
        }
        for c in &self.competency {
            if c.passed {
                out.push_str(&format!("question {} :: PASS\n", c.name));
            } else {
                out.push_str(&format!("question {} :: FAIL ({})\n", c.name, c.detail));
            }
        }
        out.push_str(&format!(
            "summary :: errors={} warnings={} infos={} questions={}/{}\n",
            self.summary.errors,
            self.summary.warnings,
            self.summary.infos,
            self.summary.questions_passed,
            self.summary.questions_total,
        ));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

// ---------------------------------------------------------------------------
// Syntax front door

/// The text formats the toolchain reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextFormat {
    Outline,
    NTriples,
    Query,
    Mapping,
    IscedTable,
}

/// Runs the relevant parser and reports the first syntax problem, if any.
pub fn verify_syntax(format: TextFormat, text: &str) -> Result<(), SyntaxError> {
    match format {
        TextFormat::Outline => outline::parse(text, outline::Mode::Lenient).map(|_| ()),
        TextFormat::NTriples => ntriples::parse(text).map(|_| ()),
        TextFormat::Query => query::parse(text).map(|_| ()).map_err(|e| match e {
            query::QueryError::Syntax { line, col, message } => SyntaxError::new(line, col, message),
            query::QueryError::UndeclaredPrefix { prefix, line, col } => {
                SyntaxError::new(line, col, format!("undeclared prefix `{prefix}`"))
            }
            other => SyntaxError::new(1, 1, other.to_string()),
        }),
        TextFormat::Mapping => ingest::parse_mapping(text).map(|_| ()),
        TextFormat::IscedTable => isced::parse(text).map(|_| ()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{DatatypeTag, Literal, RelationDecl, Triple};

    fn clean_kb() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        let ei = kb
            .add_concept("Educational Institution", "an organization that teaches", Stereotype::Kind, None)
            .unwrap();
        let school = kb
            .add_concept("School", "an institution for instruction", Stereotype::Subkind, Some(&ei))
            .unwrap();
        let person = kb.add_concept("Person", "a human being", Stereotype::Kind, None).unwrap();
        let student = kb
            .add_concept("Student", "a person who studies", Stereotype::Role, Some(&person))
            .unwrap();
        let enrolment = kb
            .add_concept("Enrolment", "the state of being enrolled", Stereotype::Relator, None)
            .unwrap();
        for id in [&ei, &school, &person, &student, &enrolment] {
            kb.set_provenance(id, "curated").unwrap();
        }
        kb.declare_relation(RelationDecl {
            name: "studiedIn".into(),
            kind: RelationKind::Material,
            domain: student.clone(),
            range: ei.clone(),
            via_relator: Some(enrolment),
            domain_card: None,
            range_card: None,
        })
        .unwrap();
        kb
    }

    fn rules_of(findings: &[Finding]) -> Vec<&str> {
        findings.iter().map(|f| f.rule.as_str()).collect()
    }

    #[test]
    fn clean_kb_yields_no_findings_at_all() {
        let snap = clean_kb().freeze();
        let findings = run_pitfall_scan(&snap);
        assert!(findings.is_empty(), "unexpected findings: {findings:?}");
    }

    #[test]
    fn cycles_and_multiple_parents_are_errors() {
        let mut kb = clean_kb();
        let a = kb.resolve_label("School").unwrap();
        let b = kb.resolve_label("Educational Institution").unwrap();
        kb.raw_insert_is_a(&b, &a); // closes the loop
        let findings = check_consistency(&kb.freeze());
        assert!(rules_of(&findings).contains(&"isa-cycle"));
        let cycles = findings.iter().filter(|f| f.rule == "isa-cycle").count();
        assert_eq!(cycles, 1, "one finding per cycle, not per member");

        let mut kb = clean_kb();
        let person = kb.resolve_label("Person").unwrap();
        let school = kb.resolve_label("School").unwrap();
        kb.raw_insert_is_a(&school, &person);
        let findings = check_consistency(&kb.freeze());
        assert!(rules_of(&findings).contains(&"multiple-parents"));
    }

    #[test]
    fn dangling_edges_are_reported() {
        let mut kb = clean_kb();
        let school = kb.resolve_label("School").unwrap();
        kb.raw_insert_is_a(&school, &ConceptId::placeholder());
        let findings = check_consistency(&kb.freeze());
        assert!(rules_of(&findings).contains(&"dangling-reference"));
    }

    #[test]
    fn bad_typings_are_reported() {
        let mut kb = clean_kb();
        let ns = kb.namespace().to_string();
        let ghost = Triple::new(
            EntityId::new(format!("{ns}waif")),
            RDF_TYPE,
            Object::Entity(EntityId::new(format!("{ns}Nonexistent_Class"))),
        );
        kb.import_triple(ghost).unwrap();
        let findings = check_consistency(&kb.freeze());
        assert!(rules_of(&findings).contains(&"unknown-class-typing"));

        let mut kb = clean_kb();
        let school = kb.resolve_label("School").unwrap();
        let iri = kb.class_iri(&school).unwrap();
        let e = EntityId::new(format!("{ns}victim"));
        kb.register_entity(e.clone());
        kb.assert_triple(Triple::new(e, RDF_TYPE, Object::Entity(EntityId::new(iri))))
            .unwrap();
        kb.mark_obsolete(&school).unwrap();
        let findings = check_consistency(&kb.freeze());
        assert!(rules_of(&findings).contains(&"obsolete-class-typing"));
    }

    #[test]
    fn domain_conflicts_respect_subsumption() {
        let mut kb = clean_kb();
        let ns = kb.namespace().to_string();
        let school_iri = kb.predicate_iri("School"); // class IRI happens to match shape
        let _ = school_iri;
        let student = kb.resolve_label("Student").unwrap();
        let school = kb.resolve_label("School").unwrap();

        let pat = EntityId::new(format!("{ns}pat"));
        kb.register_entity(pat.clone());
        let student_iri = kb.class_iri(&student).unwrap();
        kb.assert_triple(Triple::new(pat.clone(), RDF_TYPE, Object::Entity(EntityId::new(student_iri))))
            .unwrap();
        let riverside = EntityId::new(format!("{ns}riverside"));
        kb.register_entity(riverside.clone());
        // Typed to School, a *descendant* of the declared range: fine.
        let school_class = kb.class_iri(&school).unwrap();
        kb.assert_triple(Triple::new(
            riverside.clone(),
            RDF_TYPE,
            Object::Entity(EntityId::new(school_class)),
        ))
        .unwrap();
        kb.assert_triple(Triple::new(
            pat.clone(),
            format!("{ns}studiedIn"),
            Object::Entity(riverside.clone()),
        ))
        .unwrap();
        assert!(
            check_consistency(&kb.freeze()).is_empty(),
            "descendant typing satisfies the range"
        );

        // Now type the subject outside the domain closure.
        let rogue = EntityId::new(format!("{ns}rogue"));
        kb.register_entity(rogue.clone());
        let school_class = kb.class_iri(&school).unwrap();
        kb.assert_triple(Triple::new(
            rogue.clone(),
            RDF_TYPE,
            Object::Entity(EntityId::new(school_class)),
        ))
        .unwrap();
        kb.assert_triple(Triple::new(
            rogue,
            format!("{ns}studiedIn"),
            Object::Entity(riverside),
        ))
        .unwrap();
        let findings = check_consistency(&kb.freeze());
        let conflict: Vec<_> = findings
            .iter()
            .filter(|f| f.rule == "domain-range-conflict")
            .collect();
        assert_eq!(conflict.len(), 1);
        assert_eq!(conflict[0].subject, "rogue");
        assert!(conflict[0].message.contains("studiedIn"));
    }

    #[test]
    fn relator_and_role_rules() {
        let mut kb = clean_kb();
        kb.add_concept("Marriage", "a marital bond", Stereotype::Relator, None).unwrap();
        let findings = check_consistency(&kb.freeze());
        let arity: Vec<_> = findings.iter().filter(|f| f.rule == "relator-arity").collect();
        assert_eq!(arity.len(), 1);
        assert_eq!(arity[0].subject, "Marriage");

        let mut kb = clean_kb();
        let person = kb.resolve_label("Person").unwrap();
        kb.add_concept("Alumnus", "a former student", Stereotype::Role, Some(&person)).unwrap();
        let findings = check_consistency(&kb.freeze());
        assert!(rules_of(&findings).contains(&"role-without-material-relation"));
    }

    #[test]
    fn cardinality_max_is_enforced_per_participant() {
        let mut kb = clean_kb();
        let school = kb.resolve_label("School").unwrap();
        let ei = kb.resolve_label("Educational Institution").unwrap();
        kb.declare_relation(RelationDecl {
            name: "partOf".into(),
            kind: RelationKind::Partitive,
            domain: school.clone(),
            range: ei.clone(),
            via_relator: None,
            domain_card: Some(Cardinality { min: 0, max: Some(1) }),
            range_card: None,
        })
        .unwrap();
        let ns = kb.namespace().to_string();
        let annex = EntityId::new(format!("{ns}annex"));
        kb.register_entity(annex.clone());
        for host in ["north", "south"] {
            kb.assert_triple(Triple::new(
                annex.clone(),
                format!("{ns}partOf"),
                Object::Entity(EntityId::new(format!("{ns}{host}"))),
            ))
            .unwrap();
        }
        let findings = check_consistency(&kb.freeze());
        let card: Vec<_> = findings.iter().filter(|f| f.rule == "cardinality").collect();
        assert_eq!(card.len(), 1);
        assert_eq!(card[0].subject, "annex");
        assert!(card[0].message.contains("at most 1"));
    }

    #[test]
    fn duplicate_labels_group_by_normalized_form() {
        let mut kb = clean_kb();
        kb.raw_concept("school", "another one", Stereotype::Kind);
        let findings = check_consistency(&kb.freeze());
        let dups: Vec<_> = findings.iter().filter(|f| f.rule == "duplicate-label").collect();
        assert_eq!(dups.len(), 1);
        assert_eq!(dups[0].subject, "school");
        assert!(dups[0].message.contains("concept `School`"));
        assert!(dups[0].message.contains("concept `school`"));
    }

    #[test]
    fn missing_gloss_is_an_error_and_missing_provenance_is_info() {
        let mut kb = clean_kb();
        let id = kb.raw_concept("Mystery", "", Stereotype::Kind);
        let _ = id;
        let report = ValidationReport::build(&kb.freeze(), &[]);
        assert_eq!(report.summary.errors, 1);
        assert_eq!(report.summary.infos, 1, "no provenance on Mystery");
        assert!(report.findings.iter().any(|f| f.rule == "missing-annotation"));
        assert!(report.findings.iter().any(|f| f.rule == "missing-provenance"));
    }

    #[test]
    fn warning_rules_fire() {
        let mut kb = clean_kb();
        // Redundant edge: Student -> Person is direct; give Student a second
        // path via a raw duplicate of the hierarchy.
        let person = kb.resolve_label("Person").unwrap();
        let student = kb.resolve_label("Student").unwrap();
        let adult = kb.raw_concept("Adult", "a grown person", Stereotype::Subkind);
        kb.raw_insert_is_a(&adult, &person);
        kb.raw_insert_is_a(&student, &adult);
        // Student now has parents {Person, Adult}; Adult -> Person makes the
        // direct Student -> Person edge redundant.
        let findings = check_conciseness(&kb.freeze());
        let redundant: Vec<_> = findings.iter().filter(|f| f.rule == "redundant-isa").collect();
        assert_eq!(redundant.len(), 1);
        assert_eq!(redundant[0].subject, "Student");

        // Duplicate gloss.
        let mut kb = clean_kb();
        kb.raw_concept("Copycat", "a human being", Stereotype::Kind);
        let findings = check_conciseness(&kb.freeze());
        assert!(findings.iter().any(|f| f.rule == "duplicate-gloss"
            && f.message.contains("Copycat")
            && f.message.contains("Person")));

        // Complex concept + value without gloss.
        let mut kb = clean_kb();
        let school = kb.resolve_label("School").unwrap();
        kb.add_attribute_value(
            "fundingPolicy",
            &school,
            crate::kb::AttributeValue {
                label: "public".into(),
                gloss: String::new(),
                synonyms: Vec::new(),
            },
        )
        .unwrap();
        kb.raw_concept("Public school", "a school for everyone", Stereotype::Subkind);
        let findings = check_conciseness(&kb.freeze());
        let complex: Vec<_> = findings.iter().filter(|f| f.rule == "complex-concept").collect();
        assert_eq!(complex.len(), 1);
        assert_eq!(complex[0].subject, "Public school");
        assert!(complex[0].message.contains("fundingPolicy"));
        assert!(findings.iter().any(|f| f.rule == "value-missing-annotation"
            && f.subject == "fundingPolicy:public"));
    }

    #[test]
    fn reports_are_deterministic_and_monotone() {
        let mut kb = clean_kb();
        kb.raw_concept("school", "", Stereotype::Kind);
        let snap = kb.freeze();
        let a = ValidationReport::build(&snap, &[]).render();
        let b = ValidationReport::build(&snap, &[]).render();
        assert_eq!(a, b);

        let before = run_pitfall_scan(&snap);
        let mut worse = kb.clone();
        worse.raw_concept("Mystery", "", Stereotype::Kind);
        let after = run_pitfall_scan(&worse.freeze());
        for f in &before {
            assert!(after.contains(f), "finding disappeared when the KB got worse: {f:?}");
        }
        assert!(after.len() > before.len());
    }

    #[test]
    fn report_renders_serializes_and_gates() {
        let mut kb = clean_kb();
        let ns = kb.namespace().to_string();
        kb.declare_data_property("note", DatatypeTag::String).unwrap();
        let e = EntityId::new(format!("{ns}thing"));
        kb.register_entity(e.clone());
        kb.assert_triple(Triple::new(
            e,
            format!("{ns}note"),
            Object::Literal(Literal::string("x")),
        ))
        .unwrap();
        let questions = parse_questions(
            "@question everyone\n@expect nonempty\n@query\nSELECT ?s WHERE { ?s ?p ?o }\n\n\
             @question precise\n@expect rows\nthing\tx\n@query\nPREFIX EI: <http://www.semanticweb.org/ontologies/2013/12/ontology.owl#>\nSELECT ?s ?v WHERE { ?s EI:note ?v }\n",
        )
        .unwrap();
        assert_eq!(questions.len(), 2);
        let snap = kb.freeze();
        let report = ValidationReport::build(&snap, &questions);
        assert!(report.is_clean(), "{}", report.render());
        let text = report.render();
        assert!(text.contains("question everyone :: PASS"));
        assert!(text.contains("question precise :: PASS"));
        assert!(text.ends_with("questions=2/2\n"));

        let parsed: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(parsed["summary"]["questions_passed"], 2);

        // A failing expectation gates the report.
        let bad = parse_questions(
            "@question wrong\n@expect rows\nnobody\tnothing\n@query\nSELECT ?s WHERE { ?s ?p ?o }\n",
        )
        .unwrap();
        let report = ValidationReport::build(&snap, &bad);
        assert!(!report.is_clean());
        assert!(report.render().contains("FAIL"));
    }

    #[test]
    fn question_files_are_validated() {
        assert!(parse_questions("").is_err(), "empty file");
        assert!(
            parse_questions("@question a\n@query\nSELECT ?x WHERE { ?x ?p ?o }\n").is_err(),
            "missing @expect"
        );
        assert!(
            parse_questions("@question a\n@expect nonempty\n").is_err(),
            "missing @query"
        );
        assert!(
            parse_questions("@question a\n@expect maybe\n@query\nx\n").is_err(),
            "bad expectation"
        );
        assert!(
            parse_questions(
                "@question a\n@expect nonempty\n@query\nq\n@question a\n@expect nonempty\n@query\nq\n"
            )
            .is_err(),
            "duplicate name"
        );
    }

    #[test]
    fn syntax_front_door_dispatches() {
        assert!(verify_syntax(TextFormat::NTriples, "<a> <b> <c> .\n").is_ok());
        assert!(verify_syntax(TextFormat::NTriples, "<a> <b> .\n").is_err());
        assert!(verify_syntax(TextFormat::Outline, "Thing :: a thing {kind}\n").is_ok());
        assert!(verify_syntax(TextFormat::Outline, "\tThing :: x\n").is_err());
        assert!(verify_syntax(TextFormat::Query, "SELECT ?x WHERE { ?x ?p ?o }").is_ok());
        assert!(verify_syntax(TextFormat::Query, "SELECT WHERE { }").is_err());
        assert!(verify_syntax(
            TextFormat::Mapping,
            "source \"s\"\nkey \"K\"\ndefault-class \"C\"\n"
        )
        .is_ok());
        assert!(verify_syntax(TextFormat::Mapping, "nonsense\n").is_err());
    }
}
