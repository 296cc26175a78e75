//! Schema refactoring: concept merges, demotion of concepts to attribute
//! values, deletion of individuals masquerading as classes, and obsoletion.
//!
//! Every operation either applies completely or leaves the knowledge base
//! untouched — preconditions are checked before the first mutation.
//! [`apply_script`] journals each applied action with before/after state
//! digests so that a run is auditable and reproducible.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::SyntaxError;
use crate::kb::{
    normalize_label, AttributeValue, ConceptId, EntityId, KbError, KnowledgeBase, Object, Triple,
    RDF_TYPE,
};
use crate::{ntriples, outline};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefactorError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("a concept cannot absorb itself")]
    SelfMerge,
    #[error("polysemy candidates tie on rank {0}")]
    RankTie(i64),
    #[error("candidates do not share a normalized label")]
    NotPolysemous,
    #[error("merge would give `{0}` more than one parent")]
    WouldViolateSingleParent(String),
    #[error("merge would close an is-a cycle through `{0}`")]
    WouldCreateCycle(String),
    #[error("`{0}` still has children")]
    HasChildren(String),
    #[error("facet `{1}` already carries value `{0}`")]
    DuplicateValue(String, String),
    #[error("value `{0}` clashes with an existing concept label")]
    ValueClashesWithConcept(String),
    #[error("`{concept}` is referenced by {referenced_by} and cannot be removed")]
    ConceptInUse {
        concept: String,
        referenced_by: String,
    },
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// One parsed line of a refactor script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefactorAction {
    Merge {
        survivor: ConceptId,
        absorbed: Vec<ConceptId>,
        new_gloss: String,
    },
    Demote {
        concept: ConceptId,
        facet: String,
        owner: ConceptId,
        value_label: String,
        gloss: String,
    },
    DeleteIndividual {
        concept: ConceptId,
        reason: String,
    },
    MarkObsolete {
        concept: ConceptId,
    },
}

#[derive(Debug, Clone)]
pub struct LogEntry {
    pub description: String,
    pub before_digest: String,
    pub after_digest: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Default)]
pub struct RefactorLog {
    pub entries: Vec<LogEntry>,
}

#[derive(Debug, Error)]
#[error("refactor action {index}: {source}")]
pub struct ScriptError {
    /// 1-based position of the failing action.
    pub index: usize,
    pub source: RefactorError,
}

/// SHA-256 over the canonical outline and N-Triples renderings.  Two
/// knowledge bases with the same schema and ABox digest identically.
pub fn state_digest(kb: &KnowledgeBase) -> String {
    let mut hasher = Sha256::new();
    hasher.update(outline::write(kb).as_bytes());
    hasher.update([0x1c]);
    hasher.update(ntriples::export(kb).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn require(kb: &KnowledgeBase, id: &ConceptId) -> Result<(), RefactorError> {
    if kb.concept(id).is_none() {
        return Err(RefactorError::UnknownConcept(id.to_string()));
    }
    Ok(())
}

fn label(kb: &KnowledgeBase, id: &ConceptId) -> String {
    kb.concept(id)
        .map(|c| c.preferred_label.clone())
        .unwrap_or_else(|| id.to_string())
}

/// Returns what still refers to `id` at the schema level, if anything.
fn schema_reference(kb: &KnowledgeBase, id: &ConceptId) -> Option<String> {
    for decl in kb.relation_decls() {
        if &decl.domain == id || &decl.range == id || decl.via_relator.as_ref() == Some(id) {
            return Some(format!("relation declaration `{}`", decl.name));
        }
    }
    for facet in kb.attribute_facets() {
        if &facet.attached_to == id {
            return Some(format!("attribute facet `{}`", facet.name));
        }
    }
    None
}

/// Merges every concept in `absorbed` into `survivor`.
///
/// The survivor keeps its id and parent and takes `new_gloss`; absorbed
/// preferred labels and synonyms become survivor synonyms; is-a edges, facet
/// attachments, relation declarations, the entity registry and ABox IRIs are
/// rewritten; absorbed concepts are removed.  An empty `absorbed` list only
/// replaces the gloss.
pub fn merge_concepts(
    kb: &mut KnowledgeBase,
    survivor: &ConceptId,
    absorbed: &[ConceptId],
    new_gloss: &str,
) -> Result<ConceptId, RefactorError> {
    require(kb, survivor)?;
    let mut absorbed_set: Vec<ConceptId> = Vec::new();
    for a in absorbed {
        if a == survivor {
            return Err(RefactorError::SelfMerge);
        }
        require(kb, a)?;
        if !absorbed_set.contains(a) {
            absorbed_set.push(a.clone());
        }
    }

    let remap = |id: &ConceptId| -> ConceptId {
        if absorbed_set.contains(id) {
            survivor.clone()
        } else {
            id.clone()
        }
    };

    // Simulate the edge rewrite before touching anything.
    let new_edges: BTreeSet<(ConceptId, ConceptId)> = kb
        .isa_edges()
        .iter()
        .map(|(c, p)| (remap(c), remap(p)))
        .filter(|(c, p)| c != p)
        .collect();
    let survivor_parents = new_edges.iter().filter(|(c, _)| c == survivor).count();
    if survivor_parents > 1 {
        return Err(RefactorError::WouldViolateSingleParent(label(kb, survivor)));
    }
    if has_cycle(&new_edges, survivor) {
        return Err(RefactorError::WouldCreateCycle(label(kb, survivor)));
    }

    // Class IRIs of the absorbed concepts, captured before removal.
    let absorbed_iris: Vec<(String, String)> = absorbed_set
        .iter()
        .map(|a| {
            (
                kb.class_iri(a).expect("absorbed concept exists"),
                kb.class_iri(survivor).expect("survivor exists"),
            )
        })
        .collect();

    // Labels fold into the survivor's synonym set.
    let survivor_norm = normalize_label(&label(kb, survivor));
    let mut new_synonyms: Vec<String> = Vec::new();
    for a in &absorbed_set {
        let c = kb.concept(a).unwrap();
        new_synonyms.push(c.preferred_label.clone());
        new_synonyms.extend(c.synonyms.iter().cloned());
    }

    {
        let s = kb.concept_mut(survivor).unwrap();
        s.gloss = new_gloss.to_string();
        for syn in new_synonyms {
            if normalize_label(&syn) != survivor_norm {
                s.synonyms.insert(syn);
            }
        }
    }

    kb.replace_isa_edges(new_edges);

    // Re-attach facets, folding same-named facets together.
    let mut facets = std::mem::take(kb.facets_mut());
    for facet in &mut facets {
        facet.attached_to = remap(&facet.attached_to);
    }
    let mut folded: Vec<crate::kb::AttributeFacet> = Vec::new();
    for facet in facets {
        match folded
            .iter_mut()
            .find(|f| f.name == facet.name && f.attached_to == facet.attached_to)
        {
            Some(existing) => {
                for v in facet.values {
                    if !existing
                        .values
                        .iter()
                        .any(|e| normalize_label(&e.label) == normalize_label(&v.label))
                    {
                        existing.values.push(v);
                    }
                }
            }
            None => folded.push(facet),
        }
    }
    *kb.facets_mut() = folded;

    for decl in kb.relations_mut() {
        decl.domain = remap(&decl.domain);
        decl.range = remap(&decl.range);
        if let Some(via) = &decl.via_relator {
            decl.via_relator = Some(remap(via));
        }
    }

    let rewrite_iri = |iri: &str| -> String {
        for (old, new) in &absorbed_iris {
            if iri == old {
                return new.clone();
            }
        }
        iri.to_string()
    };
    kb.rewrite_entities(|e| EntityId::new(rewrite_iri(e.as_str())));
    kb.rewrite_abox(|t| Triple {
        subject: EntityId::new(rewrite_iri(t.subject.as_str())),
        predicate: t.predicate.clone(),
        object: match &t.object {
            Object::Entity(e) => Object::Entity(EntityId::new(rewrite_iri(e.as_str()))),
            lit => lit.clone(),
        },
    });

    for a in &absorbed_set {
        kb.remove_concept_entry(a);
    }
    Ok(survivor.clone())
}

fn has_cycle(edges: &BTreeSet<(ConceptId, ConceptId)>, start: &ConceptId) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<ConceptId> = edges
        .iter()
        .filter(|(c, _)| c == start)
        .map(|(_, p)| p.clone())
        .collect();
    while let Some(cur) = stack.pop() {
        if &cur == start {
            return true;
        }
        if !seen.insert(cur.clone()) {
            continue;
        }
        stack.extend(
            edges
                .iter()
                .filter(|(c, _)| *c == cur)
                .map(|(_, p)| p.clone()),
        );
    }
    false
}

/// Collapses concepts that share one normalized label, keeping the candidate
/// with the lowest rank number (rank 1 beats rank 2; an unranked candidate
/// loses to any ranked one).  A single candidate is returned unchanged.
pub fn resolve_polysemy(
    kb: &mut KnowledgeBase,
    candidates: &[ConceptId],
) -> Result<ConceptId, RefactorError> {
    let first = candidates
        .first()
        .ok_or(RefactorError::NotPolysemous)?
        .clone();
    for c in candidates {
        require(kb, c)?;
    }
    if candidates.len() == 1 {
        return Ok(first);
    }
    let shared = normalize_label(&label(kb, &first));
    for c in candidates {
        if normalize_label(&label(kb, c)) != shared {
            return Err(RefactorError::NotPolysemous);
        }
    }
    let keyed: Vec<(i64, ConceptId)> = candidates
        .iter()
        .map(|c| (kb.concept(c).unwrap().rank.unwrap_or(i64::MAX), c.clone()))
        .collect();
    let best = keyed.iter().map(|(r, _)| *r).min().unwrap();
    let winners: Vec<&ConceptId> = keyed
        .iter()
        .filter(|(r, _)| *r == best)
        .map(|(_, c)| c)
        .collect();
    if winners.len() > 1 {
        return Err(RefactorError::RankTie(best));
    }
    let keeper = winners[0].clone();
    let keeper_gloss = kb.concept(&keeper).unwrap().gloss.clone();
    let absorbed: Vec<ConceptId> = candidates
        .iter()
        .filter(|c| **c != keeper)
        .cloned()
        .collect();
    merge_concepts(kb, &keeper, &absorbed, &keeper_gloss)
}

/// Removes a leaf concept and re-expresses it as a value of `facet` on
/// `owner`.  Entities typed to the demoted concept are re-typed to the owner
/// and given a `facet = value` literal.
pub fn demote_to_attribute_value(
    kb: &mut KnowledgeBase,
    concept: &ConceptId,
    facet: &str,
    owner: &ConceptId,
    value_label: &str,
    gloss: &str,
) -> Result<(), RefactorError> {
    require(kb, concept)?;
    require(kb, owner)?;
    if concept == owner {
        return Err(RefactorError::ConceptInUse {
            concept: label(kb, concept),
            referenced_by: "itself (it would own its own value)".into(),
        });
    }
    if !kb.children_of(concept).is_empty() {
        return Err(RefactorError::HasChildren(label(kb, concept)));
    }
    if let Some(referenced_by) = schema_reference(kb, concept) {
        return Err(RefactorError::ConceptInUse {
            concept: label(kb, concept),
            referenced_by,
        });
    }
    let norm_value = normalize_label(value_label);
    for (id, c) in kb.concepts() {
        if id != concept && normalize_label(&c.preferred_label) == norm_value {
            return Err(RefactorError::ValueClashesWithConcept(norm_value));
        }
    }
    for f in kb.attribute_facets() {
        if f.name == facet
            && &f.attached_to == owner
            && f.values
                .iter()
                .any(|v| normalize_label(&v.label) == norm_value)
        {
            return Err(RefactorError::DuplicateValue(norm_value, facet.to_string()));
        }
    }

    let concept_iri = kb.class_iri(concept).unwrap();
    let owner_iri = kb.class_iri(owner).unwrap();
    let facet_predicate = kb.predicate_iri(facet);

    // Re-type affected entities and attach the value literal.
    let mut new_abox: BTreeSet<Triple> = BTreeSet::new();
    for t in kb.abox() {
        let is_typing_to_concept = t.predicate == RDF_TYPE
            && matches!(&t.object, Object::Entity(e) if e.as_str() == concept_iri);
        if is_typing_to_concept {
            new_abox.insert(Triple::new(
                t.subject.clone(),
                RDF_TYPE,
                Object::Entity(EntityId::new(owner_iri.clone())),
            ));
            new_abox.insert(Triple::new(
                t.subject.clone(),
                facet_predicate.clone(),
                Object::Literal(crate::kb::Literal::string(value_label)),
            ));
        } else {
            new_abox.insert(t.clone());
        }
    }
    kb.set_abox(new_abox);

    kb.remove_is_a_edges_of(concept);
    kb.remove_concept_entry(concept);
    kb.raw_add_attribute_value(
        facet,
        owner,
        AttributeValue {
            label: value_label.to_string(),
            gloss: gloss.to_string(),
            synonyms: Vec::new(),
        },
    );
    Ok(())
}

/// Deletes a leaf concept that denotes an individual rather than a class.
/// With `recreate_as_entity`, the individual reappears in the ABox, typed to
/// its former parent; the minted entity id is returned.
pub fn delete_individual(
    kb: &mut KnowledgeBase,
    concept: &ConceptId,
    reason: &str,
    recreate_as_entity: bool,
) -> Result<Option<EntityId>, RefactorError> {
    require(kb, concept)?;
    if !kb.children_of(concept).is_empty() {
        return Err(RefactorError::HasChildren(label(kb, concept)));
    }
    if let Some(referenced_by) = schema_reference(kb, concept) {
        return Err(RefactorError::ConceptInUse {
            concept: label(kb, concept),
            referenced_by,
        });
    }
    let former_parent = kb.parents_of(concept).next().cloned();
    let concept_label = label(kb, concept);
    let entity_iri = kb.class_iri(concept).unwrap();

    kb.remove_is_a_edges_of(concept);
    kb.remove_concept_entry(concept);
    let _ = reason; // recorded by the script log, not by the knowledge base

    if !recreate_as_entity {
        return Ok(None);
    }
    let entity = EntityId::new(entity_iri);
    kb.register_entity(entity.clone());
    if let Some(parent) = former_parent {
        let parent_iri = kb.class_iri(&parent).unwrap();
        kb.assert_triple(Triple::new(
            entity.clone(),
            RDF_TYPE,
            Object::Entity(EntityId::new(parent_iri)),
        ))?;
    }
    let _ = concept_label;
    Ok(Some(entity))
}

/// Flags a concept as obsolete without removing it.  Idempotent.
pub fn mark_obsolete(kb: &mut KnowledgeBase, concept: &ConceptId) -> Result<(), RefactorError> {
    kb.mark_obsolete(concept)
        .map_err(|_| RefactorError::UnknownConcept(concept.to_string()))
}

fn apply_action(kb: &mut KnowledgeBase, action: &RefactorAction) -> Result<String, RefactorError> {
    match action {
        RefactorAction::Merge {
            survivor,
            absorbed,
            new_gloss,
        } => {
            let absorbed_labels: Vec<String> = absorbed.iter().map(|a| label(kb, a)).collect();
            let survivor_label = label(kb, survivor);
            merge_concepts(kb, survivor, absorbed, new_gloss)?;
            Ok(format!(
                "merge `{survivor_label}` <- {}",
                absorbed_labels
                    .iter()
                    .map(|l| format!("`{l}`"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        }
        RefactorAction::Demote {
            concept,
            facet,
            owner,
            value_label,
            gloss,
        } => {
            let concept_label = label(kb, concept);
            let owner_label = label(kb, owner);
            demote_to_attribute_value(kb, concept, facet, owner, value_label, gloss)?;
            Ok(format!(
                "demote `{concept_label}` -> {facet}@{owner_label} = {value_label}"
            ))
        }
        RefactorAction::DeleteIndividual { concept, reason } => {
            let concept_label = label(kb, concept);
            delete_individual(kb, concept, reason, false)?;
            Ok(format!("delete-individual `{concept_label}` ({reason})"))
        }
        RefactorAction::MarkObsolete { concept } => {
            let concept_label = label(kb, concept);
            mark_obsolete(kb, concept)?;
            Ok(format!("obsolete `{concept_label}`"))
        }
    }
}

/// Applies a parsed script front to back.  Application stops at the first
/// failing action; everything before it stays applied, and the error reports
/// the 1-based action index.
pub fn apply_script(
    kb: &mut KnowledgeBase,
    actions: &[RefactorAction],
) -> Result<RefactorLog, ScriptError> {
    let mut log = RefactorLog::default();
    let mut before = state_digest(kb);
    for (i, action) in actions.iter().enumerate() {
        let description = apply_action(kb, action).map_err(|source| ScriptError {
            index: i + 1,
            source,
        })?;
        let after = state_digest(kb);
        log.entries.push(LogEntry {
            description,
            before_digest: before,
            after_digest: after.clone(),
            timestamp: Utc::now(),
        });
        before = after;
    }
    Ok(log)
}

fn unquote(s: &str, line_no: usize) -> Result<String, SyntaxError> {
    let err = || SyntaxError::new(line_no, 1, "expected a double-quoted string");
    let inner = s
        .strip_prefix('"')
        .ok_or_else(err)?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                return match chars.next() {
                    None => Ok(out),
                    Some(_) => Err(SyntaxError::new(
                        line_no,
                        1,
                        "trailing content after closing quote",
                    )),
                }
            }
            '\\' => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                _ => return Err(SyntaxError::new(line_no, 1, "bad escape in string")),
            },
            other => out.push(other),
        }
    }
    Err(SyntaxError::new(line_no, 1, "unterminated string"))
}

/// Parses a refactor script, resolving every concept label against `kb`.
///
/// Line forms (labels may contain spaces; `#` starts a comment):
///
/// ```text
/// merge <survivor> <- <absorbed>[, <absorbed>…] :: "<new gloss>"
/// demote <concept> -> <facet>@<owner> = <value> :: "<value gloss>"
/// delete-individual <concept> :: "<reason>"
/// obsolete <concept>
/// ```
pub fn parse_script(
    kb: &KnowledgeBase,
    text: &str,
) -> Result<Vec<RefactorAction>, SyntaxError> {
    let mut actions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let resolve = |label: &str| -> Result<ConceptId, SyntaxError> {
            kb.resolve_label(label).ok_or_else(|| {
                SyntaxError::new(line_no, 1, format!("unknown concept `{label}`"))
            })
        };
        let split_tail = |rest: &str| -> Result<(String, String), SyntaxError> {
            let (head, tail) = rest.rsplit_once(" :: ").ok_or_else(|| {
                SyntaxError::new(line_no, 1, "expected ` :: \"…\"` at end of line")
            })?;
            Ok((head.trim().to_string(), unquote(tail.trim(), line_no)?))
        };

        if let Some(rest) = line.strip_prefix("merge ") {
            let (head, new_gloss) = split_tail(rest)?;
            let (survivor, absorbed_list) = head.split_once("<-").ok_or_else(|| {
                SyntaxError::new(line_no, 1, "expected `merge <survivor> <- <absorbed>`")
            })?;
            let survivor = resolve(survivor.trim())?;
            let mut absorbed = Vec::new();
            for part in absorbed_list.split(',') {
                absorbed.push(resolve(part.trim())?);
            }
            actions.push(RefactorAction::Merge {
                survivor,
                absorbed,
                new_gloss,
            });
        } else if let Some(rest) = line.strip_prefix("demote ") {
            let (head, gloss) = split_tail(rest)?;
            let (concept, target) = head.split_once("->").ok_or_else(|| {
                SyntaxError::new(line_no, 1, "expected `demote <concept> -> <facet>@<owner> = <value>`")
            })?;
            let (facet_owner, value) = target.split_once('=').ok_or_else(|| {
                SyntaxError::new(line_no, 1, "expected `= <value>` in demote")
            })?;
            let (facet, owner) = facet_owner.split_once('@').ok_or_else(|| {
                SyntaxError::new(line_no, 1, "expected `<facet>@<owner>` in demote")
            })?;
            actions.push(RefactorAction::Demote {
                concept: resolve(concept.trim())?,
                facet: facet.trim().to_string(),
                owner: resolve(owner.trim())?,
                value_label: value.trim().to_string(),
                gloss,
            });
        } else if let Some(rest) = line.strip_prefix("delete-individual ") {
            let (concept, reason) = split_tail(rest)?;
            actions.push(RefactorAction::DeleteIndividual {
                concept: resolve(&concept)?,
                reason,
            });
        } else if let Some(rest) = line.strip_prefix("obsolete ") {
            actions.push(RefactorAction::MarkObsolete {
                concept: resolve(rest.trim())?,
            });
        } else {
            return Err(SyntaxError::new(
                line_no,
                1,
                format!("unrecognized action `{}`", line.split(' ').next().unwrap_or("")),
            ));
        }
    }
    Ok(actions)
}
