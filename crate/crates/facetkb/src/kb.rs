//! Core model: concepts, is-a forest, attribute facets, relation
//! declarations, and the entity-level triple store.
//!
//! The schema side is deliberately strict.  Constructors such as
//! [`KnowledgeBase::add_concept`] and [`KnowledgeBase::add_is_a`] enforce the
//! structural invariants (unique normalized labels, single parent, acyclicity,
//! label/value disjointness) so that a knowledge base built through them is
//! well-formed by construction.  Raw insertion methods (`raw_*`) bypass those
//! checks; they exist so that defective data — duplicated labels, cycles,
//! multiple parents — can be represented and then *reported* by the validator
//! instead of being unrepresentable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

/// Default IRI namespace for minted classes, relations and entities.
pub const DEFAULT_NAMESPACE: &str = "http://www.semanticweb.org/ontologies/2013/12/ontology.owl#";
/// The reserved typing predicate.
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
/// Predicate used for materialized subclass triples in frozen snapshots.
pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";
pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";
pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_ANY_URI: &str = "http://www.w3.org/2001/XMLSchema#anyURI";

/// Case-folds and collapses internal whitespace.  All label comparison in the
/// knowledge base goes through this, so `"Primary  School"` and
/// `"primary school"` are the same label.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Opaque identifier for a schema concept.  Minted by the knowledge base and
/// not stable across persistence; the outline sidecar is label-addressed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Throwaway id for building a [`Concept`] that will be handed to
    /// [`KnowledgeBase::raw_insert_concept`], which assigns the real id.
    pub fn placeholder() -> ConceptId {
        ConceptId(String::new())
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// IRI of an ABox entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(iri: impl Into<String>) -> Self {
        EntityId(iri.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ontological stereotype of a concept.
///
/// `PhaseUnspecified` is the default for concepts whose rigidity has not been
/// decided yet; its text token is `phase-unspecified`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stereotype {
    Kind,
    Subkind,
    Role,
    Relator,
    #[default]
    PhaseUnspecified,
}

impl Stereotype {
    pub fn token(self) -> &'static str {
        match self {
            Stereotype::Kind => "kind",
            Stereotype::Subkind => "subkind",
            Stereotype::Role => "role",
            Stereotype::Relator => "relator",
            Stereotype::PhaseUnspecified => "phase-unspecified",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "kind" => Some(Stereotype::Kind),
            "subkind" => Some(Stereotype::Subkind),
            "role" => Some(Stereotype::Role),
            "relator" => Some(Stereotype::Relator),
            "phase-unspecified" => Some(Stereotype::PhaseUnspecified),
            _ => None,
        }
    }
}

impl fmt::Display for Stereotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A schema concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub id: ConceptId,
    pub preferred_label: String,
    pub synonyms: BTreeSet<String>,
    pub gloss: String,
    pub stereotype: Stereotype,
    pub obsolete: bool,
    /// Free-text source note, e.g. a WordNet sense number.
    pub provenance: String,
    /// Disambiguation rank for polysemous labels; lower number wins.
    pub rank: Option<i64>,
}

/// One value of an attribute facet, e.g. `public` in `fundingPolicy`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeValue {
    pub label: String,
    pub gloss: String,
    pub synonyms: Vec<String>,
}

/// A named facet of attribute values attached to a concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeFacet {
    pub name: String,
    pub attached_to: ConceptId,
    pub values: Vec<AttributeValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationKind {
    IsA,
    Material,
    Partitive,
}

impl RelationKind {
    pub fn token(self) -> &'static str {
        match self {
            RelationKind::IsA => "is-a",
            RelationKind::Material => "material",
            RelationKind::Partitive => "partitive",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "is-a" => Some(RelationKind::IsA),
            "material" => Some(RelationKind::Material),
            "partitive" => Some(RelationKind::Partitive),
            _ => None,
        }
    }
}

/// Closed interval of participation counts; `max == None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cardinality {
    pub min: u32,
    pub max: Option<u32>,
}

impl Cardinality {
    pub fn parse(s: &str) -> Option<Self> {
        let (lo, hi) = s.split_once("..")?;
        let min: u32 = lo.trim().parse().ok()?;
        let hi = hi.trim();
        let max = if hi == "*" {
            None
        } else {
            let m: u32 = hi.parse().ok()?;
            if m < min {
                return None;
            }
            Some(m)
        };
        Some(Cardinality { min, max })
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(max) => write!(f, "{}..{}", self.min, max),
            None => write!(f, "{}..*", self.min),
        }
    }
}

/// A declared schema-level relation.
///
/// `domain_card` bounds how many objects one subject may have; `range_card`
/// bounds how many subjects one object may have.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub kind: RelationKind,
    pub domain: ConceptId,
    pub range: ConceptId,
    pub via_relator: Option<ConceptId>,
    pub domain_card: Option<Cardinality>,
    pub range_card: Option<Cardinality>,
}

/// Datatype tag for literals.  Tokens follow the XSD local names used in the
/// mapping format: `string`, `integer`, `anyURI`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DatatypeTag {
    String,
    Integer,
    AnyUri,
}

impl DatatypeTag {
    pub fn token(self) -> &'static str {
        match self {
            DatatypeTag::String => "string",
            DatatypeTag::Integer => "integer",
            DatatypeTag::AnyUri => "anyURI",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "string" => Some(DatatypeTag::String),
            "integer" => Some(DatatypeTag::Integer),
            "anyURI" => Some(DatatypeTag::AnyUri),
            _ => None,
        }
    }

    pub fn iri(self) -> &'static str {
        match self {
            DatatypeTag::String => XSD_STRING,
            DatatypeTag::Integer => XSD_INTEGER,
            DatatypeTag::AnyUri => XSD_ANY_URI,
        }
    }

    pub fn from_iri(iri: &str) -> Option<Self> {
        match iri {
            XSD_STRING => Some(DatatypeTag::String),
            XSD_INTEGER => Some(DatatypeTag::Integer),
            XSD_ANY_URI => Some(DatatypeTag::AnyUri),
            _ => None,
        }
    }
}

/// A typed literal.  Integer literals must hold a base-10 `i64`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Literal {
    pub lexical_form: String,
    pub datatype: DatatypeTag,
}

impl Literal {
    pub fn string(s: impl Into<String>) -> Self {
        Literal {
            lexical_form: s.into(),
            datatype: DatatypeTag::String,
        }
    }

    pub fn integer(s: impl Into<String>) -> Result<Self, KbError> {
        let s = s.into();
        if s.parse::<i64>().is_err() {
            return Err(KbError::BadIntegerLiteral(s));
        }
        Ok(Literal {
            lexical_form: s,
            datatype: DatatypeTag::Integer,
        })
    }

    pub fn any_uri(s: impl Into<String>) -> Self {
        Literal {
            lexical_form: s.into(),
            datatype: DatatypeTag::AnyUri,
        }
    }
}

/// Object position of a triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Object {
    Entity(EntityId),
    Literal(Literal),
}

/// One ABox assertion.  The predicate is a full IRI.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub predicate: String,
    pub object: Object,
}

impl Triple {
    pub fn new(subject: EntityId, predicate: impl Into<String>, object: Object) -> Self {
        Triple {
            subject,
            predicate: predicate.into(),
            object,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("label must be nonempty")]
    EmptyLabel,
    #[error("duplicate normalized label `{0}`")]
    DuplicateLabel(String),
    #[error("label `{0}` clashes with an existing attribute value")]
    LabelClashesWithValue(String),
    #[error("unknown parent concept")]
    UnknownParent,
    #[error("parent `{0}` is obsolete and cannot take new children")]
    ObsoleteParent(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("concept `{0}` already has a parent")]
    MultipleParents(String),
    #[error("is-a edge would close a cycle through `{0}`")]
    CycleDetected(String),
    #[error("value `{0}` clashes with an existing concept label")]
    ValueClashesWithConcept(String),
    #[error("facet `{1}` already carries value `{0}`")]
    DuplicateValue(String, String),
    #[error("material relation `{0}` must name a mediating relator")]
    RelatorRequired(String),
    #[error("`{0}` cannot mediate a relation: not stereotyped as a relator")]
    BadStereotype(String),
    #[error("duplicate relation declaration `{0}`")]
    DuplicateRelation(String),
    #[error("predicate `{0}` is not declared")]
    UndeclaredPredicate(String),
    #[error("subject `{0}` has not been minted")]
    UnknownSubject(String),
    #[error("class `{0}` is obsolete; new typings are rejected")]
    ObsoleteTyping(String),
    #[error("literal `{0}` is not a base-10 integer")]
    BadIntegerLiteral(String),
    #[error("predicate `{0}` expects a {1} object")]
    ObjectShape(String, &'static str),
    #[error("literal datatype does not match declaration of `{0}`")]
    DatatypeMismatch(String),
    #[error("property `{0}` is already declared with a different datatype")]
    ConflictingProperty(String),
    #[error("synonym `{0}` duplicates the preferred label")]
    SynonymIsPreferred(String),
}

/// What a predicate IRI is declared as.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredicateKind {
    Typing,
    Relation(String),
    Facet(String),
    DataProperty(String, DatatypeTag),
}

/// Counters reported by `facetkb stats`.
///
/// `logical_assertion_count` is defined as
/// `isa_edge_count + triple_count + (number of relation declarations carrying
/// at least one cardinality bound)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsSummary {
    pub class_count: usize,
    pub attribute_facet_count: usize,
    pub value_count: usize,
    pub relation_decl_count: usize,
    pub isa_edge_count: usize,
    pub triple_count: usize,
    pub logical_assertion_count: usize,
}

impl StatsSummary {
    pub fn compute(kb: &KnowledgeBase) -> Self {
        let bounded_decls = kb
            .relation_decls()
            .iter()
            .filter(|d| d.domain_card.is_some() || d.range_card.is_some())
            .count();
        let isa_edge_count = kb.isa_edges().len();
        let triple_count = kb.abox().len();
        StatsSummary {
            class_count: kb.concepts().len(),
            attribute_facet_count: kb.attribute_facets().len(),
            value_count: kb
                .attribute_facets()
                .iter()
                .map(|f| f.values.len())
                .sum(),
            relation_decl_count: kb.relation_decls().len(),
            isa_edge_count,
            triple_count,
            logical_assertion_count: isa_edge_count + triple_count + bounded_decls,
        }
    }
}

/// The mutable knowledge base: schema plus ABox.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    namespace: String,
    prefixes: BTreeMap<String, String>,
    concepts: IndexMap<ConceptId, Concept>,
    isa_edges: BTreeSet<(ConceptId, ConceptId)>,
    facets: Vec<AttributeFacet>,
    relations: Vec<RelationDecl>,
    data_properties: BTreeMap<String, DatatypeTag>,
    entities: BTreeSet<EntityId>,
    abox: BTreeSet<Triple>,
    next_id: u64,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self::new()
    }
}

impl KnowledgeBase {
    pub fn new() -> Self {
        let mut prefixes = BTreeMap::new();
        prefixes.insert("EI".to_string(), DEFAULT_NAMESPACE.to_string());
        prefixes.insert("rdf".to_string(), RDF_NS.to_string());
        prefixes.insert("rdfs".to_string(), RDFS_NS.to_string());
        prefixes.insert("owl".to_string(), OWL_NS.to_string());
        prefixes.insert("xsd".to_string(), XSD_NS.to_string());
        KnowledgeBase {
            namespace: DEFAULT_NAMESPACE.to_string(),
            prefixes,
            concepts: IndexMap::new(),
            isa_edges: BTreeSet::new(),
            facets: Vec::new(),
            relations: Vec::new(),
            data_properties: BTreeMap::new(),
            entities: BTreeSet::new(),
            abox: BTreeSet::new(),
            next_id: 1,
        }
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    /// Changes the minting namespace and repoints the `EI` prefix at it.
    pub fn set_namespace(&mut self, ns: impl Into<String>) {
        self.namespace = ns.into();
        self.prefixes
            .insert("EI".to_string(), self.namespace.clone());
    }

    pub fn prefixes(&self) -> &BTreeMap<String, String> {
        &self.prefixes
    }

    pub fn add_prefix(&mut self, name: impl Into<String>, base: impl Into<String>) {
        self.prefixes.insert(name.into(), base.into());
    }

    pub fn concepts(&self) -> &IndexMap<ConceptId, Concept> {
        &self.concepts
    }

    pub fn concept(&self, id: &ConceptId) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub(crate) fn concept_mut(&mut self, id: &ConceptId) -> Option<&mut Concept> {
        self.concepts.get_mut(id)
    }

    pub fn isa_edges(&self) -> &BTreeSet<(ConceptId, ConceptId)> {
        &self.isa_edges
    }

    pub fn attribute_facets(&self) -> &Vec<AttributeFacet> {
        &self.facets
    }

    pub fn relation_decls(&self) -> &Vec<RelationDecl> {
        &self.relations
    }

    pub fn data_properties(&self) -> &BTreeMap<String, DatatypeTag> {
        &self.data_properties
    }

    pub fn entities(&self) -> &BTreeSet<EntityId> {
        &self.entities
    }

    pub fn abox(&self) -> &BTreeSet<Triple> {
        &self.abox
    }

    fn mint_concept_id(&mut self) -> ConceptId {
        let id = ConceptId(format!("c{}", self.next_id));
        self.next_id += 1;
        id
    }

    fn label_taken(&self, normalized: &str) -> bool {
        self.concepts
            .values()
            .any(|c| normalize_label(&c.preferred_label) == normalized)
    }

    fn value_taken(&self, normalized: &str) -> Option<&str> {
        for facet in &self.facets {
            for v in &facet.values {
                if normalize_label(&v.label) == normalized {
                    return Some(&facet.name);
                }
            }
        }
        None
    }

    /// Adds a concept under `parent` (or as a new root).
    ///
    /// Rejects empty labels, labels that normalize to an existing concept
    /// label or attribute value, unknown parents, and obsolete parents.
    pub fn add_concept(
        &mut self,
        label: &str,
        gloss: &str,
        stereotype: Stereotype,
        parent: Option<&ConceptId>,
    ) -> Result<ConceptId, KbError> {
        let norm = normalize_label(label);
        if norm.is_empty() {
            return Err(KbError::EmptyLabel);
        }
        if self.label_taken(&norm) {
            return Err(KbError::DuplicateLabel(norm));
        }
        if self.value_taken(&norm).is_some() {
            return Err(KbError::LabelClashesWithValue(norm));
        }
        if let Some(p) = parent {
            let parent_concept = self.concepts.get(p).ok_or(KbError::UnknownParent)?;
            if parent_concept.obsolete {
                return Err(KbError::ObsoleteParent(
                    parent_concept.preferred_label.clone(),
                ));
            }
        }
        let id = self.mint_concept_id();
        self.concepts.insert(
            id.clone(),
            Concept {
                id: id.clone(),
                preferred_label: label.trim().to_string(),
                synonyms: BTreeSet::new(),
                gloss: gloss.to_string(),
                stereotype,
                obsolete: false,
                provenance: String::new(),
                rank: None,
            },
        );
        if let Some(p) = parent {
            self.isa_edges.insert((id.clone(), p.clone()));
        }
        Ok(id)
    }

    /// Inserts a concept without any label or parent checks.  Fixture-building
    /// escape hatch; the validator reports whatever this lets through.
    pub fn raw_insert_concept(&mut self, mut concept_fields: Concept) -> ConceptId {
        let id = self.mint_concept_id();
        concept_fields.id = id.clone();
        self.concepts.insert(id.clone(), concept_fields);
        id
    }

    /// Convenience wrapper over [`Self::raw_insert_concept`].
    pub fn raw_concept(&mut self, label: &str, gloss: &str, stereotype: Stereotype) -> ConceptId {
        self.raw_insert_concept(Concept {
            id: ConceptId(String::new()),
            preferred_label: label.to_string(),
            synonyms: BTreeSet::new(),
            gloss: gloss.to_string(),
            stereotype,
            obsolete: false,
            provenance: String::new(),
            rank: None,
        })
    }

    pub fn add_synonym(&mut self, id: &ConceptId, synonym: &str) -> Result<(), KbError> {
        let norm = normalize_label(synonym);
        if norm.is_empty() {
            return Err(KbError::EmptyLabel);
        }
        let concept = self
            .concepts
            .get_mut(id)
            .ok_or_else(|| KbError::UnknownConcept(id.to_string()))?;
        if normalize_label(&concept.preferred_label) == norm {
            return Err(KbError::SynonymIsPreferred(synonym.to_string()));
        }
        concept.synonyms.insert(synonym.trim().to_string());
        Ok(())
    }

    pub fn set_provenance(&mut self, id: &ConceptId, provenance: &str) -> Result<(), KbError> {
        let concept = self
            .concepts
            .get_mut(id)
            .ok_or_else(|| KbError::UnknownConcept(id.to_string()))?;
        concept.provenance = provenance.to_string();
        Ok(())
    }

    pub fn set_rank(&mut self, id: &ConceptId, rank: Option<i64>) -> Result<(), KbError> {
        let concept = self
            .concepts
            .get_mut(id)
            .ok_or_else(|| KbError::UnknownConcept(id.to_string()))?;
        concept.rank = rank;
        Ok(())
    }

    /// Marks a concept obsolete.  Idempotent; the concept keeps its id, label
    /// and position but can no longer take children or new typings.
    pub fn mark_obsolete(&mut self, id: &ConceptId) -> Result<(), KbError> {
        let concept = self
            .concepts
            .get_mut(id)
            .ok_or_else(|| KbError::UnknownConcept(id.to_string()))?;
        concept.obsolete = true;
        Ok(())
    }

    /// Adds the is-a edge `child -> parent` after checking both ends exist,
    /// the child is not already parented, and the edge closes no cycle.
    pub fn add_is_a(&mut self, child: &ConceptId, parent: &ConceptId) -> Result<(), KbError> {
        if !self.concepts.contains_key(child) {
            return Err(KbError::UnknownConcept(child.to_string()));
        }
        let parent_concept = self
            .concepts
            .get(parent)
            .ok_or_else(|| KbError::UnknownConcept(parent.to_string()))?;
        if parent_concept.obsolete {
            return Err(KbError::ObsoleteParent(
                parent_concept.preferred_label.clone(),
            ));
        }
        if self.parents_of(child).next().is_some() {
            return Err(KbError::MultipleParents(self.label_of(child)));
        }
        // Walking up from the prospective parent must never reach the child.
        if child == parent || self.reachable_upward(parent, child) {
            return Err(KbError::CycleDetected(self.label_of(child)));
        }
        self.isa_edges.insert((child.clone(), parent.clone()));
        Ok(())
    }

    /// Inserts an is-a edge with no checks.
    pub fn raw_insert_is_a(&mut self, child: &ConceptId, parent: &ConceptId) {
        self.isa_edges.insert((child.clone(), parent.clone()));
    }

    pub(crate) fn replace_isa_edges(&mut self, edges: BTreeSet<(ConceptId, ConceptId)>) {
        self.isa_edges = edges;
    }

    pub(crate) fn set_abox(&mut self, abox: BTreeSet<Triple>) {
        self.abox = abox;
    }

    pub(crate) fn rewrite_entities<F>(&mut self, f: F)
    where
        F: Fn(&EntityId) -> EntityId,
    {
        self.entities = self.entities.iter().map(f).collect();
    }

    pub(crate) fn remove_is_a_edges_of(&mut self, id: &ConceptId) {
        self.isa_edges.retain(|(c, p)| c != id && p != id);
    }

    pub(crate) fn remove_concept_entry(&mut self, id: &ConceptId) {
        self.concepts.shift_remove(id);
    }

    pub fn parents_of<'a>(&'a self, id: &'a ConceptId) -> impl Iterator<Item = &'a ConceptId> {
        self.isa_edges
            .iter()
            .filter(move |(c, _)| c == id)
            .map(|(_, p)| p)
    }

    pub fn children_of(&self, id: &ConceptId) -> Vec<ConceptId> {
        // Deterministic: ordered by concept insertion, not edge-set order.
        self.concepts
            .keys()
            .filter(|c| self.isa_edges.contains(&((*c).clone(), id.clone())))
            .cloned()
            .collect()
    }

    fn concept_index(&self, id: &ConceptId) -> usize {
        self.concepts.get_index_of(id).unwrap_or(usize::MAX)
    }

    /// True if `to` is reachable from `from` by walking parent edges.
    fn reachable_upward(&self, from: &ConceptId, to: &ConceptId) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from.clone()];
        while let Some(cur) = stack.pop() {
            if &cur == to {
                return true;
            }
            if !seen.insert(cur.clone()) {
                continue;
            }
            for p in self.parents_of(&cur) {
                stack.push(p.clone());
            }
        }
        false
    }

    /// All strict ancestors of `c`, nearest first.
    ///
    /// On a well-formed forest this is the chain to the root.  On raw data
    /// with several parents it is a breadth-first walk (parents within a level
    /// ordered by concept insertion); revisits are dropped, so the walk
    /// terminates even through cycles.
    pub fn ancestors(&self, c: &ConceptId) -> Result<Vec<ConceptId>, KbError> {
        if !self.concepts.contains_key(c) {
            return Err(KbError::UnknownConcept(c.to_string()));
        }
        let mut out = Vec::new();
        let mut seen: BTreeSet<ConceptId> = BTreeSet::new();
        seen.insert(c.clone());
        let mut frontier = vec![c.clone()];
        while !frontier.is_empty() {
            let mut next: Vec<ConceptId> = Vec::new();
            for node in &frontier {
                for p in self.parents_of(node) {
                    if seen.insert(p.clone()) {
                        next.push(p.clone());
                    }
                }
            }
            next.sort_by_key(|id| self.concept_index(id));
            out.extend(next.iter().cloned());
            frontier = next;
        }
        Ok(out)
    }

    /// `c` plus everything below it, breadth-first, cycle-safe.
    pub fn descendants_with_self(&self, c: &ConceptId) -> Vec<ConceptId> {
        let mut out = vec![c.clone()];
        let mut seen: BTreeSet<ConceptId> = out.iter().cloned().collect();
        let mut i = 0;
        while i < out.len() {
            let cur = out[i].clone();
            for child in self.children_of(&cur) {
                if seen.insert(child.clone()) {
                    out.push(child);
                }
            }
            i += 1;
        }
        out
    }

    /// Resolves a label or synonym (after normalization) to a concept id.
    /// Preferred labels win over synonyms; within each class, earliest
    /// concept wins.
    pub fn resolve_label(&self, label: &str) -> Option<ConceptId> {
        let norm = normalize_label(label);
        for (id, c) in &self.concepts {
            if normalize_label(&c.preferred_label) == norm {
                return Some(id.clone());
            }
        }
        for (id, c) in &self.concepts {
            if c.synonyms.iter().any(|s| normalize_label(s) == norm) {
                return Some(id.clone());
            }
        }
        None
    }

    pub fn require_label(&self, label: &str) -> Result<ConceptId, KbError> {
        self.resolve_label(label)
            .ok_or_else(|| KbError::UnknownConcept(label.to_string()))
    }

    fn label_of(&self, id: &ConceptId) -> String {
        self.concepts
            .get(id)
            .map(|c| c.preferred_label.clone())
            .unwrap_or_else(|| id.to_string())
    }

    /// Adds `value` to the facet `facet_name` on `owner`, creating the facet
    /// on first use.  Value labels must not normalize to any concept label,
    /// and must be unique within the facet.
    pub fn add_attribute_value(
        &mut self,
        facet_name: &str,
        owner: &ConceptId,
        value: AttributeValue,
    ) -> Result<(), KbError> {
        if !self.concepts.contains_key(owner) {
            return Err(KbError::UnknownConcept(owner.to_string()));
        }
        let norm = normalize_label(&value.label);
        if norm.is_empty() {
            return Err(KbError::EmptyLabel);
        }
        if self.label_taken(&norm) {
            return Err(KbError::ValueClashesWithConcept(norm));
        }
        let facet_pos = self
            .facets
            .iter()
            .position(|f| f.name == facet_name && &f.attached_to == owner);
        if let Some(pos) = facet_pos {
            if self.facets[pos]
                .values
                .iter()
                .any(|v| normalize_label(&v.label) == norm)
            {
                return Err(KbError::DuplicateValue(norm, facet_name.to_string()));
            }
            self.facets[pos].values.push(value);
        } else {
            self.facets.push(AttributeFacet {
                name: facet_name.to_string(),
                attached_to: owner.clone(),
                values: vec![value],
            });
        }
        Ok(())
    }

    /// Appends a facet value with no clash checks.
    pub fn raw_add_attribute_value(
        &mut self,
        facet_name: &str,
        owner: &ConceptId,
        value: AttributeValue,
    ) {
        let facet_pos = self
            .facets
            .iter()
            .position(|f| f.name == facet_name && &f.attached_to == owner);
        match facet_pos {
            Some(pos) => self.facets[pos].values.push(value),
            None => self.facets.push(AttributeFacet {
                name: facet_name.to_string(),
                attached_to: owner.clone(),
                values: vec![value],
            }),
        }
    }

    pub(crate) fn facets_mut(&mut self) -> &mut Vec<AttributeFacet> {
        &mut self.facets
    }

    pub(crate) fn relations_mut(&mut self) -> &mut Vec<RelationDecl> {
        &mut self.relations
    }

    /// Declares a relation.  Domain, range and relator must exist; material
    /// relations must be mediated by a relator-stereotyped concept.
    pub fn declare_relation(&mut self, decl: RelationDecl) -> Result<(), KbError> {
        for end in [&decl.domain, &decl.range] {
            if !self.concepts.contains_key(end) {
                return Err(KbError::UnknownConcept(end.to_string()));
            }
        }
        if self.relations.iter().any(|r| r.name == decl.name) {
            return Err(KbError::DuplicateRelation(decl.name));
        }
        match &decl.via_relator {
            Some(r) => {
                let relator = self
                    .concepts
                    .get(r)
                    .ok_or_else(|| KbError::UnknownConcept(r.to_string()))?;
                if relator.stereotype != Stereotype::Relator {
                    return Err(KbError::BadStereotype(relator.preferred_label.clone()));
                }
            }
            None => {
                if decl.kind == RelationKind::Material {
                    return Err(KbError::RelatorRequired(decl.name));
                }
            }
        }
        self.relations.push(decl);
        Ok(())
    }

    /// Declares (or re-declares) an ingest data property.  Re-declaring with
    /// the same datatype is a no-op; changing the datatype is an error.
    pub fn declare_data_property(&mut self, name: &str, tag: DatatypeTag) -> Result<(), KbError> {
        match self.data_properties.get(name) {
            Some(existing) if *existing != tag => {
                Err(KbError::ConflictingProperty(name.to_string()))
            }
            Some(_) => Ok(()),
            None => {
                self.data_properties.insert(name.to_string(), tag);
                Ok(())
            }
        }
    }

    /// Records an entity IRI in the registry.  Returns false if it was
    /// already minted.
    pub fn register_entity(&mut self, id: EntityId) -> bool {
        self.entities.insert(id)
    }

    /// IRI of the class backing a concept: namespace + label with spaces
    /// replaced by underscores.
    pub fn class_iri(&self, id: &ConceptId) -> Option<String> {
        self.concepts
            .get(id)
            .map(|c| format!("{}{}", self.namespace, c.preferred_label.replace(' ', "_")))
    }

    /// IRI of a declared relation or facet or data property: namespace + name.
    pub fn predicate_iri(&self, name: &str) -> String {
        format!("{}{}", self.namespace, name)
    }

    /// Reverse of [`Self::class_iri`].
    pub fn concept_of_iri(&self, iri: &str) -> Option<ConceptId> {
        let local = iri.strip_prefix(&self.namespace)?;
        let label = local.replace('_', " ");
        let norm = normalize_label(&label);
        self.concepts
            .iter()
            .find(|(_, c)| normalize_label(&c.preferred_label) == norm)
            .map(|(id, _)| id.clone())
    }

    /// Classifies a predicate IRI against the declared vocabulary.
    pub fn predicate_kind(&self, predicate: &str) -> Option<PredicateKind> {
        if predicate == RDF_TYPE {
            return Some(PredicateKind::Typing);
        }
        if let Some(name) = predicate.strip_prefix(&self.namespace) {
            if self.relations.iter().any(|r| r.name == name) {
                return Some(PredicateKind::Relation(name.to_string()));
            }
            if self.facets.iter().any(|f| f.name == name) {
                return Some(PredicateKind::Facet(name.to_string()));
            }
            if let Some(tag) = self.data_properties.get(name) {
                return Some(PredicateKind::DataProperty(name.to_string(), *tag));
            }
        }
        None
    }

    /// Asserts a triple.  The subject must be minted; the predicate must be
    /// declared; relations take entity objects, facets and data properties
    /// take literals; typing an obsolete class is rejected.  Asserting an
    /// existing triple is a no-op.
    pub fn assert_triple(&mut self, triple: Triple) -> Result<(), KbError> {
        if !self.entities.contains(&triple.subject) {
            return Err(KbError::UnknownSubject(triple.subject.to_string()));
        }
        let kind = self
            .predicate_kind(&triple.predicate)
            .ok_or_else(|| KbError::UndeclaredPredicate(triple.predicate.clone()))?;
        match (&kind, &triple.object) {
            (PredicateKind::Typing, Object::Entity(class)) => {
                if let Some(cid) = self.concept_of_iri(class.as_str()) {
                    let c = &self.concepts[&cid];
                    if c.obsolete {
                        return Err(KbError::ObsoleteTyping(c.preferred_label.clone()));
                    }
                }
            }
            (PredicateKind::Typing, Object::Literal(_)) => {
                return Err(KbError::ObjectShape(triple.predicate, "class IRI"));
            }
            (PredicateKind::Relation(_), Object::Literal(_)) => {
                return Err(KbError::ObjectShape(triple.predicate, "entity"));
            }
            (PredicateKind::Relation(_), Object::Entity(obj)) => {
                self.entities.insert(obj.clone());
            }
            (PredicateKind::Facet(_), Object::Entity(_)) => {
                return Err(KbError::ObjectShape(triple.predicate, "literal"));
            }
            (PredicateKind::DataProperty(..), Object::Entity(_)) => {
                return Err(KbError::ObjectShape(triple.predicate, "literal"));
            }
            (PredicateKind::DataProperty(name, tag), Object::Literal(lit)) => {
                if lit.datatype != *tag {
                    return Err(KbError::DatatypeMismatch(name.clone()));
                }
            }
            (PredicateKind::Facet(_), Object::Literal(_)) => {}
        }
        self.abox.insert(triple);
        Ok(())
    }

    /// Inserts a parsed triple from an N-Triples import.  Subjects and entity
    /// objects are minted on sight; the predicate must still be declared, and
    /// object shape is checked, but obsolete-class typing is let through for
    /// the validator to flag.
    pub fn import_triple(&mut self, triple: Triple) -> Result<(), KbError> {
        let kind = self
            .predicate_kind(&triple.predicate)
            .ok_or_else(|| KbError::UndeclaredPredicate(triple.predicate.clone()))?;
        match (&kind, &triple.object) {
            (PredicateKind::Typing, Object::Literal(_))
            | (PredicateKind::Relation(_), Object::Literal(_)) => {
                return Err(KbError::ObjectShape(triple.predicate, "entity"));
            }
            (PredicateKind::Facet(_), Object::Entity(_))
            | (PredicateKind::DataProperty(..), Object::Entity(_)) => {
                return Err(KbError::ObjectShape(triple.predicate, "literal"));
            }
            _ => {}
        }
        self.entities.insert(triple.subject.clone());
        if let (PredicateKind::Relation(_), Object::Entity(obj)) = (&kind, &triple.object) {
            self.entities.insert(obj.clone());
        }
        self.abox.insert(triple);
        Ok(())
    }

    /// Removes every ABox triple with the given subject and predicate.
    pub(crate) fn retract_triples(&mut self, subject: &EntityId, predicate: &str) {
        self.abox
            .retain(|t| !(t.subject == *subject && t.predicate == predicate));
    }

    pub(crate) fn rewrite_abox<F>(&mut self, f: F)
    where
        F: Fn(&Triple) -> Triple,
    {
        self.abox = self.abox.iter().map(f).collect();
    }

    /// Renders an IRI for display: strips the longest matching declared
    /// prefix base (or the namespace) and maps underscores back to spaces.
    /// Unrecognized IRIs are returned unchanged.
    pub fn display_iri(&self, iri: &str) -> String {
        let mut bases: Vec<&str> = self.prefixes.values().map(String::as_str).collect();
        bases.push(&self.namespace);
        bases.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        bases.dedup();
        for base in bases {
            if let Some(local) = iri.strip_prefix(base) {
                if !local.is_empty() {
                    return local.replace('_', " ");
                }
            }
        }
        iri.to_string()
    }

    /// Clones the knowledge base into an immutable snapshot with the
    /// inference closure materialized.
    pub fn freeze(&self) -> Snapshot {
        let mut materialized: BTreeSet<Triple> = self.abox.clone();
        // Inherited typings: an entity typed to C is also typed to every
        // ancestor of C.
        for triple in &self.abox {
            if triple.predicate != RDF_TYPE {
                continue;
            }
            let Object::Entity(class) = &triple.object else {
                continue;
            };
            let Some(cid) = self.concept_of_iri(class.as_str()) else {
                continue;
            };
            for anc in self.ancestors(&cid).unwrap_or_default() {
                if let Some(iri) = self.class_iri(&anc) {
                    materialized.insert(Triple::new(
                        triple.subject.clone(),
                        RDF_TYPE,
                        Object::Entity(EntityId::new(iri)),
                    ));
                }
            }
        }
        // Strict transitive subclass pairs between class IRIs.
        for id in self.concepts.keys() {
            let sub = self.class_iri(id).expect("concept has an IRI");
            for anc in self.ancestors(id).unwrap_or_default() {
                if let Some(sup) = self.class_iri(&anc) {
                    materialized.insert(Triple::new(
                        EntityId::new(sub.clone()),
                        RDFS_SUBCLASS_OF,
                        Object::Entity(EntityId::new(sup)),
                    ));
                }
            }
        }
        Snapshot {
            kb: self.clone(),
            materialized: materialized.into_iter().collect(),
        }
    }
}

/// An immutable view of a knowledge base with the typing/subclass closure
/// materialized.  Queries run against this, never against the live KB.
#[derive(Debug, Clone)]
pub struct Snapshot {
    kb: KnowledgeBase,
    materialized: Vec<Triple>,
}

impl Snapshot {
    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    /// ABox triples plus inherited typings plus subclass pairs, sorted.
    pub fn materialized(&self) -> &[Triple] {
        &self.materialized
    }
}

impl std::ops::Deref for Snapshot {
    type Target = KnowledgeBase;

    fn deref(&self) -> &KnowledgeBase {
        &self.kb
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(label: &str, gloss: &str) -> AttributeValue {
        AttributeValue {
            label: label.to_string(),
            gloss: gloss.to_string(),
            synonyms: Vec::new(),
        }
    }

    #[test]
    fn add_concept_roots_and_children() {
        let mut kb = KnowledgeBase::new();
        let root = kb
            .add_concept("Educational Institution", "an institution for education", Stereotype::Kind, None)
            .unwrap();
        let school = kb
            .add_concept("School", "an educational institution", Stereotype::Subkind, Some(&root))
            .unwrap();
        assert_eq!(kb.concepts().len(), 2);
        assert_eq!(kb.ancestors(&school).unwrap(), vec![root.clone()]);
        assert_eq!(kb.ancestors(&root).unwrap(), Vec::<ConceptId>::new());
    }

    #[test]
    fn duplicate_label_is_rejected_after_normalization() {
        let mut kb = KnowledgeBase::new();
        kb.add_concept("School", "g", Stereotype::Subkind, None).unwrap();
        let err = kb
            .add_concept("  school ", "g2", Stereotype::Subkind, None)
            .unwrap_err();
        assert_eq!(err, KbError::DuplicateLabel("school".into()));
    }

    #[test]
    fn empty_label_is_rejected() {
        let mut kb = KnowledgeBase::new();
        assert_eq!(
            kb.add_concept("   ", "g", Stereotype::Kind, None).unwrap_err(),
            KbError::EmptyLabel
        );
    }

    #[test]
    fn unknown_and_obsolete_parents_are_rejected() {
        let mut kb = KnowledgeBase::new();
        let ghost = ConceptId("c999".into());
        assert_eq!(
            kb.add_concept("X", "g", Stereotype::Subkind, Some(&ghost)).unwrap_err(),
            KbError::UnknownParent
        );
        let p = kb.add_concept("P", "g", Stereotype::Kind, None).unwrap();
        kb.mark_obsolete(&p).unwrap();
        assert!(matches!(
            kb.add_concept("Y", "g", Stereotype::Subkind, Some(&p)).unwrap_err(),
            KbError::ObsoleteParent(_)
        ));
    }

    #[test]
    fn add_is_a_rejects_cycles_and_second_parents() {
        let mut kb = KnowledgeBase::new();
        let a = kb.add_concept("A", "g", Stereotype::Kind, None).unwrap();
        let b = kb.add_concept("B", "g", Stereotype::Subkind, Some(&a)).unwrap();
        let c = kb.add_concept("C", "g", Stereotype::Subkind, Some(&b)).unwrap();
        assert!(matches!(kb.add_is_a(&a, &c), Err(KbError::CycleDetected(_))));
        assert!(matches!(kb.add_is_a(&a, &a), Err(KbError::CycleDetected(_))));
        let d = kb.add_concept("D", "g", Stereotype::Kind, None).unwrap();
        assert!(matches!(kb.add_is_a(&c, &d), Err(KbError::MultipleParents(_))));
        kb.add_is_a(&a, &d).unwrap();
        assert_eq!(kb.ancestors(&c).unwrap(), vec![b, a, d]);
    }

    #[test]
    fn ancestors_matches_single_step_walk_on_random_forests() {
        // Oracle: repeated one-step parent lookup over the raw edge list.
        fn oracle(edges: &BTreeSet<(ConceptId, ConceptId)>, start: &ConceptId) -> Vec<ConceptId> {
            let mut out = Vec::new();
            let mut cur = start.clone();
            loop {
                match edges.iter().find(|(c, _)| *c == cur) {
                    Some((_, p)) => {
                        out.push(p.clone());
                        cur = p.clone();
                    }
                    None => return out,
                }
            }
        }

        // Tiny deterministic generator; no external RNG needed.
        let mut state: u64 = 0x2545F4914F6CDD1D;
        let mut next = move |bound: u64| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state % bound
        };

        for _case in 0..50 {
            let mut kb = KnowledgeBase::new();
            let n = 2 + next(19) as usize;
            let mut ids: Vec<ConceptId> = Vec::new();
            for i in 0..n {
                // Parent (if any) is always an earlier node: acyclic by construction.
                let parent_idx = if i > 0 && next(4) > 0 {
                    Some(next(i as u64) as usize)
                } else {
                    None
                };
                let parent = parent_idx.map(|p| ids[p].clone());
                let id = kb
                    .add_concept(&format!("N{i}"), "g", Stereotype::Subkind, parent.as_ref())
                    .unwrap();
                ids.push(id);
            }
            for id in &ids {
                assert_eq!(kb.ancestors(id).unwrap(), oracle(kb.isa_edges(), id));
            }
        }
    }

    #[test]
    fn attribute_values_enforce_disjointness_and_uniqueness() {
        let mut kb = KnowledgeBase::new();
        let school = kb.add_concept("School", "g", Stereotype::Subkind, None).unwrap();
        kb.add_attribute_value("timing", &school, value("day", "daytime")).unwrap();
        assert_eq!(
            kb.add_attribute_value("timing", &school, value("Day", "again")).unwrap_err(),
            KbError::DuplicateValue("day".into(), "timing".into())
        );
        assert_eq!(
            kb.add_attribute_value("timing", &school, value("school", "clash")).unwrap_err(),
            KbError::ValueClashesWithConcept("school".into())
        );
        assert_eq!(
            kb.add_concept("day", "g", Stereotype::Subkind, None).unwrap_err(),
            KbError::LabelClashesWithValue("day".into())
        );
    }

    #[test]
    fn material_relations_need_a_relator() {
        let mut kb = KnowledgeBase::new();
        let person = kb.add_concept("Person", "g", Stereotype::Kind, None).unwrap();
        let org = kb.add_concept("Organization", "g", Stereotype::Kind, None).unwrap();
        let relator = kb.add_concept("Presidency", "g", Stereotype::Relator, None).unwrap();
        let decl = RelationDecl {
            name: "PresidentOf".into(),
            kind: RelationKind::Material,
            domain: person.clone(),
            range: org.clone(),
            via_relator: None,
            domain_card: None,
            range_card: None,
        };
        assert!(matches!(
            kb.declare_relation(decl.clone()).unwrap_err(),
            KbError::RelatorRequired(_)
        ));
        let bad = RelationDecl {
            via_relator: Some(person.clone()),
            ..decl.clone()
        };
        assert!(matches!(kb.declare_relation(bad).unwrap_err(), KbError::BadStereotype(_)));
        let good = RelationDecl {
            via_relator: Some(relator),
            ..decl
        };
        kb.declare_relation(good).unwrap();
        assert_eq!(kb.relation_decls().len(), 1);
    }

    #[test]
    fn assert_triple_checks_subject_predicate_and_shape() {
        let mut kb = KnowledgeBase::new();
        let person = kb.add_concept("Person", "g", Stereotype::Kind, None).unwrap();
        let org = kb.add_concept("Organization", "g", Stereotype::Kind, None).unwrap();
        let relator = kb.add_concept("Presidency", "g", Stereotype::Relator, None).unwrap();
        kb.declare_relation(RelationDecl {
            name: "PresidentOf".into(),
            kind: RelationKind::Material,
            domain: person.clone(),
            range: org.clone(),
            via_relator: Some(relator),
            domain_card: None,
            range_card: None,
        })
        .unwrap();

        let maria = EntityId::new(format!("{}Maria", kb.namespace()));
        let eua = EntityId::new(format!("{}EUA", kb.namespace()));
        let pred = kb.predicate_iri("PresidentOf");

        let t = Triple::new(maria.clone(), pred.clone(), Object::Entity(eua.clone()));
        assert!(matches!(
            kb.assert_triple(t.clone()).unwrap_err(),
            KbError::UnknownSubject(_)
        ));
        kb.register_entity(maria.clone());
        kb.assert_triple(t.clone()).unwrap();
        // Idempotent.
        kb.assert_triple(t).unwrap();
        assert_eq!(kb.abox().len(), 1);
        // Object entity got minted on sight.
        assert!(kb.entities().contains(&eua));

        let bad_pred = Triple::new(
            maria.clone(),
            format!("{}neverDeclared", kb.namespace()),
            Object::Entity(eua.clone()),
        );
        assert!(matches!(
            kb.assert_triple(bad_pred).unwrap_err(),
            KbError::UndeclaredPredicate(_)
        ));

        let literal_object = Triple::new(
            maria.clone(),
            pred,
            Object::Literal(Literal::string("not an entity")),
        );
        assert!(matches!(
            kb.assert_triple(literal_object).unwrap_err(),
            KbError::ObjectShape(..)
        ));

        // Typing an obsolete class is refused.
        kb.mark_obsolete(&org).unwrap();
        let org_iri = kb.class_iri(&org).unwrap();
        let typing = Triple::new(maria, RDF_TYPE, Object::Entity(EntityId::new(org_iri)));
        assert!(matches!(
            kb.assert_triple(typing).unwrap_err(),
            KbError::ObsoleteTyping(_)
        ));
    }

    #[test]
    fn freeze_materializes_inherited_typings_and_subclass_pairs() {
        let mut kb = KnowledgeBase::new();
        let ei = kb.add_concept("Educational Institution", "g", Stereotype::Kind, None).unwrap();
        let school = kb.add_concept("School", "g", Stereotype::Subkind, Some(&ei)).unwrap();
        let primary = kb.add_concept("Primary school", "g", Stereotype::Subkind, Some(&school)).unwrap();

        let e = EntityId::new(format!("{}Some_School", kb.namespace()));
        kb.register_entity(e.clone());
        let primary_iri = kb.class_iri(&primary).unwrap();
        kb.assert_triple(Triple::new(e.clone(), RDF_TYPE, Object::Entity(EntityId::new(primary_iri))))
            .unwrap();

        let snap = kb.freeze();
        let types: Vec<&Triple> = snap
            .materialized()
            .iter()
            .filter(|t| t.subject == e && t.predicate == RDF_TYPE)
            .collect();
        assert_eq!(types.len(), 3, "direct, School, and Educational Institution");

        let sub_pairs = snap
            .materialized()
            .iter()
            .filter(|t| t.predicate == RDFS_SUBCLASS_OF)
            .count();
        // School->EI, Primary->School, Primary->EI.
        assert_eq!(sub_pairs, 3);
        // The ABox itself is untouched by freezing.
        assert_eq!(kb.abox().len(), 1);
    }

    #[test]
    fn resolve_label_prefers_preferred_labels_over_synonyms() {
        let mut kb = KnowledgeBase::new();
        let a = kb.add_concept("Tertiary school", "g", Stereotype::Subkind, None).unwrap();
        kb.add_synonym(&a, "Post-secondary school").unwrap();
        let b = kb.add_concept("College", "g", Stereotype::Subkind, None).unwrap();
        // A synonym may shadow another concept's preferred label; resolution
        // still prefers the preferred label.
        kb.add_synonym(&b, "Tertiary SCHOOL").unwrap();
        assert_eq!(kb.resolve_label("post-secondary school"), Some(a.clone()));
        assert_eq!(kb.resolve_label("Tertiary school"), Some(a.clone()));
        assert_eq!(kb.resolve_label("missing"), None);
        // A synonym equal to the concept's own preferred label is refused.
        assert!(matches!(
            kb.add_synonym(&a, " tertiary  school"),
            Err(KbError::SynonymIsPreferred(_))
        ));
        let _ = b;
    }

    #[test]
    fn stats_summary_counts_everything_once() {
        let mut kb = KnowledgeBase::new();
        let a = kb.add_concept("A", "g", Stereotype::Kind, None).unwrap();
        let b = kb.add_concept("B", "g", Stereotype::Subkind, Some(&a)).unwrap();
        kb.add_attribute_value("f", &a, value("v1", "g")).unwrap();
        kb.add_attribute_value("f", &a, value("v2", "g")).unwrap();
        kb.declare_relation(RelationDecl {
            name: "partOf".into(),
            kind: RelationKind::Partitive,
            domain: b.clone(),
            range: a.clone(),
            via_relator: None,
            domain_card: Some(Cardinality { min: 0, max: Some(1) }),
            range_card: None,
        })
        .unwrap();
        let e = EntityId::new(format!("{}e", kb.namespace()));
        kb.register_entity(e.clone());
        let a_iri = kb.class_iri(&a).unwrap();
        kb.assert_triple(Triple::new(e, RDF_TYPE, Object::Entity(EntityId::new(a_iri)))).unwrap();

        let stats = StatsSummary::compute(&kb);
        assert_eq!(stats.class_count, 2);
        assert_eq!(stats.attribute_facet_count, 1);
        assert_eq!(stats.value_count, 2);
        assert_eq!(stats.relation_decl_count, 1);
        assert_eq!(stats.isa_edge_count, 1);
        assert_eq!(stats.triple_count, 1);
        assert_eq!(stats.logical_assertion_count, 1 + 1 + 1);
    }

    #[test]
    fn display_iri_strips_longest_base_and_restores_spaces() {
        let kb = KnowledgeBase::new();
        let iri = format!("{}Maria_Helena_Nazar%C3%A9_x", kb.namespace());
        // no decoding of percent escapes — only underscores map back
        assert_eq!(kb.display_iri(&iri), "Maria Helena Nazar%C3%A9 x");
        assert_eq!(kb.display_iri("http://unknown.example/x"), "http://unknown.example/x");
    }
}
