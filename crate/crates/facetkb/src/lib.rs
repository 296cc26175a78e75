//! A faceted knowledge-base engine for the educational-institutions domain.
//!
//! The crate keeps a schema of singly-inherited concepts ("the TBox"), a set of
//! attribute facets attached to those concepts, relation declarations, and an
//! ABox of entity-level triples.  Around that core sit:
//!
//! * a plain-text outline format for authoring and persisting schemas
//!   ([`outline`]),
//! * an N-Triples serializer for the ABox ([`ntriples`]),
//! * scripted schema refactoring: merges, demotions to attribute values,
//!   deletions and obsoletion ([`refactor`]),
//! * an ISCED 2011 level mapping ([`isced`]),
//! * a conjunctive query engine over frozen snapshots ([`query`]),
//! * CSV ingestion with deterministic entity minting ([`ingest`]),
//! * a lint suite with consistency, conciseness and completeness checks
//!   ([`validate`]).
//!
//! The `facetkb` binary wires these together behind `build`, `query`, `lint`,
//! `ingest`, `export` and `stats` subcommands; see [`cli`].

pub mod cli;
pub mod error;
pub mod ingest;
pub mod isced;
pub mod kb;
pub mod manifest;
pub mod ntriples;
pub mod outline;
pub mod query;
pub mod refactor;
pub mod validate;

pub use error::SyntaxError;
pub use kb::{
    Cardinality, Concept, ConceptId, DatatypeTag, EntityId, KbError, KnowledgeBase, Literal,
    Object, RelationDecl, RelationKind, Snapshot, Stereotype, Triple,
};
