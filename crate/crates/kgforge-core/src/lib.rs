//! Ontology-grounded knowledge graph construction from unstructured
//! documents.
//!
//! The pipeline runs four stages per document: competency-question
//! generation and answering ([`cq`]), relation extraction ([`relations`])
//! with alignment against a Wikidata property catalog ([`matcher`] over
//! [`catalog`] + [`embed`]), ontology assembly ([`ontology`]), and
//! ontology-grounded KG generation ([`kg`]). Generated graphs are parsed
//! and serialized by [`rdf`] and scored against gold triples by [`eval`].
//! [`pipeline`] ties the stages together with resumable, per-document
//! artifacts.

pub mod catalog;
pub mod cq;
pub mod embed;
pub mod eval;
pub mod kg;
pub mod llm;
pub mod matcher;
pub mod ontology;
pub mod pipeline;
pub mod rdf;
pub mod relations;

// Re-exports for convenience
pub use catalog::{Catalog, Datatype, PropertyEntry};
pub use cq::{CompetencyQuestion, Document, QAPair};
pub use eval::{Criterion, EvalReport, GoldTriple};
pub use kg::KgResult;
pub use llm::{ChatRequest, ChatResponse, Gateway, TemplateName};
pub use matcher::{FinalPropertySet, MatchDecision, MatchMode, MatchOutcome};
pub use ontology::{OntologyDocument, OntologyEntry};
pub use pipeline::{RunConfig, RunManifest};
pub use rdf::{Graph, Term, Triple};
pub use relations::ExtractedRelation;

#[cfg(test)]
pub(crate) mod testhttp;
