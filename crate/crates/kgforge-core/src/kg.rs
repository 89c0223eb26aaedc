//! Stage 4: generate the document's knowledge graph from its QA pairs,
//! grounded by the ontology, then enforce ontology closure — `wdt:`
//! predicates that are not ontology entries are removed (the prompt forbids
//! them but cannot guarantee compliance).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cq::{Document, QAPair};
use crate::llm::{bindings, Gateway, LlmError, TemplateName};
use crate::ontology::OntologyDocument;
use crate::rdf::{
    extract_valid_triples_seeded, sanitize_local_name, standard_prefixes, Graph, Term, WDT_NS,
    WD_NS,
};

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error(transparent)]
    Gateway(#[from] LlmError),
    #[error("label has no alphanumeric characters")]
    EmptyResult,
}

/// A generated KG plus its recovery and closure counters; the raw response
/// is kept for audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KgResult {
    pub graph: Graph,
    pub skipped_statements: usize,
    pub dropped_off_ontology: usize,
    pub raw_response: String,
}

impl KgResult {
    fn empty() -> KgResult {
        KgResult {
            graph: Graph::with_standard_prefixes(),
            skipped_statements: 0,
            dropped_off_ontology: 0,
            raw_response: String::new(),
        }
    }
}

/// Render the generation prompt with the ontology Turtle, document, and QA
/// block, recover triples from the reply, and apply ontology closure. An
/// empty QA list produces an empty graph without calling the LLM; an empty
/// resulting graph is a valid (flagged) outcome, not an error.
pub fn build_kg(
    gateway: &Gateway,
    document: &Document,
    qa: &[QAPair],
    ontology: &OntologyDocument,
    per_pair: bool,
) -> Result<KgResult, KgError> {
    let answered: Vec<&QAPair> = qa.iter().filter(|pair| pair.answered).collect();
    if answered.is_empty() || ontology.is_empty() {
        return Ok(KgResult::empty());
    }
    let labels = ontology.label_set_lower();
    if per_pair {
        let mut merged = KgResult::empty();
        let mut responses = Vec::new();
        for pair in &answered {
            let block = qa_block(&[pair]);
            let partial = generate_once(gateway, document, ontology, &block)?;
            let (closed, dropped) = enforce_ontology_closure(&partial.graph, &labels);
            merged.graph.extend(closed);
            merged.skipped_statements += partial.skipped_statements;
            merged.dropped_off_ontology += dropped;
            responses.push(partial.raw_response);
        }
        merged.raw_response = responses.join("\n\n---\n\n");
        return Ok(merged);
    }
    let block = qa_block(&answered);
    let result = generate_once(gateway, document, ontology, &block)?;
    let (graph, dropped_off_ontology) = enforce_ontology_closure(&result.graph, &labels);
    Ok(KgResult {
        graph,
        skipped_statements: result.skipped_statements,
        dropped_off_ontology,
        raw_response: result.raw_response,
    })
}

fn qa_block(pairs: &[&QAPair]) -> String {
    pairs
        .iter()
        .map(|pair| format!("Q: {}\nA: {}", pair.question.text, pair.answer))
        .collect::<Vec<_>>()
        .join("\n\n")
}

struct RawKg {
    graph: Graph,
    skipped_statements: usize,
    raw_response: String,
}

fn generate_once(
    gateway: &Gateway,
    document: &Document,
    ontology: &OntologyDocument,
    qa_block: &str,
) -> Result<RawKg, KgError> {
    let response = gateway.call(
        TemplateName::KgGeneration,
        &bindings([
            ("ont", ontology.turtle.as_str()),
            ("doc", document.text.as_str()),
            ("qa", qa_block),
        ]),
    )?;
    let recovered = extract_valid_triples_seeded(&response.content, &standard_prefixes());
    Ok(RawKg {
        graph: recovered.graph,
        skipped_statements: recovered.skipped_statements,
        raw_response: response.content,
    })
}

/// Remove triples whose predicate sits in the `wdt:` namespace without a
/// matching ontology label (case-insensitive). Everything else — rdf:type,
/// rdfs:label, and other non-`wdt:` predicates — is retained.
pub fn enforce_ontology_closure(
    graph: &Graph,
    ontology_labels_lower: &BTreeSet<String>,
) -> (Graph, usize) {
    let mut kept = Graph::new();
    for (label, namespace) in graph.prefixes() {
        kept.add_prefix(label.clone(), namespace.clone());
    }
    let mut dropped = 0usize;
    for triple in graph.iter() {
        let off_ontology = triple
            .predicate
            .as_iri()
            .and_then(|iri| iri.strip_prefix(WDT_NS))
            .is_some_and(|local| !ontology_labels_lower.contains(&local.to_lowercase()));
        if off_ontology {
            dropped += 1;
        } else {
            kept.insert(triple.clone());
        }
    }
    (kept, dropped)
}

/// Mint a `wd:` entity IRI from a label: non-alphanumerics become
/// underscores, runs collapse. Used by fixtures and deterministic fallback
/// paths; LLM output keeps whatever IRIs it produced.
pub fn mint_entity_iri(label: &str) -> Result<Term, KgError> {
    let local = sanitize_local_name(label).ok_or(KgError::EmptyResult)?;
    Ok(Term::Iri(format!("{WD_NS}{local}")))
}
