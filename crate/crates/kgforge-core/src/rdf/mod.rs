//! Data model, parser, and serializer for the Turtle subset used by the
//! pipeline's ontologies and generated knowledge graphs.
//!
//! The grammar covers `@prefix` directives, IRIs in angle brackets, prefixed
//! names, the `a` keyword, predicate lists (`;`), object lists (`,`), and
//! plain/typed/language-tagged string literals. Graphs are immutable sets of
//! triples plus a prefix map; all operations here are pure.

mod parser;
mod serializer;

pub use parser::{extract_valid_triples, extract_valid_triples_seeded, parse_turtle, Recovered};
pub(crate) use serializer::escape_literal as serializer_escape;
pub use serializer::{serialize_turtle, serialize_turtle_with, SerializeOptions};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";
pub const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";
pub const WIKIBASE_NS: &str = "http://wikiba.se/ontology#";
pub const SCHEMA_NS: &str = "http://schema.org/";
pub const WD_NS: &str = "http://www.wikidata.org/entity/";
pub const WDT_NS: &str = "http://www.wikidata.org/prop/direct/";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const RDFS_DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
pub const RDFS_RANGE: &str = "http://www.w3.org/2000/01/rdf-schema#range";
pub const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";
pub const SCHEMA_DESCRIPTION: &str = "http://schema.org/description";
pub const WIKIBASE_PROPERTY: &str = "http://wikiba.se/ontology#Property";

/// Sanitize a human label into an IRI local name: non-alphanumeric
/// characters become underscores, runs collapse, ends are trimmed.
/// `None` when nothing alphanumeric survives.
pub fn sanitize_local_name(label: &str) -> Option<String> {
    let mut out = String::with_capacity(label.len());
    let mut pending_underscore = false;
    for c in label.chars() {
        if c.is_alphanumeric() {
            if pending_underscore && !out.is_empty() {
                out.push('_');
            }
            pending_underscore = false;
            out.push(c);
        } else {
            pending_underscore = true;
        }
    }
    (!out.is_empty()).then_some(out)
}

/// The prefix preamble shared by generated ontologies and KGs.
pub fn standard_prefixes() -> BTreeMap<String, String> {
    [
        ("rdf", RDF_NS),
        ("xsd", XSD_NS),
        ("rdfs", RDFS_NS),
        ("owl", OWL_NS),
        ("wikibase", WIKIBASE_NS),
        ("schema", SCHEMA_NS),
        ("wd", WD_NS),
        ("wdt", WDT_NS),
    ]
    .iter()
    .map(|(p, ns)| (p.to_string(), ns.to_string()))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RdfError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown prefix: {0}")]
    UnknownPrefix(String),
    #[error("no prefix declared for namespace {0} and full-IRI emission is disabled")]
    MissingPrefix(String),
    #[error("invalid term: {0}")]
    InvalidTerm(String),
}

/// One component of a triple. Prefixed names are expanded at parse time, so
/// equality is structural over resolved IRIs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Iri(String),
    Literal {
        lexical: String,
        datatype: Option<String>,
        language: Option<String>,
    },
    Blank(String),
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Result<Term, RdfError> {
        let value = value.into();
        if value.is_empty() {
            return Err(RdfError::InvalidTerm("empty IRI".into()));
        }
        if value.chars().any(char::is_whitespace) {
            return Err(RdfError::InvalidTerm(format!(
                "IRI contains whitespace: {value:?}"
            )));
        }
        Ok(Term::Iri(value))
    }

    pub fn plain_literal(lexical: impl Into<String>) -> Term {
        Term::Literal {
            lexical: lexical.into(),
            datatype: None,
            language: None,
        }
    }

    pub fn typed_literal(lexical: impl Into<String>, datatype: impl Into<String>) -> Term {
        Term::Literal {
            lexical: lexical.into(),
            datatype: Some(datatype.into()),
            language: None,
        }
    }

    pub fn lang_literal(lexical: impl Into<String>, language: impl Into<String>) -> Term {
        Term::Literal {
            lexical: lexical.into(),
            datatype: None,
            language: Some(language.into()),
        }
    }

    pub fn blank(label: impl Into<String>) -> Term {
        Term::Blank(label.into())
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal { .. })
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(v) => Some(v),
            _ => None,
        }
    }

    /// Namespace/local split at the last `/` or `#`. Returns `None` for
    /// non-IRI terms or IRIs without a separator.
    pub fn split_iri(&self) -> Option<(&str, &str)> {
        let iri = self.as_iri()?;
        let at = iri.rfind(['/', '#'])?;
        Some((&iri[..at + 1], &iri[at + 1..]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Triple, RdfError> {
        if subject.is_literal() {
            return Err(RdfError::InvalidTerm("literal subject".into()));
        }
        if !predicate.is_iri() {
            return Err(RdfError::InvalidTerm("non-IRI predicate".into()));
        }
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }
}

/// A set of triples plus a prefix map. Duplicate triples are deduplicated
/// (RDF set semantics) and iteration order is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    triples: BTreeSet<Triple>,
    prefixes: BTreeMap<String, String>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn with_standard_prefixes() -> Graph {
        Graph {
            triples: BTreeSet::new(),
            prefixes: standard_prefixes(),
        }
    }

    pub fn insert(&mut self, triple: Triple) -> bool {
        self.triples.insert(triple)
    }

    pub(crate) fn remove(&mut self, triple: &Triple) -> bool {
        self.triples.remove(triple)
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn triples(&self) -> &BTreeSet<Triple> {
        &self.triples
    }

    pub fn into_triples(self) -> BTreeSet<Triple> {
        self.triples
    }

    pub fn add_prefix(&mut self, label: impl Into<String>, namespace: impl Into<String>) {
        self.prefixes.insert(label.into(), namespace.into());
    }

    pub fn prefixes(&self) -> &BTreeMap<String, String> {
        &self.prefixes
    }

    pub fn extend(&mut self, other: Graph) {
        for (label, ns) in other.prefixes {
            self.prefixes.entry(label).or_insert(ns);
        }
        self.triples.extend(other.triples);
    }

    /// Objects of `(subject, predicate, ?)` in deterministic order.
    pub fn objects_of<'a>(
        &'a self,
        subject: &'a Term,
        predicate: &'a str,
    ) -> impl Iterator<Item = &'a Term> {
        self.triples.iter().filter_map(move |t| {
            (&t.subject == subject && t.predicate.as_iri() == Some(predicate)).then_some(&t.object)
        })
    }

    /// Subjects that carry an `rdf:type` of the given class IRI.
    pub fn subjects_of_type<'a>(&'a self, class_iri: &'a str) -> Vec<&'a Term> {
        let mut seen = BTreeSet::new();
        for t in &self.triples {
            if t.predicate.as_iri() == Some(RDF_TYPE) && t.object.as_iri() == Some(class_iri) {
                seen.insert(&t.subject);
            }
        }
        seen.into_iter().collect()
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Graph {
        Graph {
            triples: iter.into_iter().collect(),
            prefixes: BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iri_rejects_whitespace_and_empty() {
        assert!(Term::iri("http://example.org/a b").is_err());
        assert!(Term::iri("").is_err());
        assert!(Term::iri("http://example.org/ok").is_ok());
    }

    #[test]
    fn triple_rejects_literal_subject_and_non_iri_predicate() {
        let iri = Term::iri("http://example.org/x").unwrap();
        let lit = Term::plain_literal("x");
        assert!(Triple::new(lit.clone(), iri.clone(), iri.clone()).is_err());
        assert!(Triple::new(iri.clone(), lit, iri).is_err());
    }

    #[test]
    fn graph_deduplicates() {
        let t = Triple::new(
            Term::iri("http://example.org/s").unwrap(),
            Term::iri("http://example.org/p").unwrap(),
            Term::plain_literal("o"),
        )
        .unwrap();
        let mut g = Graph::new();
        assert!(g.insert(t.clone()));
        assert!(!g.insert(t));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn sanitize_local_name_follows_the_mint_rule() {
        assert_eq!(
            sanitize_local_name("St John's College, Cambridge").as_deref(),
            Some("St_John_s_College_Cambridge")
        );
        assert_eq!(
            sanitize_local_name("party conference").as_deref(),
            Some("party_conference")
        );
        assert_eq!(sanitize_local_name("X").as_deref(), Some("X"));
        assert_eq!(sanitize_local_name("!!!"), None);
    }

    #[test]
    fn split_iri_takes_last_separator() {
        let t = Term::iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type").unwrap();
        assert_eq!(
            t.split_iri(),
            Some(("http://www.w3.org/1999/02/22-rdf-syntax-ns#", "type"))
        );
        let t = Term::iri("http://www.wikidata.org/prop/direct/PlaceOfBirth").unwrap();
        assert_eq!(
            t.split_iri(),
            Some(("http://www.wikidata.org/prop/direct/", "PlaceOfBirth"))
        );
    }
}
