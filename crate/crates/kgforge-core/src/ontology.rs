//! Stage 3: assemble the grounding ontology. Matched Wikidata properties
//! are formatted programmatically (descriptions copied byte for byte, never
//! paraphrased); minted relations are authored by the LLM and recovered
//! from its Turtle reply.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::catalog::PropertyEntry;
use crate::llm::{bindings, Gateway, LlmError, TemplateName};
use crate::rdf::{
    extract_valid_triples_seeded, parse_turtle, sanitize_local_name, standard_prefixes, Graph,
    Term, RDFS_COMMENT, RDFS_DOMAIN, RDFS_LABEL, RDFS_RANGE, SCHEMA_DESCRIPTION, WDT_NS,
    WIKIBASE_PROPERTY,
};
use crate::relations::ExtractedRelation;

#[derive(Debug, thiserror::Error)]
pub enum OntologyError {
    #[error("no property entries recovered from authoring response")]
    ParseFailure { raw: String },
    #[error("malformed ontology document: {0}")]
    Malformed(String),
    #[error(transparent)]
    Gateway(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryOrigin {
    Wikidata(String),
    Minted,
}

/// One ontology property block: the PascalCase label it is published
/// under, its description, and loose domain/range class labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyEntry {
    pub pascal_label: String,
    pub description: String,
    pub label: String,
    pub domains: Vec<String>,
    pub ranges: Vec<String>,
    pub origin: EntryOrigin,
}

/// The assembled ontology: entries plus their Turtle rendering. The text
/// is what grounds KG generation, so it is kept verbatim once produced.
#[derive(Debug, Clone)]
pub struct OntologyDocument {
    pub entries: Vec<OntologyEntry>,
    pub graph: Graph,
    pub turtle: String,
    /// Minted entries renamed to dodge a pascal-label collision.
    pub renamed_collisions: usize,
}

impl OntologyDocument {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lowercased pascal labels, the closure set for generated KGs.
    pub fn label_set_lower(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .map(|e| e.pascal_label.to_lowercase())
            .collect()
    }

    /// Rebuild from a persisted `ontology.ttl`, keeping the text verbatim.
    pub fn from_turtle(text: &str) -> Result<OntologyDocument, OntologyError> {
        let graph = parse_turtle(text).map_err(|e| OntologyError::Malformed(e.to_string()))?;
        let entries = entries_from_graph(&graph, |_| None);
        if entries.is_empty() && graph.iter().next().is_some() {
            return Err(OntologyError::Malformed(
                "no property entries in ontology document".into(),
            ));
        }
        Ok(OntologyDocument {
            entries,
            graph,
            turtle: text.to_string(),
            renamed_collisions: 0,
        })
    }
}

/// Deterministic conversion of matched catalog properties: label,
/// description, domains, and ranges are copied verbatim; output is sorted
/// by pascal label.
pub fn format_wikidata_entries(props: &[PropertyEntry]) -> Vec<OntologyEntry> {
    let mut entries: Vec<OntologyEntry> = props
        .iter()
        .map(|p| OntologyEntry {
            pascal_label: p.pascal_label.clone(),
            description: p.description.clone(),
            label: p.label.clone(),
            domains: p.domains.clone(),
            ranges: p.ranges.clone(),
            origin: EntryOrigin::Wikidata(p.pid.clone()),
        })
        .collect();
    entries.sort_by(|a, b| a.pascal_label.cmp(&b.pascal_label));
    entries
}

#[derive(Debug, Clone)]
pub struct AuthoredEntries {
    pub entries: Vec<OntologyEntry>,
    /// Statements skipped during recovery plus property blocks discarded
    /// for being unusable.
    pub dropped: usize,
    pub raw_response: String,
}

/// Author ontology entries for minted relations in one LLM call. The reply
/// is Turtle; malformed blocks are dropped and counted rather than failing
/// the stage.
pub fn author_minted_entries(
    gateway: &Gateway,
    minted: &[ExtractedRelation],
    concepts: &[String],
) -> Result<AuthoredEntries, OntologyError> {
    if minted.is_empty() {
        return Ok(AuthoredEntries {
            entries: Vec::new(),
            dropped: 0,
            raw_response: String::new(),
        });
    }
    let mut relation_block: String = minted
        .iter()
        .map(|r| format!("({}, {})", r.name, r.usage_comment))
        .collect::<Vec<_>>()
        .join("\n");
    if !concepts.is_empty() {
        relation_block.push_str("\n\nConcepts: ");
        relation_block.push_str(&concepts.join(", "));
    }
    let response = gateway.call(
        TemplateName::OntologyFormatting,
        &bindings([("relation", relation_block.as_str())]),
    )?;
    let raw = response.content;
    let recovered = extract_valid_triples_seeded(&raw, &standard_prefixes());
    let mut dropped = recovered.skipped_statements;

    // An entry missing its description can still inherit the relation's own
    // usage comment.
    let comment_for = |pascal: &str| -> Option<String> {
        let wanted = pascal.to_lowercase();
        minted
            .iter()
            .find(|r| {
                crate::catalog::pascal_case(&r.name)
                    .map(|p| p.to_lowercase() == wanted)
                    .unwrap_or(false)
            })
            .map(|r| r.usage_comment.clone())
    };
    let mut entries = entries_from_graph(&recovered.graph, comment_for);
    let recovered_subjects = recovered.graph.subjects_of_type(WIKIBASE_PROPERTY).len();
    dropped += recovered_subjects.saturating_sub(entries.len());
    if entries.is_empty() {
        return Err(OntologyError::ParseFailure { raw });
    }
    for entry in &mut entries {
        entry.origin = EntryOrigin::Minted;
    }
    Ok(AuthoredEntries {
        entries,
        dropped,
        raw_response: raw,
    })
}

/// Pull `wikibase:Property` blocks out of a graph. `fallback_comment`
/// supplies a description when the block itself lacks one; blocks still
/// without a description are dropped.
fn entries_from_graph(
    graph: &Graph,
    fallback_comment: impl Fn(&str) -> Option<String>,
) -> Vec<OntologyEntry> {
    let mut entries = Vec::new();
    for subject in graph.subjects_of_type(WIKIBASE_PROPERTY) {
        let Some((namespace, local)) = subject.split_iri() else {
            continue;
        };
        if namespace != WDT_NS || local.is_empty() {
            continue;
        }
        let literal_of = |predicate: &str| {
            graph.objects_of(subject, predicate).find_map(|t| match t {
                Term::Literal { lexical, .. } => Some(lexical.clone()),
                _ => None,
            })
        };
        let description = literal_of(SCHEMA_DESCRIPTION)
            .or_else(|| literal_of(RDFS_COMMENT))
            .or_else(|| fallback_comment(local));
        let Some(description) = description.filter(|d| !d.trim().is_empty()) else {
            continue;
        };
        let label = literal_of(RDFS_LABEL)
            .filter(|l| !l.trim().is_empty())
            .unwrap_or_else(|| local.to_string());
        let class_labels = |predicate: &str| {
            graph
                .objects_of(subject, predicate)
                .filter_map(term_to_class_label)
                .collect::<Vec<_>>()
        };
        entries.push(OntologyEntry {
            pascal_label: local.to_string(),
            description,
            label,
            domains: class_labels(RDFS_DOMAIN),
            ranges: class_labels(RDFS_RANGE),
            origin: EntryOrigin::Minted,
        });
    }
    entries
}

fn term_to_class_label(term: &Term) -> Option<String> {
    match term {
        Term::Iri(_) => {
            let (_, local) = term.split_iri()?;
            (!local.is_empty()).then(|| local.replace('_', " "))
        }
        Term::Literal { lexical, .. } => Some(lexical.clone()),
        Term::Blank(_) => None,
    }
}

/// Merge formatted and authored entries into one document. Pascal-label
/// collisions rename the minted side with a "2" suffix (counted). Output
/// is deterministic: entries sorted by pascal label, one block each.
pub fn assemble_ontology(
    wikidata_entries: Vec<OntologyEntry>,
    minted_entries: Vec<OntologyEntry>,
) -> OntologyDocument {
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut entries: Vec<OntologyEntry> = Vec::new();
    let mut renamed_collisions = 0usize;
    for entry in wikidata_entries {
        if taken.insert(entry.pascal_label.clone()) {
            entries.push(entry);
        }
    }
    for mut entry in minted_entries {
        if taken.contains(&entry.pascal_label) {
            renamed_collisions += 1;
            while taken.contains(&entry.pascal_label) {
                entry.pascal_label.push('2');
            }
        }
        taken.insert(entry.pascal_label.clone());
        entries.push(entry);
    }
    entries.sort_by(|a, b| a.pascal_label.cmp(&b.pascal_label));

    let turtle = render_ontology(&entries);
    let graph = parse_turtle(&turtle).expect("assembled ontology parses");
    OntologyDocument {
        entries,
        graph,
        turtle,
        renamed_collisions,
    }
}

/// One Turtle block per entry in the ontology-prompt house style:
/// `a wikibase:Property ; schema:description ; rdfs:label ; rdfs:domain ;
/// rdfs:range`.
fn render_ontology(entries: &[OntologyEntry]) -> String {
    let mut out = String::new();
    for (label, namespace) in standard_prefixes() {
        out.push_str(&format!("@prefix {label}: <{namespace}> .\n"));
    }
    for entry in entries {
        out.push('\n');
        out.push_str(&format!(
            "wdt:{} a wikibase:Property ;\n    schema:description \"{}\" ;\n    rdfs:label \"{}\"",
            entry.pascal_label,
            crate::rdf::serializer_escape(&entry.description),
            crate::rdf::serializer_escape(&entry.label),
        ));
        for (predicate, classes) in [
            ("rdfs:domain", &entry.domains),
            ("rdfs:range", &entry.ranges),
        ] {
            let tokens: Vec<String> = classes
                .iter()
                .filter_map(|c| sanitize_local_name(c))
                .map(|local| format!("wd:{local}"))
                .collect();
            if !tokens.is_empty() {
                out.push_str(&format!(" ;\n    {predicate} {}", tokens.join(", ")));
            }
        }
        out.push_str(" .\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{load_snapshot_str, Catalog};
    use crate::llm::MockBackend;

    const C5_STYLE_RESPONSE: &str = "\
wdt:Results a wikibase:Property ;
    schema:description \"results of a competition such as sports or elections\" ;
    rdfs:label \"results\" ;
    rdfs:domain wd:referendum, wd:competition, wd:party conference, wd:sporting event ;
    rdfs:range wd:electoral result, wd:voting result, wd:sport result, wd:race result .
";

    fn catalog() -> Catalog {
        let lines = [
            serde_json::json!({"pid": "P19", "label": "place of birth", "description": "most specific known birth location of a person", "datatype": "item", "domains": ["person"], "ranges": ["location"]}),
            serde_json::json!({"pid": "P569", "label": "date of birth", "description": "date on which the subject was born", "datatype": "point in time"}),
        ]
        .map(|v| v.to_string())
        .join("\n");
        load_snapshot_str(&lines).unwrap()
    }

    fn minted(name: &str, comment: &str) -> ExtractedRelation {
        ExtractedRelation {
            name: name.into(),
            usage_comment: comment.into(),
            source_doc: "d".into(),
        }
    }

    fn gateway_saying(content: &str) -> (tempfile::TempDir, Gateway) {
        let dir = tempfile::tempdir().unwrap();
        let path = MockBackend::default_fixture_path(dir.path(), TemplateName::OntologyFormatting);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, content).unwrap();
        let gateway = Gateway::mock(dir.path());
        (dir, gateway)
    }

    #[test]
    fn wikidata_entries_copy_fields_verbatim() {
        let catalog = catalog();
        let entries = format_wikidata_entries(catalog.entries());
        assert_eq!(entries.len(), 2);
        // Sorted by pascal label: DateOfBirth before PlaceOfBirth.
        assert_eq!(entries[0].pascal_label, "DateOfBirth");
        assert_eq!(entries[1].pascal_label, "PlaceOfBirth");
        assert_eq!(
            entries[1].description,
            "most specific known birth location of a person"
        );
        assert_eq!(entries[1].origin, EntryOrigin::Wikidata("P19".into()));
        assert_eq!(entries[1].domains, vec!["person"]);
        assert!(format_wikidata_entries(&[]).is_empty());
    }

    #[test]
    fn authoring_recovers_the_reference_block() {
        let (_dir, gateway) = gateway_saying(C5_STYLE_RESPONSE);
        let authored = author_minted_entries(
            &gateway,
            &[minted(
                "results",
                "results of a competition such as sports or elections",
            )],
            &["competition".into()],
        )
        .unwrap();
        assert_eq!(authored.entries.len(), 1);
        let entry = &authored.entries[0];
        assert_eq!(entry.pascal_label, "Results");
        assert_eq!(entry.label, "results");
        assert!(entry.domains.contains(&"competition".to_string()));
        assert!(entry.domains.contains(&"party conference".to_string()));
        assert_eq!(entry.domains.len(), 4);
        assert_eq!(entry.ranges.len(), 4);
        assert_eq!(entry.origin, EntryOrigin::Minted);
        assert_eq!(authored.dropped, 0);
    }

    #[test]
    fn empty_minted_set_makes_no_call() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = Gateway::mock(dir.path());
        let authored = author_minted_entries(&gateway, &[], &[]).unwrap();
        assert!(authored.entries.is_empty());
        assert_eq!(gateway.counters.backend_calls(), 0);
    }

    #[test]
    fn malformed_block_is_dropped_and_counted() {
        let response = format!(
            "{C5_STYLE_RESPONSE}\nwdt:Broken a wikibase:Property ;\n    schema:description <unterminated .\n"
        );
        let (_dir, gateway) = gateway_saying(&response);
        let authored = author_minted_entries(
            &gateway,
            &[
                minted("results", "results of a competition"),
                minted("broken", "nope"),
            ],
            &[],
        )
        .unwrap();
        assert_eq!(authored.entries.len(), 1);
        assert_eq!(authored.dropped, 1);
    }

    #[test]
    fn all_malformed_is_parse_failure() {
        let (_dir, gateway) = gateway_saying("I don't know.");
        let err = author_minted_entries(&gateway, &[minted("x", "y")], &[]).unwrap_err();
        assert!(matches!(err, OntologyError::ParseFailure { .. }));
    }

    #[test]
    fn assembled_document_round_trips_and_counts_blocks() {
        let catalog = catalog();
        let wikidata = format_wikidata_entries(&catalog.entries()[..1]);
        let minted_entries = vec![OntologyEntry {
            pascal_label: "Results".into(),
            description: "results of a competition".into(),
            label: "results".into(),
            domains: vec!["competition".into()],
            ranges: vec!["sport result".into()],
            origin: EntryOrigin::Minted,
        }];
        let document = assemble_ontology(wikidata, minted_entries);
        assert_eq!(document.entries.len(), 2);
        assert_eq!(document.graph.subjects_of_type(WIKIBASE_PROPERTY).len(), 2);
        let reparsed = parse_turtle(&document.turtle).unwrap();
        assert_eq!(reparsed.triples(), document.graph.triples());
    }

    #[test]
    fn empty_inputs_make_a_prefix_only_document() {
        let document = assemble_ontology(Vec::new(), Vec::new());
        assert!(document.is_empty());
        assert!(document
            .turtle
            .lines()
            .all(|l| l.is_empty() || l.starts_with("@prefix")));
        assert!(document.graph.is_empty());
    }

    #[test]
    fn reference_block_as_sole_entry_reparses_with_full_classes() {
        let (_dir, gateway) = gateway_saying(C5_STYLE_RESPONSE);
        let authored = author_minted_entries(
            &gateway,
            &[minted(
                "results",
                "results of a competition such as sports or elections",
            )],
            &[],
        )
        .unwrap();
        let document = assemble_ontology(Vec::new(), authored.entries);
        let rebuilt = OntologyDocument::from_turtle(&document.turtle).unwrap();
        assert_eq!(rebuilt.entries.len(), 1);
        assert_eq!(rebuilt.entries[0].domains.len(), 4);
        assert_eq!(rebuilt.entries[0].ranges.len(), 4);
    }

    #[test]
    fn collisions_rename_the_minted_side() {
        let catalog = catalog();
        let wikidata = format_wikidata_entries(catalog.entries());
        let clash = OntologyEntry {
            pascal_label: "PlaceOfBirth".into(),
            description: "a minted clash".into(),
            label: "place of birth".into(),
            domains: Vec::new(),
            ranges: Vec::new(),
            origin: EntryOrigin::Minted,
        };
        let document = assemble_ontology(wikidata, vec![clash]);
        assert_eq!(document.renamed_collisions, 1);
        assert!(document
            .entries
            .iter()
            .any(|e| e.pascal_label == "PlaceOfBirth2"));
    }

    #[test]
    fn label_set_is_lowercased_for_closure() {
        let catalog = catalog();
        let document = assemble_ontology(format_wikidata_entries(catalog.entries()), Vec::new());
        let labels = document.label_set_lower();
        assert!(labels.contains("placeofbirth"));
        assert!(labels.contains("dateofbirth"));
    }
}
