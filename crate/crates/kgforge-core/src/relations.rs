//! Stage 2a: extract candidate relations (with usage comments) from a
//! document and its competency questions. The prompt also yields a concept
//! list, kept as plain strings and forwarded to ontology authoring as
//! context.

use serde::{Deserialize, Serialize};

use crate::cq::{CompetencyQuestion, Document};
use crate::llm::{bindings, Gateway, LlmError, TemplateName};

#[derive(Debug, thiserror::Error)]
pub enum RelationError {
    #[error("no relation tuples recognized in response")]
    ParseFailure { raw: String },
    #[error(transparent)]
    Gateway(#[from] LlmError),
}

/// An LLM-proposed relation: surface name plus a usage comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedRelation {
    pub name: String,
    pub usage_comment: String,
    pub source_doc: String,
}

impl ExtractedRelation {
    /// Normalized form used for deduplication: lowercase, collapsed
    /// whitespace.
    pub fn normalized_name(&self) -> String {
        normalize_relation_name(&self.name)
    }

    /// Text embedded for candidate retrieval.
    pub fn embedding_text(&self, labeled: bool) -> String {
        if labeled {
            format!("{}: {}", self.name, self.usage_comment)
        } else {
            self.usage_comment.clone()
        }
    }
}

pub fn normalize_relation_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationOutcome {
    pub relations: Vec<ExtractedRelation>,
    pub concepts: Vec<String>,
    /// Raw response for audit: every kept relation traces to one
    /// parenthesized line here.
    pub raw_response: String,
}

/// Markers that make an empty extraction a valid outcome rather than a
/// parse failure; the prompt explicitly allows both.
const EMPTY_OUTCOME_MARKERS: [&str; 3] = ["no valid propert", "no relations", "don't know"];

/// Render the extraction prompt with the document and its numbered CQs and
/// parse `(name, comment)` lines, splitting at the first comma only.
/// Duplicate names (after normalization) keep the first occurrence.
pub fn extract_relations(
    gateway: &Gateway,
    document: &Document,
    cqs: &[CompetencyQuestion],
) -> Result<RelationOutcome, RelationError> {
    if cqs.is_empty() {
        return Ok(RelationOutcome {
            relations: Vec::new(),
            concepts: Vec::new(),
            raw_response: String::new(),
        });
    }
    let numbered: Vec<String> = cqs
        .iter()
        .map(|cq| format!("CQ{}. {}", cq.index, cq.text))
        .collect();
    let response = gateway.call(
        TemplateName::RelationExtraction,
        &bindings([
            ("document to be processed", document.text.as_str()),
            ("CQs", numbered.join("\n").as_str()),
        ]),
    )?;
    let raw = response.content;

    // Concept section starts at a "Concepts:" header; tuple lines after it
    // are concepts, not relations.
    let (relation_part, concept_part) = split_concepts(&raw);

    let mut relations: Vec<ExtractedRelation> = Vec::new();
    for line in relation_part.lines() {
        let Some((name, comment)) = parse_tuple_line(line) else {
            continue;
        };
        let candidate = ExtractedRelation {
            name: name.to_lowercase(),
            usage_comment: comment,
            source_doc: document.id.clone(),
        };
        if relations
            .iter()
            .all(|r| r.normalized_name() != candidate.normalized_name())
        {
            relations.push(candidate);
        }
    }

    if relations.is_empty() {
        let lowered = raw.to_lowercase();
        if !EMPTY_OUTCOME_MARKERS.iter().any(|m| lowered.contains(m)) {
            return Err(RelationError::ParseFailure { raw });
        }
    }

    let concepts = concept_part.map(parse_concepts).unwrap_or_default();
    Ok(RelationOutcome {
        relations,
        concepts,
        raw_response: raw,
    })
}

fn split_concepts(raw: &str) -> (&str, Option<&str>) {
    let mut offset = 0usize;
    for segment in raw.split_inclusive('\n') {
        let trimmed = segment.trim_start();
        if trimmed
            .get(..9)
            .is_some_and(|head| head.eq_ignore_ascii_case("concepts:"))
        {
            return (&raw[..offset], Some(&raw[offset + segment.len()..]));
        }
        offset += segment.len();
    }
    (raw, None)
}

/// `(name, comment with, commas)` -> ("name", "comment with, commas")
fn parse_tuple_line(line: &str) -> Option<(String, String)> {
    let trimmed = line.trim();
    let inner = trimmed.strip_prefix('(')?.strip_suffix(')')?;
    let (name, comment) = inner.split_once(',')?;
    let name = name.trim();
    let comment = comment.trim();
    if name.is_empty() || comment.is_empty() || name.contains(['(', ')', '\n']) {
        return None;
    }
    Some((name.to_string(), comment.to_string()))
}

fn parse_concepts(part: &str) -> Vec<String> {
    let mut concepts = Vec::new();
    for line in part.lines() {
        let cleaned = line.trim().trim_start_matches('(').trim_end_matches(')');
        for item in cleaned.split(',') {
            let item = item.trim();
            if !item.is_empty() && !concepts.iter().any(|c| c == item) {
                concepts.push(item.to_string());
            }
        }
    }
    concepts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockBackend;

    const ADAMS_RELATIONS: &str = "\
Relations:
(date of birth, The date on which the subject was born.)
(date of death, The date on which the subject died.)
(occupation, The occupation of a person.)
(country of citizenship, The country of which the subject is a citizen.)
(notable work, The most notable work of a person.)
(genre, The genre or type of work.)
(publication date, The date or period when a work was first published or released.)
(has part, Indicates that the subject has a certain part, component, or element.)
(series, Indicates that the subject is part of a series, such as a book series, film series, or television series.)

Concepts:
(person, author, work, date, country)
";

    fn doc() -> Document {
        Document {
            id: "adams".into(),
            text: "Douglas Noel Adams was an English author.".into(),
            gold: None,
        }
    }

    fn cqs() -> Vec<CompetencyQuestion> {
        vec![CompetencyQuestion {
            index: 1,
            text: "What is the date of birth of Douglas Noel Adams?".into(),
        }]
    }

    fn gateway_with_default(content: &str) -> (tempfile::TempDir, Gateway) {
        let dir = tempfile::tempdir().unwrap();
        let path = MockBackend::default_fixture_path(dir.path(), TemplateName::RelationExtraction);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, content).unwrap();
        let gateway = Gateway::mock(dir.path());
        (dir, gateway)
    }

    #[test]
    fn nine_relations_parse_from_the_reference_response() {
        let (_dir, gateway) = gateway_with_default(ADAMS_RELATIONS);
        let outcome = extract_relations(&gateway, &doc(), &cqs()).unwrap();
        assert_eq!(outcome.relations.len(), 9);
        assert_eq!(outcome.relations[0].name, "date of birth");
        assert_eq!(
            outcome.relations[0].usage_comment,
            "The date on which the subject was born."
        );
        // First-comma split keeps commas inside comments.
        assert_eq!(
            outcome.relations[7].usage_comment,
            "Indicates that the subject has a certain part, component, or element."
        );
        assert_eq!(
            outcome.concepts,
            vec!["person", "author", "work", "date", "country"]
        );
    }

    #[test]
    fn duplicate_names_keep_first_occurrence() {
        let response = "(occupation, The occupation of a person.)\n(Occupation, A job.)";
        let (_dir, gateway) = gateway_with_default(response);
        let outcome = extract_relations(&gateway, &doc(), &cqs()).unwrap();
        assert_eq!(outcome.relations.len(), 1);
        assert_eq!(
            outcome.relations[0].usage_comment,
            "The occupation of a person."
        );
    }

    #[test]
    fn declared_empty_outcome_is_valid() {
        let (_dir, gateway) = gateway_with_default("There are no valid properties in these CQs.");
        let outcome = extract_relations(&gateway, &doc(), &cqs()).unwrap();
        assert!(outcome.relations.is_empty());
    }

    #[test]
    fn unrecognized_response_is_parse_failure() {
        let (_dir, gateway) = gateway_with_default("Sure! Here are some relations: birth, death.");
        let err = extract_relations(&gateway, &doc(), &cqs()).unwrap_err();
        assert!(matches!(err, RelationError::ParseFailure { .. }));
    }

    #[test]
    fn no_cqs_short_circuits_without_calling_the_gateway() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = Gateway::mock(dir.path());
        let outcome = extract_relations(&gateway, &doc(), &[]).unwrap();
        assert!(outcome.relations.is_empty());
        assert_eq!(gateway.counters.backend_calls(), 0);
    }

    #[test]
    fn names_are_lowercased_and_traceable_to_raw_lines() {
        let response = "(Date Of Birth, When someone was born.)";
        let (_dir, gateway) = gateway_with_default(response);
        let outcome = extract_relations(&gateway, &doc(), &cqs()).unwrap();
        assert_eq!(outcome.relations[0].name, "date of birth");
        assert!(outcome.raw_response.contains("(Date Of Birth,"));
    }
}
