//! The six prompt templates driving the pipeline. Bodies are loaded verbatim
//! from `prompts/` and must not be edited: downstream parsers depend on the
//! exact output formats they elicit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateName {
    CqGeneration,
    CqAnswering,
    RelationExtraction,
    OntologyMatching,
    OntologyFormatting,
    KgGeneration,
}

impl TemplateName {
    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateName::CqGeneration => "CqGeneration",
            TemplateName::CqAnswering => "CqAnswering",
            TemplateName::RelationExtraction => "RelationExtraction",
            TemplateName::OntologyMatching => "OntologyMatching",
            TemplateName::OntologyFormatting => "OntologyFormatting",
            TemplateName::KgGeneration => "KgGeneration",
        }
    }

    pub const ALL: [TemplateName; 6] = [
        TemplateName::CqGeneration,
        TemplateName::CqAnswering,
        TemplateName::RelationExtraction,
        TemplateName::OntologyMatching,
        TemplateName::OntologyFormatting,
        TemplateName::KgGeneration,
    ];
}

impl std::fmt::Display for TemplateName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: &'static str,
    pub slots: &'static [&'static str],
}

const CQ_GENERATION: PromptTemplate = PromptTemplate {
    name: TemplateName::CqGeneration,
    body: include_str!("../../prompts/cq_generation.txt"),
    slots: &["document to be processed"],
};

const CQ_ANSWERING: PromptTemplate = PromptTemplate {
    name: TemplateName::CqAnswering,
    body: include_str!("../../prompts/cq_answering.txt"),
    slots: &["doc", "query"],
};

const RELATION_EXTRACTION: PromptTemplate = PromptTemplate {
    name: TemplateName::RelationExtraction,
    body: include_str!("../../prompts/relation_extraction.txt"),
    slots: &["document to be processed", "CQs"],
};

const ONTOLOGY_MATCHING: PromptTemplate = PromptTemplate {
    name: TemplateName::OntologyMatching,
    body: include_str!("../../prompts/ontology_matching.txt"),
    slots: &["p1", "p2"],
};

const ONTOLOGY_FORMATTING: PromptTemplate = PromptTemplate {
    name: TemplateName::OntologyFormatting,
    body: include_str!("../../prompts/ontology_formatting.txt"),
    slots: &["relation"],
};

const KG_GENERATION: PromptTemplate = PromptTemplate {
    name: TemplateName::KgGeneration,
    body: include_str!("../../prompts/kg_generation.txt"),
    slots: &["ont", "doc", "qa"],
};

impl PromptTemplate {
    pub fn get(name: TemplateName) -> &'static PromptTemplate {
        match name {
            TemplateName::CqGeneration => &CQ_GENERATION,
            TemplateName::CqAnswering => &CQ_ANSWERING,
            TemplateName::RelationExtraction => &RELATION_EXTRACTION,
            TemplateName::OntologyMatching => &ONTOLOGY_MATCHING,
            TemplateName::OntologyFormatting => &ONTOLOGY_FORMATTING,
            TemplateName::KgGeneration => &KG_GENERATION,
        }
    }
}

/// Fill a template's slots. Bindings must cover exactly the declared slots.
pub fn render(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<String, LlmError> {
    for key in bindings.keys() {
        if !template.slots.contains(&key.as_str()) {
            return Err(LlmError::UnknownSlot(key.clone()));
        }
    }
    let mut out = template.body.to_string();
    for slot in template.slots {
        let value = bindings
            .get(*slot)
            .ok_or_else(|| LlmError::MissingSlot(slot.to_string()))?;
        out = out.replace(&format!("{{{slot}}}"), value);
    }
    debug_assert!(
        template
            .slots
            .iter()
            .all(|slot| !out.contains(&format!("{{{slot}}}"))),
        "slot markers remained after rendering"
    );
    Ok(out)
}

/// Convenience for building bindings maps.
pub fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answering_template_renders_passage_and_query() {
        let rendered = render(
            PromptTemplate::get(TemplateName::CqAnswering),
            &bindings([("doc", "D"), ("query", "Q")]),
        )
        .unwrap();
        assert!(rendered.contains("Passage: D"));
        assert!(rendered.contains("Query: Q"));
    }

    #[test]
    fn matching_template_ends_with_property_lines() {
        let rendered = render(
            PromptTemplate::get(TemplateName::OntologyMatching),
            &bindings([("p1", "a"), ("p2", "b")]),
        )
        .unwrap();
        assert!(rendered
            .trim_end()
            .ends_with("Property 1: a\nProperty 2: b"));
    }

    #[test]
    fn extra_binding_is_unknown_slot() {
        let err = render(
            PromptTemplate::get(TemplateName::CqAnswering),
            &bindings([("doc", "D"), ("query", "Q"), ("extra", "x")]),
        )
        .unwrap_err();
        assert!(matches!(err, LlmError::UnknownSlot(k) if k == "extra"));
    }

    #[test]
    fn missing_binding_is_reported() {
        let err = render(
            PromptTemplate::get(TemplateName::CqAnswering),
            &bindings([("doc", "D")]),
        )
        .unwrap_err();
        assert!(matches!(err, LlmError::MissingSlot(k) if k == "query"));
    }

    #[test]
    fn template_bodies_carry_their_instruction_sentences() {
        let checks: [(TemplateName, &str); 6] = [
            (
                TemplateName::CqGeneration,
                "Write up to 3 questions per document.",
            ),
            (
                TemplateName::CqAnswering,
                "just say that you don't know, don't try to make up an answer",
            ),
            (
                TemplateName::RelationExtraction,
                "Extract relation first, then describe the usage of each relation",
            ),
            (
                TemplateName::OntologyMatching,
                "Answer in \"yes\" or \"no\" only.",
            ),
            (
                TemplateName::OntologyFormatting,
                "Use wdt: namespace for all relations discovered.",
            ),
            (
                TemplateName::KgGeneration,
                "Do not include new properties other than those in ontology.",
            ),
        ];
        for (name, sentence) in checks {
            let body = PromptTemplate::get(name).body;
            assert!(body.contains(sentence), "{name}: missing {sentence:?}");
        }
    }

    #[test]
    fn every_declared_slot_appears_in_its_body() {
        for name in TemplateName::ALL {
            let template = PromptTemplate::get(name);
            for slot in template.slots {
                assert!(
                    template.body.contains(&format!("{{{slot}}}")),
                    "{name}: slot {slot} not in body"
                );
            }
        }
    }
}
