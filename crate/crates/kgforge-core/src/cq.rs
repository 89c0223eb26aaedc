//! Stage 1: generate competency questions per document and answer each one
//! from the document alone. Unanswerable questions are kept but flagged so
//! downstream grounding can exclude them.

use serde::{Deserialize, Serialize};

use crate::eval::GoldTriple;
use crate::llm::{bindings, Gateway, LlmError, TemplateName};

#[derive(Debug, thiserror::Error)]
pub enum CqError {
    #[error("no competency questions recognized in response")]
    ParseFailure { raw: String },
    #[error(transparent)]
    Gateway(#[from] LlmError),
}

/// One input document, with gold triples when the corpus is annotated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<GoldTriple>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompetencyQuestion {
    pub index: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: CompetencyQuestion,
    pub answer: String,
    pub answered: bool,
}

/// Questions recognized from one generation call, plus how many matched
/// lines were dropped for not being questions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CqOutcome {
    pub questions: Vec<CompetencyQuestion>,
    pub dropped_malformed: usize,
}

pub const DEFAULT_CQ_CAP: usize = 3;
pub const DEFAULT_REFUSAL_PATTERN: &str = "don't know";

/// Render the generation prompt, parse `CQ<n>.` lines, cap, and renumber
/// sequentially from 1. Lines without a terminal `?` are dropped (counted),
/// never repaired.
pub fn generate_cqs(
    gateway: &Gateway,
    document: &Document,
    cap: usize,
) -> Result<CqOutcome, CqError> {
    let response = gateway.call(
        TemplateName::CqGeneration,
        &bindings([("document to be processed", document.text.as_str())]),
    )?;
    let mut recognized = 0usize;
    let mut dropped_malformed = 0usize;
    let mut questions = Vec::new();
    for line in response.content.lines() {
        let Some(text) = parse_cq_line(line) else {
            continue;
        };
        recognized += 1;
        if !text.ends_with('?') {
            dropped_malformed += 1;
            continue;
        }
        questions.push(text);
    }
    if recognized == 0 {
        return Err(CqError::ParseFailure {
            raw: response.content,
        });
    }
    questions.truncate(cap);
    let questions = questions
        .into_iter()
        .enumerate()
        .map(|(i, text)| CompetencyQuestion {
            index: i as u32 + 1,
            text,
        })
        .collect();
    Ok(CqOutcome {
        questions,
        dropped_malformed,
    })
}

/// `CQ<digits>. question text` -> `question text`
fn parse_cq_line(line: &str) -> Option<String> {
    let trimmed = line.trim();
    let rest = trimmed.strip_prefix("CQ")?;
    let digits = rest.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = rest[digits..].strip_prefix('.')?;
    let text = rest.trim();
    (!text.is_empty()).then(|| text.to_string())
}

/// Answer one question from the document. A reply containing the refusal
/// pattern (or an empty reply) marks the pair unanswered.
pub fn answer_cq(
    gateway: &Gateway,
    document: &Document,
    question: &CompetencyQuestion,
    refusal_pattern: &str,
) -> Result<QAPair, CqError> {
    let response = gateway.call(
        TemplateName::CqAnswering,
        &bindings([
            ("doc", document.text.as_str()),
            ("query", question.text.as_str()),
        ]),
    )?;
    let answer = response.content.trim().to_string();
    let refused = answer.is_empty()
        || answer
            .to_lowercase()
            .contains(&refusal_pattern.to_lowercase());
    Ok(QAPair {
        question: question.clone(),
        answer,
        answered: !refused,
    })
}
