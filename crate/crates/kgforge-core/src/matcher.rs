//! Stage 2b: align each extracted relation with the candidate property
//! list. The nearest candidate by embedding similarity is vetted by the
//! LLM; what happens to rejected relations depends on the mode — kept as
//! minted properties when unconstrained, discarded when constrained.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, PropertyEntry};
use crate::embed::{EmbedError, Embedder, EmbeddingIndex};
use crate::llm::{bindings, Gateway, LlmError, TemplateName};
use crate::relations::ExtractedRelation;

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("candidate catalog is empty")]
    EmptyCatalog,
    #[error("decisions mix constrained and unconstrained outcomes")]
    ModeMismatch,
    #[error("alias target {target} for relation {name:?} is not in the catalog")]
    UnknownAlias { name: String, target: String },
    #[error(transparent)]
    Gateway(#[from] LlmError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Whether the final property set must stay inside the candidate list
/// (optionally a target subset of it) or may grow new properties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "target")]
pub enum MatchMode {
    Constrained(Option<BTreeSet<String>>),
    Unconstrained,
}

impl MatchMode {
    pub fn is_constrained(&self) -> bool {
        matches!(self, MatchMode::Constrained(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchOutcome {
    MatchedExisting,
    KeptNew,
    Discarded,
}

/// The audit record for one relation: which candidate was retrieved, the
/// similarity actually produced by the search, and what the validator said.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub relation: ExtractedRelation,
    pub candidate: Option<PropertyEntry>,
    pub similarity: f32,
    pub validated: bool,
    pub outcome: MatchOutcome,
}

/// Union of per-relation decisions: matched Wikidata entries plus minted
/// relations (empty in constrained mode).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalPropertySet {
    pub wikidata: Vec<PropertyEntry>,
    pub minted: Vec<ExtractedRelation>,
}

/// Build the retrieval index over the candidate list. Under
/// `Constrained(Some(target))` only target entries are indexed, so the
/// top-1 can never land off-target.
pub fn build_index(
    catalog: &Catalog,
    mode: &MatchMode,
    embedder: &dyn Embedder,
    labeled_text: bool,
) -> Result<EmbeddingIndex, MatchError> {
    let target = match mode {
        MatchMode::Constrained(Some(target)) => Some(target),
        _ => None,
    };
    let items: Vec<(String, String)> = catalog
        .entries()
        .iter()
        .filter(|e| target.is_none_or(|t| t.contains(&e.pascal_label)))
        .map(|e| (e.pid.clone(), e.embedding_text(labeled_text)))
        .collect();
    Ok(EmbeddingIndex::build(&items, embedder)?)
}

pub struct Matcher<'a> {
    pub catalog: &'a Catalog,
    pub index: &'a EmbeddingIndex,
    pub embedder: &'a dyn Embedder,
    pub gateway: &'a Gateway,
    pub mode: MatchMode,
    /// Manual overrides: relation name -> pascal label, bypassing retrieval
    /// and validation entirely.
    pub aliases: BTreeMap<String, String>,
    pub labeled_text: bool,
    /// Validator replies that were neither "yes" nor "no" (counted, treated
    /// as "no").
    pub malformed_replies: AtomicU64,
}

impl<'a> Matcher<'a> {
    pub fn new(
        catalog: &'a Catalog,
        index: &'a EmbeddingIndex,
        embedder: &'a dyn Embedder,
        gateway: &'a Gateway,
        mode: MatchMode,
    ) -> Matcher<'a> {
        Matcher {
            catalog,
            index,
            embedder,
            gateway,
            mode,
            aliases: BTreeMap::new(),
            labeled_text: true,
            malformed_replies: AtomicU64::new(0),
        }
    }

    pub fn with_aliases(mut self, aliases: BTreeMap<String, String>) -> Matcher<'a> {
        self.aliases = aliases;
        self
    }

    /// Retrieve the top-1 candidate, vet the pair with the LLM, and decide
    /// the relation's fate per the mode.
    pub fn match_relation(
        &self,
        relation: &ExtractedRelation,
    ) -> Result<MatchDecision, MatchError> {
        if let Some(target) = self.aliases.get(&relation.normalized_name()) {
            let entry =
                self.catalog
                    .get_by_pascal(target)
                    .ok_or_else(|| MatchError::UnknownAlias {
                        name: relation.name.clone(),
                        target: target.clone(),
                    })?;
            return Ok(MatchDecision {
                relation: relation.clone(),
                candidate: Some(entry.clone()),
                similarity: 1.0,
                validated: true,
                outcome: MatchOutcome::MatchedExisting,
            });
        }

        if self.index.is_empty() {
            return Err(MatchError::EmptyCatalog);
        }
        let query = self
            .embedder
            .embed(&[relation.embedding_text(self.labeled_text)])?
            .pop()
            .expect("one vector per text");
        let (pid, similarity) = self.index.top1(&query)?;
        let candidate = self
            .catalog
            .get_by_pid(pid)
            .ok_or(MatchError::EmptyCatalog)?
            .clone();

        let response = self.gateway.call(
            TemplateName::OntologyMatching,
            &bindings([
                (
                    "p1",
                    format!("{}: {}", relation.name, relation.usage_comment).as_str(),
                ),
                (
                    "p2",
                    format!("{}: {}", candidate.label, candidate.description).as_str(),
                ),
            ]),
        )?;
        let validated = match parse_yes_no(&response.content) {
            Some(answer) => answer,
            None => {
                self.malformed_replies.fetch_add(1, Ordering::Relaxed);
                false
            }
        };

        let in_target = match &self.mode {
            MatchMode::Constrained(Some(target)) => target.contains(&candidate.pascal_label),
            _ => true,
        };
        let outcome = if validated && in_target {
            MatchOutcome::MatchedExisting
        } else if self.mode.is_constrained() {
            MatchOutcome::Discarded
        } else {
            MatchOutcome::KeptNew
        };
        Ok(MatchDecision {
            relation: relation.clone(),
            candidate: Some(candidate),
            similarity,
            validated: validated && in_target,
            outcome,
        })
    }
}

/// First token of the reply, stripped of punctuation, case-insensitive.
/// Anything other than yes/no is `None` (the caller counts it and rejects).
fn parse_yes_no(reply: &str) -> Option<bool> {
    let first = reply.split_whitespace().next()?;
    let token: String = first
        .chars()
        .filter(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    match token.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Aggregate decisions into the final property set: matched candidates
/// dedup by PID, kept-new relations dedup by normalized name, and a
/// constrained target filters the Wikidata side.
pub fn build_final_property_set(
    decisions: &[MatchDecision],
    mode: &MatchMode,
) -> Result<FinalPropertySet, MatchError> {
    let constrained = mode.is_constrained();
    let mut wikidata: Vec<PropertyEntry> = Vec::new();
    let mut minted: Vec<ExtractedRelation> = Vec::new();
    let mut seen_pids: BTreeSet<String> = BTreeSet::new();
    let mut seen_names: BTreeSet<String> = BTreeSet::new();
    for decision in decisions {
        match decision.outcome {
            MatchOutcome::MatchedExisting => {
                let entry = decision
                    .candidate
                    .as_ref()
                    .ok_or(MatchError::ModeMismatch)?;
                if let MatchMode::Constrained(Some(target)) = mode {
                    if !target.contains(&entry.pascal_label) {
                        continue;
                    }
                }
                if seen_pids.insert(entry.pid.clone()) {
                    wikidata.push(entry.clone());
                }
            }
            MatchOutcome::KeptNew => {
                if constrained {
                    return Err(MatchError::ModeMismatch);
                }
                if seen_names.insert(decision.relation.normalized_name()) {
                    minted.push(decision.relation.clone());
                }
            }
            MatchOutcome::Discarded => {
                if !constrained {
                    return Err(MatchError::ModeMismatch);
                }
            }
        }
    }
    wikidata.sort_by(|a, b| a.pid.cmp(&b.pid));
    minted.sort_by_key(|r| r.normalized_name());
    Ok(FinalPropertySet { wikidata, minted })
}
