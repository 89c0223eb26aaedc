//! Triple-level scoring of predicted KGs against gold annotations with
//! Exact and Partial criteria.
//!
//! Predicted IRIs like `wdt:CountryOfCitizenship` and gold strings like
//! "country of citizenship" are compared in one normalized space. Alignment
//! between predicted and gold triples is a one-to-one assignment solved
//! exactly, never greedily.

pub mod assignment;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::rdf::{Term, Triple};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no gold entry for document: {0}")]
    MissingGold(String),
}

pub const DEFAULT_JACCARD: f64 = 0.5;

/// A reference (subject, predicate, object) annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl From<[String; 3]> for GoldTriple {
    fn from(parts: [String; 3]) -> GoldTriple {
        let [subject, predicate, object] = parts;
        GoldTriple {
            subject,
            predicate,
            object,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Exact,
    Partial,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Criterion::Exact => f.write_str("exact"),
            Criterion::Partial => f.write_str("partial"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchLevel {
    None,
    Partial,
    Exact,
}

/// Normalize one term into the comparison space. IRIs and blank labels use
/// the local name with underscores and camel-case boundaries opened up;
/// literals drop their datatype/language tags.
pub fn normalize_term(term: &Term) -> String {
    match term {
        Term::Iri(iri) => {
            let local = iri.rsplit(['/', '#']).next().unwrap_or(iri);
            normalize_name(local)
        }
        Term::Blank(label) => normalize_name(label),
        Term::Literal { lexical, .. } => collapse_lower(lexical),
    }
}

/// Normalize a raw string (gold elements): surrounding quotes and trailing
/// `^^`/`@` tags are stripped, full IRIs reduce to their local name, and
/// the same underscore/camel-case treatment applies.
pub fn normalize_text(raw: &str) -> String {
    let mut text = raw.trim();
    let mut unquoted = String::new();
    if text.starts_with('"') {
        if let Some(end) = text[1..].rfind('"') {
            unquoted = text[1..end + 1].to_string();
            text = &unquoted;
        }
    } else if let Some(tag_at) = text.find("^^") {
        unquoted = text[..tag_at].to_string();
        text = &unquoted;
    }
    let _ = &unquoted;
    if text.contains("://") && !text.chars().any(char::is_whitespace) {
        let local = text.rsplit(['/', '#']).next().unwrap_or(text);
        return normalize_name(local);
    }
    normalize_name(text)
}

fn normalize_name(name: &str) -> String {
    let mut spaced = String::with_capacity(name.len() + 8);
    let mut prev_lower = false;
    for c in name.chars() {
        if c == '_' {
            spaced.push(' ');
            prev_lower = false;
            continue;
        }
        if prev_lower && c.is_uppercase() {
            spaced.push(' ');
        }
        prev_lower = c.is_lowercase();
        spaced.push(c);
    }
    collapse_lower(&spaced)
}

fn collapse_lower(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Element comparison on already-normalized strings: equality is Exact;
/// substring containment or token-set Jaccard at or above the threshold is
/// Partial.
pub fn element_match(a: &str, b: &str, jaccard_threshold: f64) -> MatchLevel {
    if a == b {
        return MatchLevel::Exact;
    }
    if a.contains(b) || b.contains(a) {
        return MatchLevel::Partial;
    }
    let tokens_a: BTreeSet<&str> = a.split_whitespace().collect();
    let tokens_b: BTreeSet<&str> = b.split_whitespace().collect();
    if !tokens_a.is_empty() && !tokens_b.is_empty() {
        let intersection = tokens_a.intersection(&tokens_b).count();
        let union = tokens_a.union(&tokens_b).count();
        if intersection as f64 / union as f64 >= jaccard_threshold {
            return MatchLevel::Partial;
        }
    }
    MatchLevel::None
}

/// One aligned (predicted, gold) pair with its per-element match summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignedPair {
    pub predicted: usize,
    pub gold: usize,
    /// Elements matching at Partial or better (0-3).
    pub partial_elements: u8,
    /// Elements matching exactly (0-3).
    pub exact_elements: u8,
    pub hit: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
    pub hits: usize,
}

/// Normalized [subject, predicate, object] rows for both sides.
pub fn normalize_predicted(triples: &[Triple]) -> Vec<[String; 3]> {
    triples
        .iter()
        .map(|t| {
            [
                normalize_term(&t.subject),
                normalize_term(&t.predicate),
                normalize_term(&t.object),
            ]
        })
        .collect()
}

pub fn normalize_gold(triples: &[GoldTriple]) -> Vec<[String; 3]> {
    triples
        .iter()
        .map(|t| {
            [
                normalize_text(&t.subject),
                normalize_text(&t.predicate),
                normalize_text(&t.object),
            ]
        })
        .collect()
}

/// One-to-one alignment maximizing, lexicographically, the number of
/// element matches at Partial or better, then exact element matches, then
/// full-triple hits at the requested criterion. A pair is a hit under
/// Partial when all three elements reach Partial, and under Exact when all
/// three are Exact.
pub fn align(
    predicted: &[Triple],
    gold: &[GoldTriple],
    criterion: Criterion,
    jaccard_threshold: f64,
) -> Alignment {
    align_normalized(
        &normalize_predicted(predicted),
        &normalize_gold(gold),
        criterion,
        jaccard_threshold,
    )
}

pub fn align_normalized(
    predicted: &[[String; 3]],
    gold: &[[String; 3]],
    criterion: Criterion,
    jaccard_threshold: f64,
) -> Alignment {
    if predicted.is_empty() || gold.is_empty() {
        return Alignment::default();
    }
    let swap = predicted.len() > gold.len();
    let (rows, cols): (&[[String; 3]], &[[String; 3]]) = if swap {
        (gold, predicted)
    } else {
        (predicted, gold)
    };

    // Integer weights making the tuple (partials, exacts, hits) lexicographic
    // under summation.
    let k = rows.len() as i64;
    let hit_weight = 1i64;
    let exact_weight = k + 1;
    let partial_weight = exact_weight * 3 * k + k + 1;

    let mut matrix: Vec<Vec<i64>> = Vec::with_capacity(rows.len());
    let mut summaries: Vec<Vec<(u8, u8, bool)>> = Vec::with_capacity(rows.len());
    for row_triple in rows {
        let mut row_scores = Vec::with_capacity(cols.len());
        let mut row_summaries = Vec::with_capacity(cols.len());
        for col_triple in cols {
            let mut partials = 0u8;
            let mut exacts = 0u8;
            for (a, b) in row_triple.iter().zip(col_triple.iter()) {
                match element_match(a, b, jaccard_threshold) {
                    MatchLevel::Exact => {
                        partials += 1;
                        exacts += 1;
                    }
                    MatchLevel::Partial => partials += 1,
                    MatchLevel::None => {}
                }
            }
            let hit = match criterion {
                Criterion::Partial => partials == 3,
                Criterion::Exact => exacts == 3,
            };
            row_scores.push(
                partial_weight * i64::from(partials)
                    + exact_weight * i64::from(exacts)
                    + hit_weight * i64::from(hit),
            );
            row_summaries.push((partials, exacts, hit));
        }
        matrix.push(row_scores);
        summaries.push(row_summaries);
    }

    let assigned = assignment::solve_max_score(&matrix);
    let mut pairs = Vec::with_capacity(assigned.len());
    let mut hits = 0usize;
    for (row, col) in assigned.iter().enumerate() {
        let (partials, exacts, hit) = summaries[row][*col];
        if hit {
            hits += 1;
        }
        let (predicted_ix, gold_ix) = if swap { (*col, row) } else { (row, *col) };
        pairs.push(AlignedPair {
            predicted: predicted_ix,
            gold: gold_ix,
            partial_elements: partials,
            exact_elements: exacts,
            hit,
        });
    }
    Alignment { pairs, hits }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocScore {
    pub doc_id: String,
    pub hits: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// Corpus-level report with micro-averaged precision/recall/F1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub criterion: Criterion,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub per_doc: Vec<DocScore>,
}

impl EvalReport {
    pub fn total_hits(&self) -> usize {
        self.per_doc.iter().map(|d| d.hits).sum()
    }

    /// Plain-text summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "criterion: {}\nmicro precision: {:.4}\nmicro recall:    {:.4}\nmicro f1:        {:.4}\n",
            self.criterion, self.micro_precision, self.micro_recall, self.micro_f1
        ));
        out.push_str(&format!(
            "{:<24} {:>6} {:>10} {:>6}\n",
            "document", "hits", "predicted", "gold"
        ));
        for doc in &self.per_doc {
            out.push_str(&format!(
                "{:<24} {:>6} {:>10} {:>6}\n",
                doc.doc_id, doc.hits, doc.predicted, doc.gold
            ));
        }
        out
    }
}

/// Micro-averaged scoring: sum hits / sum predicted and sum hits / sum gold.
/// Zero denominators map to 0, except the vacuous all-empty case, which is
/// perfect by convention.
pub fn evaluate_corpus(
    results: &[(String, Vec<Triple>)],
    gold_corpus: &BTreeMap<String, Vec<GoldTriple>>,
    criterion: Criterion,
    jaccard_threshold: f64,
) -> Result<EvalReport, EvalError> {
    let mut per_doc = Vec::with_capacity(results.len());
    for (doc_id, predicted) in results {
        let gold = gold_corpus
            .get(doc_id)
            .ok_or_else(|| EvalError::MissingGold(doc_id.clone()))?;
        let alignment = align(predicted, gold, criterion, jaccard_threshold);
        per_doc.push(DocScore {
            doc_id: doc_id.clone(),
            hits: alignment.hits,
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    per_doc.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let hits: usize = per_doc.iter().map(|d| d.hits).sum();
    let predicted: usize = per_doc.iter().map(|d| d.predicted).sum();
    let gold: usize = per_doc.iter().map(|d| d.gold).sum();
    let (micro_precision, micro_recall) = if predicted == 0 && gold == 0 {
        (1.0, 1.0)
    } else {
        (
            if predicted == 0 {
                0.0
            } else {
                hits as f64 / predicted as f64
            },
            if gold == 0 {
                0.0
            } else {
                hits as f64 / gold as f64
            },
        )
    };
    let micro_f1 = if micro_precision + micro_recall == 0.0 {
        0.0
    } else {
        2.0 * micro_precision * micro_recall / (micro_precision + micro_recall)
    };
    Ok(EvalReport {
        criterion,
        micro_precision,
        micro_recall,
        micro_f1,
        per_doc,
    })
}
