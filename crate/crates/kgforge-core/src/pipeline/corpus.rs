//! Corpus and gold-file loading. Both are line-delimited JSON; a gold file
//! carries `{doc_id, triples}` records, and a corpus file's records may
//! embed their gold triples directly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::cq::Document;
use crate::eval::GoldTriple;

use super::RunError;

#[derive(Debug, Deserialize)]
struct CorpusRecord {
    id: Option<String>,
    text: Option<String>,
    #[serde(default)]
    gold: Option<Vec<[String; 3]>>,
}

/// Load documents in file order. Ids must be unique, non-empty, and
/// filesystem-safe (alphanumeric plus `_`, `-`, `.`) because each document
/// gets an artifact directory named after it.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, RunError> {
    let text = std::fs::read_to_string(&path)?;
    let mut documents = Vec::new();
    let mut seen = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(line).map_err(|e| RunError::Schema {
            line: line_no,
            message: format!("unparsable record: {e}"),
        })?;
        let id = record
            .id
            .filter(|v| !v.is_empty())
            .ok_or(RunError::Schema {
                line: line_no,
                message: "missing id".into(),
            })?;
        if !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return Err(RunError::Schema {
                line: line_no,
                message: format!("id {id:?} is not filesystem-safe"),
            });
        }
        // Artifact directories share the run root with these files.
        if id.starts_with('.')
            || matches!(
                id.as_str(),
                "cache" | "manifest.json" | "ontology.ttl" | "eval_report.json"
            )
        {
            return Err(RunError::Schema {
                line: line_no,
                message: format!("id {id:?} is reserved"),
            });
        }
        if seen.insert(id.clone(), line_no).is_some() {
            return Err(RunError::Schema {
                line: line_no,
                message: format!("duplicate id {id:?}"),
            });
        }
        let text = record
            .text
            .filter(|v| !v.trim().is_empty())
            .ok_or(RunError::Schema {
                line: line_no,
                message: "missing text".into(),
            })?;
        let gold = record
            .gold
            .map(|triples| triples.into_iter().map(GoldTriple::from).collect());
        documents.push(Document { id, text, gold });
    }
    Ok(documents)
}

#[derive(Debug, Deserialize)]
struct GoldRecord {
    doc_id: Option<String>,
    id: Option<String>,
    #[serde(default)]
    triples: Option<Vec<[String; 3]>>,
    #[serde(default)]
    gold: Option<Vec<[String; 3]>>,
}

/// Load a gold corpus keyed by document id. Accepts both the dedicated
/// gold shape (`doc_id` + `triples`) and annotated corpus records
/// (`id` + `gold`).
pub fn load_gold(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<GoldTriple>>, RunError> {
    let text = std::fs::read_to_string(&path)?;
    let mut gold = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: GoldRecord = serde_json::from_str(line).map_err(|e| RunError::Schema {
            line: line_no,
            message: format!("unparsable gold record: {e}"),
        })?;
        let id = record
            .doc_id
            .or(record.id)
            .filter(|v| !v.is_empty())
            .ok_or(RunError::Schema {
                line: line_no,
                message: "missing doc_id".into(),
            })?;
        let triples = record
            .triples
            .or(record.gold)
            .unwrap_or_default()
            .into_iter()
            .map(GoldTriple::from)
            .collect();
        gold.insert(id, triples);
    }
    Ok(gold)
}
