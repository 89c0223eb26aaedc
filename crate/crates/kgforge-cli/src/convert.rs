//! Thin dataset adapters: convert common benchmark shapes into the
//! line-delimited corpus format (`{id, text, gold}` records).

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DatasetShape {
    /// Records with `text`/`sentence` and `triples` as `[s, p, o]` rows.
    Wikinre,
    /// Entries with `lex` (or `text`) and `triples` rows or
    /// `{subject, property, object}` objects.
    Webnlg,
    /// Tokenized records: `doc_key`, `sentences` (token lists), and
    /// per-sentence `relations` with token-span endpoints.
    Scierc,
}

pub fn convert(shape: DatasetShape, input: &Path, out: &Path) -> Result<usize> {
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let records = parse_records(&text)?;
    let mut lines = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let converted = match shape {
            DatasetShape::Wikinre => convert_wikinre(record, index)?,
            DatasetShape::Webnlg => convert_webnlg(record, index)?,
            DatasetShape::Scierc => convert_scierc(record, index)?,
        };
        if let Some(line) = converted {
            lines.push(line);
        }
    }
    let mut file = std::fs::File::create(out)?;
    for line in &lines {
        writeln!(file, "{line}")?;
    }
    Ok(lines.len())
}

/// Input may be one JSON array or line-delimited objects.
fn parse_records(text: &str) -> Result<Vec<Value>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        let all: Value = serde_json::from_str(text)?;
        return Ok(all.as_array().cloned().unwrap_or_default());
    }
    let mut records = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).with_context(|| format!("line {}", line_no + 1))?;
        records.push(value);
    }
    Ok(records)
}

fn corpus_line(id: &str, text: &str, gold: Vec<[String; 3]>) -> String {
    serde_json::json!({
        "id": sanitize_id(id),
        "text": text,
        "gold": gold,
    })
    .to_string()
}

fn sanitize_id(raw: &str) -> String {
    let cleaned: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') {
                c
            } else {
                '-'
            }
        })
        .collect();
    if cleaned.is_empty() {
        "doc".to_string()
    } else {
        cleaned
    }
}

fn string_field<'v>(record: &'v Value, names: &[&str]) -> Option<&'v str> {
    names
        .iter()
        .find_map(|n| record.get(n).and_then(Value::as_str))
}

fn triple_rows(value: &Value) -> Vec<[String; 3]> {
    let Some(rows) = value.as_array() else {
        return Vec::new();
    };
    rows.iter()
        .filter_map(|row| {
            if let Some(parts) = row.as_array() {
                if parts.len() == 3 {
                    let texts: Vec<String> = parts
                        .iter()
                        .map(|p| p.as_str().unwrap_or_default().to_string())
                        .collect();
                    if texts.iter().all(|t| !t.is_empty()) {
                        return Some([texts[0].clone(), texts[1].clone(), texts[2].clone()]);
                    }
                }
                return None;
            }
            let subject = string_field(row, &["subject", "s"])?;
            let predicate = string_field(row, &["property", "predicate", "p", "relation"])?;
            let object = string_field(row, &["object", "o"])?;
            Some([
                subject.to_string(),
                predicate.to_string(),
                object.to_string(),
            ])
        })
        .collect()
}

fn convert_wikinre(record: &Value, index: usize) -> Result<Option<String>> {
    let Some(text) = string_field(record, &["text", "sentence"]) else {
        bail!("record {index}: missing text/sentence field");
    };
    let id = string_field(record, &["id", "docid", "doc_id"])
        .map(str::to_string)
        .unwrap_or_else(|| format!("wikinre-{index:05}"));
    let gold = record.get("triples").map(triple_rows).unwrap_or_default();
    Ok(Some(corpus_line(&id, text, gold)))
}

fn convert_webnlg(record: &Value, index: usize) -> Result<Option<String>> {
    let text = string_field(record, &["text"])
        .map(str::to_string)
        .or_else(|| {
            record.get("lex").and_then(|lex| match lex {
                Value::String(s) => Some(s.clone()),
                Value::Array(items) => items.first().and_then(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .or_else(|| v.get("lex").and_then(Value::as_str).map(str::to_string))
                }),
                _ => None,
            })
        });
    let Some(text) = text else {
        bail!("record {index}: missing text/lex field");
    };
    let id = string_field(record, &["id", "eid"])
        .map(str::to_string)
        .unwrap_or_else(|| format!("webnlg-{index:05}"));
    let gold = record
        .get("triples")
        .or_else(|| record.get("modifiedtripleset"))
        .map(triple_rows)
        .unwrap_or_default();
    Ok(Some(corpus_line(&id, &text, gold)))
}

/// SciERC-style: sentences are token lists and relation arguments are
/// document-level token span endpoints.
fn convert_scierc(record: &Value, index: usize) -> Result<Option<String>> {
    let Some(sentences) = record.get("sentences").and_then(Value::as_array) else {
        bail!("record {index}: missing sentences field");
    };
    let mut tokens: Vec<String> = Vec::new();
    for sentence in sentences {
        for token in sentence.as_array().into_iter().flatten() {
            if let Some(t) = token.as_str() {
                tokens.push(t.to_string());
            }
        }
    }
    if tokens.is_empty() {
        return Ok(None);
    }
    let text = tokens.join(" ");
    let id = string_field(record, &["doc_key", "id"])
        .map(str::to_string)
        .unwrap_or_else(|| format!("scierc-{index:05}"));

    let span = |from: i64, to: i64| -> Option<String> {
        let (from, to) = (usize::try_from(from).ok()?, usize::try_from(to).ok()?);
        (from <= to && to < tokens.len()).then(|| tokens[from..=to].join(" "))
    };
    let mut gold = Vec::new();
    for sentence_relations in record
        .get("relations")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        for rel in sentence_relations.as_array().into_iter().flatten() {
            let Some(parts) = rel.as_array() else {
                continue;
            };
            if parts.len() != 5 {
                continue;
            }
            let nums: Vec<i64> = parts[..4].iter().filter_map(Value::as_i64).collect();
            let Some(label) = parts[4].as_str() else {
                continue;
            };
            if nums.len() != 4 {
                continue;
            }
            let (Some(subject), Some(object)) = (span(nums[0], nums[1]), span(nums[2], nums[3]))
            else {
                continue;
            };
            let predicate = label.replace(['-', '_'], " ").to_lowercase();
            gold.push([subject, predicate, object]);
        }
    }
    Ok(Some(corpus_line(&id, &text, gold)))
}
