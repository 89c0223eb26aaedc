//! Embedding and nearest-candidate retrieval for ontology matching.
//!
//! Two embedders share one contract: a live HTTP client for a hosted
//! embedding model, and a deterministic lexical fallback (hashed
//! character-trigram term frequencies, dimension 256) that keeps the whole
//! pipeline runnable offline. Both produce unit-length vectors.

use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding provider error: {0}")]
    Provider(String),
    #[error("text at index {0} is empty")]
    EmptyText(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding index is empty")]
    EmptyIndex,
    #[error("index I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt index file: {0}")]
    Corrupt(String),
}

pub const FALLBACK_DIMENSION: usize = 256;

/// A unit-length embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f32>);

impl Vector {
    /// Normalize to unit length. All-zero input is rejected.
    pub fn normalized(components: Vec<f32>) -> Result<Vector, EmbedError> {
        let norm = components.iter().map(|c| c * c).sum::<f32>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(EmbedError::Provider(
                "cannot normalize zero or non-finite vector".into(),
            ));
        }
        Ok(Vector(components.iter().map(|c| c / norm).collect()))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f32] {
        &self.0
    }
}

/// Cosine similarity of two unit vectors (their dot product).
pub fn cosine(u: &Vector, v: &Vector) -> Result<f32, EmbedError> {
    if u.dimension() != v.dimension() {
        return Err(EmbedError::DimensionMismatch {
            expected: u.dimension(),
            got: v.dimension(),
        });
    }
    let dot: f32 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, EmbedError>;
}

/// Deterministic lexical embedding: character trigrams of the
/// whitespace-collapsed, lowercased text, hashed (FNV-1a) into a fixed
/// number of buckets, then L2-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramEmbedder;

impl TrigramEmbedder {
    fn embed_one(text: &str) -> Vec<f32> {
        let normalized: String = text
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        let chars: Vec<char> = normalized.chars().collect();
        let mut counts = vec![0f32; FALLBACK_DIMENSION];
        if chars.len() < 3 {
            counts[(fnv1a(&normalized) % FALLBACK_DIMENSION as u64) as usize] += 1.0;
        } else {
            for window in chars.windows(3) {
                let gram: String = window.iter().collect();
                counts[(fnv1a(&gram) % FALLBACK_DIMENSION as u64) as usize] += 1.0;
            }
        }
        counts
    }
}

impl Embedder for TrigramEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, EmbedError> {
        texts
            .iter()
            .enumerate()
            .map(|(i, text)| {
                if text.trim().is_empty() {
                    return Err(EmbedError::EmptyText(i));
                }
                Vector::normalized(Self::embed_one(text))
            })
            .collect()
    }
}

fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Live embedding client speaking the de-facto embeddings wire format:
/// request `{model, input}`, response `{data: [{embedding}]}`.
pub struct HttpEmbedder {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> HttpEmbedder {
        HttpEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, EmbedError> {
        for (i, text) in texts.iter().enumerate() {
            if text.trim().is_empty() {
                return Err(EmbedError::EmptyText(i));
            }
        }
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let mut last = String::new();
        for attempt in 0..self.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(
                    self.backoff_ms << (attempt - 1),
                ));
            }
            let mut call = ureq::post(&self.endpoint).set("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                call = call.set("Authorization", &format!("Bearer {key}"));
            }
            match call.send_json(body.clone()) {
                Ok(response) => {
                    let json: serde_json::Value = response
                        .into_json()
                        .map_err(|e| EmbedError::Provider(e.to_string()))?;
                    let data = json
                        .pointer("/data")
                        .and_then(|v| v.as_array())
                        .ok_or_else(|| EmbedError::Provider("response lacks data".into()))?;
                    if data.len() != texts.len() {
                        return Err(EmbedError::Provider(format!(
                            "expected {} embeddings, got {}",
                            texts.len(),
                            data.len()
                        )));
                    }
                    return data
                        .iter()
                        .map(|item| {
                            let raw = item
                                .pointer("/embedding")
                                .and_then(|v| v.as_array())
                                .ok_or_else(|| {
                                    EmbedError::Provider("item lacks embedding".into())
                                })?;
                            let components: Vec<f32> = raw
                                .iter()
                                .map(|v| v.as_f64().unwrap_or(0.0) as f32)
                                .collect();
                            Vector::normalized(components)
                        })
                        .collect();
                }
                Err(ureq::Error::Status(status, response)) => {
                    if status == 429 || status >= 500 {
                        last = format!("HTTP {status}");
                        continue;
                    }
                    return Err(EmbedError::Provider(format!(
                        "HTTP {status}: {}",
                        response.into_string().unwrap_or_default()
                    )));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(EmbedError::Provider(format!(
            "retry budget exhausted: {last}"
        )))
    }
}

#[derive(Debug, Clone)]
pub struct IndexRecord {
    pub id: String,
    pub text: String,
    pub vector: Vector,
}

/// Brute-force nearest-neighbour index; the filtered catalog is small
/// enough that a linear scan stays exact and fast.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    dimension: usize,
    records: Vec<IndexRecord>,
}

impl EmbeddingIndex {
    /// Embed `(id, text)` pairs in one batch. Ids must be unique.
    pub fn build(
        items: &[(String, String)],
        embedder: &dyn Embedder,
    ) -> Result<EmbeddingIndex, EmbedError> {
        let texts: Vec<String> = items.iter().map(|(_, text)| text.clone()).collect();
        let vectors = if texts.is_empty() {
            Vec::new()
        } else {
            embedder.embed(&texts)?
        };
        let dimension = vectors.first().map_or(0, Vector::dimension);
        let mut seen = std::collections::BTreeSet::new();
        let mut records = Vec::with_capacity(items.len());
        for ((id, text), vector) in items.iter().zip(vectors) {
            if vector.dimension() != dimension {
                return Err(EmbedError::DimensionMismatch {
                    expected: dimension,
                    got: vector.dimension(),
                });
            }
            if !seen.insert(id.clone()) {
                return Err(EmbedError::Provider(format!("duplicate index id: {id}")));
            }
            records.push(IndexRecord {
                id: id.clone(),
                text: text.clone(),
                vector,
            });
        }
        Ok(EmbeddingIndex { dimension, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn records(&self) -> &[IndexRecord] {
        &self.records
    }

    /// Restrict to the given ids without re-embedding.
    pub fn subset(&self, keep: &std::collections::BTreeSet<String>) -> EmbeddingIndex {
        EmbeddingIndex {
            dimension: self.dimension,
            records: self
                .records
                .iter()
                .filter(|r| keep.contains(&r.id))
                .cloned()
                .collect(),
        }
    }

    /// The record maximizing cosine similarity; exact score ties break to
    /// the lexicographically smallest id.
    pub fn top1(&self, query: &Vector) -> Result<(&str, f32), EmbedError> {
        if self.records.is_empty() {
            return Err(EmbedError::EmptyIndex);
        }
        let mut best: Option<(&str, f32)> = None;
        for record in &self.records {
            let score = cosine(query, &record.vector)?;
            best = match best {
                None => Some((&record.id, score)),
                Some((best_id, best_score)) => {
                    if score > best_score || (score == best_score && record.id.as_str() < best_id) {
                        Some((&record.id, score))
                    } else {
                        Some((best_id, best_score))
                    }
                }
            };
        }
        Ok(best.expect("non-empty index"))
    }

    const MAGIC: &'static [u8; 8] = b"KGEIDX01";

    /// Persist as a binary sidecar with a dimension header.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for record in &self.records {
            write_str(&mut out, &record.id);
            write_str(&mut out, &record.text);
            for component in record.vector.components() {
                out.extend_from_slice(&component.to_le_bytes());
            }
        }
        let tmp = path.as_ref().with_extension("idx.tmp");
        std::fs::File::create(&tmp)?.write_all(&out)?;
        std::fs::rename(&tmp, path.as_ref())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EmbeddingIndex, EmbedError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;
        let magic = take(&bytes, &mut cursor, 8)?;
        if magic != Self::MAGIC {
            return Err(EmbedError::Corrupt("bad magic".into()));
        }
        let dimension =
            u32::from_le_bytes(take(&bytes, &mut cursor, 4)?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(take(&bytes, &mut cursor, 8)?.try_into().unwrap()) as usize;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let id = read_str(&bytes, &mut cursor)?;
            let text = read_str(&bytes, &mut cursor)?;
            let raw = take(&bytes, &mut cursor, dimension * 4)?;
            let components: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            records.push(IndexRecord {
                id,
                text,
                vector: Vector(components),
            });
        }
        Ok(EmbeddingIndex { dimension, records })
    }
}

fn write_str(out: &mut Vec<u8>, value: &str) {
    out.extend_from_slice(&(value.len() as u32).to_le_bytes());
    out.extend_from_slice(value.as_bytes());
}

fn take<'a>(bytes: &'a [u8], cursor: &mut usize, len: usize) -> Result<&'a [u8], EmbedError> {
    let end = cursor
        .checked_add(len)
        .filter(|end| *end <= bytes.len())
        .ok_or_else(|| EmbedError::Corrupt("truncated index file".into()))?;
    let slice = &bytes[*cursor..end];
    *cursor = end;
    Ok(slice)
}

fn read_str(bytes: &[u8], cursor: &mut usize) -> Result<String, EmbedError> {
    let len = u32::from_le_bytes(take(bytes, cursor, 4)?.try_into().unwrap()) as usize;
    let raw = take(bytes, cursor, len)?;
    String::from_utf8(raw.to_vec()).map_err(|_| EmbedError::Corrupt("invalid utf-8".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embed_one(text: &str) -> Vector {
        TrigramEmbedder
            .embed(&[text.to_string()])
            .unwrap()
            .pop()
            .unwrap()
    }

    #[test]
    fn fallback_embedding_is_deterministic_and_unit_length() {
        let a = embed_one("abc");
        let b = embed_one("abc");
        assert_eq!(a, b);
        let norm: f32 = a.components().iter().map(|c| c * c).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identical_strings_have_cosine_one() {
        let a = embed_one("place of birth");
        let b = embed_one("place of birth");
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn related_phrases_beat_unrelated_ones() {
        let query = embed_one("place of birth");
        let related = embed_one("birth place");
        let unrelated = embed_one("award received");
        assert!(cosine(&query, &related).unwrap() > cosine(&query, &unrelated).unwrap());
    }

    #[test]
    fn empty_text_is_rejected_with_index() {
        let err = TrigramEmbedder
            .embed(&["ok".into(), "   ".into()])
            .unwrap_err();
        assert!(matches!(err, EmbedError::EmptyText(1)));
    }

    #[test]
    fn permuting_inputs_permutes_outputs() {
        let texts: Vec<String> = ["alpha", "beta", "gamma"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let forward = TrigramEmbedder.embed(&texts).unwrap();
        let reversed: Vec<String> = texts.iter().rev().cloned().collect();
        let backward = TrigramEmbedder.embed(&reversed).unwrap();
        assert_eq!(forward[0], backward[2]);
        assert_eq!(forward[2], backward[0]);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        let a = Vector::normalized(vec![1.0, 0.0]).unwrap();
        let b = Vector::normalized(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            cosine(&a, &b),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn orthogonal_one_hot_vectors_have_cosine_zero() {
        let a = Vector::normalized(vec![1.0, 0.0, 0.0]).unwrap();
        let b = Vector::normalized(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
        assert_eq!(cosine(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn cosine_is_symmetric_on_random_vectors() {
        let mut state = 0x853c49e6748fea9bu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f32 / (1u64 << 53) as f32 - 0.5
        };
        for _ in 0..100 {
            let u = Vector::normalized((0..16).map(|_| next()).collect()).unwrap();
            let v = Vector::normalized((0..16).map(|_| next()).collect()).unwrap();
            assert_eq!(cosine(&u, &v).unwrap(), cosine(&v, &u).unwrap());
        }
    }

    fn toy_index() -> EmbeddingIndex {
        let items: Vec<(String, String)> = [
            ("P19", "place of birth: most specific known birth location"),
            ("P569", "date of birth: date on which the subject was born"),
            (
                "P166",
                "award received: award or recognition won by the subject",
            ),
        ]
        .iter()
        .map(|(id, text)| (id.to_string(), text.to_string()))
        .collect();
        EmbeddingIndex::build(&items, &TrigramEmbedder).unwrap()
    }

    #[test]
    fn top1_finds_itself_with_score_one() {
        let index = toy_index();
        let query = embed_one("place of birth: most specific known birth location");
        let (id, score) = index.top1(&query).unwrap();
        assert_eq!(id, "P19");
        assert!((score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn top1_breaks_exact_ties_lexicographically() {
        let items: Vec<(String, String)> = vec![
            ("P2".into(), "same text".into()),
            ("P10".into(), "same text".into()),
        ];
        let index = EmbeddingIndex::build(&items, &TrigramEmbedder).unwrap();
        let query = embed_one("same text");
        let (id, _) = index.top1(&query).unwrap();
        assert_eq!(id, "P10", "lexicographic order: \"P10\" < \"P2\"");
    }

    #[test]
    fn top1_is_invariant_under_record_ordering() {
        let mut items: Vec<(String, String)> = (0..20)
            .map(|i| {
                (
                    format!("P{i}"),
                    format!("property number {i} about topic {}", i * 7),
                )
            })
            .collect();
        let query = embed_one("property number 13");
        let index = EmbeddingIndex::build(&items, &TrigramEmbedder).unwrap();
        let (expected, _) = index.top1(&query).unwrap();
        let expected = expected.to_string();
        items.reverse();
        let reversed = EmbeddingIndex::build(&items, &TrigramEmbedder).unwrap();
        let (actual, _) = reversed.top1(&query).unwrap();
        assert_eq!(actual, expected);
    }

    #[test]
    fn empty_index_errors() {
        let index = EmbeddingIndex::build(&[], &TrigramEmbedder).unwrap();
        let query = embed_one("anything");
        assert!(matches!(index.top1(&query), Err(EmbedError::EmptyIndex)));
    }

    #[test]
    fn index_round_trips_through_sidecar_file() {
        let index = toy_index();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.idx");
        index.save(&path).unwrap();
        let loaded = EmbeddingIndex::load(&path).unwrap();
        assert_eq!(loaded.dimension(), index.dimension());
        assert_eq!(loaded.len(), index.len());
        let query = embed_one("award received");
        assert_eq!(index.top1(&query).unwrap(), loaded.top1(&query).unwrap());
    }

    #[test]
    fn truncated_sidecar_is_corrupt() {
        let index = toy_index();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.idx");
        index.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            EmbeddingIndex::load(&path),
            Err(EmbedError::Corrupt(_))
        ));
    }

    #[test]
    fn http_embedder_normalizes_and_maps_rows() {
        let body = serde_json::json!({
            "data": [
                {"embedding": [3.0, 4.0]},
                {"embedding": [0.0, 2.0]}
            ]
        })
        .to_string();
        let server = crate::testhttp::serve(vec![(200, body)]);
        let embedder = HttpEmbedder {
            backoff_ms: 1,
            ..HttpEmbedder::new(server.url.clone(), "bge-small-en")
        };
        let vectors = embedder.embed(&["a".into(), "b".into()]).unwrap();
        assert_eq!(vectors[0].components(), &[0.6, 0.8]);
        assert_eq!(vectors[1].components(), &[0.0, 1.0]);
        assert!(server.requests()[0].contains("bge-small-en"));
    }
}
