//! Wikidata property catalog: snapshot ingest, datatype filtering, and the
//! PascalCase label substitution used everywhere downstream.
//!
//! The snapshot is a line-delimited file of records with fields
//! `pid, label, description, datatype, domains, ranges, aliases`. A bundled
//! snapshot ships with the repository so the whole pipeline runs offline;
//! `fetch_catalog` can rebuild it from a SPARQL endpoint.

use std::collections::BTreeMap;
use std::fs;

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot record {record}: missing or invalid field: {missing}")]
    Schema { record: usize, missing: String },
    #[error("duplicate property id: {0}")]
    DuplicatePid(String),
    #[error("label has no alphanumeric characters")]
    EmptyResult,
    #[error("network error talking to SPARQL endpoint: {0}")]
    Network(String),
    #[error("SPARQL query failed with status {status}: {body}")]
    Query { status: u16, body: String },
}

/// Wikidata property datatypes. Only the whitelist survives
/// [`filter_catalog`]; identifiers into external databases and everything
/// else are dropped from the candidate list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Datatype {
    Item,
    Quantity,
    String,
    MonolingualText,
    PointInTime,
    ExternalId,
    Other(std::string::String),
}

impl Datatype {
    pub fn is_whitelisted(&self) -> bool {
        matches!(
            self,
            Datatype::Item
                | Datatype::Quantity
                | Datatype::String
                | Datatype::MonolingualText
                | Datatype::PointInTime
        )
    }

    /// Accepts the snapshot tokens ("item", "point in time", ...) as well as
    /// the wikibase ontology names SPARQL returns ("WikibaseItem", "Time").
    pub fn parse(raw: &str) -> Datatype {
        let tail = raw.rsplit(['/', '#']).next().unwrap_or(raw);
        let key: std::string::String = tail
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<std::string::String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "item" | "wikibaseitem" => Datatype::Item,
            "quantity" => Datatype::Quantity,
            "string" => Datatype::String,
            "monolingualtext" => Datatype::MonolingualText,
            "pointintime" | "time" => Datatype::PointInTime,
            "externalid" => Datatype::ExternalId,
            _ => Datatype::Other(raw.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Datatype::Item => "item",
            Datatype::Quantity => "quantity",
            Datatype::String => "string",
            Datatype::MonolingualText => "monolingual text",
            Datatype::PointInTime => "point in time",
            Datatype::ExternalId => "external-id",
            Datatype::Other(raw) => raw,
        }
    }
}

impl Serialize for Datatype {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Datatype {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = std::string::String::deserialize(deserializer)?;
        Ok(Datatype::parse(&raw))
    }
}

/// One Wikidata property with the fields the pipeline needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyEntry {
    pub pid: String,
    pub label: String,
    pub pascal_label: String,
    pub description: String,
    pub datatype: Datatype,
    #[serde(default)]
    pub domains: Vec<String>,
    #[serde(default)]
    pub ranges: Vec<String>,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl PropertyEntry {
    /// Text embedded for similarity search. The labeled form prefixes the
    /// property label so near-synonym descriptions stay distinguishable.
    pub fn embedding_text(&self, labeled: bool) -> String {
        if labeled {
            format!("{}: {}", self.label, self.description)
        } else {
            self.description.clone()
        }
    }

    /// Numeric part of the PID, used for collision tie-breaks.
    pub fn numeric_pid(&self) -> u64 {
        self.pid
            .trim_start_matches(['P', 'p'])
            .parse()
            .unwrap_or(u64::MAX)
    }
}

/// On-disk snapshot record; `pascal_label` is derived at load time.
#[derive(Debug, Serialize, Deserialize)]
struct SnapshotRecord {
    pid: Option<String>,
    label: Option<String>,
    description: Option<String>,
    datatype: Option<String>,
    #[serde(default)]
    domains: Vec<String>,
    #[serde(default)]
    ranges: Vec<String>,
    #[serde(default)]
    aliases: Vec<String>,
}

/// The candidate property list with unique PascalCase labels.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: Vec<PropertyEntry>,
    by_pascal: BTreeMap<String, usize>,
    by_pid: BTreeMap<String, usize>,
    filtered: bool,
    /// Collision notes from load time (pascal label clashes).
    pub warnings: Vec<String>,
}

impl Catalog {
    pub fn entries(&self) -> &[PropertyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_filtered(&self) -> bool {
        self.filtered
    }

    pub fn get_by_pascal(&self, pascal_label: &str) -> Option<&PropertyEntry> {
        self.by_pascal.get(pascal_label).map(|i| &self.entries[*i])
    }

    pub fn get_by_pid(&self, pid: &str) -> Option<&PropertyEntry> {
        self.by_pid.get(pid).map(|i| &self.entries[*i])
    }

    pub fn pascal_labels(&self) -> impl Iterator<Item = &str> {
        self.by_pascal.keys().map(|s| s.as_str())
    }

    fn from_entries(
        entries: Vec<PropertyEntry>,
        filtered: bool,
        mut warnings: Vec<String>,
    ) -> Catalog {
        // Resolve pascal-label collisions: the numerically smaller PID wins.
        let mut keeper: BTreeMap<String, usize> = BTreeMap::new();
        let mut dropped: Vec<usize> = Vec::new();
        for (i, entry) in entries.iter().enumerate() {
            match keeper.get(&entry.pascal_label) {
                None => {
                    keeper.insert(entry.pascal_label.clone(), i);
                }
                Some(&j) => {
                    let (keep, drop) = if entries[j].numeric_pid() <= entry.numeric_pid() {
                        (j, i)
                    } else {
                        (i, j)
                    };
                    warnings.push(format!(
                        "pascal label collision on {}: kept {}, dropped {}",
                        entry.pascal_label, entries[keep].pid, entries[drop].pid
                    ));
                    keeper.insert(entry.pascal_label.clone(), keep);
                    dropped.push(drop);
                }
            }
        }
        let entries: Vec<PropertyEntry> = entries
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, e)| e)
            .collect();
        let mut by_pascal = BTreeMap::new();
        let mut by_pid = BTreeMap::new();
        for (i, entry) in entries.iter().enumerate() {
            by_pascal.insert(entry.pascal_label.clone(), i);
            by_pid.insert(entry.pid.clone(), i);
        }
        Catalog {
            entries,
            by_pascal,
            by_pid,
            filtered,
            warnings,
        }
    }
}

/// Convert a property label to its PascalCase form: split on whitespace,
/// hyphens, and slashes; capitalize each token's first letter; strip all
/// other non-alphanumeric characters.
pub fn pascal_case(label: &str) -> Result<String, CatalogError> {
    let mut out = String::new();
    for token in label.split(|c: char| c.is_whitespace() || c == '-' || c == '/') {
        let cleaned: String = token.chars().filter(|c| c.is_alphanumeric()).collect();
        let mut chars = cleaned.chars();
        if let Some(first) = chars.next() {
            out.extend(first.to_uppercase());
            out.push_str(chars.as_str());
        }
    }
    if out.is_empty() {
        return Err(CatalogError::EmptyResult);
    }
    Ok(out)
}

/// Load an unfiltered catalog from a line-delimited snapshot file.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let text = fs::read_to_string(path)?;
    load_snapshot_str(&text)
}

pub fn load_snapshot_str(text: &str) -> Result<Catalog, CatalogError> {
    let mut entries: Vec<PropertyEntry> = Vec::new();
    let mut seen_pids: BTreeMap<String, ()> = BTreeMap::new();
    let mut record_index = 0usize;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        record_index += 1;
        let record: SnapshotRecord =
            serde_json::from_str(line).map_err(|e| CatalogError::Schema {
                record: record_index,
                missing: format!("unparsable record ({e})"),
            })?;
        let entry = validate_record(record, record_index)?;
        if seen_pids.insert(entry.pid.clone(), ()).is_some() {
            return Err(CatalogError::DuplicatePid(entry.pid));
        }
        entries.push(entry);
    }
    Ok(Catalog::from_entries(entries, false, Vec::new()))
}

fn validate_record(record: SnapshotRecord, index: usize) -> Result<PropertyEntry, CatalogError> {
    let missing = |field: &str| CatalogError::Schema {
        record: index,
        missing: field.to_string(),
    };
    let pid = record.pid.filter(|v| !v.is_empty()).ok_or(missing("pid"))?;
    let label = record
        .label
        .filter(|v| !v.trim().is_empty())
        .ok_or(missing("label"))?;
    let description = record
        .description
        .filter(|v| !v.trim().is_empty())
        .ok_or(missing("description"))?;
    let datatype = record
        .datatype
        .filter(|v| !v.is_empty())
        .ok_or(missing("datatype"))?;
    let pascal_label = pascal_case(&label).map_err(|_| missing("label"))?;
    Ok(PropertyEntry {
        pid,
        label,
        pascal_label,
        description,
        datatype: Datatype::parse(&datatype),
        domains: record.domains,
        ranges: record.ranges,
        aliases: record.aliases,
    })
}

/// Keep only whitelist datatypes (item, quantity, string, monolingual text,
/// point in time); external-id and everything else is removed.
pub fn filter_catalog(catalog: &Catalog) -> Catalog {
    let entries: Vec<PropertyEntry> = catalog
        .entries
        .iter()
        .filter(|e| e.datatype.is_whitelisted())
        .cloned()
        .collect();
    Catalog::from_entries(entries, true, Vec::new())
}

/// Write entries as a snapshot file (one record per line).
pub fn write_snapshot(
    entries: &[PropertyEntry],
    path: impl AsRef<Path>,
) -> Result<(), CatalogError> {
    let mut out = Vec::new();
    for entry in entries {
        let record = serde_json::json!({
            "pid": entry.pid,
            "label": entry.label,
            "description": entry.description,
            "datatype": entry.datatype,
            "domains": entry.domains,
            "ranges": entry.ranges,
            "aliases": entry.aliases,
        });
        serde_json::to_writer(&mut out, &record).map_err(|e| CatalogError::Schema {
            record: 0,
            missing: e.to_string(),
        })?;
        out.push(b'\n');
    }
    let tmp = path.as_ref().with_extension("tmp");
    fs::write(&tmp, &out)?;
    fs::rename(&tmp, path.as_ref())?;
    Ok(())
}

/// Outcome of a catalog fetch: how many records were written and how many
/// bindings were skipped for lacking a description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchStats {
    pub records: usize,
    pub skipped_missing_description: usize,
}

const PROPERTY_QUERY: &str =
    "SELECT ?p ?pLabel ?pDescription ?datatype ?domainLabel ?rangeLabel WHERE { \
?p a wikibase:Property ; wikibase:propertyType ?datatype . \
OPTIONAL { ?p p:P2302 ?ds . ?ds ps:P2302 wd:Q21503250 ; pq:P2308 ?domain . } \
OPTIONAL { ?p p:P2302 ?rs . ?rs ps:P2302 wd:Q21510865 ; pq:P2308 ?range . } \
SERVICE wikibase:label { bd:serviceParam wikibase:language \"en\" . } }";

/// Fetch all properties from a SPARQL endpoint and write a snapshot file.
/// Transient failures (transport errors, 429, 5xx) are retried with bounded
/// backoff; other HTTP errors surface as [`CatalogError::Query`].
pub fn fetch_catalog(
    endpoint: &str,
    out_path: impl AsRef<Path>,
    attempts: u32,
    backoff_ms: u64,
) -> Result<FetchStats, CatalogError> {
    let body = query_with_retry(endpoint, PROPERTY_QUERY, attempts, backoff_ms)?;
    let parsed: serde_json::Value = serde_json::from_str(&body)
        .map_err(|e| CatalogError::Network(format!("invalid SPARQL JSON from endpoint: {e}")))?;
    let bindings = parsed
        .pointer("/results/bindings")
        .and_then(|v| v.as_array())
        .ok_or_else(|| CatalogError::Network("SPARQL response lacks bindings".into()))?;

    let mut by_pid: BTreeMap<String, PropertyEntry> = BTreeMap::new();
    let mut skipped = 0usize;
    for binding in bindings {
        let get = |var: &str| {
            binding
                .pointer(&format!("/{var}/value"))
                .and_then(|v| v.as_str())
                .map(str::to_string)
        };
        let Some(p) = get("p") else { continue };
        let pid = p.rsplit('/').next().unwrap_or(&p).to_string();
        let Some(label) = get("pLabel").filter(|l| !l.trim().is_empty() && *l != pid) else {
            skipped += 1;
            continue;
        };
        let Some(description) = get("pDescription").filter(|d| !d.trim().is_empty()) else {
            skipped += 1;
            continue;
        };
        let Some(datatype) = get("datatype") else {
            skipped += 1;
            continue;
        };
        let Ok(pascal_label) = pascal_case(&label) else {
            skipped += 1;
            continue;
        };
        let entry = by_pid.entry(pid.clone()).or_insert_with(|| PropertyEntry {
            pid,
            label,
            pascal_label,
            description,
            datatype: Datatype::parse(&datatype),
            domains: Vec::new(),
            ranges: Vec::new(),
            aliases: Vec::new(),
        });
        if let Some(domain) = get("domainLabel") {
            if !domain.is_empty() && !entry.domains.contains(&domain) {
                entry.domains.push(domain);
            }
        }
        if let Some(range) = get("rangeLabel") {
            if !range.is_empty() && !entry.ranges.contains(&range) {
                entry.ranges.push(range);
            }
        }
    }
    let entries: Vec<PropertyEntry> = by_pid.into_values().collect();
    write_snapshot(&entries, out_path)?;
    Ok(FetchStats {
        records: entries.len(),
        skipped_missing_description: skipped,
    })
}

fn query_with_retry(
    endpoint: &str,
    query: &str,
    attempts: u32,
    backoff_ms: u64,
) -> Result<String, CatalogError> {
    let mut last_error = String::new();
    for attempt in 0..attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(std::time::Duration::from_millis(
                backoff_ms << (attempt - 1),
            ));
        }
        let result = ureq::get(endpoint)
            .query("format", "json")
            .query("query", query)
            .call();
        match result {
            Ok(response) => {
                return response
                    .into_string()
                    .map_err(|e| CatalogError::Network(e.to_string()));
            }
            Err(ureq::Error::Status(status, response)) => {
                let body = response.into_string().unwrap_or_default();
                if status == 429 || status >= 500 {
                    last_error = format!("HTTP {status}");
                    continue;
                }
                let excerpt: String = body.chars().take(200).collect();
                return Err(CatalogError::Query {
                    status,
                    body: excerpt,
                });
            }
            Err(e) => {
                last_error = e.to_string();
            }
        }
    }
    Err(CatalogError::Network(format!(
        "retry budget exhausted: {last_error}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(pid: &str, label: &str, description: &str, datatype: &str) -> String {
        serde_json::json!({
            "pid": pid, "label": label, "description": description, "datatype": datatype,
        })
        .to_string()
    }

    #[test]
    fn pascal_case_matches_catalog_style() {
        assert_eq!(pascal_case("place of birth").unwrap(), "PlaceOfBirth");
        assert_eq!(pascal_case("date of birth").unwrap(), "DateOfBirth");
        assert_eq!(
            pascal_case("languages spoken, written or signed").unwrap(),
            "LanguagesSpokenWrittenOrSigned"
        );
        assert_eq!(pascal_case("part-of/whole").unwrap(), "PartOfWhole");
        assert_eq!(pascal_case("X").unwrap(), "X");
    }

    #[test]
    fn pascal_case_is_idempotent_and_alphanumeric() {
        for label in [
            "place of birth",
            "head of state",
            "ISBN-13",
            "per capita income",
        ] {
            let once = pascal_case(label).unwrap();
            assert_eq!(pascal_case(&once).unwrap(), once);
            assert!(once.chars().all(|c| c.is_ascii_alphanumeric()), "{once}");
        }
    }

    #[test]
    fn pascal_case_rejects_symbol_soup() {
        assert!(matches!(
            pascal_case("!!! ---"),
            Err(CatalogError::EmptyResult)
        ));
    }

    #[test]
    fn load_derives_pascal_labels() {
        let text = record(
            "P19",
            "place of birth",
            "most specific known birth location of a person, animal or fictional character",
            "item",
        );
        let catalog = load_snapshot_str(&text).unwrap();
        assert_eq!(catalog.len(), 1);
        assert_eq!(catalog.entries()[0].pascal_label, "PlaceOfBirth");
        assert!(catalog.get_by_pascal("PlaceOfBirth").is_some());
        assert!(catalog.get_by_pid("P19").is_some());
    }

    #[test]
    fn empty_snapshot_loads_empty_catalog() {
        let catalog = load_snapshot_str("").unwrap();
        assert!(catalog.is_empty());
    }

    #[test]
    fn missing_description_is_schema_error() {
        let text = r#"{"pid":"P1","label":"x","datatype":"item"}"#;
        let err = load_snapshot_str(text).unwrap_err();
        match err {
            CatalogError::Schema { record, missing } => {
                assert_eq!(record, 1);
                assert_eq!(missing, "description");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn duplicate_pid_is_rejected() {
        let text = format!(
            "{}\n{}",
            record("P1", "a", "first", "item"),
            record("P1", "b", "second", "item")
        );
        assert!(matches!(
            load_snapshot_str(&text).unwrap_err(),
            CatalogError::DuplicatePid(pid) if pid == "P1"
        ));
    }

    #[test]
    fn pascal_collision_keeps_smaller_pid() {
        let text = format!(
            "{}\n{}",
            record(
                "P100",
                "head of state",
                "chief public representative",
                "item"
            ),
            record("P7", "head-of state", "variant label", "item")
        );
        let catalog = load_snapshot_str(&text).unwrap();
        assert_eq!(catalog.len(), 1);
        assert_eq!(catalog.entries()[0].pid, "P7");
        assert_eq!(catalog.warnings.len(), 1);
    }

    #[test]
    fn filter_keeps_whitelist_only() {
        let mut lines = Vec::new();
        for i in 0..4 {
            lines.push(record(
                &format!("P{i}"),
                &format!("item prop {i}"),
                "d",
                "item",
            ));
        }
        lines.push(record("P10", "some quantity", "d", "quantity"));
        lines.push(record("P11", "some string", "d", "string"));
        lines.push(record("P12", "some text", "d", "monolingual text"));
        lines.push(record("P13", "some date", "d", "point in time"));
        lines.push(record("P20", "viaf id", "d", "external-id"));
        lines.push(record("P21", "imdb id", "d", "external-id"));
        lines.push(record("P22", "image", "d", "commonsMedia"));
        lines.push(record("P23", "website", "d", "url"));
        let catalog = load_snapshot_str(&lines.join("\n")).unwrap();
        let filtered = filter_catalog(&catalog);
        assert_eq!(filtered.len(), 8);
        assert!(filtered.is_filtered());
        assert!(filtered.get_by_pid("P20").is_none());
        // Idempotent.
        let twice = filter_catalog(&filtered);
        assert_eq!(twice.len(), filtered.len());
    }

    #[test]
    fn every_filtered_entry_is_retrievable_through_both_indexes() {
        let mut lines = Vec::new();
        for i in 0..12 {
            let datatype = if i % 3 == 0 { "external-id" } else { "item" };
            lines.push(record(
                &format!("P{i}"),
                &format!("label number {i}"),
                "a description",
                datatype,
            ));
        }
        let filtered = filter_catalog(&load_snapshot_str(&lines.join("\n")).unwrap());
        for entry in filtered.entries() {
            assert_eq!(
                filtered.get_by_pascal(&entry.pascal_label).unwrap().pid,
                entry.pid
            );
            assert_eq!(
                filtered.get_by_pid(&entry.pid).unwrap().pascal_label,
                entry.pascal_label
            );
        }
    }

    #[test]
    fn datatype_parsing_accepts_sparql_names() {
        assert_eq!(
            Datatype::parse("http://wikiba.se/ontology#WikibaseItem"),
            Datatype::Item
        );
        assert_eq!(Datatype::parse("Time"), Datatype::PointInTime);
        assert_eq!(Datatype::parse("point in time"), Datatype::PointInTime);
        assert_eq!(
            Datatype::parse("http://wikiba.se/ontology#ExternalId"),
            Datatype::ExternalId
        );
        assert_eq!(Datatype::parse("url"), Datatype::Other("url".to_string()));
    }

    fn sparql_binding(pid: &str, label: &str, description: Option<&str>) -> serde_json::Value {
        let mut binding = serde_json::json!({
            "p": {"value": format!("http://www.wikidata.org/entity/{pid}")},
            "pLabel": {"value": label},
            "datatype": {"value": "http://wikiba.se/ontology#WikibaseItem"},
        });
        if let Some(d) = description {
            binding["pDescription"] = serde_json::json!({"value": d});
        }
        binding
    }

    fn sparql_body(bindings: Vec<serde_json::Value>) -> String {
        serde_json::json!({"results": {"bindings": bindings}}).to_string()
    }

    #[test]
    fn fetch_writes_snapshot_from_bindings() {
        let server = crate::testhttp::serve(vec![(
            200,
            sparql_body(vec![
                sparql_binding("P19", "place of birth", Some("birth location")),
                sparql_binding("P27", "country of citizenship", Some("citizenship country")),
            ]),
        )]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.jsonl");
        let stats = fetch_catalog(&server.url, &path, 3, 1).unwrap();
        assert_eq!(stats.records, 2);
        assert_eq!(stats.skipped_missing_description, 0);
        let catalog = load_snapshot(&path).unwrap();
        assert_eq!(catalog.len(), 2);
        assert!(catalog.get_by_pid("P19").is_some());
    }

    #[test]
    fn fetch_exhausts_retry_budget_on_server_errors() {
        let server = crate::testhttp::serve(vec![
            (500, "boom".into()),
            (500, "boom".into()),
            (500, "boom".into()),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let err = fetch_catalog(&server.url, dir.path().join("s.jsonl"), 3, 1).unwrap_err();
        assert!(matches!(err, CatalogError::Network(_)), "{err:?}");
        assert_eq!(server.request_count(), 3);
    }

    #[test]
    fn fetch_skips_bindings_without_description() {
        let server = crate::testhttp::serve(vec![(
            200,
            sparql_body(vec![
                sparql_binding("P19", "place of birth", Some("birth location")),
                sparql_binding("P999", "mystery", None),
            ]),
        )]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.jsonl");
        let stats = fetch_catalog(&server.url, &path, 1, 1).unwrap();
        assert_eq!(stats.records, 1);
        assert_eq!(stats.skipped_missing_description, 1);
    }

    #[test]
    fn fetch_reports_client_errors_without_retry() {
        let server = crate::testhttp::serve(vec![(400, "bad query".into())]);
        let dir = tempfile::tempdir().unwrap();
        let err = fetch_catalog(&server.url, dir.path().join("s.jsonl"), 3, 1).unwrap_err();
        match err {
            CatalogError::Query { status, body } => {
                assert_eq!(status, 400);
                assert!(body.contains("bad query"));
            }
            other => panic!("unexpected error: {other:?}"),
        }
        assert_eq!(server.request_count(), 1);
    }

    #[test]
    fn snapshot_round_trips_through_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.jsonl");
        let text = record(
            "P569",
            "date of birth",
            "date on which the subject was born",
            "point in time",
        );
        let catalog = load_snapshot_str(&text).unwrap();
        write_snapshot(catalog.entries(), &path).unwrap();
        let reloaded = load_snapshot(&path).unwrap();
        assert_eq!(reloaded.entries(), catalog.entries());
    }
}
