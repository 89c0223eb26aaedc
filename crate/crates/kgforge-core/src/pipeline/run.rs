//! The end-to-end run: CQ generation, answering, relation extraction,
//! matching, ontology assembly, and KG generation, document-parallel with
//! per-document failure isolation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::{filter_catalog, load_snapshot, Catalog};
use crate::cq::{answer_cq, generate_cqs, CqOutcome, Document, QAPair};
use crate::embed::{Embedder, EmbeddingIndex, HttpEmbedder, TrigramEmbedder};
use crate::eval::{evaluate_corpus, Criterion, EvalReport};
use crate::kg::build_kg;
use crate::llm::{Gateway, HttpBackend, MockBackend};
use crate::matcher::{build_final_property_set, build_index, MatchDecision, MatchMode, Matcher};
use crate::ontology::{
    assemble_ontology, author_minted_entries, format_wikidata_entries, OntologyDocument,
};
use crate::rdf::{parse_turtle, serialize_turtle, Triple};
use crate::relations::{extract_relations, RelationOutcome};

use super::config::{OntologyScope, RunConfig};
use super::corpus::load_gold;
use super::manifest::{DocStatus, RunManifest};
use super::RunError;

/// Everything a run needs, resolved and validated from the config.
pub struct PreparedRun {
    pub config: RunConfig,
    pub catalog: Catalog,
    pub index: EmbeddingIndex,
    pub embedder: Box<dyn Embedder>,
    pub gateway: Gateway,
    pub mode: MatchMode,
    pub aliases: BTreeMap<String, String>,
    pub scope: OntologyScope,
    pub labeled_text: bool,
}

impl PreparedRun {
    pub fn from_config(config: &RunConfig) -> Result<PreparedRun, RunError> {
        config.validate()?;
        std::fs::create_dir_all(&config.run.dir).map_err(|e| {
            super::ConfigError::Invalid(format!(
                "run.dir {:?} is not writable: {e}",
                config.run.dir
            ))
        })?;
        let unfiltered = load_snapshot(&config.catalog.snapshot)?;
        let catalog = filter_catalog(&unfiltered);
        let labeled_text = config.labeled_embedding_text()?;
        let scope = config.ontology_scope()?;
        config.eval_criterion()?;

        let embedder: Box<dyn Embedder> = match config.embed.mode.as_str() {
            "fallback" => Box::new(TrigramEmbedder),
            "live" => {
                let mut live = HttpEmbedder::new(&config.embed.endpoint, &config.embed.model);
                live.api_key = std::env::var(&config.llm.api_key_env).ok();
                Box::new(live)
            }
            other => {
                return Err(super::ConfigError::Invalid(format!(
                    "embed.mode must be fallback or live, got {other:?}"
                ))
                .into())
            }
        };

        let index = load_or_build_index(config, &catalog, embedder.as_ref(), labeled_text)?;
        let mode = config.match_mode(&catalog)?;
        let index = match &mode {
            MatchMode::Constrained(Some(target)) => {
                let keep: BTreeSet<String> = catalog
                    .entries()
                    .iter()
                    .filter(|e| target.contains(&e.pascal_label))
                    .map(|e| e.pid.clone())
                    .collect();
                index.subset(&keep)
            }
            _ => index,
        };
        let aliases = config.alias_map(&catalog)?;

        let backend: Option<Box<dyn crate::llm::ChatBackend>> = if !config.llm.mock_dir.is_empty() {
            Some(Box::new(MockBackend::new(&config.llm.mock_dir)))
        } else if !config.llm.endpoint.is_empty() {
            let mut http = HttpBackend::new(&config.llm.endpoint);
            http.api_key = std::env::var(&config.llm.api_key_env).ok();
            http.attempts = config.llm.retries.max(1);
            http.backoff_ms = config.llm.retry_backoff_ms;
            Some(Box::new(http))
        } else {
            None
        };
        let gateway = Gateway::new(
            backend,
            Some(config.cache_dir()),
            &config.llm.model,
            config.llm.temperature,
            config.llm.max_output_tokens,
            config.llm.concurrency,
        );

        Ok(PreparedRun {
            config: config.clone(),
            catalog,
            index,
            embedder,
            gateway,
            mode,
            aliases,
            scope,
            labeled_text,
        })
    }
}

/// The index sidecar sits next to the snapshot, one per embedding-text
/// flavor; it is rebuilt whenever it no longer covers the catalog.
fn load_or_build_index(
    config: &RunConfig,
    catalog: &Catalog,
    embedder: &dyn Embedder,
    labeled_text: bool,
) -> Result<EmbeddingIndex, RunError> {
    let suffix = if labeled_text {
        "labeled.idx"
    } else {
        "desc.idx"
    };
    let sidecar = config.catalog.snapshot.with_extension(suffix);
    if let Ok(index) = EmbeddingIndex::load(&sidecar) {
        let expected: BTreeSet<&str> = catalog.entries().iter().map(|e| e.pid.as_str()).collect();
        let actual: BTreeSet<&str> = index.records().iter().map(|r| r.id.as_str()).collect();
        if expected == actual {
            return Ok(index);
        }
    }
    let index = build_index(catalog, &MatchMode::Unconstrained, embedder, labeled_text)?;
    if let Err(error) = index.save(&sidecar) {
        // A read-only snapshot directory only costs a rebuild next run.
        eprintln!("warning: could not persist index sidecar: {error}");
    }
    Ok(index)
}

#[derive(Default)]
struct StageCounters {
    skipped_statements: AtomicU64,
    dropped_off_ontology: AtomicU64,
    relations_extracted: AtomicU64,
    questions_dropped: AtomicU64,
    authored_dropped: AtomicU64,
    renamed_collisions: AtomicU64,
    empty_kgs: AtomicU64,
}

struct RunContext<'a> {
    prepared: &'a PreparedRun,
    matcher: Matcher<'a>,
    run_dir: PathBuf,
    counters: StageCounters,
    manifest: Mutex<RunManifest>,
}

impl RunContext<'_> {
    fn update_manifest(&self, apply: impl FnOnce(&mut RunManifest)) -> Result<(), RunError> {
        let mut manifest = self.manifest.lock().unwrap();
        apply(&mut manifest);
        manifest.write(&self.run_dir)
    }
}

/// Load a stage artifact if present and well-formed, otherwise compute and
/// persist it atomically. Completed artifacts are never rewritten.
fn load_or_compute<T: Serialize + DeserializeOwned>(
    path: &Path,
    compute: impl FnOnce() -> Result<T, String>,
) -> Result<T, String> {
    if let Ok(bytes) = std::fs::read(path) {
        if let Ok(value) = serde_json::from_slice::<T>(&bytes) {
            return Ok(value);
        }
    }
    let value = compute()?;
    write_atomic(
        path,
        &serde_json::to_vec_pretty(&value).expect("artifact serializes"),
    )
    .map_err(|e| format!("writing {}: {e}", path.display()))?;
    Ok(value)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let parent = path.parent().expect("artifact path has a parent");
    std::fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(
        ".{}.tmp-{}",
        path.file_name().unwrap().to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Per-document outputs of the stages up to and including matching.
struct StageAOutput {
    qa: Vec<QAPair>,
    decisions: Vec<MatchDecision>,
    concepts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct KgMeta {
    skipped_statements: usize,
    dropped_off_ontology: usize,
    empty_graph: bool,
    raw_response: String,
}

fn doc_dir(run_dir: &Path, doc_id: &str) -> PathBuf {
    run_dir.join(doc_id)
}

fn stage_a(ctx: &RunContext<'_>, document: &Document) -> Result<StageAOutput, String> {
    let prepared = ctx.prepared;
    let dir = doc_dir(&ctx.run_dir, &document.id);
    let gateway = &prepared.gateway;

    let cq_outcome: CqOutcome = load_or_compute(&dir.join("cqs.json"), || {
        let outcome = generate_cqs(gateway, document, prepared.config.cq.max_per_doc)
            .map_err(|e| e.to_string())?;
        ctx.counters
            .questions_dropped
            .fetch_add(outcome.dropped_malformed as u64, Ordering::Relaxed);
        Ok(outcome)
    })?;
    ctx.update_manifest(|m| m.mark_stage(&document.id, "cqs"))
        .map_err(|e| e.to_string())?;

    let qa: Vec<QAPair> = load_or_compute(&dir.join("qa.json"), || {
        cq_outcome
            .questions
            .iter()
            .map(|cq| {
                answer_cq(gateway, document, cq, &prepared.config.cq.refusal_pattern)
                    .map_err(|e| e.to_string())
            })
            .collect()
    })?;
    ctx.update_manifest(|m| m.mark_stage(&document.id, "qa"))
        .map_err(|e| e.to_string())?;

    let relation_outcome: RelationOutcome = load_or_compute(&dir.join("relations.json"), || {
        let outcome = extract_relations(gateway, document, &cq_outcome.questions)
            .map_err(|e| e.to_string())?;
        ctx.counters
            .relations_extracted
            .fetch_add(outcome.relations.len() as u64, Ordering::Relaxed);
        Ok(outcome)
    })?;
    ctx.update_manifest(|m| m.mark_stage(&document.id, "relations"))
        .map_err(|e| e.to_string())?;

    let decisions: Vec<MatchDecision> = load_or_compute(&dir.join("matches.json"), || {
        relation_outcome
            .relations
            .iter()
            .map(|r| ctx.matcher.match_relation(r).map_err(|e| e.to_string()))
            .collect()
    })?;
    ctx.update_manifest(|m| m.mark_stage(&document.id, "matches"))
        .map_err(|e| e.to_string())?;

    Ok(StageAOutput {
        qa,
        decisions,
        concepts: relation_outcome.concepts,
    })
}

/// Assemble an ontology for the given decisions, reusing the persisted
/// Turtle when present so regenerated prompts stay byte-stable.
fn ontology_stage(
    ctx: &RunContext<'_>,
    path: &Path,
    decisions: &[MatchDecision],
    concepts: &[String],
) -> Result<OntologyDocument, String> {
    if let Ok(text) = std::fs::read_to_string(path) {
        if let Ok(document) = OntologyDocument::from_turtle(&text) {
            return Ok(document);
        }
    }
    let prepared = ctx.prepared;
    let final_set =
        build_final_property_set(decisions, &prepared.mode).map_err(|e| e.to_string())?;
    let wikidata_entries = format_wikidata_entries(&final_set.wikidata);
    let authored = author_minted_entries(&prepared.gateway, &final_set.minted, concepts)
        .map_err(|e| e.to_string())?;
    ctx.counters
        .authored_dropped
        .fetch_add(authored.dropped as u64, Ordering::Relaxed);
    let document = assemble_ontology(wikidata_entries, authored.entries);
    ctx.counters
        .renamed_collisions
        .fetch_add(document.renamed_collisions as u64, Ordering::Relaxed);
    write_atomic(path, document.turtle.as_bytes()).map_err(|e| e.to_string())?;
    Ok(document)
}

fn kg_stage(
    ctx: &RunContext<'_>,
    document: &Document,
    qa: &[QAPair],
    ontology: &OntologyDocument,
) -> Result<(), String> {
    let dir = doc_dir(&ctx.run_dir, &document.id);
    let kg_path = dir.join("kg.ttl");
    let meta_path = dir.join("kg_meta.json");
    if kg_path.exists() && meta_path.exists() {
        let resumable = std::fs::read_to_string(&kg_path)
            .ok()
            .and_then(|text| parse_turtle(&text).ok())
            .is_some()
            && std::fs::read(&meta_path)
                .ok()
                .and_then(|bytes| serde_json::from_slice::<KgMeta>(&bytes).ok())
                .is_some();
        if resumable {
            return Ok(());
        }
    }
    let result = build_kg(
        &ctx.prepared.gateway,
        document,
        qa,
        ontology,
        ctx.prepared.config.kg.per_pair,
    )
    .map_err(|e| e.to_string())?;
    ctx.counters
        .skipped_statements
        .fetch_add(result.skipped_statements as u64, Ordering::Relaxed);
    ctx.counters
        .dropped_off_ontology
        .fetch_add(result.dropped_off_ontology as u64, Ordering::Relaxed);
    if result.graph.is_empty() {
        ctx.counters.empty_kgs.fetch_add(1, Ordering::Relaxed);
    }
    let turtle = serialize_turtle(&result.graph).map_err(|e| e.to_string())?;
    write_atomic(&kg_path, turtle.as_bytes()).map_err(|e| e.to_string())?;
    let meta = KgMeta {
        skipped_statements: result.skipped_statements,
        dropped_off_ontology: result.dropped_off_ontology,
        empty_graph: result.graph.is_empty(),
        raw_response: result.raw_response,
    };
    write_atomic(
        &meta_path,
        &serde_json::to_vec_pretty(&meta).expect("meta serializes"),
    )
    .map_err(|e| e.to_string())?;
    Ok(())
}

/// Run all stages over the corpus. Per-document failures are recorded in
/// the manifest without aborting the rest.
pub fn run_pipeline(config: &RunConfig, corpus: &[Document]) -> Result<RunManifest, RunError> {
    let prepared = PreparedRun::from_config(config)?;
    run_prepared(&prepared, corpus)
}

pub fn run_prepared(prepared: &PreparedRun, corpus: &[Document]) -> Result<RunManifest, RunError> {
    let config = &prepared.config;
    let run_dir = config.run.dir.clone();
    std::fs::create_dir_all(&run_dir)?;
    let manifest = RunManifest::new(
        serde_json::to_value(config).expect("config serializes"),
        corpus.iter().map(|d| d.id.clone()),
    );
    manifest.write(&run_dir)?;

    let matcher = Matcher {
        catalog: &prepared.catalog,
        index: &prepared.index,
        embedder: prepared.embedder.as_ref(),
        gateway: &prepared.gateway,
        mode: prepared.mode.clone(),
        aliases: prepared.aliases.clone(),
        labeled_text: prepared.labeled_text,
        malformed_replies: AtomicU64::new(0),
    };
    let ctx = RunContext {
        prepared,
        matcher,
        run_dir: run_dir.clone(),
        counters: StageCounters::default(),
        manifest: Mutex::new(manifest),
    };

    // Phase A (through matching), document-parallel.
    let outputs: Mutex<BTreeMap<String, StageAOutput>> = Mutex::new(BTreeMap::new());
    let next_doc = AtomicUsize::new(0);
    let workers = config.run.workers.clamp(1, corpus.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next_doc.fetch_add(1, Ordering::Relaxed);
                let Some(document) = corpus.get(i) else {
                    return;
                };
                match stage_a(&ctx, document) {
                    Ok(output) => {
                        outputs.lock().unwrap().insert(document.id.clone(), output);
                    }
                    Err(message) => {
                        let _ = ctx.update_manifest(|m| {
                            m.set_status(&document.id, DocStatus::Failed, Some(message.clone()));
                        });
                    }
                }
            });
        }
    });
    let outputs = outputs.into_inner().unwrap();

    // Ontology + KG. With corpus scope one shared ontology grounds every
    // document; with document scope each document grounds on its own.
    match prepared.scope {
        OntologyScope::Corpus => {
            let mut all_decisions: Vec<MatchDecision> = Vec::new();
            let mut all_concepts: Vec<String> = Vec::new();
            for document in corpus {
                if let Some(output) = outputs.get(&document.id) {
                    all_decisions.extend(output.decisions.iter().cloned());
                    for concept in &output.concepts {
                        if !all_concepts.contains(concept) {
                            all_concepts.push(concept.clone());
                        }
                    }
                }
            }
            let ontology = match ontology_stage(
                &ctx,
                &run_dir.join("ontology.ttl"),
                &all_decisions,
                &all_concepts,
            ) {
                Ok(ontology) => ontology,
                Err(message) => {
                    for document in corpus {
                        ctx.update_manifest(|m| {
                            m.set_status(&document.id, DocStatus::Failed, Some(message.clone()));
                        })?;
                    }
                    return finalize(ctx);
                }
            };
            let next_doc = AtomicUsize::new(0);
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next_doc.fetch_add(1, Ordering::Relaxed);
                        let Some(document) = corpus.get(i) else {
                            return;
                        };
                        let Some(output) = outputs.get(&document.id) else {
                            continue; // already failed in phase A
                        };
                        finish_document(&ctx, document, output, &ontology);
                    });
                }
            });
        }
        OntologyScope::Document => {
            let next_doc = AtomicUsize::new(0);
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next_doc.fetch_add(1, Ordering::Relaxed);
                        let Some(document) = corpus.get(i) else {
                            return;
                        };
                        let Some(output) = outputs.get(&document.id) else {
                            continue;
                        };
                        let path = doc_dir(&ctx.run_dir, &document.id).join("ontology.ttl");
                        match ontology_stage(&ctx, &path, &output.decisions, &output.concepts) {
                            Ok(ontology) => {
                                let _ =
                                    ctx.update_manifest(|m| m.mark_stage(&document.id, "ontology"));
                                finish_document(&ctx, document, output, &ontology);
                            }
                            Err(message) => {
                                let _ = ctx.update_manifest(|m| {
                                    m.set_status(&document.id, DocStatus::Failed, Some(message));
                                });
                            }
                        }
                    });
                }
            });
        }
    }
    finalize(ctx)
}

fn finish_document(
    ctx: &RunContext<'_>,
    document: &Document,
    output: &StageAOutput,
    ontology: &OntologyDocument,
) {
    match kg_stage(ctx, document, &output.qa, ontology) {
        Ok(()) => {
            let _ = ctx.update_manifest(|m| {
                m.mark_stage(&document.id, "kg");
                m.set_status(&document.id, DocStatus::Done, None);
            });
        }
        Err(message) => {
            let _ = ctx.update_manifest(|m| {
                m.set_status(&document.id, DocStatus::Failed, Some(message));
            });
        }
    }
}

fn finalize(ctx: RunContext<'_>) -> Result<RunManifest, RunError> {
    let gateway = &ctx.prepared.gateway;
    let mut manifest = ctx.manifest.into_inner().unwrap();
    manifest.counters.llm_calls = gateway.counters.backend_calls();
    manifest.counters.cache_hits = gateway.counters.cache_hits();
    manifest.counters.cache_corrupt = gateway.counters.cache_corrupt();
    manifest.counters.truncated_responses = gateway.counters.truncated();
    manifest.counters.skipped_statements = ctx.counters.skipped_statements.load(Ordering::Relaxed);
    manifest.counters.dropped_off_ontology =
        ctx.counters.dropped_off_ontology.load(Ordering::Relaxed);
    manifest.counters.relations_extracted =
        ctx.counters.relations_extracted.load(Ordering::Relaxed);
    manifest.counters.validator_malformed = ctx.matcher.malformed_replies.load(Ordering::Relaxed);
    manifest.counters.questions_dropped = ctx.counters.questions_dropped.load(Ordering::Relaxed);
    manifest.counters.authored_dropped = ctx.counters.authored_dropped.load(Ordering::Relaxed);
    manifest.counters.renamed_collisions = ctx.counters.renamed_collisions.load(Ordering::Relaxed);
    manifest.counters.empty_kgs = ctx.counters.empty_kgs.load(Ordering::Relaxed);
    manifest.finish();
    manifest.write(&ctx.run_dir)?;
    Ok(manifest)
}

/// Score a finished run against a gold file: parse each document's kg.ttl,
/// align, micro-average, and persist `eval_report.json`.
pub fn run_eval(
    run_dir: &Path,
    gold_path: &Path,
    criterion: Criterion,
    jaccard: f64,
) -> Result<EvalReport, RunError> {
    let gold = load_gold(gold_path)?;
    let mut missing = Vec::new();
    let mut results: Vec<(String, Vec<Triple>)> = Vec::new();
    for doc_id in gold.keys() {
        let kg_path = doc_dir(run_dir, doc_id).join("kg.ttl");
        let Ok(text) = std::fs::read_to_string(&kg_path) else {
            missing.push(doc_id.clone());
            continue;
        };
        match parse_turtle(&text) {
            Ok(graph) => results.push((doc_id.clone(), graph.iter().cloned().collect())),
            Err(_) => missing.push(doc_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(RunError::MissingKg(missing));
    }
    let report = evaluate_corpus(&results, &gold, criterion, jaccard)?;
    write_atomic(
        &run_dir.join("eval_report.json"),
        &serde_json::to_vec_pretty(&report).expect("report serializes"),
    )?;
    Ok(report)
}
