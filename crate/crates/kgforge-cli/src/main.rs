//! `kgforge`: build ontology-grounded knowledge graphs from documents and
//! score them against gold triples.

mod convert;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use kgforge_core::catalog::{fetch_catalog, filter_catalog, load_snapshot, write_snapshot};
use kgforge_core::eval::Criterion;
use kgforge_core::pipeline::{
    load_corpus, run_eval, run_pipeline, ConfigError, RunConfig, RunError,
};

#[derive(Parser)]
#[command(
    name = "kgforge",
    version,
    about = "Ontology-grounded KG construction pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage the Wikidata property catalog snapshot.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Convert a benchmark dataset into the corpus format.
    Convert {
        #[arg(value_enum)]
        shape: convert::DatasetShape,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline over a corpus.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override corpus.path from the config.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Override run.mode from the config.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Target property set file (constrained mode).
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Score a finished run against a gold file. Criterion and threshold
    /// default from the config file when one is given.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
        #[arg(long)]
        jaccard: Option<f64>,
    },
    /// Debug a single relation against the catalog: retrieval + validation.
    Match {
        #[arg(long)]
        config: PathBuf,
        /// "<name>: <usage comment>"
        #[arg(long)]
        relation: String,
    },
    /// Summarize the artifacts of one document in a run directory.
    Inspect { path: PathBuf },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Fetch all properties from a SPARQL endpoint into a snapshot file.
    /// Defaults come from the config file's catalog section when given.
    Fetch {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        attempts: Option<u32>,
        #[arg(long)]
        backoff_ms: Option<u64>,
    },
    /// Apply the datatype whitelist to a snapshot.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Constrained,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CriterionArg {
    Exact,
    Partial,
}

impl From<CriterionArg> for Criterion {
    fn from(value: CriterionArg) -> Criterion {
        match value {
            CriterionArg::Exact => Criterion::Exact,
            CriterionArg::Partial => Criterion::Partial,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            let config_error = error.downcast_ref::<ConfigError>().is_some()
                || matches!(error.downcast_ref::<RunError>(), Some(RunError::Config(_)));
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Catalog { action } => catalog_command(action),
        Command::Convert { shape, input, out } => {
            let count = convert::convert(shape, &input, &out)?;
            println!("wrote {count} corpus records to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            corpus,
            mode,
            target,
        } => run_command(config, corpus, mode, target),
        Command::Eval {
            run,
            gold,
            config,
            criterion,
            jaccard,
        } => {
            let defaults = match config {
                Some(path) => {
                    let loaded = RunConfig::load(&path)?;
                    (loaded.eval_criterion()?, loaded.eval.jaccard)
                }
                None => (Criterion::Partial, kgforge_core::eval::DEFAULT_JACCARD),
            };
            let criterion = criterion.map(Criterion::from).unwrap_or(defaults.0);
            let jaccard = jaccard.unwrap_or(defaults.1);
            let report = run_eval(&run, &gold, criterion, jaccard)?;
            print!("{}", report.render_table());
            println!(
                "report written to {}",
                run.join("eval_report.json").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Match { config, relation } => match_command(config, relation),
        Command::Inspect { path } => inspect_command(path),
    }
}

fn catalog_command(action: CatalogAction) -> Result<ExitCode> {
    match action {
        CatalogAction::Fetch {
            config,
            endpoint,
            out,
            attempts,
            backoff_ms,
        } => {
            let defaults = match config {
                Some(path) => RunConfig::load(&path)?.catalog,
                None => RunConfig::default().catalog,
            };
            let endpoint = endpoint.unwrap_or(defaults.endpoint);
            let out = out.unwrap_or(defaults.snapshot);
            let attempts = attempts.unwrap_or(defaults.fetch_attempts);
            let backoff_ms = backoff_ms.unwrap_or(defaults.fetch_backoff_ms);
            let stats = fetch_catalog(&endpoint, &out, attempts, backoff_ms)?;
            println!(
                "wrote {} records to {} ({} bindings skipped for missing description)",
                stats.records,
                out.display(),
                stats.skipped_missing_description
            );
        }
        CatalogAction::Filter { input, out } => {
            let unfiltered = load_snapshot(&input)?;
            let filtered = filter_catalog(&unfiltered);
            for warning in &filtered.warnings {
                eprintln!("warning: {warning}");
            }
            write_snapshot(filtered.entries(), &out)?;
            println!(
                "kept {} of {} entries -> {}",
                filtered.len(),
                unfiltered.len(),
                out.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_command(
    config_path: PathBuf,
    corpus_override: Option<PathBuf>,
    mode: Option<ModeArg>,
    target: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut config = RunConfig::load(&config_path)?;
    if let Some(path) = corpus_override {
        config.corpus.path = path;
    }
    if let Some(mode) = mode {
        config.run.mode = match mode {
            ModeArg::Constrained => "constrained".into(),
            ModeArg::Unconstrained => "unconstrained".into(),
        };
    }
    if let Some(target) = target {
        config.matching.target = target.to_string_lossy().into_owned();
    }
    let corpus = load_corpus(&config.corpus.path)?;
    if corpus.is_empty() {
        bail!("corpus {} has no documents", config.corpus.path.display());
    }
    let manifest = run_pipeline(&config, &corpus)?;
    let done = manifest.done_count();
    let failed = manifest.failed_count();
    println!(
        "run complete: {done} done, {failed} failed, {} LLM calls ({} cache hits)",
        manifest.counters.llm_calls, manifest.counters.cache_hits
    );
    for (doc_id, record) in &manifest.documents {
        if let Some(error) = &record.error {
            eprintln!("  {doc_id}: {error}");
        }
    }
    if failed > 0 {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn match_command(config_path: PathBuf, relation: String) -> Result<ExitCode> {
    let Some((name, comment)) = relation.split_once(':') else {
        return Err(ConfigError::Invalid(
            "--relation must look like \"<name>: <usage comment>\"".into(),
        )
        .into());
    };
    let config = RunConfig::load(&config_path)?;
    let prepared = kgforge_core::pipeline::PreparedRun::from_config(&config)?;
    let matcher = kgforge_core::matcher::Matcher::new(
        &prepared.catalog,
        &prepared.index,
        prepared.embedder.as_ref(),
        &prepared.gateway,
        prepared.mode.clone(),
    );
    let extracted = kgforge_core::relations::ExtractedRelation {
        name: name.trim().to_lowercase(),
        usage_comment: comment.trim().to_string(),
        source_doc: "cli".into(),
    };
    let decision = matcher.match_relation(&extracted)?;
    println!("{}", serde_json::to_string_pretty(&decision)?);
    Ok(ExitCode::SUCCESS)
}

fn inspect_command(path: PathBuf) -> Result<ExitCode> {
    if !path.is_dir() {
        bail!("{} is not a document artifact directory", path.display());
    }
    println!("{}", path.display());
    let read = |name: &str| std::fs::read_to_string(path.join(name));
    if let Ok(text) = read("cqs.json") {
        let outcome: kgforge_core::cq::CqOutcome =
            serde_json::from_str(&text).context("cqs.json")?;
        println!(
            "  cqs.json: {} questions ({} dropped)",
            outcome.questions.len(),
            outcome.dropped_malformed
        );
        for question in &outcome.questions {
            println!("    CQ{}. {}", question.index, question.text);
        }
    }
    if let Ok(text) = read("qa.json") {
        let pairs: Vec<kgforge_core::cq::QAPair> =
            serde_json::from_str(&text).context("qa.json")?;
        let answered = pairs.iter().filter(|p| p.answered).count();
        println!("  qa.json: {answered}/{} answered", pairs.len());
    }
    if let Ok(text) = read("relations.json") {
        let outcome: kgforge_core::relations::RelationOutcome =
            serde_json::from_str(&text).context("relations.json")?;
        println!(
            "  relations.json: {} relations, {} concepts",
            outcome.relations.len(),
            outcome.concepts.len()
        );
        for relation in &outcome.relations {
            println!("    ({}, {})", relation.name, relation.usage_comment);
        }
    }
    if let Ok(text) = read("matches.json") {
        let decisions: Vec<kgforge_core::matcher::MatchDecision> =
            serde_json::from_str(&text).context("matches.json")?;
        println!("  matches.json: {} decisions", decisions.len());
        for decision in &decisions {
            let candidate = decision
                .candidate
                .as_ref()
                .map(|c| format!("{} ({})", c.pascal_label, c.pid))
                .unwrap_or_else(|| "-".into());
            println!(
                "    {} -> {candidate} [{:?}, sim {:.3}]",
                decision.relation.name, decision.outcome, decision.similarity
            );
        }
    }
    if let Ok(text) = read("ontology.ttl") {
        match kgforge_core::ontology::OntologyDocument::from_turtle(&text) {
            Ok(ontology) => println!("  ontology.ttl: {} entries", ontology.entries.len()),
            Err(e) => println!("  ontology.ttl: unreadable ({e})"),
        }
    }
    if let Ok(text) = read("kg.ttl") {
        match kgforge_core::rdf::parse_turtle(&text) {
            Ok(graph) => println!("  kg.ttl: {} triples", graph.len()),
            Err(e) => println!("  kg.ttl: unreadable ({e})"),
        }
    }
    if let Ok(text) = read("kg_meta.json") {
        let meta: serde_json::Value = serde_json::from_str(&text).context("kg_meta.json")?;
        println!(
            "  kg_meta.json: skipped_statements={} dropped_off_ontology={}",
            meta.get("skipped_statements")
                .and_then(|v| v.as_u64())
                .unwrap_or(0),
            meta.get("dropped_off_ontology")
                .and_then(|v| v.as_u64())
                .unwrap_or(0),
        );
    }
    Ok(ExitCode::SUCCESS)
}
