//! Stage sequencing, persistence, and resumability. Every stage writes its
//! artifact under `<run_dir>/<doc_id>/` before the next stage starts, and a
//! rerun skips any stage whose artifact is present and well-formed.

pub mod config;
pub mod corpus;
pub mod manifest;
mod run;

pub use config::{ConfigError, OntologyScope, RunConfig};
pub use corpus::{load_corpus, load_gold};
pub use manifest::{Counters, DocRecord, DocStatus, RunManifest};
pub use run::{run_eval, run_pipeline, PreparedRun};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("pipeline I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Catalog(#[from] crate::catalog::CatalogError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Match(#[from] crate::matcher::MatchError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("missing kg.ttl for documents: {}", .0.join(", "))]
    MissingKg(Vec<String>),
}
