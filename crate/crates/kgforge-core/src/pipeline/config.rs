//! Run configuration: one TOML file with dotted keys, overridable by
//! `KGFORGE_*` environment variables (section and key uppercased, joined
//! with underscores — `llm.model` becomes `KGFORGE_LLM_MODEL`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::eval::Criterion;
use crate::matcher::MatchMode;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub run: RunSection,
    pub corpus: CorpusSection,
    pub catalog: CatalogSection,
    pub llm: LlmSection,
    pub embed: EmbedSection,
    pub cq: CqSection,
    #[serde(rename = "match")]
    pub matching: MatchSection,
    pub ontology: OntologySection,
    pub kg: KgSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub dir: PathBuf,
    pub workers: usize,
    /// `constrained` or `unconstrained`.
    pub mode: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            dir: PathBuf::from("run"),
            workers: 2,
            mode: "unconstrained".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CorpusSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogSection {
    pub snapshot: PathBuf,
    pub endpoint: String,
    pub fetch_attempts: u32,
    pub fetch_backoff_ms: u64,
}

impl Default for CatalogSection {
    fn default() -> Self {
        CatalogSection {
            snapshot: PathBuf::from("wikidata_properties.jsonl"),
            endpoint: "https://query.wikidata.org/sparql".into(),
            fetch_attempts: 3,
            fetch_backoff_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSection {
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub model: String,
    /// Non-empty selects the deterministic mock backend.
    pub mock_dir: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub concurrency: usize,
    pub retries: u32,
    pub retry_backoff_ms: u64,
    /// Empty means `<run.dir>/cache`.
    pub cache_dir: String,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            endpoint: String::new(),
            api_key_env: "KGFORGE_API_KEY".into(),
            model: "mock-model".into(),
            mock_dir: String::new(),
            temperature: 0.0,
            max_output_tokens: 2048,
            concurrency: 4,
            retries: 3,
            retry_backoff_ms: 500,
            cache_dir: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSection {
    /// `fallback` or `live`.
    pub mode: String,
    pub endpoint: String,
    pub model: String,
    /// `labeled` or `description_only`.
    pub text: String,
}

impl Default for EmbedSection {
    fn default() -> Self {
        EmbedSection {
            mode: "fallback".into(),
            endpoint: String::new(),
            model: "bge-small-en".into(),
            text: "labeled".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CqSection {
    pub max_per_doc: usize,
    pub refusal_pattern: String,
}

impl Default for CqSection {
    fn default() -> Self {
        CqSection {
            max_per_doc: crate::cq::DEFAULT_CQ_CAP,
            refusal_pattern: crate::cq::DEFAULT_REFUSAL_PATTERN.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MatchSection {
    /// JSON file mapping relation names to pascal labels.
    pub aliases: String,
    /// JSON file listing the target property set (pascal labels or plain
    /// labels); only meaningful in constrained mode.
    pub target: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OntologySection {
    /// `document` or `corpus`.
    pub scope: String,
}

impl Default for OntologySection {
    fn default() -> Self {
        OntologySection {
            scope: "document".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct KgSection {
    pub per_pair: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// `exact` or `partial`.
    pub criterion: String,
    pub jaccard: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            criterion: "partial".into(),
            jaccard: crate::eval::DEFAULT_JACCARD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OntologyScope {
    Document,
    Corpus,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.apply_env_overrides(&collect_env());
        Ok(config)
    }

    /// Apply `KGFORGE_*` overrides from the given environment map.
    pub fn apply_env_overrides(&mut self, env: &BTreeMap<String, String>) {
        let get = |key: &str| env.get(&env_key(key)).cloned();
        if let Some(v) = get("run.dir") {
            self.run.dir = PathBuf::from(v);
        }
        if let Some(v) = get("run.workers").and_then(|v| v.parse().ok()) {
            self.run.workers = v;
        }
        if let Some(v) = get("run.mode") {
            self.run.mode = v;
        }
        if let Some(v) = get("corpus.path") {
            self.corpus.path = PathBuf::from(v);
        }
        if let Some(v) = get("catalog.snapshot") {
            self.catalog.snapshot = PathBuf::from(v);
        }
        if let Some(v) = get("catalog.endpoint") {
            self.catalog.endpoint = v;
        }
        if let Some(v) = get("llm.endpoint") {
            self.llm.endpoint = v;
        }
        if let Some(v) = get("llm.api_key_env") {
            self.llm.api_key_env = v;
        }
        if let Some(v) = get("llm.model") {
            self.llm.model = v;
        }
        if let Some(v) = get("llm.mock_dir") {
            self.llm.mock_dir = v;
        }
        if let Some(v) = get("llm.temperature").and_then(|v| v.parse().ok()) {
            self.llm.temperature = v;
        }
        if let Some(v) = get("llm.max_output_tokens").and_then(|v| v.parse().ok()) {
            self.llm.max_output_tokens = v;
        }
        if let Some(v) = get("llm.concurrency").and_then(|v| v.parse().ok()) {
            self.llm.concurrency = v;
        }
        if let Some(v) = get("llm.retries").and_then(|v| v.parse().ok()) {
            self.llm.retries = v;
        }
        if let Some(v) = get("llm.cache_dir") {
            self.llm.cache_dir = v;
        }
        if let Some(v) = get("embed.mode") {
            self.embed.mode = v;
        }
        if let Some(v) = get("embed.endpoint") {
            self.embed.endpoint = v;
        }
        if let Some(v) = get("embed.model") {
            self.embed.model = v;
        }
        if let Some(v) = get("embed.text") {
            self.embed.text = v;
        }
        if let Some(v) = get("cq.max_per_doc").and_then(|v| v.parse().ok()) {
            self.cq.max_per_doc = v;
        }
        if let Some(v) = get("cq.refusal_pattern") {
            self.cq.refusal_pattern = v;
        }
        if let Some(v) = get("match.aliases") {
            self.matching.aliases = v;
        }
        if let Some(v) = get("match.target") {
            self.matching.target = v;
        }
        if let Some(v) = get("ontology.scope") {
            self.ontology.scope = v;
        }
        if let Some(v) = get("kg.per_pair").and_then(|v| v.parse().ok()) {
            self.kg.per_pair = v;
        }
        if let Some(v) = get("eval.criterion") {
            self.eval.criterion = v;
        }
        if let Some(v) = get("eval.jaccard").and_then(|v| v.parse().ok()) {
            self.eval.jaccard = v;
        }
    }

    /// Cross-field sanity checks beyond the per-accessor parses.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.llm.temperature < 0.0 {
            return Err(ConfigError::Invalid(
                "llm.temperature must be non-negative".into(),
            ));
        }
        if self.llm.max_output_tokens == 0 {
            return Err(ConfigError::Invalid(
                "llm.max_output_tokens must be positive".into(),
            ));
        }
        if self.cq.max_per_doc == 0 {
            return Err(ConfigError::Invalid(
                "cq.max_per_doc must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eval.jaccard) {
            return Err(ConfigError::Invalid(
                "eval.jaccard must be within [0, 1]".into(),
            ));
        }
        if !self.llm.mock_dir.is_empty() && !Path::new(&self.llm.mock_dir).is_dir() {
            return Err(ConfigError::Invalid(format!(
                "llm.mock_dir {:?} is not a directory",
                self.llm.mock_dir
            )));
        }
        if self.embed.mode == "live" && self.embed.endpoint.is_empty() {
            return Err(ConfigError::Invalid(
                "embed.mode = \"live\" requires embed.endpoint".into(),
            ));
        }
        if !self.matching.target.is_empty() && self.run.mode != "constrained" {
            return Err(ConfigError::Invalid(
                "match.target is only meaningful with run.mode = \"constrained\"".into(),
            ));
        }
        Ok(())
    }

    pub fn ontology_scope(&self) -> Result<OntologyScope, ConfigError> {
        match self.ontology.scope.as_str() {
            "document" => Ok(OntologyScope::Document),
            "corpus" => Ok(OntologyScope::Corpus),
            other => Err(ConfigError::Invalid(format!(
                "ontology.scope must be document or corpus, got {other:?}"
            ))),
        }
    }

    pub fn eval_criterion(&self) -> Result<Criterion, ConfigError> {
        parse_criterion(&self.eval.criterion)
    }

    pub fn labeled_embedding_text(&self) -> Result<bool, ConfigError> {
        match self.embed.text.as_str() {
            "labeled" => Ok(true),
            "description_only" => Ok(false),
            other => Err(ConfigError::Invalid(format!(
                "embed.text must be labeled or description_only, got {other:?}"
            ))),
        }
    }

    /// Resolve the match mode, loading the target set when configured.
    /// Target entries may be pascal labels or plain labels; each must
    /// resolve against the filtered catalog.
    pub fn match_mode(&self, catalog: &Catalog) -> Result<MatchMode, ConfigError> {
        match self.run.mode.as_str() {
            "unconstrained" => Ok(MatchMode::Unconstrained),
            "constrained" => {
                if self.matching.target.is_empty() {
                    return Ok(MatchMode::Constrained(None));
                }
                let text = std::fs::read_to_string(&self.matching.target)?;
                let raw: Vec<String> = serde_json::from_str(&text)
                    .map_err(|e| ConfigError::Parse(format!("target file: {e}")))?;
                let mut target = BTreeSet::new();
                for name in raw {
                    let pascal = if catalog.get_by_pascal(&name).is_some() {
                        name.clone()
                    } else {
                        let derived = crate::catalog::pascal_case(&name).map_err(|_| {
                            ConfigError::Invalid(format!("unresolvable target entry: {name:?}"))
                        })?;
                        if catalog.get_by_pascal(&derived).is_none() {
                            return Err(ConfigError::Invalid(format!(
                                "target entry {name:?} not in the filtered catalog"
                            )));
                        }
                        derived
                    };
                    target.insert(pascal);
                }
                Ok(MatchMode::Constrained(Some(target)))
            }
            other => Err(ConfigError::Invalid(format!(
                "run.mode must be constrained or unconstrained, got {other:?}"
            ))),
        }
    }

    /// Load the alias map and check every target resolves in the catalog.
    pub fn alias_map(&self, catalog: &Catalog) -> Result<BTreeMap<String, String>, ConfigError> {
        if self.matching.aliases.is_empty() {
            return Ok(BTreeMap::new());
        }
        let text = std::fs::read_to_string(&self.matching.aliases)?;
        let raw: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| ConfigError::Parse(format!("alias file: {e}")))?;
        let mut aliases = BTreeMap::new();
        for (name, target) in raw {
            if catalog.get_by_pascal(&target).is_none() {
                return Err(ConfigError::Invalid(format!(
                    "alias target {target:?} for {name:?} not in the filtered catalog"
                )));
            }
            aliases.insert(crate::relations::normalize_relation_name(&name), target);
        }
        Ok(aliases)
    }

    pub fn cache_dir(&self) -> PathBuf {
        if self.llm.cache_dir.is_empty() {
            self.run.dir.join("cache")
        } else {
            PathBuf::from(&self.llm.cache_dir)
        }
    }
}

pub fn parse_criterion(raw: &str) -> Result<Criterion, ConfigError> {
    match raw {
        "exact" => Ok(Criterion::Exact),
        "partial" => Ok(Criterion::Partial),
        other => Err(ConfigError::Invalid(format!(
            "criterion must be exact or partial, got {other:?}"
        ))),
    }
}

fn env_key(dotted: &str) -> String {
    format!("KGFORGE_{}", dotted.to_uppercase().replace('.', "_"))
}

fn collect_env() -> BTreeMap<String, String> {
    std::env::vars()
        .filter(|(k, _)| k.starts_with("KGFORGE_"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let config: RunConfig = toml::from_str("").unwrap();
        assert_eq!(config.cq.max_per_doc, 3);
        assert_eq!(config.llm.concurrency, 4);
        assert_eq!(config.eval.jaccard, 0.5);
        assert_eq!(config.run.mode, "unconstrained");
        assert_eq!(config.ontology.scope, "document");
        assert!(!config.kg.per_pair);
    }

    #[test]
    fn dotted_keys_parse_from_toml() {
        let config: RunConfig = toml::from_str(
            "[llm]\nmodel = \"gpt-4o\"\n[cq]\nmax_per_doc = 9\n[run]\nmode = \"constrained\"\n",
        )
        .unwrap();
        assert_eq!(config.llm.model, "gpt-4o");
        assert_eq!(config.cq.max_per_doc, 9);
        assert_eq!(config.run.mode, "constrained");
    }

    #[test]
    fn env_overrides_file_values() {
        let mut config: RunConfig = toml::from_str("[llm]\nmodel = \"from-file\"\n").unwrap();
        let env: BTreeMap<String, String> = [
            ("KGFORGE_LLM_MODEL".to_string(), "from-env".to_string()),
            ("KGFORGE_CQ_MAX_PER_DOC".to_string(), "7".to_string()),
            ("KGFORGE_EVAL_JACCARD".to_string(), "0.6".to_string()),
        ]
        .into();
        config.apply_env_overrides(&env);
        assert_eq!(config.llm.model, "from-env");
        assert_eq!(config.cq.max_per_doc, 7);
        assert_eq!(config.eval.jaccard, 0.6);
    }

    #[test]
    fn invalid_enumerations_are_config_errors() {
        let mut config = RunConfig::default();
        config.ontology.scope = "global".into();
        assert!(config.ontology_scope().is_err());
        config.eval.criterion = "strict".into();
        assert!(config.eval_criterion().is_err());
        config.embed.text = "other".into();
        assert!(config.labeled_embedding_text().is_err());
    }

    #[test]
    fn validate_rejects_out_of_range_values() {
        let good = RunConfig::default();
        assert!(good.validate().is_ok());
        let mut config = RunConfig::default();
        config.llm.temperature = -0.5;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.llm.max_output_tokens = 0;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.cq.max_per_doc = 0;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.eval.jaccard = 1.5;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.llm.mock_dir = "/definitely/not/a/real/dir".into();
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.embed.mode = "live".into();
        assert!(config.validate().is_err(), "live mode without endpoint");
        let mut config = RunConfig::default();
        config.matching.target = "somewhere.json".into();
        assert!(config.validate().is_err(), "target without constrained mode");
    }

    #[test]
    fn target_set_resolves_labels_to_pascal() {
        let catalog = crate::catalog::load_snapshot_str(
            &serde_json::json!({"pid": "P19", "label": "place of birth", "description": "d", "datatype": "item"}).to_string(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let target_path = dir.path().join("target.json");
        std::fs::write(&target_path, "[\"place of birth\"]").unwrap();
        let mut config = RunConfig::default();
        config.run.mode = "constrained".into();
        config.matching.target = target_path.to_string_lossy().into_owned();
        let mode = config.match_mode(&catalog).unwrap();
        match mode {
            MatchMode::Constrained(Some(target)) => {
                assert!(target.contains("PlaceOfBirth"));
            }
            other => panic!("unexpected mode: {other:?}"),
        }

        std::fs::write(&target_path, "[\"definitely not a property\"]").unwrap();
        assert!(config.match_mode(&catalog).is_err());
    }
}
