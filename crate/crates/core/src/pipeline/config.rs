use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use super::PipelineError;
use crate::corpus::IndexVariant;
use crate::eval::EvalMetric;
use crate::fusion::{FusionError, RrfParams, SoboroffParams};
use crate::index::Tokenizer;
use crate::retrieval::{Bm25Params, RetrievalError, Rm3Params};

/// The named run recipes. Names double as run tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Recipe {
    /// BM25 on title+abstract, then the 2020 recency boost.
    KuRun1,
    /// Weighted expanded query on title+abstract.
    KuRun2,
    /// BM25, vector-similarity rerank, then the recency boost.
    KuRun3,
    FusionOfRuns,
    FusionOfFusions,
    AllFiltering,
    SoboroffFiltering,
}

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Self::KuRun1,
        Self::KuRun2,
        Self::KuRun3,
        Self::FusionOfRuns,
        Self::FusionOfFusions,
        Self::AllFiltering,
        Self::SoboroffFiltering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::KuRun1 => "ku_run1",
            Self::KuRun2 => "ku_run2",
            Self::KuRun3 => "ku_run3",
            Self::FusionOfRuns => "fusionOfRuns",
            Self::FusionOfFusions => "fusionOfFusions",
            Self::AllFiltering => "allFiltering",
            Self::SoboroffFiltering => "soboroffFiltering",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown recipe `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub metadata: PathBuf,
    #[serde(default)]
    pub fulltext: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub stem: bool,
    /// Drop stopwords at all.
    pub use_stopwords: bool,
    /// One word per line; the bundled English list when unset.
    pub stopwords: Option<PathBuf>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stem: true,
            use_stopwords: true,
            stopwords: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    /// Indexes feeding the fusion runs: one RM3 run each, plus a collapsed
    /// copy for the paragraph index.
    pub variants: Vec<IndexVariant>,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            variants: IndexVariant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankConfig {
    pub top_n: usize,
    pub boost_year: u16,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            top_n: 50,
            boost_year: 2020,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resources {
    pub topics: PathBuf,
    #[serde(default)]
    pub qrels: Option<PathBuf>,
    #[serde(default)]
    pub ontology: Option<PathBuf>,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    /// Document and topic vectors, JSONL.
    #[serde(default)]
    pub vectors: Option<PathBuf>,
    /// External run files, or directories whose files are all runs.
    #[serde(default)]
    pub external_runs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub cuts: Vec<usize>,
    /// Metric used to rank candidate runs in Soboroff selection.
    pub selection_metric: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cuts: vec![5, 10, 15, 20, 30],
            selection_metric: "map".into(),
        }
    }
}

/// Soboroff parameters without the seed, which is global.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoboroffConfig {
    pub pool_depth: usize,
    pub sample_fraction: f64,
    pub trials: usize,
    pub select_middle: usize,
}

impl Default for SoboroffConfig {
    fn default() -> Self {
        let d = SoboroffParams::default();
        Self {
            pool_depth: d.pool_depth,
            sample_fraction: d.sample_fraction,
            trials: d.trials,
            select_middle: d.select_middle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    output_dir: PathBuf,
    recipes: Vec<String>,
    corpus: CorpusPaths,
    resources: Resources,
    #[serde(default)]
    tokenizer: TokenizerConfig,
    #[serde(default)]
    index: IndexConfig,
    #[serde(default)]
    bm25: Bm25Params,
    #[serde(default)]
    rm3: Rm3Params,
    #[serde(default)]
    rrf: RrfParams,
    #[serde(default)]
    soboroff: SoboroffConfig,
    #[serde(default)]
    rerank: RerankConfig,
    #[serde(default)]
    eval: EvalConfig,
}

/// A validated pipeline configuration. Relative paths in the file are
/// resolved against the file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub recipes: Vec<Recipe>,
    pub corpus: CorpusPaths,
    pub resources: Resources,
    pub tokenizer: TokenizerConfig,
    pub index: IndexConfig,
    pub bm25: Bm25Params,
    pub rm3: Rm3Params,
    pub rrf: RrfParams,
    pub soboroff: SoboroffParams,
    pub selection_metric: EvalMetric,
    pub rerank: RerankConfig,
    pub cuts: Vec<usize>,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> PipelineError {
    PipelineError::ConfigInvalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Parameter-block errors name the key when the message starts with one,
/// as in `k1 must be >= 0`.
fn param_invalid(section: &str, message: &str, reason: String) -> PipelineError {
    let key = message
        .split_whitespace()
        .next()
        .filter(|w| w.bytes().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == b'_'));
    match key {
        Some(k) => invalid(format!("{section}.{k}"), reason),
        None => invalid(section, reason),
    }
}

fn retrieval_invalid(section: &str, e: RetrievalError) -> PipelineError {
    match &e {
        RetrievalError::InvalidParams(m) => param_invalid(section, m, e.to_string()),
        _ => invalid(section, e.to_string()),
    }
}

fn fusion_invalid(section: &str, e: FusionError) -> PipelineError {
    match &e {
        FusionError::InvalidParams(m) => param_invalid(section, m, e.to_string()),
        FusionError::InvalidFraction(_) => invalid(format!("{section}.sample_fraction"), e.to_string()),
        _ => invalid(section, e.to_string()),
    }
}

fn require_file(field: &str, path: &Path) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(invalid(field, format!("{} does not exist", path.display())))
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| invalid("<file>", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Parses and validates TOML text, resolving relative paths against
    /// `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let (table, key) = e.span().map(|s| locate(text, s.start)).unwrap_or_default();
            // a missing key is reported against its table; name the key instead
            let key = match msg.strip_prefix("missing field `").and_then(|m| m.split_once('`')) {
                Some((missing, _)) => missing.to_string(),
                None => key,
            };
            let field = match (table.is_empty(), key.is_empty()) {
                (true, true) => "<root>".into(),
                (true, false) => key,
                (false, true) => table,
                (false, false) => format!("{table}.{key}"),
            };
            invalid(field, msg)
        })?;
        let abs = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let mut recipes = Vec::new();
        let mut seen = HashSet::new();
        for (i, name) in raw.recipes.iter().enumerate() {
            let field = format!("recipes[{i}]");
            let r: Recipe = name.parse().map_err(|e: String| invalid(&field, e))?;
            if !seen.insert(r) {
                return Err(invalid(field, format!("recipe `{name}` listed twice")));
            }
            recipes.push(r);
        }
        if recipes.is_empty() {
            return Err(invalid("recipes", "no recipes requested"));
        }

        let corpus = CorpusPaths {
            metadata: abs(raw.corpus.metadata),
            fulltext: raw.corpus.fulltext.map(abs),
        };
        require_file("corpus.metadata", &corpus.metadata)?;
        if let Some(p) = &corpus.fulltext {
            require_file("corpus.fulltext", p)?;
        }

        let resources = Resources {
            topics: abs(raw.resources.topics),
            qrels: raw.resources.qrels.map(abs),
            ontology: raw.resources.ontology.map(abs),
            lexicon: raw.resources.lexicon.map(abs),
            vectors: raw.resources.vectors.map(abs),
            external_runs: raw.resources.external_runs.into_iter().map(abs).collect(),
        };
        require_file("resources.topics", &resources.topics)?;
        for (field, p) in [
            ("resources.qrels", &resources.qrels),
            ("resources.ontology", &resources.ontology),
            ("resources.lexicon", &resources.lexicon),
            ("resources.vectors", &resources.vectors),
        ] {
            if let Some(p) = p {
                require_file(field, p)?;
            }
        }
        for (i, p) in resources.external_runs.iter().enumerate() {
            require_file(&format!("resources.external_runs[{i}]"), p)?;
        }
        if recipes.contains(&Recipe::KuRun3) && resources.vectors.is_none() {
            return Err(invalid("resources.vectors", "required by recipe ku_run3"));
        }
        for r in [Recipe::AllFiltering, Recipe::SoboroffFiltering] {
            if recipes.contains(&r) && resources.external_runs.is_empty() {
                return Err(invalid("resources.external_runs", format!("required by recipe {r}")));
            }
        }

        let mut tokenizer = raw.tokenizer;
        tokenizer.stopwords = tokenizer.stopwords.map(abs);
        if let Some(p) = &tokenizer.stopwords {
            require_file("tokenizer.stopwords", p)?;
        }
        let index = raw.index;
        if index.variants.is_empty() {
            return Err(invalid("index.variants", "at least one index variant is required"));
        }

        raw.bm25.validate().map_err(|e| retrieval_invalid("bm25", e))?;
        raw.rm3.validate().map_err(|e| retrieval_invalid("rm3", e))?;
        raw.rrf.validate().map_err(|e| fusion_invalid("rrf", e))?;
        let soboroff = SoboroffParams {
            pool_depth: raw.soboroff.pool_depth,
            sample_fraction: raw.soboroff.sample_fraction,
            trials: raw.soboroff.trials,
            select_middle: raw.soboroff.select_middle,
            seed: raw.seed,
        };
        // candidate count is only known once runs are read
        soboroff
            .validate(usize::MAX)
            .map_err(|e| fusion_invalid("soboroff", e))?;
        let selection_metric = raw
            .eval
            .selection_metric
            .parse()
            .map_err(|e: crate::eval::EvalError| invalid("eval.selection_metric", e.to_string()))?;
        if raw.eval.cuts.is_empty() || raw.eval.cuts.contains(&0) {
            return Err(invalid("eval.cuts", "cuts must be a non-empty list of positive integers"));
        }
        if raw.rerank.top_n == 0 {
            return Err(invalid("rerank.top_n", "must be >= 1"));
        }

        Ok(Self {
            seed: raw.seed,
            output_dir: abs(raw.output_dir),
            recipes,
            corpus,
            resources,
            tokenizer,
            index,
            bm25: raw.bm25,
            rm3: raw.rm3,
            rrf: raw.rrf,
            soboroff,
            selection_metric,
            rerank: raw.rerank,
            cuts: raw.eval.cuts,
        })
    }

    pub fn build_tokenizer(&self) -> Result<Tokenizer, PipelineError> {
        let t = &self.tokenizer;
        let mut tok = Tokenizer::default().with_lowercase(t.lowercase).with_stem(t.stem);
        if !t.use_stopwords {
            tok = tok.without_stopwords();
        } else if let Some(p) = &t.stopwords {
            let words = Tokenizer::load_stopwords(p).map_err(|e| invalid("tokenizer.stopwords", e.to_string()))?;
            tok = tok.with_stopwords(words);
        }
        Ok(tok)
    }
}

/// Table and key enclosing byte `offset`, for error messages. Best effort: tracks `[table]` headers and `key =` lines.
fn locate(text: &str, offset: usize) -> (String, String) {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            table = name.trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            if !trimmed.starts_with('#') {
                key = k.trim().to_string();
            }
        }
        pos += line.len();
        if pos > offset {
            break;
        }
    }
    (table, key)
}
