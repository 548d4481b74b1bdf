//! Config-driven batch runs: ingest, index, retrieve, rerank, fuse,
//! evaluate.
//!
//! Recipes run sequentially in the order given. Each writes
//! `<output_dir>/<recipe>.run`, plus `<recipe>.eval.txt` and
//! `<recipe>.eval.csv` when qrels are configured. Output depends only on
//! the config, its input files and the seed.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{
    CorpusPaths, EvalConfig, IndexConfig, PipelineConfig, Recipe, RerankConfig, Resources, SoboroffConfig,
    TokenizerConfig,
};

use crate::corpus::{build_indexable_docs, Corpus, CorpusError, IndexVariant};
use crate::eval::{evaluate_all, read_qrels, read_run, write_run, EvalError, EvalOptions, MetricReport, Qrels};
use crate::fusion::{
    all_filtering, fusion_of_fusions, fusion_of_runs, soboroff_select, FusionError, SoboroffSelection,
};
use crate::index::{IndexError, InvertedIndex, Tokenizer};
use crate::query::{
    build_weighted_query, generate_variations, parse_topics, EntityLexicon, Ontology, QueryError, Topic, VariationId,
};
use crate::retrieval::{
    bm25_search, collapse_paragraphs, recency_rerank, rm3_search, similarity_rerank, weighted_bm25_search,
    QueryTerms, RetrievalError, VectorStore,
};
use crate::run::{Run, RunIssue};
use crate::util::write_atomic;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config at `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error("recipe {recipe}: {source}")]
    Recipe {
        recipe: String,
        #[source]
        source: StageError,
    },
    #[error("loading {what}: {source}")]
    Input {
        what: &'static str,
        #[source]
        source: StageError,
    },
}

impl PipelineError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigInvalid { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("produced an invalid run: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidRun(Vec<RunIssue>),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StageError + '_ {
    move |source| StageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What a pipeline run produced.
#[derive(Debug, Default)]
pub struct PipelineOutput {
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
    pub runs: BTreeMap<Recipe, Run>,
    pub reports: BTreeMap<Recipe, MetricReport>,
    /// Informational messages, e.g. skipped evaluation.
    pub notices: Vec<String>,
}

/// The sixteen-run set, grouped by query variation.
#[derive(Debug, Clone)]
pub struct VariationRuns {
    pub groups: Vec<(VariationId, Vec<Run>)>,
}

impl VariationRuns {
    pub fn flat(&self) -> Vec<Run> {
        self.groups.iter().flat_map(|(_, g)| g.iter().cloned()).collect()
    }

    pub fn grouped(&self) -> Vec<Vec<Run>> {
        self.groups.iter().map(|(_, g)| g.clone()).collect()
    }
}

/// Loaded inputs plus lazily built indexes and intermediate runs.
pub struct Pipeline {
    config: PipelineConfig,
    tokenizer: Tokenizer,
    corpus: Corpus,
    topics: Vec<Topic>,
    ontology: Ontology,
    lexicon: EntityLexicon,
    qrels: Option<Qrels>,
    indexes: BTreeMap<IndexVariant, InvertedIndex>,
    variation_runs: Option<VariationRuns>,
    own_fusions: BTreeMap<Recipe, Run>,
}

fn input<T, E: Into<StageError>>(what: &'static str, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::Input {
        what,
        source: e.into(),
    })
}

impl Pipeline {
    /// Loads corpus, topics and optional resources.
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        let tokenizer = config.build_tokenizer()?;
        let corpus = input(
            "corpus",
            Corpus::load(&config.corpus.metadata, config.corpus.fulltext.as_deref()),
        )?;
        let topics = input("topics", parse_topics(&config.resources.topics))?;
        let ontology = match &config.resources.ontology {
            Some(p) => input("ontology", Ontology::load(p))?,
            None => Ontology::default(),
        };
        let lexicon = match &config.resources.lexicon {
            Some(p) => input("lexicon", EntityLexicon::load(p))?,
            None => EntityLexicon::default(),
        };
        let qrels = match &config.resources.qrels {
            Some(p) => Some(input("qrels", read_qrels(p))?),
            None => None,
        };
        Ok(Self {
            config,
            tokenizer,
            corpus,
            topics,
            ontology,
            lexicon,
            qrels,
            indexes: BTreeMap::new(),
            variation_runs: None,
            own_fusions: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    /// Builds the index for `variant` on first use.
    pub fn index(&mut self, variant: IndexVariant) -> Result<&InvertedIndex, StageError> {
        if !self.indexes.contains_key(&variant) {
            let docs = build_indexable_docs(self.corpus.records(), variant);
            let idx = InvertedIndex::build(&docs, &self.tokenizer)?;
            self.indexes.insert(variant, idx);
        }
        Ok(&self.indexes[&variant])
    }

    fn bm25_run(&mut self, tag: &str) -> Result<Run, StageError> {
        let bp = self.config.bm25;
        self.index(IndexVariant::TitleAbstract)?;
        let idx = &self.indexes[&IndexVariant::TitleAbstract];
        let mut run = Run::new(tag);
        for t in &self.topics {
            let q = QueryTerms::analyze(&t.query, &self.tokenizer);
            run.insert_scored(t.number, bm25_search(idx, &q, &bp)?, bp.max_results);
        }
        Ok(run)
    }

    fn ku_run1(&mut self, tag: &str) -> Result<Run, StageError> {
        let run = self.bm25_run(tag)?;
        let rr = &self.config.rerank;
        Ok(recency_rerank(&run, &self.corpus, rr.top_n, rr.boost_year)?)
    }

    fn ku_run2(&mut self, tag: &str) -> Result<Run, StageError> {
        let bp = self.config.bm25;
        self.index(IndexVariant::TitleAbstract)?;
        let idx = &self.indexes[&IndexVariant::TitleAbstract];
        let mut run = Run::new(tag);
        for t in &self.topics {
            let wq = build_weighted_query(t, &self.ontology, &self.lexicon);
            run.insert_scored(t.number, weighted_bm25_search(idx, &wq, &self.tokenizer, &bp)?, bp.max_results);
        }
        Ok(run)
    }

    fn ku_run3(&mut self, tag: &str) -> Result<Run, StageError> {
        let path = self.config.resources.vectors.clone().expect("validated: ku_run3 has vectors");
        let vectors = VectorStore::load(&path)?;
        let run = self.bm25_run(tag)?;
        let rr = &self.config.rerank;
        let run = similarity_rerank(&run, &vectors, rr.top_n)?;
        Ok(recency_rerank(&run, &self.corpus, rr.top_n, rr.boost_year)?)
    }

    /// BM25+RM3 for each query variation on each configured index. The
    /// paragraph index yields two runs, raw and collapsed, so the default
    /// three indexes give four runs per variation.
    pub fn variation_runs(&mut self) -> Result<&VariationRuns, StageError> {
        if self.variation_runs.is_none() {
            let (bp, rp) = (self.config.bm25, self.config.rm3);
            let variants = self.config.index.variants.clone();
            for &v in &variants {
                self.index(v)?;
            }
            let variations: Vec<_> = self.topics.iter().map(|t| generate_variations(t, &self.lexicon)).collect();
            let mut groups = Vec::new();
            for (vi, vid) in VariationId::ALL.into_iter().enumerate() {
                let mut group = Vec::new();
                for &variant in &variants {
                    let idx = &self.indexes[&variant];
                    let mut run = Run::new(format!("{vid}.{variant}"));
                    for (t, vars) in self.topics.iter().zip(&variations) {
                        let q = QueryTerms::analyze(&vars[vi].text, &self.tokenizer);
                        run.insert_scored(t.number, rm3_search(idx, &q, &bp, &rp)?, bp.max_results);
                    }
                    if variant == IndexVariant::Paragraph {
                        let mut collapsed = collapse_paragraphs(&run);
                        collapsed.set_tag(format!("{vid}.{variant}_collapsed"));
                        group.push(run);
                        group.push(collapsed);
                    } else {
                        group.push(run);
                    }
                }
                groups.push((vid, group));
            }
            self.variation_runs = Some(VariationRuns { groups });
        }
        Ok(self.variation_runs.as_ref().expect("just built"))
    }

    fn own_fusion(&mut self, recipe: Recipe) -> Result<Run, StageError> {
        if let Some(run) = self.own_fusions.get(&recipe) {
            return Ok(run.clone());
        }
        let rrf = self.config.rrf;
        let vr = self.variation_runs()?;
        let run = match recipe {
            Recipe::FusionOfRuns => fusion_of_runs(&vr.flat(), &rrf, recipe.name())?,
            Recipe::FusionOfFusions => fusion_of_fusions(&vr.grouped(), &rrf, recipe.name())?,
            _ => unreachable!("only the two own fusions are cached"),
        };
        self.own_fusions.insert(recipe, run.clone());
        Ok(run)
    }

    fn external_runs(&self) -> Result<Vec<Run>, StageError> {
        let mut files = Vec::new();
        for p in &self.config.resources.external_runs {
            if p.is_dir() {
                let mut entries: Vec<PathBuf> = fs::read_dir(p)
                    .map_err(io_err(p))?
                    .map(|e| e.map(|e| e.path()))
                    .collect::<Result<_, _>>()
                    .map_err(io_err(p))?;
                entries.retain(|e| e.is_file());
                entries.sort();
                files.extend(entries);
            } else {
                files.push(p.clone());
            }
        }
        Ok(files.iter().map(|f| read_run(f)).collect::<Result<_, _>>()?)
    }

    fn own_runs(&mut self) -> Result<Vec<Run>, StageError> {
        Ok(vec![
            self.own_fusion(Recipe::FusionOfFusions)?,
            self.own_fusion(Recipe::FusionOfRuns)?,
        ])
    }

    /// Soboroff selection over the configured external runs.
    pub fn soboroff_selection(&self) -> Result<(Vec<Run>, SoboroffSelection), StageError> {
        let external = self.external_runs()?;
        let sel = soboroff_select(&external, &self.config.soboroff, self.config.selection_metric)?;
        Ok((external, sel))
    }

    /// Produces the run for one recipe, tagged with the recipe name.
    pub fn produce(&mut self, recipe: Recipe) -> Result<(Run, Option<String>), StageError> {
        let tag = recipe.name();
        let mut extra = None;
        let run = match recipe {
            Recipe::KuRun1 => self.ku_run1(tag)?,
            Recipe::KuRun2 => self.ku_run2(tag)?,
            Recipe::KuRun3 => self.ku_run3(tag)?,
            Recipe::FusionOfRuns | Recipe::FusionOfFusions => self.own_fusion(recipe)?,
            Recipe::AllFiltering => {
                let external = self.external_runs()?;
                all_filtering(&external, &self.own_runs()?, &self.config.rrf, tag)?
            }
            Recipe::SoboroffFiltering => {
                let (external, sel) = self.soboroff_selection()?;
                let mut text = String::from("position\trun\tmean_rank\tselected\n");
                for (pos, &i) in sel.order.iter().enumerate() {
                    let _ = writeln!(
                        text,
                        "{}\t{}\t{:.4}\t{}",
                        pos + 1,
                        external[i].tag(),
                        sel.mean_ranks[i],
                        u8::from(sel.selected.contains(&i))
                    );
                }
                extra = Some(text);
                let picked: Vec<Run> = sel.selected.iter().map(|&i| external[i].clone()).collect();
                all_filtering(&picked, &self.own_runs()?, &self.config.rrf, tag)?
            }
        };
        let issues = run.validate();
        if !issues.is_empty() {
            return Err(StageError::InvalidRun(issues));
        }
        Ok((run, extra))
    }

    /// Runs every configured recipe and writes its outputs.
    pub fn run(&mut self) -> Result<PipelineOutput, PipelineError> {
        let out_dir = self.config.output_dir.clone();
        fs::create_dir_all(&out_dir).map_err(|e| PipelineError::Input {
            what: "output directory",
            source: io_err(&out_dir)(e),
        })?;
        let mut output = PipelineOutput::default();
        if self.qrels.is_none() {
            output
                .notices
                .push("no qrels configured; evaluation skipped".to_string());
        }
        let opts = EvalOptions {
            cuts: self.config.cuts.clone(),
            ..Default::default()
        };
        for recipe in self.config.recipes.clone() {
            let wrap = |source: StageError| PipelineError::Recipe {
                recipe: recipe.name().to_string(),
                source,
            };
            let (run, extra) = self.produce(recipe).map_err(wrap)?;
            let run_path = out_dir.join(format!("{recipe}.run"));
            write_run(&run, &run_path).map_err(|e| wrap(e.into()))?;
            output.files.push(run_path);
            if let Some(text) = extra {
                let p = out_dir.join(format!("{recipe}.selection.tsv"));
                write_atomic(&p, text.as_bytes()).map_err(|e| wrap(io_err(&p)(e)))?;
                output.files.push(p);
            }
            if let Some(qrels) = &self.qrels {
                let report = evaluate_all(&run, qrels, &opts);
                for (ext, body) in [("eval.txt", report.to_text()), ("eval.csv", report.to_csv())] {
                    let p = out_dir.join(format!("{recipe}.{ext}"));
                    write_atomic(&p, body.as_bytes()).map_err(|e| wrap(io_err(&p)(e)))?;
                    output.files.push(p);
                }
                output.reports.insert(recipe, report);
            }
            output.runs.insert(recipe, run);
        }
        Ok(output)
    }
}

/// Loads inputs and runs every recipe in `config`.
pub fn run_pipeline(config: PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    Pipeline::new(config)?.run()
}
