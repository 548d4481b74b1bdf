use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use covsearch::corpus::{build_indexable_docs, parse_metadata, Corpus, IndexVariant, MetadataFormat};
use covsearch::eval::{
    agreement, evaluate_all, format_run, read_qrels, read_run, source_stats, EvalOptions,
};
use covsearch::fusion::{rrf_fuse, RrfParams};
use covsearch::index::{InvertedIndex, Tokenizer};
use covsearch::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use covsearch::query::{build_weighted_query, generate_variations, parse_topics, EntityLexicon, Ontology, Topic};
use covsearch::retrieval::{
    bm25_search, collapse_paragraphs, rm3_expansion, rm3_search, weighted_bm25_search, Bm25Params, QueryTerms,
    Rm3Params,
};
use covsearch::run::{Run, MAX_RESULTS};

#[derive(Parser)]
#[command(name = "covsearch", version, about = "Ad-hoc retrieval, fusion and evaluation over CORD-19 style corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an inverted index from a metadata file.
    Index(IndexArgs),
    /// Print parsed topics, optionally with their query variations.
    Topics(TopicsArgs),
    /// Rank an index against topics and print a TREC run.
    Search(SearchArgs),
    /// Print the weighted (ontology and entity) query of every topic.
    Expand(ExpandArgs),
    /// Reciprocal rank fusion of run files, printed as a TREC run.
    Fuse(FuseArgs),
    /// Evaluate a run against qrels.
    Eval(EvalArgs),
    /// Relevant documents per source, from qrels and metadata.
    Stats(StatsArgs),
    /// Agreement between two sets of judgments.
    Agreement(AgreementArgs),
    /// Check a run file for rank, order, duplicate and cap problems.
    ValidateRun(ValidateArgs),
    /// Run every recipe of a pipeline config.
    Run(RunArgs),
}

#[derive(Args)]
struct TokenizerArgs {
    /// Keep case.
    #[arg(long)]
    no_lowercase: bool,
    /// Skip Porter stemming.
    #[arg(long)]
    no_stem: bool,
    /// Keep stopwords.
    #[arg(long, conflicts_with = "stopwords")]
    no_stopwords: bool,
    /// Stopword list, one word per line, replacing the built-in list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

impl TokenizerArgs {
    fn build(&self) -> Result<Tokenizer> {
        let mut t = Tokenizer::default().with_lowercase(!self.no_lowercase).with_stem(!self.no_stem);
        if self.no_stopwords {
            t = t.without_stopwords();
        } else if let Some(p) = &self.stopwords {
            t = t.with_stopwords(Tokenizer::load_stopwords(p)?);
        }
        Ok(t)
    }
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    metadata: PathBuf,
    /// JSONL of `{"doc_id", "paragraphs"}` records.
    #[arg(long)]
    fulltext: Option<PathBuf>,
    #[arg(long, default_value = "title_abstract")]
    variant: IndexVariant,
    #[arg(long, short)]
    output: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

#[derive(Args)]
struct TopicsArgs {
    #[arg(long)]
    topics: PathBuf,
    /// Also print the four query variations (needs --lexicon).
    #[arg(long, requires = "lexicon")]
    variations: bool,
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Bm25,
    Rm3,
    /// BM25 over the weighted query; needs --ontology and --lexicon.
    Weighted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    Query,
    Question,
    Narrative,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    #[arg(long, value_enum, default_value = "bm25")]
    model: Model,
    /// Topic field used as query text.
    #[arg(long, value_enum, default_value = "query")]
    field: Field,
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    #[arg(long, default_value_t = MAX_RESULTS)]
    max_results: usize,
    #[arg(long, default_value_t = 10)]
    fb_docs: usize,
    #[arg(long, default_value_t = 10)]
    fb_terms: usize,
    #[arg(long, default_value_t = 0.5)]
    original_weight: f64,
    #[arg(long, required_if_eq("model", "weighted"))]
    ontology: Option<PathBuf>,
    #[arg(long, required_if_eq("model", "weighted"))]
    lexicon: Option<PathBuf>,
    /// Keep only the best paragraph of each document.
    #[arg(long)]
    collapse: bool,
    #[arg(long, default_value = "covsearch")]
    tag: String,
    /// Write the run here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long)]
    topics: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    /// Also print the RM3 expansion terms from this index.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    fb_docs: usize,
    #[arg(long, default_value_t = 10)]
    fb_terms: usize,
    #[arg(long, default_value_t = 0.5)]
    original_weight: f64,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long, default_value_t = 60.0)]
    k: f64,
    #[arg(long, default_value = "fused")]
    tag: String,
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Cutoff for P@K and NDCG@K; repeatable.
    #[arg(long = "cut", default_values_t = [5, 10, 15, 20, 30])]
    cuts: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    rbp_p: f64,
    /// Leave qrels topics missing from the run out of the means.
    #[arg(long)]
    skip_missing_topics: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long)]
    metadata: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct AgreementArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Compare relevant (grade >= 1) against non-relevant only.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct ValidateArgs {
    run: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "COVSEARCH_CONFIG")]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(1, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Index(a) => index(a)?,
        Command::Topics(a) => topics(a)?,
        Command::Search(a) => search(a)?,
        Command::Expand(a) => expand(a)?,
        Command::Fuse(a) => fuse(a)?,
        Command::Eval(a) => eval(a)?,
        Command::Stats(a) => stats(a)?,
        Command::Agreement(a) => agree(a)?,
        Command::ValidateRun(a) => return validate(a),
        Command::Run(a) => run(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn out(text: &str) -> Result<()> {
    let mut stdout = io::stdout().lock();
    stdout.write_all(text.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

fn load_topics(path: &Path) -> Result<Vec<Topic>> {
    parse_topics(path).with_context(|| format!("reading topics {}", path.display()))
}

fn index(a: IndexArgs) -> Result<()> {
    let corpus = Corpus::load(&a.metadata, a.fulltext.as_deref())?;
    let docs = build_indexable_docs(corpus.records(), a.variant);
    let idx = InvertedIndex::build(&docs, &a.tokenizer.build()?)?;
    idx.save(&a.output)?;
    eprintln!(
        "{} index: {} documents, {} terms -> {}",
        a.variant,
        idx.num_docs(),
        idx.num_terms(),
        a.output.display()
    );
    Ok(())
}

fn topics(a: TopicsArgs) -> Result<()> {
    let topics = load_topics(&a.topics)?;
    let lexicon = a.lexicon.as_deref().map(EntityLexicon::load).transpose()?;
    let mut s = String::new();
    for t in &topics {
        s += &format!("{}\tquery\t{}\n{}\tquestion\t{}\n{}\tnarrative\t{}\n", t.number, t.query, t.number, t.question, t.number, t.narrative);
        if let (true, Some(lex)) = (a.variations, &lexicon) {
            for v in generate_variations(t, lex) {
                s += &format!("{}\t{}\t{}\n", t.number, v.id, v.text);
            }
        }
    }
    out(&s)
}

fn search(a: SearchArgs) -> Result<()> {
    let idx = InvertedIndex::load(&a.index)?;
    let topics = load_topics(&a.topics)?;
    let bp = Bm25Params { k1: a.k1, b: a.b, max_results: a.max_results };
    let rp = Rm3Params { fb_docs: a.fb_docs, fb_terms: a.fb_terms, original_weight: a.original_weight };
    let tok = idx.tokenizer().clone();
    let weighted = match a.model {
        Model::Weighted => Some((
            Ontology::load(a.ontology.as_deref().expect("required by clap"))?,
            EntityLexicon::load(a.lexicon.as_deref().expect("required by clap"))?,
        )),
        _ => None,
    };
    let mut run = Run::new(&a.tag);
    for t in &topics {
        let text = match a.field {
            Field::Query => &t.query,
            Field::Question => &t.question,
            Field::Narrative => &t.narrative,
        };
        let q = QueryTerms::analyze(text, &tok);
        let docs = match (&a.model, &weighted) {
            (Model::Bm25, _) => bm25_search(&idx, &q, &bp)?,
            (Model::Rm3, _) => rm3_search(&idx, &q, &bp, &rp)?,
            (Model::Weighted, Some((onto, lex))) => {
                let mut topic = t.clone();
                topic.query = text.clone();
                weighted_bm25_search(&idx, &build_weighted_query(&topic, onto, lex), &tok, &bp)?
            }
            (Model::Weighted, None) => unreachable!("resources loaded above"),
        };
        run.insert_scored(t.number, docs, bp.max_results);
    }
    if a.collapse {
        run = collapse_paragraphs(&run);
    }
    let text = format_run(&run);
    match &a.output {
        Some(p) => covsearch::eval::write_run(&run, p)?,
        None => out(&text)?,
    }
    Ok(())
}

fn expand(a: ExpandArgs) -> Result<()> {
    let topics = load_topics(&a.topics)?;
    let ontology = Ontology::load(&a.ontology)?;
    let lexicon = EntityLexicon::load(&a.lexicon)?;
    let idx = a.index.as_deref().map(InvertedIndex::load).transpose()?;
    let rp = Rm3Params { fb_docs: a.fb_docs, fb_terms: a.fb_terms, original_weight: a.original_weight };
    let mut s = String::new();
    for t in &topics {
        s += &format!("{}\tweighted\t{}\n", t.number, build_weighted_query(t, &ontology, &lexicon).to_indri());
        if let Some(idx) = &idx {
            let q = QueryTerms::analyze(&t.query, idx.tokenizer());
            let terms = rm3_expansion(idx, &q, &Bm25Params::default(), &rp)?;
            let rendered: Vec<String> = terms.iter().map(|(w, p)| format!("{p:.4} {w}")).collect();
            s += &format!("{}\trm3\t{}\n", t.number, rendered.join(" "));
        }
    }
    out(&s)
}

fn fuse(a: FuseArgs) -> Result<()> {
    let runs = a
        .runs
        .iter()
        .map(|p| read_run(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let fused = rrf_fuse(&runs, &RrfParams { k: a.k }, &a.tag)?;
    out(&format_run(&fused))
}

fn eval(a: EvalArgs) -> Result<()> {
    let run = read_run(&a.run).with_context(|| format!("reading {}", a.run.display()))?;
    let qrels = read_qrels(&a.qrels).with_context(|| format!("reading {}", a.qrels.display()))?;
    if a.cuts.contains(&0) {
        bail!("--cut must be positive");
    }
    let opts = EvalOptions { cuts: a.cuts, rbp_p: a.rbp_p, include_missing_topics: !a.skip_missing_topics };
    let report = evaluate_all(&run, &qrels, &opts);
    out(&match a.format {
        Format::Text => report.to_text(),
        Format::Csv => report.to_csv(),
    })
}

fn stats(a: StatsArgs) -> Result<()> {
    let qrels = read_qrels(&a.qrels)?;
    let records = parse_metadata(&a.metadata, MetadataFormat::from_path(&a.metadata))?;
    let table = source_stats(&qrels, &records);
    out(&match a.format {
        Format::Text => table.to_text(),
        Format::Csv => table.to_csv(),
    })
}

fn agree(a: AgreementArgs) -> Result<()> {
    let x = read_qrels(&a.a)?;
    let y = read_qrels(&a.b)?;
    let r = agreement(&x, &y, a.binary)?;
    out(&format!(
        "common\t{}\nagreed\t{}\t{:.1}%\ndisagreed\t{}\t{:.1}%\nonly_a\t{}\nonly_b\t{}\n",
        r.common,
        r.agreed,
        r.pct_agree(),
        r.disagreed,
        r.pct_disagree(),
        r.only_a,
        r.only_b
    ))
}

fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let run = read_run(&a.run).with_context(|| format!("reading {}", a.run.display()))?;
    let issues = run.validate();
    if issues.is_empty() {
        out(&format!("ok: {} entries over {} topics\n", run.len(), run.topics().count()))?;
        Ok(ExitCode::SUCCESS)
    } else {
        let s: String = issues.iter().map(|i| format!("{i}\n")).collect();
        out(&s)?;
        Ok(ExitCode::from(1))
    }
}

fn run(a: RunArgs) -> Result<()> {
    let mut config = PipelineConfig::load(&a.config)?;
    if let Some(dir) = a.output_dir {
        config.output_dir = dir;
    }
    let output = run_pipeline(config)?;
    for n in &output.notices {
        eprintln!("notice: {n}");
    }
    for f in &output.files {
        println!("{}", f.display());
    }
    Ok(())
}
