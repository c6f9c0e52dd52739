//! `catsearch`: index a categorized corpus, search it with or without a
//! category restriction, classify text, and compare precision/recall before
//! and after the restriction.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on a usage error.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use catsearch::analysis::{fingerprint_hex, load_stopwords};
use catsearch::classify::{predict_query_category, ClassifierParams};
use catsearch::eval::{run_comparison, EvalOptions};
use catsearch::{
    ingest, search, Analyzer, AnalyzerConfig, Classifier, ClassifierKind, CorpusError,
    EmptyRetrieved, Evidence, IngestOptions, InvertedIndex, MatchMode, Parallelism, Prediction,
    Qrels, Query, QuerySpec, Routing, Scorer, SearchError, StemmerKind, StopWords, TextEncoding,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Default stopword file for `index` when `--stopwords` is not given.
const STOPWORDS_ENV: &str = "CATSEARCH_STOPWORDS";

#[derive(Parser)]
#[command(name = "catsearch", version, about = "Category-aware full-text search")]
struct Cli {
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a corpus directory and write an index file.
    Index(IndexArgs),
    /// Search an index.
    Search(SearchArgs),
    /// Predict the category of a piece of text.
    Classify(ClassifyArgs),
    /// Compare precision and recall with and without the category filter.
    Eval(EvalArgs),
}

#[derive(Args, Default)]
struct AnalyzerArgs {
    /// Stopword file, one word per line. For `index`, defaults to $CATSEARCH_STOPWORDS.
    #[arg(long, value_name = "FILE")]
    stopwords: Option<PathBuf>,
    /// Skip Unicode normalization and case folding.
    #[arg(long)]
    no_normalize: bool,
    /// Keep Arabic diacritics during normalization.
    #[arg(long)]
    keep_diacritics: bool,
    /// Keep punctuation inside tokens.
    #[arg(long)]
    no_strip_symbols: bool,
    /// Enable a stemming stage.
    #[arg(long, value_name = "NAME", value_parser = parse_stemmer)]
    stem: Option<StemmerKind>,
}

impl AnalyzerArgs {
    fn given(&self) -> bool {
        self.stopwords.is_some()
            || self.no_normalize
            || self.keep_diacritics
            || self.no_strip_symbols
            || self.stem.is_some()
    }

    fn stopword_path(&self) -> Option<PathBuf> {
        self.stopwords.clone().or_else(|| {
            std::env::var_os(STOPWORDS_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
    }

    fn analyzer(&self) -> Result<Analyzer, Failure> {
        let stopwords = match self.stopword_path() {
            Some(p) => {
                require_file(&p, "stopword file")?;
                load_stopwords(&p).map_err(|e| Failure::Runtime(e.into()))?
            }
            None => StopWords::new(),
        };
        Ok(Analyzer::new(AnalyzerConfig {
            stopwords,
            normalize_unicode: !self.no_normalize,
            strip_diacritics: !self.keep_diacritics,
            strip_symbols: !self.no_strip_symbols,
            stemmer: self.stem,
        }))
    }

    /// With any analyzer flag present, the index must have been built with
    /// exactly that configuration.
    fn check(&self, index: &InvertedIndex) -> Result<(), Failure> {
        if !self.given() {
            return Ok(());
        }
        let requested = self.analyzer()?.fingerprint();
        let actual = index.analyzer().fingerprint();
        if requested != actual {
            return Err(Failure::Usage(anyhow!(
                "analyzer flags do not match the index (requested {}, index built with {}); rebuild the index or drop the flags",
                &fingerprint_hex(&requested)[..16],
                &fingerprint_hex(&actual)[..16]
            )));
        }
        Ok(())
    }
}

fn parse_stemmer(s: &str) -> Result<StemmerKind, String> {
    s.parse()
}

fn parse_encoding(s: &str) -> Result<TextEncoding, String> {
    s.parse()
}

#[derive(Args)]
struct IndexArgs {
    /// Corpus root; each subdirectory is a category.
    root: PathBuf,
    /// Index file to write.
    #[arg(long, short = 'o', value_name = "PATH")]
    index: PathBuf,
    /// Drop terms found in fewer than N documents.
    #[arg(long, value_name = "N", default_value_t = 1)]
    df_threshold: u32,
    /// Corpus file encoding: utf-8 or windows-1256.
    #[arg(long, default_value = "utf-8", value_parser = parse_encoding)]
    encoding: TextEncoding,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScorerArg {
    TfSum,
    Tfidf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    And,
    Or,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Nb,
    Knn,
    Centroid,
}

#[derive(Args)]
struct RetrievalArgs {
    #[arg(long, value_enum, default_value = "tf-sum")]
    scorer: ScorerArg,
    /// `and` requires every query term, `or` any of them.
    #[arg(long, value_enum, default_value = "and")]
    mode: ModeArg,
}

#[derive(Args)]
struct ClassifierArgs {
    #[arg(long, value_enum, default_value = "nb")]
    classifier: ClassifierArg,
    /// Neighbours for knn (clamped to the number of documents).
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Naive Bayes smoothing.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Use a saved model instead of training one.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, short = 'i', value_name = "PATH")]
    index: PathBuf,
    query: String,
    /// Restrict results to one category.
    #[arg(long, conflicts_with = "predict_category")]
    category: Option<String>,
    /// Restrict results to the category the classifier predicts for the query.
    #[arg(long)]
    predict_category: bool,
    /// Show at most N hits.
    #[arg(long, value_name = "N")]
    top: Option<usize>,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long, short = 'i', value_name = "PATH")]
    index: PathBuf,
    /// Text to classify; read from --file when absent.
    #[arg(required_unless_present = "file")]
    text: Option<String>,
    #[arg(long, value_name = "PATH", conflicts_with = "text")]
    file: Option<PathBuf>,
    /// Write the trained model here.
    #[arg(long, value_name = "PATH", conflicts_with = "model")]
    save_model: Option<PathBuf>,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoutingArg {
    Explicit,
    Predicted,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmptyArg {
    Vacuous,
    Zero,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, short = 'i', value_name = "PATH")]
    index: PathBuf,
    /// TSV: query id, query text, optional category.
    #[arg(long, value_name = "PATH")]
    queries: PathBuf,
    /// TSV: query id, relevant document id.
    #[arg(long, value_name = "PATH")]
    qrels: PathBuf,
    /// Where the after-filter category comes from.
    #[arg(long, value_enum, default_value = "explicit")]
    routing: RoutingArg,
    /// Precision when nothing is retrieved.
    #[arg(long, value_enum, default_value = "vacuous")]
    empty_precision: EmptyArg,
    #[arg(long, value_name = "PATH")]
    out_tsv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out_table: Option<PathBuf>,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(anyhow!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let parallelism = if cli.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::default()
    };
    let result = match cli.command {
        Command::Index(a) => cmd_index(a, parallelism),
        Command::Search(a) => cmd_search(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Eval(a) => cmd_eval(a, parallelism),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_index(args: IndexArgs, parallelism: Parallelism) -> Result<(), Failure> {
    if !args.root.is_dir() {
        return Err(Failure::Usage(anyhow!(
            "corpus root {} does not exist or is not a directory",
            args.root.display()
        )));
    }
    let analyzer = args.analyzer.analyzer()?;
    let options = IngestOptions {
        encoding: args.encoding,
        parallelism,
    };
    let corpus = ingest(&args.root, &options).map_err(|e| match e {
        CorpusError::RootNotFound(_) => Failure::Usage(e.into()),
        e => Failure::Runtime(e.into()),
    })?;
    for issue in &corpus.issues {
        eprintln!("warning: {issue}");
    }
    let mut index = InvertedIndex::build_with(&corpus.documents, analyzer, parallelism)
        .context("building the index")?;
    if args.df_threshold > 1 {
        index = index.prune_by_df(args.df_threshold);
    }
    index
        .persist(&args.index)
        .with_context(|| format!("writing {}", args.index.display()))?;
    println!("{}", corpus.manifest);
    println!(
        "vocabulary: {} terms (df threshold {})",
        index.vocabulary_len(),
        index.df_threshold()
    );
    println!(
        "index: {} (analyzer {})",
        args.index.display(),
        &fingerprint_hex(&index.analyzer().fingerprint())[..16]
    );
    Ok(())
}

fn load_index(path: &Path, analyzer: &AnalyzerArgs) -> Result<InvertedIndex, Failure> {
    require_file(path, "index file")?;
    let index = InvertedIndex::load(path).with_context(|| format!("loading {}", path.display()))?;
    analyzer.check(&index)?;
    Ok(index)
}

fn classifier_for(index: &InvertedIndex, args: &ClassifierArgs) -> Result<Classifier, Failure> {
    if let Some(path) = &args.model {
        require_file(path, "model file")?;
        return Ok(Classifier::load_for(path, index)
            .with_context(|| format!("loading {}", path.display()))?);
    }
    let params = ClassifierParams {
        kind: match args.classifier {
            ClassifierArg::Nb => ClassifierKind::NaiveBayes,
            ClassifierArg::Knn => ClassifierKind::Knn,
            ClassifierArg::Centroid => ClassifierKind::Centroid,
        },
        alpha: args.alpha,
        k: args.k,
    };
    Classifier::train(index, &params)
        .map_err(|e| Failure::Runtime(anyhow!("training the classifier: {e}")))
}

fn evidence(e: &Evidence) -> String {
    match e {
        Evidence::LogPosterior(s) => format!("log posterior {s:.4}"),
        Evidence::Votes {
            count,
            mean_similarity,
        } => format!("{count} votes, mean similarity {mean_similarity:.4}"),
        Evidence::Similarity(s) => format!("similarity {s:.4}"),
    }
}

impl RetrievalArgs {
    fn scorer(&self) -> Scorer {
        match self.scorer {
            ScorerArg::TfSum => Scorer::TfSum,
            ScorerArg::Tfidf => Scorer::TfIdf,
        }
    }

    fn mode(&self) -> MatchMode {
        match self.mode {
            ModeArg::And => MatchMode::Conjunctive,
            ModeArg::Or => MatchMode::Disjunctive,
        }
    }
}

fn cmd_search(args: SearchArgs) -> Result<(), Failure> {
    let index = load_index(&args.index, &args.analyzer)?;
    let mut query = Query::for_index(&args.query, &index)
        .with_scorer(args.retrieval.scorer())
        .with_mode(args.retrieval.mode());
    if args.predict_category {
        let classifier = classifier_for(&index, &args.classifier)?;
        let prediction = predict_query_category(&classifier, &query)
            .map_err(|e| Failure::Runtime(anyhow!("predicting a category: {e}")))?;
        println!(
            "predicted category: {} ({})",
            prediction.category,
            evidence(&prediction.evidence)
        );
        query = query.with_category(Some(prediction.category));
    } else {
        query = query.with_category(args.category.clone());
    }
    let result = search(&index, &query).map_err(|e| match e {
        SearchError::EmptyQuery(_) | SearchError::UnknownCategory(_) => Failure::Usage(e.into()),
        e => Failure::Runtime(e.into()),
    })?;
    let shown = result.top(args.top.unwrap_or(usize::MAX));
    for (rank, hit) in shown.iter().enumerate() {
        println!(
            "{:>4}  {:>10.4}  {}  {}",
            rank + 1,
            hit.score,
            hit.category,
            hit.path
        );
    }
    println!("{} total", result.retrieved_count());
    Ok(())
}

fn print_prediction(p: &Prediction) {
    println!("{}", p.category);
    for r in &p.ranking {
        println!("  {}\t{}", r.category, evidence(&r.evidence));
    }
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), Failure> {
    let index = load_index(&args.index, &args.analyzer)?;
    let text = match (&args.text, &args.file) {
        (Some(t), _) => t.clone(),
        (None, Some(f)) => {
            require_file(f, "input file")?;
            fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let classifier = classifier_for(&index, &args.classifier)?;
    if let Some(path) = &args.save_model {
        classifier
            .persist(path)
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("model written to {}", path.display());
    }
    let terms = index.analyzer().analyze(&text);
    let prediction = classifier
        .predict(&terms)
        .map_err(|e| Failure::Runtime(anyhow!("classifying: {e}")))?;
    print_prediction(&prediction);
    Ok(())
}

fn cmd_eval(args: EvalArgs, parallelism: Parallelism) -> Result<(), Failure> {
    require_file(&args.queries, "queries file")?;
    require_file(&args.qrels, "qrels file")?;
    let index = load_index(&args.index, &args.analyzer)?;
    let open = |p: &Path| -> Result<BufReader<fs::File>, Failure> {
        Ok(BufReader::new(
            fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        ))
    };
    let queries = QuerySpec::parse_all(open(&args.queries)?).context("reading queries")?;
    let qrels = Qrels::parse(open(&args.qrels)?).context("reading qrels")?;
    if queries.is_empty() {
        eprintln!("warning: {} contains no queries", args.queries.display());
    }
    let classifier;
    let routing = match args.routing {
        RoutingArg::Explicit => Routing::Explicit,
        RoutingArg::Predicted => {
            classifier = classifier_for(&index, &args.classifier)?;
            Routing::Predicted(&classifier)
        }
    };
    let options = EvalOptions {
        scorer: args.retrieval.scorer(),
        mode: args.retrieval.mode(),
        empty: match args.empty_precision {
            EmptyArg::Vacuous => EmptyRetrieved::Vacuous,
            EmptyArg::Zero => EmptyRetrieved::Zero,
        },
        parallelism,
    };
    let report =
        run_comparison(&index, &queries, &qrels, routing, &options).context("evaluating")?;
    let table = report.to_table();
    print!("{table}");
    if let Some(p) = &args.out_tsv {
        fs::write(p, report.to_tsv()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.out_table {
        fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?;
    }
    let errors = report.errors().count();
    if errors > 0 {
        eprintln!(
            "warning: {errors} of {} queries could not be evaluated",
            report.rows.len()
        );
    }
    Ok(())
}
