//! Category-aware full-text retrieval.
//!
//! A corpus is a directory tree whose top-level subdirectories are categories.
//! Documents are analyzed into terms, indexed into an inverted index that
//! records each document's category, and queried conjunctively with
//! term-frequency-sum or TF-IDF ranking. Searches can be restricted to one
//! category, either named by the user or predicted by a Naive Bayes or KNN
//! classifier, and the [`eval`] module measures the effect of that restriction
//! with set-based precision and recall.

pub mod analysis;
pub mod classify;
pub mod corpus;
pub mod eval;
mod format;
pub mod index;
pub mod par;
pub mod search;

pub use analysis::{Analyzer, AnalyzerConfig, StemmerKind, StopWords};
pub use classify::{
    Classifier, ClassifierKind, ClassifyError, Evidence, KnnModel, NaiveBayesModel, Prediction,
};
pub use corpus::{
    ingest, Corpus, CorpusError, CorpusManifest, Document, IngestOptions, TextEncoding,
};
pub use eval::{
    precision_recall, ComparisonReport, EmptyRetrieved, EvalError, Fraction, Qrels, QueryEval,
    QuerySpec, Routing,
};
pub use format::FormatError;
pub use index::{DocEntry, DocOrd, IndexError, InvertedIndex, Posting};
pub use par::Parallelism;
pub use search::{compare_modes, search, Hit, MatchMode, Query, Scorer, SearchError, SearchResult};
