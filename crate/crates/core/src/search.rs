//! Boolean retrieval with term-frequency-sum or TF-IDF ranking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::analysis::Analyzer;
use crate::index::{DocOrd, InvertedIndex, Posting};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("query {0:?} contains no searchable terms after analysis")]
    EmptyQuery(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("the two queries must differ only in their category")]
    QueryMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scorer {
    /// Sum of the query terms' frequencies in the document.
    #[default]
    TfSum,
    /// Sum of `tf * ln(N / df)` over the query terms.
    TfIdf,
}

impl std::str::FromStr for Scorer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tf-sum" | "tf_sum" | "tfsum" => Ok(Scorer::TfSum),
            "tfidf" | "tf-idf" => Ok(Scorer::TfIdf),
            other => Err(format!(
                "unknown scorer {other:?} (expected tf-sum or tfidf)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// A document must contain every query term.
    #[default]
    Conjunctive,
    /// A document must contain at least one query term.
    Disjunctive,
}

impl std::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "and" | "conjunctive" => Ok(MatchMode::Conjunctive),
            "or" | "disjunctive" => Ok(MatchMode::Disjunctive),
            other => Err(format!(
                "unknown mode {other:?} (expected conjunctive or disjunctive)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub raw: String,
    /// Analyzed with the index's analyzer. Repeated terms count once when
    /// matching and scoring.
    pub terms: Vec<String>,
    pub category: Option<String>,
    pub scorer: Scorer,
    pub mode: MatchMode,
}

impl Query {
    pub fn new(raw: &str, analyzer: &Analyzer) -> Self {
        Query {
            raw: raw.to_string(),
            terms: analyzer.analyze(raw),
            category: None,
            scorer: Scorer::default(),
            mode: MatchMode::default(),
        }
    }

    /// Analyzes `raw` with the analyzer frozen into `index`.
    pub fn for_index(raw: &str, index: &InvertedIndex) -> Self {
        Query::new(raw, index.analyzer())
    }

    pub fn with_category(mut self, category: Option<impl Into<String>>) -> Self {
        self.category = category.map(Into::into);
        self
    }

    pub fn with_scorer(mut self, scorer: Scorer) -> Self {
        self.scorer = scorer;
        self
    }

    pub fn with_mode(mut self, mode: MatchMode) -> Self {
        self.mode = mode;
        self
    }

    /// Query terms with duplicates removed, in first-occurrence order.
    pub fn distinct_terms(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.terms
            .iter()
            .map(String::as_str)
            .filter(|t| seen.insert(*t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub doc: DocOrd,
    pub doc_id: String,
    pub path: String,
    pub category: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchResult {
    /// Sorted by score descending, then `doc_id` ascending.
    pub hits: Vec<Hit>,
}

impl SearchResult {
    pub fn retrieved_count(&self) -> usize {
        self.hits.len()
    }

    pub fn doc_ids(&self) -> BTreeSet<String> {
        self.hits.iter().map(|h| h.doc_id.clone()).collect()
    }

    pub fn top(&self, k: usize) -> &[Hit] {
        &self.hits[..k.min(self.hits.len())]
    }
}

/// `ln(N / df)`; zero for a term absent from the index.
pub fn idf(index: &InvertedIndex, term: &str) -> f64 {
    match index.df(term) {
        0 => 0.0,
        df => (index.num_docs() as f64 / df as f64).ln(),
    }
}

fn weight(scorer: Scorer, tf: u32, idf: f64) -> f64 {
    match scorer {
        Scorer::TfSum => f64::from(tf),
        Scorer::TfIdf => f64::from(tf) * idf,
    }
}

/// Runs `query` against `index`.
pub fn search(index: &InvertedIndex, query: &Query) -> Result<SearchResult, SearchError> {
    let terms: Vec<&str> = query
        .distinct_terms()
        .into_iter()
        .filter(|t| !index.is_pruned(t))
        .collect();
    if terms.is_empty() {
        return Err(SearchError::EmptyQuery(query.raw.clone()));
    }
    if let Some(cat) = &query.category {
        if !index.has_category(cat) {
            return Err(SearchError::UnknownCategory(cat.clone()));
        }
    }
    let in_category = |doc: DocOrd| {
        query
            .category
            .as_deref()
            .is_none_or(|c| index.doc(doc).category == c)
    };
    let lists: Vec<(Option<&[Posting]>, f64)> = terms
        .iter()
        .map(|t| (index.postings(t), idf(index, t)))
        .collect();

    let mut scored: Vec<(DocOrd, f64)> = match query.mode {
        MatchMode::Conjunctive => {
            let Some(lists) = lists
                .iter()
                .map(|(p, w)| p.map(|p| (p, *w)))
                .collect::<Option<Vec<_>>>()
            else {
                return Ok(SearchResult::default());
            };
            intersect(&lists, query.scorer, &in_category)
        }
        MatchMode::Disjunctive => {
            let mut acc: BTreeMap<DocOrd, f64> = BTreeMap::new();
            for (postings, idf) in &lists {
                for p in postings.unwrap_or_default() {
                    if in_category(p.doc) {
                        *acc.entry(p.doc).or_insert(0.0) += weight(query.scorer, p.tf, *idf);
                    }
                }
            }
            acc.into_iter().collect()
        }
    };
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let hits = scored
        .into_iter()
        .map(|(doc, score)| {
            let entry = index.doc(doc);
            Hit {
                doc,
                doc_id: entry.id.clone(),
                path: entry.path.clone(),
                category: entry.category.clone(),
                score,
            }
        })
        .collect();
    Ok(SearchResult { hits })
}

/// Intersects sorted posting lists, driving from the shortest one. Scores
/// are summed in query-term order.
fn intersect(
    lists: &[(&[Posting], f64)],
    scorer: Scorer,
    keep: &dyn Fn(DocOrd) -> bool,
) -> Vec<(DocOrd, f64)> {
    let driver = (0..lists.len())
        .min_by_key(|&i| lists[i].0.len())
        .expect("at least one list");
    let mut cursors = vec![0usize; lists.len()];
    let mut tfs = vec![0u32; lists.len()];
    let mut out = Vec::new();
    'docs: for p in lists[driver].0 {
        if !keep(p.doc) {
            continue;
        }
        for (i, (list, _)) in lists.iter().enumerate() {
            if i == driver {
                tfs[i] = p.tf;
                continue;
            }
            let rest = &list[cursors[i]..];
            let skip = rest.partition_point(|q| q.doc < p.doc);
            cursors[i] += skip;
            match list.get(cursors[i]) {
                Some(q) if q.doc == p.doc => tfs[i] = q.tf,
                Some(_) => continue 'docs,
                None => break 'docs,
            }
        }
        let score = lists
            .iter()
            .zip(&tfs)
            .map(|((_, idf), &tf)| weight(scorer, tf, *idf))
            .sum();
        out.push((p.doc, score));
    }
    out
}

/// Runs the same query without and with a category restriction.
///
/// The restricted hit set is always a subset of the unrestricted one.
pub fn compare_modes(
    index: &InvertedIndex,
    without_category: &Query,
    with_category: &Query,
) -> Result<(SearchResult, SearchResult), SearchError> {
    let same = without_category.raw == with_category.raw
        && without_category.terms == with_category.terms
        && without_category.scorer == with_category.scorer
        && without_category.mode == with_category.mode;
    if !same {
        return Err(SearchError::QueryMismatch);
    }
    let before = search(index, without_category)?;
    let after = search(index, with_category)?;
    Ok((before, after))
}
