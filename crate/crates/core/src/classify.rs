//! Category prediction for queries and unlabeled text.
//!
//! Two supervised classifiers are trained from a built index:
//!
//! * multinomial Naive Bayes with additive smoothing, scored in log space;
//! * k-nearest-neighbours over TF-IDF document vectors with cosine
//!   similarity, plus a nearest-centroid variant.
//!
//! A prediction can be fed into [`Query::category`] to run a
//! category-restricted search without the user naming the category.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::format::{self, Decoder, Encoder, FormatError};
use crate::index::InvertedIndex;
use crate::par::{map_ordered, Parallelism};
use crate::search::Query;

const MAGIC: &[u8; 8] = b"CATSMDL\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Similarities closer than this to the best of their group are ties when
/// ranking neighbours, vote means and centroids.
pub const SIMILARITY_RESOLUTION: f64 = 1e-12;

/// Naive Bayes log scores closer than this count as ties.
pub const LOG_SCORE_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training needs at least two categories, found {0}")]
    TooFewCategories(usize),
    #[error("smoothing must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("the index vocabulary is empty")]
    EmptyVocabulary,
    #[error("k must be between 1 and {n} (the number of documents), got {k}")]
    InvalidK { k: usize, n: usize },
    #[error("no query term carries weight in the training vocabulary")]
    NoSignal,
    #[error("model was trained with a different analyzer than this index")]
    FingerprintMismatch,
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl From<std::io::Error> for ClassifyError {
    fn from(e: std::io::Error) -> Self {
        ClassifyError::Format(FormatError::Io(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evidence {
    /// Unnormalized log posterior, `ln P(c) + Σ ln P(t|c)`.
    LogPosterior(f64),
    /// Neighbour votes and the mean cosine similarity of the voters.
    Votes { count: usize, mean_similarity: f64 },
    /// Cosine similarity to the category centroid.
    Similarity(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCategory {
    pub category: String,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub category: String,
    pub evidence: Evidence,
    /// Every category of the model, best first.
    pub ranking: Vec<RankedCategory>,
}

impl Prediction {
    fn from_ranking(ranking: Vec<RankedCategory>) -> Self {
        let first = ranking
            .first()
            .expect("models have at least two categories");
        Prediction {
            category: first.category.clone(),
            evidence: first.evidence,
            ranking,
        }
    }
}

/// Sorts by score, best first. Runs of items within `tol` of the first item
/// of the run are then ordered by `tie`. Rounding noise in otherwise equal
/// scores therefore never decides an order.
fn rank_by<T>(
    items: &mut [T],
    score: impl Fn(&T) -> f64,
    tol: f64,
    tie: impl Fn(&T, &T) -> Ordering,
) {
    items.sort_by(|a, b| score(b).total_cmp(&score(a)));
    let mut start = 0;
    while start < items.len() {
        let head = score(&items[start]);
        let mut end = start + 1;
        while end < items.len() && head - score(&items[end]) <= tol {
            end += 1;
        }
        items[start..end].sort_by(&tie);
        start = end;
    }
}

fn category_index(index: &InvertedIndex) -> Result<(Vec<String>, Vec<usize>), ClassifyError> {
    let categories = index.categories().to_vec();
    if categories.len() < 2 {
        return Err(ClassifyError::TooFewCategories(categories.len()));
    }
    let position: HashMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let labels = index
        .docs()
        .iter()
        .map(|d| position[d.category.as_str()])
        .collect();
    Ok((categories, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel {
    categories: Vec<String>,
    priors: Vec<f64>,
    columns: BTreeMap<String, usize>,
    /// `cond[c][t]` = P(term t | category c).
    cond: Vec<Vec<f64>>,
    log_priors: Vec<f64>,
    log_cond: Vec<Vec<f64>>,
    alpha: f64,
}

impl NaiveBayesModel {
    /// Multinomial model: `P(c) = N_c / N` and
    /// `P(t|c) = (count(t, c) + α) / (tokens(c) + α·V)`, where `tokens(c)`
    /// sums the counts of the indexed vocabulary in `c`.
    pub fn train(index: &InvertedIndex, alpha: f64) -> Result<Self, ClassifyError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ClassifyError::InvalidSmoothing(alpha));
        }
        let (categories, labels) = category_index(index)?;
        let v = index.vocabulary_len();
        if v == 0 {
            return Err(ClassifyError::EmptyVocabulary);
        }
        let c_count = categories.len();
        let mut counts = vec![vec![0u64; v]; c_count];
        let mut columns = BTreeMap::new();
        for (col, (term, postings)) in index.terms().enumerate() {
            columns.insert(term.to_string(), col);
            for p in postings {
                counts[labels[p.doc.index()]][col] += u64::from(p.tf);
            }
        }
        let mut docs_per_cat = vec![0usize; c_count];
        for &l in &labels {
            docs_per_cat[l] += 1;
        }
        let n = labels.len() as f64;
        let priors: Vec<f64> = docs_per_cat.iter().map(|&k| k as f64 / n).collect();
        let cond: Vec<Vec<f64>> = counts
            .iter()
            .map(|row| {
                let tokens: u64 = row.iter().sum();
                let denom = tokens as f64 + alpha * v as f64;
                row.iter().map(|&c| (c as f64 + alpha) / denom).collect()
            })
            .collect();
        Ok(Self::assemble(categories, priors, columns, cond, alpha))
    }

    fn assemble(
        categories: Vec<String>,
        priors: Vec<f64>,
        columns: BTreeMap<String, usize>,
        cond: Vec<Vec<f64>>,
        alpha: f64,
    ) -> Self {
        let log_priors = priors.iter().map(|p| p.ln()).collect();
        let log_cond = cond
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect();
        NaiveBayesModel {
            categories,
            priors,
            columns,
            cond,
            log_priors,
            log_cond,
            alpha,
        }
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.columns.len()
    }

    pub fn prior(&self, category: &str) -> Option<f64> {
        let c = self.categories.iter().position(|x| x == category)?;
        Some(self.priors[c])
    }

    pub fn cond(&self, term: &str, category: &str) -> Option<f64> {
        let c = self.categories.iter().position(|x| x == category)?;
        Some(self.cond[c][*self.columns.get(term)?])
    }

    /// Log posterior score per category, in category order. Terms outside
    /// the vocabulary are skipped; repeated terms count repeatedly.
    pub fn log_scores(&self, terms: &[String]) -> Vec<f64> {
        let cols: Vec<usize> = terms
            .iter()
            .filter_map(|t| self.columns.get(t).copied())
            .collect();
        (0..self.categories.len())
            .map(|c| self.log_priors[c] + cols.iter().map(|&t| self.log_cond[c][t]).sum::<f64>())
            .collect()
    }

    /// Normalized posteriors per category, in category order.
    pub fn posteriors(&self, terms: &[String]) -> Vec<f64> {
        let scores = self.log_scores(terms);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / z).collect()
    }

    /// Empty input falls back to the priors.
    pub fn predict(&self, terms: &[String]) -> Prediction {
        let scores = self.log_scores(terms);
        let mut ranking: Vec<RankedCategory> = self
            .categories
            .iter()
            .zip(scores)
            .map(|(c, s)| RankedCategory {
                category: c.clone(),
                evidence: Evidence::LogPosterior(s),
            })
            .collect();
        let log_score = |r: &RankedCategory| match r.evidence {
            Evidence::LogPosterior(x) => x,
            _ => unreachable!(),
        };
        rank_by(&mut ranking, log_score, LOG_SCORE_RESOLUTION, |a, b| {
            a.category.cmp(&b.category)
        });
        Prediction::from_ranking(ranking)
    }

    fn encode(&self, enc: &mut Encoder) {
        enc.f64(self.alpha);
        enc.len_prefix(self.categories.len());
        for (c, p) in self.categories.iter().zip(&self.priors) {
            enc.str(c);
            enc.f64(*p);
        }
        enc.len_prefix(self.columns.len());
        for term in self.columns.keys() {
            enc.str(term);
        }
        for row in &self.cond {
            for p in row {
                enc.f64(*p);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, FormatError> {
        let alpha = dec.f64()?;
        let nc = dec.len_prefix(12)?;
        let mut categories = Vec::with_capacity(nc);
        let mut priors = Vec::with_capacity(nc);
        for _ in 0..nc {
            categories.push(dec.str()?);
            priors.push(dec.f64()?);
        }
        let v = dec.len_prefix(4)?;
        let mut columns = BTreeMap::new();
        for col in 0..v {
            columns.insert(dec.str()?, col);
        }
        if columns.len() != v {
            return Err(FormatError::Malformed("duplicate vocabulary term".into()));
        }
        let mut cond = Vec::with_capacity(nc);
        for _ in 0..nc {
            cond.push((0..v).map(|_| dec.f64()).collect::<Result<Vec<_>, _>>()?);
        }
        Ok(Self::assemble(categories, priors, columns, cond, alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnnVariant {
    /// Majority vote of the k most similar documents.
    #[default]
    Neighbors,
    /// Most similar category centroid (mean of unit document vectors).
    Centroid,
}

#[derive(Debug, Clone, PartialEq)]
struct SparseVec {
    /// Sorted by column.
    entries: Vec<(u32, f64)>,
    norm: f64,
}

impl SparseVec {
    fn new(entries: Vec<(u32, f64)>) -> Self {
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        SparseVec { entries, norm }
    }

    fn dot(&self, other: &SparseVec) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, b) = (self.entries[i], other.entries[j]);
            match a.0.cmp(&b.0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += a.1 * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    fn cosine(&self, other: &SparseVec) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            0.0
        } else {
            self.dot(other) / (self.norm * other.norm)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    variant: KnnVariant,
    categories: Vec<String>,
    labels: Vec<usize>,
    columns: BTreeMap<String, (u32, f64)>,
    vectors: Vec<SparseVec>,
    centroids: Vec<SparseVec>,
    parallelism: Parallelism,
}

impl KnnModel {
    /// Stores one `tf·ln(N/df)` vector per indexed document.
    pub fn train(
        index: &InvertedIndex,
        k: usize,
        variant: KnnVariant,
    ) -> Result<Self, ClassifyError> {
        let n = index.num_docs();
        if k == 0 || k > n {
            return Err(ClassifyError::InvalidK { k, n });
        }
        let (categories, labels) = category_index(index)?;
        if index.vocabulary_len() == 0 {
            return Err(ClassifyError::EmptyVocabulary);
        }
        let mut columns = BTreeMap::new();
        let mut entries: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (col, (term, postings)) in index.terms().enumerate() {
            let idf = (n as f64 / postings.len() as f64).ln();
            columns.insert(term.to_string(), (col as u32, idf));
            for p in postings {
                entries[p.doc.index()].push((col as u32, f64::from(p.tf) * idf));
            }
        }
        let vectors = entries.into_iter().map(SparseVec::new).collect();
        Ok(Self::assemble(
            k, variant, categories, labels, columns, vectors,
        ))
    }

    fn assemble(
        k: usize,
        variant: KnnVariant,
        categories: Vec<String>,
        labels: Vec<usize>,
        columns: BTreeMap<String, (u32, f64)>,
        vectors: Vec<SparseVec>,
    ) -> Self {
        let centroids = Self::centroids(categories.len(), &labels, &vectors);
        KnnModel {
            k,
            variant,
            categories,
            labels,
            columns,
            vectors,
            centroids,
            parallelism: Parallelism::default(),
        }
    }

    fn centroids(n_categories: usize, labels: &[usize], vectors: &[SparseVec]) -> Vec<SparseVec> {
        let mut sums: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n_categories];
        let mut members = vec![0usize; n_categories];
        for (v, &l) in vectors.iter().zip(labels) {
            if v.norm == 0.0 {
                continue;
            }
            members[l] += 1;
            for &(col, w) in &v.entries {
                *sums[l].entry(col).or_insert(0.0) += w / v.norm;
            }
        }
        sums.into_iter()
            .zip(members)
            .map(|(sum, m)| {
                let m = m.max(1) as f64;
                SparseVec::new(sum.into_iter().map(|(c, w)| (c, w / m)).collect())
            })
            .collect()
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn variant(&self) -> KnnVariant {
        self.variant
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Multiplies every stored document vector by `factor`.
    pub fn scale_vectors(&mut self, factor: f64) {
        for v in &mut self.vectors {
            for e in &mut v.entries {
                e.1 *= factor;
            }
            v.norm *= factor.abs();
        }
    }

    fn query_vector(&self, terms: &[String]) -> Result<SparseVec, ClassifyError> {
        let mut tf: BTreeMap<u32, (u32, f64)> = BTreeMap::new();
        for t in terms {
            if let Some(&(col, idf)) = self.columns.get(t) {
                tf.entry(col).or_insert((0, idf)).0 += 1;
            }
        }
        let v = SparseVec::new(
            tf.into_iter()
                .map(|(col, (count, idf))| (col, f64::from(count) * idf))
                .collect(),
        );
        if v.norm == 0.0 {
            Err(ClassifyError::NoSignal)
        } else {
            Ok(v)
        }
    }

    /// Cosine similarity of the query to every stored document, in document
    /// table order.
    pub fn similarities(&self, terms: &[String]) -> Result<Vec<f64>, ClassifyError> {
        let q = self.query_vector(terms)?;
        Ok(map_ordered(&self.vectors, self.parallelism, |d| {
            q.cosine(d)
        }))
    }

    pub fn predict(&self, terms: &[String]) -> Result<Prediction, ClassifyError> {
        match self.variant {
            KnnVariant::Neighbors => self.predict_neighbors(terms),
            KnnVariant::Centroid => self.predict_centroid(terms),
        }
    }

    fn predict_neighbors(&self, terms: &[String]) -> Result<Prediction, ClassifyError> {
        let sims = self.similarities(terms)?;
        let mut order: Vec<usize> = (0..sims.len()).collect();
        rank_by(
            &mut order,
            |&i| sims[i],
            SIMILARITY_RESOLUTION,
            |a, b| a.cmp(b),
        );
        let mut votes = vec![0usize; self.categories.len()];
        let mut sim_sum = vec![0.0f64; self.categories.len()];
        for &i in &order[..self.k] {
            votes[self.labels[i]] += 1;
            sim_sum[self.labels[i]] += sims[i];
        }
        let mut ranking: Vec<(usize, f64, &String)> = self
            .categories
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let mean = if votes[c] == 0 {
                    0.0
                } else {
                    sim_sum[c] / votes[c] as f64
                };
                (votes[c], mean, name)
            })
            .collect();
        ranking.sort_by_key(|r| std::cmp::Reverse(r.0));
        for group in ranking.chunk_by_mut(|a, b| a.0 == b.0) {
            rank_by(group, |r| r.1, SIMILARITY_RESOLUTION, |a, b| a.2.cmp(b.2));
        }
        Ok(Prediction::from_ranking(
            ranking
                .into_iter()
                .map(|(count, mean_similarity, name)| RankedCategory {
                    category: name.clone(),
                    evidence: Evidence::Votes {
                        count,
                        mean_similarity,
                    },
                })
                .collect(),
        ))
    }

    fn predict_centroid(&self, terms: &[String]) -> Result<Prediction, ClassifyError> {
        let q = self.query_vector(terms)?;
        let mut ranking: Vec<(f64, &String)> = self
            .centroids
            .iter()
            .zip(&self.categories)
            .map(|(c, name)| (q.cosine(c), name))
            .collect();
        rank_by(
            &mut ranking,
            |r| r.0,
            SIMILARITY_RESOLUTION,
            |a, b| a.1.cmp(b.1),
        );
        Ok(Prediction::from_ranking(
            ranking
                .into_iter()
                .map(|(s, name)| RankedCategory {
                    category: name.clone(),
                    evidence: Evidence::Similarity(s),
                })
                .collect(),
        ))
    }

    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.k as u64);
        enc.u8(match self.variant {
            KnnVariant::Neighbors => 0,
            KnnVariant::Centroid => 1,
        });
        enc.len_prefix(self.categories.len());
        for c in &self.categories {
            enc.str(c);
        }
        enc.len_prefix(self.columns.len());
        for (term, (_, idf)) in &self.columns {
            enc.str(term);
            enc.f64(*idf);
        }
        enc.len_prefix(self.vectors.len());
        for (v, &l) in self.vectors.iter().zip(&self.labels) {
            enc.u32(l as u32);
            enc.len_prefix(v.entries.len());
            for &(col, w) in &v.entries {
                enc.u32(col);
                enc.f64(w);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, FormatError> {
        let malformed = |m: &str| FormatError::Malformed(m.to_string());
        let k = dec.u64()? as usize;
        let variant = match dec.u8()? {
            0 => KnnVariant::Neighbors,
            1 => KnnVariant::Centroid,
            _ => return Err(malformed("unknown KNN variant")),
        };
        let nc = dec.len_prefix(4)?;
        let categories = (0..nc).map(|_| dec.str()).collect::<Result<Vec<_>, _>>()?;
        let v = dec.len_prefix(12)?;
        let mut columns = BTreeMap::new();
        for col in 0..v {
            let term = dec.str()?;
            columns.insert(term, (col as u32, dec.f64()?));
        }
        let n = dec.len_prefix(12)?;
        let mut labels = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n);
        for _ in 0..n {
            let l = dec.u32()? as usize;
            if l >= nc {
                return Err(malformed("label out of range"));
            }
            labels.push(l);
            let m = dec.len_prefix(12)?;
            let mut entries = Vec::with_capacity(m);
            for _ in 0..m {
                entries.push((dec.u32()?, dec.f64()?));
            }
            vectors.push(SparseVec::new(entries));
        }
        if k == 0 || k > n {
            return Err(malformed("k out of range"));
        }
        Ok(Self::assemble(
            k, variant, categories, labels, columns, vectors,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassifierKind {
    #[default]
    NaiveBayes,
    Knn,
    Centroid,
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nb" | "naive-bayes" => Ok(ClassifierKind::NaiveBayes),
            "knn" => Ok(ClassifierKind::Knn),
            "centroid" => Ok(ClassifierKind::Centroid),
            other => Err(format!(
                "unknown classifier {other:?} (expected nb, knn or centroid)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifierParams {
    pub kind: ClassifierKind,
    /// Naive Bayes smoothing.
    pub alpha: f64,
    /// KNN neighbour count, clamped to the number of documents.
    pub k: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            kind: ClassifierKind::NaiveBayes,
            alpha: 1.0,
            k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    NaiveBayes(NaiveBayesModel),
    Knn(KnnModel),
}

/// A trained model bound to the analyzer of the index it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    model: Model,
    fingerprint: [u8; 32],
}

impl Classifier {
    pub fn train(index: &InvertedIndex, params: &ClassifierParams) -> Result<Self, ClassifyError> {
        let k = params.k.min(index.num_docs());
        let model = match params.kind {
            ClassifierKind::NaiveBayes => {
                Model::NaiveBayes(NaiveBayesModel::train(index, params.alpha)?)
            }
            ClassifierKind::Knn => Model::Knn(KnnModel::train(index, k, KnnVariant::Neighbors)?),
            ClassifierKind::Centroid => {
                Model::Knn(KnnModel::train(index, k, KnnVariant::Centroid)?)
            }
        };
        Ok(Classifier {
            model,
            fingerprint: index.analyzer().fingerprint(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn kind(&self) -> ClassifierKind {
        match &self.model {
            Model::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            Model::Knn(m) if m.variant == KnnVariant::Centroid => ClassifierKind::Centroid,
            Model::Knn(_) => ClassifierKind::Knn,
        }
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn predict(&self, terms: &[String]) -> Result<Prediction, ClassifyError> {
        match &self.model {
            Model::NaiveBayes(m) => Ok(m.predict(terms)),
            Model::Knn(m) => m.predict(terms),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        match &self.model {
            Model::NaiveBayes(m) => {
                enc.u8(0);
                m.encode(&mut enc);
            }
            Model::Knn(m) => {
                enc.u8(1);
                m.encode(&mut enc);
            }
        }
        format::seal(
            MAGIC,
            MODEL_FORMAT_VERSION,
            &self.fingerprint,
            &enc.finish(),
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ClassifyError> {
        let (fingerprint, body) = format::unseal(bytes, MAGIC, MODEL_FORMAT_VERSION, "model")?;
        let mut dec = Decoder::new(body);
        let model = match dec.u8()? {
            0 => Model::NaiveBayes(NaiveBayesModel::decode(&mut dec)?),
            1 => Model::Knn(KnnModel::decode(&mut dec)?),
            _ => return Err(FormatError::Malformed("unknown model kind".into()).into()),
        };
        dec.finish()?;
        Ok(Classifier { model, fingerprint })
    }

    pub fn persist(&self, path: impl AsRef<Path>) -> Result<(), ClassifyError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Loads a model and checks that it was trained under `index`'s analyzer.
    pub fn load_for(path: impl AsRef<Path>, index: &InvertedIndex) -> Result<Self, ClassifyError> {
        let c = Self::from_bytes(&fs::read(path)?)?;
        if c.fingerprint != index.analyzer().fingerprint() {
            return Err(ClassifyError::FingerprintMismatch);
        }
        Ok(c)
    }
}

/// Predicts the category a query should be restricted to.
pub fn predict_query_category(
    classifier: &Classifier,
    query: &Query,
) -> Result<Prediction, ClassifyError> {
    classifier.predict(&query.terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Analyzer;
    use crate::corpus::Document;

    fn terms(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn rank_by_groups_rounding_noise() {
        let third = 1.0f64 / 3.0;
        let mut items = vec![
            ("b", 1.0 - 2.0 * third),
            ("c", 0.1),
            ("a", third),
            ("d", 0.9),
        ];
        assert!(items[0].1 > items[2].1);
        rank_by(&mut items, |x| x.1, 1e-12, |x, y| x.0.cmp(y.0));
        let names: Vec<&str> = items.iter().map(|x| x.0).collect();
        assert_eq!(names, ["d", "a", "b", "c"]);
    }

    fn index(docs: &[(&str, &str, &str)]) -> InvertedIndex {
        let docs: Vec<Document> = docs
            .iter()
            .map(|(c, n, t)| Document::new(*c, n, *t))
            .collect();
        InvertedIndex::build(&docs, Analyzer::default()).unwrap()
    }

    #[test]
    fn nb_smoothing_by_hand() {
        let idx = index(&[("A", "a", "x x y"), ("B", "b", "y z")]);
        let m = NaiveBayesModel::train(&idx, 1.0).unwrap();
        assert_eq!(m.vocab_size(), 3);
        assert!((m.cond("x", "A").unwrap() - 0.5).abs() < 1e-15);
        // B = "y z": (0 + 1) / (2 + 3)
        assert!((m.cond("x", "B").unwrap() - 1.0 / 5.0).abs() < 1e-15);
        assert!((m.prior("A").unwrap() - 0.5).abs() < 1e-15);
        let p = m.predict(&terms("x"));
        assert_eq!(p.category, "A");
        let Evidence::LogPosterior(s) = p.evidence else {
            panic!()
        };
        assert!((s - (0.5f64.ln() + 0.5f64.ln())).abs() < 1e-12);
        let Evidence::LogPosterior(s_b) = p.ranking[1].evidence else {
            panic!()
        };
        assert!((s_b - (0.5f64.ln() + (1.0f64 / 5.0).ln())).abs() < 1e-12);
    }

    #[test]
    fn nb_distributions_sum_to_one() {
        let idx = index(&[
            ("A", "a", "x x y q"),
            ("B", "b", "y z"),
            ("B", "c", "z z w"),
        ]);
        let m = NaiveBayesModel::train(&idx, 0.5).unwrap();
        assert!((m.priors.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for row in &m.cond {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn nb_symmetric_categories_give_uniform_posteriors() {
        let idx = index(&[("A", "a", "x y"), ("B", "b", "x y")]);
        let m = NaiveBayesModel::train(&idx, 1.0).unwrap();
        for q in ["x", "y y x", "unknown"] {
            let post = m.posteriors(&terms(q));
            assert!((post[0] - 0.5).abs() < 1e-12 && (post[1] - 0.5).abs() < 1e-12);
            // exact tie goes to the lower name
            assert_eq!(m.predict(&terms(q)).category, "A");
        }
    }

    #[test]
    fn nb_large_alpha_follows_priors() {
        let idx = index(&[("A", "a", "x x x"), ("B", "b", "y"), ("B", "c", "y")]);
        let m = NaiveBayesModel::train(&idx, 1e9).unwrap();
        assert!((m.cond("x", "A").unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(m.predict(&terms("x x")).category, "B");
    }

    #[test]
    fn nb_out_of_vocabulary_and_empty_fall_back_to_priors() {
        let idx = index(&[("A", "a", "x"), ("B", "b", "y"), ("B", "c", "y")]);
        let m = NaiveBayesModel::train(&idx, 1.0).unwrap();
        assert_eq!(m.predict(&terms("nope never")).category, "B");
        assert_eq!(m.predict(&[]).category, "B");
    }

    #[test]
    fn nb_training_errors() {
        let idx = index(&[("A", "a", "x"), ("A", "b", "y")]);
        assert!(matches!(
            NaiveBayesModel::train(&idx, 1.0),
            Err(ClassifyError::TooFewCategories(1))
        ));
        let idx = index(&[("A", "a", "x"), ("B", "b", "y")]);
        assert!(matches!(
            NaiveBayesModel::train(&idx, 0.0),
            Err(ClassifyError::InvalidSmoothing(_))
        ));
    }

    #[test]
    fn knn_self_match() {
        let idx = index(&[
            ("A", "a1", "law court judge"),
            ("A", "a2", "court appeal"),
            ("B", "b1", "budget salary"),
            ("B", "b2", "salary grant budget"),
        ]);
        let m = KnnModel::train(&idx, 1, KnnVariant::Neighbors).unwrap();
        assert_eq!(m.predict(&terms("budget salary")).unwrap().category, "B");
        assert_eq!(m.predict(&terms("law court judge")).unwrap().category, "A");
    }

    #[test]
    fn knn_by_hand_four_docs() {
        // docs (in id order): A/1 = a c, A/2 = a, B/1 = b d, B/2 = a b; N = 4
        // df: a 3, b 2, c 1, d 1
        let (ia, ib, ic) = ((4.0f64 / 3.0).ln(), 2f64.ln(), 4f64.ln());
        let idx = index(&[
            ("A", "1", "a c"),
            ("A", "2", "a"),
            ("B", "1", "b d"),
            ("B", "2", "a b"),
        ]);

        // query "a b": q = (ia, ib, 0, 0)
        let qn = (ia * ia + ib * ib).sqrt();
        let expected = [
            ia * ia / (qn * (ia * ia + ic * ic).sqrt()), // 0.0779
            ia / qn,                                     // 0.3833
            ib * ib / (qn * (ib * ib + ic * ic).sqrt()), // 0.4131
            1.0,
        ];
        let m3 = KnnModel::train(&idx, 3, KnnVariant::Neighbors).unwrap();
        let sims = m3.similarities(&terms("a b")).unwrap();
        for (s, e) in sims.iter().zip(expected) {
            assert!((s - e).abs() < 1e-12, "{s} vs {e}");
        }
        // k=3: B/2, B/1, A/2 -> B with two votes
        let p = m3.predict(&terms("a b")).unwrap();
        assert_eq!(p.category, "B");
        let Evidence::Votes {
            count,
            mean_similarity,
        } = p.evidence
        else {
            panic!()
        };
        assert_eq!(count, 2);
        assert!((mean_similarity - (expected[3] + expected[2]) / 2.0).abs() < 1e-12);
        // k=4: 2-2 vote, B has the higher mean similarity
        let m4 = KnnModel::train(&idx, 4, KnnVariant::Neighbors).unwrap();
        let p = m4.predict(&terms("a b")).unwrap();
        assert_eq!(p.category, "B");
        let Evidence::Votes { count, .. } = p.ranking[1].evidence else {
            panic!()
        };
        assert_eq!((p.ranking[1].category.as_str(), count), ("A", 2));

        // query "a c": A/1 = 1, A/2 = ia / |q|, B/1 = 0, B/2 = 0.0779 -> k=3 picks A/1, A/2, B/2
        let p = m3.predict(&terms("a c")).unwrap();
        assert_eq!(p.category, "A");
        let Evidence::Votes { count, .. } = p.evidence else {
            panic!()
        };
        assert_eq!(count, 2);
    }

    #[test]
    fn knn_degenerate_tie() {
        // every document identical: all similarities equal, votes 2-2, means equal
        let idx = index(&[
            ("B", "1", "x y"),
            ("B", "2", "x y"),
            ("A", "1", "x y"),
            ("A", "2", "x y"),
            ("C", "1", "z"),
        ]);
        let m = KnnModel::train(&idx, 4, KnnVariant::Neighbors).unwrap();
        let p = m.predict(&terms("x")).unwrap();
        assert_eq!(p.category, "A");
        assert_eq!(p.ranking.len(), 3);
        assert_eq!(p.ranking[2].category, "C");
    }

    #[test]
    fn knn_errors() {
        let idx = index(&[("A", "a", "x y"), ("B", "b", "x z")]);
        assert!(matches!(
            KnnModel::train(&idx, 3, KnnVariant::Neighbors),
            Err(ClassifyError::InvalidK { k: 3, n: 2 })
        ));
        let m = KnnModel::train(&idx, 1, KnnVariant::Neighbors).unwrap();
        assert!(matches!(
            m.predict(&terms("nothing")),
            Err(ClassifyError::NoSignal)
        ));
        // "x" occurs everywhere: ln(N/df) = 0
        assert!(matches!(
            m.predict(&terms("x")),
            Err(ClassifyError::NoSignal)
        ));
    }

    #[test]
    fn knn_scale_invariance() {
        let idx = index(&[
            ("A", "1", "a c c"),
            ("A", "2", "a e"),
            ("B", "1", "b d"),
            ("B", "2", "a b d d"),
        ]);
        let mut m = KnnModel::train(&idx, 3, KnnVariant::Neighbors).unwrap();
        let before = m.predict(&terms("a d")).unwrap().category;
        m.scale_vectors(7.5);
        assert_eq!(m.predict(&terms("a d")).unwrap().category, before);
    }

    #[test]
    fn centroid_variant() {
        let idx = index(&[
            ("A", "1", "court judge"),
            ("A", "2", "court appeal"),
            ("B", "1", "budget salary"),
            ("B", "2", "salary grant"),
        ]);
        let m = KnnModel::train(&idx, 1, KnnVariant::Centroid).unwrap();
        assert_eq!(m.predict(&terms("court")).unwrap().category, "A");
        assert_eq!(m.predict(&terms("salary grant")).unwrap().category, "B");
    }

    #[test]
    fn model_round_trip_and_fingerprint() {
        let idx = index(&[
            ("A", "1", "court judge"),
            ("B", "1", "budget salary"),
            ("B", "2", "salary"),
        ]);
        for kind in [
            ClassifierKind::NaiveBayes,
            ClassifierKind::Knn,
            ClassifierKind::Centroid,
        ] {
            let c = Classifier::train(
                &idx,
                &ClassifierParams {
                    kind,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(c.kind(), kind);
            let back = Classifier::from_bytes(&c.to_bytes()).unwrap();
            assert_eq!(back.to_bytes(), c.to_bytes());
            assert_eq!(
                back.predict(&terms("salary")).unwrap(),
                c.predict(&terms("salary")).unwrap()
            );
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let c = Classifier::train(&idx, &ClassifierParams::default()).unwrap();
        c.persist(&path).unwrap();
        Classifier::load_for(&path, &idx).unwrap();
        let other = InvertedIndex::build(
            &[Document::new("A", "1", "x"), Document::new("B", "1", "y")],
            Analyzer::new(crate::analysis::AnalyzerConfig::raw()),
        )
        .unwrap();
        assert!(matches!(
            Classifier::load_for(&path, &other),
            Err(ClassifyError::FingerprintMismatch)
        ));
    }
}
