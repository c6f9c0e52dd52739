//! Inverted index with per-document category metadata.
//!
//! Documents are stored in a table sorted by `doc_id` and addressed by their
//! position in it ([`DocOrd`]), so posting lists ordered by ordinal are also
//! ordered by `doc_id`. The category lives only in the document table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::analysis::Analyzer;
use crate::corpus::Document;
use crate::format::{self, Decoder, Encoder, FormatError};
use crate::par::{map_ordered, Parallelism};

const MAGIC: &[u8; 8] = b"CATSIDX\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an index from zero documents")]
    NoDocuments,
    #[error("duplicate document id {0:?} in corpus")]
    DuplicateDocument(String),
    #[error("too many documents for a 32-bit document table")]
    TooManyDocuments,
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("index fingerprint does not match its analyzer section")]
    FingerprintMismatch,
}

impl From<std::io::Error> for IndexError {
    fn from(e: std::io::Error) -> Self {
        IndexError::Format(FormatError::Io(e))
    }
}

/// Position of a document in the index's document table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DocOrd(pub u32);

impl DocOrd {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: DocOrd,
    /// Occurrences of the term in the document, at least 1.
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocEntry {
    pub id: String,
    pub path: String,
    pub category: String,
    /// Number of analyzed terms in the document at build time.
    pub token_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvertedIndex {
    analyzer: Analyzer,
    docs: Vec<DocEntry>,
    vocabulary: BTreeMap<String, Vec<Posting>>,
    categories: Vec<String>,
    df_threshold: u32,
    /// Terms removed by pruning. Queries skip them like stopwords.
    pruned: BTreeSet<String>,
}

fn term_counts(analyzer: &Analyzer, text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for term in analyzer.analyze(text) {
        *counts.entry(term).or_insert(0u32) += 1;
    }
    counts
}

fn categories_of(docs: &[DocEntry]) -> Vec<String> {
    docs.iter()
        .map(|d| d.category.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

impl InvertedIndex {
    pub fn build(documents: &[Document], analyzer: Analyzer) -> Result<Self, IndexError> {
        Self::build_with(documents, analyzer, Parallelism::default())
    }

    /// Analyzes documents (in parallel when requested) and merges their term
    /// counts into posting lists in `doc_id` order.
    pub fn build_with(
        documents: &[Document],
        analyzer: Analyzer,
        parallelism: Parallelism,
    ) -> Result<Self, IndexError> {
        if documents.is_empty() {
            return Err(IndexError::NoDocuments);
        }
        if u32::try_from(documents.len()).is_err() {
            return Err(IndexError::TooManyDocuments);
        }
        let mut order: Vec<&Document> = documents.iter().collect();
        order.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if let Some(w) = order.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
            return Err(IndexError::DuplicateDocument(w[0].doc_id.clone()));
        }

        let counts = map_ordered(&order, parallelism, |d| term_counts(&analyzer, &d.text));

        let mut vocabulary: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut docs = Vec::with_capacity(order.len());
        for (ord, (doc, counts)) in order.iter().zip(counts).enumerate() {
            let doc_ord = DocOrd(ord as u32);
            let mut token_count = 0u64;
            for (term, tf) in counts {
                token_count += u64::from(tf);
                vocabulary
                    .entry(term)
                    .or_default()
                    .push(Posting { doc: doc_ord, tf });
            }
            docs.push(DocEntry {
                id: doc.doc_id.clone(),
                path: doc.path.to_string_lossy().into_owned(),
                category: doc.category.clone(),
                token_count,
            });
        }
        let categories = categories_of(&docs);
        Ok(InvertedIndex {
            analyzer,
            docs,
            vocabulary,
            categories,
            df_threshold: 1,
            pruned: BTreeSet::new(),
        })
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn doc(&self, ord: DocOrd) -> &DocEntry {
        &self.docs[ord.index()]
    }

    pub fn doc_ord(&self, doc_id: &str) -> Option<DocOrd> {
        self.docs
            .binary_search_by(|d| d.id.as_str().cmp(doc_id))
            .ok()
            .map(|i| DocOrd(i as u32))
    }

    /// Distinct categories in name order.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn has_category(&self, category: &str) -> bool {
        self.categories
            .binary_search_by(|c| c.as_str().cmp(category))
            .is_ok()
    }

    /// Terms in lexicographic order with their posting lists.
    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.vocabulary
            .iter()
            .map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.vocabulary.get(term).map(Vec::as_slice)
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.vocabulary.contains_key(term)
    }

    pub fn df(&self, term: &str) -> usize {
        self.vocabulary.get(term).map_or(0, Vec::len)
    }

    pub fn tf(&self, term: &str, doc: DocOrd) -> u32 {
        self.postings(term)
            .and_then(|p| {
                p.binary_search_by_key(&doc, |x| x.doc)
                    .ok()
                    .map(|i| p[i].tf)
            })
            .unwrap_or(0)
    }

    /// The document-frequency threshold applied so far (1 when unpruned).
    pub fn df_threshold(&self) -> u32 {
        self.df_threshold
    }

    /// Keeps only the terms whose document frequency is at least `threshold`.
    ///
    /// The document table, including each `token_count`, is left untouched so
    /// that N and per-term df keep their unpruned meaning. A threshold of 0 is
    /// treated as 1.
    pub fn prune_by_df(&self, threshold: u32) -> InvertedIndex {
        let threshold = threshold.max(1);
        let mut vocabulary = BTreeMap::new();
        let mut pruned = self.pruned.clone();
        for (t, p) in &self.vocabulary {
            if p.len() >= threshold as usize {
                vocabulary.insert(t.clone(), p.clone());
            } else {
                pruned.insert(t.clone());
            }
        }
        InvertedIndex {
            analyzer: self.analyzer.clone(),
            docs: self.docs.clone(),
            vocabulary,
            categories: self.categories.clone(),
            df_threshold: self.df_threshold.max(threshold),
            pruned,
        }
    }

    /// True if `term` was indexed once and later removed by [`prune_by_df`].
    ///
    /// [`prune_by_df`]: InvertedIndex::prune_by_df
    pub fn is_pruned(&self, term: &str) -> bool {
        self.pruned.contains(term)
    }

    pub fn pruned_terms(&self) -> impl Iterator<Item = &str> {
        self.pruned.iter().map(String::as_str)
    }

    /// Checks the structural invariants. Token conservation is only checked
    /// on an unpruned index.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.docs.len();
        if self.docs.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err("document table not strictly sorted by id".into());
        }
        let mut per_doc = vec![0u64; n];
        for (term, postings) in &self.vocabulary {
            if postings.is_empty() || postings.len() > n {
                return Err(format!("df({term}) = {} outside [1, {n}]", postings.len()));
            }
            if (postings.len() as u32) < self.df_threshold {
                return Err(format!("term {term} survives below the df threshold"));
            }
            for w in postings.windows(2) {
                if w[0].doc >= w[1].doc {
                    return Err(format!("postings of {term} not strictly sorted"));
                }
            }
            for p in postings {
                if p.tf == 0 {
                    return Err(format!("zero tf in postings of {term}"));
                }
                let slot = per_doc
                    .get_mut(p.doc.index())
                    .ok_or_else(|| format!("posting of {term} names unknown doc {}", p.doc.0))?;
                *slot += u64::from(p.tf);
            }
        }
        if let Some(t) = self
            .pruned
            .iter()
            .find(|t| self.vocabulary.contains_key(*t))
        {
            return Err(format!("term {t} is both indexed and pruned"));
        }
        if self.df_threshold == 1 && !self.pruned.is_empty() {
            return Err("pruned terms without a df threshold".into());
        }
        if self.df_threshold == 1 {
            for (doc, total) in self.docs.iter().zip(&per_doc) {
                if doc.token_count != *total {
                    return Err(format!(
                        "token count of {} is {} but postings sum to {total}",
                        doc.id, doc.token_count
                    ));
                }
            }
        }
        if self.categories != categories_of(&self.docs) {
            return Err("category list out of sync with document table".into());
        }
        Ok(())
    }

    /// Serializes the index into the documented binary format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64(self.docs.len() as u64);
        enc.u64(self.vocabulary.len() as u64);
        enc.u32(self.df_threshold);
        self.analyzer.encode(&mut enc);
        for d in &self.docs {
            enc.str(&d.id);
            enc.str(&d.path);
            enc.str(&d.category);
            enc.u64(d.token_count);
        }
        for (term, postings) in &self.vocabulary {
            enc.str(term);
            enc.u32(postings.len() as u32);
            for p in postings {
                enc.u32(p.doc.0);
                enc.u32(p.tf);
            }
        }
        enc.len_prefix(self.pruned.len());
        for t in &self.pruned {
            enc.str(t);
        }
        format::seal(
            MAGIC,
            FORMAT_VERSION,
            &self.analyzer.fingerprint(),
            &enc.finish(),
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let (fingerprint, body) = format::unseal(bytes, MAGIC, FORMAT_VERSION, "index")?;
        let mut dec = Decoder::new(body);
        let n = dec.u64()?;
        let vocab_size = dec.u64()?;
        let df_threshold = dec.u32()?;
        let analyzer = Analyzer::decode(&mut dec)?;
        if analyzer.fingerprint() != fingerprint {
            return Err(IndexError::FingerprintMismatch);
        }
        let malformed = |m: &str| IndexError::Format(FormatError::Malformed(m.to_string()));
        if n == 0 || n > u64::from(u32::MAX) || n.saturating_mul(20) > body.len() as u64 {
            return Err(malformed("document count out of range"));
        }
        let mut docs = Vec::with_capacity(n as usize);
        for _ in 0..n {
            docs.push(DocEntry {
                id: dec.str()?,
                path: dec.str()?,
                category: dec.str()?,
                token_count: dec.u64()?,
            });
        }
        if vocab_size.saturating_mul(8) > body.len() as u64 {
            return Err(malformed("vocabulary size out of range"));
        }
        let mut vocabulary = BTreeMap::new();
        let mut prev: Option<String> = None;
        for _ in 0..vocab_size {
            let term = dec.str()?;
            if prev.as_ref().is_some_and(|p| *p >= term) {
                return Err(malformed("terms not in strictly increasing order"));
            }
            let df = dec.u32()? as usize;
            if df == 0 || df > docs.len() {
                return Err(malformed("posting list length out of range"));
            }
            let mut postings = Vec::with_capacity(df);
            for _ in 0..df {
                postings.push(Posting {
                    doc: DocOrd(dec.u32()?),
                    tf: dec.u32()?,
                });
            }
            prev = Some(term.clone());
            vocabulary.insert(term, postings);
        }
        let n_pruned = dec.len_prefix(4)?;
        let mut pruned = BTreeSet::new();
        for _ in 0..n_pruned {
            pruned.insert(dec.str()?);
        }
        if pruned.len() != n_pruned {
            return Err(malformed("duplicate pruned term"));
        }
        dec.finish()?;
        let categories = categories_of(&docs);
        let index = InvertedIndex {
            analyzer,
            docs,
            vocabulary,
            categories,
            df_threshold,
            pruned,
        };
        index.check_invariants().map_err(|m| malformed(&m))?;
        Ok(index)
    }

    pub fn persist(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Brute-force term counts per document, independent of the index path.
#[doc(hidden)]
pub fn naive_counts(
    documents: &[Document],
    analyzer: &Analyzer,
) -> HashMap<String, HashMap<String, u32>> {
    documents
        .iter()
        .map(|d| {
            let mut m = HashMap::new();
            for t in analyzer.analyze(&d.text) {
                *m.entry(t).or_insert(0) += 1;
            }
            (d.doc_id.clone(), m)
        })
        .collect()
}
