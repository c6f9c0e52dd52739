//! Set-based precision/recall and the before/after classification report.
//!
//! Metrics are kept as exact fractions of counts. A fraction prints
//! unreduced (`2/12`, not `1/6`) so reports read like the hit counts they
//! come from; equality and ordering compare values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::BufRead;

use num_rational::Ratio;
use thiserror::Error;

use crate::classify::{Classifier, ClassifierKind};
use crate::index::InvertedIndex;
use crate::par::{map_ordered, Parallelism};
use crate::search::{search, MatchMode, Query, Scorer};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query {0:?} has no relevant documents; recall is undefined")]
    NoRelevant(String),
    #[error("{file} line {line}: {message}")]
    Parse {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("qrels line {line}: unknown document {doc_id:?}")]
    UnknownDocument { line: usize, doc_id: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "fraction with zero denominator");
        Fraction { num, den }
    }

    pub fn ratio(self) -> Ratio<u64> {
        Ratio::new(self.num, self.den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.ratio() == other.ratio()
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ratio().cmp(&other.ratio())
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == self.den {
            write!(f, "1")
        } else if self.num == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Precision convention when nothing is retrieved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyRetrieved {
    /// 0/0 counts as perfect precision.
    #[default]
    Vacuous,
    Zero,
}

/// `(|rel ∩ ret| / |ret|, |rel ∩ ret| / |rel|)` with the vacuous convention
/// for an empty retrieved set.
pub fn precision_recall<T: Ord>(
    retrieved: &BTreeSet<T>,
    relevant: &BTreeSet<T>,
) -> Result<(Fraction, Fraction), EvalError> {
    let e = evaluate("", retrieved, relevant, EmptyRetrieved::Vacuous)?;
    Ok((e.precision, e.recall))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryEval {
    pub query_id: String,
    pub retrieved: usize,
    pub relevant: usize,
    pub hit: usize,
    pub precision: Fraction,
    pub recall: Fraction,
    /// Nothing was retrieved and the precision is a convention.
    pub vacuous: bool,
}

pub fn evaluate<T: Ord>(
    query_id: &str,
    retrieved: &BTreeSet<T>,
    relevant: &BTreeSet<T>,
    empty: EmptyRetrieved,
) -> Result<QueryEval, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::NoRelevant(query_id.to_string()));
    }
    let hit = retrieved.intersection(relevant).count();
    let vacuous = retrieved.is_empty();
    let precision = if vacuous {
        match empty {
            EmptyRetrieved::Vacuous => Fraction::new(1, 1),
            EmptyRetrieved::Zero => Fraction::new(0, 1),
        }
    } else {
        Fraction::new(hit as u64, retrieved.len() as u64)
    };
    Ok(QueryEval {
        query_id: query_id.to_string(),
        retrieved: retrieved.len(),
        relevant: relevant.len(),
        hit,
        precision,
        recall: Fraction::new(hit as u64, relevant.len() as u64),
        vacuous,
    })
}

fn split_tsv(line: &str) -> Vec<&str> {
    line.split('\t').collect()
}

fn content_lines<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, String), std::io::Error>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l.trim_end_matches('\r').to_string())))
        .filter(|r| match r {
            Ok((_, l)) => !l.trim().is_empty() && !l.starts_with('#'),
            Err(_) => true,
        })
}

/// Relevance judgments: `query_id<TAB>doc_id` per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeSet<String>>,
    lines: Vec<(usize, String)>,
}

impl Qrels {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut q = Qrels::default();
        for item in content_lines(reader) {
            let (line, text) = item?;
            let fields = split_tsv(&text);
            let [query, doc] = fields[..] else {
                return Err(EvalError::Parse {
                    file: "qrels",
                    line,
                    message: format!("expected 2 tab-separated fields, found {}", fields.len()),
                });
            };
            let (query, doc) = (query.trim(), doc.trim());
            if query.is_empty() || doc.is_empty() {
                return Err(EvalError::Parse {
                    file: "qrels",
                    line,
                    message: "empty field".into(),
                });
            }
            q.add(query, doc);
            q.lines.push((line, doc.to_string()));
        }
        Ok(q)
    }

    pub fn add(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into());
    }

    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.judgments.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    /// Every judged document must exist in `index`.
    pub fn validate(&self, index: &InvertedIndex) -> Result<(), EvalError> {
        for (line, doc) in &self.lines {
            if index.doc_ord(doc).is_none() {
                return Err(EvalError::UnknownDocument {
                    line: *line,
                    doc_id: doc.clone(),
                });
            }
        }
        for docs in self.judgments.values() {
            if let Some(doc) = docs.iter().find(|d| index.doc_ord(d).is_none()) {
                return Err(EvalError::UnknownDocument {
                    line: 0,
                    doc_id: doc.clone(),
                });
            }
        }
        Ok(())
    }
}

/// One line of a queries file: `query_id<TAB>text[<TAB>category]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub id: String,
    pub text: String,
    pub category: Option<String>,
}

impl QuerySpec {
    pub fn parse_all<R: BufRead>(reader: R) -> Result<Vec<QuerySpec>, EvalError> {
        let mut out: Vec<QuerySpec> = Vec::new();
        let mut seen = BTreeSet::new();
        for item in content_lines(reader) {
            let (line, text) = item?;
            let fields = split_tsv(&text);
            let err = |message: String| EvalError::Parse {
                file: "queries",
                line,
                message,
            };
            if !(2..=3).contains(&fields.len()) {
                return Err(err(format!(
                    "expected 2 or 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let id = fields[0].trim().to_string();
            if id.is_empty() {
                return Err(err("empty query id".into()));
            }
            if !seen.insert(id.clone()) {
                return Err(err(format!("duplicate query id {id:?}")));
            }
            let category = fields
                .get(2)
                .map(|c| c.trim())
                .filter(|c| !c.is_empty())
                .map(String::from);
            out.push(QuerySpec {
                id,
                text: fields[1].to_string(),
                category,
            });
        }
        Ok(out)
    }
}

/// Where the category of the "after" search comes from.
#[derive(Debug, Clone, Copy)]
pub enum Routing<'a> {
    /// The category column of the queries file.
    Explicit,
    Predicted(&'a Classifier),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingKind {
    Explicit,
    Predicted(ClassifierKind),
}

impl fmt::Display for RoutingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutingKind::Explicit => write!(f, "explicit"),
            RoutingKind::Predicted(ClassifierKind::NaiveBayes) => {
                write!(f, "predicted (naive bayes)")
            }
            RoutingKind::Predicted(ClassifierKind::Knn) => write!(f, "predicted (knn)"),
            RoutingKind::Predicted(ClassifierKind::Centroid) => write!(f, "predicted (centroid)"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub scorer: Scorer,
    pub mode: MatchMode,
    pub empty: EmptyRetrieved,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowEval {
    pub category: String,
    pub before: QueryEval,
    pub after: QueryEval,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub query_id: String,
    pub text: String,
    pub outcome: Result<RowEval, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub routing: RoutingKind,
    /// Means over rows that evaluated successfully; `None` if there are none.
    pub mean_precision_before: Option<f64>,
    pub mean_precision_after: Option<f64>,
}

pub const REPORT_COLUMNS: [&str; 5] = [
    "query",
    "PRE_before",
    "RECALL_before",
    "PRE_after",
    "RECALL_after",
];

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn evaluate_row(
    index: &InvertedIndex,
    spec: &QuerySpec,
    qrels: &Qrels,
    routing: Routing<'_>,
    options: &EvalOptions,
) -> Result<RowEval, String> {
    let relevant = qrels
        .relevant(&spec.id)
        .ok_or_else(|| EvalError::NoRelevant(spec.id.clone()).to_string())?;
    let query = Query::for_index(&spec.text, index)
        .with_scorer(options.scorer)
        .with_mode(options.mode);
    let category = match routing {
        Routing::Explicit => spec
            .category
            .clone()
            .ok_or_else(|| "no category given for explicit routing".to_string())?,
        Routing::Predicted(classifier) => {
            classifier
                .predict(&query.terms)
                .map_err(|e| format!("category prediction failed: {e}"))?
                .category
        }
    };
    let before = search(index, &query).map_err(|e| e.to_string())?;
    let after = search(index, &query.clone().with_category(Some(category.clone())))
        .map_err(|e| e.to_string())?;
    let before = evaluate(&spec.id, &before.doc_ids(), relevant, options.empty)
        .map_err(|e| e.to_string())?;
    let after =
        evaluate(&spec.id, &after.doc_ids(), relevant, options.empty).map_err(|e| e.to_string())?;
    Ok(RowEval {
        category,
        before,
        after,
    })
}

/// Runs every query with and without its category restriction and scores
/// both result sets against `qrels`. Per-query failures become error rows.
pub fn run_comparison(
    index: &InvertedIndex,
    queries: &[QuerySpec],
    qrels: &Qrels,
    routing: Routing<'_>,
    options: &EvalOptions,
) -> Result<ComparisonReport, EvalError> {
    qrels.validate(index)?;
    let rows: Vec<ReportRow> = map_ordered(queries, options.parallelism, |spec| ReportRow {
        query_id: spec.id.clone(),
        text: spec.text.clone(),
        outcome: evaluate_row(index, spec, qrels, routing, options),
    });
    let ok = || rows.iter().filter_map(|r| r.outcome.as_ref().ok());
    Ok(ComparisonReport {
        mean_precision_before: mean(ok().map(|r| r.before.precision.to_f64())),
        mean_precision_after: mean(ok().map(|r| r.after.precision.to_f64())),
        routing: match routing {
            Routing::Explicit => RoutingKind::Explicit,
            Routing::Predicted(c) => RoutingKind::Predicted(c.kind()),
        },
        rows,
    })
}

fn pad(s: &str, width: usize) -> String {
    let n = s.chars().count();
    format!("{s}{}", " ".repeat(width.saturating_sub(n)))
}

impl ComparisonReport {
    pub fn errors(&self) -> impl Iterator<Item = (&str, &str)> {
        self.rows.iter().filter_map(|r| {
            r.outcome
                .as_ref()
                .err()
                .map(|e| (r.query_id.as_str(), e.as_str()))
        })
    }

    /// Tab-separated report, one row per query; failed rows carry `NA`.
    pub fn to_tsv(&self) -> String {
        let mut out = REPORT_COLUMNS.join("\t");
        out.push('\n');
        for row in &self.rows {
            let cells = match &row.outcome {
                Ok(r) => [
                    r.before.precision,
                    r.before.recall,
                    r.after.precision,
                    r.after.recall,
                ]
                .map(|f| f.to_string()),
                Err(_) => ["NA", "NA", "NA", "NA"].map(String::from),
            };
            let _ = writeln!(out, "{}\t{}", row.query_id, cells.join("\t"));
        }
        out
    }

    /// Aligned plain-text table with decimals, the routed category, means
    /// and a list of failed rows.
    pub fn to_table(&self) -> String {
        let cell = |f: Fraction, vacuous: bool| {
            format!("{f} ({:.4}){}", f.to_f64(), if vacuous { "*" } else { "" })
        };
        let mut header: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.push("category".into());
        let mut grid = vec![header];
        for row in &self.rows {
            let mut line = vec![row.query_id.clone()];
            match &row.outcome {
                Ok(r) => {
                    line.push(cell(r.before.precision, r.before.vacuous));
                    line.push(cell(r.before.recall, false));
                    line.push(cell(r.after.precision, r.after.vacuous));
                    line.push(cell(r.after.recall, false));
                    line.push(r.category.clone());
                }
                Err(_) => line.extend(["error", "", "", "", ""].map(String::from)),
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in grid.iter().enumerate() {
            let line: Vec<String> = row.iter().zip(&widths).map(|(s, w)| pad(s, *w)).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        let fmt_mean = |m: Option<f64>| m.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "\nmean precision: before {}, after {}",
            fmt_mean(self.mean_precision_before),
            fmt_mean(self.mean_precision_after)
        );
        let _ = writeln!(out, "routing: {}", self.routing);
        if self.rows.iter().any(|r| {
            r.outcome
                .as_ref()
                .is_ok_and(|e| e.before.vacuous || e.after.vacuous)
        }) {
            let _ = writeln!(out, "* nothing retrieved; precision set by convention");
        }
        for (id, err) in self.errors() {
            let _ = writeln!(out, "error in {id}: {err}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Analyzer;
    use crate::corpus::Document;

    fn set(range: std::ops::Range<u32>) -> BTreeSet<u32> {
        range.collect()
    }

    #[test]
    fn table_examples() {
        assert_eq!(
            precision_recall(&set(0..3), &set(0..1)).unwrap(),
            (Fraction::new(1, 3), Fraction::new(1, 1))
        );
        let (p, r) = precision_recall(&set(0..12), &set(0..2)).unwrap();
        assert_eq!((p.to_string(), r.to_string()), ("2/12".into(), "1".into()));
        let (p, _) = precision_recall(&set(0..4), &set(0..2)).unwrap();
        assert_eq!(p.to_string(), "2/4");
        assert_eq!(p, Fraction::new(1, 2));
        assert_eq!(
            precision_recall(&set(5..9), &set(5..9)).unwrap(),
            (Fraction::new(1, 1), Fraction::new(1, 1))
        );
    }

    #[test]
    fn empty_sets() {
        assert!(matches!(
            precision_recall(&set(0..3), &set(0..0)),
            Err(EvalError::NoRelevant(_))
        ));
        let e = evaluate("q", &set(0..0), &set(0..2), EmptyRetrieved::Vacuous).unwrap();
        assert!(e.vacuous);
        assert_eq!(e.precision, Fraction::new(1, 1));
        assert_eq!(e.recall, Fraction::new(0, 2));
        let e = evaluate("q", &set(0..0), &set(0..2), EmptyRetrieved::Zero).unwrap();
        assert_eq!(e.precision, Fraction::new(0, 1));
    }

    #[test]
    fn fraction_semantics() {
        assert_eq!(Fraction::new(2, 12), Fraction::new(1, 6));
        assert!(Fraction::new(1, 125) < Fraction::new(1, 14));
        assert_eq!(Fraction::new(0, 5).to_string(), "0");
        assert_eq!(Fraction::new(7, 7).to_string(), "1");
    }

    #[test]
    fn parse_qrels() {
        let q = Qrels::parse("q1\tA/d1\n\n# note\nq1\tA/d2\nq2\tB/d1\n".as_bytes()).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q.relevant("q1").unwrap().len(), 2);
        let err = Qrels::parse("q1\tA/d1\nq2 B/d1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EvalError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn parse_queries() {
        let qs =
            QuerySpec::parse_all("q1\tالتأمين الصحي\tfinance\nq2\tبعثات\n".as_bytes()).unwrap();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].category.as_deref(), Some("finance"));
        assert_eq!(qs[1].category, None);
        assert!(QuerySpec::parse_all("q1\ta\nq1\tb\n".as_bytes()).is_err());
        assert!(QuerySpec::parse_all("justone\n".as_bytes()).is_err());
        assert!(QuerySpec::parse_all("".as_bytes()).unwrap().is_empty());
    }

    fn small_index() -> InvertedIndex {
        let docs = vec![
            Document::new("finance", "f1", "insurance health budget"),
            Document::new("finance", "f2", "insurance health"),
            Document::new("staff", "s1", "insurance health staff"),
            Document::new("staff", "s2", "insurance staff"),
            Document::new("students", "u1", "insurance health trip"),
        ];
        InvertedIndex::build(&docs, Analyzer::default()).unwrap()
    }

    #[test]
    fn comparison_report() {
        let idx = small_index();
        let queries = QuerySpec::parse_all(
            "q1\tinsurance health\tfinance\nq2\ttrip\nq3\tstaff\tstaff\nq4\tnothing\tstaff\n"
                .as_bytes(),
        )
        .unwrap();
        let qrels =
            Qrels::parse("q1\tfinance/f1\nq2\tstudents/u1\nq3\tstaff/s2\n".as_bytes()).unwrap();
        let report = run_comparison(
            &idx,
            &queries,
            &qrels,
            Routing::Explicit,
            &EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 4);
        let r1 = report.rows[0].outcome.as_ref().unwrap();
        assert_eq!(r1.before.precision, Fraction::new(1, 4));
        assert_eq!(r1.after.precision, Fraction::new(1, 2));
        assert_eq!(r1.after.recall, Fraction::new(1, 1));
        assert!(report.rows[1].outcome.is_err()); // no category
        assert!(report.rows[3].outcome.is_err()); // no qrels
        let tsv = report.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(
            lines[0],
            "query\tPRE_before\tRECALL_before\tPRE_after\tRECALL_after"
        );
        assert_eq!(lines[1], "q1\t1/4\t1\t1/2\t1");
        assert_eq!(lines[2], "q2\tNA\tNA\tNA\tNA");
        assert_eq!(lines[3], "q3\t1/2\t1\t1/2\t1");
        assert_eq!(report.mean_precision_before, Some(0.375));
        assert_eq!(report.mean_precision_after, Some(0.5));
        let table = report.to_table();
        assert!(table.contains("1/2 (0.5000)"));
        assert!(table.contains("error in q2"));
        // parallel and sequential runs are identical
        let seq = run_comparison(
            &idx,
            &queries,
            &qrels,
            Routing::Explicit,
            &EvalOptions {
                parallelism: Parallelism::Sequential,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(seq.to_tsv(), tsv);
        assert_eq!(seq.to_table(), table);
    }

    #[test]
    fn unknown_qrels_document_is_fatal() {
        let idx = small_index();
        let qrels = Qrels::parse("q1\tfinance/f1\nq1\tfinance/zzz\n".as_bytes()).unwrap();
        let err = run_comparison(
            &idx,
            &[],
            &qrels,
            Routing::Explicit,
            &EvalOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::UnknownDocument { line: 2, .. }));
    }

    #[test]
    fn empty_query_list() {
        let idx = small_index();
        let report = run_comparison(
            &idx,
            &[],
            &Qrels::default(),
            Routing::Explicit,
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.mean_precision_before, None);
        assert_eq!(report.to_tsv().lines().count(), 1);
    }

    #[test]
    fn predicted_routing() {
        let idx = small_index();
        let classifier = Classifier::train(&idx, &Default::default()).unwrap();
        let queries = QuerySpec::parse_all("q1\tbudget\n".as_bytes()).unwrap();
        let qrels = Qrels::parse("q1\tfinance/f1\n".as_bytes()).unwrap();
        let report = run_comparison(
            &idx,
            &queries,
            &qrels,
            Routing::Predicted(&classifier),
            &EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(
            report.routing,
            RoutingKind::Predicted(ClassifierKind::NaiveBayes)
        );
        let row = report.rows[0].outcome.as_ref().unwrap();
        assert_eq!(row.category, "finance");
        assert!(report.to_table().contains("predicted (naive bayes)"));
    }
}
