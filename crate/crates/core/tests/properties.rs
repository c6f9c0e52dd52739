use std::collections::BTreeSet;

use catsearch::classify::ClassifierParams;
use catsearch::eval::{run_comparison, EvalOptions};
use catsearch::{
    search, Analyzer, AnalyzerConfig, Classifier, ClassifierKind, Document, Fraction,
    InvertedIndex, MatchMode, Parallelism, Qrels, Query, QuerySpec, Routing, Scorer,
};
use proptest::prelude::*;

const CATS: [&str; 3] = ["law", "finance", "staff"];

/// Documents as (category index, term ids).
fn corpus() -> impl Strategy<Value = Vec<(usize, Vec<u8>)>> {
    prop::collection::vec(
        (0..CATS.len(), prop::collection::vec(0u8..12, 0..10)),
        2..16,
    )
}

fn docs(raw: &[(usize, Vec<u8>)]) -> Vec<Document> {
    raw.iter()
        .enumerate()
        .map(|(i, (c, ts))| {
            let text: Vec<String> = ts.iter().map(|t| format!("w{t}")).collect();
            Document::new(CATS[*c], &format!("d{i:02}"), text.join(" "))
        })
        .collect()
}

fn build(raw: &[(usize, Vec<u8>)]) -> InvertedIndex {
    InvertedIndex::build(&docs(raw), Analyzer::new(AnalyzerConfig::raw())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn recall_is_one_when_relevant_docs_match_and_share_the_category(
        raw in corpus(),
        query in prop::collection::btree_set(0u8..12, 1..3),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..4),
        scorer_idf in any::<bool>(),
    ) {
        let mut raw = raw;
        let target = raw[0].0;
        let members: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].0 == target).collect();
        let relevant: BTreeSet<usize> = picks.iter().map(|p| members[p.index(members.len())]).collect();
        for &d in &relevant {
            raw[d].1.extend(query.iter().copied());
        }
        let index = build(&raw);
        let text: Vec<String> = query.iter().map(|t| format!("w{t}")).collect();
        let mut qrels = Qrels::default();
        for &d in &relevant {
            qrels.add("q", format!("{}/d{d:02}", CATS[target]));
        }
        let spec = QuerySpec { id: "q".into(), text: text.join(" "), category: Some(CATS[target].into()) };
        let options = EvalOptions {
            scorer: if scorer_idf { Scorer::TfIdf } else { Scorer::TfSum },
            ..EvalOptions::default()
        };
        let report = run_comparison(&index, &[spec], &qrels, Routing::Explicit, &options).unwrap();
        let row = report.rows[0].outcome.as_ref().unwrap();
        prop_assert_eq!(row.before.recall, Fraction::new(1, 1));
        prop_assert_eq!(row.after.recall, Fraction::new(1, 1));
        prop_assert!(row.after.precision >= row.before.precision);
        prop_assert!(row.after.retrieved <= row.before.retrieved);
    }

    #[test]
    fn category_filter_selects_a_subset(
        raw in corpus(),
        query in prop::collection::vec(0u8..14, 1..4),
        cat in 0..CATS.len(),
        disjunctive in any::<bool>(),
    ) {
        let index = build(&raw);
        let text: Vec<String> = query.iter().map(|t| format!("w{t}")).collect();
        let q = Query::for_index(&text.join(" "), &index)
            .with_mode(if disjunctive { MatchMode::Disjunctive } else { MatchMode::Conjunctive });
        let before = search(&index, &q).unwrap();
        prop_assume!(index.has_category(CATS[cat]));
        let after = search(&index, &q.clone().with_category(Some(CATS[cat]))).unwrap();
        let expected: Vec<_> = before.hits.iter().filter(|h| h.category == CATS[cat]).cloned().collect();
        prop_assert_eq!(after.hits, expected);
    }

    #[test]
    fn evaluation_is_the_same_sequential_or_parallel(raw in corpus(), seeds in prop::collection::vec(0u8..12, 1..6)) {
        let index = build(&raw);
        let mut qrels = Qrels::default();
        let mut specs = Vec::new();
        for (i, t) in seeds.iter().enumerate() {
            let id = format!("q{i}");
            let d = *t as usize % raw.len();
            qrels.add(id.clone(), format!("{}/d{d:02}", CATS[raw[d].0]));
            let category = (i % 2 == 0).then(|| CATS[raw[d].0].to_string());
            specs.push(QuerySpec { id, text: format!("w{t}"), category });
        }
        let run = |parallelism| {
            let options = EvalOptions { parallelism, ..EvalOptions::default() };
            run_comparison(&index, &specs, &qrels, Routing::Explicit, &options).unwrap()
        };
        let (a, b) = (run(Parallelism::Sequential), run(Parallelism::Parallel));
        prop_assert_eq!(a.to_tsv(), b.to_tsv());
        prop_assert_eq!(a.to_table(), b.to_table());
    }

    #[test]
    fn saved_models_predict_identically(
        raw in corpus(),
        kind in prop::sample::select(vec![ClassifierKind::NaiveBayes, ClassifierKind::Knn, ClassifierKind::Centroid]),
        query in prop::collection::vec(0u8..12, 1..5),
    ) {
        let index = build(&raw);
        let params = ClassifierParams { kind, ..ClassifierParams::default() };
        let Ok(model) = Classifier::train(&index, &params) else {
            return Ok(());
        };
        let back = Classifier::from_bytes(&model.to_bytes()).unwrap();
        prop_assert_eq!(&back, &model);
        let terms: Vec<String> = query.iter().map(|t| format!("w{t}")).collect();
        prop_assert_eq!(back.predict(&terms).ok(), model.predict(&terms).ok());
    }
}
