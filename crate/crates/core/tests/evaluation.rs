use std::collections::BTreeSet;

use proptest::prelude::*;
use t2n_core::eval::{
    holdout_split, mean_graph_distance, topk_accuracy, zero_shot_split, EvalReport, GoldItem,
    GoldSet, Protocol, SplitSize,
};
use t2n_core::mapper::{Hit, MappingResult, Metric, TrainingPair};
use t2n_core::{ConceptId, TaxonomyGraph};

fn id(s: &str) -> ConceptId {
    s.parse().unwrap()
}

fn ranked(ids: impl IntoIterator<Item = String>) -> MappingResult {
    MappingResult {
        ranked: ids
            .into_iter()
            .enumerate()
            .map(|(i, c)| Hit {
                concept: id(&c),
                score: -(i as f64),
            })
            .collect(),
    }
}

fn gold(items: &[(&str, &str)]) -> GoldSet {
    GoldSet::new(
        items
            .iter()
            .map(|(p, c)| GoldItem {
                phrase: p.to_string(),
                gold: [id(c)].into(),
            })
            .collect(),
    )
    .unwrap()
}

/// 64 filler concepts with the gold concept spliced in at `rank` (1-based).
fn with_gold_at(gold: &str, rank: usize) -> MappingResult {
    let mut ids: Vec<String> = (0..64).map(|i| format!("F{i}")).collect();
    ids.insert(rank - 1, gold.to_owned());
    ids.truncate(64);
    ranked(ids)
}

#[test]
fn hand_scored_accuracy_fixture() {
    let g = gold(&[("a", "G1"), ("b", "G2"), ("c", "G3"), ("d", "G4")]);
    let results = vec![
        with_gold_at("G1", 1),
        with_gold_at("G2", 3),
        with_gold_at("G3", 7),
        with_gold_at("G4", 60),
    ];
    let acc = |k| topk_accuracy(&results, &g, k).unwrap();
    assert_eq!(acc(1), 0.25);
    assert_eq!(acc(5), 0.5);
    assert_eq!(acc(10), 0.75);
    assert_eq!(acc(50), 0.75);
    assert_eq!(acc(60), 1.0);
}

#[test]
fn perfect_and_hopeless_predictions() {
    let g = gold(&[("a", "G1"), ("b", "G2")]);
    let perfect = vec![with_gold_at("G1", 1), with_gold_at("G2", 1)];
    let never: Vec<MappingResult> = (0..2).map(|_| ranked((0..50).map(|i| format!("F{i}")))).collect();
    for k in [1, 5, 10, 20, 50] {
        assert_eq!(topk_accuracy(&perfect, &g, k).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&never, &g, k).unwrap(), 0.0);
    }
}

fn chain() -> TaxonomyGraph {
    TaxonomyGraph::from_edges([("A", "is_a", "B"), ("B", "is_a", "C"), ("C", "is_a", "D")])
        .unwrap()
        .0
}

#[test]
fn graph_distance_fixtures() {
    let g = chain();
    let gs = gold(&[("p", "A")]);
    let r = ranked(["B".into(), "D".into()]);
    assert_eq!(mean_graph_distance(&[r], &gs, &g, 2).unwrap().mean, Some(2.0));

    // exact matches cost nothing; parents cost one hop
    let gs = gold(&[("p", "A"), ("q", "C")]);
    let exact = vec![ranked(["A".into()]), ranked(["C".into()])];
    assert_eq!(topk_accuracy(&exact, &gs, 1).unwrap(), 1.0);
    assert_eq!(mean_graph_distance(&exact, &gs, &g, 1).unwrap().mean, Some(0.0));
    let parents = vec![ranked(["B".into()]), ranked(["D".into()])];
    assert_eq!(mean_graph_distance(&parents, &gs, &g, 1).unwrap().mean, Some(1.0));
}

fn pairs(n: usize, concepts: usize) -> Vec<TrainingPair> {
    (0..n)
        .map(|i| TrainingPair::new(&format!("C{}", i % concepts), &format!("p{i}")).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn holdout_is_a_reproducible_partition(n in 2usize..300, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let ps = pairs(n, 7);
        let Ok(s) = holdout_split(&ps, SplitSize::Fraction(frac), seed) else {
            // only rounding to an empty or full side is rejected
            let m = (frac * n as f64).round() as usize;
            prop_assert!(m.max(1) >= n);
            return Ok(());
        };
        prop_assert_eq!(s.train.len() + s.test_pairs.len(), n);
        let mut all: Vec<_> = s.train.iter().chain(&s.test_pairs).map(|p| p.phrase.clone()).collect();
        all.sort();
        let mut want: Vec<_> = ps.iter().map(|p| p.phrase.clone()).collect();
        want.sort();
        prop_assert_eq!(all, want);
        prop_assert_eq!(s.test.len(), s.test_pairs.len());
        prop_assert_eq!(holdout_split(&ps, SplitSize::Fraction(frac), seed).unwrap(), s);
    }

    #[test]
    fn zero_shot_never_leaks(concepts in 2usize..40, per in 1usize..5, hold in 1usize..40, seed in any::<u64>()) {
        let ps = pairs(concepts * per, concepts);
        match zero_shot_split(&ps, SplitSize::Count(hold), seed) {
            Err(_) => prop_assert!(hold >= concepts),
            Ok(z) => {
                prop_assert_eq!(z.held_out.len(), hold);
                prop_assert_eq!(z.removed.len(), hold * per);
                prop_assert_eq!(z.removed.len() + z.remaining.len(), ps.len());
                prop_assert!(z.remaining.iter().all(|p| !z.held_out.contains(&p.concept)));
                prop_assert!(z.removed.iter().all(|p| z.held_out.contains(&p.concept)));
            }
        }
    }

    #[test]
    fn reports_round_trip(
        accs in prop::collection::vec(0.0f64..=1.0, 1..6),
        dists in prop::collection::vec(prop::option::of(0.0f64..1e3), 6),
        unreachable in prop::collection::vec(0usize..1000, 6),
        test_size in 0usize..100_000,
        index_size in 1usize..1_000_000,
        protocol in prop_oneof![Just(Protocol::Intrinsic), Just(Protocol::Restricted), Just(Protocol::ZeroShot)],
        metric in prop_oneof![Just(Metric::Cosine), Just(Metric::L2)],
        digest in "[0-9a-f]{64}",
    ) {
        let n = accs.len();
        let mut accuracy = accs;
        accuracy.sort_by(f64::total_cmp);
        let report = EvalReport {
            protocol,
            metric,
            k_values: [1, 5, 10, 20, 50][..n].to_vec(),
            accuracy,
            mean_graph_distance: dists[..n].to_vec(),
            unreachable_pairs: unreachable[..n].to_vec(),
            test_size,
            index_size,
            config_digest: digest,
        };
        prop_assert_eq!(&EvalReport::from_json(&report.to_json().unwrap()).unwrap(), &report);
        prop_assert_eq!(&EvalReport::read_csv(report.to_csv().unwrap().as_bytes()).unwrap(), &report);
    }
}

#[test]
fn different_seeds_give_different_holdouts() {
    let ps = pairs(100, 10);
    for s in 0..5 {
        let a = holdout_split(&ps, SplitSize::Count(10), 100 + s).unwrap();
        let b = holdout_split(&ps, SplitSize::Count(10), 200 + s).unwrap();
        assert_ne!(a.test_pairs, b.test_pairs);
    }
}

#[test]
fn multi_gold_phrases_collapse_into_one_item() {
    let ps = vec![
        TrainingPair::new("A", "fever").unwrap(),
        TrainingPair::new("B", "fever").unwrap(),
        TrainingPair::new("C", "cough").unwrap(),
    ];
    let g = GoldSet::from_pairs(&ps).unwrap();
    assert_eq!(g.len(), 2);
    assert_eq!(g.items()[0].gold, BTreeSet::from([id("A"), id("B")]));
    let results = vec![ranked(["B".into()]), ranked(["A".into()])];
    assert_eq!(topk_accuracy(&results, &g, 1).unwrap(), 0.5);
}
