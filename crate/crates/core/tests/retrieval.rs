use std::cmp::Ordering;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use t2n_core::embed::EmbeddingTable;
use t2n_core::mapper::{Metric, NeighborIndex};
use t2n_core::ConceptId;

/// Random table whose ids are shuffled relative to row order and which
/// contains exact duplicate rows.
fn table(rng: &mut ChaCha8Rng, rows: usize, dim: usize, duplicates: usize) -> EmbeddingTable {
    let mut data: Vec<f64> = (0..rows * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..duplicates {
        let from = rng.gen_range(0..rows);
        let to = rng.gen_range(0..rows);
        let src: Vec<f64> = data[from * dim..(from + 1) * dim].to_vec();
        data[to * dim..(to + 1) * dim].copy_from_slice(&src);
    }
    let mut ids: Vec<String> = (0..rows).map(|i| format!("c{:05}", i * 7919 % 100_003)).collect();
    ids.shuffle(rng);
    EmbeddingTable::new(ids, dim, data, None).unwrap()
}

fn brute_force(t: &EmbeddingTable, q: &[f64], metric: Metric, k: usize) -> Vec<(String, f64)> {
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut all: Vec<(String, f64)> = (0..t.len())
        .map(|i| {
            let r = t.row(i);
            let s = match metric {
                Metric::Cosine => {
                    let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                    r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / (rn * qn)
                }
                Metric::L2 => r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            };
            (t.tokens()[i].clone(), s)
        })
        .collect();
    all.sort_by(|a, b| {
        let o = match metric {
            Metric::Cosine => b.1.partial_cmp(&a.1).unwrap(),
            Metric::L2 => a.1.partial_cmp(&b.1).unwrap(),
        };
        if o == Ordering::Equal {
            a.0.cmp(&b.0)
        } else {
            o
        }
    });
    all.truncate(k);
    all
}

#[test]
fn topk_equals_brute_force_with_duplicates() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let t = table(&mut rng, 1000, 128, 60);
    for metric in [Metric::Cosine, Metric::L2] {
        let index = NeighborIndex::build(&t, None, metric).unwrap();
        for seed in 0..20u64 {
            let mut qr = ChaCha8Rng::seed_from_u64(seed);
            // half the queries sit exactly on a stored (possibly duplicated) row
            let q: Vec<f64> = if seed % 2 == 0 {
                t.row(qr.gen_range(0..1000)).to_vec()
            } else {
                (0..128).map(|_| qr.gen_range(-1.0..1.0)).collect()
            };
            let got = index.query(&q, 50).unwrap();
            let want = brute_force(&t, &q, metric, 50);
            assert_eq!(got.len(), 50);
            for (h, (id, s)) in got.ranked.iter().zip(&want) {
                assert_eq!(h.concept.as_str(), id, "{metric:?} seed {seed}");
                assert!((h.score - s).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn duplicate_rows_are_ordered_by_id() {
    let t = EmbeddingTable::new(
        vec!["z9".into(), "a1".into(), "m5".into()],
        2,
        vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        None,
    )
    .unwrap();
    for metric in [Metric::Cosine, Metric::L2] {
        let index = NeighborIndex::build(&t, None, metric).unwrap();
        let ids: Vec<_> = index.query(&[2.0, 1.0], 3).unwrap().concepts().map(|c| c.to_string()).collect();
        assert_eq!(ids, ["a1", "m5", "z9"]);
    }
}

#[test]
fn self_queries_score_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = table(&mut rng, 50, 16, 0);
    let cos = NeighborIndex::build(&t, None, Metric::Cosine).unwrap();
    let l2 = NeighborIndex::build(&t, None, Metric::L2).unwrap();
    for i in 0..50 {
        let hit = &cos.query(t.row(i), 1).unwrap().ranked[0];
        assert_eq!(hit.concept.as_str(), t.tokens()[i]);
        assert!((hit.score - 1.0).abs() < 1e-12);
        let hit = &l2.query(t.row(i), 1).unwrap().ranked[0];
        assert_eq!(hit.concept.as_str(), t.tokens()[i]);
        assert_eq!(hit.score, 0.0);
    }
}

#[test]
fn single_concept_subset_always_wins() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = table(&mut rng, 30, 8, 0);
    let only = ConceptId::new(t.tokens()[7].clone()).unwrap();
    let index = NeighborIndex::build(&t, Some(std::slice::from_ref(&only)), Metric::Cosine).unwrap();
    for _ in 0..20 {
        let q: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = index.query(&q, 5).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.ranked[0].concept, only);
    }
}

/// Orthogonal matrix from Gram-Schmidt on random columns.
fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

fn apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn ranked_ids(index: &NeighborIndex, q: &[f64], k: usize) -> Vec<String> {
    index.query(q, k).unwrap().concepts().map(|c| c.to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn cosine_ranking_ignores_query_scale(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = table(&mut rng, 200, 12, 10);
        let index = NeighborIndex::build(&t, None, Metric::Cosine).unwrap();
        let q: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scaled: Vec<f64> = q.iter().map(|x| x * c).collect();
        prop_assert_eq!(ranked_ids(&index, &q, 20), ranked_ids(&index, &scaled, 20));
    }

    #[test]
    fn l2_ranking_survives_rotation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = table(&mut rng, 200, 12, 10);
        let rot = orthogonal(&mut rng, 12);
        let data: Vec<f64> = (0..t.len()).flat_map(|i| apply(&rot, t.row(i))).collect();
        let rotated = EmbeddingTable::new(t.tokens().to_vec(), 12, data, None).unwrap();
        let a = NeighborIndex::build(&t, None, Metric::L2).unwrap();
        let b = NeighborIndex::build(&rotated, None, Metric::L2).unwrap();
        let q: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assert_eq!(ranked_ids(&a, &q, 20), ranked_ids(&b, &apply(&rot, &q), 20));
    }
}
