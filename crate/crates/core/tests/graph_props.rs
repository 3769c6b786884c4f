use proptest::prelude::*;
use t2n_core::taxonomy::{generate_walk_corpus, Distance, TaxonomyGraph, WalkBias, WalkConfig};

/// Node count plus a random edge list over `0..n`; self-loops included on
/// purpose since ingestion must drop them.
fn graphs() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=64).prop_flat_map(|n| {
        let edges = prop::collection::vec((0..n, 0..n), 0..=(2 * n));
        (Just(n), edges)
    })
}

fn build(n: usize, edges: &[(usize, usize)]) -> TaxonomyGraph {
    // self-loops register isolated nodes without adding adjacency
    let mut triples: Vec<(String, String, String)> = edges
        .iter()
        .map(|&(a, b)| (format!("n{a}"), "r".into(), format!("n{b}")))
        .collect();
    for i in 0..n {
        triples.push((format!("n{i}"), "r".into(), format!("n{i}")));
    }
    TaxonomyGraph::from_edges(triples).unwrap().0
}

fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<u32>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(a, b) in edges {
        if a != b {
            d[a][b] = Some(1);
            d[b][a] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].map_or(true, |cur| x + y < cur) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bfs_matches_floyd_warshall((n, edges) in graphs()) {
        let g = build(n, &edges);
        let oracle = floyd_warshall(n, &edges);
        for i in 0..n {
            for j in 0..n {
                let got = g.distance(&format!("n{i}"), &format!("n{j}")).unwrap();
                let want = match oracle[i][j] {
                    Some(h) => Distance::Hops(h),
                    None => Distance::Unreachable,
                };
                prop_assert_eq!(got, want, "n{} -> n{}", i, j);
            }
        }
    }

    #[test]
    fn distance_is_a_metric((n, edges) in graphs()) {
        let g = build(n, &edges);
        let d: Vec<Vec<Option<u32>>> = (0..g.node_count()).map(|i| g.distances_from(i)).collect();
        for i in 0..n {
            prop_assert_eq!(d[i][i], Some(0));
            for j in 0..n {
                prop_assert_eq!(d[i][j], d[j][i]);
                for k in 0..n {
                    if let (Some(a), Some(b), Some(c)) = (d[i][k], d[k][j], d[i][j]) {
                        prop_assert!(c <= a + b);
                    }
                }
            }
        }
    }

    #[test]
    fn walks_follow_edges((n, edges) in graphs(), seed in any::<u64>(), p in 0.25f64..4.0, q in 0.25f64..4.0) {
        let g = build(n, &edges);
        let cfg = WalkConfig { walks_per_node: 2, walk_length: 12, bias: WalkBias { p, q } };
        let walks: Vec<_> = generate_walk_corpus(&g, &cfg, seed).unwrap().collect();
        prop_assert_eq!(walks.len(), 2 * n);
        for (i, w) in walks.iter().enumerate() {
            prop_assert_eq!(w.start(), i % n);
            if g.neighbors(w.start()).is_empty() {
                prop_assert_eq!(w.len(), 1);
            } else {
                prop_assert_eq!(w.len(), 13);
            }
            for pair in w.steps.windows(2) {
                prop_assert!(g.are_adjacent(pair[0], pair[1]));
            }
        }
        let again: Vec<_> = generate_walk_corpus(&g, &cfg, seed).unwrap().collect();
        prop_assert_eq!(walks, again);
    }
}

#[test]
fn edge_file_round_trip() {
    let g = build(6, &[(0, 1), (1, 2), (3, 4), (4, 0), (2, 5)]);
    let mut buf = Vec::new();
    g.write_edges(&mut buf).unwrap();
    let (back, _) = TaxonomyGraph::read(buf.as_slice(), "mem", &Default::default()).unwrap();
    assert_eq!(back.fingerprint(), g.fingerprint());
}
