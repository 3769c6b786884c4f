use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{Hit, MappingResult, Metric};
use crate::embed::EmbeddingTable;
use crate::taxonomy::ConceptId;
use crate::util::dot;
use crate::{Error, Result};

/// Exact nearest-neighbour search over node vectors.
///
/// Results are sorted best first; equal scores are ordered by ascending
/// concept id so output never depends on row order or thread count.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborIndex {
    metric: Metric,
    ids: Vec<ConceptId>,
    dim: usize,
    matrix: Vec<f64>,
    norms: Vec<f64>,
}

impl NeighborIndex {
    /// Index every row of `nodes`, or only the rows named in `subset`.
    pub fn build(nodes: &EmbeddingTable, subset: Option<&[ConceptId]>, metric: Metric) -> Result<Self> {
        let rows: Vec<usize> = match subset {
            None => (0..nodes.len()).collect(),
            Some(ids) => {
                let mut picked = BTreeSet::new();
                for id in ids {
                    let row = nodes.index_of(id.as_str()).ok_or_else(|| {
                        Error::Validation(format!("concept `{id}` has no node vector"))
                    })?;
                    picked.insert(row);
                }
                picked.into_iter().collect()
            }
        };
        if rows.is_empty() {
            return Err(Error::Validation("neighbour index would be empty".into()));
        }
        let dim = nodes.dim();
        let mut ids = Vec::with_capacity(rows.len());
        let mut matrix = Vec::with_capacity(rows.len() * dim);
        let mut norms = Vec::with_capacity(rows.len());
        for r in rows {
            let v = nodes.row(r);
            ids.push(ConceptId::new(nodes.tokens()[r].clone())?);
            matrix.extend_from_slice(v);
            norms.push(dot(v, v).sqrt());
        }
        Ok(NeighborIndex {
            metric,
            ids,
            dim,
            matrix,
            norms,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[ConceptId] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    /// Similarity (cosine) or distance (L2) between `point` and every row.
    pub fn scores(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.dim {
            return Err(Error::Shape(format!(
                "query has dim {}, index has dim {}",
                point.len(),
                self.dim
            )));
        }
        if !point.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("query vector is not finite".into()));
        }
        Ok(match self.metric {
            Metric::Cosine => {
                let pn = dot(point, point).sqrt();
                if pn == 0.0 {
                    return Err(Error::DegenerateQuery);
                }
                (0..self.len())
                    .map(|i| {
                        let n = self.norms[i];
                        if n == 0.0 {
                            0.0
                        } else {
                            dot(point, self.row(i)) / (pn * n)
                        }
                    })
                    .collect()
            }
            Metric::L2 => (0..self.len())
                .map(|i| {
                    self.row(i)
                        .iter()
                        .zip(point)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect(),
        })
    }

    /// The `k` best concepts for `point`; `k` larger than the index is
    /// clamped.
    pub fn query(&self, point: &[f64], k: usize) -> Result<MappingResult> {
        if k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        let scores = self.scores(point)?;
        let k = k.min(self.len());
        let cmp = |&a: &usize, &b: &usize| -> Ordering {
            let by_score = match self.metric {
                Metric::Cosine => scores[b].total_cmp(&scores[a]),
                Metric::L2 => scores[a].total_cmp(&scores[b]),
            };
            by_score.then_with(|| self.ids[a].cmp(&self.ids[b]))
        };
        let mut order: Vec<usize> = (0..self.len()).collect();
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_unstable_by(cmp);
        Ok(MappingResult {
            ranked: order
                .into_iter()
                .map(|i| Hit {
                    concept: self.ids[i].clone(),
                    score: scores[i],
                })
                .collect(),
        })
    }

    /// Rank (1-based) that `concept` would get for `point`, if indexed.
    pub fn rank_of(&self, point: &[f64], concept: &ConceptId) -> Result<Option<usize>> {
        let Some(target) = self.ids.iter().position(|c| c == concept) else {
            return Ok(None);
        };
        let scores = self.scores(point)?;
        let better = |i: usize| match self.metric {
            Metric::Cosine => scores[i] > scores[target],
            Metric::L2 => scores[i] < scores[target],
        };
        let ahead = (0..self.len())
            .filter(|&i| {
                i != target && (better(i) || (scores[i] == scores[target] && self.ids[i] < self.ids[target]))
            })
            .count();
        Ok(Some(ahead + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes() -> EmbeddingTable {
        EmbeddingTable::new(
            vec!["b".into(), "a".into(), "c".into(), "z".into()],
            2,
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            None,
        )
        .unwrap()
    }

    #[test]
    fn cosine_ties_break_by_id() {
        let idx = NeighborIndex::build(&nodes(), None, Metric::Cosine).unwrap();
        let r = idx.query(&[2.0, 0.0], 4).unwrap();
        let ids: Vec<_> = r.concepts().map(|c| c.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c", "z"]);
        assert!((r.ranked[0].score - 1.0).abs() < 1e-15);
        // zero-norm stored row scores 0, ties with the orthogonal row
        assert_eq!(r.ranked[2].score, 0.0);
        assert_eq!(r.ranked[3].score, 0.0);
    }

    #[test]
    fn l2_self_distance_is_zero() {
        let idx = NeighborIndex::build(&nodes(), None, Metric::L2).unwrap();
        let r = idx.query(&[0.0, 1.0], 1).unwrap();
        assert_eq!(r.ranked[0].concept.as_str(), "c");
        assert_eq!(r.ranked[0].score, 0.0);
    }

    #[test]
    fn k_is_clamped_and_zero_rejected() {
        let idx = NeighborIndex::build(&nodes(), None, Metric::L2).unwrap();
        assert_eq!(idx.query(&[0.0, 0.0], 99).unwrap().len(), 4);
        assert!(idx.query(&[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn degenerate_and_bad_queries() {
        let idx = NeighborIndex::build(&nodes(), None, Metric::Cosine).unwrap();
        assert!(matches!(idx.query(&[0.0, 0.0], 1), Err(Error::DegenerateQuery)));
        assert!(idx.query(&[f64::NAN, 1.0], 1).is_err());
        assert!(matches!(idx.query(&[1.0], 1), Err(Error::Shape(_))));
    }

    #[test]
    fn subset_index() {
        let subset: Vec<ConceptId> = vec!["z".parse().unwrap(), "c".parse().unwrap()];
        let idx = NeighborIndex::build(&nodes(), Some(&subset), Metric::L2).unwrap();
        assert_eq!(idx.len(), 2);
        let r = idx.query(&[1.0, 0.0], 5).unwrap();
        assert!(r.concepts().all(|c| subset.contains(c)));
        let bad = vec!["nope".parse().unwrap()];
        assert!(NeighborIndex::build(&nodes(), Some(&bad), Metric::L2).is_err());
        assert!(NeighborIndex::build(&nodes(), Some(&[]), Metric::L2).is_err());
    }

    #[test]
    fn rank_of_matches_query() {
        let idx = NeighborIndex::build(&nodes(), None, Metric::Cosine).unwrap();
        let p = [1.0, 0.5];
        let r = idx.query(&p, 4).unwrap();
        for (i, hit) in r.ranked.iter().enumerate() {
            assert_eq!(idx.rank_of(&p, &hit.concept).unwrap(), Some(i + 1));
        }
    }
}
