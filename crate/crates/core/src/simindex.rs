//! Exact k-nearest-neighbor search over an [`EmbeddingStore`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datastore::EmbeddingStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMetric {
    #[default]
    Cosine,
    L2,
}

impl SimilarityMetric {
    /// Orders two scores so that the better one comes first.
    fn better(self, a: f64, b: f64) -> Ordering {
        match self {
            SimilarityMetric::Cosine => b.total_cmp(&a),
            SimilarityMetric::L2 => a.total_cmp(&b),
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilarityMetric::Cosine => "cosine",
            SimilarityMetric::L2 => "l2",
        })
    }
}

impl FromStr for SimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(SimilarityMetric::Cosine),
            "l2" => Ok(SimilarityMetric::L2),
            other => Err(Error::invalid("metric", format!("{other:?} (expected cosine or l2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    /// Cosine similarity or L2 distance, depending on the list's metric.
    pub score: f64,
}

/// Ranked neighbors of one query, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub query_id: String,
    pub metric: SimilarityMetric,
    pub entries: Vec<Neighbor>,
}

impl NeighborList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|n| n.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line of the batch output: `{"query_id":..,"metric":..,"entries":[[id,score],..]}`.
    pub fn to_json_line(&self) -> String {
        let entries: Vec<(&str, f64)> = self.entries.iter().map(|n| (n.id.as_str(), n.score)).collect();
        serde_json::json!({
            "query_id": self.query_id,
            "metric": self.metric,
            "entries": entries,
        })
        .to_string()
    }
}

fn check_dims(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

fn squared_norm(a: &[f32]) -> f64 {
    dot(a, a)
}

/// Cosine similarity, computed in f64 and clamped to `[-1, 1]`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    check_dims(a, b)?;
    let na = squared_norm(a);
    let nb = squared_norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(cosine_with_norms(dot(a, b), na.sqrt(), nb.sqrt()))
}

fn cosine_with_norms(dot: f64, na: f64, nb: f64) -> f64 {
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Euclidean distance.
pub fn l2(a: &[f32], b: &[f32]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// Exhaustive index over one store with precomputed norms.
#[derive(Debug)]
pub struct SimIndex<'a> {
    store: &'a EmbeddingStore,
    norms: Vec<f64>,
}

struct Candidate<'a> {
    metric: SimilarityMetric,
    score: f64,
    id: &'a str,
}

impl Candidate<'_> {
    /// `Less` means `self` ranks ahead of `other`.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.metric
            .better(self.score, other.score)
            .then_with(|| self.id.cmp(other.id))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.rank_cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate<'_> {}
impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
// Max-heap top is the worst-ranked kept candidate.
impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank_cmp(other)
    }
}

impl<'a> SimIndex<'a> {
    pub fn build(store: &'a EmbeddingStore) -> Self {
        let norms = (0..store.len()).map(|i| squared_norm(store.row(i)).sqrt()).collect();
        SimIndex { store, norms }
    }

    pub fn store(&self) -> &EmbeddingStore {
        self.store
    }

    /// The `k` best rows for `query_id`; ties go to the smaller id.
    pub fn query_topk(
        &self,
        query_id: &str,
        k: usize,
        metric: SimilarityMetric,
        exclude_self: bool,
    ) -> Result<NeighborList> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        let q = self
            .store
            .position(query_id)
            .ok_or_else(|| Error::UnknownId(query_id.to_string()))?;
        let qv = self.store.row(q);
        let qn = self.norms[q];
        if metric == SimilarityMetric::Cosine && qn == 0.0 {
            return Err(Error::ZeroVector);
        }

        let mut heap: BinaryHeap<Candidate<'_>> = BinaryHeap::with_capacity(k + 1);
        for (i, (id, v)) in self.store.iter().enumerate() {
            if exclude_self && i == q {
                continue;
            }
            let score = match metric {
                SimilarityMetric::Cosine => {
                    if self.norms[i] == 0.0 {
                        return Err(Error::ZeroVector);
                    }
                    cosine_with_norms(dot(qv, v), qn, self.norms[i])
                }
                SimilarityMetric::L2 => l2(qv, v)?,
            };
            let cand = Candidate { metric, score, id };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(worst) = heap.peek() {
                if cand.rank_cmp(worst) == Ordering::Less {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        let entries = heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                id: c.id.to_string(),
                score: c.score,
            })
            .collect();
        Ok(NeighborList {
            query_id: query_id.to_string(),
            metric,
            entries,
        })
    }
}

/// One-shot convenience over [`SimIndex`].
pub fn query_topk(
    store: &EmbeddingStore,
    query_id: &str,
    k: usize,
    metric: SimilarityMetric,
    exclude_self: bool,
) -> Result<NeighborList> {
    SimIndex::build(store).query_topk(query_id, k, metric, exclude_self)
}
