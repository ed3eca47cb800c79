use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simindex::NeighborList;

pub const DEFAULT_RBO_P: f64 = 0.9;

/// How far apart two top-k neighbor lists are.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceScore {
    /// `|A ∩ B| / |A ∪ B|` over the two id sets.
    pub jaccard_at_k: f64,
    /// Extrapolated rank-biased overlap.
    pub rbo: f64,
    pub rbo_p: f64,
    /// Mean absolute rank shift of the ids both lists share; 0 when none are shared.
    pub displacement: f64,
}

impl DivergenceScore {
    /// Primary divergence: `1 - jaccard_at_k`.
    pub fn divergence(&self) -> f64 {
        1.0 - self.jaccard_at_k
    }
}

pub fn jaccard<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let sa: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let sb: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Extrapolated RBO for two equal-length rankings:
///
/// `RBO_ext = (X_k / k) p^k + ((1 - p) / p) * sum_{d=1..k} (X_d / d) p^d`
///
/// where `X_d` is the overlap of the two depth-`d` prefixes.
pub fn rbo_ext<S: AsRef<str>>(a: &[S], b: &[S], p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("rbo p", format!("{p} is outside (0, 1)")));
    }
    if a.len() != b.len() {
        return Err(Error::RankingMismatch(format!(
            "list lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let k = a.len();
    if k == 0 {
        return Ok(1.0);
    }
    let mut seen_a = HashSet::with_capacity(k);
    let mut seen_b = HashSet::with_capacity(k);
    let mut overlap = 0usize;
    let mut sum = 0.0;
    let mut weight = 1.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let (x, y) = (x.as_ref(), y.as_ref());
        weight *= p;
        if x == y {
            overlap += 1;
        } else {
            if seen_b.contains(x) {
                overlap += 1;
            }
            if seen_a.contains(y) {
                overlap += 1;
            }
        }
        seen_a.insert(x);
        seen_b.insert(y);
        sum += overlap as f64 / (i + 1) as f64 * weight;
    }
    let value = overlap as f64 / k as f64 * weight + (1.0 - p) / p * sum;
    Ok(value.clamp(0.0, 1.0))
}

pub fn mean_displacement<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let rank_b: HashMap<&str, usize> = b.iter().enumerate().map(|(i, s)| (s.as_ref(), i)).collect();
    let (total, shared) = a
        .iter()
        .enumerate()
        .filter_map(|(i, s)| rank_b.get(s.as_ref()).map(|&j| i.abs_diff(j)))
        .fold((0usize, 0usize), |(t, n), d| (t + d, n + 1));
    if shared == 0 {
        0.0
    } else {
        total as f64 / shared as f64
    }
}

/// Scores two neighbor lists for the same query computed with the same k.
pub fn compare_rankings(a: &NeighborList, b: &NeighborList, rbo_p: f64) -> Result<DivergenceScore> {
    if a.query_id != b.query_id {
        return Err(Error::RankingMismatch(format!(
            "query ids {:?} and {:?}",
            a.query_id, b.query_id
        )));
    }
    if a.len() != b.len() {
        return Err(Error::RankingMismatch(format!("k {} and {}", a.len(), b.len())));
    }
    let ia: Vec<&str> = a.ids().collect();
    let ib: Vec<&str> = b.ids().collect();
    Ok(DivergenceScore {
        jaccard_at_k: jaccard(&ia, &ib),
        rbo: rbo_ext(&ia, &ib, rbo_p)?,
        rbo_p,
        displacement: mean_displacement(&ia, &ib),
    })
}
