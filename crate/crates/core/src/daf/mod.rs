//! Discrepancy analysis: mine queries whose top-k neighbors disagree across
//! two embedding models, and turn them into analysis prompts.

mod divergence;
mod prompt;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::{DatasetManifest, EmbeddingStore};
use crate::error::{Error, Result};
use crate::simindex::{NeighborList, SimIndex, SimilarityMetric};

pub use divergence::{compare_rankings, jaccard, mean_displacement, rbo_ext, DivergenceScore, DEFAULT_RBO_P};
pub use prompt::{emit_gpt_prompt, write_prompts, ANALYSIS_INSTRUCTIONS, DEFAULT_BATCH_SIZE};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCase {
    pub query_id: String,
    pub divergence: DivergenceScore,
    pub neighbors_a: NeighborList,
    pub neighbors_b: NeighborList,
    /// All captions for the query and every neighbor id, when known.
    #[serde(default)]
    pub captions: BTreeMap<String, Vec<String>>,
}

impl DiscrepancyCase {
    /// `1 - jaccard_at_k`.
    pub fn score(&self) -> f64 {
        self.divergence.divergence()
    }

    /// Every id whose captions the case refers to: the query first, then
    /// neighbors in list order.
    pub fn referenced_ids(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        std::iter::once(self.query_id.as_str())
            .chain(self.neighbors_a.ids())
            .chain(self.neighbors_b.ids())
            .filter(|id| seen.insert(*id))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DafParams {
    pub k: usize,
    pub metric: SimilarityMetric,
    pub threshold: f64,
    pub rbo_p: f64,
}

impl Default for DafParams {
    fn default() -> Self {
        DafParams {
            k: DEFAULT_K,
            metric: SimilarityMetric::Cosine,
            threshold: DEFAULT_THRESHOLD,
            rbo_p: DEFAULT_RBO_P,
        }
    }
}

fn check_id_sets(a: &EmbeddingStore, b: &EmbeddingStore) -> Result<()> {
    let sa: BTreeSet<&str> = a.ids().iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = b.ids().iter().map(String::as_str).collect();
    if sa != sb {
        return Err(Error::IdSetMismatch {
            only_a: sa.difference(&sb).map(|s| s.to_string()).collect(),
            only_b: sb.difference(&sa).map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

/// Scores every shared id, in model A's id order, with self-exclusion on.
pub fn daf_candidates(a: &EmbeddingStore, b: &EmbeddingStore, params: &DafParams) -> Result<Vec<DiscrepancyCase>> {
    check_id_sets(a, b)?;
    let ia = SimIndex::build(a);
    let ib = SimIndex::build(b);
    a.ids()
        .par_iter()
        .map(|id| {
            let na = ia.query_topk(id, params.k, params.metric, true)?;
            let nb = ib.query_topk(id, params.k, params.metric, true)?;
            let divergence = compare_rankings(&na, &nb, params.rbo_p)?;
            Ok(DiscrepancyCase {
                query_id: id.clone(),
                divergence,
                neighbors_a: na,
                neighbors_b: nb,
                captions: BTreeMap::new(),
            })
        })
        .collect()
}

/// Flags cases whose `1 - jaccard_at_k` reaches `threshold`, most divergent
/// first, ties by ascending query id.
pub fn select_flagged(mut candidates: Vec<DiscrepancyCase>, threshold: f64) -> Vec<DiscrepancyCase> {
    candidates.retain(|c| c.score() >= threshold);
    candidates.sort_by(|x, y| {
        y.score()
            .total_cmp(&x.score())
            .then_with(|| x.query_id.cmp(&y.query_id))
    });
    candidates
}

pub fn run_daf(a: &EmbeddingStore, b: &EmbeddingStore, params: &DafParams) -> Result<Vec<DiscrepancyCase>> {
    Ok(select_flagged(daf_candidates(a, b, params)?, params.threshold))
}

/// Fills each case's caption table from the manifest.
pub fn attach_captions(cases: &mut [DiscrepancyCase], manifest: &DatasetManifest) -> Result<()> {
    for case in cases {
        let mut captions = BTreeMap::new();
        for id in case.referenced_ids() {
            let record = manifest.get(id).ok_or_else(|| Error::MissingCaption(id.to_string()))?;
            captions.insert(id.to_string(), record.captions.clone());
        }
        case.captions = captions;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(model: &str, rows: &[(&str, [f32; 2])]) -> EmbeddingStore {
        EmbeddingStore::from_rows(model, rows.iter().map(|(id, v)| (id.to_string(), v.to_vec())).collect()).unwrap()
    }

    #[test]
    fn identical_stores_flag_nothing() {
        let s = store("a", &[("x", [1.0, 0.0]), ("y", [0.0, 1.0]), ("z", [1.0, 1.0]), ("w", [1.0, 0.2])]);
        let params = DafParams { k: 2, threshold: 1e-12, ..Default::default() };
        assert!(run_daf(&s, &s, &params).unwrap().is_empty());
        for c in daf_candidates(&s, &s, &params).unwrap() {
            assert_eq!(c.score(), 0.0);
        }
    }

    #[test]
    fn id_set_mismatch_reports_difference() {
        let a = store("a", &[("x", [1.0, 0.0]), ("y", [0.0, 1.0])]);
        let b = store("b", &[("x", [1.0, 0.0]), ("q", [0.0, 1.0])]);
        match run_daf(&a, &b, &DafParams::default()).unwrap_err() {
            Error::IdSetMismatch { only_a, only_b } => {
                assert_eq!(only_a, ["y"]);
                assert_eq!(only_b, ["q"]);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn flagged_sorted_by_divergence_then_id() {
        let a = store("a", &[("p", [1.0, 0.0]), ("q", [0.9, 0.1]), ("r", [0.0, 1.0]), ("s", [0.1, 0.9])]);
        let b = store("b", &[("p", [1.0, 0.0]), ("q", [0.0, 1.0]), ("r", [0.9, 0.1]), ("s", [0.1, 0.9])]);
        let params = DafParams { k: 1, threshold: 0.0, ..Default::default() };
        let flagged = run_daf(&a, &b, &params).unwrap();
        assert_eq!(flagged.len(), 4);
        for w in flagged.windows(2) {
            assert!(w[0].score() > w[1].score() || (w[0].score() == w[1].score() && w[0].query_id < w[1].query_id));
        }
    }

    fn one_case() -> DiscrepancyCase {
        let a = store("a", &[("q", [1.0, 0.0]), ("n1", [0.9, 0.1]), ("n2", [0.8, 0.3])]);
        let mut cases = daf_candidates(&a, &a, &DafParams { k: 2, ..Default::default() }).unwrap();
        cases.retain(|c| c.query_id == "q");
        let mut case = cases.remove(0);
        case.captions.insert("q".into(), vec!["a dog".into(), "a brown dog on grass".into()]);
        case.captions.insert("n1".into(), vec!["a cat sleeps".into()]);
        case.captions.insert("n2".into(), vec!["two birds".into(), "birds".into()]);
        case
    }

    #[test]
    fn prompt_data_block_layout() {
        let text = emit_gpt_prompt(&[one_case()], crate::datastore::CaptionPolicy::Longest).unwrap();
        let data = text.strip_suffix(ANALYSIS_INSTRUCTIONS).unwrap();
        let lines: Vec<&str> = data.lines().filter(|l| !l.is_empty()).collect();
        assert_eq!(lines, ["a brown dog on grass", "a cat sleeps", "two birds"]);
        assert!(text.contains("Give the output as Python Dictionary of objects"));
        assert!(text.contains("are there any general types of failures you notice"));
    }

    #[test]
    fn prompt_missing_caption_and_empty_batch() {
        let mut case = one_case();
        case.captions.remove("n2");
        assert!(matches!(
            emit_gpt_prompt(&[case], crate::datastore::CaptionPolicy::First),
            Err(Error::MissingCaption(id)) if id == "n2"
        ));
        assert!(emit_gpt_prompt(&[], crate::datastore::CaptionPolicy::First).is_err());
    }
}
