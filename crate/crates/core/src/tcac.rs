//! Caption-ranking churn under image transformations.
//!
//! For each image a caption pool is built from text-embedding neighbors of
//! its own captions. The pool is ranked by softmax over image-caption logits
//! for the original image and for every transformed copy; a case records how
//! many of the original top-k captions were evicted.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::daf::DiscrepancyCase;
use crate::datastore::{DatasetManifest, EmbeddingStore, ImageRecord};
use crate::error::{Error, Result};
use crate::scorer::Scorer;
use crate::simindex::{SimIndex, SimilarityMetric};
use crate::transform::{self, ImageBuffer, TransformKind, TransformSpec};

pub const DEFAULT_PER_CAPTION: usize = 10;
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_PER_TRANSFORM: usize = 100;
pub const DEFAULT_TEMPERATURE: f64 = 100.0;

/// Where a pooled caption came from: the index of the image's own caption
/// that retrieved it and the 1-based neighbor rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSource {
    pub source_index: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionPool {
    pub image_id: String,
    pub captions: Vec<String>,
    /// Parallel to `captions`; empty for global pools.
    #[serde(default)]
    pub provenance: Vec<Vec<PoolSource>>,
}

impl CaptionPool {
    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolScope {
    /// Neighbors of the image's own captions (at most captions x per_caption).
    #[default]
    PerImage,
    /// Every unique caption in the corpus.
    Global,
}

impl std::str::FromStr for PoolScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-image" | "per_image" => Ok(PoolScope::PerImage),
            "global" => Ok(PoolScope::Global),
            other => Err(Error::invalid("pool scope", format!("{other:?} (expected per-image or global)"))),
        }
    }
}

/// Takes each caption's `per_caption` cosine neighbors in `text_store`
/// (the caption itself included), concatenates, and keeps first occurrences.
pub fn build_caption_pool(image: &ImageRecord, text_store: &EmbeddingStore, per_caption: usize) -> Result<CaptionPool> {
    build_caption_pool_with(image, &SimIndex::build(text_store), per_caption)
}

pub fn build_caption_pool_with(image: &ImageRecord, index: &SimIndex<'_>, per_caption: usize) -> Result<CaptionPool> {
    if per_caption == 0 {
        return Err(Error::invalid("per_caption", "must be at least 1"));
    }
    let mut captions: Vec<String> = Vec::new();
    let mut provenance: Vec<Vec<PoolSource>> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for (source_index, caption) in image.captions.iter().enumerate() {
        if index.store().position(caption).is_none() {
            return Err(Error::MissingCaption(caption.clone()));
        }
        let neighbors = index.query_topk(caption, per_caption, SimilarityMetric::Cosine, false)?;
        for (r, n) in neighbors.entries.into_iter().enumerate() {
            let src = PoolSource { source_index, rank: r + 1 };
            match slot.get(&n.id) {
                Some(&i) => provenance[i].push(src),
                None => {
                    slot.insert(n.id.clone(), captions.len());
                    captions.push(n.id);
                    provenance.push(vec![src]);
                }
            }
        }
    }
    Ok(CaptionPool {
        image_id: image.id.clone(),
        captions,
        provenance,
    })
}

/// Every caption in `text_store`, in store order.
pub fn build_global_pool(image: &ImageRecord, text_store: &EmbeddingStore) -> CaptionPool {
    CaptionPool {
        image_id: image.id.clone(),
        captions: text_store.ids().to_vec(),
        provenance: Vec::new(),
    }
}

pub fn build_pools(
    manifest: &DatasetManifest,
    text_store: &EmbeddingStore,
    per_caption: usize,
    scope: PoolScope,
) -> Result<Vec<CaptionPool>> {
    let index = SimIndex::build(text_store);
    manifest
        .records
        .par_iter()
        .map(|r| match scope {
            PoolScope::PerImage => build_caption_pool_with(r, &index, per_caption),
            PoolScope::Global => Ok(build_global_pool(r, text_store)),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingState {
    Original,
    Transformed(TransformKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCaption {
    pub caption: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRanking {
    pub image_id: String,
    pub state: RankingState,
    /// Whole pool, most probable first, ties by caption text.
    pub entries: Vec<RankedCaption>,
}

impl CaptionRanking {
    pub fn top(&self, k: usize) -> &[RankedCaption] {
        &self.entries[..k.min(self.entries.len())]
    }
}

/// `softmax(temperature_scale * logits)`, numerically stabilized.
pub fn softmax(logits: &[f32], temperature_scale: f64) -> Result<Vec<f64>> {
    if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if !(temperature_scale.is_finite() && temperature_scale > 0.0) {
        return Err(Error::invalid("temperature", format!("{temperature_scale} must be > 0")));
    }
    let scaled: Vec<f64> = logits.iter().map(|&l| temperature_scale * f64::from(l)).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Ranks `captions` by the softmax of their logits.
///
/// Order follows the logits (descending, ties by caption text), so it is the
/// same for every positive temperature.
pub fn score_captions(
    image_id: &str,
    state: RankingState,
    captions: &[String],
    logits: &[f32],
    temperature_scale: f64,
) -> Result<CaptionRanking> {
    if captions.is_empty() {
        return Err(Error::invalid("caption ranking", "no captions to rank"));
    }
    if captions.len() != logits.len() {
        return Err(Error::DimensionMismatch {
            left: captions.len(),
            right: logits.len(),
        });
    }
    let probs = softmax(logits, temperature_scale)?;
    let mut order: Vec<usize> = (0..captions.len()).collect();
    order.sort_by(|&i, &j| logits[j].total_cmp(&logits[i]).then_with(|| captions[i].cmp(&captions[j])));
    Ok(CaptionRanking {
        image_id: image_id.to_string(),
        state,
        entries: order
            .into_iter()
            .map(|i| RankedCaption {
                caption: captions[i].clone(),
                probability: probs[i],
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DafAnnotation {
    Finding {
        divergence: f64,
        jaccard_at_k: f64,
        rbo: f64,
        displacement: f64,
    },
    NoDafFinding,
}

impl fmt::Display for DafAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DafAnnotation::Finding { divergence, .. } => write!(f, "DAF divergence {divergence:.4}"),
            DafAnnotation::NoDafFinding => f.write_str("no DAF finding"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcacCase {
    pub image_id: String,
    pub transform: TransformKind,
    pub top_before: Vec<RankedCaption>,
    pub top_after: Vec<RankedCaption>,
    /// Captions of `top_before` missing from `top_after`.
    pub diff_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daf: Option<DafAnnotation>,
}

impl TcacCase {
    /// Stable case id: `<transform>:<image-id>`.
    pub fn case_id(&self) -> String {
        format!("{}:{}", self.transform, self.image_id)
    }
}

/// Counts how many of the top-`k` captions before the transform are gone after it.
pub fn diff_rankings(before: &CaptionRanking, after: &CaptionRanking, k: usize) -> Result<TcacCase> {
    if before.image_id != after.image_id {
        return Err(Error::RankingMismatch(format!(
            "image ids {:?} and {:?}",
            before.image_id, after.image_id
        )));
    }
    let transform = match after.state {
        RankingState::Transformed(kind) => kind,
        RankingState::Original => {
            return Err(Error::RankingMismatch("the after ranking must come from a transformed image".into()))
        }
    };
    let pool_a: HashSet<&str> = before.entries.iter().map(|e| e.caption.as_str()).collect();
    let pool_b: HashSet<&str> = after.entries.iter().map(|e| e.caption.as_str()).collect();
    if pool_a != pool_b || before.entries.len() != after.entries.len() {
        return Err(Error::RankingMismatch("rankings cover different caption pools".into()));
    }
    let top_before = before.top(k).to_vec();
    let top_after = after.top(k).to_vec();
    let after_set: HashSet<&str> = top_after.iter().map(|e| e.caption.as_str()).collect();
    let diff_count = top_before.iter().filter(|e| !after_set.contains(e.caption.as_str())).count();
    Ok(TcacCase {
        image_id: before.image_id.clone(),
        transform,
        top_before,
        top_after,
        diff_count,
        daf: None,
    })
}

/// Per transform: most churn first (ties by image id), at most `per_transform`.
/// Groups come out in canonical transform order.
pub fn select_cases(cases: &[TcacCase], per_transform: usize) -> Vec<TcacCase> {
    let mut groups: BTreeMap<TransformKind, Vec<&TcacCase>> = BTreeMap::new();
    for c in cases {
        groups.entry(c.transform).or_default().push(c);
    }
    groups
        .into_values()
        .flat_map(|mut group| {
            group.sort_by(|a, b| b.diff_count.cmp(&a.diff_count).then_with(|| a.image_id.cmp(&b.image_id)));
            group.into_iter().take(per_transform).cloned()
        })
        .collect()
}

pub fn cross_check_daf(case: &TcacCase, daf_cases: &[DiscrepancyCase]) -> DafAnnotation {
    daf_cases
        .iter()
        .find(|d| d.query_id == case.image_id)
        .map(|d| DafAnnotation::Finding {
            divergence: d.score(),
            jaccard_at_k: d.divergence.jaccard_at_k,
            rbo: d.divergence.rbo,
            displacement: d.divergence.displacement,
        })
        .unwrap_or(DafAnnotation::NoDafFinding)
}

pub fn annotate_cases(cases: &mut [TcacCase], daf_cases: &[DiscrepancyCase]) {
    for c in cases {
        c.daf = Some(cross_check_daf(c, daf_cases));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcacParams {
    pub k: usize,
    pub temperature_scale: f64,
}

impl Default for TcacParams {
    fn default() -> Self {
        TcacParams {
            k: DEFAULT_K,
            temperature_scale: DEFAULT_TEMPERATURE,
        }
    }
}

/// Key under which a scorer sees a transformed image: `<transform>:<image-id>`.
pub fn transformed_key(kind: TransformKind, image_id: &str) -> String {
    format!("{kind}:{image_id}")
}

/// Scores every image under every transform in `suite`.
///
/// Returns unselected cases in manifest order, transforms in suite order.
/// When `images_out` is set, each transformed copy is written to
/// `<images_out>/<transform>/<image-id>.png`.
pub fn run_tcac(
    manifest: &DatasetManifest,
    pools: &[CaptionPool],
    scorer: &dyn Scorer,
    suite: &[TransformSpec],
    params: &TcacParams,
    images_out: Option<&Path>,
) -> Result<Vec<TcacCase>> {
    let by_id: HashMap<&str, &CaptionPool> = pools.iter().map(|p| (p.image_id.as_str(), p)).collect();
    let per_image: Vec<Vec<TcacCase>> = manifest
        .records
        .par_iter()
        .map(|record| {
            let pool = by_id
                .get(record.id.as_str())
                .ok_or_else(|| Error::invalid("caption pools", format!("no pool for image {:?}", record.id)))?;
            let image = ImageBuffer::load(manifest.resolve_image_path(record))?;
            let logits = scorer.score_image_captions(&record.id, &image, &pool.captions)?;
            let before = score_captions(&record.id, RankingState::Original, &pool.captions, &logits, params.temperature_scale)?;
            suite
                .iter()
                .map(|spec| {
                    let transformed = transform::apply(spec, &record.id, &image);
                    if let Some(dir) = images_out {
                        transformed.save_png(dir.join(spec.kind().name()).join(format!("{}.png", record.id)))?;
                    }
                    let key = transformed_key(spec.kind(), &record.id);
                    let logits = scorer.score_image_captions(&key, &transformed, &pool.captions)?;
                    let after = score_captions(
                        &record.id,
                        RankingState::Transformed(spec.kind()),
                        &pool.captions,
                        &logits,
                        params.temperature_scale,
                    )?;
                    diff_rankings(&before, &after, params.k)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_image.into_iter().flatten().collect())
}
