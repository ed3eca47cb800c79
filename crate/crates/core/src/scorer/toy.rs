//! Deterministic stand-in model for hermetic runs. It carries no semantics;
//! it only exercises the pipeline end to end.
//!
//! * Image features (280): 16x16 average-pooled luma in `[0, 1]`, then an
//!   8-bin histogram per RGB channel normalized by pixel count.
//! * Text features (1024): lowercase, split on non-alphanumerics, count
//!   tokens into `fnv1a64(token) % 1024` buckets.
//!
//! Both are projected by a seed-derived Gaussian matrix to `dim` and
//! L2-normalized.

use crate::datastore::EmbeddingStore;
use crate::error::{Error, Result};
use crate::rng;
use crate::simindex::cosine;
use crate::transform::{ImageBuffer, LUMA_WEIGHTS};

use super::{check_texts, Scorer};

pub const POOL_GRID: usize = 16;
pub const HIST_BINS: usize = 8;
pub const IMAGE_FEATURES: usize = POOL_GRID * POOL_GRID + 3 * HIST_BINS;
pub const TEXT_BUCKETS: usize = 1024;
pub(crate) const MIN_DIM: usize = 8;
pub(crate) const DEFAULT_DIM: usize = 64;

pub fn image_features(img: &ImageBuffer) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = img.pixels();
    let luma = |x: usize, y: usize| {
        let i = (y * w + x) * 3;
        (LUMA_WEIGHTS[0] * f64::from(px[i]) + LUMA_WEIGHTS[1] * f64::from(px[i + 1]) + LUMA_WEIGHTS[2] * f64::from(px[i + 2]))
            / 255.0
    };
    let cell = |i: usize, n: usize| {
        let lo = i * n / POOL_GRID;
        let hi = ((i + 1) * n / POOL_GRID).max(lo + 1).min(n);
        (lo.min(n - 1), hi)
    };
    let mut out = Vec::with_capacity(IMAGE_FEATURES);
    for gy in 0..POOL_GRID {
        let (y0, y1) = cell(gy, h);
        for gx in 0..POOL_GRID {
            let (x0, x1) = cell(gx, w);
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += luma(x, y);
                }
            }
            out.push(sum / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    let mut hist = [[0usize; HIST_BINS]; 3];
    for p in px.chunks_exact(3) {
        for c in 0..3 {
            hist[c][p[c] as usize * HIST_BINS / 256] += 1;
        }
    }
    let n = (w * h) as f64;
    out.extend(hist.iter().flatten().map(|&count| count as f64 / n));
    out
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn text_features(text: &str) -> Vec<f64> {
    let mut counts = vec![0.0; TEXT_BUCKETS];
    for token in tokenize(text) {
        counts[(rng::fnv1a64(&token) % TEXT_BUCKETS as u64) as usize] += 1.0;
    }
    counts
}

#[derive(Debug, Clone)]
pub struct ToyScorer {
    seed: u64,
    dim: usize,
    model_id: String,
    image_projection: Vec<f32>,
    text_projection: Vec<f32>,
}

impl ToyScorer {
    pub fn new(seed: u64, dim: usize) -> Result<Self> {
        if dim < MIN_DIM {
            return Err(Error::invalid("toy scorer", format!("dim must be >= {MIN_DIM}")));
        }
        let image_projection = rng::gaussian_matrix(&mut rng::stream(seed, "toy-image-projection"), dim, IMAGE_FEATURES);
        let text_projection = rng::gaussian_matrix(&mut rng::stream(seed, "toy-text-projection"), dim, TEXT_BUCKETS);
        Ok(ToyScorer {
            seed,
            dim,
            model_id: format!("toy-seed{seed}-dim{dim}"),
            image_projection,
            text_projection,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn project(matrix: &[f32], cols: usize, features: &[f64]) -> Result<Vec<f32>> {
        let nonzero: Vec<(usize, f64)> = features
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, f)| *f != 0.0)
            .collect();
        let mut out: Vec<f64> = matrix
            .chunks_exact(cols)
            .map(|row| nonzero.iter().map(|&(j, f)| f64::from(row[j]) * f).sum())
            .collect();
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        out.iter_mut().for_each(|v| *v /= norm);
        Ok(out.into_iter().map(|v| v as f32).collect())
    }

    pub fn image_vector(&self, img: &ImageBuffer) -> Result<Vec<f32>> {
        Self::project(&self.image_projection, IMAGE_FEATURES, &image_features(img))
    }

    pub fn text_vector(&self, text: &str) -> Result<Vec<f32>> {
        Self::project(&self.text_projection, TEXT_BUCKETS, &text_features(text))
            .map_err(|_| Error::invalid("text", format!("{text:?} has no alphanumeric tokens")))
    }
}

impl Scorer for ToyScorer {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed_images(&self, images: &[(String, ImageBuffer)]) -> Result<EmbeddingStore> {
        if images.is_empty() {
            return Err(Error::invalid("image batch", "empty"));
        }
        let rows = images
            .iter()
            .map(|(id, img)| Ok((id.clone(), self.image_vector(img)?)))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingStore::from_rows(self.model_id.clone(), rows)
    }

    fn embed_texts(&self, texts: &[String]) -> Result<EmbeddingStore> {
        check_texts(texts)?;
        let rows = texts
            .iter()
            .map(|t| Ok((t.clone(), self.text_vector(t)?)))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingStore::from_rows(self.model_id.clone(), rows)
    }

    fn score_image_captions(&self, _image_id: &str, image: &ImageBuffer, captions: &[String]) -> Result<Vec<f32>> {
        check_texts(captions)?;
        let iv = self.image_vector(image)?;
        captions
            .iter()
            .map(|c| Ok(cosine(&iv, &self.text_vector(c)?)? as f32))
            .collect()
    }
}
