use std::fs;
use std::path::PathBuf;

use crate::datastore::{EmbeddingStore, ScoreMatrix, EMBEDDING_MAGIC, SCORE_MAGIC};
use crate::error::{Error, Result};
use crate::transform::ImageBuffer;

use super::{check_texts, Scorer};

/// Serves precomputed vectors and logits. Files are told apart by magic;
/// lookups try each file in the order given.
///
/// Transformed images are looked up under `<transform>:<image-id>` in score
/// matrices, matching the keys the caption-churn pipeline passes in.
#[derive(Debug, Clone)]
pub struct FileScorer {
    model_id: String,
    stores: Vec<EmbeddingStore>,
    matrices: Vec<ScoreMatrix>,
}

impl FileScorer {
    pub fn open(paths: &[PathBuf]) -> Result<Self> {
        let mut stores = Vec::new();
        let mut matrices = Vec::new();
        for path in paths {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let tagged = |e: Error| Error::Format(format!("{}: {e}", path.display()));
            if bytes.starts_with(EMBEDDING_MAGIC) {
                stores.push(EmbeddingStore::from_bytes(&bytes).map_err(tagged)?);
            } else if bytes.starts_with(SCORE_MAGIC) {
                matrices.push(ScoreMatrix::from_bytes(&bytes).map_err(tagged)?);
            } else {
                return Err(Error::Format(format!(
                    "{}: neither an embedding store nor a score matrix",
                    path.display()
                )));
            }
        }
        Ok(Self::from_parts(stores, matrices))
    }

    pub fn from_parts(stores: Vec<EmbeddingStore>, matrices: Vec<ScoreMatrix>) -> Self {
        let model_id = stores
            .first()
            .map(|s| s.model_id().to_string())
            .or_else(|| matrices.first().map(|m| m.model_id().to_string()))
            .unwrap_or_default();
        FileScorer {
            model_id,
            stores,
            matrices,
        }
    }

    fn lookup(&self, ids: &[String]) -> Result<EmbeddingStore> {
        let store = ids
            .first()
            .and_then(|first| self.stores.iter().find(|s| s.position(first).is_some()))
            .ok_or_else(|| Error::UnknownId(ids.first().cloned().unwrap_or_default()))?;
        store.select(ids)
    }
}

impl Scorer for FileScorer {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed_images(&self, images: &[(String, ImageBuffer)]) -> Result<EmbeddingStore> {
        if images.is_empty() {
            return Err(Error::invalid("image batch", "empty"));
        }
        let ids: Vec<String> = images.iter().map(|(id, _)| id.clone()).collect();
        self.lookup(&ids)
    }

    fn embed_texts(&self, texts: &[String]) -> Result<EmbeddingStore> {
        check_texts(texts)?;
        self.lookup(texts)
    }

    fn score_image_captions(&self, image_id: &str, _image: &ImageBuffer, captions: &[String]) -> Result<Vec<f32>> {
        check_texts(captions)?;
        let m = self
            .matrices
            .iter()
            .find(|m| m.row(image_id).is_some())
            .ok_or_else(|| Error::UnknownId(image_id.to_string()))?;
        captions
            .iter()
            .map(|c| m.get(image_id, c).ok_or_else(|| Error::UnknownId(c.clone())))
            .collect()
    }
}
