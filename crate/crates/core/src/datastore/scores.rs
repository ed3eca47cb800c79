use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::binary::{Reader, Writer};
use super::embeddings::{to_u32, FORMAT_VERSION};
use super::manifest::write_atomic;
use crate::error::{Error, Result};

pub const SCORE_MAGIC: &[u8; 4] = b"GSSM";

/// Raw image-caption similarity logits, images x captions.
///
/// On disk:
///
/// ```text
/// "GSSM" | version u32 | model_id len u32 + UTF-8 | images u32 | captions u32
///        | image-id table (u16 len + UTF-8) | caption table (u16 len + UTF-8)
///        | images*captions f32 row-major
/// ```
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    model_id: String,
    image_ids: Vec<String>,
    caption_texts: Vec<String>,
    scores: Vec<f32>,
    image_index: HashMap<String, usize>,
    caption_index: HashMap<String, usize>,
}

impl PartialEq for ScoreMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.model_id == other.model_id
            && self.image_ids == other.image_ids
            && self.caption_texts == other.caption_texts
            && self.scores.len() == other.scores.len()
            && self
                .scores
                .iter()
                .zip(&other.scores)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

fn index_of(items: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(items.len());
    for (i, s) in items.iter().enumerate() {
        if index.insert(s.clone(), i).is_some() {
            return Err(Error::DuplicateId(s.clone()));
        }
    }
    Ok(index)
}

impl ScoreMatrix {
    pub fn new(
        model_id: impl Into<String>,
        image_ids: Vec<String>,
        caption_texts: Vec<String>,
        scores: Vec<f32>,
    ) -> Result<Self> {
        if scores.len() != image_ids.len() * caption_texts.len() {
            return Err(Error::invalid(
                "score matrix",
                format!(
                    "shape {}x{} needs {} scores, got {}",
                    image_ids.len(),
                    caption_texts.len(),
                    image_ids.len() * caption_texts.len(),
                    scores.len()
                ),
            ));
        }
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let image_index = index_of(&image_ids)?;
        let caption_index = index_of(&caption_texts)?;
        Ok(ScoreMatrix {
            model_id: model_id.into(),
            image_ids,
            caption_texts,
            scores,
            image_index,
            caption_index,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn caption_texts(&self) -> &[String] {
        &self.caption_texts
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn row(&self, image_id: &str) -> Option<&[f32]> {
        let n = self.caption_texts.len();
        self.image_index
            .get(image_id)
            .map(|&i| &self.scores[i * n..(i + 1) * n])
    }

    pub fn get(&self, image_id: &str, caption: &str) -> Option<f32> {
        let row = self.row(image_id)?;
        self.caption_index.get(caption).map(|&j| row[j])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new(SCORE_MAGIC);
        w.u32(FORMAT_VERSION);
        w.str_u32(&self.model_id)?;
        w.u32(to_u32(self.image_ids.len(), "image count")?);
        w.u32(to_u32(self.caption_texts.len(), "caption count")?);
        for id in &self.image_ids {
            w.str_u16(id)?;
        }
        for c in &self.caption_texts {
            w.str_u16(c)?;
        }
        w.f32s(&self.scores);
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, SCORE_MAGIC)?;
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let model_id = r.str_u32("model id")?;
        let rows = r.u32("image count")? as usize;
        let cols = r.u32("caption count")? as usize;
        let image_ids = r.table(rows, "image-id table")?;
        let captions = r.table(cols, "caption table")?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("rows x cols overflows".into()))?;
        let scores = r.f32s(n, "payload")?;
        r.finish()?;
        Self::new(model_id, image_ids, captions, scores).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn write_score_matrix(m: &ScoreMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &m.to_bytes()?)
}

pub fn read_score_matrix(path: impl AsRef<Path>) -> Result<ScoreMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ScoreMatrix::from_bytes(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
