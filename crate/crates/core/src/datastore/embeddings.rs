use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::binary::{Reader, Writer};
use super::manifest::write_atomic;
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"GSEB";
pub const FORMAT_VERSION: u32 = 1;

/// Fixed-dimension f32 vectors keyed by id, produced by one model.
///
/// On disk (all integers little-endian):
///
/// ```text
/// "GSEB" | version u32 | model_id len u32 + UTF-8 | dim u32 | count u32
///        | count x (len u16 + UTF-8 id) | count*dim f32 row-major
/// ```
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    model_id: String,
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<f32>,
    index: HashMap<String, usize>,
}

impl PartialEq for EmbeddingStore {
    fn eq(&self, other: &Self) -> bool {
        self.model_id == other.model_id
            && self.dim == other.dim
            && self.ids == other.ids
            && self.vectors.len() == other.vectors.len()
            && self
                .vectors
                .iter()
                .zip(&other.vectors)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl EmbeddingStore {
    pub fn new(model_id: impl Into<String>, dim: usize, ids: Vec<String>, vectors: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding store", "dim must be positive"));
        }
        if vectors.len() != ids.len() * dim {
            return Err(Error::invalid(
                "embedding store",
                format!(
                    "{} ids x dim {} needs {} values, got {}",
                    ids.len(),
                    dim,
                    ids.len() * dim,
                    vectors.len()
                ),
            ));
        }
        if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "embedding store",
                format!("non-finite component in row {:?}", ids[i / dim]),
            ));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(EmbeddingStore {
            model_id: model_id.into(),
            dim,
            ids,
            vectors,
            index,
        })
    }

    /// Builds a store from per-row vectors, checking they share one dimension.
    pub fn from_rows(model_id: impl Into<String>, rows: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let dim = rows.first().map(|(_, v)| v.len()).unwrap_or(0);
        let mut ids = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for (id, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: v.len(),
                });
            }
            ids.push(id);
            vectors.extend_from_slice(&v);
        }
        Self::new(model_id, dim, ids, vectors)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .zip(self.vectors.chunks_exact(self.dim))
            .map(|(id, v)| (id.as_str(), v))
    }

    /// New store with every component multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(
            self.model_id.clone(),
            self.dim,
            self.ids.clone(),
            self.vectors.iter().map(|v| v * factor).collect(),
        )
    }

    /// Restricts the store to `ids`, in that order.
    pub fn select(&self, ids: &[String]) -> Result<Self> {
        let mut vectors = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let row = self.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            vectors.extend_from_slice(row);
        }
        Self::new(self.model_id.clone(), self.dim, ids.to_vec(), vectors)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new(EMBEDDING_MAGIC);
        w.u32(FORMAT_VERSION);
        w.str_u32(&self.model_id)?;
        w.u32(to_u32(self.dim, "dim")?);
        w.u32(to_u32(self.ids.len(), "count")?);
        for id in &self.ids {
            w.str_u16(id)?;
        }
        w.f32s(&self.vectors);
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, EMBEDDING_MAGIC)?;
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let model_id = r.str_u32("model id")?;
        let dim = r.u32("dim")? as usize;
        let count = r.u32("count")? as usize;
        if dim == 0 {
            return Err(Error::Format("dim is zero".into()));
        }
        let ids = r.table(count, "id table")?;
        let n = count
            .checked_mul(dim)
            .ok_or_else(|| Error::Format("count x dim overflows".into()))?;
        let vectors = r.f32s(n, "payload")?;
        r.finish()?;
        Self::new(model_id, dim, ids, vectors).map_err(|e| Error::Format(e.to_string()))
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} exceeds u32")))
}

pub fn write_embeddings(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &store.to_bytes()?)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
