//! Dataset manifests, caption selection, and the on-disk vector formats.

mod binary;
mod embeddings;
mod manifest;
mod scores;

pub use embeddings::{read_embeddings, write_embeddings, EmbeddingStore, EMBEDDING_MAGIC, FORMAT_VERSION};
pub use manifest::{load_manifest, select_primary_caption, CaptionPolicy, DatasetManifest, ImageRecord};
pub use scores::{read_score_matrix, write_score_matrix, ScoreMatrix, SCORE_MAGIC};

pub(crate) use manifest::write_atomic;
