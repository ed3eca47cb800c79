#![allow(dead_code)]

use std::path::PathBuf;

use glitchscope_core::datastore::{load_manifest, DatasetManifest, EmbeddingStore};
use glitchscope_core::scorer::{Scorer, ToyScorer};
use glitchscope_core::transform::ImageBuffer;

pub fn mini_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

pub fn mini_manifest() -> DatasetManifest {
    load_manifest(mini_dir().join("manifest.jsonl")).unwrap()
}

pub fn mini_images(manifest: &DatasetManifest) -> Vec<(String, ImageBuffer)> {
    manifest
        .records
        .iter()
        .map(|r| (r.id.clone(), ImageBuffer::load(manifest.resolve_image_path(r)).unwrap()))
        .collect()
}

pub fn toy_image_store(seed: u64, manifest: &DatasetManifest) -> EmbeddingStore {
    ToyScorer::new(seed, 64).unwrap().embed_images(&mini_images(manifest)).unwrap()
}
