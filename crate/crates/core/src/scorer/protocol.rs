//! JSON wire format of the remote scoring service (`/v1`).
//!
//! | method | path               | request             | response             |
//! |--------|--------------------|---------------------|----------------------|
//! | POST   | `/v1/embed_image`  | [`EmbedImageRequest`] | [`EmbedImageResponse`] |
//! | POST   | `/v1/embed_text`   | [`EmbedTextRequest`]  | [`EmbedTextResponse`]  |
//! | POST   | `/v1/score`        | [`ScoreRequest`]      | [`ScoreResponse`]      |
//! | GET    | `/v1/info`         |                       | [`InfoResponse`]       |
//!
//! Failures are non-200 with an [`ErrorResponse`] body. Clients send the
//! SHA-256 of the request body in [`DIGEST_HEADER`]; a retried request
//! carries the same digest, so servers can deduplicate.
//!
//! The `handle_*` functions implement the server side over any [`Scorer`].

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::transform::ImageBuffer;

use super::Scorer;

pub const DIGEST_HEADER: &str = "x-content-sha256";
pub const EMBED_IMAGE_PATH: &str = "/v1/embed_image";
pub const EMBED_TEXT_PATH: &str = "/v1/embed_text";
pub const SCORE_PATH: &str = "/v1/score";
pub const INFO_PATH: &str = "/v1/info";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageItem {
    pub id: String,
    pub png_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageRequest {
    pub items: Vec<ImageItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorItem {
    pub id: String,
    pub vec: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageResponse {
    pub dim: usize,
    pub items: Vec<VectorItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextResponse {
    pub dim: usize,
    pub vecs: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub png_b64: String,
    pub captions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub logits: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub model_id: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

pub fn body_digest(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

pub fn encode_png(img: &ImageBuffer) -> String {
    base64::engine::general_purpose::STANDARD.encode(img.to_png())
}

pub fn decode_png(b64: &str) -> Result<ImageBuffer> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64)
        .map_err(|e| Error::invalid("png_b64", e.to_string()))?;
    ImageBuffer::from_encoded(&bytes).map_err(|e| Error::invalid("png_b64", e.to_string()))
}

pub fn handle_embed_image(scorer: &dyn Scorer, req: &EmbedImageRequest) -> Result<EmbedImageResponse> {
    let images = req
        .items
        .iter()
        .map(|it| Ok((it.id.clone(), decode_png(&it.png_b64)?)))
        .collect::<Result<Vec<_>>>()?;
    let store = scorer.embed_images(&images)?;
    Ok(EmbedImageResponse {
        dim: store.dim(),
        items: store
            .iter()
            .map(|(id, v)| VectorItem {
                id: id.to_string(),
                vec: v.to_vec(),
            })
            .collect(),
    })
}

pub fn handle_embed_text(scorer: &dyn Scorer, req: &EmbedTextRequest) -> Result<EmbedTextResponse> {
    let store = scorer.embed_texts(&req.texts)?;
    Ok(EmbedTextResponse {
        dim: store.dim(),
        vecs: store.iter().map(|(_, v)| v.to_vec()).collect(),
    })
}

pub fn handle_score(scorer: &dyn Scorer, req: &ScoreRequest) -> Result<ScoreResponse> {
    let image = decode_png(&req.png_b64)?;
    Ok(ScoreResponse {
        logits: scorer.score_image_captions("", &image, &req.captions)?,
    })
}

pub fn handle_info(scorer: &dyn Scorer, dim: usize) -> InfoResponse {
    InfoResponse {
        model_id: scorer.model_id().to_string(),
        dim,
    }
}
