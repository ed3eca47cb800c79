use std::collections::HashMap;
use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::datastore::EmbeddingStore;
use crate::error::{Error, Result};
use crate::transform::ImageBuffer;

use super::protocol::{self, *};
use super::{check_texts, Scorer, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout: Duration,
    /// Extra attempts after the first, for 5xx, timeouts and refused connections.
    pub retries: u32,
    pub backoff: Duration,
    /// Upper bound on concurrent batch requests.
    pub max_in_flight: usize,
    pub batch_size: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: String::new(),
            timeout: DEFAULT_TIMEOUT,
            retries: 3,
            backoff: Duration::from_millis(100),
            max_in_flight: 4,
            batch_size: 32,
        }
    }
}

#[derive(Debug)]
pub struct RemoteScorer {
    config: RemoteConfig,
    client: Client,
    info: InfoResponse,
}

fn remote(message: impl Into<String>, retryable: bool) -> Error {
    Error::Remote {
        message: message.into(),
        retryable,
    }
}

impl RemoteScorer {
    /// Builds the client and fetches `/v1/info`.
    pub fn connect(config: RemoteConfig) -> Result<Self> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| remote(e.to_string(), false))?;
        let mut scorer = RemoteScorer {
            config,
            client,
            info: InfoResponse {
                model_id: String::new(),
                dim: 0,
            },
        };
        scorer.info = scorer.request::<(), InfoResponse>(INFO_PATH, None)?;
        Ok(scorer)
    }

    pub fn info(&self) -> &InfoResponse {
        &self.info
    }

    fn request<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: Option<&Req>) -> Result<Resp> {
        let url = format!("{}{}", self.config.base_url, path);
        let body = body.map(|b| serde_json::to_vec(b).expect("request serializes"));
        let digest = body.as_deref().map(protocol::body_digest);
        let mut last = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                thread::sleep(self.config.backoff * 2u32.saturating_pow(attempt - 1));
            }
            let req = match (&body, &digest) {
                (Some(b), Some(d)) => self
                    .client
                    .post(&url)
                    .header(reqwest::header::CONTENT_TYPE, "application/json")
                    .header(DIGEST_HEADER, d.as_str())
                    .body(b.clone()),
                _ => self.client.get(&url),
            };
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    let bytes = resp.bytes().map_err(|e| remote(e.to_string(), true));
                    if status == StatusCode::OK {
                        let bytes = bytes?;
                        return serde_json::from_slice(&bytes)
                            .map_err(|e| remote(format!("malformed response from {path}: {e}"), false));
                    }
                    let detail = bytes
                        .ok()
                        .and_then(|b| serde_json::from_slice::<ErrorResponse>(&b).ok())
                        .map(|e| e.error)
                        .unwrap_or_default();
                    let err = remote(format!("{path} returned {status}: {detail}"), status.is_server_error());
                    if !status.is_server_error() {
                        return Err(err);
                    }
                    last = Some(err);
                }
                Err(e) => {
                    let retryable = e.is_timeout() || e.is_connect() || e.is_request();
                    let err = remote(format!("{path}: {e}"), retryable);
                    if !retryable {
                        return Err(err);
                    }
                    last = Some(err);
                }
            }
        }
        Err(last.unwrap_or_else(|| remote("no attempts made", true)))
    }

    /// Runs `work` over `chunks` with at most `max_in_flight` at a time,
    /// returning results in chunk order.
    fn fan_out<T: Sync, R: Send>(&self, chunks: &[T], work: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
        let width = self.config.max_in_flight.max(1);
        let mut out = Vec::with_capacity(chunks.len());
        for wave in chunks.chunks(width) {
            let results: Vec<Result<R>> = thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|c| s.spawn(|| work(c))).collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
            for r in results {
                out.push(r?);
            }
        }
        Ok(out)
    }

    fn check_dim(&self, dim: usize, got: usize) -> Result<()> {
        if dim == 0 || got != dim {
            return Err(remote(format!("vector length {got} does not match dim {dim}"), false));
        }
        Ok(())
    }
}

impl Scorer for RemoteScorer {
    fn model_id(&self) -> &str {
        &self.info.model_id
    }

    fn embed_images(&self, images: &[(String, ImageBuffer)]) -> Result<EmbeddingStore> {
        if images.is_empty() {
            return Err(Error::invalid("image batch", "empty"));
        }
        let batches: Vec<EmbedImageRequest> = images
            .chunks(self.config.batch_size.max(1))
            .map(|chunk| EmbedImageRequest {
                items: chunk
                    .iter()
                    .map(|(id, img)| ImageItem {
                        id: id.clone(),
                        png_b64: encode_png(img),
                    })
                    .collect(),
            })
            .collect();
        let responses = self.fan_out(&batches, |req| self.request::<_, EmbedImageResponse>(EMBED_IMAGE_PATH, Some(req)))?;
        let dim = responses.first().map(|r| r.dim).unwrap_or(0);
        let mut by_id: HashMap<String, Vec<f32>> = HashMap::new();
        for resp in responses {
            for item in resp.items {
                self.check_dim(dim, item.vec.len())?;
                by_id.insert(item.id, item.vec);
            }
        }
        let rows = images
            .iter()
            .map(|(id, _)| {
                by_id
                    .remove(id)
                    .map(|v| (id.clone(), v))
                    .ok_or_else(|| remote(format!("response is missing id {id:?}"), false))
            })
            .collect::<Result<Vec<_>>>()?;
        EmbeddingStore::from_rows(self.info.model_id.clone(), rows).map_err(|e| remote(e.to_string(), false))
    }

    fn embed_texts(&self, texts: &[String]) -> Result<EmbeddingStore> {
        check_texts(texts)?;
        let batches: Vec<EmbedTextRequest> = texts
            .chunks(self.config.batch_size.max(1))
            .map(|c| EmbedTextRequest { texts: c.to_vec() })
            .collect();
        let responses = self.fan_out(&batches, |req| {
            let resp = self.request::<_, EmbedTextResponse>(EMBED_TEXT_PATH, Some(req))?;
            if resp.vecs.len() != req.texts.len() {
                return Err(remote(
                    format!("sent {} texts, got {} vectors", req.texts.len(), resp.vecs.len()),
                    false,
                ));
            }
            Ok(resp)
        })?;
        let dim = responses.first().map(|r| r.dim).unwrap_or(0);
        let mut rows = Vec::with_capacity(texts.len());
        for (text, v) in texts.iter().zip(responses.into_iter().flat_map(|r| r.vecs)) {
            self.check_dim(dim, v.len())?;
            rows.push((text.clone(), v));
        }
        EmbeddingStore::from_rows(self.info.model_id.clone(), rows).map_err(|e| remote(e.to_string(), false))
    }

    fn score_image_captions(&self, _image_id: &str, image: &ImageBuffer, captions: &[String]) -> Result<Vec<f32>> {
        check_texts(captions)?;
        let req = ScoreRequest {
            png_b64: encode_png(image),
            captions: captions.to_vec(),
        };
        let resp: ScoreResponse = self.request(SCORE_PATH, Some(&req))?;
        if resp.logits.len() != captions.len() {
            return Err(remote(
                format!("sent {} captions, got {} logits", captions.len(), resp.logits.len()),
                false,
            ));
        }
        if let Some(i) = resp.logits.iter().position(|l| !l.is_finite()) {
            return Err(remote(format!("non-finite logit at {i}"), false));
        }
        Ok(resp.logits)
    }
}
