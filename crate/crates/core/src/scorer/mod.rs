//! Sources of image embeddings, text embeddings, and image-caption logits.

mod file;
pub mod protocol;
mod remote;
mod toy;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use crate::datastore::EmbeddingStore;
use crate::error::{Error, Result};
use crate::transform::ImageBuffer;

pub use file::FileScorer;
pub use remote::{RemoteConfig, RemoteScorer};
pub use toy::{image_features, text_features, ToyScorer, IMAGE_FEATURES, TEXT_BUCKETS};

/// A model behind the audit: everything downstream goes through this trait.
pub trait Scorer: Send + Sync {
    fn model_id(&self) -> &str;

    /// One vector per `(id, image)`, in input order.
    fn embed_images(&self, images: &[(String, ImageBuffer)]) -> Result<EmbeddingStore>;

    /// One vector per text; the text is its own id.
    fn embed_texts(&self, texts: &[String]) -> Result<EmbeddingStore>;

    /// Cosine logits between the image and each caption, in caption order.
    fn score_image_captions(&self, image_id: &str, image: &ImageBuffer, captions: &[String]) -> Result<Vec<f32>>;
}

pub(crate) fn check_texts(texts: &[String]) -> Result<()> {
    if texts.is_empty() {
        return Err(Error::invalid("text batch", "empty"));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(Error::invalid("text batch", format!("text {i} is empty")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScorerBinding {
    /// Precomputed embedding stores and/or score matrices.
    File { paths: Vec<PathBuf> },
    Remote(RemoteConfig),
    Toy { seed: u64, dim: usize },
}

impl ScorerBinding {
    pub fn open(&self) -> Result<Box<dyn Scorer>> {
        Ok(match self {
            ScorerBinding::File { paths } => Box::new(FileScorer::open(paths)?),
            ScorerBinding::Remote(cfg) => Box::new(RemoteScorer::connect(cfg.clone())?),
            ScorerBinding::Toy { seed, dim } => Box::new(ToyScorer::new(*seed, *dim)?),
        })
    }
}

/// Parses `toy:seed=N,dim=D`, `remote:<url>`, or `file:<path>[,<path>...]`.
impl FromStr for ScorerBinding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid("scorer binding", format!("{s:?} has no kind prefix")))?;
        match kind {
            "toy" => {
                let mut seed = None;
                let mut dim = None;
                for part in rest.split(',').filter(|p| !p.is_empty()) {
                    let (k, v) = part
                        .split_once('=')
                        .ok_or_else(|| Error::invalid("scorer binding", format!("expected key=value, got {part:?}")))?;
                    let parse = |v: &str| {
                        v.parse::<u64>()
                            .map_err(|_| Error::invalid("scorer binding", format!("{k} must be an integer")))
                    };
                    match k {
                        "seed" => seed = Some(parse(v)?),
                        "dim" => dim = Some(parse(v)? as usize),
                        other => return Err(Error::invalid("scorer binding", format!("unknown toy option {other:?}"))),
                    }
                }
                let dim = dim.unwrap_or(toy::DEFAULT_DIM);
                if dim < toy::MIN_DIM {
                    return Err(Error::invalid("scorer binding", format!("toy dim must be >= {}", toy::MIN_DIM)));
                }
                Ok(ScorerBinding::Toy {
                    seed: seed.unwrap_or(0),
                    dim,
                })
            }
            "remote" => {
                let url = reqwest::Url::parse(rest)
                    .map_err(|e| Error::invalid("scorer binding", format!("bad URL {rest:?}: {e}")))?;
                if !matches!(url.scheme(), "http" | "https") {
                    return Err(Error::invalid("scorer binding", "remote URL must be http(s)"));
                }
                Ok(ScorerBinding::Remote(RemoteConfig {
                    base_url: rest.trim_end_matches('/').to_string(),
                    ..RemoteConfig::default()
                }))
            }
            "file" => {
                let paths: Vec<PathBuf> = rest.split(',').filter(|p| !p.is_empty()).map(PathBuf::from).collect();
                if paths.is_empty() {
                    return Err(Error::invalid("scorer binding", "file binding needs at least one path"));
                }
                Ok(ScorerBinding::File { paths })
            }
            other => Err(Error::invalid("scorer binding", format!("unknown kind {other:?}"))),
        }
    }
}

impl fmt::Display for ScorerBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerBinding::File { paths } => {
                let joined: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
                write!(f, "file:{}", joined.join(","))
            }
            ScorerBinding::Remote(cfg) => write!(f, "remote:{}", cfg.base_url),
            ScorerBinding::Toy { seed, dim } => write!(f, "toy:seed={seed},dim={dim}"),
        }
    }
}

pub(crate) const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_bindings() {
        assert_eq!(
            "toy:seed=3,dim=16".parse::<ScorerBinding>().unwrap(),
            ScorerBinding::Toy { seed: 3, dim: 16 }
        );
        assert!("toy:seed=3,dim=4".parse::<ScorerBinding>().is_err());
        assert!("toy:seed=x".parse::<ScorerBinding>().is_err());
        match "remote:http://localhost:9000/".parse::<ScorerBinding>().unwrap() {
            ScorerBinding::Remote(cfg) => assert_eq!(cfg.base_url, "http://localhost:9000"),
            b => panic!("{b:?}"),
        }
        assert!("remote:not a url".parse::<ScorerBinding>().is_err());
        assert_eq!(
            "file:a.gseb,b.gssm".parse::<ScorerBinding>().unwrap(),
            ScorerBinding::File { paths: vec!["a.gseb".into(), "b.gssm".into()] }
        );
        assert!("gpu:0".parse::<ScorerBinding>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["toy:seed=1,dim=64", "remote:http://h:1", "file:x.gseb"] {
            assert_eq!(s.parse::<ScorerBinding>().unwrap().to_string(), s);
        }
    }
}
