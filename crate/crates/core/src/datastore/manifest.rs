use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One image and its reference captions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub image_path: PathBuf,
    pub captions: Vec<String>,
}

impl ImageRecord {
    /// Trims captions and checks the record invariants.
    pub fn new(id: impl Into<String>, image_path: impl Into<PathBuf>, captions: Vec<String>) -> Result<Self> {
        let mut record = ImageRecord {
            id: id.into(),
            image_path: image_path.into(),
            captions,
        };
        record.normalize()?;
        Ok(record)
    }

    fn normalize(&mut self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("record", "empty id"));
        }
        if self.captions.is_empty() {
            return Err(Error::invalid(
                "record",
                format!("{:?} has no captions", self.id),
            ));
        }
        for (index, caption) in self.captions.iter_mut().enumerate() {
            let trimmed = caption.trim();
            if trimmed.is_empty() {
                return Err(Error::EmptyCaption {
                    id: self.id.clone(),
                    index,
                });
            }
            if trimmed.len() != caption.len() {
                *caption = trimmed.to_string();
            }
        }
        Ok(())
    }

    pub fn primary_caption(&self, policy: CaptionPolicy) -> &str {
        select_primary_caption(self, policy)
    }
}

/// Which caption stands in for an image when only one is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionPolicy {
    #[default]
    Longest,
    First,
}

impl FromStr for CaptionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "longest" => Ok(CaptionPolicy::Longest),
            "first" => Ok(CaptionPolicy::First),
            other => Err(Error::invalid(
                "caption policy",
                format!("{other:?} (expected longest or first)"),
            )),
        }
    }
}

impl fmt::Display for CaptionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaptionPolicy::Longest => "longest",
            CaptionPolicy::First => "first",
        })
    }
}

/// Picks the caption representing `record`.
///
/// `Longest` counts Unicode scalar values and keeps the lowest index on ties.
pub fn select_primary_caption(record: &ImageRecord, policy: CaptionPolicy) -> &str {
    match policy {
        CaptionPolicy::First => &record.captions[0],
        CaptionPolicy::Longest => {
            let mut best = &record.captions[0];
            let mut best_len = best.chars().count();
            for caption in &record.captions[1..] {
                let len = caption.chars().count();
                if len > best_len {
                    best = caption;
                    best_len = len;
                }
            }
            best
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<ImageRecord>,
    pub source_name: String,
    /// Directory that relative image paths are resolved against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(source_name: impl Into<String>, root: impl Into<PathBuf>, records: Vec<ImageRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(DatasetManifest {
            records,
            source_name: source_name.into(),
            root: root.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn caption_count(&self) -> usize {
        self.records.iter().map(|r| r.captions.len()).sum()
    }

    pub fn resolve_image_path(&self, record: &ImageRecord) -> PathBuf {
        if record.image_path.is_absolute() {
            record.image_path.clone()
        } else {
            self.root.join(&record.image_path)
        }
    }

    /// Every distinct caption text, in first-appearance order.
    pub fn unique_captions(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            for c in &r.captions {
                if seen.insert(c.as_str()) {
                    out.push(c.clone());
                }
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut buf, r).expect("record serializes");
            buf.push(b'\n');
        }
        write_atomic(path, &buf)
    }
}

/// Parses a line-per-record manifest. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let mut record: ImageRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        record.normalize().map_err(|e| parse_err(e.to_string()))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    let source_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(DatasetManifest {
        records,
        source_name,
        root,
    })
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp~");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
