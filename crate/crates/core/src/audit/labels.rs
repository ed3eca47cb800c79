use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::cases::{CaseCatalog, CaseRef};
use super::report::{report_from_effective, AuditReport};
use super::taxonomy::find_fault;
use crate::error::{Error, Result};

/// One human judgment. An empty `fault_ids` means "not a failure".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub case_ref: CaseRef,
    pub fault_ids: Vec<String>,
    #[serde(default)]
    pub note: String,
    pub annotator: String,
    /// UTC seconds.
    pub timestamp: i64,
}

impl CaseLabel {
    pub fn fault_set(&self) -> BTreeSet<&str> {
        self.fault_ids.iter().map(String::as_str).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.fault_ids.iter().find(|f| find_fault(f).is_none()) {
            return Err(Error::UnknownFault(bad.clone()));
        }
        if self.annotator.trim().is_empty() {
            return Err(Error::invalid("label", "annotator is empty"));
        }
        Ok(())
    }
}

pub fn now_utc_seconds() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

type SupersedeKey = (CaseRef, String);

/// Append-only label log with the latest label per (case, annotator) kept live.
#[derive(Debug)]
pub struct LabelStore {
    path: Option<PathBuf>,
    file: Option<File>,
    history: Vec<CaseLabel>,
    latest: BTreeMap<SupersedeKey, usize>,
}

impl LabelStore {
    pub fn in_memory() -> Self {
        LabelStore {
            path: None,
            file: None,
            history: Vec::new(),
            latest: BTreeMap::new(),
        }
    }

    /// Opens (creating if needed) a log file and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let history: Vec<CaseLabel> = if path.exists() {
            crate::jsonl::read_jsonl(&path)?
        } else {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut store = LabelStore {
            path: Some(path),
            file: Some(file),
            history: Vec::new(),
            latest: BTreeMap::new(),
        };
        for label in history {
            store.apply(label);
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn apply(&mut self, label: CaseLabel) {
        let key = (label.case_ref.clone(), label.annotator.clone());
        self.latest.insert(key, self.history.len());
        self.history.push(label);
    }

    /// Validates, appends durably, then makes the label visible.
    pub fn record_label(&mut self, label: CaseLabel, catalog: &CaseCatalog) -> Result<()> {
        label.validate()?;
        if !catalog.contains(&label.case_ref) {
            return Err(Error::UnknownCase(label.case_ref.to_string()));
        }
        if let Some(file) = &mut self.file {
            let path = self.path.as_deref().unwrap_or(Path::new("<labels>"));
            let mut line = serde_json::to_vec(&label).expect("label serializes");
            line.push(b'\n');
            file.write_all(&line).map_err(|e| Error::io(path, e))?;
            file.sync_data().map_err(|e| Error::io(path, e))?;
        }
        self.apply(label);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let (Some(file), Some(path)) = (&mut self.file, &self.path) {
            file.sync_all().map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn history(&self) -> &[CaseLabel] {
        &self.history
    }

    /// Current labels, ordered by case then annotator.
    pub fn effective(&self) -> impl Iterator<Item = &CaseLabel> {
        self.latest.values().map(|&i| &self.history[i])
    }

    pub fn labels_for(&self, case: &CaseRef) -> Vec<&CaseLabel> {
        self.latest
            .range((case.clone(), String::new())..)
            .take_while(|((c, _), _)| c == case)
            .map(|(_, &i)| &self.history[i])
            .collect()
    }

    pub fn report(&self, catalog: &CaseCatalog) -> AuditReport {
        report_from_effective(self.effective(), self.history.len(), catalog)
    }
}
