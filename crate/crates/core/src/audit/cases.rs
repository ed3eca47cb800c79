use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::daf::DiscrepancyCase;
use crate::error::{Error, Result};
use crate::tcac::TcacCase;
use crate::transform::TransformKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseSource {
    Daf,
    Tcac,
}

impl CaseSource {
    pub fn name(self) -> &'static str {
        match self {
            CaseSource::Daf => "daf",
            CaseSource::Tcac => "tcac",
        }
    }
}

impl fmt::Display for CaseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "daf" => Ok(CaseSource::Daf),
            "tcac" => Ok(CaseSource::Tcac),
            other => Err(Error::invalid("case source", format!("{other:?} (expected daf or tcac)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CaseRef {
    pub source: CaseSource,
    pub case_id: String,
}

impl CaseRef {
    pub fn new(source: CaseSource, case_id: impl Into<String>) -> Self {
        CaseRef {
            source,
            case_id: case_id.into(),
        }
    }
}

impl fmt::Display for CaseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.source, self.case_id)
    }
}

/// Loaded cases from both miners, in file order.
#[derive(Debug, Clone, Default)]
pub struct CaseCatalog {
    daf: Vec<DiscrepancyCase>,
    tcac: Vec<TcacCase>,
    daf_index: HashMap<String, usize>,
    tcac_index: HashMap<String, usize>,
}

impl CaseCatalog {
    pub fn new(daf: Vec<DiscrepancyCase>, tcac: Vec<TcacCase>) -> Result<Self> {
        let mut daf_index = HashMap::new();
        for (i, c) in daf.iter().enumerate() {
            if daf_index.insert(c.query_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(format!("daf/{}", c.query_id)));
            }
        }
        let mut tcac_index = HashMap::new();
        for (i, c) in tcac.iter().enumerate() {
            if tcac_index.insert(c.case_id(), i).is_some() {
                return Err(Error::DuplicateId(format!("tcac/{}", c.case_id())));
            }
        }
        Ok(CaseCatalog {
            daf,
            tcac,
            daf_index,
            tcac_index,
        })
    }

    /// Reads case files of either kind; each line is classified by its fields.
    pub fn load_files<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        let mut daf = Vec::new();
        let mut tcac = Vec::new();
        for path in paths {
            let path = path.as_ref();
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parse_err = |message: String| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message,
                };
                let value: serde_json::Value = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
                if value.get("query_id").is_some() {
                    daf.push(serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?);
                } else if value.get("diff_count").is_some() {
                    tcac.push(serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?);
                } else {
                    return Err(parse_err("neither a DAF nor a TCAC case".into()));
                }
            }
        }
        Self::new(daf, tcac)
    }

    pub fn daf(&self) -> &[DiscrepancyCase] {
        &self.daf
    }

    pub fn tcac(&self) -> &[TcacCase] {
        &self.tcac
    }

    pub fn len(&self) -> usize {
        self.daf.len() + self.tcac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn daf_case(&self, id: &str) -> Option<&DiscrepancyCase> {
        self.daf_index.get(id).map(|&i| &self.daf[i])
    }

    pub fn tcac_case(&self, id: &str) -> Option<&TcacCase> {
        self.tcac_index.get(id).map(|&i| &self.tcac[i])
    }

    pub fn contains(&self, r: &CaseRef) -> bool {
        match r.source {
            CaseSource::Daf => self.daf_index.contains_key(&r.case_id),
            CaseSource::Tcac => self.tcac_index.contains_key(&r.case_id),
        }
    }

    pub fn transform_of(&self, r: &CaseRef) -> Option<TransformKind> {
        match r.source {
            CaseSource::Daf => None,
            CaseSource::Tcac => self.tcac_case(&r.case_id).map(|c| c.transform),
        }
    }

    /// Every case reference: DAF cases first, then TCAC, each in file order.
    pub fn refs(&self) -> impl Iterator<Item = CaseRef> + '_ {
        self.daf
            .iter()
            .map(|c| CaseRef::new(CaseSource::Daf, c.query_id.clone()))
            .chain(self.tcac.iter().map(|c| CaseRef::new(CaseSource::Tcac, c.case_id())))
    }
}
