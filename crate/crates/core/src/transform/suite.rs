use std::path::Path;

use super::{TransformKind, TransformParams, TransformSpec};
use crate::error::{Error, Result};

/// Transform names mapped to parameter overrides.
///
/// File form (TOML), one table per transform; omitted keys keep their
/// defaults, `seed` overrides the run seed, `enabled = false` drops the entry:
///
/// ```toml
/// [grayscale]
/// [random_rotation]
/// max_degrees = 20.0
/// seed = 7
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    entries: Vec<(String, toml::Table)>,
}

impl Default for SuiteConfig {
    /// The six standard transforms; elastic is opt-in.
    fn default() -> Self {
        let entries = TransformKind::ALL
            .into_iter()
            .filter(|k| *k != TransformKind::Elastic)
            .map(|k| (k.name().to_string(), toml::Table::new()))
            .collect();
        SuiteConfig { entries }
    }
}

impl SuiteConfig {
    pub fn empty() -> Self {
        SuiteConfig { entries: Vec::new() }
    }

    pub fn with(mut self, name: &str, overrides: toml::Table) -> Self {
        self.entries.retain(|(n, _)| n != name);
        self.entries.push((name.to_string(), overrides));
        self
    }

    pub fn with_elastic(self) -> Self {
        self.with(TransformKind::Elastic.name(), toml::Table::new())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::invalid("transform config", e.to_string()))?;
        let mut entries = Vec::new();
        for (name, value) in table {
            match value {
                toml::Value::Table(t) => entries.push((name, t)),
                _ => {
                    return Err(Error::invalid(
                        "transform config",
                        format!("{name:?} must be a table"),
                    ))
                }
            }
        }
        Ok(SuiteConfig { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

fn merge(kind: TransformKind, overrides: &toml::Table) -> Result<TransformParams> {
    let defaults = TransformParams::default_for(kind);
    let mut table = toml::Table::try_from(defaults).expect("params serialize");
    for (key, value) in overrides {
        if key == "seed" || key == "enabled" {
            continue;
        }
        if key == "kind" || !table.contains_key(key) {
            return Err(Error::invalid(
                "transform config",
                format!("unknown parameter {key:?} for {kind}"),
            ));
        }
        // integers are accepted where floats are expected
        let value = match value {
            toml::Value::Integer(i) => toml::Value::Float(*i as f64),
            toml::Value::Array(a) => toml::Value::Array(
                a.iter()
                    .map(|v| match v {
                        toml::Value::Integer(i) => toml::Value::Float(*i as f64),
                        other => other.clone(),
                    })
                    .collect(),
            ),
            other => other.clone(),
        };
        table.insert(key.clone(), value);
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::invalid("transform config", format!("{kind}: {e}")))
}

/// Resolves a config into validated specs in canonical kind order.
pub fn make_suite(config: &SuiteConfig, base_seed: u64) -> Result<Vec<TransformSpec>> {
    let mut specs = Vec::new();
    for (name, overrides) in &config.entries {
        let kind: TransformKind = name.parse()?;
        match overrides.get("enabled") {
            None | Some(toml::Value::Boolean(true)) => {}
            Some(toml::Value::Boolean(false)) => continue,
            Some(_) => return Err(Error::invalid("transform config", "enabled must be a boolean")),
        }
        let seed = match overrides.get("seed") {
            None => base_seed,
            Some(toml::Value::Integer(s)) if *s >= 0 => *s as u64,
            Some(_) => return Err(Error::invalid("transform config", "seed must be a non-negative integer")),
        };
        specs.push(TransformSpec::new(merge(kind, overrides)?, seed)?);
    }
    if specs.is_empty() {
        return Err(Error::NoTransforms);
    }
    specs.sort_by_key(|s| s.kind());
    Ok(specs)
}
