//! Experiment configuration: TOML on top of built-in defaults, with dot-path
//! overrides and key-path validation.

use std::fmt;
use std::path::{Path, PathBuf};

use grushin_core::besov::BesovParams;
use grushin_core::functions::Bump;
use grushin_core::grid::{GridSpec, SetSpec};
use grushin_core::quadrature::QuadratureSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::ExperimentId;

/// A configuration problem, located by its key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at `{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<grushin_core::Error> for ConfigError {
    fn from(e: grushin_core::Error) -> Self {
        match e {
            grushin_core::Error::Config { key, message } => ConfigError { key, message },
            other => ConfigError::new("", other.to_string()),
        }
    }
}

/// One member of a test family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyEntry {
    Bump {
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Set {
        label: String,
        set: SetSpec,
    },
}

fn one() -> f64 {
    1.0
}

impl FamilyEntry {
    pub fn as_bump(&self) -> Option<Bump> {
        match self {
            FamilyEntry::Bump {
                center,
                width,
                amplitude,
            } => Some(Bump {
                center: center.clone(),
                width: *width,
                amplitude: *amplitude,
            }),
            FamilyEntry::Set { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub grid: GridSpec,
    pub quadrature: QuadratureSpec,
    pub exponents: Option<BesovParams>,
    pub family: Vec<FamilyEntry>,
    /// Experiment-specific settings, parsed by the experiment itself.
    pub params: toml::Table,
}

fn defaults() -> toml::Table {
    let grid = GridSpec::grushin_plane(64, 2.0);
    let mut t = toml::Table::new();
    t.insert("seed".into(), toml::Value::Integer(0));
    t.insert("grid".into(), toml::Value::try_from(&grid).expect("grid defaults serialize"));
    t.insert(
        "quadrature".into(),
        toml::Value::try_from(QuadratureSpec::default()).expect("quadrature defaults serialize"),
    );
    t.insert("family".into(), toml::Value::Array(Vec::new()));
    t.insert("params".into(), toml::Value::Table(toml::Table::new()));
    t
}

/// Merges `over` into `base`; tables merge recursively, everything else replaces.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets `key.path = value` in `root`, creating intermediate tables. The value
/// is read as a TOML value and falls back to a plain string.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new("", format!("override `{assignment}` is not key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(|p| p.is_empty()) {
        return Err(ConfigError::new(path, "empty key segment in override"));
    }
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(ConfigError::new(
                    parts[..=i].join("."),
                    "is not a table, cannot override below it",
                ))
            }
        };
    }
    unreachable!("loop returns on the last segment")
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v was just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Deserializes `value`, reporting failures with the key path under `prefix`.
pub fn deserialize_at<T: DeserializeOwned>(value: toml::Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let key = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        ConfigError::new(key, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("", e.to_string()))?;
        let mut root = defaults();
        merge(&mut root, user);
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: ExperimentConfig = deserialize_at(toml::Value::Table(root), "")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid.validate()?;
        self.quadrature.validate()?;
        if let Some(e) = &self.exponents {
            e.validate()?;
        }
        let n = self.grid.n();
        for (i, f) in self.family.iter().enumerate() {
            let key = format!("family[{i}]");
            match f {
                FamilyEntry::Bump { .. } => f.as_bump().expect("bump entry").validate(&key, n)?,
                FamilyEntry::Set { set, .. } => set.validate(&format!("{key}.set"))?,
            }
        }
        crate::experiments::validate_params(self)
    }

    /// Experiment-specific parameters, with defaults for missing keys.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T, ConfigError> {
        deserialize_at(toml::Value::Table(self.params.clone()), "params")
    }

    pub fn bumps(&self) -> Vec<Bump> {
        self.family.iter().filter_map(FamilyEntry::as_bump).collect()
    }

    pub fn sets(&self) -> Vec<(String, SetSpec)> {
        self.family
            .iter()
            .filter_map(|f| match f {
                FamilyEntry::Set { label, set } => Some((label.clone(), set.clone())),
                FamilyEntry::Bump { .. } => None,
            })
            .collect()
    }
}
