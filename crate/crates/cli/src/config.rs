//! Flat key-value configuration. Keys mirror the long flag names; flags win.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub source: Vec<String>,
    #[serde(default)]
    pub flow: Vec<String>,
    pub omega: Option<ScalarOrString>,
    pub grid_points: Option<usize>,
    pub refine_tol: Option<f64>,
    pub alpha: Option<f64>,
    pub min_overlap: Option<usize>,
    pub missing: Option<String>,
    pub from: Option<String>,
    pub to: Option<String>,
    pub pairs: Option<bool>,
    pub normalization: Option<String>,
    pub format: Option<Vec<String>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrString {
    Number(f64),
    Text(String),
}

impl ConfigFile {
    /// Relative paths in the file are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ConfigFile = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.out.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.input.as_mut() {
            rebase(p);
        }
        for spec in cfg.source.iter_mut().chain(cfg.flow.iter_mut()) {
            let mut parsed = SourceSpec::from_str(spec)?;
            rebase(&mut parsed.path);
            *spec = parsed.to_string();
        }
        Ok(cfg)
    }
}

/// `--omega` value: a number in [0, 1] or the optimizer's result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaChoice {
    Value(f64),
    FromOptimize,
}

impl FromStr for OmegaChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "from-optimize" {
            return Ok(Self::FromOptimize);
        }
        s.parse::<f64>()
            .map(Self::Value)
            .map_err(|_| format!("expected a number or `from-optimize`, got `{s}`"))
    }
}

impl TryFrom<ScalarOrString> for OmegaChoice {
    type Error = anyhow::Error;

    fn try_from(v: ScalarOrString) -> Result<Self> {
        match v {
            ScalarOrString::Number(x) => Ok(Self::Value(x)),
            ScalarOrString::Text(s) => s.parse().map_err(anyhow::Error::msg),
        }
    }
}

/// `NAME=PATH` for one input source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub name: String,
    pub path: PathBuf,
}

impl FromStr for SourceSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some((name, path)) = s.split_once('=') else {
            bail!("source `{s}` must look like NAME=PATH");
        };
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
            bail!("source name `{name}` may only use letters, digits, `_`, `-` and `.`");
        }
        Ok(Self {
            name: name.to_string(),
            path: PathBuf::from(path),
        })
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.name, self.path.display())
    }
}
