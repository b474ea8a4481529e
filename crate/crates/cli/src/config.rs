use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cqcode::code::CPolicy;
use cqcode::Limits;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Bad user input that never reached the library (config syntax, list parsing, missing files).
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// The whole config file: one optional table per command plus shared limits.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub limits: Option<toml::Value>,
    pub decompose: Option<toml::Value>,
    pub codebook: Option<toml::Value>,
    pub simulate: Option<toml::Value>,
    pub exponent: Option<toml::Value>,
    pub verify: Option<toml::Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = read_input(path)?;
        toml::from_str(&text).map_err(|e| input(format!("config {}: {e}", path.display())))
    }
}

pub fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

/// Overlays every flag that was given onto the matching config table.
pub fn merge<T: Serialize + DeserializeOwned>(section: Option<&toml::Value>, flags: &T, name: &str) -> Result<T> {
    let mut base = match section {
        Some(v) => serde_json::to_value(v).context("config to json")?,
        None => serde_json::Value::Object(Default::default()),
    };
    let serde_json::Value::Object(map) = &mut base else {
        return Err(input(format!("config section [{name}] must be a table")));
    };
    if let serde_json::Value::Object(given) = serde_json::to_value(flags).context("flags to json")? {
        for (k, v) in given {
            if !v.is_null() {
                map.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(|e| input(format!("config section [{name}]: {e}")))
}

/// Config limits, then the `CQCODE_DIM_CAP` env var, then flags.
pub fn resolve_limits(section: Option<&toml::Value>, dim_cap: Option<usize>, eig_tol: Option<f64>) -> Result<Limits> {
    let mut limits: Limits = match section {
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e| input(format!("config section [limits]: {e}")))?,
        None => Limits::default(),
    };
    if let Ok(raw) = std::env::var("CQCODE_DIM_CAP") {
        limits.dim_cap = raw
            .trim()
            .parse()
            .map_err(|_| input(format!("CQCODE_DIM_CAP={raw:?} is not a dimension")))?;
    }
    if let Some(cap) = dim_cap {
        limits.dim_cap = cap;
    }
    if let Some(tol) = eig_tol {
        limits.eig_tol = tol;
    }
    if !(limits.eig_tol > 0.0 && limits.eig_tol < 1.0) {
        return Err(input(format!("eig_tol {} must lie in (0, 1)", limits.eig_tol)));
    }
    Ok(limits)
}

pub fn require<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| input(format!("missing required setting {what:?} (flag or config)")))
}

/// `"1/2, 1/2"` or `"0.25,0.75"`; normalization is checked later against the channel.
pub fn parse_weights(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            let part = part.trim();
            let value = match part.split_once('/') {
                Some((a, b)) => {
                    let a: f64 = a.trim().parse().map_err(|_| input(format!("bad weight {part:?}")))?;
                    let b: f64 = b.trim().parse().map_err(|_| input(format!("bad weight {part:?}")))?;
                    if b == 0.0 {
                        return Err(input(format!("zero denominator in {part:?}")));
                    }
                    a / b
                }
                None => part.parse().map_err(|_| input(format!("bad weight {part:?}")))?,
            };
            Ok(value)
        })
        .collect()
}

/// `"2,3,5"` or an inclusive range `"2..6"`.
pub fn parse_list(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| input(format!("bad range {text:?}")))?;
        let b: usize = b.trim().parse().map_err(|_| input(format!("bad range {text:?}")))?;
        if a > b {
            return Err(input(format!("empty range {text:?}")));
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| input(format!("bad list entry {s:?} in {text:?}")))
        })
        .collect()
}

pub fn parse_policy(kind: Option<&str>, value: Option<f64>) -> Result<CPolicy> {
    match (kind.unwrap_or("rate-only"), value) {
        ("rate-only", None) => Ok(CPolicy::RateOnly),
        ("channel-hinted", None) => Ok(CPolicy::ChannelHinted),
        ("fixed", Some(c)) => Ok(CPolicy::Fixed(c)),
        ("fixed", None) => Err(input("policy \"fixed\" needs c-value")),
        ("rate-only" | "channel-hinted", Some(_)) => Err(input("c-value only applies to policy \"fixed\"")),
        (other, _) => Err(input(format!(
            "unknown policy {other:?}; expected fixed, rate-only or channel-hinted"
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Explicit format wins; otherwise `.json` means JSON and anything else CSV.
pub fn output_format(explicit: Option<&str>, path: &Path) -> Result<Format> {
    match explicit {
        Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        Some(other) => Err(input(format!("unknown format {other:?}; expected csv or json"))),
        None if path.extension().is_some_and(|e| e == "json") => Ok(Format::Json),
        None => Ok(Format::Csv),
    }
}

pub fn write_output(path: &PathBuf, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
