//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment; keys are dotted paths
//! (`f.kind`, `box.0`). Values are typed at the call site: scalars, lists
//! (whitespace- or comma-separated), and intervals written `lo..hi` with
//! `inf` / `-inf` for unbounded ends.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Parsed configuration: ordered key -> raw value text.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                bail!("line {}: empty key", lineno + 1);
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Config::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| anyhow!("missing required key `{key}`"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.require(key)?).with_context(|| format!("key `{key}`"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some(v) => parse_f64(v).with_context(|| format!("key `{key}`")),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        v.parse::<usize>()
            .with_context(|| format!("key `{key}`: expected a nonnegative integer, got `{v}`"))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            Some(v) => v
                .parse::<usize>()
                .with_context(|| format!("key `{key}`: expected integer, got `{v}`")),
            None => Ok(default),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            Some(v) => v
                .parse::<u64>()
                .with_context(|| format!("key `{key}`: expected integer, got `{v}`")),
            None => Ok(default),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    /// Whitespace- or comma-separated list of reals.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        list_of(self.require(key)?, parse_f64).with_context(|| format!("key `{key}`"))
    }

    /// A list of `lo..hi` interval tokens.
    pub fn intervals(&self, key: &str) -> Result<Vec<(f64, f64)>> {
        list_of(self.require(key)?, parse_interval).with_context(|| format!("key `{key}`"))
    }

    /// All entries as a JSON object (for output provenance).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.entries
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }
}

fn list_of<T>(text: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .with_context(|| format!("expected a real number, got `{s}`")),
    }
}

fn parse_interval(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| anyhow!("expected `lo..hi`, got `{s}`"))?;
    Ok((parse_f64(lo)?, parse_f64(hi)?))
}
