//! Config files and `key=value` overrides.
//!
//! A config is a flat TOML table whose keys are the fields of
//! [`RunConfig`]; anything missing takes its default. A run manifest
//! (`manifest.json`) is also accepted, in which case its `config` record is
//! used, so a finished run can be replayed from its own manifest.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use hcfreq_core::config::RunConfig;
use sha2::{Digest, Sha256};

/// Parses `key=value`. The value is read as a TOML literal when possible and
/// as a bare string otherwise, so `mask=W_imag+X_imag` needs no quoting.
pub fn parse_override(s: &str) -> anyhow::Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("override {s:?} is not of the form key=value"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        bail!("override {s:?} has an empty key");
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// Reads the table behind a config path without interpreting it.
pub fn read_table(path: &Path) -> anyhow::Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let json: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let cfg = json
            .get("config")
            .ok_or_else(|| anyhow!("{} has no \"config\" record", path.display()))?;
        let cfg: RunConfig = serde_json::from_value(cfg.clone()).with_context(|| format!("config in {}", path.display()))?;
        return to_table(&cfg);
    }
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn to_table(cfg: &RunConfig) -> anyhow::Result<toml::Table> {
    Ok(toml::Table::try_from(cfg)?)
}

/// Merges file, overrides and an explicit seed, in increasing precedence.
/// The result is not validated.
pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut table = match path {
        Some(p) => read_table(p)?,
        None => toml::Table::new(),
    };
    for o in overrides {
        let (k, v) = parse_override(o)?;
        table.insert(k, v);
    }
    if let Some(s) = seed {
        table.insert("seed".into(), toml::Value::Integer(i64::try_from(s).context("seed exceeds i64")?));
    }
    let cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid config")?;
    Ok(cfg)
}

/// The canonical text of a config, as written next to each run.
pub fn to_toml(cfg: &RunConfig) -> anyhow::Result<String> {
    Ok(toml::to_string(cfg)?)
}

/// First 12 hex digits of the SHA-256 of the canonical JSON of `cfg`.
pub fn config_hash(cfg: &RunConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serialises");
    Sha256::digest(&json)[..6].iter().map(|b| format!("{b:02x}")).collect()
}
