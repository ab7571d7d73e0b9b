//! Merging command-line flags with an optional TOML file.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Flags that were given, overlaid by every key of the config file.
pub fn merged_table(flags: &impl Serialize, config: Option<&Path>) -> Result<toml::Table> {
    let mut table = match toml::Value::try_from(flags).context("serializing flags")? {
        toml::Value::Table(t) => t,
        _ => unreachable!("flag structs serialize to tables"),
    };
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let overlay: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        for (key, value) in overlay {
            table.insert(key, value);
        }
    }
    Ok(table)
}

/// Deserializes the merged table; unknown keys are rejected by the target.
pub fn resolve<T: DeserializeOwned>(flags: &impl Serialize, config: Option<&Path>) -> Result<T> {
    let table = merged_table(flags, config)?;
    toml::Value::Table(table)
        .try_into()
        .with_context(|| match config {
            Some(p) => format!("invalid settings (config {})", p.display()),
            None => "invalid settings".to_string(),
        })
}
