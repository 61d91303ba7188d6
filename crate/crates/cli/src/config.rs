//! Flat `key = value` config files with command-line overrides.
//!
//! Precedence: explicit command-line flag, then config file, then the
//! built-in default. Unknown keys are rejected so typos fail fast.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigMap { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn check_known(&self, known: &[&str]) -> Result<(), CliError> {
        for key in self.keys() {
            if !known.contains(&key) {
                return Err(CliError::config(format!("unknown config key `{key}`")));
            }
        }
        Ok(())
    }
}

/// Resolves a typed parameter: flag, then config, then default.
pub fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    default: Option<T>,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(raw) = cfg.get(key) {
        return raw
            .parse()
            .map_err(|_| CliError::config(format!("config key `{key}`: cannot parse {raw:?}")));
    }
    default.ok_or_else(|| CliError::config(format!("missing required parameter `{key}`")))
}
