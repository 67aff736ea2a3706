//! Layered configuration: built-in defaults, then a `--config` file, then flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::Failure;

pub const DEFAULTS: &str = include_str!("../defaults.toml");
pub const CONFIG_VERSION: i64 = 1;

/// Keys that never reach the CSV header: they name output locations and do
/// not change any number in the table.
const NOT_ECHOED: &[&str] = &["svg"];

pub struct Resolved<T> {
    pub value: T,
    table: Table,
}

impl<T> Resolved<T> {
    /// Resolved keys in sorted order, for the CSV header.
    pub fn echo(&self) -> Vec<(&str, String)> {
        self.table
            .iter()
            .filter(|(k, _)| !NOT_ECHOED.contains(&k.as_str()))
            .map(|(k, v)| {
                let text = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.as_str(), text)
            })
            .collect()
    }
}

fn parse(text: &str, origin: &str) -> Result<Table, Failure> {
    let table: Table = text
        .parse()
        .map_err(|e| Failure::validation(format!("{origin}: {e}")))?;
    match table.get("version") {
        None => {}
        Some(Value::Integer(v)) if *v == CONFIG_VERSION => {}
        Some(v) => {
            return Err(Failure::validation(format!(
                "{origin}: unsupported config version {v}, expected {CONFIG_VERSION}"
            )))
        }
    }
    Ok(table)
}

fn section(table: &Table, name: &str, origin: &str) -> Result<Table, Failure> {
    match table.get(name) {
        None => Ok(Table::new()),
        Some(Value::Table(t)) => Ok(t.clone()),
        Some(_) => Err(Failure::validation(format!("{origin}: `{name}` must be a table"))),
    }
}

/// Merges the `section` of defaults, config file and flags, in rising priority.
pub fn resolve<T: DeserializeOwned, F: Serialize>(
    section_name: &str,
    config_file: Option<&Path>,
    flags: &F,
) -> Result<Resolved<T>, Failure> {
    let defaults = parse(DEFAULTS, "built-in defaults")?;
    let mut merged = section(&defaults, section_name, "built-in defaults")?;
    if let Some(path) = config_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
        let origin = path.display().to_string();
        let file = parse(&text, &origin)?;
        for key in file.keys() {
            if key != "version" && !defaults.contains_key(key) {
                return Err(Failure::validation(format!("{origin}: unknown section `{key}`")));
            }
        }
        for (k, v) in section(&file, section_name, &origin)? {
            if !merged.contains_key(&k) {
                return Err(Failure::validation(format!("{origin}: unknown key `{section_name}.{k}`")));
            }
            merged.insert(k, v);
        }
    }
    let flags = Value::try_from(flags).map_err(|e| Failure::validation(e.to_string()))?;
    if let Value::Table(t) = flags {
        merged.extend(t);
    }
    let value = Value::Table(merged.clone())
        .try_into()
        .map_err(|e| Failure::validation(format!("configuration `{section_name}`: {e}")))?;
    Ok(Resolved { value, table: merged })
}
