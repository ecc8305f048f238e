use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Bad flags, config files or flag combinations (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Recursively overlays `over` onto `base`; non-object values replace.
pub fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, o) if !o.is_null() => *b = o.clone(),
        _ => {}
    }
}

/// Object of the flags that were actually given.
pub fn flags(pairs: &[(&str, Option<Value>)]) -> Value {
    Value::Object(pairs.iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect::<Map<_, _>>())
}

/// Resolved global settings shared by every subcommand.
pub struct Ctx {
    pub layers: Layers,
    pub seed: u64,
    pub workers: usize,
}

/// Defaults < config file < flags.
pub struct Layers {
    file: Value,
}

impl Layers {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => Value::Object(Map::new()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| usage(format!("config {}: {e}", p.display())))?;
                let v: Value =
                    serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))?;
                if !v.is_object() {
                    return Err(usage(format!("config {}: top level must be an object", p.display())));
                }
                v
            }
        };
        Ok(Self { file })
    }

    pub fn top<T: DeserializeOwned>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| usage(format!("config `{key}`: {e}"))),
            None => Ok(default),
        }
    }

    pub fn section<T: Serialize + DeserializeOwned>(&self, key: &str, default: T, flags: Value) -> Result<T> {
        let mut v = serde_json::to_value(default).expect("defaults serialize");
        if let Some(s) = self.file.get(key) {
            merge(&mut v, s);
        }
        merge(&mut v, &flags);
        serde_json::from_value(v).map_err(|e| usage(format!("config `{key}`: {e}")))
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Echo of the fully resolved configuration; the only file carrying timestamps.
pub fn write_run_json(out: &Path, command: &str, resolved: &Value, started_at: &str) -> Result<()> {
    let run = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "started_at": started_at,
        "finished_at": chrono::Utc::now().to_rfc3339(),
        "config": resolved,
    });
    write_json(&out.join("run.json"), &run)
}
