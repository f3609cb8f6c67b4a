//! Config-file overlay, run records and exit statuses.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Options shared by every subcommand.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct Common {
    /// Directory for all artifacts, including run.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with default values for any flag of this subcommand
    /// (keys are flag names with underscores). Flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "CAPBIAS_JOBS")]
    pub jobs: Option<usize>,
}

impl Common {
    pub fn fill_defaults(&mut self) {
        self.out.get_or_insert_with(|| PathBuf::from("out"));
        self.seed.get_or_insert(0);
        self.jobs
            .get_or_insert_with(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    }

    pub fn out(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new("out"))
    }
}

/// Invalid configuration; reported with exit status 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn is_unset(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => true,
        Value::Array(a) => a.is_empty(),
        _ => false,
    }
}

/// Overlays explicitly given flags onto the config file named by
/// `--config`, then re-reads the result as `T`. Keys that `T` does not know
/// are rejected.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> anyhow::Result<T> {
    let mut merged = match config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => return Err(config_error(format!("{}: config must be a JSON object", path.display()))),
                Err(e) => return Err(config_error(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags)? else {
        unreachable!("argument structs serialize as objects");
    };
    for (k, v) in given {
        if !is_unset(&v) {
            merged.insert(k, v);
        }
    }
    let keys: Vec<String> = merged.keys().cloned().collect();
    let resolved: T = serde_json::from_value(Value::Object(merged))
        .map_err(|e| config_error(format!("config: {e}")))?;
    let Value::Object(known) = serde_json::to_value(&resolved)? else {
        unreachable!();
    };
    if let Some(unknown) = keys.iter().find(|k| !known.contains_key(*k)) {
        return Err(config_error(format!("config: unknown field `{unknown}`")));
    }
    Ok(resolved)
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// Items that could not be processed.
    pub skipped: usize,
    pub summary: Map<String, Value>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config: &'a Value,
    status: &'static str,
    skipped: usize,
    outputs: Vec<String>,
    summary: &'a Map<String, Value>,
}

/// Writes `run.json` into the output directory. Paths are recorded relative
/// to it so identical runs give identical records.
pub fn write_run_record(out: &Path, subcommand: &str, config: &Value, outcome: &Outcome) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(out)?;
    let mut outputs: Vec<String> = outcome
        .outputs
        .iter()
        .map(|p| p.strip_prefix(out).unwrap_or(p).to_string_lossy().into_owned())
        .collect();
    outputs.sort();
    outputs.dedup();
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        config,
        status: if outcome.skipped > 0 { "partial" } else { "ok" },
        skipped: outcome.skipped,
        outputs,
        summary: &outcome.summary,
    };
    let path = out.join("run.json");
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default)]
    struct Demo {
        lux: Vec<f64>,
        iso: Option<u32>,
        verbose: bool,
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"lux":[10],"iso":200,"verbose":true}"#).unwrap();
        let flags = Demo {
            iso: Some(800),
            ..Demo::default()
        };
        let r = resolve(&flags, Some(&cfg)).unwrap();
        assert_eq!(
            r,
            Demo {
                lux: vec![10.0],
                iso: Some(800),
                verbose: true
            }
        );
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"luxx":[10]}"#).unwrap();
        let e = resolve(&Demo::default(), Some(&cfg)).unwrap_err();
        assert!(e.to_string().contains("luxx"), "{e}");
        assert!(e.downcast_ref::<ConfigError>().is_some());
        fs::write(&cfg, r#"{"iso":"high"}"#).unwrap();
        assert!(resolve(&Demo::default(), Some(&cfg)).is_err());
    }
}
