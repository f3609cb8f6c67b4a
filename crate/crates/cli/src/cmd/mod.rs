pub mod audit;
pub mod ev;
pub mod plan;
pub mod report;
pub mod score;
pub mod simulate;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use capbias_core::exposure::GridFile;

use crate::config::config_error;

/// Grid and anchors from `--grid`, or the built-in 630-combination grid.
pub fn load_grid(path: Option<&Path>) -> anyhow::Result<GridFile> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading grid {}", p.display()))?;
            GridFile::from_json(&text).map_err(|e| config_error(format!("grid {}: {e}", p.display())))
        }
        None => Ok(GridFile::snap()),
    }
}

/// Parses `LUX=EV` anchor overrides.
pub fn parse_anchor(text: &str) -> anyhow::Result<(f64, i32)> {
    let (lux, ev) = text
        .split_once('=')
        .ok_or_else(|| config_error(format!("anchor {text:?}: expected LUX=EV")))?;
    let lux: f64 = lux.trim().parse().map_err(|_| config_error(format!("anchor {text:?}: bad lux")))?;
    let ev: i32 = ev.trim().parse().map_err(|_| config_error(format!("anchor {text:?}: bad EV")))?;
    if !(lux > 0.0 && lux.is_finite()) {
        return Err(config_error(format!("anchor {text:?}: lux must be positive")));
    }
    Ok((lux, ev))
}

pub fn write_file(path: PathBuf, bytes: &[u8], outputs: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    outputs.push(path);
    Ok(())
}

pub fn jsonl<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.push(b'\n');
    }
    Ok(out)
}
