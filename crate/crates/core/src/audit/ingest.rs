use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fetch::{fetch_remote, FetchConfig, FetchError};
use super::AuditRecord;
use crate::exif::{
    read_manifest, record_from_bytes, resolve_local_row, scan_corpus, ExifRecord, ScanError,
    ScanSource,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid dataset descriptor: {0}")]
    Descriptor(String),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Scan,
    Manifest,
    Fetch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDescriptor {
    pub kind: SourceKind,
    /// Directory (scan), JSONL manifest, or URL list file (fetch).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urls: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_failure_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDescriptor {
    pub name: String,
    pub source: SourceDescriptor,
}

impl DatasetDescriptor {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        serde_json::from_str(text).map_err(|e| IngestError::Descriptor(e.to_string()))
    }

    pub fn fetch_config(&self) -> FetchConfig {
        let s = &self.source;
        let d = FetchConfig::default();
        FetchConfig {
            rate_limit: s.rate_limit.unwrap_or(d.rate_limit),
            prefix_bytes: s.prefix_bytes,
            retries: s.retries.unwrap_or(d.retries),
            timeout: s.timeout_s.map(Duration::from_secs_f64).unwrap_or(d.timeout),
            max_failure_ratio: s.max_failure_ratio.unwrap_or(d.max_failure_ratio),
            min_attempts: d.min_attempts,
        }
    }
}

#[derive(Debug, Default)]
pub struct IngestOutput {
    pub records: Vec<AuditRecord>,
    /// Items that could not be obtained: `(image_id, reason)`.
    pub failures: Vec<(String, String)>,
    /// Items obtained but with damaged metadata: `(image_id, reason)`.
    pub diagnostics: Vec<(String, String)>,
}

impl IngestOutput {
    fn obtained(&mut self, dataset: &str, id: &str, exif: ExifRecord, diagnostic: Option<String>) {
        if let Some(d) = diagnostic {
            self.diagnostics.push((id.to_string(), d));
        }
        self.records.push(AuditRecord::new(dataset, id, exif, true));
    }

    fn failed(&mut self, dataset: &str, id: &str, reason: String) {
        self.failures.push((id.to_string(), reason));
        self.records
            .push(AuditRecord::new(dataset, id, ExifRecord::empty(), false));
    }

    fn fetched(&mut self, dataset: &str, pending: Vec<(String, String)>, cfg: &FetchConfig) -> Result<(), IngestError> {
        let urls: Vec<String> = pending.iter().map(|(_, u)| u.clone()).collect();
        let fetched = fetch_remote(&urls, cfg)?;
        for ((id, _), f) in pending.iter().zip(fetched) {
            match f.result {
                Ok(bytes) => {
                    let (exif, diag) = record_from_bytes(&bytes);
                    self.obtained(dataset, id, exif, diag);
                }
                Err(e) => self.failed(dataset, id, e.to_string()),
            }
        }
        Ok(())
    }
}

/// Resolves a descriptor into audit records. `base` anchors relative paths.
///
/// Unobtainable items become records with `fetched == false` so that the
/// report's totals still count them.
pub fn ingest(desc: &DatasetDescriptor, base: &Path) -> Result<IngestOutput, IngestError> {
    let name = desc.name.as_str();
    let src = &desc.source;
    let resolve = |p: &Path| base.join(p);
    let mut out = IngestOutput::default();
    match src.kind {
        SourceKind::Scan => {
            let dir = src
                .path
                .as_deref()
                .ok_or_else(|| IngestError::Descriptor("scan source needs a path".into()))?;
            let scanned = scan_corpus(&ScanSource::Directory(resolve(dir)))?;
            for item in scanned.items {
                out.obtained(name, &item.image_id, item.record, item.diagnostic);
            }
            for (id, reason) in scanned.errors {
                out.failed(name, &id, reason);
            }
        }
        SourceKind::Manifest => {
            let path = src
                .path
                .as_deref()
                .ok_or_else(|| IngestError::Descriptor("manifest source needs a path".into()))?;
            let path = resolve(path);
            let file = fs::File::open(&path).map_err(|source| IngestError::Io {
                path: path.clone(),
                source,
            })?;
            let (rows, errors) = read_manifest(BufReader::new(file)).map_err(|source| IngestError::Io {
                path: path.clone(),
                source,
            })?;
            for (line, reason) in errors {
                out.failed(name, &line, reason);
            }
            let manifest_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            let mut pending = Vec::new();
            let local: Vec<_> = rows
                .par_iter()
                .filter(|row| row.has_tag_columns() || row.path.is_some() || row.url.is_none())
                .map(|row| (row.image_id.clone(), resolve_local_row(row, &manifest_dir)))
                .collect();
            for row in &rows {
                if !row.has_tag_columns() && row.path.is_none() {
                    if let Some(url) = &row.url {
                        pending.push((row.image_id.clone(), url.clone()));
                    }
                }
            }
            for (id, result) in local {
                match result {
                    Ok((exif, diag)) => out.obtained(name, &id, exif, diag),
                    Err(reason) => out.failed(name, &id, reason),
                }
            }
            if !pending.is_empty() {
                out.fetched(name, pending, &desc.fetch_config())?;
            }
        }
        SourceKind::Fetch => {
            let urls = match (&src.urls, &src.path) {
                (Some(urls), _) => urls.clone(),
                (None, Some(p)) => {
                    let path = resolve(p);
                    fs::read_to_string(&path)
                        .map_err(|source| IngestError::Io { path, source })?
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty() && !l.starts_with('#'))
                        .map(str::to_string)
                        .collect()
                }
                (None, None) => {
                    return Err(IngestError::Descriptor("fetch source needs urls or a path".into()))
                }
            };
            let pending = urls.into_iter().map(|u| (u.clone(), u)).collect();
            out.fetched(name, pending, &desc.fetch_config())?;
        }
    }
    Ok(out)
}
