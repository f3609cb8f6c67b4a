use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use super::{parse_capture_datetime, parse_exif, ExifRecord};
use crate::rational::ExifRational;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("source contains no images or manifest rows")]
    EmptySource,
    #[error("cannot read source {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Clone, Debug)]
pub enum ScanSource {
    Directory(PathBuf),
    Manifest(PathBuf),
}

/// One row of a JSONL manifest. Tag columns, when present, take precedence
/// over reading the image itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, deserialize_with = "lenient_rational", skip_serializing_if = "Option::is_none")]
    pub exposure_time: Option<ExifRational>,
    #[serde(default, deserialize_with = "lenient_rational", skip_serializing_if = "Option::is_none")]
    pub f_number: Option<ExifRational>,
    #[serde(default, deserialize_with = "lenient_u32", skip_serializing_if = "Option::is_none")]
    pub iso: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure_program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datetime: Option<String>,
}

impl ManifestRow {
    pub fn has_tag_columns(&self) -> bool {
        self.exposure_time.is_some()
            || self.f_number.is_some()
            || self.iso.is_some()
            || self.exposure_program.is_some()
            || self.datetime.is_some()
    }

    /// Builds a record from pre-extracted columns, or `None` if the row has
    /// none and the image must be read.
    pub fn tag_record(&self) -> Option<ExifRecord> {
        if !self.has_tag_columns() {
            return None;
        }
        let text = |s: &Option<String>| {
            s.as_deref()
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_string)
        };
        Some(ExifRecord {
            exposure_time: self.exposure_time.filter(ExifRational::is_positive),
            f_number: self.f_number.filter(ExifRational::is_positive),
            iso: self.iso.filter(|&i| i > 0),
            exposure_program: text(&self.exposure_program),
            capture_datetime: self.datetime.as_deref().and_then(parse_capture_datetime),
            make: None,
            model: None,
            byte_order: None,
            has_exif: true,
        })
    }
}

fn lenient_rational<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ExifRational>, D::Error> {
    let value = serde_json::Value::deserialize(d)?;
    Ok(match value {
        serde_json::Value::Null => None,
        other => serde_json::from_value(other).ok(),
    })
}

fn lenient_u32<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u32>, D::Error> {
    let value = serde_json::Value::deserialize(d)?;
    Ok(match value {
        serde_json::Value::Number(n) => n.as_u64().and_then(|v| u32::try_from(v).ok()),
        serde_json::Value::String(s) => s.trim().parse().ok(),
        _ => None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanItem {
    pub image_id: String,
    pub record: ExifRecord,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Default)]
pub struct ScanOutput {
    pub items: Vec<ScanItem>,
    /// Entries that could not be read at all, as `(entry, message)`.
    pub errors: Vec<(String, String)>,
}

/// Parses an in-memory image into a record, folding every failure into a
/// diagnostic.
pub(crate) fn record_from_bytes(bytes: &[u8]) -> (ExifRecord, Option<String>) {
    match parse_exif(bytes) {
        Ok(parsed) => (parsed.record, parsed.diagnostic.map(|m| m.to_string())),
        Err(e) => (ExifRecord::empty(), Some(e.to_string())),
    }
}

fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            matches!(
                e.to_ascii_lowercase().as_str(),
                "jpg" | "jpeg" | "jpe" | "tif" | "tiff"
            )
        })
        .unwrap_or(false)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if is_image_path(&path) {
            out.push(path);
        }
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(reader: R) -> io::Result<(Vec<ManifestRow>, Vec<(String, String)>)> {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ManifestRow>(&line) {
            Ok(row) => rows.push(row),
            Err(e) => errors.push((format!("line {}", n + 1), e.to_string())),
        }
    }
    Ok((rows, errors))
}

/// Resolves a manifest row to a record without network access.
pub(crate) fn resolve_local_row(
    row: &ManifestRow,
    base: &Path,
) -> Result<(ExifRecord, Option<String>), String> {
    if let Some(record) = row.tag_record() {
        return Ok((record, None));
    }
    match &row.path {
        Some(p) => {
            let bytes = fs::read(base.join(p)).map_err(|e| format!("{p}: {e}"))?;
            Ok(record_from_bytes(&bytes))
        }
        None if row.url.is_some() => Err("row has only a url; fetch it through an audit".into()),
        None => Err("row has neither tag columns nor a path".into()),
    }
}

/// Extracts one record per image file or manifest row.
///
/// Damaged files produce `has_exif == false` items with a diagnostic;
/// unreadable entries are reported in [`ScanOutput::errors`] and skipped.
pub fn scan_corpus(source: &ScanSource) -> Result<ScanOutput, ScanError> {
    match source {
        ScanSource::Directory(dir) => {
            let mut files = Vec::new();
            collect_files(dir, &mut files).map_err(|source| ScanError::Io {
                path: dir.clone(),
                source,
            })?;
            if files.is_empty() {
                return Err(ScanError::EmptySource);
            }
            files.sort();
            let results: Vec<_> = files
                .par_iter()
                .map(|path| {
                    let id = path
                        .strip_prefix(dir)
                        .unwrap_or(path)
                        .to_string_lossy()
                        .into_owned();
                    (id, fs::read(path))
                })
                .map(|(id, read)| match read {
                    Ok(bytes) => {
                        let (record, diagnostic) = record_from_bytes(&bytes);
                        Ok(ScanItem {
                            image_id: id,
                            record,
                            diagnostic,
                        })
                    }
                    Err(e) => Err((id, e.to_string())),
                })
                .collect();
            Ok(split(results))
        }
        ScanSource::Manifest(path) => {
            let file = fs::File::open(path).map_err(|source| ScanError::Io {
                path: path.clone(),
                source,
            })?;
            let (rows, mut errors) =
                read_manifest(BufReader::new(file)).map_err(|source| ScanError::Io {
                    path: path.clone(),
                    source,
                })?;
            if rows.is_empty() {
                return Err(ScanError::EmptySource);
            }
            let base = path.parent().unwrap_or(Path::new("."));
            let results: Vec<_> = rows
                .par_iter()
                .map(|row| match resolve_local_row(row, base) {
                    Ok((record, diagnostic)) => Ok(ScanItem {
                        image_id: row.image_id.clone(),
                        record,
                        diagnostic,
                    }),
                    Err(msg) => Err((row.image_id.clone(), msg)),
                })
                .collect();
            let mut out = split(results);
            errors.append(&mut out.errors);
            out.errors = errors;
            Ok(out)
        }
    }
}

fn split(results: Vec<Result<ScanItem, (String, String)>>) -> ScanOutput {
    let mut out = ScanOutput::default();
    for r in results {
        match r {
            Ok(item) => out.items.push(item),
            Err(e) => out.errors.push(e),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_row_with_columns_needs_no_image() {
        let row: ManifestRow = serde_json::from_str(
            r#"{"image_id":"a","path":"missing.jpg","exposure_time":"1/60","f_number":2.8,"iso":"400","datetime":"2008:01:02 03:04:05"}"#,
        )
        .unwrap();
        let (record, diag) = resolve_local_row(&row, Path::new("/nonexistent")).unwrap();
        assert!(diag.is_none());
        assert_eq!(record.exposure_time, Some(ExifRational::new(1, 60).unwrap()));
        assert_eq!(record.f_number, Some(ExifRational::new(28, 10).unwrap()));
        assert_eq!(record.iso, Some(400));
        assert!(record.has_settings());
    }

    #[test]
    fn zero_valued_columns_are_absent() {
        let row: ManifestRow =
            serde_json::from_str(r#"{"image_id":"a","iso":0,"f_number":"0/1"}"#).unwrap();
        let record = row.tag_record().unwrap();
        assert_eq!(record.iso, None);
        assert_eq!(record.f_number, None);
    }

    #[test]
    fn url_only_rows_are_not_local() {
        let row = ManifestRow {
            image_id: "x".into(),
            url: Some("http://example.invalid/x.jpg".into()),
            ..ManifestRow::default()
        };
        assert!(resolve_local_row(&row, Path::new(".")).is_err());
    }

    #[test]
    fn bad_manifest_lines_are_reported() {
        let text = "{\"image_id\":\"a\",\"iso\":100}\nnot json\n\n";
        let (rows, errors) = read_manifest(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].0, "line 2");
    }
}
