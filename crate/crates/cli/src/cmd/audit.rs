use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use capbias_core::audit::{
    aggregate_parallel, ingest, render_report, DatasetDescriptor, ReportFormat, SourceDescriptor, SourceKind,
};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{jsonl, write_file};
use crate::config::{config_error, Common, Outcome};
use crate::Run;

fn parse_format(text: &str) -> Result<ReportFormat, String> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|_| format!("unknown format {text:?} (expected json, csv or svg)"))
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Dataset descriptor JSON (repeatable). Relative paths inside resolve
    /// against the descriptor's directory.
    #[arg(long)]
    pub dataset: Vec<PathBuf>,
    /// Scan a local directory of images instead of using a descriptor.
    #[arg(long, conflicts_with = "manifest")]
    pub dir: Option<PathBuf>,
    /// Read a JSONL manifest instead of using a descriptor.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Dataset name for --dir or --manifest.
    #[arg(long)]
    pub name: Option<String>,
    /// Artifact formats (repeatable); all three by default.
    #[arg(long, value_parser = parse_format)]
    pub format: Vec<ReportFormat>,
}

fn inline_descriptor(name: &str, kind: SourceKind, path: &Path) -> DatasetDescriptor {
    DatasetDescriptor {
        name: name.to_string(),
        source: SourceDescriptor {
            kind,
            path: Some(path.to_path_buf()),
            urls: None,
            rate_limit: None,
            prefix_bytes: None,
            retries: None,
            timeout_s: None,
            max_failure_ratio: None,
        },
    }
}

impl AuditArgs {
    fn descriptors(&self) -> anyhow::Result<Vec<(DatasetDescriptor, PathBuf)>> {
        let mut out = Vec::new();
        for path in &self.dataset {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let desc = DatasetDescriptor::from_json(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            out.push((desc, base));
        }
        let name = self.name.as_deref().unwrap_or("local");
        if let Some(dir) = &self.dir {
            out.push((inline_descriptor(name, SourceKind::Scan, dir), PathBuf::new()));
        }
        if let Some(manifest) = &self.manifest {
            out.push((inline_descriptor(name, SourceKind::Manifest, manifest), PathBuf::new()));
        }
        if out.is_empty() {
            return Err(config_error("nothing to audit: give --dataset, --dir or --manifest"));
        }
        let mut names: Vec<&str> = out.iter().map(|(d, _)| d.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(config_error(format!("dataset name {:?} used twice", w[0])));
        }
        Ok(out)
    }
}

impl Run for AuditArgs {
    fn common(&self) -> &Common {
        &self.common
    }

    fn common_mut(&mut self) -> &mut Common {
        &mut self.common
    }

    fn fill_defaults(&mut self) {
        if self.format.is_empty() {
            self.format = vec![ReportFormat::Json, ReportFormat::Csv, ReportFormat::Svg];
        }
    }

    fn run(&self) -> anyhow::Result<Outcome> {
        let mut outcome = Outcome::default();
        let out = self.common.out();
        for (desc, base) in self.descriptors()? {
            let ingested = ingest(&desc, &base).with_context(|| format!("dataset {}", desc.name))?;
            let report = aggregate_parallel(&ingested.records);
            let dir = out.join(&desc.name);
            outcome.outputs.extend(render_report(&report, &desc.name, &self.format, &dir)?);
            write_file(dir.join("records.jsonl"), &jsonl(&ingested.records)?, &mut outcome.outputs)?;
            if !ingested.failures.is_empty() || !ingested.diagnostics.is_empty() {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["image_id", "kind", "reason"])?;
                for (id, reason) in &ingested.failures {
                    w.write_record([id.as_str(), "unavailable", reason.as_str()])?;
                }
                for (id, reason) in &ingested.diagnostics {
                    w.write_record([id.as_str(), "metadata", reason.as_str()])?;
                }
                write_file(dir.join("problems.csv"), &w.into_inner()?, &mut outcome.outputs)?;
            }
            let pct = |n: u64| if report.total == 0 { 0.0 } else { 100.0 * n as f64 / report.total as f64 };
            println!(
                "{}: {} images, {} obtained, {} with exposure EXIF ({:.1}%)",
                desc.name,
                report.total,
                report.downloaded,
                report.with_exif,
                pct(report.with_exif)
            );
            outcome.skipped += ingested.failures.len();
            outcome.summary.insert(
                desc.name.clone(),
                json!({
                    "total": report.total,
                    "downloaded": report.downloaded,
                    "with_exif": report.with_exif,
                    "with_exif_pct": pct(report.with_exif),
                }),
            );
        }
        Ok(outcome)
    }
}
