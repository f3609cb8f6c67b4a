use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use capbias_core::audit::{render_report, ReportFormat, ReportSummary};
use capbias_core::eval::{write_metric_artifacts, MetricReport};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{config_error, Common, Outcome};
use crate::Run;

/// Re-renders saved `metrics.json` and `report.json` files.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// metrics.json written by `score` (repeatable).
    #[arg(long)]
    pub metrics: Vec<PathBuf>,
    /// report.json written by `audit` (repeatable).
    #[arg(long)]
    pub audit: Vec<PathBuf>,
    /// Draw SVG figures for metrics too.
    #[arg(long)]
    pub svg: bool,
}

/// Output subdirectory for an input file: its parent directory's name,
/// made unique with a numeric suffix.
fn subdir(path: &Path, used: &mut BTreeSet<String>) -> String {
    let base = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .filter(|n| !n.is_empty() && *n != "." && *n != "..")
        .unwrap_or("metrics")
        .to_string();
    let mut name = base.clone();
    let mut i = 2;
    while !used.insert(name.clone()) {
        name = format!("{base}-{i}");
        i += 1;
    }
    name
}

impl Run for ReportArgs {
    fn common(&self) -> &Common {
        &self.common
    }

    fn common_mut(&mut self) -> &mut Common {
        &mut self.common
    }

    fn fill_defaults(&mut self) {}

    fn run(&self) -> anyhow::Result<Outcome> {
        if self.metrics.is_empty() && self.audit.is_empty() {
            return Err(config_error("nothing to render: give --metrics or --audit"));
        }
        let out = self.common.out();
        let mut outcome = Outcome::default();
        let mut used = BTreeSet::new();
        for path in &self.metrics {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let report = MetricReport::from_json(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            let dir = out.join(subdir(path, &mut used));
            outcome.outputs.extend(write_metric_artifacts(&report, &dir, self.svg)?);
        }
        let mut datasets = Vec::new();
        for path in &self.audit {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let summary: ReportSummary =
                serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            if !used.insert(summary.dataset.clone()) {
                return Err(config_error(format!("dataset {:?} given twice", summary.dataset)));
            }
            let formats = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Svg];
            let dir = out.join(&summary.dataset);
            outcome
                .outputs
                .extend(render_report(&summary.to_report(), &summary.dataset, &formats, &dir)?);
            datasets.push(json!({"dataset": summary.dataset, "with_exif_pct": summary.with_exif_pct}));
        }
        outcome.summary.insert("metrics".into(), json!(self.metrics.len()));
        outcome.summary.insert("audits".into(), json!(datasets));
        println!("rendered {} file(s)", outcome.outputs.len());
        Ok(outcome)
    }
}
