use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use capbias_core::eval::{
    read_ground_truth, read_human_answers, read_overrides, read_predictions, score_detection, score_top1,
    score_vqa, write_metric_artifacts, MatchConfig, MetricReport, Overrides, PredictionLog, PredictionRecord,
    SynonymTable, Task, VqaConfig, VqaResult,
};
use capbias_core::sweep::SCENE_CLASSES;
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::write_file;
use crate::config::{config_error, Common, Outcome};
use crate::Run;

fn parse_task(text: &str) -> Result<Task, String> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|_| format!("unknown task {text:?} (expected classification, detection or vqa)"))
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,
    /// Prediction log, JSON lines (repeatable).
    #[arg(long)]
    pub preds: Vec<PathBuf>,
    /// Human answer CSV: subject_id,image_id,question_id,raw_text (vqa only).
    #[arg(long)]
    pub human: Vec<PathBuf>,
    /// Group name for human answers; they are scored as model `human:<group>`.
    #[arg(long)]
    pub human_group: Option<String>,
    /// Ground truth JSONL as written by `simulate`.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// JSON object mapping a true label to accepted alternatives.
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    /// CSV of hand-checked answers: image_id,model,question_id,canonical.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[arg(long)]
    pub iou: Option<f64>,
    /// Include lux in the sensitivity grouping key.
    #[arg(long)]
    pub group_by_lux: bool,
    /// Class names for the categorization question (repeatable).
    #[arg(long)]
    pub classes: Vec<String>,
    /// Do not count images a model never answered as wrong.
    #[arg(long)]
    pub skip_missing: bool,
    /// Also draw SVG curves.
    #[arg(long)]
    pub svg: bool,
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

impl ScoreArgs {
    fn load_predictions(&self) -> anyhow::Result<(Vec<PredictionRecord>, Vec<PredictionRecord>, Vec<String>)> {
        let mut models = Vec::new();
        let mut humans = Vec::new();
        let mut rejected = Vec::new();
        let mut take = |path: &Path, log: PredictionLog, into: &mut Vec<PredictionRecord>| {
            for (line, msg) in log.rejected {
                rejected.push(format!("{}:{line}: {msg}", path.display()));
            }
            into.extend(log.records);
        };
        for path in &self.preds {
            let log = read_predictions(open(path)?).with_context(|| format!("reading {}", path.display()))?;
            take(path, log, &mut models);
        }
        let group = self.human_group.as_deref().unwrap_or("lab");
        for path in &self.human {
            let log = read_human_answers(open(path)?, group).with_context(|| format!("reading {}", path.display()))?;
            take(path, log, &mut humans);
        }
        Ok((models, humans, rejected))
    }
}

impl Run for ScoreArgs {
    fn common(&self) -> &Common {
        &self.common
    }

    fn common_mut(&mut self) -> &mut Common {
        &mut self.common
    }

    fn fill_defaults(&mut self) {
        self.human_group.get_or_insert_with(|| "lab".into());
        self.iou.get_or_insert(0.5);
        if self.classes.is_empty() {
            self.classes = SCENE_CLASSES.iter().map(|c| c.to_string()).collect();
        }
    }

    fn run(&self) -> anyhow::Result<Outcome> {
        let task = self.task.ok_or_else(|| config_error("task: required"))?;
        let gt_path = self.gt.as_deref().ok_or_else(|| config_error("gt: required"))?;
        if self.preds.is_empty() && self.human.is_empty() {
            return Err(config_error("preds: at least one prediction log required"));
        }
        if !self.human.is_empty() && task != Task::Vqa {
            return Err(config_error("human: answers can only be scored for the vqa task"));
        }
        let gts = read_ground_truth(open(gt_path)?).with_context(|| format!("reading {}", gt_path.display()))?;
        let synonyms = match &self.synonyms {
            Some(p) => SynonymTable::from_json(&fs::read_to_string(p)?)
                .map_err(|e| config_error(format!("{}: {e}", p.display())))?,
            None => SynonymTable::default(),
        };
        let (mut models, mut humans, rejected) = self.load_predictions()?;
        // Logs may mix tasks; records for other tasks are set aside, not rejected.
        let before = models.len() + humans.len();
        models.retain(|r| r.task() == task);
        humans.retain(|r| r.task() == task);
        let other_task = before - models.len() - humans.len();

        let mut report = match task {
            Task::Classification => MetricReport::from_top1(&score_top1(&models, &gts, &synonyms), self.group_by_lux),
            Task::Detection => {
                let cfg = MatchConfig::new(self.iou.unwrap_or(0.5)).map_err(|e| config_error(format!("iou: {e}")))?;
                MetricReport::from_detection(&score_detection(&models, &gts, &cfg), self.group_by_lux)
            }
            Task::Vqa => {
                let cfg = VqaConfig::new(self.classes.clone());
                let overrides: Overrides = match &self.overrides {
                    Some(p) => read_overrides(open(p)?).map_err(|e| config_error(format!("{}: {e}", p.display())))?,
                    None => Overrides::default(),
                };
                let mut result = score_vqa(&models, &gts, &synonyms, &cfg, &overrides, self.skip_missing);
                if !humans.is_empty() {
                    let h = score_vqa(&humans, &gts, &synonyms, &cfg, &overrides, true);
                    result = VqaResult {
                        scores: [result.scores, h.scores].concat(),
                        missing: result.missing + h.missing,
                        unknown_images: result.unknown_images + h.unknown_images,
                    };
                }
                let out = self.common.out();
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["model", "image_id", "question_id", "raw_text", "canonical"])?;
                for s in result.needs_review() {
                    w.write_record([
                        s.model.as_str(),
                        s.image_id.as_str(),
                        &format!("{:?}", s.question),
                        s.raw_text.as_deref().unwrap_or(""),
                        s.canonical.as_deref().unwrap_or(""),
                    ])?;
                }
                fs::create_dir_all(out)?;
                fs::write(out.join("needs_review.csv"), w.into_inner()?)?;
                MetricReport::from_vqa(&result, self.group_by_lux)
            }
        };
        report.diagnostics.rejected_lines = rejected.len();

        let out = self.common.out();
        let mut outcome = Outcome {
            outputs: write_metric_artifacts(&report, out, self.svg)?,
            ..Outcome::default()
        };
        if task == Task::Vqa {
            outcome.outputs.push(out.join("needs_review.csv"));
        }
        if !rejected.is_empty() {
            let mut text = rejected.join("\n");
            text.push('\n');
            write_file(out.join("rejected.txt"), text.as_bytes(), &mut outcome.outputs)?;
        }
        for line in rejected.iter().take(5) {
            eprintln!("rejected {line}");
        }
        let d = &report.diagnostics;
        outcome.skipped = d.rejected_lines + d.unknown_images;
        outcome.summary.insert("diagnostics".into(), serde_json::to_value(d)?);
        outcome.summary.insert("models".into(), json!(model_names(&report)));
        outcome.summary.insert("other_task".into(), json!(other_task));
        println!(
            "{} model(s); {} missing, {} rejected, {} unknown image(s)",
            model_names(&report).len(),
            d.missing_predictions,
            d.rejected_lines,
            d.unknown_images
        );
        Ok(outcome)
    }
}

fn model_names(report: &MetricReport) -> Vec<&str> {
    report
        .classification
        .keys()
        .chain(report.detection.keys())
        .chain(report.vqa.keys())
        .map(String::as_str)
        .collect()
}
