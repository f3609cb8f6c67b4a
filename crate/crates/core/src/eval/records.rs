use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Read};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::sweep::GroundTruth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Detection,
    Vqa,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Detection => "detection",
            Task::Vqa => "vqa",
        })
    }
}

/// Open-ended (Q1, Q2) and multiple-choice (Q3, Q4) VQA prompts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionId {
    /// Which class? (open-ended)
    Q1,
    /// How many? (open-ended)
    Q2,
    /// Which class? (multiple choice)
    Q3,
    /// How many? (multiple choice)
    Q4,
}

impl QuestionId {
    pub fn is_counting(self) -> bool {
        matches!(self, QuestionId::Q2 | QuestionId::Q4)
    }

    pub fn is_multiple_choice(self) -> bool {
        matches!(self, QuestionId::Q3 | QuestionId::Q4)
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_uppercase().as_str() {
            "Q1" => Some(QuestionId::Q1),
            "Q2" => Some(QuestionId::Q2),
            "Q3" => Some(QuestionId::Q3),
            "Q4" => Some(QuestionId::Q4),
            _ => None,
        }
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: [f64; 4],
    pub score: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Label(String),
    Detections(Vec<Detection>),
    Answer {
        question: QuestionId,
        raw_text: String,
        /// Per-image option order for multiple-choice prompts, when logged.
        options: Option<Vec<String>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub model: String,
    pub image_id: String,
    pub payload: Payload,
}

impl PredictionRecord {
    pub fn task(&self) -> Task {
        match self.payload {
            Payload::Label(_) => Task::Classification,
            Payload::Detections(_) => Task::Detection,
            Payload::Answer { .. } => Task::Vqa,
        }
    }
}

/// Wire form of one prediction-log line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRow {
    pub model: String,
    pub image_id: String,
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<(f64, f64, f64, f64, f64, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<QuestionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
}

pub fn valid_box(b: &[f64; 4]) -> bool {
    b.iter().all(|v| v.is_finite()) && b[0] < b[2] && b[1] < b[3]
}

impl TryFrom<PredictionRow> for PredictionRecord {
    type Error = String;

    fn try_from(row: PredictionRow) -> Result<Self, String> {
        let task = row.task.ok_or("missing task")?;
        let payload = match task {
            Task::Classification => Payload::Label(row.label.ok_or("classification row without label")?),
            Task::Detection => {
                let dets = row.detections.ok_or("detection row without detections")?;
                let mut out = Vec::with_capacity(dets.len());
                for (x1, y1, x2, y2, score, label) in dets {
                    let bbox = [x1, y1, x2, y2];
                    if !valid_box(&bbox) {
                        return Err(format!("invalid box {bbox:?}"));
                    }
                    if !(0.0..=1.0).contains(&score) {
                        return Err(format!("score {score} outside [0, 1]"));
                    }
                    out.push(Detection { bbox, score, label });
                }
                Payload::Detections(out)
            }
            Task::Vqa => Payload::Answer {
                question: row.question_id.ok_or("vqa row without question_id")?,
                raw_text: row.raw_text.ok_or("vqa row without raw_text")?,
                options: row.options,
            },
        };
        Ok(PredictionRecord {
            model: row.model,
            image_id: row.image_id,
            payload,
        })
    }
}

impl From<&PredictionRecord> for PredictionRow {
    fn from(p: &PredictionRecord) -> Self {
        let mut row = PredictionRow {
            model: p.model.clone(),
            image_id: p.image_id.clone(),
            task: Some(p.task()),
            ..PredictionRow::default()
        };
        match &p.payload {
            Payload::Label(l) => row.label = Some(l.clone()),
            Payload::Detections(d) => {
                row.detections = Some(
                    d.iter()
                        .map(|d| (d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3], d.score, d.label.clone()))
                        .collect(),
                )
            }
            Payload::Answer {
                question,
                raw_text,
                options,
            } => {
                row.question_id = Some(*question);
                row.raw_text = Some(raw_text.clone());
                row.options = options.clone();
            }
        }
        row
    }
}

/// Loaded prediction log plus the lines that were rejected.
#[derive(Debug, Default)]
pub struct PredictionLog {
    pub records: Vec<PredictionRecord>,
    pub rejected: Vec<(usize, String)>,
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<PredictionLog, EvalError> {
    let mut log = PredictionLog::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<PredictionRow>(&line)
            .map_err(|e| e.to_string())
            .and_then(PredictionRecord::try_from);
        match parsed {
            Ok(r) => log.records.push(r),
            Err(e) => log.rejected.push((i + 1, e)),
        }
    }
    Ok(log)
}

#[derive(Debug, Deserialize)]
struct HumanRow {
    subject_id: String,
    image_id: String,
    question_id: String,
    raw_text: String,
}

/// Reads human answers (`subject_id,image_id,question_id,raw_text`) as VQA
/// predictions of model `human:<group>`.
pub fn read_human_answers<R: Read>(reader: R, group: &str) -> Result<PredictionLog, EvalError> {
    let mut log = PredictionLog::default();
    let mut csv = csv::Reader::from_reader(reader);
    for (i, row) in csv.deserialize::<HumanRow>().enumerate() {
        let line = i + 2;
        match row {
            Ok(row) => match QuestionId::parse(&row.question_id) {
                Some(question) => log.records.push(PredictionRecord {
                    model: format!("human:{group}"),
                    image_id: row.image_id,
                    payload: Payload::Answer {
                        question,
                        raw_text: row.raw_text,
                        options: None,
                    },
                }),
                None => log
                    .rejected
                    .push((line, format!("subject {}: bad question id {:?}", row.subject_id, row.question_id))),
            },
            Err(e) => log.rejected.push((line, e.to_string())),
        }
    }
    Ok(log)
}

pub fn read_ground_truth<R: BufRead>(reader: R) -> Result<Vec<GroundTruth>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let gt: GroundTruth = serde_json::from_str(&line)
            .map_err(|e| EvalError::Input(format!("ground truth line {}: {e}", i + 1)))?;
        out.push(gt);
    }
    Ok(out)
}

/// Accepted alternative labels, keyed by ground-truth label. Case-folded.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymTable(BTreeMap<String, Vec<String>>);

impl SynonymTable {
    pub fn new(map: BTreeMap<String, Vec<String>>) -> Self {
        Self(
            map.into_iter()
                .map(|(k, v)| (k.to_lowercase(), v.into_iter().map(|s| s.to_lowercase()).collect()))
                .collect(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let map: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| EvalError::Input(format!("synonyms: {e}")))?;
        Ok(Self::new(map))
    }

    pub fn matches(&self, predicted: &str, truth: &str) -> bool {
        let p = predicted.trim().to_lowercase();
        let t = truth.trim().to_lowercase();
        p == t || self.0.get(&t).is_some_and(|alts| alts.contains(&p))
    }
}

/// Ground truth indexed by image id.
pub fn index_truth(gts: &[GroundTruth]) -> HashMap<&str, &GroundTruth> {
    gts.iter().map(|g| (g.image_id.as_str(), g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_log_lines() {
        let text = r#"{"model":"m","image_id":"a","task":"classification","label":"cup"}
{"model":"m","image_id":"b","task":"detection","detections":[[0,0,10,10,0.9,"cup"]]}
{"model":"m","image_id":"c","task":"vqa","question_id":"Q2","raw_text":"3"}
{"model":"m","image_id":"d","task":"detection","detections":[[5,0,1,10,0.9,"cup"]]}
{"model":"m","image_id":"e","task":"vqa","raw_text":"3"}
{"model":"m","image_id":"f","task":"classification","label":"cup","extra":1}
"#;
        let log = read_predictions(text.as_bytes()).unwrap();
        assert_eq!(log.records.len(), 3);
        assert_eq!(log.rejected.iter().map(|r| r.0).collect::<Vec<_>>(), vec![4, 5, 6]);
        assert_eq!(log.records[1].task(), Task::Detection);
        let row = PredictionRow::from(&log.records[1]);
        assert_eq!(PredictionRecord::try_from(row).unwrap(), log.records[1]);
    }

    #[test]
    fn human_csv() {
        let text = "subject_id,image_id,question_id,raw_text\ns1,img1,Q2,three\ns2,img1,Q9,x\n";
        let log = read_human_answers(text.as_bytes(), "lab").unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].model, "human:lab");
        assert_eq!(log.rejected.len(), 1);
    }

    #[test]
    fn synonyms() {
        let t = SynonymTable::from_json(r#"{"cup":["mug"],"Laptop":["Notebook"]}"#).unwrap();
        assert!(t.matches("cup", "cup"));
        assert!(t.matches("Mug", "cup"));
        assert!(t.matches("notebook", "laptop"));
        assert!(!t.matches("cup", "mug"));
        assert!(!t.matches("bowl", "cup"));
    }
}
