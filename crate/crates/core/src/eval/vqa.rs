use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::{offset_curves, BinStat, EvalError, ImageScore, Payload, PredictionRecord, QuestionId, SynonymTable};
use crate::sweep::GroundTruth;

pub const DEFAULT_BOILERPLATE: &[&str] = &[
    r"^the objects? in (this|the) (image|picture|photo) (is|are)\b",
    r"^(in|from) (this|the) (image|picture|photo),?",
    r"^there (is|are)\b",
    r"^i (can )?see\b",
    r"^the (correct )?answer is\b",
    r"^answer\s*:",
    r"^(it is|it's|this is|these are|they are)\b",
    r"\bin (this|the) (image|picture|photo)\b",
];

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

#[derive(Clone, Debug)]
pub struct VqaConfig {
    /// Class vocabulary; also the default option order for Q3 (followed by "other").
    pub classes: Vec<String>,
    pub count_options: Vec<String>,
    pub count_max_len: usize,
    /// Defaults to twice the longest class name.
    pub category_max_len: Option<usize>,
    /// Unresolved categorization answers longer than this many words need review.
    pub review_max_words: usize,
    boilerplate: Vec<Regex>,
}

impl VqaConfig {
    pub fn new(classes: Vec<String>) -> Self {
        Self::with_boilerplate(classes, DEFAULT_BOILERPLATE).expect("default patterns compile")
    }

    pub fn with_boilerplate<S: AsRef<str>>(classes: Vec<String>, patterns: &[S]) -> Result<Self, EvalError> {
        let boilerplate = patterns
            .iter()
            .map(|p| {
                RegexBuilder::new(p.as_ref())
                    .case_insensitive(true)
                    .build()
                    .map_err(|e| EvalError::Input(format!("boilerplate pattern {:?}: {e}", p.as_ref())))
            })
            .collect::<Result<_, _>>()?;
        Ok(VqaConfig {
            classes: classes.into_iter().map(|c| c.to_lowercase()).collect(),
            count_options: ["2", "3", "4", "5"].map(String::from).to_vec(),
            count_max_len: 4,
            category_max_len: None,
            review_max_words: 3,
            boilerplate,
        })
    }

    pub fn max_len(&self, q: QuestionId) -> Option<usize> {
        if q.is_counting() {
            Some(self.count_max_len)
        } else {
            self.category_max_len
                .or_else(|| self.classes.iter().map(|c| c.chars().count()).max().map(|n| 2 * n))
        }
    }

    pub fn default_options(&self, q: QuestionId) -> Vec<String> {
        match q {
            QuestionId::Q3 => self.classes.iter().cloned().chain([String::from("other")]).collect(),
            QuestionId::Q4 => self.count_options.clone(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanupFlags {
    pub boilerplate: bool,
    pub number_word: bool,
    pub option_letter: Option<char>,
    /// A letter was selected that has no option.
    pub invalid_option: bool,
    pub singularized: bool,
    pub needs_review: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalized {
    pub canonical: String,
    pub flags: CleanupFlags,
}

fn strip_edges(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || ".,;:!?\"'`*".contains(c))
}

fn singular(word: &str) -> Option<String> {
    let n = word.len();
    if n > 4 && word.ends_with("ies") {
        Some(format!("{}y", &word[..n - 3]))
    } else if ["ches", "shes", "sses", "xes"].iter().any(|s| word.ends_with(s)) {
        Some(word[..n - 2].to_string())
    } else if n > 2 && word.ends_with('s') && !word.ends_with("ss") {
        Some(word[..n - 1].to_string())
    } else {
        None
    }
}

/// First integer or number word in `s`, as digits; the flag marks a word.
fn number_token(s: &str) -> Option<(String, bool)> {
    s.split(|c: char| !c.is_alphanumeric()).find_map(|tok| {
        if !tok.is_empty() && tok.chars().all(|c| c.is_ascii_digit()) {
            let t = tok.trim_start_matches('0');
            Some((if t.is_empty() { "0" } else { t }.to_string(), false))
        } else {
            NUMBER_WORDS.iter().position(|w| *w == tok).map(|i| (i.to_string(), true))
        }
    })
}

/// Reduces a raw answer to its canonical form. `options` is the option list
/// shown for multiple-choice prompts, in letter order.
pub fn normalize_answer(raw: &str, question: QuestionId, options: &[String], cfg: &VqaConfig) -> Normalized {
    let mut flags = CleanupFlags::default();
    let mut s = strip_edges(&raw.to_lowercase()).to_string();
    for re in &cfg.boilerplate {
        let next = re.replace_all(&s, "");
        if next != s {
            flags.boilerplate = true;
            s = strip_edges(&next).to_string();
        }
    }

    if question.is_multiple_choice() {
        let letter = Regex::new(r"^\(?([a-z])\s*[\).:]\s*(.*)$").unwrap();
        let caps = letter
            .captures(&s)
            .map(|c| (c[1].chars().next().unwrap(), c[2].to_string()))
            .or_else(|| (s.len() == 1 && s.as_bytes()[0].is_ascii_lowercase()).then(|| (s.chars().next().unwrap(), String::new())));
        if let Some((c, rest)) = caps {
            let idx = (c as u8 - b'a') as usize;
            flags.option_letter = Some(c.to_ascii_uppercase());
            match options.get(idx) {
                Some(opt) => {
                    return Normalized {
                        canonical: opt.to_lowercase(),
                        flags,
                    }
                }
                None => {
                    flags.invalid_option = true;
                    s = strip_edges(&rest).to_string();
                }
            }
        }
    }

    if question.is_counting() {
        return match number_token(&s) {
            Some((digits, word)) => {
                flags.number_word = word;
                Normalized { canonical: digits, flags }
            }
            None => {
                flags.needs_review = true;
                Normalized { canonical: s, flags }
            }
        };
    }

    s = s.strip_prefix("an ").or_else(|| s.strip_prefix("a ")).or_else(|| s.strip_prefix("the ")).unwrap_or(&s).to_string();
    if !cfg.classes.contains(&s) {
        let mut words: Vec<String> = s.split_whitespace().map(String::from).collect();
        if let Some(last) = words.last_mut() {
            if let Some(one) = singular(last) {
                *last = one;
                flags.singularized = true;
            }
        }
        s = words.join(" ");
        let n_words = words.len();
        if !cfg.classes.contains(&s) && (n_words == 0 || n_words > cfg.review_max_words) {
            flags.needs_review = true;
        }
    }
    Normalized { canonical: s, flags }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Unfaithful {
    TooLong { length: usize, max: usize },
    InvalidOption,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Faithfulness {
    pub faithful: bool,
    pub reason: Option<Unfaithful>,
}

pub fn faithfulness_check(
    raw: &str,
    normalized: &Normalized,
    question: QuestionId,
    options: &[String],
    cfg: &VqaConfig,
) -> Faithfulness {
    let unfaithful = |r| Faithfulness {
        faithful: false,
        reason: Some(r),
    };
    if question.is_multiple_choice()
        && (normalized.flags.invalid_option || !options.iter().any(|o| o.to_lowercase() == normalized.canonical))
    {
        return unfaithful(Unfaithful::InvalidOption);
    }
    let length = raw.trim().chars().count();
    if let Some(max) = cfg.max_len(question) {
        if length > max {
            return unfaithful(Unfaithful::TooLong { length, max });
        }
    }
    Faithfulness {
        faithful: true,
        reason: None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OverrideKey {
    pub image_id: String,
    pub model: String,
    pub question: QuestionId,
}

/// Hand-resolved canonical answers.
pub type Overrides = HashMap<OverrideKey, String>;

#[derive(Deserialize)]
struct OverrideRow {
    image_id: String,
    model: String,
    question_id: String,
    canonical: String,
}

pub fn read_overrides<R: Read>(reader: R) -> Result<Overrides, EvalError> {
    let mut out = Overrides::new();
    for (i, row) in csv::Reader::from_reader(reader).deserialize::<OverrideRow>().enumerate() {
        let row = row.map_err(|e| EvalError::Input(format!("overrides line {}: {e}", i + 2)))?;
        let question = QuestionId::parse(&row.question_id)
            .ok_or_else(|| EvalError::Input(format!("overrides line {}: bad question id", i + 2)))?;
        out.insert(
            OverrideKey {
                image_id: row.image_id,
                model: row.model,
                question,
            },
            row.canonical.trim().to_lowercase(),
        );
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqaScore {
    pub model: String,
    pub image_id: String,
    pub scene_id: String,
    pub lux: f64,
    pub ev_offset: i32,
    pub question: QuestionId,
    pub raw_text: Option<String>,
    pub canonical: Option<String>,
    pub soft: f64,
    pub hard: f64,
    pub needs_review: bool,
    pub unfaithful: Option<Unfaithful>,
}

impl VqaScore {
    pub fn image_score(&self, hard: bool) -> ImageScore {
        ImageScore {
            model: self.model.clone(),
            image_id: self.image_id.clone(),
            scene_id: self.scene_id.clone(),
            lux: self.lux,
            ev_offset: self.ev_offset,
            value: if hard { self.hard } else { self.soft },
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VqaResult {
    pub scores: Vec<VqaScore>,
    pub missing: usize,
    pub unknown_images: usize,
}

impl VqaResult {
    pub fn needs_review(&self) -> impl Iterator<Item = &VqaScore> {
        self.scores.iter().filter(|s| s.needs_review)
    }

    /// Soft or hard curves per (question, model, ev_offset).
    pub fn curves(&self, hard: bool) -> BTreeMap<QuestionId, BTreeMap<String, BTreeMap<i32, BinStat>>> {
        let mut by_q: BTreeMap<QuestionId, Vec<ImageScore>> = BTreeMap::new();
        for s in &self.scores {
            by_q.entry(s.question).or_default().push(s.image_score(hard));
        }
        by_q.into_iter().map(|(q, v)| (q, offset_curves(&v))).collect()
    }
}

fn truth_answer(gt: &GroundTruth, q: QuestionId) -> String {
    if q.is_counting() {
        gt.count.to_string()
    } else {
        gt.class.to_lowercase()
    }
}

/// Scores VQA answers. For every (model, question) pair seen in `preds`,
/// ground-truth images without an answer count as 0 unless `skip_missing`
/// (subject groups only answer a subset of the images).
pub fn score_vqa(
    preds: &[PredictionRecord],
    gts: &[GroundTruth],
    synonyms: &SynonymTable,
    cfg: &VqaConfig,
    overrides: &Overrides,
    skip_missing: bool,
) -> VqaResult {
    let truth: HashMap<&str, &GroundTruth> = gts.iter().map(|g| (g.image_id.as_str(), g)).collect();
    let mut result = VqaResult::default();
    let mut answered: BTreeMap<(&str, QuestionId), BTreeSet<&str>> = BTreeMap::new();
    for p in preds {
        let Payload::Answer {
            question,
            raw_text,
            options,
        } = &p.payload
        else {
            continue;
        };
        let Some(gt) = truth.get(p.image_id.as_str()) else {
            result.unknown_images += 1;
            continue;
        };
        answered.entry((p.model.as_str(), *question)).or_default().insert(p.image_id.as_str());
        let options = options.clone().unwrap_or_else(|| cfg.default_options(*question));
        let mut norm = normalize_answer(raw_text, *question, &options, cfg);
        let key = OverrideKey {
            image_id: p.image_id.clone(),
            model: p.model.clone(),
            question: *question,
        };
        if let Some(fixed) = overrides.get(&key) {
            norm.canonical = fixed.clone();
            norm.flags.needs_review = false;
        }
        let faith = faithfulness_check(raw_text, &norm, *question, &options, cfg);
        let factual = synonyms.matches(&norm.canonical, &truth_answer(gt, *question));
        let soft = f64::from(u8::from(factual));
        result.scores.push(VqaScore {
            model: p.model.clone(),
            image_id: p.image_id.clone(),
            scene_id: gt.scene_id.clone(),
            lux: gt.lux,
            ev_offset: gt.ev_offset,
            question: *question,
            raw_text: Some(raw_text.clone()),
            canonical: Some(norm.canonical),
            soft,
            hard: if faith.faithful { soft } else { 0.0 },
            needs_review: norm.flags.needs_review,
            unfaithful: faith.reason,
        });
    }
    if !skip_missing {
        for ((model, question), seen) in &answered {
            for gt in gts.iter().filter(|g| !seen.contains(g.image_id.as_str())) {
                result.missing += 1;
                result.scores.push(VqaScore {
                    model: model.to_string(),
                    image_id: gt.image_id.clone(),
                    scene_id: gt.scene_id.clone(),
                    lux: gt.lux,
                    ev_offset: gt.ev_offset,
                    question: *question,
                    raw_text: None,
                    canonical: None,
                    soft: 0.0,
                    hard: 0.0,
                    needs_review: false,
                    unfaithful: None,
                });
            }
        }
    }
    result
}

/// Mean raw-answer length in characters per (model, ev_offset). Missing
/// answers are not counted; empty answers are.
pub fn response_length_stats(scores: &[VqaScore]) -> BTreeMap<String, BTreeMap<i32, BinStat>> {
    let lengths: Vec<ImageScore> = scores
        .iter()
        .filter_map(|s| {
            s.raw_text.as_ref().map(|raw| ImageScore {
                value: raw.chars().count() as f64,
                ..s.image_score(false)
            })
        })
        .collect();
    offset_curves(&lengths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> VqaConfig {
        VqaConfig::new(vec!["cup".into(), "water bottle".into(), "laptop".into()])
    }

    fn norm(raw: &str, q: QuestionId) -> Normalized {
        let c = cfg();
        normalize_answer(raw, q, &c.default_options(q), &c)
    }

    #[test]
    fn normalization_examples() {
        let n = norm("three cups", QuestionId::Q2);
        assert_eq!(n.canonical, "3");
        assert!(n.flags.number_word);
        let n = norm("The objects in this image are cups", QuestionId::Q1);
        assert_eq!(n.canonical, "cup");
        assert!(n.flags.boilerplate && n.flags.singularized);
        let n = norm("B) 3", QuestionId::Q4);
        assert_eq!((n.canonical.as_str(), n.flags.option_letter), ("3", Some('B')));
        assert_eq!(norm("There are 4.", QuestionId::Q2).canonical, "4");
        assert_eq!(norm("Water bottles", QuestionId::Q1).canonical, "water bottle");
        assert_eq!(norm("c", QuestionId::Q3).canonical, "laptop");
        assert_eq!(norm("glasses", QuestionId::Q1).canonical, "glass");
        assert!(norm("many", QuestionId::Q2).flags.needs_review);
        assert!(norm("a cup next to a phone and some books", QuestionId::Q1).flags.needs_review);
    }

    #[test]
    fn faithfulness_examples() {
        let c = cfg();
        let opts = c.default_options(QuestionId::Q4);
        let raw = "E) 10";
        let n = normalize_answer(raw, QuestionId::Q4, &opts, &c);
        assert!(n.flags.invalid_option);
        assert_eq!(
            faithfulness_check(raw, &n, QuestionId::Q4, &opts, &c).reason,
            Some(Unfaithful::InvalidOption)
        );
        let long = format!("{} so the answer is 3", "x".repeat(180));
        let n = normalize_answer(&long, QuestionId::Q2, &[], &c);
        let f = faithfulness_check(&long, &n, QuestionId::Q2, &[], &c);
        assert!(!f.faithful);
        assert!(matches!(f.reason, Some(Unfaithful::TooLong { max: 4, .. })));
        let n = normalize_answer("3", QuestionId::Q2, &[], &c);
        assert!(faithfulness_check("3", &n, QuestionId::Q2, &[], &c).faithful);
        assert_eq!(c.max_len(QuestionId::Q1), Some(24));
    }

    #[test]
    fn response_lengths() {
        let mk = |raw: Option<&str>| VqaScore {
            model: "m".into(),
            image_id: "i".into(),
            scene_id: "s".into(),
            lux: 10.0,
            ev_offset: 0,
            question: QuestionId::Q2,
            raw_text: raw.map(String::from),
            canonical: None,
            soft: 0.0,
            hard: 0.0,
            needs_review: false,
            unfaithful: None,
        };
        let r = response_length_stats(&[mk(Some("3")), mk(Some("three")), mk(None)]);
        assert_eq!(r["m"][&0], BinStat { mean: 3.0, n: 2 });
        let r = response_length_stats(&[mk(Some(""))]);
        assert_eq!(r["m"][&0], BinStat { mean: 0.0, n: 1 });
    }
}
