//! Answer parsing, scoring and report aggregation.

mod metric;
mod parse;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_text, option_letter, Category, Format, Manifest, OpenSubtype, Sample};
use crate::llmclient::ChatTurn;
use crate::prompts;

pub use metric::{
    judge_prompt, judge_with_llm, mra, mra_text, parse_judge_output, relative_error, Judge, MraConfig,
    MraKind, THRESHOLD_EPS,
};
pub use parse::{answer_span, first_quantity, parse_answer, AnswerKind, ParsedAnswer};

/// Gap between parse-based and judge scores above which a record is flagged.
pub const GAP_FLAG: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unit {0:?} is not in the conversion table")]
    UnknownUnit(String),
    #[error("cannot parse a number from {0:?}")]
    Unparsable(String),
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("duplicate score record for {0}")]
    DuplicateRecord(String),
    #[error("score records reference ids missing from the manifest: {0:?}")]
    UnknownIds(Vec<String>),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub task: String,
    pub category: Category,
    pub format: Format,
    pub parsed: ParsedAnswer,
    pub parse_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_score: Option<f64>,
    pub final_score: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub gap_flag: bool,
}

fn matrices_match(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(r, s)| {
            r.len() == s.len() && r.iter().zip(s).all(|(x, y)| (x - y).abs() <= 1e-3 * y.abs().max(1.0))
        })
}

fn parse_score(sample: &Sample, parsed: &ParsedAnswer, response: &str, cfg: &MraConfig) -> f64 {
    match (sample.format, parsed) {
        (Format::MultiChoice, ParsedAnswer::Choice { letter }) => {
            (sample.correct_index().map(option_letter) == Some(*letter)) as u8 as f64
        }
        (Format::Judgment, ParsedAnswer::YesNo { yes }) => {
            let gt_yes = sample.answer.trim().eq_ignore_ascii_case("yes");
            (gt_yes == *yes) as u8 as f64
        }
        (Format::OpenEnded, _) => match sample.open_subtype {
            Some(s @ (OpenSubtype::Counting | OpenSubtype::Distance)) => {
                let kind = MraKind::try_from(s).expect("numeric subtype");
                mra_text(response, &sample.answer, kind, cfg).unwrap_or(0.0)
            }
            _ => {
                let gt = parse_answer(&sample.answer, Format::OpenEnded, Some(OpenSubtype::Other));
                match (parsed, &gt) {
                    (ParsedAnswer::Matrix { rows: p }, ParsedAnswer::Matrix { rows: g }) => {
                        matrices_match(p, g) as u8 as f64
                    }
                    (ParsedAnswer::Raw { text }, _) => {
                        (normalize_text(text) == normalize_text(&sample.answer)) as u8 as f64
                    }
                    _ => 0.0,
                }
            }
        },
        _ => 0.0,
    }
}

/// Scores one response. Closed formats are exact match; numeric open-ended
/// items average MRA with the judge's score when a judge is available.
pub fn score_sample(sample: &Sample, response: &str, judge: Option<&Judge>) -> ScoreRecord {
    let cfg = judge.map(|j| j.cfg).unwrap_or_default();
    score_sample_with(sample, response, judge, &cfg)
}

/// [`score_sample`] with an explicit MRA configuration for the parse-based
/// score; the judge keeps its own.
pub fn score_sample_with(sample: &Sample, response: &str, judge: Option<&Judge>, cfg: &MraConfig) -> ScoreRecord {
    let parsed = parse_answer(response, sample.format, sample.open_subtype);
    let parse_score = parse_score(sample, &parsed, response, cfg);
    let judge_score = match (sample.format, sample.open_subtype, judge) {
        (Format::OpenEnded, Some(s @ (OpenSubtype::Counting | OpenSubtype::Distance)), Some(j)) => {
            let kind = MraKind::try_from(s).expect("numeric subtype");
            let pred = answer_span(response).unwrap_or(response);
            match judge_with_llm(&sample.answer, pred, kind, &j.cfg, j.client.as_ref()) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("{}: {e}; using parse-based score only", sample.id);
                    None
                }
            }
        }
        _ => None,
    };
    let final_score = match judge_score {
        Some(j) => (parse_score + j) / 2.0,
        None => parse_score,
    };
    ScoreRecord {
        id: sample.id.clone(),
        task: sample.task.clone(),
        category: sample.category,
        format: sample.format,
        parsed,
        parse_score,
        judge_score,
        final_score,
        gap_flag: judge_score.is_some_and(|j| (j - parse_score).abs() > GAP_FLAG),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub count: usize,
    /// Mean final score as a fraction, unrounded.
    pub mean: f64,
    /// Percentage rounded to two decimals; absent for empty groups.
    pub percent: Option<f64>,
}

impl GroupScore {
    fn from_scores(scores: &[f64]) -> Self {
        let count = scores.len();
        let mean = if count == 0 { 0.0 } else { scores.iter().sum::<f64>() / count as f64 };
        Self { count, mean, percent: (count > 0).then(|| percent(mean)) }
    }
}

fn percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub overall: GroupScore,
    /// One entry per category in table column order.
    pub per_category: Vec<(Category, GroupScore)>,
    pub per_task: BTreeMap<String, GroupScore>,
    /// Manifest ids without a score record; counted as 0.
    pub missing: Vec<String>,
    pub flagged_gaps: Vec<String>,
}

/// Averages records over the manifest.
pub fn aggregate(records: &[ScoreRecord], manifest: &Manifest) -> Result<Report, EvalError> {
    let mut by_id: HashMap<&str, &ScoreRecord> = HashMap::new();
    for r in records {
        if by_id.insert(r.id.as_str(), r).is_some() {
            return Err(EvalError::DuplicateRecord(r.id.clone()));
        }
    }
    let known: HashSet<&str> = manifest.samples.iter().map(|s| s.id.as_str()).collect();
    let unknown: Vec<String> =
        records.iter().filter(|r| !known.contains(r.id.as_str())).map(|r| r.id.clone()).collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownIds(unknown));
    }

    let mut all = Vec::with_capacity(manifest.len());
    let mut per_cat: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut per_task: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut missing = Vec::new();
    for s in &manifest.samples {
        let score = match by_id.get(s.id.as_str()) {
            Some(r) => r.final_score,
            None => {
                missing.push(s.id.clone());
                0.0
            }
        };
        all.push(score);
        let col = Category::ALL.iter().position(|c| *c == s.category).expect("known category");
        per_cat.entry(col).or_default().push(score);
        per_task.entry(s.task.clone()).or_default().push(score);
    }
    Ok(Report {
        overall: GroupScore::from_scores(&all),
        per_category: Category::ALL
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, GroupScore::from_scores(per_cat.get(&i).map_or(&[][..], |v| v))))
            .collect(),
        per_task: per_task.into_iter().map(|(k, v)| (k, GroupScore::from_scores(&v))).collect(),
        missing,
        flagged_gaps: records.iter().filter(|r| r.gap_flag).map(|r| r.id.clone()).collect(),
    })
}

impl Report {
    /// Fixed-width table: overall first, then categories, then tasks.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, name: &str, g: &GroupScore| {
            let pct = g.percent.map_or("-".to_string(), |p| format!("{p:.2}"));
            let _ = writeln!(out, "{name:<24} {:>7} {pct:>8}", g.count);
        };
        let _ = writeln!(out, "{:<24} {:>7} {:>8}", "group", "n", "score");
        row(&mut out, "Overall", &self.overall);
        for (c, g) in &self.per_category {
            row(&mut out, c.name(), g);
        }
        for (t, g) in &self.per_task {
            row(&mut out, &format!("task:{t}"), g);
        }
        if !self.missing.is_empty() {
            let _ = writeln!(out, "missing records (scored 0): {}", self.missing.len());
        }
        if !self.flagged_gaps.is_empty() {
            let _ = writeln!(out, "judge/parse gaps > {GAP_FLAG}: {}", self.flagged_gaps.len());
        }
        out
    }
}

fn format_number(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Chance-level response: uniform over options, or a uniform scalar in
/// [0.25, 4] times the ground truth carrying the ground truth's unit.
pub fn random_baseline(sample: &Sample, rng: &mut impl Rng) -> String {
    match sample.format {
        Format::MultiChoice => {
            let n = sample.options.len().max(1);
            format!("({})", option_letter(rng.random_range(0..n)))
        }
        Format::Judgment => if rng.random_bool(0.5) { "yes" } else { "no" }.to_string(),
        Format::OpenEnded => match first_quantity(&sample.answer) {
            Some((gt, unit)) if gt != 0.0 => {
                let (lo, hi) = if gt > 0.0 { (0.25 * gt, 4.0 * gt) } else { (4.0 * gt, 0.25 * gt) };
                let v = format_number(rng.random_range(lo..=hi));
                match unit {
                    Some(u) if sample.open_subtype == Some(OpenSubtype::Distance) => format!("{v} {u}"),
                    _ => v,
                }
            }
            Some(_) => "0".to_string(),
            None => String::new(),
        },
    }
}

/// The evaluation instruction prompt for a sample's format.
pub fn format_prompt(sample: &Sample) -> String {
    let name = match (sample.format, sample.open_subtype) {
        (Format::MultiChoice, _) => "eval_multi_choice",
        (Format::Judgment, _) => "eval_judgment",
        (Format::OpenEnded, Some(OpenSubtype::Distance)) => "eval_distance",
        (Format::OpenEnded, _) => "eval_open",
    };
    prompts::render_named(name, &[("question", &sample.prompt_question())])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Strip media so the core answers from text alone.
    pub blind: bool,
    pub max_frames: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self { blind: false, max_frames: crate::corpus::DEFAULT_FRAME_COUNT }
    }
}

/// Media references for a prompt, joined onto `root` when relative.
pub fn media_refs(sample: &Sample, root: Option<&Path>, max_frames: usize) -> Vec<String> {
    sample
        .media
        .prompt_refs(max_frames)
        .into_iter()
        .map(|r| match root {
            Some(root) if Path::new(&r).is_relative() => root.join(&r).to_string_lossy().into_owned(),
            _ => r,
        })
        .collect()
}

/// Single-turn chat for evaluating a bare core on a sample.
pub fn build_eval_turns(sample: &Sample, root: Option<&Path>, opts: &PromptOptions) -> Vec<ChatTurn> {
    let media = if opts.blind { Vec::new() } else { media_refs(sample, root, opts.max_frames) };
    vec![ChatTurn::user(format_prompt(sample)).with_media(media)]
}

/// One line of a responses file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub id: String,
    pub response: String,
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Io(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|i| serde_json::to_string(i).expect("serializable") + "\n").collect()
}
