//! Question-answer generation from scene annotations and procedural
//! simulators, plus format conversion between open-ended, multi-choice and
//! judgment questions.

mod bench;
pub mod distractors;
pub mod render;
mod scene;
pub mod sim;
pub mod templates;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{normalize_text, option_letter, Category, Format, Media, OpenSubtype, Sample};
use crate::geometry::GeometryError;
use crate::llmclient::{ChatClient, ChatTurn};
use crate::prompts;

pub use bench::{
    generate_mini_benchmark, generate_scene_corpus, item_seed, sim_id, sim_item, write_benchmark, write_ledger, BenchConfig,
    GenerationLedger, MiniBenchmark, TOOL_VERSION,
};
pub use distractors::{
    corrupt_motion, extrinsics_distractor, extrinsics_distractors, homography_distractor, intrinsics_distractor,
    intrinsics_distractors, metric_distractors, motion_distractors, ExtrinsicsStrategy, MotionCorruption,
    GENERIC_MOTIONS,
};
pub use scene::{generate_from_scene, FrameMeta, GenOptions, HomographyMeta, SceneMeta};
pub use sim::{sim_multiview, sim_rotation2d, sim_rotation3d, sim_spatial_map, Asset, SimItem};

#[derive(Debug, Error)]
pub enum QaError {
    #[error("task {task} is not supported for scene {scene}: {reason}")]
    Unsupported { task: Task, scene: String, reason: String },
    #[error("scene {scene} has class-agnostic labels; task {task} needs category names")]
    ClassAgnostic { task: Task, scene: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("options are not pairwise distinct: {0:?}")]
    DuplicateOptions(Vec<String>),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Existence,
    Detect3d,
    AbsDepth,
    AbsDistance,
    AbsSize,
    RelDepth,
    RelDistance,
    RelSize,
    Intrinsics,
    Extrinsics,
    CameraMotion,
    PointTracking,
    Homography,
    SpatialMap,
    Rotation2d,
    Rotation3d,
    MultiviewProjection,
}

impl Task {
    pub const SCENE_TASKS: [Task; 13] = [
        Task::Existence,
        Task::Detect3d,
        Task::AbsDepth,
        Task::AbsDistance,
        Task::AbsSize,
        Task::RelDepth,
        Task::RelDistance,
        Task::RelSize,
        Task::Intrinsics,
        Task::Extrinsics,
        Task::CameraMotion,
        Task::PointTracking,
        Task::Homography,
    ];

    pub const SIM_TASKS: [Task; 4] = [Task::SpatialMap, Task::Rotation2d, Task::Rotation3d, Task::MultiviewProjection];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Existence => "existence",
            Task::Detect3d => "detect3d",
            Task::AbsDepth => "abs_depth",
            Task::AbsDistance => "abs_distance",
            Task::AbsSize => "abs_size",
            Task::RelDepth => "rel_depth",
            Task::RelDistance => "rel_distance",
            Task::RelSize => "rel_size",
            Task::Intrinsics => "intrinsics",
            Task::Extrinsics => "extrinsics",
            Task::CameraMotion => "camera_motion",
            Task::PointTracking => "point_tracking",
            Task::Homography => "homography",
            Task::SpatialMap => "spatial_map",
            Task::Rotation2d => "rotation_2d",
            Task::Rotation3d => "rotation_3d",
            Task::MultiviewProjection => "multiview_projection",
        }
    }

    pub fn category(self) -> Category {
        match self {
            Task::Existence | Task::Detect3d => Category::ObjectLocalization,
            Task::AbsDepth | Task::RelDepth => Category::DepthEstimation,
            Task::AbsDistance | Task::RelDistance => Category::ObjectDistance,
            Task::AbsSize | Task::RelSize => Category::ObjectSize,
            Task::Intrinsics | Task::Extrinsics | Task::CameraMotion | Task::Homography => Category::Camera,
            Task::PointTracking => Category::ObjectMotion,
            Task::SpatialMap | Task::Rotation2d | Task::Rotation3d | Task::MultiviewProjection => {
                Category::MentalAnimation
            }
        }
    }

    /// Tasks whose questions name object categories.
    pub fn needs_labels(self) -> bool {
        matches!(
            self,
            Task::Existence
                | Task::Detect3d
                | Task::AbsDepth
                | Task::AbsDistance
                | Task::AbsSize
                | Task::RelDepth
                | Task::RelDistance
                | Task::RelSize
        )
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = QaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::SCENE_TASKS
            .iter()
            .chain(Task::SIM_TASKS.iter())
            .copied()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| QaError::Domain(format!("unknown task {s:?}")))
    }
}

/// Lettered options with the index of the correct one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionSet {
    pub options: Vec<String>,
    pub correct: usize,
}

impl OptionSet {
    pub fn new(options: Vec<String>, correct: usize) -> Result<Self, QaError> {
        let set = Self { options, correct };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), QaError> {
        if self.correct >= self.options.len() {
            return Err(QaError::Domain(format!(
                "correct index {} out of range for {} options",
                self.correct,
                self.options.len()
            )));
        }
        let distinct: BTreeSet<String> = self.options.iter().map(|o| normalize_text(o)).collect();
        if distinct.len() != self.options.len() {
            return Err(QaError::DuplicateOptions(self.options.clone()));
        }
        Ok(())
    }

    pub fn correct_letter(&self) -> char {
        option_letter(self.correct)
    }
}

/// A generated question with its answer, alternatives and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionSet>,
    /// Option letter, yes/no, or the answer text for open-ended items.
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_subtype: Option<OpenSubtype>,
    pub task: Task,
    pub category: Category,
    pub template_id: String,
    pub seed: u64,
    #[serde(default)]
    pub media: Media,
    pub source: String,
    /// Correct answer in open form.
    pub truth: String,
    /// Incorrect alternatives in open form.
    #[serde(default)]
    pub distractors: Vec<String>,
    /// Yes/no restatement with a `{value}` slot for the claimed answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<Value>,
}

impl QAPair {
    pub fn to_sample(&self, id: impl Into<String>) -> Sample {
        let mut meta = serde_json::Map::new();
        meta.insert("template_id".into(), self.template_id.clone().into());
        meta.insert("seed".into(), self.seed.into());
        if let Some(extra) = &self.extra {
            meta.insert("extra".into(), extra.clone());
        }
        Sample {
            id: id.into(),
            question: self.question.clone(),
            format: self.format,
            options: self.options.as_ref().map(|o| o.options.clone()).unwrap_or_default(),
            answer: self.answer.clone(),
            open_subtype: self.open_subtype,
            media: self.media.clone(),
            task: self.task.as_str().to_string(),
            category: self.category,
            source: self.source.clone(),
            meta: Some(Value::Object(meta)),
        }
    }

    pub fn validate(&self) -> Result<(), QaError> {
        match self.format {
            Format::MultiChoice => {
                let opts = self.options.as_ref().ok_or_else(|| QaError::Domain("multi-choice without options".into()))?;
                opts.validate()?;
                if self.answer != opts.correct_letter().to_string() {
                    return Err(QaError::Domain(format!("answer {} does not match option set", self.answer)));
                }
            }
            Format::Judgment => {
                if self.answer != "yes" && self.answer != "no" {
                    return Err(QaError::Domain(format!("judgment answer {:?}", self.answer)));
                }
            }
            Format::OpenEnded => {
                if self.open_subtype.is_none() {
                    return Err(QaError::Domain("open-ended without subtype".into()));
                }
            }
        }
        Ok(())
    }
}

/// Fixed-precision number with trailing zeros removed.
pub fn fmt_num(v: f64, decimals: usize) -> String {
    let s = format!("{:.*}", decimals, v);
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Matrix rows as nested brackets at fixed precision.
pub fn fmt_matrix<const C: usize>(rows: &[[f64; C]], decimals: usize) -> String {
    let body: Vec<String> = rows
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|v| fmt_num(*v, decimals)).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", body.join(", "))
}

/// Shuffles the correct answer among `distractors` into a lettered question.
pub fn to_multiple_choice<R: Rng + ?Sized>(
    qa: &QAPair,
    distractors: &[String],
    rng: &mut R,
) -> Result<QAPair, QaError> {
    if distractors.is_empty() {
        return Err(QaError::Domain("multi-choice conversion needs at least one distractor".into()));
    }
    let mut options: Vec<String> = std::iter::once(qa.truth.clone()).chain(distractors.iter().cloned()).collect();
    OptionSet::new(options.clone(), 0)?;
    let mut order: Vec<usize> = (0..options.len()).collect();
    order.shuffle(rng);
    options = order.iter().map(|&i| options[i].clone()).collect();
    let correct = order.iter().position(|&i| i == 0).expect("truth is present");
    let set = OptionSet::new(options, correct)?;
    Ok(QAPair {
        format: Format::MultiChoice,
        answer: set.correct_letter().to_string(),
        options: Some(set),
        open_subtype: None,
        distractors: distractors.to_vec(),
        ..qa.clone()
    })
}

fn parse_llm_judgment(text: &str) -> Option<(String, String)> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    let v: Value = serde_json::from_str(text.get(start..=end)?).ok()?;
    let q = v.get("question")?.as_str()?.trim().to_string();
    let a = v.get("answer")?.as_str()?.trim().to_ascii_lowercase();
    (!q.is_empty() && (a == "yes" || a == "no")).then_some((q, a))
}

/// Yes/no form: the true fact restated ("yes") or a distractor substituted
/// ("no") with equal probability. With a client, the conversion prompt is
/// tried first and its payload used when it parses and matches the drawn
/// polarity.
pub fn to_judgment<R: Rng + ?Sized>(
    qa: &QAPair,
    rng: &mut R,
    llm: Option<&dyn ChatClient>,
) -> Result<QAPair, QaError> {
    let positive = rng.random_bool(0.5);
    let wanted = if positive { "yes" } else { "no" };
    let base = QAPair { format: Format::Judgment, options: None, open_subtype: None, ..qa.clone() };
    if let Some(client) = llm {
        let prompt = prompts::render_named(
            "convert_judgment",
            &[("question", &qa.question), ("correct_answer", &qa.truth), ("required_ans", wanted)],
        );
        match client.chat(&[ChatTurn::user(prompt)]) {
            Ok(out) => {
                if let Some((question, answer)) = parse_llm_judgment(&out) {
                    if answer == wanted {
                        return Ok(QAPair { question, answer, ..base });
                    }
                }
                log::warn!("judgment conversion payload unusable; using the rule-based path");
            }
            Err(e) => log::warn!("judgment conversion failed ({e}); using the rule-based path"),
        }
    }
    let Some(statement) = &qa.statement else {
        let truth = qa.truth.trim().to_ascii_lowercase();
        if truth == "yes" || truth == "no" {
            return Ok(QAPair { answer: truth, ..base });
        }
        return Err(QaError::Domain(format!("task {} has no yes/no restatement", qa.task)));
    };
    let value = if positive {
        qa.truth.clone()
    } else {
        let idx = rng.random_range(0..qa.distractors.len().max(1));
        qa.distractors
            .get(idx)
            .cloned()
            .ok_or_else(|| QaError::Domain("negative judgment needs a distractor".into()))?
    };
    Ok(QAPair { question: templates::fill(statement, &[("value", &value)]), answer: wanted.into(), ..base })
}

/// Paraphrases the question; the original is kept on any failure.
pub fn rephrase_question(qa: &QAPair, llm: &dyn ChatClient) -> QAPair {
    let name = if qa.format == Format::MultiChoice { "rephrase_multi_choice" } else { "rephrase_open" };
    let prompt = prompts::render_named(name, &[("question", &qa.question)]);
    match llm.chat(&[ChatTurn::user(prompt)]) {
        Ok(out) if !out.trim().is_empty() => QAPair { question: out.trim().to_string(), ..qa.clone() },
        Ok(_) => qa.clone(),
        Err(e) => {
            log::warn!("rephrase failed, keeping original question: {e}");
            qa.clone()
        }
    }
}
