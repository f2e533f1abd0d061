//! Benchmark manifests: the sample schema, line-delimited loading and
//! writing, frame sampling and dataset statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::LengthUnit;

/// Environment variable overriding the media root used to resolve sample media.
pub const MEDIA_ROOT_ENV: &str = "SPATIAL_MEDIA_ROOT";

/// Default number of frames sampled from a video.
pub const DEFAULT_FRAME_COUNT: usize = 32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid sample {id}: {message}")]
    Invalid { id: String, message: String },
    #[error("duplicate sample id {0}")]
    DuplicateId(String),
    #[error("manifest header declares {declared} samples but body has {actual}")]
    CountMismatch { declared: usize, actual: usize },
    #[error("sample has no media to sample frames from")]
    EmptyMedia,
    #[error("media not found: {0}")]
    MissingMedia(PathBuf),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Format {
    #[serde(rename = "judgment")]
    Judgment,
    #[serde(rename = "multi-choice")]
    MultiChoice,
    #[serde(rename = "open-ended")]
    OpenEnded,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Judgment => "judgment",
            Format::MultiChoice => "multi-choice",
            Format::OpenEnded => "open-ended",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenSubtype {
    Counting,
    Distance,
    Other,
}

impl OpenSubtype {
    pub fn as_str(self) -> &'static str {
        match self {
            OpenSubtype::Counting => "counting",
            OpenSubtype::Distance => "distance",
            OpenSubtype::Other => "other",
        }
    }
}

/// The ten benchmark categories, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Category {
    MentalAnimation,
    Counting,
    DepthEstimation,
    ObjectDistance,
    ObjectMotion,
    Camera,
    TemporalReasoning,
    ViewReasoning,
    ObjectSize,
    ObjectLocalization,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::MentalAnimation,
        Category::Counting,
        Category::DepthEstimation,
        Category::ObjectDistance,
        Category::ObjectMotion,
        Category::Camera,
        Category::TemporalReasoning,
        Category::ViewReasoning,
        Category::ObjectSize,
        Category::ObjectLocalization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::MentalAnimation => "Mental Animation",
            Category::Counting => "Counting",
            Category::DepthEstimation => "Depth Estimation",
            Category::ObjectDistance => "Object Distance",
            Category::ObjectMotion => "Object Motion",
            Category::Camera => "Camera",
            Category::TemporalReasoning => "Temporal Reasoning",
            Category::ViewReasoning => "View Reasoning",
            Category::ObjectSize => "Object Size",
            Category::ObjectLocalization => "Object Localization",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CorpusError::UnknownCategory(s.to_string()))
    }
}

impl TryFrom<String> for Category {
    type Error = CorpusError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Category> for String {
    fn from(c: Category) -> Self {
        c.name().to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Media {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    TextOnly,
    SingleImage,
    MultiImage,
    Video,
}

impl Media {
    pub fn is_empty(&self) -> bool {
        self.images.is_empty() && self.frames.is_empty() && self.video.is_none()
    }

    pub fn modality(&self) -> Modality {
        if self.video.is_some() {
            Modality::Video
        } else if !self.frames.is_empty() || self.images.len() > 1 {
            Modality::MultiImage
        } else if self.images.len() == 1 {
            Modality::SingleImage
        } else {
            Modality::TextOnly
        }
    }

    /// Image-like references in prompt order: images, then frames (sampled
    /// down to `max_frames`), then the video path.
    pub fn prompt_refs(&self, max_frames: usize) -> Vec<String> {
        let mut refs = self.images.clone();
        if !self.frames.is_empty() {
            let idx = sample_frames(self.frames.len(), max_frames).unwrap_or_default();
            refs.extend(idx.into_iter().map(|i| self.frames[i].clone()));
        }
        refs.extend(self.video.iter().cloned());
        refs
    }

    fn all_refs(&self) -> impl Iterator<Item = &String> {
        self.images.iter().chain(&self.frames).chain(self.video.iter())
    }
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub question: String,
    pub format: Format,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    /// Option letter, "yes"/"no", or the open-ended answer text.
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_subtype: Option<OpenSubtype>,
    #[serde(default, skip_serializing_if = "Media::is_empty")]
    pub media: Media,
    pub task: String,
    pub category: Category,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

pub fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

impl Sample {
    /// Question text with lettered options appended for multi-choice items.
    pub fn prompt_question(&self) -> String {
        if self.options.is_empty() {
            return self.question.clone();
        }
        let mut s = self.question.clone();
        s.push_str("\nOptions:");
        for (i, opt) in self.options.iter().enumerate() {
            s.push_str(&format!("\n({}) {}", option_letter(i), opt));
        }
        s
    }

    pub fn correct_index(&self) -> Option<usize> {
        let mut chars = self.answer.trim().chars();
        let c = chars.next()?;
        if chars.next().is_some() || !c.is_ascii_uppercase() {
            return None;
        }
        let idx = (c as u8 - b'A') as usize;
        (idx < self.options.len()).then_some(idx)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |message: String| CorpusError::Invalid { id: self.id.clone(), message };
        if self.id.trim().is_empty() {
            return Err(bad("empty id".into()));
        }
        if self.question.trim().is_empty() {
            return Err(bad("empty question".into()));
        }
        match self.format {
            Format::MultiChoice => {
                if self.options.len() < 2 {
                    return Err(bad(format!("multi-choice needs >= 2 options, got {}", self.options.len())));
                }
                if self.options.len() > 26 {
                    return Err(bad("more than 26 options".into()));
                }
                if self.correct_index().is_none() {
                    return Err(bad(format!("answer {:?} is not an option letter", self.answer)));
                }
                let distinct: BTreeSet<String> = self.options.iter().map(|o| normalize_text(o)).collect();
                if distinct.len() != self.options.len() {
                    return Err(bad("options are not pairwise distinct".into()));
                }
            }
            Format::Judgment => {
                let a = self.answer.trim().to_ascii_lowercase();
                if a != "yes" && a != "no" {
                    return Err(bad(format!("judgment answer must be yes/no, got {:?}", self.answer)));
                }
            }
            Format::OpenEnded => {
                let subtype = self.open_subtype.ok_or_else(|| bad("open-ended sample without open_subtype".into()))?;
                if self.answer.trim().is_empty() {
                    return Err(bad("empty answer".into()));
                }
                match subtype {
                    OpenSubtype::Counting => {
                        if leading_number(&self.answer).is_none() {
                            return Err(bad(format!("counting answer {:?} is not numeric", self.answer)));
                        }
                    }
                    OpenSubtype::Distance => {
                        let (_, unit) = leading_number(&self.answer)
                            .ok_or_else(|| bad(format!("distance answer {:?} is not numeric", self.answer)))?;
                        if let Some(u) = unit {
                            if u.parse::<LengthUnit>().is_err() {
                                return Err(bad(format!("unit {u:?} is not a supported length unit")));
                            }
                        }
                    }
                    OpenSubtype::Other => {}
                }
            }
        }
        Ok(())
    }
}

/// Lowercases, trims, collapses whitespace and strips trailing periods.
pub fn normalize_text(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed.trim_end_matches('.').trim().to_string()
}

/// Leading number of an answer string and the word after it, if any.
fn leading_number(s: &str) -> Option<(f64, Option<String>)> {
    let mut parts = s.split_whitespace();
    let value: f64 = parts.next()?.parse().ok()?;
    Some((value, parts.next().map(|u| u.trim_end_matches('.').to_string())))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub name: String,
    pub version: String,
    /// Declared sample count; checked against the body on load.
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub header: Option<ManifestHeader>,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Check that every media reference exists under the media root.
    pub check_media: bool,
    pub media_root: Option<PathBuf>,
}

/// Media root: explicit override, then the environment variable, then the
/// manifest's directory.
pub fn media_root(explicit: Option<&Path>, manifest_path: &Path) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var(MEDIA_ROOT_ENV) {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

const REQUIRED_FIELDS: [&str; 7] = ["id", "question", "format", "answer", "task", "category", "source"];

fn parse_sample_line(line: &str, lineno: usize) -> Result<Sample, CorpusError> {
    let err = |message: String| CorpusError::Line { line: lineno, message };
    let value: Value = serde_json::from_str(line).map_err(|e| err(format!("malformed JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| err("record is not a JSON object".into()))?;
    let missing: Vec<&str> = REQUIRED_FIELDS.iter().copied().filter(|f| !obj.contains_key(*f)).collect();
    if !missing.is_empty() {
        return Err(err(format!("missing field(s): {}", missing.join(", "))));
    }
    let sample: Sample = serde_json::from_value(value).map_err(|e| err(format!("schema violation: {e}")))?;
    sample.validate().map_err(|e| err(e.to_string()))?;
    Ok(sample)
}

impl Manifest {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { header: None, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Parses manifest text. The first non-empty line may be a header
    /// object of the form `{"manifest": {...}}`.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut header = None;
        let mut samples = Vec::new();
        let mut ids = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if header.is_none() && samples.is_empty() && line.trim_start().starts_with("{\"manifest\"") {
                #[derive(Deserialize)]
                struct Wrapper {
                    manifest: ManifestHeader,
                }
                let w: Wrapper = serde_json::from_str(line)
                    .map_err(|e| CorpusError::Line { line: lineno, message: format!("bad header: {e}") })?;
                header = Some(w.manifest);
                continue;
            }
            let sample = parse_sample_line(line, lineno)?;
            if !ids.insert(sample.id.clone()) {
                return Err(CorpusError::Line {
                    line: lineno,
                    message: format!("duplicate sample id {}", sample.id),
                });
            }
            samples.push(sample);
        }
        if let Some(h) = &header {
            if h.total != samples.len() {
                return Err(CorpusError::CountMismatch { declared: h.total, actual: samples.len() });
            }
        }
        Ok(Self { header, samples })
    }

    /// Canonical text form: optional header line, then one sample per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.header {
            let line = serde_json::json!({ "manifest": h });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, self.to_jsonl()).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
    }

    pub fn check_media(&self, root: &Path) -> Result<(), CorpusError> {
        for s in &self.samples {
            for r in s.media.all_refs() {
                let p = root.join(r);
                if !p.exists() {
                    return Err(CorpusError::MissingMedia(p));
                }
            }
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    load_manifest_with(path, &LoadOptions::default())
}

pub fn load_manifest_with(path: &Path, opts: &LoadOptions) -> Result<Manifest, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        text.push_str(&line);
        text.push('\n');
    }
    let manifest = Manifest::parse(&text)?;
    if opts.check_media {
        manifest.check_media(&media_root(opts.media_root.as_deref(), path))?;
    }
    Ok(manifest)
}

/// Evenly spaced frame indices over `[0, frame_count - 1]`, rounded to the
/// nearest integer and deduplicated. Returns every frame when the video is
/// shorter than `n`.
pub fn sample_frames(frame_count: usize, n: usize) -> Result<Vec<usize>, CorpusError> {
    if frame_count == 0 {
        return Err(CorpusError::EmptyMedia);
    }
    if frame_count <= n {
        return Ok((0..frame_count).collect());
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let last = (frame_count - 1) as f64;
    let step = last / (n - 1) as f64;
    let mut out: Vec<usize> = (0..n).map(|i| (i as f64 * step).round() as usize).collect();
    out.dedup();
    Ok(out)
}

/// Frame references selected by [`sample_frames`].
pub fn sample_frame_refs(frames: &[String], n: usize) -> Result<Vec<String>, CorpusError> {
    Ok(sample_frames(frames.len(), n)?.into_iter().map(|i| frames[i].clone()).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub by_format: BTreeMap<String, usize>,
    pub by_modality: BTreeMap<String, usize>,
    pub by_task: BTreeMap<String, usize>,
    pub by_category: BTreeMap<String, usize>,
    pub by_source: BTreeMap<String, usize>,
}

pub fn stats(manifest: &Manifest) -> StatsReport {
    let mut r = StatsReport { total: manifest.len(), ..Default::default() };
    for s in &manifest.samples {
        let modality = serde_json::to_value(s.media.modality())
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        *r.by_format.entry(s.format.to_string()).or_default() += 1;
        *r.by_modality.entry(modality).or_default() += 1;
        *r.by_task.entry(s.task.clone()).or_default() += 1;
        *r.by_category.entry(s.category.to_string()).or_default() += 1;
        *r.by_source.entry(s.source.clone()).or_default() += 1;
    }
    r
}

impl StatsReport {
    /// Fixed-width text table.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<32} {:>8}\n", "total", self.total);
        for (title, map) in [
            ("format", &self.by_format),
            ("modality", &self.by_modality),
            ("category", &self.by_category),
            ("task", &self.by_task),
            ("source", &self.by_source),
        ] {
            out.push_str(&format!("\n[{title}]\n"));
            for (k, v) in map {
                out.push_str(&format!("{k:<32} {v:>8}\n"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn mcq(id: &str) -> Sample {
        Sample {
            id: id.into(),
            question: "Which is closer?".into(),
            format: Format::MultiChoice,
            options: vec!["dog".into(), "cat".into()],
            answer: "B".into(),
            open_subtype: None,
            media: Media { images: vec!["a.png".into()], ..Default::default() },
            task: "rel_depth".into(),
            category: Category::DepthEstimation,
            source: "fixture".into(),
            meta: None,
        }
    }

    #[test]
    fn empty_manifest() {
        let m = Manifest::parse("").unwrap();
        assert!(m.is_empty());
        assert_eq!(stats(&m).total, 0);
    }

    #[test]
    fn round_trip() {
        let m = Manifest {
            header: Some(ManifestHeader { name: "t".into(), version: "1".into(), total: 1, generator: None }),
            samples: vec![mcq("s1")],
        };
        let text = m.to_jsonl();
        let back = Manifest::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_jsonl(), text);
        assert_eq!(back.samples[0].format, Format::MultiChoice);
    }

    #[test]
    fn missing_answer_names_field_and_line() {
        let mut v = serde_json::to_value(mcq("s1")).unwrap();
        v.as_object_mut().unwrap().remove("answer");
        let text = format!("{}\n{}\n", serde_json::to_string(&mcq("s0")).unwrap(), v);
        let err = Manifest::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("answer"), "{err}");
    }

    #[test]
    fn rejects_unknown_category_and_duplicates() {
        let line = serde_json::to_string(&mcq("s1")).unwrap().replace("Depth Estimation", "Astrology");
        assert!(Manifest::parse(&line).is_err());
        let dup = format!("{0}\n{0}\n", serde_json::to_string(&mcq("s1")).unwrap());
        assert!(Manifest::parse(&dup).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn header_count_is_checked() {
        let text = format!(
            "{{\"manifest\":{{\"name\":\"x\",\"version\":\"1\",\"total\":2}}}}\n{}\n",
            serde_json::to_string(&mcq("s1")).unwrap()
        );
        assert!(matches!(Manifest::parse(&text), Err(CorpusError::CountMismatch { declared: 2, actual: 1 })));
    }

    #[test]
    fn frame_sampling() {
        assert_eq!(sample_frames(32, 32).unwrap(), (0..32).collect::<Vec<_>>());
        assert_eq!(sample_frames(10, 32).unwrap(), (0..10).collect::<Vec<_>>());
        assert!(matches!(sample_frames(0, 32), Err(CorpusError::EmptyMedia)));
        let idx = sample_frames(64, 32).unwrap();
        assert_eq!(idx.len(), 32);
        assert_eq!((idx[0], idx[31]), (0, 63));
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        // oracle: nearest integer of linspace(0, 63, 32)
        for (i, &v) in idx.iter().enumerate() {
            let exact = i as f64 * 63.0 / 31.0;
            assert!((v as f64 - exact).abs() <= 0.5);
        }
    }

    #[test]
    fn validation_rules() {
        let mut s = mcq("x");
        s.answer = "C".into();
        assert!(s.validate().is_err());
        s.answer = "B".into();
        s.options = vec!["Dog".into(), "dog.".into()];
        assert!(s.validate().is_err());
        let mut j = mcq("j");
        j.format = Format::Judgment;
        j.options.clear();
        j.answer = "maybe".into();
        assert!(j.validate().is_err());
        let mut o = mcq("o");
        o.format = Format::OpenEnded;
        o.options.clear();
        o.answer = "2.5 furlongs".into();
        o.open_subtype = Some(OpenSubtype::Distance);
        assert!(o.validate().is_err());
        o.answer = "2.5 meters".into();
        o.validate().unwrap();
    }

    #[test]
    fn prompt_question_lists_options() {
        assert_eq!(mcq("x").prompt_question(), "Which is closer?\nOptions:\n(A) dog\n(B) cat");
    }
}
