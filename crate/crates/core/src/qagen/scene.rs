//! Scene-annotation tasks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::distractors::{
    extrinsics_distractors, homography_distractor, intrinsics_distractor, metric_distractors, motion_distractors,
    HOMOGRAPHY_NOISE,
};
use super::templates::{self, fill, flatten, TemplateGroup};
use super::{fmt_matrix, fmt_num, to_judgment, to_multiple_choice, QAPair, QaError, Task};
use crate::corpus::{Format, Media, OpenSubtype};
use crate::geometry::{
    box_metrics, classify_motion, convert_length_to_cm, describe_motion, relative_transform, Box3D, CameraPose,
    Homography, Intrinsics, LengthUnit, MotionThresholds,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<CameraPose>,
    /// (width, height) in pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomographyMeta {
    pub source: String,
    pub target: String,
    pub matrix: [[f64; 3]; 3],
}

/// One annotated scene. Boxes are in the first frame's camera coordinates
/// (meters); tracks hold one pixel position per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub scene_id: String,
    pub source: String,
    #[serde(default)]
    pub class_agnostic: bool,
    pub frames: Vec<FrameMeta>,
    #[serde(default)]
    pub boxes: Vec<Box3D>,
    #[serde(default)]
    pub tracks: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homography: Option<HomographyMeta>,
    /// Category names that may be asked about when absent from the scene.
    #[serde(default)]
    pub vocabulary: Vec<String>,
}

/// Categories used for negative existence questions when a scene has no
/// vocabulary of its own.
pub const DEFAULT_VOCABULARY: [&str; 12] = [
    "chair", "table", "sofa", "bed", "lamp", "television", "bicycle", "car", "person", "bottle", "cabinet", "plant",
];

/// Minimum gap in meters between compared quantities in relative tasks.
pub const RELATIVE_MARGIN_M: f64 = 0.05;

const DEFAULT_IMAGE_SIZE: (u32, u32) = (640, 480);

impl SceneMeta {
    pub fn validate(&self) -> Result<(), QaError> {
        let bad = |reason: String| QaError::Domain(format!("scene {}: {reason}", self.scene_id));
        if self.frames.is_empty() {
            return Err(bad("no frames".into()));
        }
        for b in &self.boxes {
            b.validate()?;
            if !self.class_agnostic && b.label.trim().is_empty() {
                return Err(bad("box without label".into()));
            }
        }
        for (i, t) in self.tracks.iter().enumerate() {
            if t.len() != self.frames.len() {
                return Err(bad(format!("track {i} has {} points for {} frames", t.len(), self.frames.len())));
            }
        }
        for f in &self.frames {
            if let Some(p) = &f.pose {
                p.intrinsic.validate(f.size)?;
                p.extrinsic.validate()?;
            }
        }
        Ok(())
    }

    /// Boxes whose label occurs once, so a name identifies one object.
    fn unique_boxes(&self) -> Vec<&Box3D> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for b in &self.boxes {
            *counts.entry(b.label.as_str()).or_default() += 1;
        }
        self.boxes.iter().filter(|b| counts[b.label.as_str()] == 1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    pub unit: LengthUnit,
    /// Distractors per item; multi-choice items get one more option.
    pub distractors: usize,
    pub homography_noise: (f64, f64),
    pub thresholds: MotionThresholds,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            unit: LengthUnit::Meter,
            distractors: 3,
            homography_noise: HOMOGRAPHY_NOISE,
            thresholds: MotionThresholds::default(),
        }
    }
}

struct Draft {
    question: String,
    template_id: String,
    truth: String,
    distractors: Vec<String>,
    statement: Option<String>,
    subtype: OpenSubtype,
    media: Vec<String>,
    extra: serde_json::Value,
}

fn pick_template<R: Rng + ?Sized>(groups: &[TemplateGroup], rng: &mut R) -> (String, &'static str) {
    let all = flatten(groups);
    all.choose(rng).cloned().expect("template lists are nonempty")
}

fn the_list(labels: &[&str]) -> String {
    let named: Vec<String> = labels.iter().map(|l| format!("the {l}")).collect();
    match named.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn metric_text(v: f64, unit: LengthUnit) -> String {
    format!("{} {}", fmt_num(v, super::distractors::METRIC_DECIMALS), unit.plural())
}

fn meters_to(v: f64, unit: LengthUnit) -> f64 {
    convert_length_to_cm(v, LengthUnit::Meter) / unit.cm_factor()
}

/// Distinct display strings from `make`, none equal to `truth`.
fn distinct<R: Rng + ?Sized>(
    truth: &str,
    n: usize,
    rng: &mut R,
    mut make: impl FnMut(&mut R) -> Result<String, QaError>,
) -> Result<Vec<String>, QaError> {
    let mut seen = BTreeSet::from([truth.to_string()]);
    let mut out = Vec::new();
    for _ in 0..n * 32 {
        if out.len() == n {
            break;
        }
        let s = make(rng)?;
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    if out.len() < n {
        return Err(QaError::Generation(format!("only {} of {n} distinct distractors", out.len())));
    }
    Ok(out)
}

/// Builds one QA item for `task` from `scene`. The same inputs always give
/// the same item.
pub fn generate_from_scene(
    scene: &SceneMeta,
    task: Task,
    format: Format,
    seed: u64,
    opts: &GenOptions,
) -> Result<QAPair, QaError> {
    scene.validate()?;
    if scene.class_agnostic && task.needs_labels() {
        return Err(QaError::ClassAgnostic { task, scene: scene.scene_id.clone() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unsupported =
        |reason: &str| QaError::Unsupported { task, scene: scene.scene_id.clone(), reason: reason.to_string() };
    let first_image = vec![scene.frames[0].image.clone()];
    let n = opts.distractors;
    let unit = opts.unit;

    let draft = match task {
        Task::Existence => {
            let present: BTreeSet<&str> = scene.boxes.iter().map(|b| b.label.as_str()).collect();
            let vocab: Vec<&str> = if scene.vocabulary.is_empty() {
                DEFAULT_VOCABULARY.to_vec()
            } else {
                scene.vocabulary.iter().map(String::as_str).collect()
            };
            let absent: Vec<&str> = vocab.into_iter().filter(|c| !present.contains(c)).collect();
            let positive = match (present.is_empty(), absent.is_empty()) {
                (true, true) => return Err(unsupported("no categories to ask about")),
                (true, false) => false,
                (false, true) => true,
                (false, false) => rng.random_bool(0.5),
            };
            let present: Vec<&str> = present.into_iter().collect();
            let category = if positive { present.choose(&mut rng) } else { absent.choose(&mut rng) }
                .copied()
                .expect("nonempty");
            let (id, t) = pick_template(templates::EXISTENCE, &mut rng);
            let truth = if positive { "yes" } else { "no" };
            Draft {
                question: fill(t, &[("category", category)]),
                template_id: id,
                truth: truth.into(),
                distractors: vec![if positive { "no" } else { "yes" }.into()],
                statement: None,
                subtype: OpenSubtype::Other,
                media: first_image,
                extra: json!({"category": category}),
            }
        }
        Task::Detect3d => {
            let b = *scene.unique_boxes().choose(&mut rng).ok_or_else(|| unsupported("no uniquely labeled box"))?;
            let corners = b.corners();
            let truth = fmt_matrix(&corners, 2);
            let scale = b.size.width.max(b.size.height).max(b.size.length) * 0.15;
            let distractors = distinct(&truth, n, &mut rng, |rng| {
                let noisy: Vec<[f64; 3]> = corners
                    .iter()
                    .map(|c| c.map(|v| v + rng.random_range(-scale..=scale)))
                    .collect();
                Ok(fmt_matrix(&noisy, 2))
            })?;
            let (id, t) = pick_template(templates::DETECT_3D, &mut rng);
            Draft {
                question: fill(t, &[("object_name", &b.label)]),
                template_id: id,
                truth,
                distractors,
                statement: Some(format!("Are the 3D bounding box corners of the {} {{value}}?", b.label)),
                subtype: OpenSubtype::Other,
                media: first_image,
                extra: json!({"object": b.label, "box": b}),
            }
        }
        Task::AbsDepth | Task::AbsDistance | Task::AbsSize => {
            let boxes = scene.unique_boxes();
            let (id, t) = match task {
                Task::AbsDepth => pick_template(templates::ABS_DEPTH, &mut rng),
                Task::AbsDistance => pick_template(templates::ABS_DISTANCE, &mut rng),
                _ => pick_template(templates::ABS_SIZE, &mut rng),
            };
            let (value_m, question, statement, extra) = match task {
                Task::AbsDepth => {
                    let b = *boxes.choose(&mut rng).ok_or_else(|| unsupported("no uniquely labeled box"))?;
                    let q = fill(t, &[("object_name", &b.label), ("unit", unit.plural())]);
                    let s = format!("Is the {} approximately {{value}} from the camera?", b.label);
                    (box_metrics(b, None).depth, q, s, json!({"object": b.label}))
                }
                Task::AbsDistance => {
                    if boxes.len() < 2 {
                        return Err(unsupported("needs two uniquely labeled boxes"));
                    }
                    let pair: Vec<&&Box3D> = boxes.choose_multiple(&mut rng, 2).collect();
                    let (a, b) = (*pair[0], *pair[1]);
                    let q = fill(t, &[("object1", &a.label), ("object2", &b.label)]);
                    let s = format!("Is the distance between the {} and the {} approximately {{value}}?", a.label, b.label);
                    (box_metrics(a, Some(b)).center_distance, q, s, json!({"objects": [a.label, b.label]}))
                }
                _ => {
                    let b = *boxes.choose(&mut rng).ok_or_else(|| unsupported("no uniquely labeled box"))?;
                    let dims = [("height", "tall", b.size.height), ("width", "wide", b.size.width), ("length", "long", b.size.length)];
                    let (dim, adj, v) = *dims.choose(&mut rng).expect("three dimensions");
                    let dim_type = format!("in {}", unit.plural());
                    let q = fill(
                        t,
                        &[("object_name", &b.label), ("dimension", dim), ("dimension_type", &dim_type), ("dimension_adj", adj)],
                    );
                    let s = format!("Is the {dim} of the {} approximately {{value}}?", b.label);
                    (v, q, s, json!({"object": b.label, "dimension": dim}))
                }
            };
            let v = meters_to(value_m, unit);
            if !(v > 0.0) {
                return Err(unsupported("metric ground truth is not positive"));
            }
            let distractors = metric_distractors(v, n, &mut rng)?.into_iter().map(|d| metric_text(d, unit)).collect();
            let mut extra = extra;
            extra["value"] = json!(v);
            extra["unit"] = json!(unit.symbol());
            Draft {
                question,
                template_id: id,
                truth: metric_text(v, unit),
                distractors,
                statement: Some(statement),
                subtype: OpenSubtype::Distance,
                media: first_image,
                extra,
            }
        }
        Task::RelDepth | Task::RelDistance => {
            let mut boxes = scene.unique_boxes();
            let reference = if task == Task::RelDistance {
                if boxes.len() < 3 {
                    return Err(unsupported("needs a reference and two candidates"));
                }
                let i = rng.random_range(0..boxes.len());
                Some(boxes.remove(i))
            } else {
                None
            };
            if boxes.len() < 2 {
                return Err(unsupported("needs two uniquely labeled boxes"));
            }
            let key = |b: &Box3D| match reference {
                Some(r) => box_metrics(b, Some(r)).center_distance,
                None => box_metrics(b, None).depth,
            };
            let mut chosen = None;
            for _ in 0..16 {
                let k = boxes.len().min(n + 1);
                let mut cand: Vec<&Box3D> = boxes.choose_multiple(&mut rng, k).copied().collect();
                cand.sort_by(|a, b| key(a).total_cmp(&key(b)));
                if key(cand[1]) - key(cand[0]) >= RELATIVE_MARGIN_M {
                    chosen = Some(cand);
                    break;
                }
            }
            let mut cand = chosen.ok_or_else(|| unsupported("no candidate set with a clear closest object"))?;
            let closest = cand[0];
            cand.shuffle(&mut rng);
            let labels: Vec<&str> = cand.iter().map(|b| b.label.as_str()).collect();
            let list = the_list(&labels);
            let (id, t, statement) = match reference {
                Some(r) => {
                    let (id, t) = pick_template(templates::REL_DISTANCE, &mut rng);
                    (id, fill(t, &[("reference", &r.label)]), format!("Among {list}, is the {{value}} closest to the {}?", r.label))
                }
                None => {
                    let (id, t) = pick_template(templates::REL_DEPTH, &mut rng);
                    (id, t.to_string(), format!("Among {list}, is the {{value}} closest to the camera?"))
                }
            };
            Draft {
                question: t,
                template_id: id,
                truth: closest.label.clone(),
                distractors: labels.iter().filter(|l| **l != closest.label).map(|l| l.to_string()).collect(),
                statement: Some(statement),
                subtype: OpenSubtype::Other,
                media: first_image,
                extra: json!({"candidates": labels, "reference": reference.map(|r| r.label.clone())}),
            }
        }
        Task::RelSize => {
            let boxes = scene.unique_boxes();
            if boxes.len() < 2 {
                return Err(unsupported("needs two uniquely labeled boxes"));
            }
            let (id, t) = pick_template(templates::REL_SIZE, &mut rng);
            let group = id.split('/').next().unwrap_or_default();
            let (dim, larger) = match group {
                "HEIGHT_LARGER" => ("height", true),
                "WIDTH_LARGER" => ("width", true),
                "LENGTH_LARGER" => ("length", true),
                "HEIGHT_SMALLER" => ("height", false),
                "WIDTH_SMALLER" => ("width", false),
                _ => ("length", false),
            };
            let measure = |b: &Box3D| match dim {
                "height" => b.size.height,
                "width" => b.size.width,
                _ => b.size.length,
            };
            let mut pair = None;
            for _ in 0..16 {
                let p: Vec<&Box3D> = boxes.choose_multiple(&mut rng, 2).copied().collect();
                if (measure(p[0]) - measure(p[1])).abs() >= RELATIVE_MARGIN_M {
                    pair = Some((p[0], p[1]));
                    break;
                }
            }
            let (a, b) = pair.ok_or_else(|| unsupported("no pair differing clearly in the asked dimension"))?;
            let a_wins = (measure(a) > measure(b)) == larger;
            let (win, lose) = if a_wins { (a, b) } else { (b, a) };
            let comparative = match (dim, larger) {
                ("height", true) => "taller",
                ("width", true) => "wider",
                ("length", true) => "longer",
                ("height", false) => "shorter",
                ("width", false) => "narrower",
                _ => "shorter in length",
            };
            Draft {
                question: fill(t, &[("object1", &a.label), ("object2", &b.label)]),
                template_id: id,
                truth: win.label.clone(),
                distractors: vec![lose.label.clone()],
                statement: Some(format!(
                    "Of the {} and the {}, is the {{value}} the {comparative} one?",
                    a.label, b.label
                )),
                subtype: OpenSubtype::Other,
                media: first_image,
                extra: json!({"objects": [a.label, b.label], "dimension": dim, "larger": larger}),
            }
        }
        Task::Intrinsics => {
            let pose = scene.frames[0].pose.ok_or_else(|| unsupported("first frame has no camera pose"))?;
            let (id, t) = pick_template(templates::INTRINSICS, &mut rng);
            let group = id.split('/').next().unwrap_or_default().to_string();
            let show = |k: &Intrinsics| match group.as_str() {
                "FOCAL_LENGTH" => format!("({}, {})", fmt_num(k.fx, 2), fmt_num(k.fy, 2)),
                "PRINCIPAL_POINT" => format!("({}, {})", fmt_num(k.cx, 2), fmt_num(k.cy, 2)),
                "FOCAL_LENGTH_X" => fmt_num(k.fx, 2),
                "FOCAL_LENGTH_Y" => fmt_num(k.fy, 2),
                _ => fmt_num(k.fx / k.fy, 4),
            };
            let statement = match group.as_str() {
                "FOCAL_LENGTH" => "Is the camera's focal length (fx, fy) in pixels {value}?",
                "PRINCIPAL_POINT" => "Is the principal point (cx, cy) of the camera {value}?",
                "FOCAL_LENGTH_X" => "Is the horizontal focal length (fx) {value} pixels?",
                "FOCAL_LENGTH_Y" => "Is the vertical focal length (fy) {value} pixels?",
                _ => "Is the aspect ratio of the camera's focal lengths (fx/fy) {value}?",
            };
            let k = pose.intrinsic;
            let truth = show(&k);
            let distractors = distinct(&truth, n, &mut rng, |rng| Ok(show(&intrinsics_distractor(&k, rng))))?;
            Draft {
                question: t.to_string(),
                template_id: id,
                truth,
                distractors,
                statement: Some(statement.into()),
                subtype: OpenSubtype::Other,
                media: first_image,
                extra: json!({"intrinsics": k}),
            }
        }
        Task::Extrinsics | Task::CameraMotion => {
            if scene.frames.len() < 2 {
                return Err(unsupported("needs two frames"));
            }
            let (Some(a), Some(b)) = (scene.frames[0].pose, scene.frames[1].pose) else {
                return Err(unsupported("first two frames need camera poses"));
            };
            let rel = relative_transform(&a.extrinsic, &b.extrinsic)?;
            let media = vec![scene.frames[0].image.clone(), scene.frames[1].image.clone()];
            if task == Task::Extrinsics {
                let show = |t: &crate::geometry::RigidTransform| {
                    let m = t.to_matrix4();
                    let rows: Vec<[f64; 4]> = (0..4).map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)], m[(r, 3)]]).collect();
                    fmt_matrix(&rows, 3)
                };
                let truth = show(&rel);
                let mut pool = Vec::new();
                for _ in 0..8 {
                    pool.extend(extrinsics_distractors(&rel, n, &mut rng).into_iter().map(|(_, d)| show(&d)));
                }
                let mut seen = BTreeSet::from([truth.clone()]);
                let distractors: Vec<String> = pool.into_iter().filter(|s| seen.insert(s.clone())).take(n).collect();
                if distractors.len() < n {
                    return Err(QaError::Generation("extrinsics distractors collapsed".into()));
                }
                let (id, t) = pick_template(templates::EXTRINSICS, &mut rng);
                Draft {
                    question: t.to_string(),
                    template_id: id,
                    truth,
                    distractors,
                    statement: Some("Is the transformation matrix from the first camera coordinate system to the second camera coordinate system in OpenCV convention {value}?".into()),
                    subtype: OpenSubtype::Other,
                    media,
                    extra: json!({"relative": rel}),
                }
            } else {
                let report = classify_motion(&rel, &opts.thresholds)?;
                let truth = describe_motion(&report);
                let distractors = motion_distractors(&report, &truth, n, &mut rng);
                let groups = if format == Format::OpenEnded { templates::CAMERA_MOTION_OPEN } else { templates::CAMERA_MOTION_MC };
                let (id, t) = pick_template(groups, &mut rng);
                Draft {
                    question: t.to_string(),
                    template_id: id,
                    truth,
                    distractors,
                    statement: Some("Does the sentence \"{value}\" describe the camera motion between the two images?".into()),
                    subtype: OpenSubtype::Other,
                    media,
                    extra: json!({"report": report}),
                }
            }
        }
        Task::PointTracking => {
            if scene.frames.len() < 2 || scene.tracks.is_empty() {
                return Err(unsupported("needs point tracks over two frames"));
            }
            let (w, h) = scene.frames[1].size.unwrap_or(DEFAULT_IMAGE_SIZE);
            let round = |p: [f64; 2]| [p[0].round(), p[1].round()];
            let show = |p: [f64; 2]| format!("({}, {})", p[0] as i64, p[1] as i64);
            let i = rng.random_range(0..scene.tracks.len());
            let src = round(scene.tracks[i][0]);
            let dst = round(scene.tracks[i][1]);
            let truth = show(dst);
            let far = |p: [f64; 2]| ((p[0] - dst[0]).powi(2) + (p[1] - dst[1]).powi(2)).sqrt() >= 10.0;
            let mut others: Vec<[f64; 2]> =
                scene.tracks.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| round(t[1])).filter(|p| far(*p)).collect();
            others.shuffle(&mut rng);
            let mut seen = BTreeSet::from([truth.clone()]);
            let mut distractors: Vec<String> = others.into_iter().map(show).filter(|s| seen.insert(s.clone())).take(n).collect();
            while distractors.len() < n {
                let p = [rng.random_range(0..w) as f64, rng.random_range(0..h) as f64];
                if ((p[0] - dst[0]).powi(2) + (p[1] - dst[1]).powi(2)).sqrt() >= 20.0 && seen.insert(show(p)) {
                    distractors.push(show(p));
                }
            }
            let (x1, y1) = ((src[0] as i64).to_string(), (src[1] as i64).to_string());
            let (id, t) = pick_template(templates::POINT_TRACKING, &mut rng);
            Draft {
                question: fill(t, &[("x1", &x1), ("y1", &y1)]),
                template_id: id,
                truth,
                distractors,
                statement: Some(format!(
                    "In the first image, there is a point at coordinates ({x1}, {y1}). Is its corresponding point in the second image at {{value}}?"
                )),
                subtype: OpenSubtype::Other,
                media: vec![scene.frames[0].image.clone(), scene.frames[1].image.clone()],
                extra: json!({"track": i}),
            }
        }
        Task::Homography => {
            let meta = scene.homography.as_ref().ok_or_else(|| unsupported("no homography annotation"))?;
            let m = nalgebra::Matrix3::from_fn(|r, c| meta.matrix[r][c]);
            let h = Homography::new(m)?;
            let truth = fmt_matrix(&h.to_rows(), 4);
            let noise = opts.homography_noise;
            let distractors = distinct(&truth, n, &mut rng, |rng| Ok(fmt_matrix(&homography_distractor(&h, noise, rng)?.to_rows(), 4)))?;
            let (id, t) = pick_template(templates::HOMOGRAPHY, &mut rng);
            Draft {
                question: t.to_string(),
                template_id: id,
                truth,
                distractors,
                statement: Some("Is {value} the homography matrix that transforms the original image to the given transformed image?".into()),
                subtype: OpenSubtype::Other,
                media: vec![meta.source.clone(), meta.target.clone()],
                extra: json!({"homography": h.to_rows()}),
            }
        }
        Task::SpatialMap | Task::Rotation2d | Task::Rotation3d | Task::MultiviewProjection => {
            return Err(unsupported("simulator task; use the simulators"));
        }
    };

    let mut question = draft.question;
    let open_candidates = matches!(task, Task::RelDepth | Task::RelDistance);
    if format == Format::OpenEnded && open_candidates {
        let mut all: Vec<&str> = draft.distractors.iter().map(String::as_str).chain([draft.truth.as_str()]).collect();
        all.sort();
        question = format!("{question} Candidates: {}.", all.join(", "));
    }
    let base = QAPair {
        question,
        format: Format::OpenEnded,
        options: None,
        answer: draft.truth.clone(),
        open_subtype: Some(draft.subtype),
        task,
        category: task.category(),
        template_id: draft.template_id,
        seed,
        media: Media { images: draft.media, ..Default::default() },
        source: scene.source.clone(),
        truth: draft.truth,
        distractors: draft.distractors,
        statement: draft.statement,
        extra: Some(draft.extra),
    };
    let qa = match format {
        Format::OpenEnded => base,
        Format::MultiChoice => {
            let d = base.distractors.clone();
            to_multiple_choice(&base, &d, &mut rng)?
        }
        Format::Judgment => to_judgment(&base, &mut rng, None)?,
    };
    qa.validate()?;
    Ok(qa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxSize, RigidTransform, RotationMatrix, Vec3};

    pub(crate) fn fixture() -> SceneMeta {
        let k = Intrinsics { fx: 1000.0, fy: 1000.0, cx: 320.0, cy: 240.0, skew: 0.0 };
        let pose0 = CameraPose { intrinsic: k, extrinsic: RigidTransform::identity() };
        let motion = RigidTransform::new(RotationMatrix::from_euler_yxz(15f64.to_radians(), 0.0, 0.0), Vec3::zeros());
        let pose1 = CameraPose { intrinsic: k, extrinsic: motion.inverse() };
        let bx = |c: [f64; 3], s: [f64; 3], l: &str| {
            Box3D::new(c, BoxSize { width: s[0], height: s[1], length: s[2] }, 0.0, l).unwrap()
        };
        SceneMeta {
            scene_id: "room-1".into(),
            source: "fixture".into(),
            class_agnostic: false,
            frames: vec![
                FrameMeta { image: "room/0.jpg".into(), pose: Some(pose0), size: Some((640, 480)) },
                FrameMeta { image: "room/1.jpg".into(), pose: Some(pose1), size: Some((640, 480)) },
            ],
            boxes: vec![
                bx([0.0, 0.2, 2.5], [0.5, 0.9, 0.5], "chair"),
                bx([1.0, 0.3, 4.0], [1.6, 0.75, 0.9], "table"),
                bx([-1.2, -0.4, 3.2], [0.3, 1.5, 0.3], "lamp"),
                bx([0.5, 0.0, 6.0], [2.0, 0.9, 0.9], "sofa"),
                bx([2.0, -0.5, 5.0], [1.0, 2.0, 0.4], "shelf"),
            ],
            tracks: (0..6).map(|i| vec![[100.0 + 40.0 * i as f64, 200.0], [120.0 + 40.0 * i as f64, 210.0]]).collect(),
            homography: Some(HomographyMeta {
                source: "room/0.jpg".into(),
                target: "room/warp.jpg".into(),
                matrix: [[1.1, 0.05, 12.0], [-0.02, 0.95, 7.5], [1e-4, 2e-4, 1.0]],
            }),
            vocabulary: vec![],
        }
    }

    #[test]
    fn all_tasks_all_formats() {
        let scene = fixture();
        for task in Task::SCENE_TASKS {
            for format in [Format::OpenEnded, Format::MultiChoice, Format::Judgment] {
                for seed in 0..20 {
                    let qa = generate_from_scene(&scene, task, format, seed, &GenOptions::default())
                        .unwrap_or_else(|e| panic!("{task} {format}: {e}"));
                    qa.to_sample(format!("{task}-{seed}")).validate().unwrap();
                    if format == Format::MultiChoice && task != Task::RelSize && task != Task::Existence {
                        assert_eq!(qa.options.as_ref().unwrap().options.len(), 4, "{task}");
                    }
                }
            }
        }
    }

    #[test]
    fn existence_positive_answer() {
        let scene = fixture();
        for seed in 0..40 {
            let qa = generate_from_scene(&scene, Task::Existence, Format::OpenEnded, seed, &GenOptions::default()).unwrap();
            let cat = qa.extra.as_ref().unwrap()["category"].as_str().unwrap().to_string();
            let present = scene.boxes.iter().any(|b| b.label == cat);
            assert_eq!(qa.answer, if present { "yes" } else { "no" });
            assert!(qa.question.contains(&cat));
        }
    }

    #[test]
    fn abs_depth_reads_box_center() {
        let mut scene = fixture();
        scene.boxes.truncate(1);
        let qa = generate_from_scene(&scene, Task::AbsDepth, Format::OpenEnded, 3, &GenOptions::default()).unwrap();
        assert_eq!(qa.answer, "2.5 meters");
        assert_eq!(qa.open_subtype, Some(OpenSubtype::Distance));
        let cm = GenOptions { unit: LengthUnit::Centimeter, ..Default::default() };
        let qa = generate_from_scene(&scene, Task::AbsDepth, Format::OpenEnded, 3, &cm).unwrap();
        assert_eq!(qa.answer, "250 centimeters");
    }

    #[test]
    fn camera_motion_answer() {
        let qa = generate_from_scene(&fixture(), Task::CameraMotion, Format::OpenEnded, 0, &GenOptions::default()).unwrap();
        assert_eq!(qa.answer, "The camera yawed right.");
    }

    #[test]
    fn relative_depth_is_closest() {
        for seed in 0..30 {
            let qa = generate_from_scene(&fixture(), Task::RelDepth, Format::MultiChoice, seed, &GenOptions::default()).unwrap();
            let scene = fixture();
            let set = qa.options.unwrap();
            let depth = |l: &str| scene.boxes.iter().find(|b| b.label == l).unwrap().center[2];
            let best = set.options.iter().min_by(|a, b| depth(a).total_cmp(&depth(b))).unwrap();
            assert_eq!(&set.options[set.correct], best);
        }
    }

    #[test]
    fn deterministic_and_rejections() {
        let scene = fixture();
        let a = generate_from_scene(&scene, Task::Homography, Format::MultiChoice, 11, &GenOptions::default()).unwrap();
        let b = generate_from_scene(&scene, Task::Homography, Format::MultiChoice, 11, &GenOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let mut agnostic = scene.clone();
        agnostic.class_agnostic = true;
        assert!(matches!(
            generate_from_scene(&agnostic, Task::RelDepth, Format::MultiChoice, 0, &GenOptions::default()),
            Err(QaError::ClassAgnostic { .. })
        ));
        assert!(generate_from_scene(&agnostic, Task::CameraMotion, Format::MultiChoice, 0, &GenOptions::default()).is_ok());
        let mut single = scene;
        single.frames.truncate(1);
        single.tracks.iter_mut().for_each(|t| t.truncate(1));
        assert!(matches!(
            generate_from_scene(&single, Task::Extrinsics, Format::MultiChoice, 0, &GenOptions::default()),
            Err(QaError::Unsupported { .. })
        ));
    }
}
