//! Procedural simulators: spatial maps, 2D grid rotation, 3D voxel rotation
//! and multi-view projection.

use std::collections::BTreeSet;

use image::RgbImage;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::render::{render_grid, render_map, render_voxels};
use super::templates::{self, fill};
use super::{OptionSet, QAPair, QaError, Task};
use crate::corpus::{Format, Media};
use crate::geometry::{cube_rotations, grid_is_asymmetric, voxel_equivalent, ColorGrid, FlipAxis, Voxel, VoxelShape};

/// Structure behind a rendered image; written next to the PNG as a sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Asset {
    Grid { grid: ColorGrid },
    Voxels { shape: VoxelShape },
    Map { points: Vec<(String, [f64; 2])>, extent: f64 },
}

impl Asset {
    pub fn render(&self) -> RgbImage {
        match self {
            Asset::Grid { grid } => render_grid(grid, 32),
            Asset::Voxels { shape } => render_voxels(shape, 24.0),
            Asset::Map { points, extent } => render_map(points, *extent, 320),
        }
    }
}

/// A simulator question plus the images it refers to, in media order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimItem {
    pub qa: QAPair,
    pub assets: Vec<(String, Asset)>,
}

impl SimItem {
    /// Places asset names under `dir` in both the asset list and the media refs.
    pub fn with_prefix(mut self, dir: &str) -> Self {
        for (name, _) in &mut self.assets {
            *name = format!("{dir}/{name}");
        }
        self.qa.media.images = self.assets.iter().map(|(n, _)| n.clone()).collect();
        self
    }
}

const MAX_TRIES: usize = 200;

fn item(task: Task, question: String, template_id: &str, options: OptionSet, extra: serde_json::Value, assets: Vec<(String, Asset)>) -> SimItem {
    let truth = options.options[options.correct].clone();
    let distractors =
        options.options.iter().enumerate().filter(|(i, _)| *i != options.correct).map(|(_, o)| o.clone()).collect();
    let qa = QAPair {
        question,
        format: Format::MultiChoice,
        answer: options.correct_letter().to_string(),
        options: Some(options),
        open_subtype: None,
        task,
        category: task.category(),
        template_id: template_id.into(),
        seed: 0,
        media: Media { images: assets.iter().map(|(n, _)| n.clone()).collect(), ..Default::default() },
        source: "simulator".into(),
        truth,
        distractors,
        statement: None,
        extra: Some(extra),
    };
    SimItem { qa, assets }
}

/// Shuffles `correct` among `others` and labels image options by position.
fn shuffled<T: Clone, R: Rng + ?Sized>(correct: T, others: Vec<T>, rng: &mut R) -> (Vec<T>, usize) {
    let mut all: Vec<(bool, T)> = std::iter::once((true, correct)).chain(others.into_iter().map(|o| (false, o))).collect();
    all.shuffle(rng);
    let idx = all.iter().position(|(c, _)| *c).expect("correct present");
    (all.into_iter().map(|(_, t)| t).collect(), idx)
}

fn image_options(n: usize, first: usize) -> Vec<String> {
    (0..n).map(|i| format!("image-{}", i + first)).collect()
}

pub const COMPASS: [&str; 8] = ["east", "northeast", "north", "northwest", "west", "southwest", "south", "southeast"];

/// 8-way compass sector for a bearing in degrees (0 = east, counterclockwise).
/// Bearings on a sector boundary go to the adjacent cardinal direction.
pub fn compass_sector(bearing_deg: f64) -> &'static str {
    let a = bearing_deg.rem_euclid(360.0);
    let shifted = (a - 22.5).rem_euclid(45.0);
    if shifted.abs() < 1e-9 || (45.0 - shifted).abs() < 1e-9 {
        let cardinal = ((a / 90.0).round() as usize) % 4;
        return COMPASS[cardinal * 2];
    }
    COMPASS[(((a + 22.5) / 45.0).floor() as usize) % 8]
}

/// Direction of `p` as seen from `from`.
pub fn direction_of(p: [f64; 2], from: [f64; 2]) -> &'static str {
    compass_sector((p[1] - from[1]).atan2(p[0] - from[0]).to_degrees())
}

const PLACES: [&str; 16] = [
    "Bank", "Cafe", "Park", "School", "Library", "Museum", "Hotel", "Market", "Bakery", "Cinema", "Station", "Tower",
    "Garden", "Harbor", "Stadium", "Clinic",
];

pub const MAP_EXTENT: f64 = 100.0;
const MIN_SEPARATION: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapQuestion {
    DirectionRelation,
    FindObject,
    CountObjects,
    ClosestObject,
}

impl MapQuestion {
    pub const ALL: [MapQuestion; 4] =
        [MapQuestion::DirectionRelation, MapQuestion::FindObject, MapQuestion::CountObjects, MapQuestion::ClosestObject];
}

/// Places `n_objects` labeled, well-separated points and asks one of the
/// four map questions. Items have four options when the map has enough
/// objects to supply three wrong ones.
pub fn sim_spatial_map<R: Rng + ?Sized>(
    rng: &mut R,
    n_objects: usize,
    kind: Option<MapQuestion>,
) -> Result<SimItem, QaError> {
    if !(3..=PLACES.len()).contains(&n_objects) {
        return Err(QaError::Domain(format!("spatial map needs 3..={} objects, got {n_objects}", PLACES.len())));
    }
    for _ in 0..MAX_TRIES {
        let names: Vec<&str> = PLACES.choose_multiple(rng, n_objects).copied().collect();
        let mut pts: Vec<[f64; 2]> = Vec::new();
        while pts.len() < n_objects {
            let p = [rng.random_range(0..=100) as f64, rng.random_range(0..=100) as f64];
            if pts.iter().all(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() >= MIN_SEPARATION) {
                pts.push(p);
            }
        }
        let kind = kind.unwrap_or_else(|| *MapQuestion::ALL.choose(rng).expect("nonempty"));
        let points: Vec<(String, [f64; 2])> = names.iter().map(|n| n.to_string()).zip(pts.iter().copied()).collect();
        let assets = vec![("map.png".to_string(), Asset::Map { points: points.clone(), extent: MAP_EXTENT })];
        let extra_base = json!({"subtype": kind, "points": points});
        let a = rng.random_range(0..n_objects);
        let others: Vec<usize> = (0..n_objects).filter(|&i| i != a).collect();
        let rule = templates::DIRECTION_RULE;
        match kind {
            MapQuestion::DirectionRelation => {
                let b = *others.choose(rng).expect("n >= 3");
                let dir = direction_of(pts[a], pts[b]);
                let wrong: Vec<&str> = COMPASS.iter().copied().filter(|d| *d != dir).collect();
                let wrong: Vec<String> = wrong.choose_multiple(rng, 3).map(|s| s.to_string()).collect();
                let (opts, idx) = shuffled(dir.to_string(), wrong, rng);
                let q = fill(
                    templates::SPATIAL_DIRECTION_RELATION,
                    &[("q1_p1", names[a]), ("q1_p2", names[b]), ("DIRECTION_RULE", rule)],
                );
                let extra = json!({"base": extra_base, "p1": names[a], "p2": names[b]});
                return Ok(item(Task::SpatialMap, q, "direction_relation", OptionSet::new(opts, idx)?, extra, assets));
            }
            MapQuestion::FindObject => {
                let target = *others.choose(rng).expect("n >= 3");
                let dir = direction_of(pts[target], pts[a]);
                let outside: Vec<usize> = others.iter().copied().filter(|&i| direction_of(pts[i], pts[a]) != dir).collect();
                if outside.len() < 3.min(n_objects - 2) {
                    continue;
                }
                let wrong: Vec<String> = outside.choose_multiple(rng, 3).map(|&i| names[i].to_string()).collect();
                let (opts, idx) = shuffled(names[target].to_string(), wrong, rng);
                let q = fill(templates::SPATIAL_FIND_OBJECT, &[("target_dir", dir), ("q2_p1", names[a]), ("DIRECTION_RULE", rule)]);
                let extra = json!({"base": extra_base, "p1": names[a], "direction": dir});
                return Ok(item(Task::SpatialMap, q, "find_object", OptionSet::new(opts, idx)?, extra, assets));
            }
            MapQuestion::CountObjects => {
                let dir = *COMPASS.choose(rng).expect("nonempty");
                let count = others.iter().filter(|&&i| direction_of(pts[i], pts[a]) == dir).count();
                let wrong_pool: Vec<usize> = (0..n_objects.max(4)).filter(|&c| c != count).collect();
                let wrong: Vec<String> = wrong_pool.choose_multiple(rng, 3).map(|c| c.to_string()).collect();
                let (opts, idx) = shuffled(count.to_string(), wrong, rng);
                let q = fill(
                    templates::SPATIAL_COUNT_OBJECTS,
                    &[("q3_target_dir", dir), ("q3_p1", names[a]), ("DIRECTION_RULE", rule)],
                );
                let extra = json!({"base": extra_base, "p1": names[a], "direction": dir});
                return Ok(item(Task::SpatialMap, q, "count_objects", OptionSet::new(opts, idx)?, extra, assets));
            }
            MapQuestion::ClosestObject => {
                let dist = |i: usize| ((pts[i][0] - pts[a][0]).powi(2) + (pts[i][1] - pts[a][1]).powi(2)).sqrt();
                let mut by_dist = others.clone();
                by_dist.sort_by(|&i, &j| dist(i).total_cmp(&dist(j)));
                if dist(by_dist[1]) - dist(by_dist[0]) < 1.0 {
                    continue;
                }
                let wrong: Vec<String> = by_dist[1..].choose_multiple(rng, 3).map(|&i| names[i].to_string()).collect();
                let (opts, idx) = shuffled(names[by_dist[0]].to_string(), wrong, rng);
                let q = fill(templates::SPATIAL_CLOSEST_OBJECT, &[("q4_p1", names[a])]);
                let extra = json!({"base": extra_base, "p1": names[a]});
                return Ok(item(Task::SpatialMap, q, "closest_object", OptionSet::new(opts, idx)?, extra, assets));
            }
        }
    }
    Err(QaError::Generation("could not place a map with a single-answer question".into()))
}

fn random_grid<R: Rng + ?Sized>(rng: &mut R) -> Result<ColorGrid, QaError> {
    let n = rng.random_range(3..=4);
    let colors = rng.random_range(3..=5u8);
    for _ in 0..MAX_TRIES {
        let cells = (0..n * n).map(|_| rng.random_range(1..=colors)).collect();
        let g = ColorGrid::new(n, n, cells)?;
        if grid_is_asymmetric(&g)? {
            return Ok(g);
        }
    }
    Err(QaError::Generation("no asymmetric grid within the retry bound".into()))
}

/// Reference grid, one rotated copy and three flipped or recolored copies
/// that match the reference under no rotation.
pub fn sim_rotation2d<R: Rng + ?Sized>(rng: &mut R) -> Result<SimItem, QaError> {
    let reference = random_grid(rng)?;
    let k = rng.random_range(1..=3u32);
    let correct = reference.rotate(k)?;
    let mut distractors: Vec<(String, ColorGrid)> = Vec::new();
    let kinds = ["flip", "color_shift", if rng.random_bool(0.5) { "flip" } else { "color_shift" }];
    for kind in kinds {
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let base = if kind == "flip" {
                let axis = if rng.random_bool(0.5) { FlipAxis::Horizontal } else { FlipAxis::Vertical };
                reference.flip(axis)?
            } else {
                let mut cells = reference.cells.clone();
                let changes = rng.random_range(1..=2);
                let max_color = *cells.iter().max().unwrap_or(&1);
                for _ in 0..changes {
                    let i = rng.random_range(0..cells.len());
                    let old = cells[i];
                    let choices: Vec<u8> = (1..=max_color.max(2)).filter(|c| *c != old).collect();
                    cells[i] = *choices.choose(rng).expect("at least one other color");
                }
                ColorGrid::new(reference.width, reference.height, cells)?
            };
            let d = base.rotate(rng.random_range(0..4))?;
            if d.rotation_equivalent(&reference)? || d == correct || distractors.iter().any(|(_, o)| *o == d) {
                continue;
            }
            distractors.push((kind.to_string(), d));
            placed = true;
            break;
        }
        if !placed {
            return Err(QaError::Generation("could not build a non-equivalent distractor grid".into()));
        }
    }
    let (grids, idx) = shuffled(correct, distractors.iter().map(|(_, g)| g.clone()).collect(), rng);
    let mut assets = vec![("reference.png".to_string(), Asset::Grid { grid: reference.clone() })];
    for (i, g) in grids.iter().enumerate() {
        assets.push((format!("option_{}.png", i + 1), Asset::Grid { grid: g.clone() }));
    }
    let extra = json!({
        "reference": reference,
        "options": grids,
        "quarter_turns": k,
        "distractor_kinds": distractors.iter().map(|(k, _)| k.clone()).collect::<Vec<_>>(),
    });
    let options = OptionSet::new(image_options(4, 1), idx)?;
    Ok(item(Task::Rotation2d, templates::ROTATION_2D.into(), "rotation_2d", options, extra, assets))
}

const NEIGHBORS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

fn free_neighbors(shape: &[Voxel]) -> Vec<[i32; 3]> {
    let occupied: BTreeSet<[i32; 3]> = shape.iter().map(Voxel::pos).collect();
    let mut out = BTreeSet::new();
    for v in shape {
        for d in NEIGHBORS {
            let p = [v.x + d[0], v.y + d[1], v.z + d[2]];
            if !occupied.contains(&p) {
                out.insert(p);
            }
        }
    }
    out.into_iter().collect()
}

fn random_polycube<R: Rng + ?Sized>(rng: &mut R, count: usize, colors: u8) -> VoxelShape {
    let mut voxels = vec![Voxel { x: 0, y: 0, z: 0, color: rng.random_range(1..=colors) }];
    while voxels.len() < count {
        let spots = free_neighbors(&voxels);
        let [x, y, z] = *spots.choose(rng).expect("a finite shape has free neighbors");
        voxels.push(Voxel { x, y, z, color: rng.random_range(1..=colors) });
    }
    VoxelShape::new(voxels).expect("grown without duplicates").canonical()
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R, allow_identity: bool) -> [[i32; 3]; 3] {
    let rots = cube_rotations();
    let start = if allow_identity { 0 } else { 1 };
    rots[rng.random_range(start..rots.len())]
}

/// Asymmetric colored polycube, one rotated copy, and distractors that
/// change the voxel count, a color, or the layout.
pub fn sim_rotation3d<R: Rng + ?Sized>(rng: &mut R) -> Result<SimItem, QaError> {
    let mut reference = None;
    for _ in 0..MAX_TRIES {
        let count = rng.random_range(5..=7);
        let s = random_polycube(rng, count, 3);
        if !s.has_self_symmetry() {
            reference = Some(s);
            break;
        }
    }
    let reference = reference.ok_or_else(|| QaError::Generation("no asymmetric voxel shape".into()))?;
    let correct = reference.rotated(&random_rotation(rng, false));
    let mut distractors: Vec<(&str, VoxelShape)> = Vec::new();
    for kind in ["count", "color", "layout"] {
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let mut voxels = reference.voxels.clone();
            match kind {
                "count" => {
                    if rng.random_bool(0.5) && voxels.len() > 2 {
                        voxels.remove(rng.random_range(0..voxels.len()));
                    } else {
                        let [x, y, z] = *free_neighbors(&voxels).choose(rng).expect("free spot");
                        voxels.push(Voxel { x, y, z, color: rng.random_range(1..=3) });
                    }
                }
                "color" => {
                    let i = rng.random_range(0..voxels.len());
                    let old = voxels[i].color;
                    voxels[i].color = *[1u8, 2, 3].iter().filter(|c| **c != old).collect::<Vec<_>>().choose(rng).copied().expect("two others");
                }
                _ => {
                    let i = rng.random_range(0..voxels.len());
                    let moved = voxels.remove(i);
                    let spots: Vec<[i32; 3]> = free_neighbors(&voxels).into_iter().filter(|p| *p != moved.pos()).collect();
                    let [x, y, z] = *spots.choose(rng).expect("free spot");
                    voxels.push(Voxel { x, y, z, color: moved.color });
                }
            }
            let shape = VoxelShape::new(voxels)?;
            if voxel_equivalent(&reference, &shape) || distractors.iter().any(|(_, d)| voxel_equivalent(d, &shape)) {
                continue;
            }
            distractors.push((kind, shape.rotated(&random_rotation(rng, true))));
            placed = true;
            break;
        }
        if !placed {
            return Err(QaError::Generation(format!("could not build a {kind} distractor")));
        }
    }
    let (shapes, idx) = shuffled(correct, distractors.iter().map(|(_, s)| s.clone()).collect(), rng);
    let mut assets = vec![("reference.png".to_string(), Asset::Voxels { shape: reference.clone() })];
    for (i, s) in shapes.iter().enumerate() {
        assets.push((format!("option_{}.png", i + 1), Asset::Voxels { shape: s.clone() }));
    }
    let extra = json!({
        "reference": reference,
        "options": shapes,
        "distractor_kinds": distractors.iter().map(|(k, _)| *k).collect::<Vec<_>>(),
    });
    let options = OptionSet::new(image_options(4, 1), idx)?;
    Ok(item(Task::Rotation3d, templates::ROTATION_3D.into(), "rotation_3d", options, extra, assets))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Front,
    Left,
    Top,
}

impl View {
    pub const ALL: [View; 3] = [View::Front, View::Left, View::Top];

    pub fn name(self) -> &'static str {
        match self {
            View::Front => "front",
            View::Left => "left",
            View::Top => "top",
        }
    }
}

/// Side of the cubic lattice the multi-view scenes live in.
pub const VIEW_LATTICE: i32 = 3;

/// Orthographic projection keeping the voxel nearest the viewer. Front looks
/// from +Y (image right = -X), left from +X (right = +Y), top from +Z
/// (right = +X, up = +Y); z is up in front and left views.
pub fn project_view(shape: &VoxelShape, view: View) -> ColorGrid {
    let n = VIEW_LATTICE as usize;
    let mut cells = vec![0u8; n * n];
    let mut depth = vec![i32::MIN; n * n];
    let last = VIEW_LATTICE - 1;
    for v in &shape.voxels {
        let (row, col, d) = match view {
            View::Front => (last - v.z, last - v.x, v.y),
            View::Left => (last - v.z, v.y, v.x),
            View::Top => (last - v.y, v.x, v.z),
        };
        let i = row as usize * n + col as usize;
        if d > depth[i] {
            depth[i] = d;
            cells[i] = v.color;
        }
    }
    ColorGrid { width: n, height: n, cells }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiviewQuestion {
    ViewIdentification,
    ViewMatching,
}

fn views_distinct(shape: &VoxelShape) -> bool {
    let v: Vec<ColorGrid> = View::ALL.iter().map(|&w| project_view(shape, w)).collect();
    v[0] != v[1] && v[0] != v[2] && v[1] != v[2]
}

/// Voxel scene in a 3x3x3 lattice with pairwise-distinct front, left and
/// top views.
pub fn multiview_scene<R: Rng + ?Sized>(rng: &mut R) -> Result<VoxelShape, QaError> {
    for _ in 0..MAX_TRIES {
        let count = rng.random_range(4..=8);
        let mut spots: Vec<[i32; 3]> = Vec::new();
        for x in 0..VIEW_LATTICE {
            for y in 0..VIEW_LATTICE {
                for z in 0..VIEW_LATTICE {
                    spots.push([x, y, z]);
                }
            }
        }
        let picked: Vec<[i32; 3]> = spots.choose_multiple(rng, count).copied().collect();
        let voxels: Vec<Voxel> =
            picked.into_iter().map(|[x, y, z]| Voxel { x, y, z, color: rng.random_range(1..=4) }).collect();
        let shape = VoxelShape::new(voxels)?;
        if views_distinct(&shape) {
            return Ok(shape);
        }
    }
    Err(QaError::Generation("no scene with distinct views".into()))
}

pub fn sim_multiview<R: Rng + ?Sized>(rng: &mut R, kind: Option<MultiviewQuestion>) -> Result<SimItem, QaError> {
    let scene = multiview_scene(rng)?;
    let kind = kind.unwrap_or(if rng.random_bool(0.5) {
        MultiviewQuestion::ViewIdentification
    } else {
        MultiviewQuestion::ViewMatching
    });
    let views: Vec<ColorGrid> = View::ALL.iter().map(|&v| project_view(&scene, v)).collect();
    let target_i = rng.random_range(0..3);
    let target = View::ALL[target_i];
    let scene_asset = ("scene.png".to_string(), Asset::Voxels { shape: scene.clone() });
    match kind {
        MultiviewQuestion::ViewIdentification => {
            let wrong = View::ALL.iter().filter(|v| **v != target).map(|v| format!("{} view", v.name())).collect();
            let (opts, idx) = shuffled(format!("{} view", target.name()), wrong, rng);
            let assets = vec![scene_asset, ("view.png".to_string(), Asset::Grid { grid: views[target_i].clone() })];
            let q = fill(templates::VIEW_IDENTIFICATION, &[("VIEW_RULE", templates::VIEW_RULE)]);
            let extra = json!({"subtype": kind, "scene": scene, "view": target, "raster": views[target_i]});
            Ok(item(Task::MultiviewProjection, q, "view_identification", OptionSet::new(opts, idx)?, extra, assets))
        }
        MultiviewQuestion::ViewMatching => {
            let mut wrong: Vec<ColorGrid> = views.iter().enumerate().filter(|(i, _)| *i != target_i).map(|(_, g)| g.clone()).collect();
            let mut perturbed = None;
            for _ in 0..MAX_TRIES {
                let mut g = views[target_i].clone();
                let i = rng.random_range(0..g.cells.len());
                let old = g.cells[i];
                g.cells[i] = *(0..=4u8).filter(|c| *c != old).collect::<Vec<_>>().choose(rng).expect("other colors");
                if g.cells.iter().any(|c| *c != 0) && !views.contains(&g) {
                    perturbed = Some(g);
                    break;
                }
            }
            wrong.push(perturbed.ok_or_else(|| QaError::Generation("no perturbed view".into()))?);
            let (grids, idx) = shuffled(views[target_i].clone(), wrong, rng);
            let mut assets = vec![scene_asset];
            for (i, g) in grids.iter().enumerate() {
                assets.push((format!("option_{}.png", i + 1), Asset::Grid { grid: g.clone() }));
            }
            let q = fill(templates::VIEW_MATCHING, &[("target_view", target.name()), ("VIEW_RULE", templates::VIEW_RULE)]);
            let extra = json!({"subtype": kind, "scene": scene, "view": target, "options": grids});
            Ok(item(Task::MultiviewProjection, q, "view_matching", OptionSet::new(image_options(4, 1), idx)?, extra, assets))
        }
    }
}
