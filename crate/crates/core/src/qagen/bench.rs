//! Batch generation: the simulator mini-benchmark and scene corpora, with a
//! ledger of counts and seeds.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{generate_from_scene, GenOptions, SceneMeta};
use super::sim::{sim_multiview, sim_rotation2d, sim_rotation3d, sim_spatial_map, MultiviewQuestion, SimItem};
use super::{QaError, Task};
use crate::corpus::{Format, GeneratorInfo, Manifest, ManifestHeader, Sample};
use crate::prompts::hex_sha256;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Per-item seed derived from the run seed and the item's position.
pub fn item_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub name: String,
    pub seed: u64,
    pub count: usize,
    /// Simulator tasks, assigned round-robin.
    pub tasks: Vec<Task>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { name: "sim-mini".into(), seed: 0, count: 200, tasks: Task::SIM_TASKS.to_vec() }
    }
}

impl BenchConfig {
    pub fn config_hash(&self) -> String {
        hex_sha256(&serde_json::to_string(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationLedger {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub total: usize,
    pub per_task: BTreeMap<String, usize>,
    pub per_format: BTreeMap<String, usize>,
    /// Item id to the seed that regenerates it.
    pub item_seeds: BTreeMap<String, u64>,
    /// `(item key, reason)` for combinations that could not be generated.
    #[serde(default)]
    pub skipped: Vec<(String, String)>,
}

impl GenerationLedger {
    fn new(seed: u64, config_hash: String) -> Self {
        Self { tool_version: TOOL_VERSION.into(), seed, config_hash, ..Default::default() }
    }

    fn record(&mut self, sample: &Sample, seed: u64) {
        self.total += 1;
        *self.per_task.entry(sample.task.clone()).or_default() += 1;
        *self.per_format.entry(sample.format.as_str().to_string()).or_default() += 1;
        self.item_seeds.insert(sample.id.clone(), seed);
    }
}

#[derive(Debug, Clone)]
pub struct MiniBenchmark {
    pub manifest: Manifest,
    pub ledger: GenerationLedger,
    pub items: Vec<SimItem>,
}

/// One simulator item; multi-view items use the four-option matching form.
pub fn sim_item(task: Task, seed: u64) -> Result<SimItem, QaError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut it = match task {
        Task::SpatialMap => {
            let n = rng.random_range(6..=8);
            sim_spatial_map(&mut rng, n, None)?
        }
        Task::Rotation2d => sim_rotation2d(&mut rng)?,
        Task::Rotation3d => sim_rotation3d(&mut rng)?,
        Task::MultiviewProjection => sim_multiview(&mut rng, Some(MultiviewQuestion::ViewMatching))?,
        other => return Err(QaError::Domain(format!("{other} is not a simulator task"))),
    };
    it.qa.seed = seed;
    Ok(it)
}

fn header(name: &str, total: usize, seed: u64, config_hash: &str) -> ManifestHeader {
    ManifestHeader {
        name: name.into(),
        version: TOOL_VERSION.into(),
        total,
        generator: Some(GeneratorInfo { tool_version: TOOL_VERSION.into(), seed, config_hash: config_hash.into() }),
    }
}

/// Multi-choice benchmark from the simulators. Output depends only on the
/// config.
pub fn generate_mini_benchmark(cfg: &BenchConfig) -> Result<MiniBenchmark, QaError> {
    if cfg.tasks.is_empty() || cfg.tasks.iter().any(|t| !Task::SIM_TASKS.contains(t)) {
        return Err(QaError::Domain("mini-benchmark tasks must be nonempty simulator tasks".into()));
    }
    let items: Vec<SimItem> = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let task = cfg.tasks[i % cfg.tasks.len()];
            let it = sim_item(task, item_seed(cfg.seed, i as u64))?;
            Ok(it.with_prefix(&format!("media/{}", sim_id(i))))
        })
        .collect::<Result<_, QaError>>()?;
    let hash = cfg.config_hash();
    let mut ledger = GenerationLedger::new(cfg.seed, hash.clone());
    let samples: Vec<Sample> = items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let s = it.qa.to_sample(sim_id(i));
            ledger.record(&s, it.qa.seed);
            s
        })
        .collect();
    let manifest = Manifest { header: Some(header(&cfg.name, samples.len(), cfg.seed, &hash)), samples };
    Ok(MiniBenchmark { manifest, ledger, items })
}

pub fn sim_id(index: usize) -> String {
    format!("sim-{index:05}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> QaError {
    QaError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Writes `manifest.jsonl`, `ledger.json`, and for every image a PNG plus a
/// JSON sidecar holding the underlying structure.
pub fn write_benchmark(bench: &MiniBenchmark, dir: &Path, render: bool) -> Result<(), QaError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    bench.manifest.write(&dir.join("manifest.jsonl")).map_err(|e| io_err(dir, e))?;
    write_ledger(&bench.ledger, &dir.join("ledger.json"))?;
    bench.items.par_iter().try_for_each(|it| {
        for (name, asset) in &it.assets {
            let png = dir.join(name);
            let sidecar = png.with_extension("json");
            if let Some(parent) = png.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            let json = serde_json::to_string(asset).expect("asset serializes");
            std::fs::write(&sidecar, json).map_err(|e| io_err(&sidecar, e))?;
            if render {
                super::render::save_png(&asset.render(), &png)?;
            }
        }
        Ok(())
    })
}

pub fn write_ledger(ledger: &GenerationLedger, path: &Path) -> Result<(), QaError> {
    let text = serde_json::to_string_pretty(ledger).expect("ledger serializes");
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Every (scene, task, format) combination; unsupported ones are recorded
/// in the ledger rather than failing the run.
pub fn generate_scene_corpus(
    scenes: &[SceneMeta],
    tasks: &[Task],
    formats: &[Format],
    seed: u64,
    opts: &GenOptions,
    name: &str,
) -> (Manifest, GenerationLedger) {
    let config = serde_json::json!({
        "seed": seed,
        "tasks": tasks,
        "formats": formats,
        "scenes": scenes.iter().map(|s| &s.scene_id).collect::<Vec<_>>(),
        "unit": opts.unit.symbol(),
        "distractors": opts.distractors,
    });
    let hash = hex_sha256(&config.to_string());
    let mut ledger = GenerationLedger::new(seed, hash.clone());
    let mut samples = Vec::new();
    let mut index = 0u64;
    for scene in scenes {
        for &task in tasks {
            for &format in formats {
                let key = format!("{}-{}-{}", scene.scene_id, task, format.as_str());
                let s = item_seed(seed, index);
                index += 1;
                match generate_from_scene(scene, task, format, s, opts) {
                    Ok(qa) => {
                        let sample = qa.to_sample(key);
                        ledger.record(&sample, s);
                        samples.push(sample);
                    }
                    Err(e) => ledger.skipped.push((key, e.to_string())),
                }
            }
        }
    }
    let manifest = Manifest { header: Some(header(name, samples.len(), seed, &hash)), samples };
    (manifest, ledger)
}
