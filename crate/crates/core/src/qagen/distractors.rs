//! Distractor synthesis for metric, camera, motion and matrix answers.

use std::collections::BTreeSet;

use nalgebra::Matrix3;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fmt_num, QaError};
use crate::geometry::{
    cube_rotations, sentence_from_fragments, Dof, DofState, Homography, Intrinsics, MotionReport,
    RigidTransform, RotationMatrix, Vec3, STATIONARY_SENTENCE,
};

/// Decimal places kept when metric options are displayed.
pub const METRIC_DECIMALS: usize = 2;

pub const NEAR_BANDS: [(f64, f64); 2] = [(0.85, 0.95), (1.05, 1.15)];
pub const BROAD_BANDS: [(f64, f64); 2] = [(0.50, 0.90), (1.10, 1.80)];
/// Step of the fixed offsets used once the bands are exhausted.
pub const FALLBACK_STEP: f64 = 0.5;

const BAND_ATTEMPTS: usize = 64;

fn round_to(v: f64, decimals: usize) -> f64 {
    let f = 10f64.powi(decimals as i32);
    (v * f).round() / f
}

fn sample_bands<R: Rng + ?Sized>(gt: f64, bands: &[(f64, f64); 2], rng: &mut R) -> f64 {
    let w0 = bands[0].1 - bands[0].0;
    let w1 = bands[1].1 - bands[1].0;
    let u = rng.random_range(0.0..w0 + w1);
    let ratio = if u < w0 { bands[0].0 + u } else { bands[1].0 + (u - w0) };
    gt * ratio
}

fn in_bands(v: f64, gt: f64, bands: &[(f64, f64); 2]) -> bool {
    bands.iter().any(|&(lo, hi)| v >= gt * lo - 1e-9 && v <= gt * hi + 1e-9)
}

/// Whether `v` is a fallback value `gt ± k·0.5`.
pub fn is_fallback_offset(v: f64, gt: f64) -> bool {
    let k = (v - round_to(gt, METRIC_DECIMALS)) / FALLBACK_STEP;
    k.abs() >= 1.0 - 1e-9 && (k - k.round()).abs() < 1e-6
}

/// Metric distractors: one close value, then broader values, then fixed
/// offsets. Every value is positive and distinct from `gt` and from the
/// others at display precision.
pub fn metric_distractors<R: Rng + ?Sized>(gt: f64, n: usize, rng: &mut R) -> Result<Vec<f64>, QaError> {
    if !(gt > 0.0 && gt.is_finite()) {
        return Err(QaError::Domain(format!("metric ground truth must be positive, got {gt}")));
    }
    let shown = |v: f64| fmt_num(v, METRIC_DECIMALS);
    let mut seen: BTreeSet<String> = BTreeSet::from([shown(gt)]);
    let mut out = Vec::with_capacity(n);
    let mut accept = |v: f64, out: &mut Vec<f64>| {
        if v > 0.0 && seen.insert(shown(v)) {
            out.push(v);
            true
        } else {
            false
        }
    };
    for slot in 0..n {
        let bands = if slot == 0 { &NEAR_BANDS } else { &BROAD_BANDS };
        for _ in 0..BAND_ATTEMPTS {
            let v = round_to(sample_bands(gt, bands, rng), METRIC_DECIMALS);
            if in_bands(v, gt, bands) && accept(v, &mut out) {
                break;
            }
        }
    }
    let base = round_to(gt, METRIC_DECIMALS);
    let mut k = 1;
    while out.len() < n {
        for sign in [1.0, -1.0] {
            if out.len() < n {
                accept(round_to(base + sign * k as f64 * FALLBACK_STEP, METRIC_DECIMALS), &mut out);
            }
        }
        k += 1;
    }
    Ok(out)
}

pub const FOCAL_RATIO: f64 = 0.25;
pub const PRINCIPAL_RATIO: f64 = 0.20;
pub const SKEW_RATIO: f64 = 0.10;
/// Smallest relative change applied to the focal lengths.
pub const MIN_FOCAL_CHANGE: f64 = 0.01;

fn perturb<R: Rng + ?Sized>(v: f64, ratio: f64, min: f64, rng: &mut R) -> f64 {
    let mag = rng.random_range(min..=ratio);
    if rng.random_bool(0.5) {
        v * (1.0 + mag)
    } else {
        v * (1.0 - mag)
    }
}

/// One perturbed copy of `k`: focal lengths within ±25% (at least 1%),
/// principal point within ±20%, skew within ±10%.
pub fn intrinsics_distractor<R: Rng + ?Sized>(k: &Intrinsics, rng: &mut R) -> Intrinsics {
    Intrinsics {
        fx: perturb(k.fx, FOCAL_RATIO, MIN_FOCAL_CHANGE, rng),
        fy: perturb(k.fy, FOCAL_RATIO, MIN_FOCAL_CHANGE, rng),
        cx: perturb(k.cx, PRINCIPAL_RATIO, 0.0, rng),
        cy: perturb(k.cy, PRINCIPAL_RATIO, 0.0, rng),
        skew: perturb(k.skew, SKEW_RATIO, 0.0, rng),
    }
}

pub fn intrinsics_distractors<R: Rng + ?Sized>(k: &Intrinsics, n: usize, rng: &mut R) -> Vec<Intrinsics> {
    (0..n).map(|_| intrinsics_distractor(k, rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrinsicsStrategy {
    AxisSwap,
    TranslationNoise,
    RotationNoise,
}

impl ExtrinsicsStrategy {
    pub const ALL: [ExtrinsicsStrategy; 3] =
        [ExtrinsicsStrategy::AxisSwap, ExtrinsicsStrategy::TranslationNoise, ExtrinsicsStrategy::RotationNoise];
}

/// Translation offsets per axis are at least this many meters.
pub const MIN_TRANSLATION_NOISE: f64 = 0.05;
pub const MAX_TRANSLATION_NOISE: f64 = 0.30;
pub const ROTATION_NOISE_DEG: (f64, f64) = (5.0, 15.0);

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn extrinsics_distractor<R: Rng + ?Sized>(
    t: &RigidTransform,
    strategy: ExtrinsicsStrategy,
    rng: &mut R,
) -> RigidTransform {
    match strategy {
        ExtrinsicsStrategy::AxisSwap => {
            let perms: Vec<_> = cube_rotations().into_iter().skip(1).collect();
            let p = perms.choose(rng).expect("23 non-identity rotations");
            let pm = nalgebra::Matrix3::from_fn(|r, c| p[r][c] as f64);
            let rot = RotationMatrix::orthonormalize(&(t.rotation.matrix() * pm)).expect("signed permutation keeps R proper");
            RigidTransform::new(rot, t.t())
        }
        ExtrinsicsStrategy::TranslationNoise => {
            let noise = Vec3::from_fn(|_, _| {
                let m = rng.random_range(MIN_TRANSLATION_NOISE..=MAX_TRANSLATION_NOISE);
                if rng.random_bool(0.5) {
                    m
                } else {
                    -m
                }
            });
            RigidTransform::new(t.rotation, t.t() + noise)
        }
        ExtrinsicsStrategy::RotationNoise => {
            let axis = random_unit(rng);
            let angle = rng.random_range(ROTATION_NOISE_DEG.0..=ROTATION_NOISE_DEG.1).to_radians();
            let delta = RotationMatrix::from_axis_angle(axis, angle);
            let rot = RotationMatrix::orthonormalize(&(t.rotation.matrix() * delta.matrix()))
                .expect("product of rotations is a rotation");
            RigidTransform::new(rot, t.t())
        }
    }
}

/// `n` distractors, each from a uniformly chosen strategy.
pub fn extrinsics_distractors<R: Rng + ?Sized>(
    t: &RigidTransform,
    n: usize,
    rng: &mut R,
) -> Vec<(ExtrinsicsStrategy, RigidTransform)> {
    (0..n)
        .map(|_| {
            let s = *ExtrinsicsStrategy::ALL.choose(rng).expect("nonempty");
            (s, extrinsics_distractor(t, s, rng))
        })
        .collect()
}

pub const FLIP_PROBABILITY: f64 = 0.70;
pub const FABRICATE_PROBABILITY: f64 = 0.30;

/// Fallback motions used when corruption yields too few distinct sentences.
pub const GENERIC_MOTIONS: [&str; 12] = [
    "The camera moved forward.",
    "The camera moved backward.",
    "The camera moved left.",
    "The camera moved right.",
    "The camera moved up.",
    "The camera moved down.",
    "The camera yawed left.",
    "The camera yawed right.",
    "The camera pitched up.",
    "The camera pitched down.",
    "The camera rolled left.",
    "The camera rolled right.",
];

/// One corrupted description and what was done to each DOF.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionCorruption {
    pub sentence: String,
    pub flipped: Vec<Dof>,
    pub omitted: Vec<Dof>,
    pub fabricated: Vec<Dof>,
}

/// Changed DOFs are flipped (70%) or omitted (30%); ignored DOFs are
/// fabricated as salient motion with a random direction (30%).
pub fn corrupt_motion<R: Rng + ?Sized>(report: &MotionReport, rng: &mut R) -> MotionCorruption {
    let mut fragments = Vec::new();
    let mut c = MotionCorruption { sentence: String::new(), flipped: vec![], omitted: vec![], fabricated: vec![] };
    for dof in Dof::ALL {
        let m = report.get(dof);
        match m.state {
            DofState::Changed => {
                if rng.random_bool(FLIP_PROBABILITY) {
                    fragments.push(dof.fragment(!m.positive));
                    c.flipped.push(dof);
                } else {
                    c.omitted.push(dof);
                }
            }
            DofState::Ignored => {
                if rng.random_bool(FABRICATE_PROBABILITY) {
                    fragments.push(dof.fragment(rng.random_bool(0.5)));
                    c.fabricated.push(dof);
                }
            }
            DofState::Stationary => {}
        }
    }
    c.sentence = sentence_from_fragments(&fragments);
    c
}

/// Up to `n` distinct sentences that differ from `correct`, backfilled from
/// [`GENERIC_MOTIONS`].
pub fn motion_distractors<R: Rng + ?Sized>(
    report: &MotionReport,
    correct: &str,
    n: usize,
    rng: &mut R,
) -> Vec<String> {
    let mut seen: BTreeSet<String> = BTreeSet::from([correct.to_string()]);
    let mut out = Vec::new();
    let has_motion = report.dofs.iter().any(|m| m.state != DofState::Stationary);
    if has_motion {
        for _ in 0..4 * n {
            if out.len() == n {
                break;
            }
            let s = corrupt_motion(report, rng).sentence;
            if seen.insert(s.clone()) {
                out.push(s);
            }
        }
    }
    let mut pool: Vec<&str> = GENERIC_MOTIONS.to_vec();
    while out.len() < n && !pool.is_empty() {
        let i = rng.random_range(0..pool.len());
        let s = pool.swap_remove(i).to_string();
        if s != STATIONARY_SENTENCE && seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

pub const HOMOGRAPHY_NOISE: (f64, f64) = (0.05, 0.20);

/// Relative noise on every free element of the normalized matrix, then
/// renormalized.
pub fn homography_distractor<R: Rng + ?Sized>(
    h: &Homography,
    noise: (f64, f64),
    rng: &mut R,
) -> Result<Homography, QaError> {
    for _ in 0..32 {
        let mut m: Matrix3<f64> = *h.matrix();
        for r in 0..3 {
            for c in 0..3 {
                if (r, c) == (2, 2) {
                    continue;
                }
                let mag = rng.random_range(noise.0..=noise.1);
                m[(r, c)] *= if rng.random_bool(0.5) { 1.0 + mag } else { 1.0 - mag };
            }
        }
        if let Ok(d) = Homography::new(m) {
            return Ok(d);
        }
    }
    Err(QaError::Generation("could not perturb homography into an invertible matrix".into()))
}
