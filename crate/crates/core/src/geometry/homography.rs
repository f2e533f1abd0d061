//! Planar homographies: normalized DLT and a seeded RANSAC estimator.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GeometryError;

const NORMALIZE_EPS: f64 = 1e-9;
const COLLINEAR_EPS: f64 = 1e-6;

/// 3x3 projective map, stored in canonical scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography(Matrix3<f64>);

impl Homography {
    /// Normalizes `m` (divide by `h33`, or by the Frobenius norm when `h33`
    /// vanishes) and checks invertibility.
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let m = normalize_homography(&m)?;
        let det = m.determinant();
        if !det.is_finite() || det.abs() <= NORMALIZE_EPS {
            return Err(GeometryError::Degenerate(format!("homography is singular (det={det:e})")));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let v = self.0 * Vector3::new(p[0], p[1], 1.0);
        [v.x / v.z, v.y / v.z]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).abs().max()
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
    }
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = GeometryError;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        h.to_rows()
    }
}

pub fn normalize_homography(m: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::Degenerate("non-finite homography".into()));
    }
    let h33 = m[(2, 2)];
    if h33.abs() > NORMALIZE_EPS {
        return Ok(m / h33);
    }
    let norm = m.norm();
    if norm <= NORMALIZE_EPS {
        return Err(GeometryError::Degenerate("zero homography".into()));
    }
    Ok(m / norm)
}

/// A correspondence between pixel coordinates in two images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMatch {
    pub src: [f64; 2],
    pub dst: [f64; 2],
}

impl PointMatch {
    pub fn new(src: [f64; 2], dst: [f64; 2]) -> Self {
        Self { src, dst }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    /// Maximum reprojection error (pixels) for a match to count as an inlier.
    pub reproj_threshold: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self { reproj_threshold: 5.0, iterations: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RansacResult {
    pub homography: Homography,
    pub inlier_count: usize,
    pub inliers: Vec<usize>,
}

/// Hartley normalization: centroid to origin, mean distance sqrt(2).
fn similarity_normalizer(points: &[[f64; 2]]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    let (mx, my) = (mx / n, my / n);
    let mean_dist = points
        .iter()
        .map(|p| ((p[0] - mx).powi(2) + (p[1] - my).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !mean_dist.is_finite() || mean_dist < 1e-12 {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    let v = t * Vector3::new(p[0], p[1], 1.0);
    [v.x / v.z, v.y / v.z]
}

/// Normalized direct linear transform over all given matches (n >= 4).
pub fn dlt_homography(matches: &[PointMatch]) -> Result<Homography, GeometryError> {
    if matches.len() < 4 {
        return Err(GeometryError::InsufficientData { needed: 4, got: matches.len() });
    }
    let src: Vec<[f64; 2]> = matches.iter().map(|m| m.src).collect();
    let dst: Vec<[f64; 2]> = matches.iter().map(|m| m.dst).collect();
    let degenerate = || GeometryError::Degenerate("coincident points".into());
    let t_src = similarity_normalizer(&src).ok_or_else(degenerate)?;
    let t_dst = similarity_normalizer(&dst).ok_or_else(degenerate)?;

    let n = matches.len();
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let [x, y] = transform(&t_src, *s);
        let [u, v] = transform(&t_dst, *d);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| GeometryError::Degenerate("svd failed".into()))?;
    // nalgebra does not sort singular values; pick the smallest explicitly
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| GeometryError::Degenerate("empty svd".into()))?;
    let h = v_t.row(min_idx);
    let hn = Matrix3::from_fn(|r, c| h[3 * r + c]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| GeometryError::Degenerate("normalizer not invertible".into()))?;
    Homography::new(t_dst_inv * hn * t_src)
}

fn collinear(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let scale = ((b[0] - a[0]).hypot(b[1] - a[1])) * ((c[0] - a[0]).hypot(c[1] - a[1]));
    area.abs() <= COLLINEAR_EPS * scale.max(1e-12)
}

/// True when any three of the four sample points are collinear in either image.
fn degenerate_sample(matches: &[PointMatch], idx: &[usize]) -> bool {
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES.iter().any(|t| {
        let s = |k: usize| matches[idx[t[k]]].src;
        let d = |k: usize| matches[idx[t[k]]].dst;
        collinear(s(0), s(1), s(2)) || collinear(d(0), d(1), d(2))
    })
}

pub fn reprojection_error(h: &Homography, m: &PointMatch) -> f64 {
    let p = h.apply(m.src);
    let e = (p[0] - m.dst[0]).hypot(p[1] - m.dst[1]);
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

fn inliers_of(h: &Homography, matches: &[PointMatch], threshold: f64) -> Vec<usize> {
    matches
        .iter()
        .enumerate()
        .filter(|(_, m)| reprojection_error(h, m) <= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Robust homography fit.
///
/// Runs a fixed number of iterations over random 4-match minimal samples
/// (collinear samples are redrawn), keeps the model with the most inliers,
/// then refits on that inlier set with the full DLT. Deterministic for a
/// given `cfg.seed`.
pub fn ransac_homography(
    matches: &[PointMatch],
    cfg: &RansacConfig,
) -> Result<RansacResult, GeometryError> {
    if matches.len() < 4 {
        return Err(GeometryError::InsufficientData { needed: 4, got: matches.len() });
    }
    if matches.iter().any(|m| !(m.src.iter().chain(&m.dst).all(|v| v.is_finite()))) {
        return Err(GeometryError::Degenerate("non-finite match coordinates".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max_redraws = 100;
    let mut best: Option<(Homography, Vec<usize>)> = None;

    for _ in 0..cfg.iterations.max(1) {
        let mut picked = None;
        for _ in 0..max_redraws {
            let idx = sample(&mut rng, matches.len(), 4).into_vec();
            if !degenerate_sample(matches, &idx) {
                picked = Some(idx);
                break;
            }
        }
        let Some(idx) = picked else { continue };
        let minimal: Vec<PointMatch> = idx.iter().map(|&i| matches[i]).collect();
        let Ok(h) = dlt_homography(&minimal) else { continue };
        let inliers = inliers_of(&h, matches, cfg.reproj_threshold);
        if best.as_ref().is_none_or(|(_, b)| inliers.len() > b.len()) {
            let done = inliers.len() == matches.len();
            best = Some((h, inliers));
            if done {
                break;
            }
        }
    }

    let (mut homography, mut inliers) = best.ok_or_else(|| {
        GeometryError::Degenerate("every minimal sample was collinear".into())
    })?;
    if inliers.len() >= 4 {
        let subset: Vec<PointMatch> = inliers.iter().map(|&i| matches[i]).collect();
        if let Ok(refit) = dlt_homography(&subset) {
            let refit_inliers = inliers_of(&refit, matches, cfg.reproj_threshold);
            if refit_inliers.len() >= inliers.len() {
                homography = refit;
                inliers = refit_inliers;
            }
        }
    }
    Ok(RansacResult { homography, inlier_count: inliers.len(), inliers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identity_matches_give_identity() {
        let pts = [[0.0, 0.0], [100.0, 0.0], [0.0, 80.0], [120.0, 90.0], [50.0, 40.0], [10.0, 70.0]];
        let matches: Vec<_> = pts.iter().map(|&p| PointMatch::new(p, p)).collect();
        let res = ransac_homography(&matches, &RansacConfig::default()).unwrap();
        assert_eq!(res.inlier_count, matches.len());
        assert!(res.homography.max_abs_diff(&Homography::identity()) < 1e-9);
    }

    #[test]
    fn three_matches_is_insufficient() {
        let matches = vec![PointMatch::new([0.0, 0.0], [0.0, 0.0]); 3];
        assert!(matches!(
            ransac_homography(&matches, &RansacConfig::default()),
            Err(GeometryError::InsufficientData { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn all_collinear_is_degenerate() {
        let matches: Vec<_> =
            (0..10).map(|i| PointMatch::new([i as f64, 2.0 * i as f64], [i as f64, 0.0])).collect();
        let cfg = RansacConfig { iterations: 20, ..Default::default() };
        assert!(matches!(ransac_homography(&matches, &cfg), Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn recovers_translation_with_outliers() {
        let h = Homography::new(Matrix3::new(1.0, 0.0, 15.0, 0.0, 1.0, -7.0, 0.0, 0.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let matches: Vec<_> = (0..40)
            .map(|i| {
                let p = [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)];
                let q = if i % 4 == 0 {
                    [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)]
                } else {
                    h.apply(p)
                };
                PointMatch::new(p, q)
            })
            .collect();
        let res = ransac_homography(&matches, &RansacConfig::default()).unwrap();
        assert!(res.homography.max_abs_diff(&h) < 1e-6);
        assert!(res.inlier_count >= 30);
    }

    #[test]
    fn normalization_rules() {
        let m = Matrix3::new(2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0);
        assert_eq!(*Homography::new(m).unwrap().matrix(), Matrix3::identity());
        // vanishing h33 falls back to the Frobenius norm
        let m = Matrix3::new(0.0, 3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(Homography::new(m).is_err());
        let m = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
        let h = Homography::new(m).unwrap();
        assert!((h.matrix().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let matches: Vec<_> = (0..30)
            .map(|_| {
                PointMatch::new(
                    [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)],
                    [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)],
                )
            })
            .collect();
        let cfg = RansacConfig { iterations: 200, seed: 42, ..Default::default() };
        let a = ransac_homography(&matches, &cfg).unwrap();
        let b = ransac_homography(&matches, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
