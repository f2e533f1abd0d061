//! Yaw-oriented 3D boxes in camera coordinates.
//!
//! Width runs along the box's local x axis, height along y (down) and
//! length along z. Yaw rotates the box about the camera y axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pose::{RotationMatrix, Vec3};
use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSize {
    pub width: f64,
    pub height: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: [f64; 3],
    pub size: BoxSize,
    /// Radians in (-pi, pi].
    pub yaw: f64,
    #[serde(default)]
    pub label: String,
}

/// Wraps an angle into (-pi, pi].
fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

impl Box3D {
    pub fn new(
        center: [f64; 3],
        size: BoxSize,
        yaw: f64,
        label: impl Into<String>,
    ) -> Result<Self, GeometryError> {
        let b = Self { center, size, yaw: wrap_angle(yaw), label: label.into() };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let BoxSize { width, height, length } = self.size;
        if !(width > 0.0 && height > 0.0 && length > 0.0) {
            return Err(GeometryError::InvalidBox(format!(
                "sizes must be positive, got {width}x{height}x{length}"
            )));
        }
        if !(self.yaw > -PI && self.yaw <= PI) {
            return Err(GeometryError::InvalidBox(format!("yaw {} outside (-pi, pi]", self.yaw)));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidBox("non-finite center".into()));
        }
        Ok(())
    }

    pub fn center_vec(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    fn rotation(&self) -> RotationMatrix {
        RotationMatrix::from_euler_yxz(self.yaw, 0.0, 0.0)
    }

    /// Corners ordered by sign pattern: index bit 2 selects -x/+x, bit 1
    /// selects -y/+y and bit 0 selects -z/+z in the box frame.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let r = self.rotation();
        let half = Vec3::new(self.size.width, self.size.height, self.size.length) / 2.0;
        let c = self.center_vec();
        std::array::from_fn(|i| {
            let s = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
            let local = Vec3::new(s(2) * half.x, s(1) * half.y, s(0) * half.z);
            (c + r.apply(&local)).into()
        })
    }

    /// Inverse of [`Box3D::corners`] for corners in that exact order.
    pub fn from_corners(
        corners: &[[f64; 3]; 8],
        label: impl Into<String>,
    ) -> Result<Self, GeometryError> {
        let p: Vec<Vec3> = corners.iter().map(|c| Vec3::from(*c)).collect();
        let center = p.iter().sum::<Vec3>() / 8.0;
        // edges from corner 0 (-,-,-) to its neighbours along each local axis
        let ex = p[4] - p[0];
        let ey = p[2] - p[0];
        let ez = p[1] - p[0];
        Self::new(
            center.into(),
            BoxSize { width: ex.norm(), height: ey.norm(), length: ez.norm() },
            (-ex.z).atan2(ex.x),
            label,
        )
    }

    /// Fits a box to eight corners given in any order. The yaw comes from
    /// the principal axis of the corners' horizontal (x-z) spread; the
    /// result reproduces the same corner set, though width/length and yaw
    /// may differ from the generating box by a box symmetry.
    pub fn fit_corners(corners: &[[f64; 3]], label: impl Into<String>) -> Result<Self, GeometryError> {
        if corners.len() != 8 {
            return Err(GeometryError::InsufficientData { needed: 8, got: corners.len() });
        }
        let p: Vec<Vec3> = corners.iter().map(|c| Vec3::from(*c)).collect();
        let center = p.iter().sum::<Vec3>() / 8.0;
        let (mut sxx, mut szz, mut sxz) = (0.0, 0.0, 0.0);
        for q in &p {
            let d = q - center;
            sxx += d.x * d.x;
            szz += d.z * d.z;
            sxz += d.x * d.z;
        }
        // major axis angle of the 2x2 covariance in (x, z)
        let theta = 0.5 * (2.0 * sxz).atan2(sxx - szz);
        // box x axis is (cos yaw, 0, -sin yaw)
        let yaw = -theta;
        let ax = Vec3::new(yaw.cos(), 0.0, -yaw.sin());
        let az = Vec3::new(yaw.sin(), 0.0, yaw.cos());
        let extent = |axis: &Vec3| {
            let proj: Vec<f64> = p.iter().map(|q| (q - center).dot(axis)).collect();
            proj.iter().cloned().fold(f64::MIN, f64::max) - proj.iter().cloned().fold(f64::MAX, f64::min)
        };
        let height = p.iter().map(|q| q.y).fold(f64::MIN, f64::max) - p.iter().map(|q| q.y).fold(f64::MAX, f64::min);
        Self::new(
            center.into(),
            BoxSize { width: extent(&ax), height, length: extent(&az) },
            yaw,
            label,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxMetrics {
    /// Euclidean distance between centers, or from the camera origin when
    /// no second box is given.
    pub center_distance: f64,
    pub size: BoxSize,
    /// Center z of the first box.
    pub depth: f64,
}

pub fn box_metrics(a: &Box3D, b: Option<&Box3D>) -> BoxMetrics {
    let other = b.map(Box3D::center_vec).unwrap_or_else(Vec3::zeros);
    BoxMetrics {
        center_distance: (a.center_vec() - other).norm(),
        size: a.size,
        depth: a.center[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_box(yaw: f64) -> Box3D {
        Box3D::new([0.4, -0.2, 3.0], BoxSize { width: 1.2, height: 0.8, length: 0.5 }, yaw, "table")
            .unwrap()
    }

    #[test]
    fn ordered_round_trip() {
        for k in -7..=8 {
            let yaw = k as f64 * PI / 8.0;
            let b = sample_box(yaw);
            let back = Box3D::from_corners(&b.corners(), "table").unwrap();
            for i in 0..3 {
                assert!((back.center[i] - b.center[i]).abs() < 1e-9);
            }
            assert!((back.size.width - 1.2).abs() < 1e-9);
            assert!((back.size.height - 0.8).abs() < 1e-9);
            assert!((back.size.length - 0.5).abs() < 1e-9);
            assert!((wrap_angle(back.yaw - b.yaw)).abs() < 1e-9, "yaw {yaw}");
        }
    }

    #[test]
    fn unordered_fit_reproduces_corner_set() {
        let b = sample_box(0.7);
        let mut corners = b.corners().to_vec();
        corners.reverse();
        corners.swap(1, 5);
        let fit = Box3D::fit_corners(&corners, "table").unwrap();
        let fit_corners = fit.corners();
        for c in b.corners() {
            let nearest = fit_corners
                .iter()
                .map(|f| (0..3).map(|i| (f[i] - c[i]).abs()).fold(0.0, f64::max))
                .fold(f64::MAX, f64::min);
            assert!(nearest < 1e-6);
        }
    }

    #[test]
    fn metrics() {
        let a = Box3D::new([0.0, 0.0, 1.0], BoxSize { width: 1.0, height: 1.0, length: 1.0 }, 0.0, "a")
            .unwrap();
        let b = Box3D { center: [0.0, 0.0, 3.0], ..a.clone() };
        assert_eq!(box_metrics(&a, Some(&a)).center_distance, 0.0);
        assert_eq!(box_metrics(&a, Some(&b)).center_distance, 2.0);
        let c = Box3D { center: [0.0, 0.0, 2.5], ..a.clone() };
        assert_eq!(box_metrics(&c, None).depth, 2.5);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Box3D::new([0.0; 3], BoxSize { width: 0.0, height: 1.0, length: 1.0 }, 0.0, "x").is_err());
        assert_eq!(Box3D::new([0.0; 3], BoxSize { width: 1.0, height: 1.0, length: 1.0 }, -PI, "x").unwrap().yaw, PI);
    }
}
