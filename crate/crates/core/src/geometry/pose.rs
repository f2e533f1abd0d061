//! Rotations, rigid transforms, and pinhole camera poses.
//!
//! All frames follow the OpenCV camera convention: x right, y down,
//! z forward. A [`RigidTransform`] maps a point `p` to `R p + t`.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthonormality and determinant tolerance for rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// A proper 3D rotation (orthonormal, det = +1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn new(m: Mat3) -> Result<Self, GeometryError> {
        let deviation = (m.transpose() * m - Mat3::identity()).abs().max();
        if !m.iter().all(|v| v.is_finite()) || deviation > ROTATION_TOLERANCE {
            return Err(GeometryError::NotOrthonormal { deviation });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(GeometryError::NotProper { det });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Rotation of `angle` radians about `axis` (right-hand rule).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    /// Builds `Ry(yaw) * Rx(pitch) * Rz(roll)` (intrinsic y-x-z order).
    pub fn from_euler_yxz(yaw: f64, pitch: f64, roll: f64) -> Self {
        let ry = Self::from_axis_angle(Vec3::y(), yaw).0;
        let rx = Self::from_axis_angle(Vec3::x(), pitch).0;
        let rz = Self::from_axis_angle(Vec3::z(), roll).0;
        Self(ry * rx * rz)
    }

    /// Inverse of [`Self::from_euler_yxz`]; returns `(yaw, pitch, roll)` in radians.
    pub fn to_euler_yxz(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let pitch = (-m[(1, 2)]).clamp(-1.0, 1.0).asin();
        if m[(1, 2)].abs() < 1.0 - 1e-12 {
            let yaw = m[(0, 2)].atan2(m[(2, 2)]);
            let roll = m[(1, 0)].atan2(m[(1, 1)]);
            (yaw, pitch, roll)
        } else {
            // gimbal lock: fold everything into yaw
            let yaw = (-m[(2, 0)]).atan2(m[(0, 0)]);
            (yaw, pitch, 0.0)
        }
    }

    /// Projects an arbitrary matrix onto the nearest rotation (polar decomposition).
    pub fn orthonormalize(m: &Mat3) -> Result<Self, GeometryError> {
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(GeometryError::Degenerate("svd failed".into())),
        };
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Self::new(r)
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.0 * p
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

impl TryFrom<[[f64; 3]; 3]> for RotationMatrix {
    type Error = GeometryError;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Self::new(Mat3::from_fn(|r, c| rows[r][c]))
    }
}

impl From<RotationMatrix> for [[f64; 3]; 3] {
    fn from(r: RotationMatrix) -> Self {
        r.to_rows()
    }
}

/// Rigid motion `p -> R p + t` (translation in meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: [f64; 3],
}

impl RigidTransform {
    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Self {
        Self {
            rotation,
            translation: [translation.x, translation.y, translation.z],
        }
    }

    pub fn identity() -> Self {
        Self::new(RotationMatrix::identity(), Vec3::zeros())
    }

    pub fn t(&self) -> Vec3 {
        Vec3::from(self.translation)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.t()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let t = -(rt.matrix() * self.t());
        Self::new(rt, t)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let rotation = self.rotation.compose(&other.rotation);
        let t = self.rotation.apply(&other.t()) + self.t();
        Self::new(rotation, t)
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.t());
        m
    }

    pub fn from_matrix4(m: &Matrix4<f64>) -> Result<Self, GeometryError> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(GeometryError::Degenerate(format!(
                "bottom row of rigid transform must be [0, 0, 0, 1], got {bottom:?}"
            )));
        }
        let r = RotationMatrix::new(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        Ok(Self::new(r, m.fixed_view::<3, 1>(0, 3).into_owned()))
    }

    /// Re-checks the rotation invariant (useful after deserializing raw data).
    pub fn validate(&self) -> Result<(), GeometryError> {
        RotationMatrix::new(*self.rotation.matrix()).map(|_| ())
    }

    /// Largest absolute elementwise difference of the 3x4 parts.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let dr = (self.rotation.matrix() - other.rotation.matrix()).abs().max();
        let dt = (self.t() - other.t()).abs().max();
        dr.max(dt)
    }
}

/// Transform taking camera-`a` coordinates to camera-`b` coordinates, given
/// both world-to-camera extrinsics.
pub fn relative_transform(
    a: &RigidTransform,
    b: &RigidTransform,
) -> Result<RigidTransform, GeometryError> {
    a.validate()?;
    b.validate()?;
    Ok(b.compose(&a.inverse()))
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
}

impl Intrinsics {
    pub fn validate(&self, image_size: Option<(u32, u32)>) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if let Some((w, h)) = image_size {
            if !(0.0..=w as f64).contains(&self.cx) || !(0.0..=h as f64).contains(&self.cy) {
                return Err(GeometryError::InvalidIntrinsics(format!(
                    "principal point ({}, {}) outside {w}x{h} image",
                    self.cx, self.cy
                )));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(
            self.fx, self.skew, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    pub fn project(&self, p: &Vec3) -> Option<[f64; 2]> {
        (p.z > 0.0).then(|| {
            let u = self.fx * p.x / p.z + self.skew * p.y / p.z + self.cx;
            let v = self.fy * p.y / p.z + self.cy;
            [u, v]
        })
    }
}

/// Intrinsics plus world-to-camera extrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub intrinsic: Intrinsics,
    pub extrinsic: RigidTransform,
}
