//! Camera poses, motion classification, homographies, boxes, symmetry groups
//! and unit conversion.

use thiserror::Error;

mod boxes;
mod homography;
mod motion;
mod pose;
mod symmetry;
mod units;

pub use boxes::{box_metrics, Box3D, BoxMetrics, BoxSize};
pub use homography::{
    dlt_homography, normalize_homography, ransac_homography, reprojection_error, Homography,
    PointMatch, RansacConfig, RansacResult,
};
pub use motion::{
    camera_motion_components, classify_motion, describe_motion, sentence_from_fragments, Dof,
    DofMotion, DofState, MotionReport, MotionThresholds, STATIONARY_SENTENCE,
};
pub use pose::{
    relative_transform, CameraPose, Intrinsics, Mat3, RigidTransform, RotationMatrix, Vec3,
    ROTATION_TOLERANCE,
};
pub use symmetry::{
    cube_rotations, det3, grid_flip, grid_is_asymmetric, grid_rotate, mat_mul, rotate_point,
    voxel_equivalent, ColorGrid, CubeRotation, FlipAxis, Voxel, VoxelShape,
};
pub use units::{convert_length_to_cm, convert_to_cm, LengthUnit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("rotation determinant is {det}, expected +1")]
    NotProper { det: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("unknown length unit {0:?}")]
    UnknownUnit(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
}
