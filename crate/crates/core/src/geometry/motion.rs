//! Camera-motion classification between two views.
//!
//! The input is the relative transform mapping camera-`a` coordinates to
//! camera-`b` coordinates (as returned by [`super::relative_transform`]).
//! The camera's own motion is its inverse: the pose of camera `b` expressed
//! in camera `a`'s frame. Rotations are decomposed in intrinsic y-x-z order
//! (yaw about y, pitch about x, roll about z) and labeled with OpenCV axis
//! semantics: +x right, +y down, +z forward.

use serde::{Deserialize, Serialize};

use super::pose::RigidTransform;
use super::GeometryError;

/// Sentence used when no degree of freedom changed.
pub const STATIONARY_SENTENCE: &str = "The camera remained stationary.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dof {
    Roll,
    Pitch,
    Yaw,
    X,
    Y,
    Z,
}

impl Dof {
    /// Fixed reporting order.
    pub const ALL: [Dof; 6] = [Dof::Roll, Dof::Pitch, Dof::Yaw, Dof::X, Dof::Y, Dof::Z];

    pub fn is_rotation(self) -> bool {
        matches!(self, Dof::Roll | Dof::Pitch | Dof::Yaw)
    }

    /// Verb and direction label for a motion along this DOF with the given sign.
    pub fn fragment(self, positive: bool) -> &'static str {
        match (self, positive) {
            (Dof::Roll, true) => "rolled right",
            (Dof::Roll, false) => "rolled left",
            (Dof::Pitch, true) => "pitched up",
            (Dof::Pitch, false) => "pitched down",
            (Dof::Yaw, true) => "yawed right",
            (Dof::Yaw, false) => "yawed left",
            (Dof::X, true) => "moved right",
            (Dof::X, false) => "moved left",
            (Dof::Y, true) => "moved down",
            (Dof::Y, false) => "moved up",
            (Dof::Z, true) => "moved forward",
            (Dof::Z, false) => "moved backward",
        }
    }

    pub fn direction_label(self, positive: bool) -> &'static str {
        self.fragment(positive).split(' ').nth(1).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofState {
    Changed,
    Ignored,
    Stationary,
}

/// State, signed direction, and magnitude of one degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofMotion {
    pub dof: Dof,
    pub state: DofState,
    /// True for the positive axis direction (right, down, forward; roll right,
    /// pitch up, yaw right).
    pub positive: bool,
    /// Degrees for rotations, meters for translations.
    pub magnitude: f64,
}

impl DofMotion {
    pub fn direction(&self) -> &'static str {
        self.dof.direction_label(self.positive)
    }

    pub fn fragment(&self) -> &'static str {
        self.dof.fragment(self.positive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionReport {
    /// One entry per DOF, in [`Dof::ALL`] order.
    pub dofs: Vec<DofMotion>,
}

impl MotionReport {
    pub fn get(&self, dof: Dof) -> &DofMotion {
        self.dofs.iter().find(|m| m.dof == dof).expect("report covers all DOFs")
    }

    pub fn changed(&self) -> impl Iterator<Item = &DofMotion> {
        self.dofs.iter().filter(|m| m.state == DofState::Changed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionThresholds {
    pub rotation_high_deg: f64,
    pub rotation_low_deg: f64,
    pub translation_high_m: f64,
    pub translation_low_m: f64,
}

impl Default for MotionThresholds {
    fn default() -> Self {
        Self {
            rotation_high_deg: 10.0,
            rotation_low_deg: 5.0,
            translation_high_m: 0.10,
            translation_low_m: 0.05,
        }
    }
}

impl MotionThresholds {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.rotation_high_deg <= self.rotation_low_deg {
            return Err(GeometryError::Config(format!(
                "rotation high threshold {} must exceed low threshold {}",
                self.rotation_high_deg, self.rotation_low_deg
            )));
        }
        if self.translation_high_m <= self.translation_low_m {
            return Err(GeometryError::Config(format!(
                "translation high threshold {} must exceed low threshold {}",
                self.translation_high_m, self.translation_low_m
            )));
        }
        Ok(())
    }

    pub fn state(&self, dof: Dof, magnitude: f64) -> DofState {
        let (high, low) = if dof.is_rotation() {
            (self.rotation_high_deg, self.rotation_low_deg)
        } else {
            (self.translation_high_m, self.translation_low_m)
        };
        if magnitude > high {
            DofState::Changed
        } else if magnitude < low {
            DofState::Stationary
        } else {
            DofState::Ignored
        }
    }
}

/// Signed per-DOF amounts of the camera motion implied by `relative`:
/// `[roll, pitch, yaw]` in degrees then `[x, y, z]` in meters.
pub fn camera_motion_components(relative: &RigidTransform) -> [f64; 6] {
    let motion = relative.inverse();
    let (yaw, pitch, roll) = motion.rotation.to_euler_yxz();
    let t = motion.translation;
    [roll.to_degrees(), pitch.to_degrees(), yaw.to_degrees(), t[0], t[1], t[2]]
}

pub fn classify_motion(
    relative: &RigidTransform,
    thresholds: &MotionThresholds,
) -> Result<MotionReport, GeometryError> {
    thresholds.validate()?;
    relative.validate()?;
    let amounts = camera_motion_components(relative);
    let dofs = Dof::ALL
        .iter()
        .zip(amounts)
        .map(|(&dof, amount)| DofMotion {
            dof,
            state: thresholds.state(dof, amount.abs()),
            positive: amount >= 0.0,
            magnitude: amount.abs(),
        })
        .collect();
    Ok(MotionReport { dofs })
}

/// Joins clause fragments into one sentence about the camera.
pub fn sentence_from_fragments(fragments: &[&str]) -> String {
    match fragments {
        [] => STATIONARY_SENTENCE.to_string(),
        [one] => format!("The camera {one}."),
        [init @ .., last] => format!("The camera {} and {last}.", init.join(", ")),
    }
}

/// Canonical sentence listing the changed DOFs in roll, pitch, yaw, x, y, z order.
pub fn describe_motion(report: &MotionReport) -> String {
    let mut changed: Vec<&DofMotion> = report.changed().collect();
    changed.sort_by_key(|m| m.dof);
    let fragments: Vec<&str> = changed.iter().map(|m| m.fragment()).collect();
    sentence_from_fragments(&fragments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pose::{RotationMatrix, Vec3};

    /// Builds the relative transform whose camera motion is the given pose of
    /// camera b in camera a's frame.
    fn relative_for_motion(yaw: f64, pitch: f64, roll: f64, t: [f64; 3]) -> RigidTransform {
        let motion = RigidTransform::new(
            RotationMatrix::from_euler_yxz(yaw.to_radians(), pitch.to_radians(), roll.to_radians()),
            Vec3::from(t),
        );
        motion.inverse()
    }

    #[test]
    fn identity_is_stationary() {
        let report = classify_motion(&RigidTransform::identity(), &Default::default()).unwrap();
        assert!(report.dofs.iter().all(|m| m.state == DofState::Stationary));
        assert_eq!(describe_motion(&report), "The camera remained stationary.");
    }

    #[test]
    fn yaw_fifteen_degrees_changed() {
        let rel = relative_for_motion(15.0, 0.0, 0.0, [0.0; 3]);
        let report = classify_motion(&rel, &Default::default()).unwrap();
        assert_eq!(report.get(Dof::Yaw).state, DofState::Changed);
        for dof in [Dof::Roll, Dof::Pitch, Dof::X, Dof::Y, Dof::Z] {
            assert_eq!(report.get(dof).state, DofState::Stationary, "{dof:?}");
        }
        assert_eq!(describe_motion(&report), "The camera yawed right.");
    }

    #[test]
    fn yaw_seven_degrees_ignored() {
        let rel = relative_for_motion(-7.0, 0.0, 0.0, [0.0; 3]);
        let report = classify_motion(&rel, &Default::default()).unwrap();
        assert_eq!(report.get(Dof::Yaw).state, DofState::Ignored);
        assert_eq!(describe_motion(&report), STATIONARY_SENTENCE);
    }

    #[test]
    fn roll_left_and_backward() {
        let rel = relative_for_motion(0.0, 0.0, -20.0, [0.0, 0.0, -0.5]);
        let report = classify_motion(&rel, &Default::default()).unwrap();
        assert_eq!(describe_motion(&report), "The camera rolled left and moved backward.");
    }

    #[test]
    fn three_clauses() {
        let rel = relative_for_motion(12.0, 20.0, 0.0, [0.3, 0.0, 0.0]);
        let report = classify_motion(&rel, &Default::default()).unwrap();
        assert_eq!(
            describe_motion(&report),
            "The camera pitched up, yawed right and moved right."
        );
    }

    #[test]
    fn thresholds_must_be_ordered() {
        let bad = MotionThresholds { rotation_high_deg: 5.0, ..Default::default() };
        assert!(matches!(
            classify_motion(&RigidTransform::identity(), &bad),
            Err(GeometryError::Config(_))
        ));
        let bad = MotionThresholds { translation_low_m: 0.2, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn boundary_magnitudes_are_ignored() {
        let th = MotionThresholds::default();
        assert_eq!(th.state(Dof::Yaw, 10.0), DofState::Ignored);
        assert_eq!(th.state(Dof::Yaw, 5.0), DofState::Ignored);
        assert_eq!(th.state(Dof::X, 0.1), DofState::Ignored);
        assert_eq!(th.state(Dof::X, 0.049), DofState::Stationary);
    }

    /// Independent sentence oracle: builds the expected text from raw states
    /// by string templates, without touching `describe_motion`.
    fn oracle_sentence(states: &[(DofState, bool); 6]) -> String {
        const VERBS: [(&str, &str, &str); 6] = [
            ("rolled", "right", "left"),
            ("pitched", "up", "down"),
            ("yawed", "right", "left"),
            ("moved", "right", "left"),
            ("moved", "down", "up"),
            ("moved", "forward", "backward"),
        ];
        let parts: Vec<String> = states
            .iter()
            .zip(VERBS)
            .filter(|((s, _), _)| *s == DofState::Changed)
            .map(|((_, pos), (verb, p, n))| format!("{verb} {}", if *pos { p } else { n }))
            .collect();
        if parts.is_empty() {
            return "The camera remained stationary.".into();
        }
        let mut s = String::from("The camera ");
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                s.push_str(if i == parts.len() - 1 { " and " } else { ", " });
            }
            s.push_str(p);
        }
        s.push('.');
        s
    }

    #[test]
    fn describe_matches_template_oracle_over_state_space() {
        let states = [DofState::Changed, DofState::Ignored, DofState::Stationary];
        // every 3^6 combination, with direction signs varied by index parity
        for code in 0..729u32 {
            let mut c = code;
            let mut combo = [(DofState::Stationary, true); 6];
            let mut dofs = Vec::new();
            for (i, dof) in Dof::ALL.iter().enumerate() {
                let state = states[(c % 3) as usize];
                c /= 3;
                let positive = (code >> i) & 1 == 0;
                combo[i] = (state, positive);
                dofs.push(DofMotion { dof: *dof, state, positive, magnitude: 0.0 });
            }
            let report = MotionReport { dofs };
            assert_eq!(describe_motion(&report), oracle_sentence(&combo), "code {code}");
        }
    }
}
