use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of revolute joints in the arm.
pub const ARM_DOF: usize = 6;

pub type JointVector = [f64; ARM_DOF];

/// One revolute joint: translate by `offset` in the parent frame, then rotate
/// about `axis` by the joint angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub axis: [f64; 3],
    pub offset: [f64; 3],
    pub limits: [f64; 2],
}

impl JointSpec {
    pub fn lower(&self) -> f64 {
        self.limits[0]
    }

    pub fn upper(&self) -> f64 {
        self.limits[1]
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.limits[0] + self.limits[1])
    }

    pub fn half_range(&self) -> f64 {
        0.5 * (self.limits[1] - self.limits[0])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArmModelFile {
    joints: Vec<JointSpec>,
    palm_offset: [f64; 3],
}

/// Serial 6-DoF arm ending in a palm frame.
///
/// The palm frame sits `palm_offset` along the flange frame and is flipped
/// about the flange x-axis, so its z-axis points from the palm opening into
/// the hand: an object entering the palm travels along +z. The palm center
/// lies on the last joint axis, which makes joint 6 a pure roll about the
/// palm z-axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmModelFile", into = "ArmModelFile")]
pub struct ArmModel {
    joints: [JointSpec; ARM_DOF],
    axes: [Unit<Vector3<f64>>; ARM_DOF],
    palm_offset: Vector3<f64>,
}

impl TryFrom<ArmModelFile> for ArmModel {
    type Error = Error;

    fn try_from(file: ArmModelFile) -> Result<Self> {
        ArmModel::new(file.joints, file.palm_offset)
    }
}

impl From<ArmModel> for ArmModelFile {
    fn from(model: ArmModel) -> Self {
        ArmModelFile {
            joints: model.joints.to_vec(),
            palm_offset: model.palm_offset.into(),
        }
    }
}

impl Default for ArmModel {
    /// An xArm6-class chain with 0.80 m reach from the shoulder to the palm
    /// center. Limits are chosen so the range midpoint is a bent, forward
    /// facing catching posture.
    fn default() -> Self {
        let joints = vec![
            JointSpec {
                axis: [0.0, 0.0, 1.0],
                offset: [0.0, 0.0, 0.267],
                limits: [-3.1, 3.1],
            },
            JointSpec {
                axis: [0.0, 1.0, 0.0],
                offset: [0.0, 0.0, 0.0],
                limits: [-1.2, 1.8],
            },
            JointSpec {
                axis: [0.0, 1.0, 0.0],
                offset: [0.0, 0.0, 0.29],
                limits: [-0.3, 2.7],
            },
            JointSpec {
                axis: [0.0, 0.0, 1.0],
                offset: [0.0, 0.0, 0.0],
                limits: [-3.1, 3.1],
            },
            JointSpec {
                axis: [0.0, 1.0, 0.0],
                offset: [0.0, 0.0, 0.34],
                limits: [-2.2, 1.0],
            },
            JointSpec {
                axis: [0.0, 0.0, 1.0],
                offset: [0.0, 0.0, 0.0],
                limits: [-3.1, 3.1],
            },
        ];
        ArmModel::new(joints, [0.0, 0.0, 0.17]).expect("default arm model is valid")
    }
}

impl ArmModel {
    pub fn new(joints: Vec<JointSpec>, palm_offset: [f64; 3]) -> Result<Self> {
        if joints.len() != ARM_DOF {
            return Err(Error::Config(format!(
                "arm model needs exactly {ARM_DOF} joints, got {}",
                joints.len()
            )));
        }
        if palm_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("palm_offset must be finite".into()));
        }
        let mut axes = [Vector3::z_axis(); ARM_DOF];
        for (i, j) in joints.iter().enumerate() {
            let axis = Vector3::from(j.axis);
            if !axis.iter().all(|v| v.is_finite()) || axis.norm() < 1e-9 {
                return Err(Error::Config(format!("joint {} has a degenerate axis", i + 1)));
            }
            if j.offset.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("joint {} offset must be finite", i + 1)));
            }
            let [lo, hi] = j.limits;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "joint {} limits must satisfy lower < upper, got [{lo}, {hi}]",
                    i + 1
                )));
            }
            axes[i] = Unit::new_normalize(axis);
        }
        let joints: [JointSpec; ARM_DOF] = joints.try_into().expect("length checked");
        Ok(ArmModel {
            joints,
            axes,
            palm_offset: Vector3::from(palm_offset),
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "<arm model>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("arm model serializes")
    }

    pub fn joints(&self) -> &[JointSpec; ARM_DOF] {
        &self.joints
    }

    pub fn palm_offset(&self) -> Vector3<f64> {
        self.palm_offset
    }

    pub fn lower(&self) -> JointVector {
        std::array::from_fn(|i| self.joints[i].lower())
    }

    pub fn upper(&self) -> JointVector {
        std::array::from_fn(|i| self.joints[i].upper())
    }

    /// Midpoint of every joint range; also the documented home configuration.
    pub fn center(&self) -> JointVector {
        std::array::from_fn(|i| self.joints[i].center())
    }

    pub fn clamp(&self, q: &JointVector) -> JointVector {
        std::array::from_fn(|i| q[i].clamp(self.joints[i].lower(), self.joints[i].upper()))
    }

    /// Smallest distance from any joint to its nearest limit (negative when
    /// outside the range).
    pub fn min_limit_distance(&self, q: &JointVector) -> f64 {
        self.joints
            .iter()
            .zip(q)
            .map(|(j, &v)| (v - j.lower()).min(j.upper() - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Palm pose plus the world-frame origin and axis of every joint.
    pub(crate) fn chain(&self, q: &JointVector) -> (Pose, [(Vector3<f64>, Vector3<f64>); ARM_DOF]) {
        let mut rot = Matrix3::identity();
        let mut pos = Vector3::zeros();
        let mut frames = [(Vector3::zeros(), Vector3::zeros()); ARM_DOF];
        for i in 0..ARM_DOF {
            pos += rot * Vector3::from(self.joints[i].offset);
            let axis_world = rot * self.axes[i].into_inner();
            frames[i] = (pos, axis_world);
            rot *= Rotation3::from_axis_angle(&self.axes[i], q[i]).into_inner();
        }
        pos += rot * self.palm_offset;
        // Flip about the flange x-axis: palm z = -flange z.
        let flip = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let pose = Pose {
            position: pos,
            rotation: Rotation3::from_matrix_unchecked(rot * flip),
        };
        (pose, frames)
    }
}

/// Palm pose in the arm-base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, rotation: Rotation3<f64>) -> Self {
        Pose { position, rotation }
    }

    /// Palm z-axis in the parent frame.
    pub fn z_axis(&self) -> Vector3<f64> {
        self.rotation.matrix().column(2).into_owned()
    }

    /// Roll of the palm about its own z-axis, measured from the plane spanned
    /// by the palm z-axis and the vertical. Increases with positive rotation
    /// about the palm z-axis. `None` when the palm z-axis is (nearly)
    /// vertical and roll is undefined.
    pub fn roll(&self) -> Option<f64> {
        let m = self.rotation.matrix();
        let a = m[(2, 0)];
        let b = m[(2, 1)];
        if a * a + b * b < ROLL_SINGULAR_EPS {
            None
        } else {
            Some(b.atan2(-a))
        }
    }
}

pub(crate) const ROLL_SINGULAR_EPS: f64 = 1e-8;

/// Palm pose for joint angles `q`.
pub fn forward_kinematics(model: &ArmModel, q: &JointVector) -> Pose {
    model.chain(q).0
}

/// Per-joint violation flags. Limits are closed: a joint exactly at its
/// bound is legal.
pub fn check_joint_limits(model: &ArmModel, q: &JointVector) -> [bool; ARM_DOF] {
    std::array::from_fn(|i| {
        let j = &model.joints[i];
        !(q[i] >= j.lower() && q[i] <= j.upper())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_model_reach() {
        let m = ArmModel::default();
        let reach: f64 = m.joints().iter().skip(1).map(|j| Vector3::from(j.offset).norm()).sum::<f64>()
            + m.palm_offset().norm();
        assert!((0.7..=0.8 + 1e-12).contains(&reach), "reach {reach}");
    }

    #[test]
    fn rotation_is_orthonormal() {
        let m = ArmModel::default();
        let q = [0.3, -0.7, 1.9, 2.2, -1.3, 0.4];
        let r = forward_kinematics(&m, &q).rotation.into_inner();
        assert_relative_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-9);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn base_yaw_preserves_reach() {
        let m = ArmModel::default();
        let q = m.center();
        let mut q2 = q;
        q2[0] += std::f64::consts::PI;
        let a = forward_kinematics(&m, &q).position;
        let b = forward_kinematics(&m, &q2).position;
        assert_relative_eq!(a.norm(), b.norm(), epsilon = 1e-12);
        assert_relative_eq!(a.z, b.z, epsilon = 1e-12);
    }

    #[test]
    fn wrist_roll_only_rotates_about_palm_z() {
        let m = ArmModel::default();
        let q = [0.2, 0.1, 1.0, -0.4, -0.3, 0.0];
        let mut q2 = q;
        q2[5] += 0.7;
        let a = forward_kinematics(&m, &q);
        let b = forward_kinematics(&m, &q2);
        assert_relative_eq!(a.position, b.position, epsilon = 1e-12);
        // The palm z-axis is the flipped flange z-axis, so +q6 is a negative
        // roll about palm z.
        let rel = a.rotation.inverse() * b.rotation;
        assert_relative_eq!(rel.scaled_axis(), Vector3::new(0.0, 0.0, -0.7), epsilon = 1e-9);
        assert_relative_eq!(b.roll().unwrap() - a.roll().unwrap(), -0.7, epsilon = 1e-9);
    }

    #[test]
    fn limits_are_closed_intervals() {
        let m = ArmModel::default();
        assert_eq!(check_joint_limits(&m, &m.center()), [false; 6]);
        let mut q = m.center();
        q[0] = m.joints()[0].upper() + 0.01;
        assert_eq!(check_joint_limits(&m, &q), [true, false, false, false, false, false]);
        q[0] = m.joints()[0].upper();
        assert_eq!(check_joint_limits(&m, &q), [false; 6]);
        q[3] = f64::NAN;
        assert!(check_joint_limits(&m, &q)[3]);
    }

    #[test]
    fn rejects_bad_models() {
        let mut joints = ArmModel::default().joints().to_vec();
        joints[2].limits = [1.0, 1.0];
        assert!(ArmModel::new(joints.clone(), [0.0; 3]).is_err());
        joints.pop();
        assert!(ArmModel::new(joints, [0.0; 3]).is_err());
        let joints = ArmModel::default().joints().to_vec();
        assert!(ArmModel::new(joints, [f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let m = ArmModel::default();
        let text = m.to_toml_string();
        assert_eq!(ArmModel::from_toml_str(&text).unwrap(), m);
    }
}
