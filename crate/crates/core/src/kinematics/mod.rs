//! Arm and base kinematics.
//!
//! The arm task has four constrained coordinates (palm position and palm
//! roll); yaw and pitch of the palm are free and absorbed by the redundancy.

mod arm;
mod base;
mod ik;

pub use arm::{check_joint_limits, forward_kinematics, ArmModel, JointSpec, JointVector, Pose, ARM_DOF};
pub use base::{base_step, normalize_yaw, BasePose};
pub use ik::{
    ik_solve_lm, ik_solve_lm_task, ik_solve_qp, ik_solve_qp_task, solve_box_qp, IkMethod, IkParams, IkSolution,
    IkTarget,
};

use crate::error::Result;

/// Dispatch to the configured solver.
pub fn ik_solve(
    method: IkMethod,
    model: &ArmModel,
    q_init: &JointVector,
    target: &IkTarget,
    params: &IkParams,
) -> Result<IkSolution> {
    match method {
        IkMethod::Lm => ik_solve_lm_task(model, q_init, target, params),
        IkMethod::Qp => ik_solve_qp_task(model, q_init, target, params),
    }
}
