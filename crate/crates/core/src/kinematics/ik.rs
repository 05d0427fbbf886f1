use nalgebra::{DMatrix, DVector, Matrix6, SMatrix, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use super::arm::{ArmModel, JointVector, Pose, ARM_DOF, ROLL_SINGULAR_EPS};
use crate::error::{Error, Result};

type Jacobian = SMatrix<f64, 4, 6>;

/// Solver knobs shared by both IK methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    pub max_iterations: usize,
    /// Meters.
    pub position_tolerance: f64,
    /// Radians, on the palm roll coordinate.
    pub orientation_tolerance: f64,
    /// Fixed Levenberg-Marquardt damping added to the normal equations.
    pub damping: f64,
    /// Gain of the pull toward joint-range centers (QP only).
    pub null_space_gain: f64,
    /// Largest joint change per iteration (rad).
    pub max_joint_step: f64,
    /// Weight of the roll row relative to the position rows (m per rad).
    pub roll_weight: f64,
    /// Clearance kept from joint limits by the QP box constraints (rad).
    pub limit_margin: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            max_iterations: 50,
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
            damping: 1e-3,
            null_space_gain: 0.1,
            max_joint_step: 0.2,
            roll_weight: 0.3,
            limit_margin: 0.01,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations >= 1
            && self.position_tolerance > 0.0
            && self.orientation_tolerance > 0.0
            && self.damping >= 0.0
            && self.null_space_gain >= 0.0
            && self.max_joint_step > 0.0
            && self.roll_weight >= 0.0
            && self.limit_margin >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid IK parameters: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IkMethod {
    Lm,
    #[default]
    Qp,
}

/// The four constrained task coordinates: palm position and palm roll.
/// Palm yaw and pitch are left free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkTarget {
    pub position: Vector3<f64>,
    /// `None` leaves roll unconstrained.
    pub roll: Option<f64>,
}

impl From<&Pose> for IkTarget {
    fn from(pose: &Pose) -> Self {
        IkTarget {
            position: pose.position,
            roll: pose.roll(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: JointVector,
    pub converged: bool,
    /// Meters.
    pub position_residual: f64,
    /// Radians.
    pub orientation_residual: f64,
    pub iterations: usize,
    /// Some iteration wanted to leave the joint range and was clamped.
    pub limit_pressed: bool,
    /// QP steps that were infeasible and fell back to damped least squares.
    pub qp_fallbacks: usize,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    }
    r
}

struct Linearization {
    /// Weighted task error (roll row scaled by `roll_weight`).
    error: Vector4<f64>,
    jacobian: Jacobian,
    position_residual: f64,
    orientation_residual: f64,
}

fn linearize(model: &ArmModel, q: &JointVector, target: &IkTarget, params: &IkParams) -> Linearization {
    let (pose, frames) = model.chain(q);
    let dp = target.position - pose.position;
    let m = pose.rotation.matrix();
    let x_axis: Vector3<f64> = m.column(0).into_owned();
    let y_axis: Vector3<f64> = m.column(1).into_owned();
    let (a, b) = (x_axis.z, y_axis.z);
    let planar = a * a + b * b;

    let mut jacobian = Jacobian::zeros();
    let mut roll_err = 0.0;
    let roll_active = target.roll.is_some() && planar >= ROLL_SINGULAR_EPS;
    if let (Some(goal), true) = (target.roll, roll_active) {
        roll_err = wrap_angle(goal - b.atan2(-a));
    }
    for (j, (origin, axis)) in frames.iter().enumerate() {
        let lin = axis.cross(&(pose.position - origin));
        jacobian[(0, j)] = lin.x;
        jacobian[(1, j)] = lin.y;
        jacobian[(2, j)] = lin.z;
        if roll_active {
            // roll = atan2(b, -a) with a = x_z, b = y_z; d(axis)/dq_j = w_j x axis.
            let da = axis.cross(&x_axis).z;
            let db = axis.cross(&y_axis).z;
            jacobian[(3, j)] = params.roll_weight * (b * da - a * db) / planar;
        }
    }
    Linearization {
        error: Vector4::new(dp.x, dp.y, dp.z, params.roll_weight * roll_err),
        jacobian,
        position_residual: dp.norm(),
        orientation_residual: roll_err.abs(),
    }
}

fn within_tolerance(lin: &Linearization, params: &IkParams) -> bool {
    lin.position_residual <= params.position_tolerance
        && lin.orientation_residual <= params.orientation_tolerance
}

fn validate_inputs(q_init: &JointVector, target: &IkTarget) -> Result<()> {
    if q_init.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("IK initial joint angles"));
    }
    if target.position.iter().any(|v| !v.is_finite()) || target.roll.is_some_and(|r| !r.is_finite()) {
        return Err(Error::NonFinite("IK target"));
    }
    Ok(())
}

/// Damped least-squares step with the per-iteration cap applied by uniform
/// scaling.
fn dls_step(lin: &Linearization, params: &IkParams) -> Vector6<f64> {
    let jt = lin.jacobian.transpose();
    let a: Matrix6<f64> = jt * lin.jacobian + Matrix6::identity() * params.damping.max(1e-12);
    let rhs = jt * lin.error;
    let step = a.cholesky().map(|c| c.solve(&rhs)).unwrap_or_else(Vector6::zeros);
    cap_step(step, params.max_joint_step)
}

/// Damped least-squares step that locks joints whose step would cross a
/// limit, re-solving with the remaining joints. Also reports whether any
/// joint was locked.
fn dls_step_within_limits(model: &ArmModel, q: &JointVector, lin: &Linearization, params: &IkParams) -> (Vector6<f64>, bool) {
    let (lower, upper) = (model.lower(), model.upper());
    let mut lin_free = Linearization {
        error: lin.error,
        jacobian: lin.jacobian,
        position_residual: lin.position_residual,
        orientation_residual: lin.orientation_residual,
    };
    let mut locked = [false; ARM_DOF];
    loop {
        let mut step = dls_step(&lin_free, params);
        let mut changed = false;
        for i in 0..ARM_DOF {
            if locked[i] {
                step[i] = 0.0;
            } else if q[i] + step[i] > upper[i] || q[i] + step[i] < lower[i] {
                locked[i] = true;
                lin_free.jacobian.column_mut(i).fill(0.0);
                changed = true;
            }
        }
        if !changed {
            return (step, locked.iter().any(|l| *l));
        }
    }
}

fn cap_step(step: Vector6<f64>, cap: f64) -> Vector6<f64> {
    let largest = step.amax();
    if largest > cap {
        step * (cap / largest)
    } else {
        step
    }
}

fn apply_step(model: &ArmModel, q: &JointVector, step: &Vector6<f64>) -> (JointVector, bool) {
    let raw: JointVector = std::array::from_fn(|i| q[i] + step[i]);
    let clamped = model.clamp(&raw);
    (clamped, clamped != raw)
}

fn finish(model: &ArmModel, q: JointVector, target: &IkTarget, params: &IkParams, iterations: usize, limit_pressed: bool, qp_fallbacks: usize) -> IkSolution {
    let lin = linearize(model, &q, target, params);
    IkSolution {
        q,
        converged: within_tolerance(&lin, params),
        position_residual: lin.position_residual,
        orientation_residual: lin.orientation_residual,
        iterations,
        limit_pressed,
        qp_fallbacks,
    }
}

/// Levenberg-Marquardt (fixed damping) IK on palm position + roll.
pub fn ik_solve_lm(model: &ArmModel, q_init: &JointVector, target: &Pose, params: &IkParams) -> Result<IkSolution> {
    ik_solve_lm_task(model, q_init, &IkTarget::from(target), params)
}

pub fn ik_solve_lm_task(model: &ArmModel, q_init: &JointVector, target: &IkTarget, params: &IkParams) -> Result<IkSolution> {
    validate_inputs(q_init, target)?;
    let mut q = model.clamp(q_init);
    let mut limit_pressed = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        let lin = linearize(model, &q, target, params);
        if within_tolerance(&lin, params) {
            break;
        }
        let (step, locked) = dls_step_within_limits(model, &q, &lin, params);
        let (next, pressed) = apply_step(model, &q, &step);
        limit_pressed |= pressed || locked;
        q = next;
        iterations += 1;
    }
    Ok(finish(model, q, target, params, iterations, limit_pressed, 0))
}

/// Box-constrained QP IK: the primary task is solved in least squares while a
/// pull toward joint-range centers acts in the task null space. Joint bounds
/// (less `limit_margin`) and the per-step cap form the box.
pub fn ik_solve_qp(model: &ArmModel, q_init: &JointVector, target: &Pose, params: &IkParams) -> Result<IkSolution> {
    ik_solve_qp_task(model, q_init, &IkTarget::from(target), params)
}

pub fn ik_solve_qp_task(model: &ArmModel, q_init: &JointVector, target: &IkTarget, params: &IkParams) -> Result<IkSolution> {
    validate_inputs(q_init, target)?;
    let mut q = model.clamp(q_init);
    let lower = model.lower();
    let upper = model.upper();
    let center = model.center();
    let mut limit_pressed = false;
    let mut fallbacks = 0;
    let mut iterations = 0;

    while iterations < params.max_iterations {
        let lin = linearize(model, &q, target, params);
        if within_tolerance(&lin, params) {
            break;
        }
        let j = &lin.jacobian;
        let jt = j.transpose();
        let damping = params.damping.max(1e-12);

        let pull = Vector6::from_fn(|i, _| params.null_space_gain * (center[i] - q[i]));
        let pull = cap_step(pull, 0.25 * params.max_joint_step);
        let lo = Vector6::from_fn(|i, _| lower[i] + params.limit_margin - q[i]);
        let hi = Vector6::from_fn(|i, _| upper[i] - params.limit_margin - q[i]);

        // Joints that end on a bound leave the null space; re-solve until the
        // set of bound joints is stable.
        let mut locked = [false; ARM_DOF];
        let mut step = None;
        if lo.iter().zip(hi.iter()).all(|(l, h)| l <= h) {
            for _ in 0..=ARM_DOF {
                let null_sq = null_projector(j, &locked);
                let hessian = jt * j + Matrix6::identity() * damping + null_sq;
                let gradient = -(jt * lin.error + null_sq * pull);
                step = solve_box_qp(&hessian, &gradient, &lo, &hi);
                let Some(x) = step else { break };
                let mut grew = false;
                for i in 0..ARM_DOF {
                    if !locked[i] && (x[i] <= lo[i] || x[i] >= hi[i]) {
                        locked[i] = true;
                        grew = true;
                    }
                }
                if !grew {
                    break;
                }
            }
        }
        let step = match step {
            Some(s) => cap_step(s, params.max_joint_step),
            None => {
                fallbacks += 1;
                dls_step(&lin, params)
            }
        };
        let (next, pressed) = apply_step(model, &q, &step);
        limit_pressed |= pressed;
        q = next;
        iterations += 1;
    }
    if params.null_space_gain > 0.0 {
        q = refine_clearance(model, q, target, params, &mut iterations);
    }
    Ok(finish(model, q, target, params, iterations, limit_pressed, fallbacks))
}

/// Move a converged solution along the task null space toward the joint
/// nearest its limit, re-converging the task after each move. A move is kept
/// only when it ends within tolerance with strictly more clearance.
fn refine_clearance(model: &ArmModel, mut q: JointVector, target: &IkTarget, params: &IkParams, iterations: &mut usize) -> JointVector {
    const SOFTMIN_SCALE: f64 = 0.05;
    let lower = model.lower();
    let upper = model.upper();
    let mut step_size = params.null_space_gain * params.max_joint_step;
    while *iterations < params.max_iterations && step_size > 1e-4 {
        let lin = linearize(model, &q, target, params);
        if !within_tolerance(&lin, params) {
            break;
        }
        let dist: [f64; ARM_DOF] = std::array::from_fn(|i| (q[i] - lower[i]).min(upper[i] - q[i]));
        let nearest = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let grad = Vector6::from_fn(|i, _| {
            let away = if q[i] - lower[i] < upper[i] - q[i] { 1.0 } else { -1.0 };
            away * (-(dist[i] - nearest) / SOFTMIN_SCALE).exp()
        });
        let dir = null_projector(&lin.jacobian, &[false; ARM_DOF]) * grad;
        if dir.amax() < 1e-9 {
            break;
        }
        let mut cand = model.clamp(&std::array::from_fn(|i| q[i] + dir[i] * (step_size / dir.amax())));
        *iterations += 1;
        let mut ok = false;
        while *iterations < params.max_iterations {
            let l = linearize(model, &cand, target, params);
            if within_tolerance(&l, params) {
                ok = true;
                break;
            }
            cand = apply_step(model, &cand, &dls_step(&l, params)).0;
            *iterations += 1;
        }
        if ok && model.min_limit_distance(&cand) > nearest + 1e-9 {
            q = cand;
        } else {
            step_size *= 0.5;
        }
    }
    q
}

/// Orthogonal projector onto the joint motions that leave the task unchanged
/// and keep `locked` joints still. Directions with singular value below
/// `1e-6` count as null.
fn null_projector(j: &Jacobian, locked: &[bool; ARM_DOF]) -> Matrix6<f64> {
    let mut m: Matrix6<f64> = j.transpose() * j;
    for (i, l) in locked.iter().enumerate() {
        if *l {
            m[(i, i)] += 1.0;
        }
    }
    let eig = m.symmetric_eigen();
    let mut n = Matrix6::zeros();
    for k in 0..ARM_DOF {
        if eig.eigenvalues[k] < 1e-12 {
            let v = eig.eigenvectors.column(k);
            n += v * v.transpose();
        }
    }
    n
}

/// Primal active-set method for `min ½xᵀHx + gᵀx` subject to `lo ≤ x ≤ hi`
/// with `H` positive definite. Returns `None` if it fails to terminate.
pub fn solve_box_qp(h: &Matrix6<f64>, g: &Vector6<f64>, lo: &Vector6<f64>, hi: &Vector6<f64>) -> Option<Vector6<f64>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Bound {
        Free,
        Lower,
        Upper,
    }
    let n = ARM_DOF;
    let mut x = Vector6::from_fn(|i, _| 0.0f64.clamp(lo[i], hi[i]));
    let mut state = [Bound::Free; ARM_DOF];
    for i in 0..n {
        if lo[i] == hi[i] || (x[i] == lo[i] && lo[i] == 0.0) {
            state[i] = Bound::Lower;
        } else if x[i] == hi[i] && hi[i] == 0.0 {
            state[i] = Bound::Upper;
        }
    }

    for _ in 0..100 {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        let grad = h * x + g;
        let mut p = Vector6::zeros();
        if !free.is_empty() {
            let m = free.len();
            let sub = DMatrix::from_fn(m, m, |r, c| h[(free[r], free[c])]);
            let rhs = DVector::from_fn(m, |r, _| -grad[free[r]]);
            let sol = sub.cholesky()?.solve(&rhs);
            for (k, &i) in free.iter().enumerate() {
                p[i] = sol[k];
            }
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            if p[i] < 0.0 {
                let a = (lo[i] - x[i]) / p[i];
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, Bound::Lower));
                }
            } else if p[i] > 0.0 {
                let a = (hi[i] - x[i]) / p[i];
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, Bound::Upper));
                }
            }
        }
        x += p * alpha.max(0.0);
        if let Some((i, b)) = blocking {
            x[i] = if b == Bound::Lower { lo[i] } else { hi[i] };
            state[i] = b;
            continue;
        }

        // Minimizer on the current working set: release the bound with the
        // most negative multiplier, or stop.
        let grad = h * x + g;
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            if lo[i] == hi[i] {
                continue;
            }
            let violation = match state[i] {
                Bound::Lower => -grad[i],
                Bound::Upper => grad[i],
                Bound::Free => 0.0,
            };
            if violation > 1e-14 && worst.is_none_or(|(_, w)| violation > w) {
                worst = Some((i, violation));
            }
        }
        match worst {
            None => return Some(x),
            Some((i, _)) => state[i] = Bound::Free,
        }
    }
    None
}
