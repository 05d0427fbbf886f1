use std::sync::Arc;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ContactConfig, EnvConfig};
use super::object::{integrate_flight, launch_object, ObjectClass, ObjectSpec, ObjectState, Throw};
use super::types::{
    action_dim, Action, EpisodeOutcome, HandState, Observation, ARM_ACTION_DIM, FULL_ACTION_DIM, HAND_DOF,
};
use crate::error::{Error, Result};
use crate::kinematics::{base_step, forward_kinematics, ik_solve, BasePose, IkTarget, JointVector};
use crate::rewards::{total_reward, RewardBreakdown, RewardContext, RewardWeights, Stage};
use crate::sim2real::{add_noise, sample_env_params, DomainParams, LowPassFilter};

/// Parameters drawn for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub domain: DomainParams,
    pub object: ObjectSpec,
    pub release_position: [f64; 3],
    pub release_velocity: [f64; 3],
    pub flight_time: f64,
    pub landing: [f64; 2],
}

/// Palm pose and velocity in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PalmState {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
    pub velocity: Vector3<f64>,
}

impl PalmState {
    pub fn z_axis(&self) -> Vector3<f64> {
        self.rotation.matrix().column(2).into_owned()
    }
}

/// Full simulator state of one episode.
#[derive(Debug, Clone)]
pub struct World {
    pub base: BasePose,
    pub arm_q: JointVector,
    /// Servo setpoint: the latest IK solution.
    pub arm_cmd: JointVector,
    /// Accumulated end-effector target (arm-base frame).
    pub ee_target: Vector3<f64>,
    pub roll_target: f64,
    pub home_roll: f64,
    pub hand: HandState,
    pub object: ObjectState,
    pub params: EnvParams,
    pub palm: PalmState,
    pub step: u32,
    pub outcome: EpisodeOutcome,
    pub done: bool,
    pub ik_fallbacks: usize,
    pending_velocity: Vector3<f64>,
    /// Noisy object and EE positions of the previous observation.
    history: Option<([f64; 3], [f64; 3])>,
}

impl World {
    /// Current time since reset (s).
    pub fn time(&self, cfg: &EnvConfig) -> f64 {
        self.step as f64 * cfg.control_dt()
    }

    /// Arm-base frame position of a world point.
    pub fn to_arm_frame(&self, mount: &[f64; 3], p: &Vector3<f64>) -> [f64; 3] {
        let [bx, by] = self.base.world_to_body([p.x - self.base.x, p.y - self.base.y]);
        [bx - mount[0], by - mount[1], p.z - mount[2]]
    }

    fn update_palm(&mut self, cfg: &EnvConfig, dt: Option<f64>) {
        let pose = forward_kinematics(&cfg.arm, &self.arm_q);
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), self.base.yaw);
        let mount = Vector3::from(cfg.mount_offset);
        let position = Vector3::new(self.base.x, self.base.y, 0.0) + yaw * (mount + pose.position);
        let rotation = yaw * pose.rotation;
        let velocity = match dt {
            Some(dt) => (position - self.palm.position) / dt,
            None => Vector3::zeros(),
        };
        self.palm = PalmState {
            position,
            rotation,
            velocity,
        };
    }

    /// Shift the whole scene horizontally. Everything observed is relative,
    /// so observations must not change.
    pub fn translate(&mut self, dx: f64, dy: f64) {
        self.base.x += dx;
        self.base.y += dy;
        self.object.position += Vector3::new(dx, dy, 0.0);
        self.palm.position += Vector3::new(dx, dy, 0.0);
    }
}

/// True iff the palm center is within `eps` of the object's bounding sphere
/// while the object is airborne. The threshold is closed.
pub fn detect_touch(palm: &Vector3<f64>, object: &ObjectState, eps: f64) -> bool {
    object.airborne() && (palm - object.position).norm() - object.spec.bounding_radius() <= eps
}

/// Capture-based hold. A free object is captured when it is inside the palm
/// capture radius, the hand is closed enough and the palm moves with it;
/// otherwise it passes (bounces off). A held object follows the palm until
/// the hand opens past the release threshold. Returns the new held flag.
pub fn update_hold(palm: &PalmState, closure: f64, object: &mut ObjectState, contact: &ContactConfig) -> bool {
    if object.held {
        if closure < contact.open_threshold {
            object.held = false;
            object.attachment = None;
        }
        return object.held;
    }
    if !object.airborne() {
        return false;
    }
    let offset = object.position - palm.position;
    let relative_speed = (object.velocity - palm.velocity).norm();
    if offset.norm() <= contact.hold_radius
        && closure >= contact.close_threshold
        && relative_speed <= contact.max_relative_speed
    {
        object.held = true;
        object.attachment = Some(palm.rotation.inverse() * offset);
    }
    object.held
}

/// Result of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub context: RewardContext,
    pub done: bool,
    pub outcome: EpisodeOutcome,
}

/// One catching environment. Single-threaded and self-contained; run many
/// side by side for parallel rollouts.
#[derive(Debug, Clone)]
pub struct CatchEnv {
    cfg: Arc<EnvConfig>,
    weights: RewardWeights,
    stage: Stage,
    object_class: Option<ObjectClass>,
    lpf: LowPassFilter,
    lpf_enabled: bool,
    noise_rng: ChaCha8Rng,
    world: World,
    last_observation: Observation,
}

/// Stream used for observation and action noise.
const NOISE_STREAM: u64 = 0;
/// Stream used for domain parameters, object choice and throws.
const RANDOMIZATION_STREAM: u64 = 1;

impl CatchEnv {
    pub fn new(cfg: Arc<EnvConfig>, weights: RewardWeights) -> Result<Self> {
        cfg.validate()?;
        weights.validate()?;
        let lpf_dim = if cfg.lpf.filter_arm { 5 } else { 2 };
        let lpf = LowPassFilter::new(cfg.lpf.alpha, lpf_dim)?;
        let stage = cfg.stage;
        let mut env = CatchEnv {
            lpf_enabled: cfg.lpf.in_training,
            cfg,
            weights,
            stage,
            object_class: None,
            lpf,
            noise_rng: ChaCha8Rng::seed_from_u64(0),
            world: placeholder_world(),
            last_observation: Observation {
                object: [0.0; 3],
                object_prev: [0.0; 3],
                ee: [0.0; 3],
                ee_prev: [0.0; 3],
                base_velocity: [0.0; 2],
                hand: None,
            },
        };
        env.reset(0)?;
        Ok(env)
    }

    pub fn config(&self) -> &Arc<EnvConfig> {
        &self.cfg
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn outcome(&self) -> EpisodeOutcome {
        self.world.outcome
    }

    pub fn is_done(&self) -> bool {
        self.world.done
    }

    pub fn last_observation(&self) -> &Observation {
        &self.last_observation
    }

    /// Fix the object drawn at each reset (evaluation per object class).
    /// `None` restores training sampling.
    pub fn set_object_class(&mut self, class: Option<ObjectClass>) {
        self.object_class = class;
    }

    /// Enable or disable the command filter (deployment-style evaluation may
    /// differ from training).
    pub fn set_lpf_enabled(&mut self, enabled: bool) {
        self.lpf_enabled = enabled;
    }

    /// Start a new episode. Identical seeds give bit-identical episodes.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let cfg = Arc::clone(&self.cfg);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(NOISE_STREAM);
        let mut rand_rng = ChaCha8Rng::seed_from_u64(seed);
        rand_rng.set_stream(RANDOMIZATION_STREAM);

        let domain = sample_env_params(&mut rand_rng, &cfg.randomization, cfg.randomize);
        let object = match &self.object_class {
            Some(ObjectClass::HeldOut { spec, .. }) => *spec,
            Some(ObjectClass::Training(kind)) => cfg.objects.sample_kind(&mut rand_rng, *kind),
            None if cfg.randomize => cfg.objects.sample(&mut rand_rng),
            None => cfg.objects.default,
        };
        let throw: Throw = launch_object(&mut rand_rng, &cfg.launcher, domain.gravity)?;

        let home = cfg.arm.center();
        let home_pose = forward_kinematics(&cfg.arm, &home);
        let home_roll = home_pose.roll().unwrap_or(0.0);
        let launched = domain.throw_offset == 0;
        let mut world = World {
            base: BasePose::default(),
            arm_q: home,
            arm_cmd: home,
            ee_target: home_pose.position,
            roll_target: home_roll,
            home_roll,
            hand: HandState::open(cfg.hand.limits, cfg.hand.fixed),
            object: ObjectState {
                position: throw.position,
                velocity: if launched { throw.velocity } else { Vector3::zeros() },
                spec: object,
                launched,
                held: false,
                grounded: false,
                launch_step: domain.throw_offset,
                attachment: None,
            },
            params: EnvParams {
                domain,
                object,
                release_position: throw.position.into(),
                release_velocity: throw.velocity.into(),
                flight_time: throw.flight_time,
                landing: throw.landing,
            },
            palm: PalmState {
                position: Vector3::zeros(),
                rotation: Rotation3::identity(),
                velocity: Vector3::zeros(),
            },
            step: 0,
            outcome: EpisodeOutcome {
                touched: false,
                caught: false,
                steps_held: 0,
                closest_distance: 0.0,
                fault: false,
            },
            done: false,
            ik_fallbacks: 0,
            pending_velocity: throw.velocity,
            history: None,
        };
        world.update_palm(&cfg, None);
        world.outcome.closest_distance = (world.palm.position - world.object.position).norm();

        self.world = world;
        self.noise_rng = noise_rng;
        self.lpf.reset();
        self.last_observation = build_observation(&mut self.world, &cfg, self.stage, &mut self.noise_rng);
        Ok(self.last_observation.clone())
    }

    /// Advance one control step (`substeps` physics steps holding `action`).
    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.world.done {
            return Err(Error::EpisodeDone);
        }
        if !action.is_finite() {
            self.world.done = true;
            self.world.outcome.fault = true;
            let context = self.reward_context(vec![0.0; action_dim(self.stage)], false, false, Vector3::zeros(), self.world.outcome.closest_distance);
            return Ok(StepResult {
                observation: self.last_observation.clone(),
                reward: 0.0,
                breakdown: RewardBreakdown::default(),
                context,
                done: true,
                outcome: self.world.outcome,
            });
        }
        let cfg = Arc::clone(&self.cfg);
        let dim = action_dim(self.stage);

        let mut normalized = action.normalized(&cfg.action);
        if self.stage == Stage::Tracking {
            normalized[ARM_ACTION_DIM..].iter_mut().for_each(|v| *v = 0.0);
        }
        let policy_output = normalized[..dim].to_vec();
        let sigma = self.world.params.domain.act_sigma;
        let executed: [f64; FULL_ACTION_DIM] = {
            let noisy = add_noise(&mut self.noise_rng, &normalized[..dim], sigma);
            let mut out = [0.0; FULL_ACTION_DIM];
            for (o, v) in out.iter_mut().zip(noisy) {
                *o = v.clamp(-1.0, 1.0);
            }
            out
        };

        let world = &mut self.world;
        let mut base_cmd = [executed[0] * cfg.action.base_velocity, executed[1] * cfg.action.base_velocity];
        let mut ee_delta = Vector3::new(executed[2], executed[3], executed[4]) * cfg.action.ee_delta;
        if self.lpf_enabled {
            if cfg.lpf.filter_arm {
                let y = self.lpf.apply(&[base_cmd[0], base_cmd[1], ee_delta.x, ee_delta.y, ee_delta.z])?;
                base_cmd = [y[0], y[1]];
                ee_delta = Vector3::new(y[2], y[3], y[4]);
            } else {
                let y = self.lpf.apply(&base_cmd)?;
                base_cmd = [y[0], y[1]];
            }
        }

        // Arm: accumulate the palm target, keep it in the reachable shell.
        world.ee_target = clamp_to_workspace(&cfg, world.ee_target + ee_delta);
        let roll_step = executed[5] * cfg.action.roll_delta;
        world.roll_target = (world.roll_target + roll_step)
            .clamp(world.home_roll - cfg.workspace.roll_range, world.home_roll + cfg.workspace.roll_range);
        let target = IkTarget {
            position: world.ee_target,
            roll: Some(world.roll_target),
        };
        let solution = ik_solve(cfg.ik_method, &cfg.arm, &world.arm_cmd, &target, &cfg.ik)?;
        world.arm_cmd = solution.q;
        world.ik_fallbacks += solution.qp_fallbacks;
        // The target asks for more than the joint range allows.
        let limit_violated = solution.limit_pressed
            || (!solution.converged && cfg.arm.min_limit_distance(&solution.q) <= cfg.ik.limit_margin + 1e-9);

        if self.stage == Stage::Catching {
            let [lo, hi] = cfg.hand.limits;
            for i in 0..HAND_DOF {
                let t = world.hand.targets[i] + executed[ARM_ACTION_DIM + i] * cfg.action.hand_delta;
                world.hand.targets[i] = t.clamp(lo, hi);
            }
        }

        if !world.object.launched && world.step >= world.object.launch_step {
            world.object.launched = true;
            world.object.velocity = world.pending_velocity;
        }

        let dt = cfg.physics_dt;
        let gains = world.params.domain.gain_scale;
        let k_base = -(-dt * gains.base / cfg.servo.base_tau).exp_m1();
        let k_arm = -(-dt * gains.arm / cfg.servo.arm_tau).exp_m1();
        let k_hand = -(-dt * gains.hand / cfg.servo.hand_tau).exp_m1();
        let gravity = world.params.domain.gravity;
        let radius = world.object.spec.bounding_radius();
        let object_before = world.object.position;
        let mut touched_now = false;

        for _ in 0..cfg.substeps {
            let v = [
                world.base.vx + k_base * (base_cmd[0] - world.base.vx),
                world.base.vy + k_base * (base_cmd[1] - world.base.vy),
            ];
            world.base = base_step(&world.base, v, dt);
            for i in 0..world.arm_q.len() {
                world.arm_q[i] += k_arm * (world.arm_cmd[i] - world.arm_q[i]);
            }
            for i in 0..HAND_DOF {
                world.hand.joints[i] += k_hand * (world.hand.targets[i] - world.hand.joints[i]);
            }
            world.update_palm(&cfg, Some(dt));

            let obj = &mut world.object;
            if let (true, Some(att)) = (obj.held, obj.attachment) {
                obj.position = world.palm.position + world.palm.rotation * att;
                obj.velocity = world.palm.velocity;
            } else if obj.airborne() {
                integrate_flight(&mut obj.position, &mut obj.velocity, gravity, obj.spec.damping, dt);
            }

            if detect_touch(&world.palm.position, &world.object, cfg.contact.touch_eps) {
                touched_now = true;
                world.outcome.touched = true;
            }
            let closure = world.hand.closure(cfg.hand.limits);
            update_hold(&world.palm, closure, &mut world.object, &cfg.contact);

            let obj = &mut world.object;
            if obj.launched && !obj.held && obj.position.z <= radius {
                obj.grounded = true;
                obj.velocity = Vector3::zeros();
                break;
            }
        }

        world.step += 1;
        let held = world.object.held;
        let held_duration = if held { cfg.control_dt() } else { 0.0 };
        if held {
            world.outcome.steps_held += 1;
        }
        let closest_before = world.outcome.closest_distance;
        let delta = world.object.position - object_before;
        let context = self.reward_context(policy_output, touched_now, limit_violated, delta, closest_before);
        let context = RewardContext {
            held_duration,
            ..context
        };
        let weights = self.weights;
        let (reward, breakdown) = total_reward(&context, &weights, self.stage);

        let world = &mut self.world;
        world.outcome.closest_distance = context.updated_closest();
        let horizon_reached = world.step as usize >= cfg.horizon_steps;
        world.done = horizon_reached || world.object.grounded;
        if horizon_reached && held {
            world.outcome.caught = true;
        }
        let observation = build_observation(world, &cfg, self.stage, &mut self.noise_rng);
        self.last_observation = observation.clone();
        Ok(StepResult {
            observation,
            reward,
            breakdown,
            context,
            done: world.done,
            outcome: world.outcome,
        })
    }

    /// Step with a normalized policy vector (length 6 or 18).
    pub fn step_normalized(&mut self, a: &[f64]) -> Result<StepResult> {
        let action = Action::from_normalized(a, &self.cfg.action)?;
        self.step(&action)
    }

    fn reward_context(
        &self,
        action: Vec<f64>,
        touched: bool,
        limit_violated: bool,
        object_delta: Vector3<f64>,
        closest_distance: f64,
    ) -> RewardContext {
        RewardContext {
            object_position: self.world.object.position,
            object_delta,
            palm_position: self.world.palm.position,
            palm_z: self.world.palm.z_axis(),
            closest_distance,
            action,
            touched,
            held_duration: 0.0,
            limit_violated,
        }
    }
}

fn clamp_to_workspace(cfg: &EnvConfig, target: Vector3<f64>) -> Vector3<f64> {
    let shoulder = Vector3::from(cfg.arm.joints()[0].offset) + Vector3::from(cfg.arm.joints()[1].offset);
    let mut t = target;
    t.z = t.z.max(cfg.workspace.min_height);
    let r = t - shoulder;
    let n = r.norm();
    if n > cfg.workspace.max_reach {
        t = shoulder + r * (cfg.workspace.max_reach / n);
    } else if n < cfg.workspace.min_reach {
        let dir = if n > 1e-12 { r / n } else { Vector3::x() };
        t = shoulder + dir * cfg.workspace.min_reach;
    }
    t
}

/// Transform the world into the policy's arm-base frame, apply observation
/// noise and shift the two-frame history. The first call after a reset
/// repeats the current frame as the previous one.
pub fn build_observation(world: &mut World, cfg: &EnvConfig, stage: Stage, rng: &mut ChaCha8Rng) -> Observation {
    let sigma = world.params.domain.obs_sigma;
    let object = world.to_arm_frame(&cfg.mount_offset, &world.object.position);
    let ee = world.to_arm_frame(&cfg.mount_offset, &world.palm.position);
    let noisy_object: [f64; 3] = add_noise(rng, &object, sigma).try_into().expect("3-vector");
    let noisy_ee: [f64; 3] = add_noise(rng, &ee, sigma).try_into().expect("3-vector");
    let (object_prev, ee_prev) = world.history.unwrap_or((noisy_object, noisy_ee));
    world.history = Some((noisy_object, noisy_ee));
    Observation {
        object: noisy_object,
        object_prev,
        ee: noisy_ee,
        ee_prev,
        base_velocity: [world.base.vx, world.base.vy],
        hand: match stage {
            Stage::Tracking => None,
            Stage::Catching => Some(world.hand.joints),
        },
    }
}

fn placeholder_world() -> World {
    let spec = ObjectSpec::default();
    World {
        base: BasePose::default(),
        arm_q: [0.0; 6],
        arm_cmd: [0.0; 6],
        ee_target: Vector3::zeros(),
        roll_target: 0.0,
        home_roll: 0.0,
        hand: HandState::open([0.0, 1.0], [0.0; 4]),
        object: ObjectState {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            spec,
            launched: false,
            held: false,
            grounded: false,
            launch_step: 0,
            attachment: None,
        },
        params: EnvParams {
            domain: sample_env_params(&mut ChaCha8Rng::seed_from_u64(0), &Default::default(), false),
            object: spec,
            release_position: [0.0; 3],
            release_velocity: [0.0; 3],
            flight_time: 0.0,
            landing: [0.0; 2],
        },
        palm: PalmState {
            position: Vector3::zeros(),
            rotation: Rotation3::from_matrix_unchecked(Matrix3::identity()),
            velocity: Vector3::zeros(),
        },
        step: 0,
        outcome: EpisodeOutcome {
            touched: false,
            caught: false,
            steps_held: 0,
            closest_distance: 0.0,
            fault: false,
        },
        done: true,
        ik_fallbacks: 0,
        pending_velocity: Vector3::zeros(),
        history: None,
    }
}
