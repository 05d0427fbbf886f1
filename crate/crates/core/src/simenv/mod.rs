//! Mobile-base catching environment: servo-lagged base, arm and hand, a
//! ballistic object and capture-based grasp adjudication.

mod config;
mod env;
mod object;
mod replay;
mod types;

pub use config::{ActionBox, ContactConfig, EnvConfig, HandConfig, LpfConfig, ServoConfig, WorkspaceConfig};
pub use env::{build_observation, detect_touch, update_hold, CatchEnv, EnvParams, PalmState, StepResult, World};
pub use object::{
    ballistic_landing, integrate_flight, launch_object, LauncherConfig, ObjectCatalog, ObjectClass, ObjectSpec,
    ObjectState, Shape, ShapeKind, Throw,
};
pub use replay::{read_jsonl, write_jsonl, ReplayRecord};
pub use types::{
    action_dim, Action, EpisodeOutcome, HandState, Observation, ARM_ACTION_DIM, FULL_ACTION_DIM, FULL_OBS_DIM,
    HAND_DOF, HAND_FIXED, ROLL_INDEX, TRACKING_OBS_DIM,
};
