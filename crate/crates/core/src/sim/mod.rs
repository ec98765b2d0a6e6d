//! Deterministic, seedable 2D crowd simulation: scenario generation, ORCA
//! pedestrian control, holonomic robot kinematics, reward computation, and
//! episode termination.

pub mod action;
pub mod episode;
pub mod frame;
pub mod orca;
pub mod reward;
pub mod scenario;
pub mod state;

pub use action::{action_world_velocity, build_action_space, Action, ACTION_COUNT};
pub use episode::{Episode, StepOutcome};
pub use frame::to_robot_centric;
pub use orca::{orca_velocity, preferred_velocity};
pub use reward::{compute_reward, min_separation};
pub use scenario::{generate_scenario, Scenario, ScenarioKind, ScenarioSpec};
pub use state::{Frame, FullState, JointState, ObservableState, Status};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulator constants. Defaults keep the 8 m crossing task well posed:
/// navigation takes on the order of ten seconds at unit preferred speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Simulation step length in seconds.
    pub dt: f64,
    /// Episode timeout in seconds.
    pub time_limit: f64,
    pub robot_radius: f64,
    pub robot_v_pref: f64,
    pub ped_radius: f64,
    pub ped_v_pref: f64,
    /// ORCA reciprocal-avoidance horizon in seconds.
    pub orca_time_horizon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.25,
            time_limit: 25.0,
            robot_radius: 0.3,
            robot_v_pref: 1.0,
            ped_radius: 0.3,
            ped_v_pref: 1.0,
            orca_time_horizon: 5.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("episode already finished with status {0:?}")]
    EpisodeFinished(Status),
}
