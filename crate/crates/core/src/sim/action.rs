//! The discrete holonomic action set.

use crate::sim::state::FullState;
use crate::sim::SimError;
use crate::vec2::{vec2, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const SPEED_LEVELS: usize = 5;
pub const HEADING_LEVELS: usize = 16;
/// Stop action plus every (speed, heading) combination.
pub const ACTION_COUNT: usize = 1 + SPEED_LEVELS * HEADING_LEVELS;

/// A velocity command: speed along a heading, both expressed in the
/// robot-centric frame (heading 0 points at the goal).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub speed: f64,
    pub heading: f64,
    pub index: usize,
}

impl Action {
    pub fn stop() -> Action {
        Action {
            speed: 0.0,
            heading: 0.0,
            index: 0,
        }
    }

    /// Velocity in the frame the heading is expressed in.
    pub fn velocity(&self) -> Vec2 {
        vec2(self.speed * self.heading.cos(), self.speed * self.heading.sin())
    }
}

/// Build the 81-element action set for a robot with preferred speed `v_pref`:
/// the stop action first, then speed-major over 5 speeds evenly spaced in
/// (0, v_pref] and 16 headings evenly spaced in [0, 2π).
pub fn build_action_space(v_pref: f64) -> Result<Vec<Action>, SimError> {
    if !(v_pref > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "preferred speed must be positive, got {v_pref}"
        )));
    }
    let mut actions = Vec::with_capacity(ACTION_COUNT);
    actions.push(Action::stop());
    for s in 1..=SPEED_LEVELS {
        let speed = v_pref * s as f64 / SPEED_LEVELS as f64;
        for h in 0..HEADING_LEVELS {
            let heading = TAU * h as f64 / HEADING_LEVELS as f64;
            actions.push(Action {
                speed,
                heading,
                index: actions.len(),
            });
        }
    }
    debug_assert_eq!(actions.len(), ACTION_COUNT);
    Ok(actions)
}

/// Rotation angle of the robot-centric frame: the world-frame direction from
/// the robot's current position to its goal. Identity when the robot sits
/// exactly on its goal.
pub fn goal_frame_rotation(robot: &FullState) -> f64 {
    (robot.goal - robot.position).angle()
}

/// World-frame velocity the robot executes for `action`, given that action
/// headings are relative to the current goal direction.
pub fn action_world_velocity(robot: &FullState, action: &Action) -> Vec2 {
    let rot = goal_frame_rotation(robot);
    action.velocity().rotated(rot)
}
