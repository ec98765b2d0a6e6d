//! Agent state records and the joint crowd-robot state.

use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Everything known about an agent, including its hidden intent.
///
/// Only the robot's own full state is observable to the policy; for
/// pedestrians the goal, preferred speed, and heading stay inside the
/// simulator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub goal: Vec2,
    pub preferred_speed: f64,
    /// Heading angle in [0, 2π).
    pub heading: f64,
}

impl FullState {
    pub fn observable(&self) -> ObservableState {
        ObservableState {
            position: self.position,
            velocity: self.velocity,
            radius: self.radius,
        }
    }

    pub fn distance_to_goal(&self) -> f64 {
        self.position.distance(self.goal)
    }
}

/// The part of an agent's state every other agent can perceive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Coordinate frame a [`JointState`] is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    World,
    /// Robot at the origin, robot goal on the non-negative x-axis.
    RobotCentric,
}

/// Robot full state plus all pedestrian observable states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub robot: FullState,
    pub pedestrians: Vec<ObservableState>,
    pub frame: Frame,
}

impl JointState {
    pub fn pedestrian_count(&self) -> usize {
        self.pedestrians.len()
    }
}

/// Episode status after a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    ReachedGoal,
    Collision,
    Timeout,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::ReachedGoal => "reached_goal",
            Status::Collision => "collision",
            Status::Timeout => "timeout",
        }
    }
}

/// Wrap an angle into [0, 2π).
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = theta.rem_euclid(TAU);
    if wrapped == TAU {
        0.0
    } else {
        wrapped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        for theta in [-7.0, -3.2, 0.0, 1.0, 6.2832, 100.0] {
            let w = wrap_angle(theta);
            assert!((0.0..TAU).contains(&w), "{theta} wrapped to {w}");
        }
    }
}
