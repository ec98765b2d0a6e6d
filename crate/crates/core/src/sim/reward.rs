//! Reward shaping and step geometry.
//!
//! The per-step reward decomposes into a goal-progress term, a collision
//! penalty, and a safety-distance penalty. All three are pure functions of
//! the states around the step and the minimum robot-pedestrian separations
//! during it.

use crate::sim::state::{JointState, Status};
use crate::vec2::Vec2;

/// Reward granted on reaching the goal.
pub const REWARD_GOAL: f64 = 10.0;
/// Penalty applied on collision.
pub const REWARD_COLLISION: f64 = -2.5;
/// Safety buffer that pedestrians should be granted, in meters.
pub const DISCOMFORT_DISTANCE: f64 = 0.2;
/// Robot counts as arrived when within this distance of its goal.
pub const GOAL_TOLERANCE: f64 = 0.2;
/// Scale of the dense goal-progress shaping term.
const PROGRESS_GAIN: f64 = 0.1;

/// Exact minimum center distance between two agents moving at constant
/// velocity over `[0, dt]`, from the closed-form quadratic minimizer clamped
/// to the interval.
pub fn min_separation(p_a: Vec2, v_a: Vec2, p_b: Vec2, v_b: Vec2, dt: f64) -> f64 {
    let dp = p_a - p_b;
    let dv = v_a - v_b;
    let dv_sq = dv.norm_sq();
    let t = if dv_sq > 0.0 {
        (-dp.dot(dv) / dv_sq).clamp(0.0, dt)
    } else {
        0.0
    };
    (dp + dv * t).norm()
}

/// Goal term: the arrival bonus inside the goal tolerance, otherwise a dense
/// shaping proportional to the distance-to-goal decrease over the step.
pub fn goal_term(prev: &JointState, next: &JointState) -> f64 {
    if next.robot.distance_to_goal() < GOAL_TOLERANCE {
        REWARD_GOAL
    } else {
        PROGRESS_GAIN * (prev.robot.distance_to_goal() - next.robot.distance_to_goal())
    }
}

/// Collision term: fires when any pedestrian's minimum center separation
/// drops below the summed radii.
pub fn collision_term(next: &JointState, min_separations: &[f64]) -> f64 {
    if any_collision(next, min_separations) {
        REWARD_COLLISION
    } else {
        0.0
    }
}

/// Safety term: each pedestrian whose surface separation dipped under the
/// discomfort distance contributes `dt * (d_i - d_s) / 2`.
pub fn safety_term(next: &JointState, min_separations: &[f64], dt: f64) -> f64 {
    next.pedestrians
        .iter()
        .zip(min_separations)
        .map(|(ped, &sep)| {
            let d_i = sep - next.robot.radius - ped.radius;
            if d_i < DISCOMFORT_DISTANCE {
                dt * (d_i - DISCOMFORT_DISTANCE) / 2.0
            } else {
                0.0
            }
        })
        .sum()
}

fn any_collision(next: &JointState, min_separations: &[f64]) -> bool {
    next.pedestrians
        .iter()
        .zip(min_separations)
        .any(|(ped, &sep)| sep < next.robot.radius + ped.radius)
}

/// Whether any pedestrian's surface separation dipped under the discomfort
/// distance during the step (a "discomfort step", counted at most once).
pub fn is_discomfort_step(next: &JointState, min_separations: &[f64]) -> bool {
    next.pedestrians
        .iter()
        .zip(min_separations)
        .any(|(ped, &sep)| sep - next.robot.radius - ped.radius < DISCOMFORT_DISTANCE)
}

/// Full step reward and the resulting status. Collision is checked before
/// goal arrival so that safety events dominate when both trigger in one
/// step. Timeout is the episode clock's business, not the reward's.
pub fn compute_reward(
    prev: &JointState,
    next: &JointState,
    min_separations: &[f64],
    dt: f64,
) -> (f64, Status) {
    debug_assert_eq!(prev.pedestrian_count(), next.pedestrian_count());
    debug_assert_eq!(next.pedestrian_count(), min_separations.len());

    let reward = goal_term(prev, next)
        + collision_term(next, min_separations)
        + safety_term(next, min_separations, dt);

    let status = if any_collision(next, min_separations) {
        Status::Collision
    } else if next.robot.distance_to_goal() < GOAL_TOLERANCE {
        Status::ReachedGoal
    } else {
        Status::Running
    };

    (reward, status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::state::{Frame, FullState, ObservableState};
    use crate::vec2::vec2;

    fn state(robot_pos: Vec2, ped_positions: &[Vec2]) -> JointState {
        JointState {
            robot: FullState {
                position: robot_pos,
                velocity: Vec2::ZERO,
                radius: 0.3,
                goal: vec2(0.0, 4.0),
                preferred_speed: 1.0,
                heading: 0.0,
            },
            pedestrians: ped_positions
                .iter()
                .map(|&p| ObservableState {
                    position: p,
                    velocity: Vec2::ZERO,
                    radius: 0.3,
                })
                .collect(),
            frame: Frame::World,
        }
    }

    #[test]
    fn static_agents_keep_their_distance() {
        let d = min_separation(vec2(0.0, 0.0), Vec2::ZERO, vec2(1.0, 0.0), Vec2::ZERO, 0.25);
        assert_eq!(d, 1.0);
    }

    #[test]
    fn crossing_agents_reach_zero_separation() {
        // Both pass through the origin at t = 0.1.
        let d = min_separation(
            vec2(-0.1, 0.0),
            vec2(1.0, 0.0),
            vec2(0.0, -0.1),
            vec2(0.0, 1.0),
            0.25,
        );
        assert!(d < 1e-12, "expected 0, got {d}");
    }

    #[test]
    fn min_separation_never_exceeds_endpoints() {
        let (p_a, v_a) = (vec2(0.3, -0.2), vec2(0.9, 0.1));
        let (p_b, v_b) = (vec2(-0.5, 0.4), vec2(-0.3, -0.8));
        let dt = 0.25;
        let d = min_separation(p_a, v_a, p_b, v_b, dt);
        let at_start = (p_a - p_b).norm();
        let at_end = ((p_a + v_a * dt) - (p_b + v_b * dt)).norm();
        assert!(d <= at_start + 1e-15);
        assert!(d <= at_end + 1e-15);
    }

    #[test]
    fn goal_bonus_exact() {
        let prev = state(vec2(0.0, 3.0), &[]);
        let next = state(vec2(0.0, 3.9), &[]);
        let (r, status) = compute_reward(&prev, &next, &[], 0.25);
        assert_eq!(r, REWARD_GOAL);
        assert_eq!(status, Status::ReachedGoal);
    }

    #[test]
    fn progress_shaping_exact() {
        // 0.25 m closer to the goal, no pedestrians nearby.
        let prev = state(vec2(0.0, 0.0), &[vec2(3.0, 0.0)]);
        let next = state(vec2(0.0, 0.25), &[vec2(3.0, 0.0)]);
        let seps = [3.0];
        let (r, status) = compute_reward(&prev, &next, &seps, 0.25);
        assert!((r - 0.025).abs() < 1e-12);
        assert_eq!(status, Status::Running);
    }

    #[test]
    fn collision_penalty_exact() {
        let next = state(vec2(0.0, 0.0), &[vec2(0.5, 0.0)]);
        assert_eq!(collision_term(&next, &[0.5]), REWARD_COLLISION);
        assert_eq!(collision_term(&next, &[0.6]), 0.0);
    }

    #[test]
    fn safety_term_matches_hand_value() {
        // Surface separation d_i = 0.1 -> center separation 0.7.
        let next = state(vec2(0.0, 0.0), &[vec2(0.7, 0.0)]);
        let r_s = safety_term(&next, &[0.7], 0.25);
        assert!((r_s - (-0.0125)).abs() < 1e-15);
    }

    #[test]
    fn collision_takes_precedence_over_goal() {
        let prev = state(vec2(0.0, 3.0), &[vec2(0.0, 4.0)]);
        let next = state(vec2(0.0, 3.9), &[vec2(0.0, 4.0)]);
        let (_, status) = compute_reward(&prev, &next, &[0.1], 0.25);
        assert_eq!(status, Status::Collision);
    }

    #[test]
    fn reward_decomposes_into_terms() {
        let prev = state(vec2(0.0, 0.0), &[vec2(0.7, 0.0), vec2(-2.0, 1.0)]);
        let next = state(vec2(0.0, 0.2), &[vec2(0.7, 0.2), vec2(-2.0, 1.2)]);
        let seps = [0.65, 2.2];
        let dt = 0.25;
        let (r, _) = compute_reward(&prev, &next, &seps, dt);
        let total =
            goal_term(&prev, &next) + collision_term(&next, &seps) + safety_term(&next, &seps, dt);
        assert_eq!(r, total);
    }
}
