//! Optimal reciprocal collision avoidance.
//!
//! Each agent builds one half-plane constraint per neighbor in velocity
//! space and picks the feasible velocity closest to its preferred velocity
//! by incremental linear programming. When the constraints are jointly
//! infeasible, a secondary program returns the least-violating velocity.

use crate::sim::state::{FullState, ObservableState};
use crate::vec2::{vec2, Vec2};

const ORCA_EPSILON: f64 = 1e-10;

/// Half-plane constraint: valid velocities lie on the counter-clockwise
/// side of the line through `point` along `direction` (a unit vector).
#[derive(Clone, Copy, Debug)]
pub struct HalfPlane {
    pub point: Vec2,
    pub direction: Vec2,
}

/// Preferred velocity for an agent heading to its goal: full preferred speed
/// toward the goal, shortened so the agent lands exactly on the goal when it
/// is less than one step away.
pub fn preferred_velocity(agent: &FullState, dt: f64) -> Vec2 {
    let to_goal = agent.goal - agent.position;
    let dist = to_goal.norm();
    if dist <= agent.preferred_speed * dt {
        to_goal * (1.0 / dt)
    } else {
        to_goal * (agent.preferred_speed / dist)
    }
}

/// ORCA velocity for `agent` among `neighbors`.
///
/// `dt` is the simulation step (used to resolve already-overlapping agents),
/// `time_horizon` the window over which reciprocal avoidance is guaranteed.
/// The returned velocity satisfies every half-plane constraint and is
/// closest to [`preferred_velocity`]; with no feasible velocity the
/// least-violating one is returned instead.
pub fn orca_velocity(
    agent: &FullState,
    neighbors: &[ObservableState],
    dt: f64,
    time_horizon: f64,
) -> Vec2 {
    let pref = preferred_velocity(agent, dt);
    let max_speed = agent.preferred_speed;
    let lines: Vec<HalfPlane> = neighbors
        .iter()
        .map(|other| orca_line(agent, other, dt, time_horizon))
        .collect();

    let mut velocity = Vec2::ZERO;
    match linear_program_2(&lines, max_speed, pref, false, &mut velocity) {
        Ok(()) => velocity,
        Err(failed_index) => {
            linear_program_3(&lines, failed_index, max_speed, &mut velocity);
            velocity
        }
    }
}

/// Half-plane induced by one neighbor: the agent takes half of the smallest
/// velocity change `u` that moves the relative velocity out of the truncated
/// velocity obstacle, trusting the neighbor to take the other half.
fn orca_line(agent: &FullState, other: &ObservableState, dt: f64, time_horizon: f64) -> HalfPlane {
    let relative_position = other.position - agent.position;
    let relative_velocity = agent.velocity - other.velocity;
    let dist_sq = relative_position.norm_sq();
    let combined_radius = agent.radius + other.radius;
    let combined_radius_sq = combined_radius * combined_radius;

    let direction;
    let u;

    if dist_sq > combined_radius_sq {
        // Not currently colliding: constrain against the velocity obstacle
        // truncated at 1/time_horizon.
        let inv_horizon = 1.0 / time_horizon;
        let w = relative_velocity - relative_position * inv_horizon;
        let w_len_sq = w.norm_sq();
        let dot1 = w.dot(relative_position);

        if dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq {
            // Closest point lies on the cut-off circle.
            let w_len = w_len_sq.sqrt();
            let unit_w = w * (1.0 / w_len);
            direction = vec2(unit_w.y, -unit_w.x);
            u = unit_w * (combined_radius * inv_horizon - w_len);
        } else {
            // Closest point lies on one of the cone legs.
            let leg = (dist_sq - combined_radius_sq).sqrt();
            let dir = if relative_position.det(w) > 0.0 {
                vec2(
                    relative_position.x * leg - relative_position.y * combined_radius,
                    relative_position.x * combined_radius + relative_position.y * leg,
                ) * (1.0 / dist_sq)
            } else {
                vec2(
                    relative_position.x * leg + relative_position.y * combined_radius,
                    -relative_position.x * combined_radius + relative_position.y * leg,
                ) * (-1.0 / dist_sq)
            };
            direction = dir;
            u = dir * relative_velocity.dot(dir) - relative_velocity;
        }
    } else {
        // Already overlapping: push apart within one time step.
        let inv_dt = 1.0 / dt;
        let w = relative_velocity - relative_position * inv_dt;
        let w_len = w.norm();
        let unit_w = if w_len > ORCA_EPSILON {
            w * (1.0 / w_len)
        } else {
            // Exactly coincident states: pick a fixed separation direction.
            vec2(1.0, 0.0)
        };
        direction = vec2(unit_w.y, -unit_w.x);
        u = unit_w * (combined_radius * inv_dt - w_len);
    }

    HalfPlane {
        point: agent.velocity + u * 0.5,
        direction,
    }
}

/// Optimize along the boundary line of constraint `line_index`, subject to
/// all earlier constraints and the speed circle. Returns `Err(())` when that
/// segment is empty.
fn linear_program_1(
    lines: &[HalfPlane],
    line_index: usize,
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> Result<(), ()> {
    let line = lines[line_index];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.norm_sq();
    if discriminant < 0.0 {
        // The speed circle misses this line entirely.
        return Err(());
    }

    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for prev in &lines[..line_index] {
        let denominator = line.direction.det(prev.direction);
        let numerator = prev.direction.det(line.point - prev.point);

        if denominator.abs() <= ORCA_EPSILON {
            // Lines are parallel.
            if numerator < 0.0 {
                return Err(());
            }
            continue;
        }

        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return Err(());
        }
    }

    let t = if direction_opt {
        if opt_velocity.dot(line.direction) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        line.direction.dot(opt_velocity - line.point).clamp(t_left, t_right)
    };

    *result = line.point + line.direction * t;
    Ok(())
}

/// Incremental 2D program over all constraints within the speed circle.
/// Returns `Err(i)` with the index of the first unsatisfiable constraint.
fn linear_program_2(
    lines: &[HalfPlane],
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> Result<(), usize> {
    *result = if direction_opt {
        // opt_velocity is a unit direction in this mode.
        opt_velocity * radius
    } else if opt_velocity.norm_sq() > radius * radius {
        opt_velocity.normalized() * radius
    } else {
        opt_velocity
    };

    for (i, line) in lines.iter().enumerate() {
        if line.direction.det(line.point - *result) > 0.0 {
            let saved = *result;
            if linear_program_1(lines, i, radius, opt_velocity, direction_opt, result).is_err() {
                *result = saved;
                return Err(i);
            }
        }
    }
    Ok(())
}

/// Infeasible fallback: move all half-planes back at equal speed and return
/// the first velocity to become feasible, i.e. the least-violating velocity.
fn linear_program_3(lines: &[HalfPlane], begin_line: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;

    for i in begin_line..lines.len() {
        let line = lines[i];
        if line.direction.det(line.point - *result) > distance {
            let mut projected: Vec<HalfPlane> = Vec::with_capacity(i);
            for prev in &lines[..i] {
                let determinant = line.direction.det(prev.direction);
                let point = if determinant.abs() <= ORCA_EPSILON {
                    if line.direction.dot(prev.direction) > 0.0 {
                        // Same direction: satisfying `line` satisfies `prev`.
                        continue;
                    }
                    (line.point + prev.point) * 0.5
                } else {
                    line.point
                        + line.direction * (prev.direction.det(line.point - prev.point) / determinant)
                };
                projected.push(HalfPlane {
                    point,
                    direction: (prev.direction - line.direction).normalized(),
                });
            }

            let saved = *result;
            if linear_program_2(&projected, radius, line.direction.perp(), true, result).is_err() {
                // Only reachable through rounding; keep the previous value.
                *result = saved;
            }
            distance = line.direction.det(line.point - *result);
        }
    }
}
