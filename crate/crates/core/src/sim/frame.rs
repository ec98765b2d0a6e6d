//! Robot-centric coordinate transform.

use crate::sim::action::goal_frame_rotation;
use crate::sim::state::{wrap_angle, Frame, FullState, JointState, ObservableState};

/// Express `state` in robot-centric coordinates: the robot's position becomes
/// the origin and its goal lands on the non-negative x-axis. Velocities and
/// headings rotate with the frame, so relative geometry is preserved. When
/// the robot sits exactly on its goal the rotation is the identity.
pub fn to_robot_centric(state: &JointState) -> JointState {
    let rot = -goal_frame_rotation(&state.robot);
    let origin = state.robot.position;

    let robot = FullState {
        position: (state.robot.position - origin).rotated(rot),
        velocity: state.robot.velocity.rotated(rot),
        radius: state.robot.radius,
        goal: (state.robot.goal - origin).rotated(rot),
        preferred_speed: state.robot.preferred_speed,
        heading: wrap_angle(state.robot.heading + rot),
    };
    let pedestrians = state
        .pedestrians
        .iter()
        .map(|p| ObservableState {
            position: (p.position - origin).rotated(rot),
            velocity: p.velocity.rotated(rot),
            radius: p.radius,
        })
        .collect();

    JointState {
        robot,
        pedestrians,
        frame: Frame::RobotCentric,
    }
}
