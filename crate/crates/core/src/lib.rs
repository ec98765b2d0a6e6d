//! Crowd-navigation reinforcement-learning workbench.
//!
//! A seedable ORCA-driven pedestrian simulator, a social-attention graph
//! Q-network trained by deep Q-learning, a rollout planner that refines the
//! network's coarse action values with short model-based lookahead, and a
//! batch evaluation harness with trajectory and attention exports.

pub mod net;
pub mod seeds;
pub mod sim;
pub mod tensor;
pub mod training;
pub mod vec2;
