//! Scenario generation: where the robot and the crowd start and where they
//! are headed.

use crate::sim::state::{wrap_angle, FullState};
use crate::sim::SimConfig;
use crate::vec2::{vec2, Vec2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Five circle-crossing pedestrians.
    Simple,
    /// Five circle-crossing plus five square-crossing pedestrians.
    Complex,
}

impl ScenarioKind {
    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Simple => "simple",
            ScenarioKind::Complex => "complex",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(ScenarioKind::Simple),
            "complex" => Ok(ScenarioKind::Complex),
            other => Err(format!("unknown scenario kind `{other}` (expected simple|complex)")),
        }
    }
}

/// Crowd layout parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n_circle: usize,
    pub n_square: usize,
    pub circle_radius: f64,
    pub square_side: f64,
}

impl ScenarioSpec {
    pub fn simple() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Simple,
            n_circle: 5,
            n_square: 0,
            circle_radius: 4.0,
            square_side: 10.0,
        }
    }

    pub fn complex() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Complex,
            n_circle: 5,
            n_square: 5,
            circle_radius: 4.0,
            square_side: 10.0,
        }
    }

    pub fn for_kind(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Simple => Self::simple(),
            ScenarioKind::Complex => Self::complex(),
        }
    }

    pub fn pedestrian_count(&self) -> usize {
        self.n_circle + self.n_square
    }
}

/// A generated initial configuration: the robot's full state plus all
/// pedestrian full states (their goals and preferred speeds are the hidden
/// intents driving the crowd).
#[derive(Clone, Debug)]
pub struct Scenario {
    pub robot: FullState,
    pub pedestrians: Vec<FullState>,
}

/// Deterministically generate a scenario. Identical `(spec, seed)` pairs
/// yield bitwise-identical scenarios; the episode RNG for later goal
/// resampling must be seeded separately from the same seed.
pub fn generate_scenario(spec: &ScenarioSpec, seed: u64, config: &SimConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with_rng(spec, config, &mut rng)
}

pub(crate) fn generate_with_rng(
    spec: &ScenarioSpec,
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Scenario {
    let robot = FullState {
        position: vec2(0.0, -spec.circle_radius),
        velocity: Vec2::ZERO,
        radius: config.robot_radius,
        goal: vec2(0.0, spec.circle_radius),
        preferred_speed: config.robot_v_pref,
        heading: FRAC_PI_2,
    };

    let mut pedestrians: Vec<FullState> = Vec::with_capacity(spec.pedestrian_count());
    for _ in 0..spec.n_circle {
        let ped = place_circle_pedestrian(spec, config, &robot, &pedestrians, rng);
        pedestrians.push(ped);
    }
    for _ in 0..spec.n_square {
        let ped = place_square_pedestrian(spec, config, &robot, &pedestrians, rng);
        pedestrians.push(ped);
    }

    Scenario { robot, pedestrians }
}

/// Start on the circle with a small perturbation that breaks perfect
/// symmetry deadlocks; the goal is the antipode so the crossing happens near
/// the center. Rejection-sample until the placement is clear of everyone
/// already placed.
fn place_circle_pedestrian(
    spec: &ScenarioSpec,
    config: &SimConfig,
    robot: &FullState,
    placed: &[FullState],
    rng: &mut ChaCha8Rng,
) -> FullState {
    loop {
        let angle = rng.gen::<f64>() * TAU;
        let noise = vec2(
            (rng.gen::<f64>() - 0.5) * config.ped_v_pref,
            (rng.gen::<f64>() - 0.5) * config.ped_v_pref,
        );
        let position = vec2(
            spec.circle_radius * angle.cos(),
            spec.circle_radius * angle.sin(),
        ) + noise;
        let goal = -position;
        if placement_clear(position, goal, config, robot, placed) {
            return pedestrian_state(position, goal, config);
        }
    }
}

/// Start and goal sampled uniformly inside the square.
fn place_square_pedestrian(
    spec: &ScenarioSpec,
    config: &SimConfig,
    robot: &FullState,
    placed: &[FullState],
    rng: &mut ChaCha8Rng,
) -> FullState {
    let half = spec.square_side / 2.0;
    loop {
        let position = vec2(
            (rng.gen::<f64>() - 0.5) * 2.0 * half,
            (rng.gen::<f64>() - 0.5) * 2.0 * half,
        );
        let goal = vec2(
            (rng.gen::<f64>() - 0.5) * 2.0 * half,
            (rng.gen::<f64>() - 0.5) * 2.0 * half,
        );
        if placement_clear(position, goal, config, robot, placed) {
            return pedestrian_state(position, goal, config);
        }
    }
}

fn placement_clear(
    position: Vec2,
    goal: Vec2,
    config: &SimConfig,
    robot: &FullState,
    placed: &[FullState],
) -> bool {
    let others = std::iter::once(robot).chain(placed.iter());
    for other in others {
        let clearance = config.ped_radius + other.radius + crate::sim::reward::DISCOMFORT_DISTANCE;
        if position.distance(other.position) < clearance || goal.distance(other.goal) < clearance {
            return false;
        }
    }
    true
}

fn pedestrian_state(position: Vec2, goal: Vec2, config: &SimConfig) -> FullState {
    FullState {
        position,
        velocity: Vec2::ZERO,
        radius: config.ped_radius,
        goal,
        preferred_speed: config.ped_v_pref,
        heading: wrap_angle((goal - position).angle()),
    }
}

/// Fresh goal for a pedestrian that arrived: uniform inside the square.
pub(crate) fn resample_goal(square_side: f64, rng: &mut ChaCha8Rng) -> Vec2 {
    let half = square_side / 2.0;
    vec2(
        (rng.gen::<f64>() - 0.5) * 2.0 * half,
        (rng.gen::<f64>() - 0.5) * 2.0 * half,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_scenario_places_five_antipodal_pedestrians() {
        let config = SimConfig::default();
        let scenario = generate_scenario(&ScenarioSpec::simple(), 42, &config);
        assert_eq!(scenario.pedestrians.len(), 5);
        for ped in &scenario.pedestrians {
            // Start sits on the circle up to the +-0.5 m perturbation.
            let r = ped.position.norm();
            assert!((r - 4.0).abs() <= 0.5 * 2f64.sqrt() + 1e-9, "radius {r}");
            // The goal is the exact antipode of the perturbed start.
            assert_eq!(ped.goal, -ped.position);
        }
    }

    #[test]
    fn complex_scenario_has_ten_pedestrians() {
        let config = SimConfig::default();
        let scenario = generate_scenario(&ScenarioSpec::complex(), 7, &config);
        assert_eq!(scenario.pedestrians.len(), 10);
        let half = 5.0;
        for ped in &scenario.pedestrians[5..] {
            assert!(ped.position.x.abs() <= half && ped.position.y.abs() <= half);
            assert!(ped.goal.x.abs() <= half && ped.goal.y.abs() <= half);
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let config = SimConfig::default();
        let a = generate_scenario(&ScenarioSpec::complex(), 1234, &config);
        let b = generate_scenario(&ScenarioSpec::complex(), 1234, &config);
        assert_eq!(a.robot, b.robot);
        assert_eq!(a.pedestrians, b.pedestrians);
        let c = generate_scenario(&ScenarioSpec::complex(), 1235, &config);
        assert_ne!(a.pedestrians, c.pedestrians);
    }

    #[test]
    fn robot_spans_the_circle() {
        let config = SimConfig::default();
        let scenario = generate_scenario(&ScenarioSpec::simple(), 0, &config);
        assert_eq!(scenario.robot.position, vec2(0.0, -4.0));
        assert_eq!(scenario.robot.goal, vec2(0.0, 4.0));
    }
}
