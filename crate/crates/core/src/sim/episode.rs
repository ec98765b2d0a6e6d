//! Episode stepping: holonomic robot, ORCA crowd, reward, termination.

use crate::sim::action::{action_world_velocity, Action};
use crate::sim::orca::orca_velocity;
use crate::sim::reward::{compute_reward, is_discomfort_step, min_separation};
use crate::sim::scenario::{generate_with_rng, resample_goal, Scenario, ScenarioSpec};
use crate::sim::state::{wrap_angle, Frame, FullState, JointState, ObservableState, Status};
use crate::sim::{SimConfig, SimError};
use crate::vec2::Vec2;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of advancing the episode one step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// World-frame joint state after the step.
    pub next_state: JointState,
    pub reward: f64,
    pub status: Status,
    /// Minimum center distance to each pedestrian during the step.
    pub min_separations: Vec<f64>,
}

/// One pedestrian plus its goal history.
#[derive(Clone, Debug)]
struct Pedestrian {
    state: FullState,
    /// Goals already consumed, recorded when a fresh one is sampled.
    turning_points: Vec<Vec2>,
}

/// A single episode of the crowd simulation.
///
/// Pedestrians follow ORCA against each other only: the robot is invisible
/// to them, so it bears the full avoidance burden. All randomness (placement
/// and goal resampling) flows through one seeded generator, making episodes
/// a deterministic function of `(spec, seed)` and the action sequence.
#[derive(Clone, Debug)]
pub struct Episode {
    config: SimConfig,
    square_side: f64,
    robot: FullState,
    pedestrians: Vec<Pedestrian>,
    elapsed: f64,
    status: Status,
    rng: ChaCha8Rng,
}

impl Episode {
    pub fn new(spec: &ScenarioSpec, seed: u64, config: SimConfig) -> Episode {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Scenario { robot, pedestrians } = generate_with_rng(spec, &config, &mut rng);
        Episode {
            config,
            square_side: spec.square_side,
            robot,
            pedestrians: pedestrians
                .into_iter()
                .map(|state| Pedestrian {
                    state,
                    turning_points: Vec::new(),
                })
                .collect(),
            elapsed: 0.0,
            status: Status::Running,
            rng,
        }
    }

    /// Start from an explicit configuration (useful for constructed tests).
    pub fn from_scenario(scenario: Scenario, square_side: f64, seed: u64, config: SimConfig) -> Episode {
        Episode {
            config,
            square_side,
            robot: scenario.robot,
            pedestrians: scenario
                .pedestrians
                .into_iter()
                .map(|state| Pedestrian {
                    state,
                    turning_points: Vec::new(),
                })
                .collect(),
            elapsed: 0.0,
            status: Status::Running,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn robot(&self) -> &FullState {
        &self.robot
    }

    /// Hidden pedestrian intents, exposed for trajectory export and model
    /// diagnostics only; policies must use [`Episode::observation`].
    pub fn pedestrian_full_states(&self) -> Vec<FullState> {
        self.pedestrians.iter().map(|p| p.state).collect()
    }

    pub fn turning_points(&self, pedestrian: usize) -> &[Vec2] {
        &self.pedestrians[pedestrian].turning_points
    }

    /// What the robot can see: its own full state and every pedestrian's
    /// observable state, in the world frame.
    pub fn observation(&self) -> JointState {
        JointState {
            robot: self.robot,
            pedestrians: self.pedestrians.iter().map(|p| p.state.observable()).collect(),
            frame: Frame::World,
        }
    }

    /// Advance one step: the robot executes `action`, every pedestrian its
    /// ORCA velocity. Returns the reward, the resulting status, and the
    /// per-pedestrian minimum separations used for both.
    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, SimError> {
        if self.status.is_terminal() {
            return Err(SimError::EpisodeFinished(self.status));
        }
        let dt = self.config.dt;
        let prev = self.observation();

        let robot_velocity = action_world_velocity(&self.robot, action);
        let ped_velocities = self.pedestrian_velocities();

        let min_separations: Vec<f64> = self
            .pedestrians
            .iter()
            .zip(&ped_velocities)
            .map(|(ped, &v)| {
                min_separation(self.robot.position, robot_velocity, ped.state.position, v, dt)
            })
            .collect();

        self.robot.position += robot_velocity * dt;
        self.robot.velocity = robot_velocity;
        if robot_velocity.norm_sq() > 0.0 {
            self.robot.heading = wrap_angle(robot_velocity.angle());
        }
        for (ped, &v) in self.pedestrians.iter_mut().zip(&ped_velocities) {
            ped.state.position += v * dt;
            ped.state.velocity = v;
            if v.norm_sq() > 0.0 {
                ped.state.heading = wrap_angle(v.angle());
            }
        }
        self.elapsed += dt;

        // Arrived pedestrians turn toward a fresh goal inside the square.
        for ped in &mut self.pedestrians {
            if ped.state.distance_to_goal() < ped.state.radius {
                let old_goal = ped.state.goal;
                ped.turning_points.push(old_goal);
                ped.state.goal = resample_goal(self.square_side, &mut self.rng);
            }
        }

        let next = self.observation();
        let (reward, mut status) = compute_reward(&prev, &next, &min_separations, dt);
        if status == Status::Running && self.elapsed >= self.config.time_limit {
            status = Status::Timeout;
        }
        self.status = status;

        Ok(StepOutcome {
            next_state: next,
            reward,
            status,
            min_separations,
        })
    }

    /// ORCA velocities for all pedestrians, each ignoring the robot.
    pub fn pedestrian_velocities(&self) -> Vec<Vec2> {
        (0..self.pedestrians.len())
            .map(|i| {
                let neighbors: Vec<ObservableState> = self
                    .pedestrians
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, p)| p.state.observable())
                    .collect();
                orca_velocity(
                    &self.pedestrians[i].state,
                    &neighbors,
                    self.config.dt,
                    self.config.orca_time_horizon,
                )
            })
            .collect()
    }

    /// Whether this step's separations count as a discomfort step.
    pub fn discomfort(&self, outcome: &StepOutcome) -> bool {
        is_discomfort_step(&outcome.next_state, &outcome.min_separations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::action::build_action_space;
    use crate::vec2::vec2;

    fn empty_scenario(config: &SimConfig) -> Scenario {
        Scenario {
            robot: FullState {
                position: vec2(0.0, -4.0),
                velocity: Vec2::ZERO,
                radius: config.robot_radius,
                goal: vec2(0.0, 4.0),
                preferred_speed: config.robot_v_pref,
                heading: std::f64::consts::FRAC_PI_2,
            },
            pedestrians: vec![],
        }
    }

    #[test]
    fn holonomic_integration() {
        let config = SimConfig::default();
        let mut scenario = empty_scenario(&config);
        scenario.robot.position = vec2(0.0, 0.0);
        scenario.robot.goal = vec2(10.0, 0.0);
        let mut episode = Episode::from_scenario(scenario, 10.0, 0, config);
        // Heading 0 in the goal frame points along +x here.
        let action = Action {
            speed: 1.0,
            heading: 0.0,
            index: 80,
        };
        let outcome = episode.step(&action).unwrap();
        let p = outcome.next_state.robot.position;
        assert!((p.x - 0.25).abs() < 1e-12);
        assert!(p.y.abs() < 1e-12);
    }

    #[test]
    fn straight_line_reaches_goal_at_eight_seconds() {
        let config = SimConfig::default();
        let mut episode = Episode::from_scenario(empty_scenario(&config), 10.0, 0, config);
        let actions = build_action_space(1.0).unwrap();
        // Full speed at the goal: last speed block, heading 0.
        let full_speed_ahead = actions
            .iter()
            .find(|a| a.speed == 1.0 && a.heading == 0.0)
            .copied()
            .unwrap();
        let mut last = None;
        for _ in 0..200 {
            let outcome = episode.step(&full_speed_ahead).unwrap();
            let done = outcome.status.is_terminal();
            last = Some(outcome);
            if done {
                break;
            }
        }
        let outcome = last.unwrap();
        assert_eq!(outcome.status, Status::ReachedGoal);
        let t = episode.elapsed();
        assert!((7.75..=8.0).contains(&t), "reached goal at {t}");
        assert_eq!(outcome.reward, 10.0);
    }

    #[test]
    fn timeout_after_time_limit() {
        let config = SimConfig::default();
        let mut episode = Episode::from_scenario(empty_scenario(&config), 10.0, 0, config.clone());
        let stop = Action::stop();
        let mut status = Status::Running;
        let mut steps = 0;
        while status == Status::Running {
            status = episode.step(&stop).unwrap().status;
            steps += 1;
            assert!(steps <= 1 + (config.time_limit / config.dt) as usize);
        }
        assert_eq!(status, Status::Timeout);
        assert!((episode.elapsed() - config.time_limit).abs() < 1e-9);
    }

    #[test]
    fn stepping_finished_episode_errors() {
        let config = SimConfig::default();
        let mut scenario = empty_scenario(&config);
        scenario.robot.position = vec2(0.0, 3.9);
        let mut episode = Episode::from_scenario(scenario, 10.0, 0, config);
        let stop = Action::stop();
        let outcome = episode.step(&stop).unwrap();
        assert_eq!(outcome.status, Status::ReachedGoal);
        assert!(matches!(
            episode.step(&stop),
            Err(SimError::EpisodeFinished(Status::ReachedGoal))
        ));
    }

    #[test]
    fn pedestrians_get_new_goals_on_arrival() {
        let config = SimConfig::default();
        let mut scenario = empty_scenario(&config);
        scenario.pedestrians.push(FullState {
            position: vec2(2.0, 0.0),
            velocity: Vec2::ZERO,
            radius: config.ped_radius,
            goal: vec2(2.0, 0.2),
            preferred_speed: config.ped_v_pref,
            heading: 0.0,
        });
        let mut episode = Episode::from_scenario(scenario, 10.0, 3, config);
        let stop = Action::stop();
        episode.step(&stop).unwrap();
        let ped = &episode.pedestrian_full_states()[0];
        assert_eq!(episode.turning_points(0), &[vec2(2.0, 0.2)]);
        assert_ne!(ped.goal, vec2(2.0, 0.2));
    }
}
