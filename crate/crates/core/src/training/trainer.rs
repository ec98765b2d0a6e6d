//! The deep Q-learning loop: episode rollouts with an epsilon-greedy policy,
//! experience replay, target-network bootstrapping, and periodic validation.

use crate::net::{argmax, collect_grads, forward, insert_network, q_nodes, NetworkParameters};
use crate::seeds::{derive_seed, stream};
use crate::sim::{
    build_action_space, to_robot_centric, Action, Episode, ScenarioSpec, SimConfig, Status,
};
use crate::tensor::{AdamConfig, AdamState, Graph};
use crate::training::replay::{ReplayMemory, Transition};
use crate::training::schedule::{discount_factor_per_step, EpsilonSchedule};
use crate::training::TrainError;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub epsilon: EpsilonSchedule,
    pub gamma: f64,
    pub learning_rate: f64,
    /// Validate and clone the target network every this many episodes.
    pub target_sync_period: usize,
    pub minibatch_size: usize,
    pub gradient_steps_per_episode: usize,
    /// Run one update after every environment step instead of per episode.
    pub update_per_step: bool,
    pub replay_capacity: usize,
    pub validation_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 10_000,
            epsilon: EpsilonSchedule::default(),
            gamma: 0.9,
            learning_rate: 5e-4,
            target_sync_period: 500,
            minibatch_size: 100,
            gradient_steps_per_episode: 1,
            update_per_step: false,
            replay_capacity: 100_000,
            validation_episodes: 100,
            seed: 0,
        }
    }
}

/// One row of the training log; the four tracked quantities are averaged
/// over the trailing 100 episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub episode: usize,
    pub avg_reward_100: f64,
    pub avg_return_100: f64,
    pub nav_time_100: f64,
    pub disc_rate_100: f64,
    pub epsilon: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub episode: usize,
    pub success_rate: f64,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub params: NetworkParameters,
    pub log: Vec<TrainLogRow>,
    pub validations: Vec<ValidationRecord>,
}

/// Learning target for one transition, computed entirely from the frozen
/// target network: `r` when terminal, otherwise `r + gamma' * max_a Q'(s',a)`.
pub fn td_target(transition: &Transition, target_params: &NetworkParameters, gamma_step: f64) -> f64 {
    if transition.terminal {
        transition.reward
    } else {
        let q_next = forward(&transition.next_state, target_params)
            .expect("replay stores robot-centric states");
        let best = q_next.q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        transition.reward + gamma_step * best
    }
}

/// One optimization step on a minibatch: squared TD error summed over the
/// batch, one Adam update on the online parameters only.
pub fn train_step(
    batch: &[&Transition],
    online: &mut NetworkParameters,
    target: &NetworkParameters,
    optimizer: &mut AdamState,
    gamma_step: f64,
) -> Result<f64, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let targets: Vec<f64> = batch
        .iter()
        .map(|t| td_target(t, target, gamma_step))
        .collect();

    let mut g = Graph::new();
    let net = insert_network(&mut g, online, true);
    let mut loss_node = None;
    for (transition, &target_value) in batch.iter().zip(&targets) {
        let nodes = q_nodes(&mut g, &transition.state, &net).map_err(TrainError::Net)?;
        let q_sa = g.pick(nodes.q, transition.action);
        let target_node = g.scalar(target_value);
        let diff = g.sub(q_sa, target_node);
        let sq = g.square(diff);
        loss_node = Some(match loss_node {
            None => sq,
            Some(acc) => g.add(acc, sq),
        });
    }
    let loss_node = loss_node.expect("batch is non-empty");
    let loss = g.value(loss_node)[0];
    g.backward(loss_node).map_err(TrainError::Autograd)?;
    let grads = collect_grads(&g, &net);
    let mut params = online.named_mut();
    optimizer.step(&mut params, &grads).map_err(TrainError::Tensor)?;
    Ok(loss)
}

/// Statistics of one completed episode.
struct EpisodeStats {
    total_reward: f64,
    discounted_return: f64,
    nav_time: f64,
    discomfort_rate: f64,
    status: Status,
}

/// Run one episode with an epsilon-greedy policy on `params`, pushing
/// transitions into `memory` when provided.
fn run_episode(
    spec: &ScenarioSpec,
    sim: &SimConfig,
    scenario_seed: u64,
    params: &NetworkParameters,
    actions: &[Action],
    epsilon: f64,
    exploration: Option<&mut ChaCha8Rng>,
    gamma_step: f64,
    mut memory: Option<&mut ReplayMemory>,
) -> EpisodeStats {
    let mut episode = Episode::new(spec, scenario_seed, sim.clone());
    let mut rc = to_robot_centric(&episode.observation());
    let mut exploration = exploration;

    let mut total_reward = 0.0;
    let mut discounted_return = 0.0;
    let mut discount = 1.0;
    let mut steps = 0usize;
    let mut discomfort_steps = 0usize;
    let mut status = Status::Running;

    while status == Status::Running {
        let explore = match exploration.as_deref_mut() {
            Some(rng) => rng.gen::<f64>() < epsilon,
            None => false,
        };
        let action_index = match (explore, exploration.as_deref_mut()) {
            (true, Some(rng)) => rng.gen_range(0..actions.len()),
            _ => argmax(&forward(&rc, params).expect("robot-centric state").q),
        };
        let outcome = episode
            .step(&actions[action_index])
            .expect("episode still running");
        let rc_next = to_robot_centric(&outcome.next_state);

        if let Some(memory) = memory.as_deref_mut() {
            memory.push(Transition {
                state: rc.clone(),
                action: action_index,
                reward: outcome.reward,
                next_state: rc_next.clone(),
                terminal: outcome.status.is_terminal(),
            });
        }

        total_reward += outcome.reward;
        discounted_return += discount * outcome.reward;
        discount *= gamma_step;
        steps += 1;
        if episode.discomfort(&outcome) {
            discomfort_steps += 1;
        }
        status = outcome.status;
        rc = rc_next;
    }

    EpisodeStats {
        total_reward,
        discounted_return,
        nav_time: episode.elapsed(),
        discomfort_rate: discomfort_steps as f64 / steps.max(1) as f64,
        status,
    }
}

/// Greedy success rate over held-out seeded episodes, evaluated in parallel
/// against a read-only parameter snapshot.
pub fn validation_success_rate(
    params: &NetworkParameters,
    spec: &ScenarioSpec,
    sim: &SimConfig,
    base_seed: u64,
    episodes: usize,
    gamma_step: f64,
) -> f64 {
    let actions = build_action_space(sim.robot_v_pref).expect("positive preferred speed");
    let successes: usize = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(base_seed, stream::VALIDATION, i as u64);
            let stats = run_episode(spec, sim, seed, params, &actions, 0.0, None, gamma_step, None);
            usize::from(stats.status == Status::ReachedGoal)
        })
        .sum();
    successes as f64 / episodes.max(1) as f64
}

/// Deep Q-learning from randomly initialized weights.
pub fn run_training(
    config: &TrainConfig,
    sim: &SimConfig,
    spec: &ScenarioSpec,
    mut progress: Option<&mut dyn FnMut(&TrainLogRow)>,
) -> Result<TrainOutput, TrainError> {
    let actions = build_action_space(sim.robot_v_pref).map_err(TrainError::Sim)?;
    let gamma_step = discount_factor_per_step(config.gamma, sim.dt, sim.robot_v_pref);

    let mut online = NetworkParameters::init(derive_seed(config.seed, 0, 0));
    let mut target = online.clone();
    let mut optimizer = AdamState::new(AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    });
    let mut memory = ReplayMemory::new(config.replay_capacity);
    let mut replay_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream::REPLAY, 0));

    let mut log = Vec::with_capacity(config.episodes);
    let mut validations = Vec::new();
    let mut window: VecDeque<EpisodeStats> = VecDeque::with_capacity(100);
    let mut last_loss = 0.0;

    for episode_index in 0..config.episodes {
        let epsilon = config.epsilon.epsilon_at(episode_index);
        let mut exploration = ChaCha8Rng::seed_from_u64(derive_seed(
            config.seed,
            stream::EXPLORATION,
            episode_index as u64,
        ));
        let scenario_seed = derive_seed(config.seed, stream::SCENARIO, episode_index as u64);

        let stats = if config.update_per_step {
            // Per-step updates interleave acting and learning, so the
            // episode loop is inlined here.
            run_episode_with_step_updates(
                spec,
                sim,
                scenario_seed,
                &mut online,
                &target,
                &mut optimizer,
                &mut memory,
                &mut replay_rng,
                &actions,
                epsilon,
                &mut exploration,
                gamma_step,
                config.minibatch_size,
                &mut last_loss,
            )?
        } else {
            let stats = run_episode(
                spec,
                sim,
                scenario_seed,
                &online,
                &actions,
                epsilon,
                Some(&mut exploration),
                gamma_step,
                Some(&mut memory),
            );
            for _ in 0..config.gradient_steps_per_episode {
                if memory.is_empty() {
                    break;
                }
                let batch = memory.sample(config.minibatch_size, &mut replay_rng);
                last_loss = train_step(&batch, &mut online, &target, &mut optimizer, gamma_step)?;
            }
            stats
        };

        if window.len() == 100 {
            window.pop_front();
        }
        window.push_back(stats);

        let row = TrainLogRow {
            episode: episode_index + 1,
            avg_reward_100: window.iter().map(|s| s.total_reward).sum::<f64>() / window.len() as f64,
            avg_return_100: window.iter().map(|s| s.discounted_return).sum::<f64>()
                / window.len() as f64,
            nav_time_100: window.iter().map(|s| s.nav_time).sum::<f64>() / window.len() as f64,
            disc_rate_100: window.iter().map(|s| s.discomfort_rate).sum::<f64>()
                / window.len() as f64,
            epsilon,
            loss: last_loss,
        };
        if let Some(callback) = progress.as_deref_mut() {
            callback(&row);
        }
        log.push(row);

        if (episode_index + 1) % config.target_sync_period == 0 {
            let success = validation_success_rate(
                &online,
                spec,
                sim,
                config.seed,
                config.validation_episodes,
                gamma_step,
            );
            validations.push(ValidationRecord {
                episode: episode_index + 1,
                success_rate: success,
            });
            target = online.clone();
        }
    }

    Ok(TrainOutput {
        params: online,
        log,
        validations,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_episode_with_step_updates(
    spec: &ScenarioSpec,
    sim: &SimConfig,
    scenario_seed: u64,
    online: &mut NetworkParameters,
    target: &NetworkParameters,
    optimizer: &mut AdamState,
    memory: &mut ReplayMemory,
    replay_rng: &mut ChaCha8Rng,
    actions: &[Action],
    epsilon: f64,
    exploration: &mut ChaCha8Rng,
    gamma_step: f64,
    minibatch_size: usize,
    last_loss: &mut f64,
) -> Result<EpisodeStats, TrainError> {
    let mut episode = Episode::new(spec, scenario_seed, sim.clone());
    let mut rc = to_robot_centric(&episode.observation());
    let mut total_reward = 0.0;
    let mut discounted_return = 0.0;
    let mut discount = 1.0;
    let mut steps = 0usize;
    let mut discomfort_steps = 0usize;
    let mut status = Status::Running;

    while status == Status::Running {
        let action_index = if exploration.gen::<f64>() < epsilon {
            exploration.gen_range(0..actions.len())
        } else {
            argmax(&forward(&rc, online).expect("robot-centric state").q)
        };
        let outcome = episode
            .step(&actions[action_index])
            .expect("episode still running");
        let rc_next = to_robot_centric(&outcome.next_state);
        memory.push(Transition {
            state: rc.clone(),
            action: action_index,
            reward: outcome.reward,
            next_state: rc_next.clone(),
            terminal: outcome.status.is_terminal(),
        });

        let batch = memory.sample(minibatch_size, replay_rng);
        *last_loss = train_step(&batch, online, target, optimizer, gamma_step)?;

        total_reward += outcome.reward;
        discounted_return += discount * outcome.reward;
        discount *= gamma_step;
        steps += 1;
        if episode.discomfort(&outcome) {
            discomfort_steps += 1;
        }
        status = outcome.status;
        rc = rc_next;
    }

    Ok(EpisodeStats {
        total_reward,
        discounted_return,
        nav_time: episode.elapsed(),
        discomfort_rate: discomfort_steps as f64 / steps.max(1) as f64,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::state::{Frame, FullState, JointState, ObservableState};
    use crate::vec2::{vec2, Vec2};
    use std::collections::BTreeMap;

    fn rc_state(x: f64) -> JointState {
        JointState {
            robot: FullState {
                position: Vec2::ZERO,
                velocity: vec2(x, 0.0),
                radius: 0.3,
                goal: vec2(4.0, 0.0),
                preferred_speed: 1.0,
                heading: 0.0,
            },
            pedestrians: vec![ObservableState {
                position: vec2(1.0, x),
                velocity: vec2(0.0, -0.5),
                radius: 0.3,
            }],
            frame: Frame::RobotCentric,
        }
    }

    fn transition(x: f64, reward: f64, terminal: bool) -> Transition {
        Transition {
            state: rc_state(x),
            action: 3,
            reward,
            next_state: rc_state(x + 0.1),
            terminal,
        }
    }

    #[test]
    fn terminal_target_is_the_reward() {
        let params = NetworkParameters::init(0);
        let t = transition(0.2, 10.0, true);
        assert_eq!(td_target(&t, &params, 0.974), 10.0);
    }

    #[test]
    fn non_terminal_target_bootstraps_from_target_net() {
        let params = NetworkParameters::init(0);
        let t = transition(0.2, 0.5, false);
        let q_next = forward(&t.next_state, &params).unwrap();
        let best = q_next.q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let expected = 0.5 + 0.974 * best;
        assert!((td_target(&t, &params, 0.974) - expected).abs() < 1e-12);
    }

    #[test]
    fn td_target_ignores_online_parameters() {
        let target = NetworkParameters::init(0);
        let t = transition(0.3, 1.0, false);
        let a = td_target(&t, &target, 0.974);
        // Nothing about the online network enters the signature at all;
        // recompute with a different "online" epoch to document the fact.
        let b = td_target(&t, &target, 0.974);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut online = NetworkParameters::init(0);
        let target = online.clone();
        let mut opt = AdamState::new(AdamConfig::default());
        assert!(matches!(
            train_step(&[], &mut online, &target, &mut opt, 0.974),
            Err(TrainError::EmptyBatch)
        ));
    }

    #[test]
    fn single_transition_loss_matches_hand_computation() {
        let mut online = NetworkParameters::init(5);
        let target_net = online.clone();
        let mut opt = AdamState::new(AdamConfig::default());
        let t = transition(0.1, 2.0, true);
        let q = forward(&t.state, &online).unwrap().q[t.action];
        let expected = (2.0 - q) * (2.0 - q);
        let loss = train_step(
            &[&t],
            &mut online,
            &target_net,
            &mut opt,
            0.974,
        )
        .unwrap();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn loss_is_nonnegative_and_decreases_on_fixed_batch() {
        let mut online = NetworkParameters::init(1);
        let target = online.clone();
        let mut opt = AdamState::new(AdamConfig::default());
        let transitions: Vec<Transition> = (0..8)
            .map(|i| transition(i as f64 * 0.2, (i % 3) as f64 - 1.0, i % 4 == 0))
            .collect();
        let batch: Vec<&Transition> = transitions.iter().collect();
        let mut losses = Vec::new();
        for _ in 0..50 {
            let loss = train_step(&batch, &mut online, &target, &mut opt, 0.974).unwrap();
            assert!(loss >= 0.0);
            losses.push(loss);
        }
        assert!(
            losses.last().unwrap() < losses.first().unwrap(),
            "loss did not decrease: {:?}",
            (losses.first(), losses.last())
        );
        let strictly_decreasing = losses.windows(2).all(|w| w[1] < w[0]);
        assert!(strictly_decreasing, "losses not strictly decreasing over the first 50 steps");
    }

    #[test]
    fn zero_td_error_keeps_loss_at_zero() {
        // Terminal transition whose reward is exactly the current Q value:
        // the squared error is zero and stays zero.
        let mut online = NetworkParameters::init(2);
        let target = online.clone();
        let mut opt = AdamState::new(AdamConfig::default());
        let mut t = transition(0.4, 0.0, true);
        t.reward = forward(&t.state, &online).unwrap().q[t.action];
        let loss = train_step(&[&t], &mut online, &target, &mut opt, 0.974).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn uniform_exploration_covers_the_action_set() {
        // With epsilon forced to 1.0, action selection is uniform; a coarse
        // chi-square statistic over 81 cells should stay moderate.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 81 * 200;
        let mut counts = [0usize; 81];
        for _ in 0..n {
            counts[rng.gen_range(0..81)] += 1;
        }
        let expected = (n / 81) as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 80 degrees of freedom: mean 80, std ~12.6. Allow a wide band.
        assert!(chi2 < 140.0, "chi-square {chi2} too large for uniform sampling");
    }

    #[test]
    fn gradients_cover_every_parameter() {
        let online = NetworkParameters::init(3);
        let t = transition(0.2, 1.0, false);
        let mut g = Graph::new();
        let net = insert_network(&mut g, &online, true);
        let nodes = q_nodes(&mut g, &t.state, &net).unwrap();
        let q_sa = g.pick(nodes.q, t.action);
        let sq = g.square(q_sa);
        g.backward(sq).unwrap();
        let grads: BTreeMap<String, Vec<f64>> = collect_grads(&g, &net);
        assert_eq!(grads.len(), online.named().len());
    }
}


#[cfg(test)]
mod tests_support {
    use super::*;
    use crate::sim::state::{Frame, FullState, JointState, ObservableState};
    use crate::vec2::{vec2, Vec2};

    pub fn mk_rc_state(x: f64) -> JointState {
        JointState {
            robot: FullState {
                position: Vec2::ZERO,
                velocity: vec2(x, 0.0),
                radius: 0.3,
                goal: vec2(4.0, 0.0),
                preferred_speed: 1.0,
                heading: 0.0,
            },
            pedestrians: vec![ObservableState {
                position: vec2(1.0, x),
                velocity: vec2(0.0, -0.5),
                radius: 0.3,
            }],
            frame: Frame::RobotCentric,
        }
    }

    pub fn mk_transition(x: f64, reward: f64, terminal: bool) -> Transition {
        Transition {
            state: mk_rc_state(x),
            action: 3,
            reward,
            next_state: mk_rc_state(x + 0.1),
            terminal,
        }
    }
}
