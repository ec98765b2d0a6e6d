//! Exploration schedule and the speed-normalized discount.

use serde::{Deserialize, Serialize};

/// Linear epsilon decay over the first `decay_episodes`, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: usize,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 0.5,
            end: 0.1,
            decay_episodes: 5000,
        }
    }
}

impl EpsilonSchedule {
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        if episode >= self.decay_episodes {
            self.end
        } else {
            let t = episode as f64 / self.decay_episodes as f64;
            self.start + (self.end - self.start) * t
        }
    }
}

/// Per-step discount `gamma^(dt * v_pref)`: the exponent is travel distance
/// at preferred speed, so discounting is invariant to the step length.
pub fn discount_factor_per_step(gamma: f64, dt: f64, v_pref: f64) -> f64 {
    gamma.powf(dt * v_pref)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.epsilon_at(0), 0.5);
        assert!((s.epsilon_at(2500) - 0.3).abs() < 1e-12);
        assert_eq!(s.epsilon_at(5000), 0.1);
        assert_eq!(s.epsilon_at(123_456), 0.1);
    }

    #[test]
    fn epsilon_stays_in_range() {
        let s = EpsilonSchedule::default();
        for episode in (0..20_000).step_by(37) {
            let eps = s.epsilon_at(episode);
            assert!((0.1..=0.5).contains(&eps), "episode {episode}: {eps}");
        }
    }

    #[test]
    fn discount_matches_direct_arithmetic() {
        // 0.9^0.25, computed independently through exp/ln.
        let expected = (0.25 * 0.9f64.ln()).exp();
        let got = discount_factor_per_step(0.9, 0.25, 1.0);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.97400).abs() < 5e-6);
    }

    #[test]
    fn unit_exponent_recovers_gamma() {
        assert!((discount_factor_per_step(0.9, 0.5, 2.0) - 0.9).abs() < 1e-15);
        assert_eq!(discount_factor_per_step(0.9, 0.0, 1.0), 1.0);
    }
}
