//! Ground-truth kernel as explicit per-step probability tables.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_initial_dist, check_probability_row, simplex_point, Mdp};
use crate::Result;

/// Finite episodic MDP with explicit transition and reward tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    /// `P_h(s'|s,a)`, indexed `((h * S + s) * A + a) * S + s'`.
    transitions: Vec<f64>,
    /// `r_h(s,a)` in `[0,1]`, indexed `(h * S + s) * A + a`.
    rewards: Vec<f64>,
    initial_dist: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        assert!(num_states >= 1 && num_actions >= 1 && horizon >= 1);
        assert_eq!(transitions.len(), horizon * num_states * num_actions * num_states);
        assert_eq!(rewards.len(), horizon * num_states * num_actions);
        assert_eq!(initial_dist.len(), num_states);

        let env = TabularMdp {
            num_states,
            num_actions,
            horizon,
            transitions,
            rewards,
            initial_dist,
        };
        for h in 0..horizon {
            for s in 0..num_states {
                for a in 0..num_actions {
                    let row = env.row(h, s, a);
                    check_probability_row(row, h, s, a)?;
                    let r = env.rewards[(h * num_states + s) * num_actions + a];
                    if !(-1e-12..=1.0 + 1e-12).contains(&r) {
                        return Err(crate::Error::RewardOutOfRange { h, s, a, value: r });
                    }
                }
            }
        }
        check_initial_dist(&env.initial_dist)?;
        Ok(env)
    }

    /// Random valid instance: simplex-sampled rows, uniform rewards.
    /// Deterministic in `seed`.
    pub fn random(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut transitions = Vec::with_capacity(horizon * num_states * num_actions * num_states);
        let mut rewards = Vec::with_capacity(horizon * num_states * num_actions);
        for _ in 0..horizon {
            for _ in 0..num_states {
                for _ in 0..num_actions {
                    transitions.extend(simplex_point(&mut rng, num_states));
                    rewards.push(rand::Rng::random::<f64>(&mut rng));
                }
            }
        }
        let initial_dist = simplex_point(&mut rng, num_states);
        TabularMdp::new(num_states, num_actions, horizon, transitions, rewards, initial_dist)
    }

    fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let base = ((h * self.num_states + s) * self.num_actions + a) * self.num_states;
        &self.transitions[base..base + self.num_states]
    }
}

impl Mdp for TabularMdp {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn transition_prob(&self, h: usize, s: usize, a: usize, s2: usize) -> f64 {
        assert!(h < self.horizon && s < self.num_states && a < self.num_actions && s2 < self.num_states,
            "index out of range: (h={h}, s={s}, a={a}, s'={s2})");
        self.row(h, s, a)[s2].clamp(0.0, 1.0)
    }

    fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        assert!(h < self.horizon && s < self.num_states && a < self.num_actions,
            "index out of range: (h={h}, s={s}, a={a})");
        self.rewards[(h * self.num_states + s) * self.num_actions + a].clamp(0.0, 1.0)
    }

    fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized_row() {
        let err = TabularMdp::new(
            1,
            1,
            1,
            vec![0.5],
            vec![0.2],
            vec![1.0],
        );
        assert!(matches!(err, Err(crate::Error::BadProbabilityRow { .. })));
    }

    #[test]
    fn random_is_deterministic_in_seed() {
        let a = TabularMdp::random(3, 2, 3, 7).unwrap();
        let b = TabularMdp::random(3, 2, 3, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = TabularMdp::random(3, 2, 3, 8).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn sampler_consistent_with_rows() {
        let env = TabularMdp::random(3, 2, 2, 1).unwrap();
        // u just below each cumulative boundary lands on that state.
        let row = env.transition_row(0, 1, 1);
        let mut acc = 0.0;
        for (s2, p) in row.iter().enumerate() {
            if *p > 1e-9 {
                assert_eq!(env.sample_next_state(0, 1, 1, acc + p / 2.0), s2);
            }
            acc += p;
        }
    }

    #[test]
    #[should_panic(expected = "index out of range")]
    fn out_of_range_transition_panics() {
        let env = TabularMdp::random(2, 2, 2, 0).unwrap();
        env.transition_prob(0, 0, 0, 5);
    }
}
