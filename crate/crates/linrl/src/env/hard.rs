//! Escape-chain family of gap-separated instances.
//!
//! States form a chain `s_0 -> s_1 -> ... -> s_{H-1}` followed by two
//! absorbing states: a dead state (index `H`, reward 0) and a reward state
//! (index `H+1`, reward 1 for every action). From any chain state, an action
//! `a in {-1,+1}^{d-1}` escapes to the reward state with probability
//! `delta + <mu_h, a>` and otherwise advances along the chain; running off
//! the chain end lands in the dead state. Since `mu_h` has entries
//! `+/- delta_gap`, the best action is the sign pattern of `mu_h` and the
//! minimal positive action gap is exactly `2 * delta_gap`.
//!
//! The same kernel is exposed as a tabular MDP, a linear MDP (block
//! state-indicator features), and a linear mixture MDP (shared `(1, a)`
//! features with `theta_h = sqrt(d) * (1, mu_h)`), all agreeing to within
//! 1e-12.

use serde::{Deserialize, Serialize};

use super::{ConstructionTag, LinearMdpEnv, LinearMixtureEnv, Mdp, TabularMdp};
use crate::{Error, Result};

const FEASIBILITY_SLACK: f64 = 1e-12;

/// Parameters of the escape-chain construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceSpec {
    /// Mixture dimension `d >= 2`; the action space is `{-1,+1}^(d-1)`.
    pub dim: usize,
    /// Episode length `H >= 3`.
    pub horizon: usize,
    /// Gap parameter `delta_gap > 0`; the minimal action gap is `2 * delta_gap`.
    pub gap_delta: f64,
    /// Base escape probability; must satisfy
    /// `3 (d-1) delta_gap <= escape_prob <= 1/3`.
    pub escape_prob: f64,
    /// Per-step sign pattern of `mu_h` (entries +/-1, `horizon` rows of
    /// length `d-1`).
    pub mu_signs: Vec<Vec<i8>>,
}

impl HardInstanceSpec {
    /// Spec with `escape_prob = 1/horizon` and an alternating `(+, -, +, ...)`
    /// sign pattern repeated across steps.
    pub fn new(dim: usize, horizon: usize, gap_delta: f64) -> Result<Self> {
        let escape_prob = 1.0 / horizon as f64;
        let signs: Vec<i8> = (0..dim.saturating_sub(1))
            .map(|j| if j % 2 == 0 { 1 } else { -1 })
            .collect();
        let spec = HardInstanceSpec {
            dim,
            horizon,
            gap_delta,
            escape_prob,
            mu_signs: vec![signs; horizon],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_escape_prob(mut self, escape_prob: f64) -> Result<Self> {
        self.escape_prob = escape_prob;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mu_signs(mut self, mu_signs: Vec<Vec<i8>>) -> Result<Self> {
        self.mu_signs = mu_signs;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.dim > 16 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: format!("must be in [2, 16], got {}", self.dim),
            });
        }
        if self.horizon < 3 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be at least 3, got {}", self.horizon),
            });
        }
        if !(self.gap_delta > 0.0 && self.gap_delta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gap_delta",
                reason: format!("must be positive, got {}", self.gap_delta),
            });
        }
        let margin = 3.0 * (self.dim - 1) as f64 * self.gap_delta;
        if margin > self.escape_prob + FEASIBILITY_SLACK
            || self.escape_prob > 1.0 / 3.0 + FEASIBILITY_SLACK
        {
            return Err(Error::InfeasibleHardInstance {
                margin,
                escape_prob: self.escape_prob,
            });
        }
        if self.mu_signs.len() != self.horizon
            || self
                .mu_signs
                .iter()
                .any(|row| row.len() != self.dim - 1 || row.iter().any(|&s| s != 1 && s != -1))
        {
            return Err(Error::InvalidParameter {
                name: "mu_signs",
                reason: "need `horizon` rows of length d-1 with entries +/-1".into(),
            });
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.horizon + 2
    }

    pub fn num_actions(&self) -> usize {
        1 << (self.dim - 1)
    }

    /// Index of the dead absorbing state.
    pub fn dead_state(&self) -> usize {
        self.horizon
    }

    /// Index of the absorbing reward state.
    pub fn reward_state(&self) -> usize {
        self.horizon + 1
    }

    /// Sign vector of action `index`: bit `j` set means coordinate `j` is +1.
    pub fn action_vector(&self, index: usize) -> Vec<f64> {
        assert!(index < self.num_actions(), "action index out of range");
        (0..self.dim - 1)
            .map(|j| if index >> j & 1 == 1 { 1.0 } else { -1.0 })
            .collect()
    }

    /// `mu_h = gap_delta * signs_h`.
    pub fn mu(&self, h: usize) -> Vec<f64> {
        self.mu_signs[h].iter().map(|&s| s as f64 * self.gap_delta).collect()
    }

    /// The action matching the sign pattern of `mu_h` (the unique optimizer
    /// at steps with a positive gap).
    pub fn optimal_action(&self, h: usize) -> usize {
        self.mu_signs[h]
            .iter()
            .enumerate()
            .map(|(j, &s)| if s > 0 { 1 << j } else { 0 })
            .sum()
    }

    /// `delta + <mu_h, a>` for action index `a`.
    pub fn escape_probability(&self, h: usize, action: usize) -> f64 {
        let a = self.action_vector(action);
        let mu = self.mu(h);
        self.escape_prob + super::dot(&mu, &a)
    }
}

/// All three views of one escape-chain instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HardInstance {
    pub spec: HardInstanceSpec,
    pub tabular: TabularMdp,
    pub linear: LinearMdpEnv,
    pub mixture: LinearMixtureEnv,
}

/// Build the tabular kernel plus exactly-matching linear and mixture views.
pub fn make_hard_instance(spec: &HardInstanceSpec) -> Result<HardInstance> {
    spec.validate()?;
    let tabular = build_tabular(spec)?;
    let linear = build_linear_view(spec)?;
    let mixture = build_mixture_view(spec)?;

    let worst = view_deviation(&tabular, &linear).max(view_deviation(&tabular, &mixture));
    assert!(
        worst <= 1e-12,
        "linear views deviate from the tabular kernel by {worst}"
    );

    Ok(HardInstance {
        spec: spec.clone(),
        tabular,
        linear,
        mixture,
    })
}

fn view_deviation(tab: &TabularMdp, view: &impl Mdp) -> f64 {
    let mut worst = 0.0f64;
    for h in 0..tab.horizon() {
        for s in 0..tab.num_states() {
            for a in 0..tab.num_actions() {
                for s2 in 0..tab.num_states() {
                    let d = (tab.transition_prob(h, s, a, s2) - view.transition_prob(h, s, a, s2)).abs();
                    worst = worst.max(d);
                }
                worst = worst.max((tab.reward(h, s, a) - view.reward(h, s, a)).abs());
            }
        }
    }
    worst
}

fn build_tabular(spec: &HardInstanceSpec) -> Result<TabularMdp> {
    let ns = spec.num_states();
    let na = spec.num_actions();
    let horizon = spec.horizon;
    let dead = spec.dead_state();
    let reward_state = spec.reward_state();

    let mut transitions = vec![0.0; horizon * ns * na * ns];
    let mut rewards = vec![0.0; horizon * ns * na];
    let idx = |h: usize, s: usize, a: usize, s2: usize| ((h * ns + s) * na + a) * ns + s2;

    for h in 0..horizon {
        for a in 0..na {
            let escape = spec.escape_probability(h, a);
            for c in 0..horizon {
                transitions[idx(h, c, a, c + 1)] = 1.0 - escape;
                transitions[idx(h, c, a, reward_state)] = escape;
            }
            transitions[idx(h, dead, a, dead)] = 1.0;
            transitions[idx(h, reward_state, a, reward_state)] = 1.0;
            rewards[(h * ns + reward_state) * na + a] = 1.0;
        }
    }

    let mut initial = vec![0.0; ns];
    initial[0] = 1.0;
    TabularMdp::new(ns, na, horizon, transitions, rewards, initial)
}

/// Linear view: `phi(s,a)` places `(1, a)/sqrt(d)` in the block of state `s`,
/// and the measures hold the matching `sqrt(d)`-scaled parameters, so every
/// inner product reproduces the kernel exactly and `||phi|| = 1`.
fn build_linear_view(spec: &HardInstanceSpec) -> Result<LinearMdpEnv> {
    let ns = spec.num_states();
    let na = spec.num_actions();
    let horizon = spec.horizon;
    let d = spec.dim;
    let dim = ns * d;
    let sqrt_d = (d as f64).sqrt();
    let dead = spec.dead_state();
    let reward_state = spec.reward_state();

    let mut features = vec![0.0; ns * na * dim];
    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * dim + s * d;
            features[base] = 1.0 / sqrt_d;
            for (j, v) in spec.action_vector(a).iter().enumerate() {
                features[base + 1 + j] = v / sqrt_d;
            }
        }
    }

    let mut measures = vec![0.0; horizon * ns * dim];
    let mut block = |h: usize, s2: usize, s: usize| -> usize { (h * ns + s2) * dim + s * d };
    for h in 0..horizon {
        let mu = spec.mu(h);
        for c in 0..horizon {
            // Advancing along the chain: 1 - delta - <mu_h, a>.
            let b = block(h, c + 1, c);
            measures[b] = sqrt_d * (1.0 - spec.escape_prob);
            for (j, &m) in mu.iter().enumerate() {
                measures[b + 1 + j] = -sqrt_d * m;
            }
            // Escaping to the reward state: delta + <mu_h, a>.
            let b = block(h, reward_state, c);
            measures[b] = sqrt_d * spec.escape_prob;
            for (j, &m) in mu.iter().enumerate() {
                measures[b + 1 + j] = sqrt_d * m;
            }
        }
        measures[block(h, dead, dead)] = sqrt_d;
        measures[block(h, reward_state, reward_state)] = sqrt_d;
    }

    let mut reward_params = vec![0.0; horizon * dim];
    for h in 0..horizon {
        reward_params[h * dim + reward_state * d] = sqrt_d;
    }

    let mut initial = vec![0.0; ns];
    initial[0] = 1.0;
    LinearMdpEnv::new(
        ns,
        na,
        horizon,
        dim,
        features,
        measures,
        reward_params,
        initial,
        ConstructionTag::HardInstance { spec: spec.clone() },
    )
}

/// Mixture view: `phi(s'|s,a)` carries `(1-delta, -a)/sqrt(d)` on the
/// chain-advance triplet and `(delta, a)/sqrt(d)` on the escape triplet, so
/// `theta_h = sqrt(d) * (1, mu_h)` reproduces the kernel exactly and the
/// value-feature norm bound holds. Records the resulting
/// `c_theta = sqrt(d (1 + (d-1) delta_gap^2))`.
fn build_mixture_view(spec: &HardInstanceSpec) -> Result<LinearMixtureEnv> {
    let ns = spec.num_states();
    let na = spec.num_actions();
    let horizon = spec.horizon;
    let d = spec.dim;
    let sqrt_d = (d as f64).sqrt();
    let dead = spec.dead_state();
    let reward_state = spec.reward_state();

    let mut features = vec![0.0; ns * na * ns * d];
    let idx = |s: usize, a: usize, s2: usize| ((s * na + a) * ns + s2) * d;
    for a in 0..na {
        let av = spec.action_vector(a);
        for c in 0..horizon {
            let b = idx(c, a, c + 1);
            features[b] = (1.0 - spec.escape_prob) / sqrt_d;
            for (j, &x) in av.iter().enumerate() {
                features[b + 1 + j] = -x / sqrt_d;
            }
            let b = idx(c, a, reward_state);
            features[b] = spec.escape_prob / sqrt_d;
            for (j, &x) in av.iter().enumerate() {
                features[b + 1 + j] = x / sqrt_d;
            }
        }
        features[idx(dead, a, dead)] = 1.0 / sqrt_d;
        features[idx(reward_state, a, reward_state)] = 1.0 / sqrt_d;
    }

    let mut theta = Vec::with_capacity(horizon * d);
    for h in 0..horizon {
        theta.push(sqrt_d);
        theta.extend(spec.mu(h).into_iter().map(|m| sqrt_d * m));
    }
    let c_theta = (d as f64 * (1.0 + (d - 1) as f64 * spec.gap_delta * spec.gap_delta)).sqrt();

    let mut rewards = vec![0.0; ns * na];
    for a in 0..na {
        rewards[reward_state * na + a] = 1.0;
    }

    let mut initial = vec![0.0; ns];
    initial[0] = 1.0;
    LinearMixtureEnv::new(
        ns,
        na,
        horizon,
        d,
        features,
        theta,
        rewards,
        c_theta,
        initial,
        ConstructionTag::HardInstance { spec: spec.clone() },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_d3() -> HardInstanceSpec {
        // escape_prob = 1/3, mu_h = (delta, -delta).
        HardInstanceSpec::new(3, 3, 0.05).unwrap()
    }

    #[test]
    fn default_spec_matches_expected_shape() {
        let spec = spec_d3();
        assert_eq!(spec.num_states(), 5);
        assert_eq!(spec.num_actions(), 4);
        assert_eq!(spec.mu(0), vec![0.05, -0.05]);
        assert_eq!(spec.optimal_action(0), 1); // (+1, -1)
        assert_eq!(spec.action_vector(1), vec![1.0, -1.0]);
    }

    #[test]
    fn escape_probability_matches_hand_computation() {
        // a = (1, -1) against mu = (delta, -delta): escape = 1/3 + 2*delta.
        let spec = spec_d3();
        let inst = make_hard_instance(&spec).unwrap();
        let a = spec.optimal_action(0);
        let p_escape = inst.tabular.transition_prob(0, 0, a, spec.reward_state());
        assert!((p_escape - (1.0 / 3.0 + 0.1)).abs() <= 1e-12, "{p_escape}");
        let p_advance = inst.tabular.transition_prob(0, 0, a, 1);
        assert!((p_advance - (2.0 / 3.0 - 0.1)).abs() <= 1e-12, "{p_advance}");
    }

    #[test]
    fn absorbing_states_stay_put() {
        let spec = spec_d3();
        let inst = make_hard_instance(&spec).unwrap();
        for view in [&inst.tabular as &dyn Mdp, &inst.linear, &inst.mixture] {
            for h in 0..3 {
                for a in 0..4 {
                    assert!((view.transition_prob(h, spec.dead_state(), a, spec.dead_state()) - 1.0).abs() <= 1e-12);
                    assert!(
                        (view.transition_prob(h, spec.reward_state(), a, spec.reward_state()) - 1.0).abs() <= 1e-12
                    );
                    assert!((view.reward(h, spec.reward_state(), a) - 1.0).abs() <= 1e-12);
                    assert_eq!(view.reward(h, 0, a), 0.0);
                }
            }
        }
    }

    #[test]
    fn infeasible_parameters_are_rejected() {
        // 3 * (d-1) * delta = 0.6 > 1/3.
        assert!(matches!(
            HardInstanceSpec::new(3, 3, 0.1),
            Err(Error::InfeasibleHardInstance { .. })
        ));
        // escape_prob above 1/3.
        assert!(spec_d3().with_escape_prob(0.4).is_err());
        // horizon too short.
        assert!(HardInstanceSpec::new(3, 2, 0.01).is_err());
    }

    #[test]
    fn mixture_view_records_its_parameter_bound() {
        let spec = spec_d3();
        let inst = make_hard_instance(&spec).unwrap();
        let expected = (3.0f64 * (1.0 + 2.0 * 0.05 * 0.05)).sqrt();
        assert!((inst.mixture.c_theta() - expected).abs() < 1e-12);
        // theta_0 = sqrt(3) * (1, 0.05, -0.05).
        let theta = inst.mixture.theta(0);
        assert!((theta[0] - 3.0f64.sqrt()).abs() < 1e-15);
        assert!((theta[1] - 3.0f64.sqrt() * 0.05).abs() < 1e-15);
    }

    #[test]
    fn linear_view_features_are_unit_norm() {
        let inst = make_hard_instance(&spec_d3()).unwrap();
        let report = inst.linear.norm_report();
        assert!((report.max_feature_norm - 1.0).abs() <= 1e-12);
    }
}
