//! Linear MDP: transitions and rewards linear in a known feature of (s, a).

use serde::{Deserialize, Serialize};

use super::{check_initial_dist, check_probability_row, dot, norm2, ConstructionTag, Mdp, TabularMdp};
use crate::Result;

/// Norm slack beyond which a normalization condition counts as violated.
const NORM_SLACK: f64 = 1e-9;

/// Normalization diagnostics for a [`LinearMdpEnv`].
///
/// The construction conventions expect `||phi(s,a)||_2 <= 1`,
/// `||mu_h||_2 <= sqrt(d)`, and a total-variation bound
/// `sum_{s'} ||theta_h(s')||_2 <= sqrt(d)` on the transition measures.
/// Exact kernel reproductions (one-hot embeds, the escape-chain views) can
/// violate the measure bound; the flag records this instead of rejecting
/// the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub max_feature_norm: f64,
    /// `max_h ||mu_h||_2`.
    pub max_reward_param_norm: f64,
    /// `max_h || sum_{s'} theta_h(s') ||_2`.
    pub max_measure_sum_norm: f64,
    /// `max_h sum_{s'} ||theta_h(s')||_2` (total variation of the measure).
    pub max_measure_total_variation: f64,
    /// True when features, reward parameters, and the total-variation measure
    /// norm all satisfy their bounds.
    pub conforming: bool,
}

/// Episodic MDP with `P_h(s'|s,a) = <phi(s,a), theta_h(s')>` and
/// `r_h(s,a) = <phi(s,a), mu_h>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMdpEnv {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    dim: usize,
    /// `phi(s,a)`, indexed `(s * A + a) * dim + j`.
    features: Vec<f64>,
    /// `theta_h(s')`, indexed `(h * S + s') * dim + j`.
    measures: Vec<f64>,
    /// `mu_h`, indexed `h * dim + j`.
    reward_params: Vec<f64>,
    initial_dist: Vec<f64>,
    construction: ConstructionTag,
    norm_report: NormReport,
}

impl LinearMdpEnv {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        dim: usize,
        features: Vec<f64>,
        measures: Vec<f64>,
        reward_params: Vec<f64>,
        initial_dist: Vec<f64>,
        construction: ConstructionTag,
    ) -> Result<Self> {
        assert!(num_states >= 1 && num_actions >= 1 && horizon >= 1 && dim >= 1);
        assert_eq!(features.len(), num_states * num_actions * dim);
        assert_eq!(measures.len(), horizon * num_states * dim);
        assert_eq!(reward_params.len(), horizon * dim);
        assert_eq!(initial_dist.len(), num_states);

        let norm_report = NormReport {
            max_feature_norm: 0.0,
            max_reward_param_norm: 0.0,
            max_measure_sum_norm: 0.0,
            max_measure_total_variation: 0.0,
            conforming: false,
        };
        let mut env = LinearMdpEnv {
            num_states,
            num_actions,
            horizon,
            dim,
            features,
            measures,
            reward_params,
            initial_dist,
            construction,
            norm_report,
        };
        env.validate()?;
        env.norm_report = env.compute_norm_report();
        Ok(env)
    }

    /// Re-check the probability and reward invariants against the tables.
    pub fn validate(&self) -> Result<()> {
        for h in 0..self.horizon {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    let row: Vec<f64> = (0..self.num_states)
                        .map(|s2| dot(self.phi(s, a), self.measure(h, s2)))
                        .collect();
                    check_probability_row(&row, h, s, a)?;
                    let r = dot(self.phi(s, a), self.reward_param(h));
                    if !(-1e-12..=1.0 + 1e-12).contains(&r) {
                        return Err(crate::Error::RewardOutOfRange { h, s, a, value: r });
                    }
                }
            }
        }
        check_initial_dist(&self.initial_dist)
    }

    fn compute_norm_report(&self) -> NormReport {
        let sqrt_d = (self.dim as f64).sqrt();
        let mut max_feature_norm = 0.0f64;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                max_feature_norm = max_feature_norm.max(norm2(self.phi(s, a)));
            }
        }
        let mut max_reward_param_norm = 0.0f64;
        let mut max_measure_sum_norm = 0.0f64;
        let mut max_measure_total_variation = 0.0f64;
        for h in 0..self.horizon {
            max_reward_param_norm = max_reward_param_norm.max(norm2(self.reward_param(h)));
            let mut sum = vec![0.0; self.dim];
            let mut tv = 0.0;
            for s2 in 0..self.num_states {
                let theta = self.measure(h, s2);
                for (acc, v) in sum.iter_mut().zip(theta) {
                    *acc += v;
                }
                tv += norm2(theta);
            }
            max_measure_sum_norm = max_measure_sum_norm.max(norm2(&sum));
            max_measure_total_variation = max_measure_total_variation.max(tv);
        }
        let conforming = max_feature_norm <= 1.0 + NORM_SLACK
            && max_reward_param_norm <= sqrt_d + NORM_SLACK
            && max_measure_total_variation <= sqrt_d + NORM_SLACK;
        NormReport {
            max_feature_norm,
            max_reward_param_norm,
            max_measure_sum_norm,
            max_measure_total_variation,
            conforming,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `phi(s, a)`.
    pub fn phi(&self, s: usize, a: usize) -> &[f64] {
        assert!(s < self.num_states && a < self.num_actions,
            "index out of range: (s={s}, a={a})");
        let base = (s * self.num_actions + a) * self.dim;
        &self.features[base..base + self.dim]
    }

    /// `theta_h(s')`.
    pub fn measure(&self, h: usize, s2: usize) -> &[f64] {
        assert!(h < self.horizon && s2 < self.num_states,
            "index out of range: (h={h}, s'={s2})");
        let base = (h * self.num_states + s2) * self.dim;
        &self.measures[base..base + self.dim]
    }

    /// `mu_h`.
    pub fn reward_param(&self, h: usize) -> &[f64] {
        assert!(h < self.horizon, "index out of range: h={h}");
        &self.reward_params[h * self.dim..(h + 1) * self.dim]
    }

    pub fn construction(&self) -> &ConstructionTag {
        &self.construction
    }

    pub fn norm_report(&self) -> &NormReport {
        &self.norm_report
    }
}

impl Mdp for LinearMdpEnv {
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
        dot(self.phi(s, a), self.measure(h, s2)).clamp(0.0, 1.0)
    }

    fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        dot(self.phi(s, a), self.reward_param(h)).clamp(0.0, 1.0)
    }

    fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
}

/// Embed a tabular MDP as a linear MDP with `d = S * A` indicator features.
///
/// `phi(s,a)` is the one-hot vector of the pair, `theta_h(s')` stacks the
/// column `P_h(s'|.,.)`, and `mu_h` stacks the reward table, so both views
/// agree exactly. The measure total-variation norm generally exceeds
/// `sqrt(d)`; the embed records that in its [`NormReport`] rather than
/// failing.
pub fn one_hot_embed(tab: &TabularMdp) -> LinearMdpEnv {
    let ns = tab.num_states();
    let na = tab.num_actions();
    let horizon = tab.horizon();
    let dim = ns * na;

    let mut features = vec![0.0; ns * na * dim];
    for s in 0..ns {
        for a in 0..na {
            let pair = s * na + a;
            features[pair * dim + pair] = 1.0;
        }
    }
    let mut measures = vec![0.0; horizon * ns * dim];
    let mut reward_params = vec![0.0; horizon * dim];
    for h in 0..horizon {
        for s2 in 0..ns {
            for s in 0..ns {
                for a in 0..na {
                    measures[(h * ns + s2) * dim + s * na + a] = tab.transition_prob(h, s, a, s2);
                }
            }
        }
        for s in 0..ns {
            for a in 0..na {
                reward_params[h * dim + s * na + a] = tab.reward(h, s, a);
            }
        }
    }

    LinearMdpEnv::new(
        ns,
        na,
        horizon,
        dim,
        features,
        measures,
        reward_params,
        tab.initial_dist().to_vec(),
        ConstructionTag::OneHotEmbed,
    )
    .expect("a valid tabular MDP always embeds")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_embed_reproduces_kernel_exactly() {
        let tab = TabularMdp::random(2, 2, 2, 5).unwrap();
        let lin = one_hot_embed(&tab);
        assert_eq!(lin.dim(), 4);
        for h in 0..2 {
            for s in 0..2 {
                for a in 0..2 {
                    for s2 in 0..2 {
                        let diff =
                            (lin.transition_prob(h, s, a, s2) - tab.transition_prob(h, s, a, s2)).abs();
                        assert!(diff <= 1e-12);
                    }
                    assert!((lin.reward(h, s, a) - tab.reward(h, s, a)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn one_hot_feature_is_indicator() {
        let tab = TabularMdp::random(2, 2, 1, 0).unwrap();
        let lin = one_hot_embed(&tab);
        // phi(s_0, a_1) is the second standard basis vector.
        assert_eq!(lin.phi(0, 1), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn one_hot_embed_flags_nonconforming_measures() {
        // A generic 2x2 kernel has sum_{s'} ||theta_h(s')|| strictly above
        // sqrt(d) = 2 unless all rows are proportional.
        let tab = TabularMdp::new(
            2,
            2,
            1,
            vec![
                1.0, 0.0, // (s0,a0)
                1.0, 0.0, // (s0,a1)
                0.5, 0.5, // (s1,a0)
                0.5, 0.5, // (s1,a1)
            ],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0],
        )
        .unwrap();
        let lin = one_hot_embed(&tab);
        let report = lin.norm_report();
        assert!(report.max_measure_total_variation > 2.0 + 1e-9);
        assert!(!report.conforming);
        // The vector-sum norm stays at exactly sqrt(d) for any stochastic kernel.
        assert!((report.max_measure_sum_norm - 2.0).abs() < 1e-9);
    }
}
