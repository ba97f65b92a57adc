//! Linear mixture MDP: transitions linear in known per-triplet features with
//! one unknown parameter vector per step; rewards known and deterministic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_initial_dist, check_probability_row, dot, norm2, ConstructionTag, Mdp};
use crate::Result;

/// Number of random value functions checked against the value-feature bound
/// at construction time.
const VALUE_FEATURE_CHECKS: usize = 100;

/// Episodic MDP with `P_h(s'|s,a) = <phi(s'|s,a), theta_h>`, `||theta_h|| <= c_theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMixtureEnv {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    dim: usize,
    /// `phi(s'|s,a)`, indexed `((s * A + a) * S + s') * dim + j`.
    features: Vec<f64>,
    /// `theta_h`, indexed `h * dim + j`.
    theta: Vec<f64>,
    /// `r(s,a)` in `[0,1]`, indexed `s * A + a`.
    rewards: Vec<f64>,
    c_theta: f64,
    initial_dist: Vec<f64>,
    construction: ConstructionTag,
}

impl LinearMixtureEnv {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        dim: usize,
        features: Vec<f64>,
        theta: Vec<f64>,
        rewards: Vec<f64>,
        c_theta: f64,
        initial_dist: Vec<f64>,
        construction: ConstructionTag,
    ) -> Result<Self> {
        assert!(num_states >= 1 && num_actions >= 1 && horizon >= 1 && dim >= 1);
        assert_eq!(features.len(), num_states * num_actions * num_states * dim);
        assert_eq!(theta.len(), horizon * dim);
        assert_eq!(rewards.len(), num_states * num_actions);
        assert_eq!(initial_dist.len(), num_states);

        let env = LinearMixtureEnv {
            num_states,
            num_actions,
            horizon,
            dim,
            features,
            theta,
            rewards,
            c_theta,
            initial_dist,
            construction,
        };
        env.validate()?;
        Ok(env)
    }

    /// Re-check kernel validity, the parameter-norm bound, and the
    /// value-feature norm bound (constant-one plus
    /// [`VALUE_FEATURE_CHECKS`] seeded random value functions).
    pub fn validate(&self) -> Result<()> {
        for h in 0..self.horizon {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    let row: Vec<f64> = (0..self.num_states)
                        .map(|s2| dot(self.triplet_phi(s, a, s2), self.theta(h)))
                        .collect();
                    check_probability_row(&row, h, s, a)?;
                }
            }
        }
        for (s, row) in self.rewards.chunks(self.num_actions).enumerate() {
            for (a, &r) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&r) {
                    return Err(crate::Error::RewardOutOfRange { h: 0, s, a, value: r });
                }
            }
        }
        for h in 0..self.horizon {
            let n = norm2(self.theta(h));
            if n > self.c_theta + 1e-9 {
                return Err(crate::Error::InvalidParameter {
                    name: "theta",
                    reason: format!("||theta_{h}|| = {n} exceeds declared bound {}", self.c_theta),
                });
            }
        }
        self.check_value_feature_bound()?;
        check_initial_dist(&self.initial_dist)
    }

    fn check_value_feature_bound(&self) -> Result<()> {
        // Self-check rng, fixed seed: independent of construction randomness.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c4ec);
        let ones = vec![1.0; self.num_states];
        let mut candidates = vec![ones];
        for _ in 0..VALUE_FEATURE_CHECKS {
            candidates.push(
                (0..self.num_states)
                    .map(|_| rand::Rng::random::<f64>(&mut rng))
                    .collect(),
            );
        }
        for v in &candidates {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    let n = norm2(&self.value_features(v, s, a));
                    if n > 1.0 + 1e-12 {
                        return Err(crate::Error::InvalidParameter {
                            name: "triplet_features",
                            reason: format!(
                                "||phi_V({s},{a})|| = {n} exceeds 1 for a [0,1]-valued V"
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `phi(s'|s,a)`.
    pub fn triplet_phi(&self, s: usize, a: usize, s2: usize) -> &[f64] {
        assert!(s < self.num_states && a < self.num_actions && s2 < self.num_states,
            "index out of range: (s={s}, a={a}, s'={s2})");
        let base = ((s * self.num_actions + a) * self.num_states + s2) * self.dim;
        &self.features[base..base + self.dim]
    }

    /// The true step parameter `theta_h` (oracle access for diagnostics).
    pub fn theta(&self, h: usize) -> &[f64] {
        assert!(h < self.horizon, "index out of range: h={h}");
        &self.theta[h * self.dim..(h + 1) * self.dim]
    }

    /// Declared bound on `||theta_h||_2`.
    pub fn c_theta(&self) -> f64 {
        self.c_theta
    }

    pub fn construction(&self) -> &ConstructionTag {
        &self.construction
    }

    /// `phi_V(s,a) = sum_{s'} phi(s'|s,a) V(s')`.
    ///
    /// Panics if `V` has the wrong length or non-finite entries.
    pub fn value_features(&self, v: &[f64], s: usize, a: usize) -> Vec<f64> {
        assert_eq!(v.len(), self.num_states, "value vector length mismatch");
        assert!(v.iter().all(|x| x.is_finite()), "non-finite value entry");
        let mut out = vec![0.0; self.dim];
        for (s2, &value) in v.iter().enumerate() {
            if value == 0.0 {
                continue;
            }
            let phi = self.triplet_phi(s, a, s2);
            for (acc, p) in out.iter_mut().zip(phi) {
                *acc += p * value;
            }
        }
        out
    }
}

impl Mdp for LinearMixtureEnv {
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
        dot(self.triplet_phi(s, a, s2), self.theta(h)).clamp(0.0, 1.0)
    }

    fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        assert!(h < self.horizon && s < self.num_states && a < self.num_actions,
            "index out of range: (h={h}, s={s}, a={a})");
        self.rewards[s * self.num_actions + a]
    }

    fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
}

#[cfg(test)]
mod tests {
    use super::super::make_random_linear_mixture;
    use super::*;

    #[test]
    fn value_features_zero_and_indicator() {
        let env = make_random_linear_mixture(3, 4, 2, 2, 9).unwrap();
        let zeros = vec![0.0; 4];
        assert!(env.value_features(&zeros, 1, 0).iter().all(|&x| x == 0.0));

        let mut indicator = vec![0.0; 4];
        indicator[2] = 1.0;
        let got = env.value_features(&indicator, 1, 0);
        assert_eq!(got, env.triplet_phi(1, 0, 2));
    }

    #[test]
    fn constant_one_value_features_have_unit_norm() {
        let env = make_random_linear_mixture(4, 3, 2, 2, 11).unwrap();
        let ones = vec![1.0; 3];
        for s in 0..3 {
            for a in 0..2 {
                let phi_v = env.value_features(&ones, s, a);
                // Each coordinate is (sum of a kernel row) / sqrt(d) = 1/sqrt(d).
                for c in &phi_v {
                    assert!((c - 0.5).abs() < 1e-12);
                }
                assert!((norm2(&phi_v) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn value_features_rejects_bad_dimension() {
        let env = make_random_linear_mixture(2, 3, 2, 2, 1).unwrap();
        env.value_features(&[1.0, 2.0], 0, 0);
    }
}
