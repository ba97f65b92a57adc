//! Finite episodic MDP environments with linear structure.
//!
//! Three representations share one access trait:
//!
//! - [`TabularMdp`]: the ground-truth kernel as explicit probability tables.
//! - [`LinearMdpEnv`]: transitions and rewards linear in a per-state-action
//!   feature vector (`P_h(s'|s,a) = <phi(s,a), theta_h(s')>`).
//! - [`LinearMixtureEnv`]: transitions linear in a per-triplet feature with a
//!   single unknown step parameter (`P_h(s'|s,a) = <phi(s'|s,a), theta_h>`),
//!   rewards known and deterministic.
//!
//! All step indices `h` are zero-based internally (`0..horizon`).

mod hard;
mod linear;
mod mixture;
mod random;
mod tabular;

pub use hard::{make_hard_instance, HardInstance, HardInstanceSpec};
pub use linear::{one_hot_embed, LinearMdpEnv, NormReport};
pub use mixture::LinearMixtureEnv;
pub use random::{make_random_linear_mdp, make_random_linear_mixture};
pub use tabular::TabularMdp;

use serde::{Deserialize, Serialize};

/// Probability rows may deviate from exact normalization by at most this much.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// How the environment was built; serialized alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstructionTag {
    HardInstance { spec: HardInstanceSpec },
    RandomLinear { seed: u64 },
    RandomMixture { seed: u64 },
    OneHotEmbed,
    Custom,
}

/// Uniform access to a finite episodic MDP.
pub trait Mdp {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn horizon(&self) -> usize;

    /// `P_h(s'|s,a)`, clamped to `[0, 1]`. Panics on an out-of-range index.
    fn transition_prob(&self, h: usize, s: usize, a: usize, s2: usize) -> f64;

    /// `r_h(s, a)` in `[0, 1]`. Panics on an out-of-range index.
    fn reward(&self, h: usize, s: usize, a: usize) -> f64;

    fn initial_dist(&self) -> &[f64];

    /// The full next-state row, using the same clamped probabilities the
    /// sampler consumes.
    fn transition_row(&self, h: usize, s: usize, a: usize) -> Vec<f64> {
        (0..self.num_states())
            .map(|s2| self.transition_prob(h, s, a, s2))
            .collect()
    }

    /// Inverse-CDF sample of the next state from a uniform draw `u in [0,1)`.
    fn sample_next_state(&self, h: usize, s: usize, a: usize, u: f64) -> usize {
        let n = self.num_states();
        let mut acc = 0.0;
        for s2 in 0..n {
            acc += self.transition_prob(h, s, a, s2);
            if u < acc {
                return s2;
            }
        }
        n - 1
    }

    /// Inverse-CDF sample of the initial state.
    fn sample_initial_state(&self, u: f64) -> usize {
        let dist = self.initial_dist();
        let mut acc = 0.0;
        for (s, p) in dist.iter().enumerate() {
            acc += p.max(0.0);
            if u < acc {
                return s;
            }
        }
        dist.len() - 1
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Validate that `row` is a probability vector within [`PROB_TOLERANCE`].
pub(crate) fn check_probability_row(
    row: &[f64],
    h: usize,
    s: usize,
    a: usize,
) -> crate::Result<()> {
    let sum: f64 = row.iter().sum();
    let min_entry = row.iter().cloned().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > PROB_TOLERANCE || min_entry < -PROB_TOLERANCE {
        return Err(crate::Error::BadProbabilityRow { h, s, a, sum, min_entry });
    }
    Ok(())
}

pub(crate) fn check_initial_dist(dist: &[f64]) -> crate::Result<()> {
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > PROB_TOLERANCE || dist.iter().any(|&p| p < -PROB_TOLERANCE) {
        return Err(crate::Error::BadInitialDistribution { sum });
    }
    Ok(())
}

/// Uniform sample from the probability simplex (exponential spacings).
pub(crate) fn simplex_point(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}
