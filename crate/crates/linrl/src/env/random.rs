//! Seeded generators for valid random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{simplex_point, ConstructionTag, LinearMdpEnv, LinearMixtureEnv};
use crate::Result;

/// Random linear MDP via anchor-distribution mixtures.
///
/// Samples `dim` anchor next-state distributions per step and places every
/// `phi(s,a)` on the probability simplex, so each transition row is a convex
/// combination of the anchors and all rows are valid by construction.
/// Deterministic in `seed`.
pub fn make_random_linear_mdp(
    dim: usize,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
) -> Result<LinearMdpEnv> {
    check_dims(dim, num_states, num_actions, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Anchor distributions p_j(.|h): anchors[h][j] is a distribution over states.
    let mut measures = vec![0.0; horizon * num_states * dim];
    for h in 0..horizon {
        for j in 0..dim {
            let anchor = simplex_point(&mut rng, num_states);
            for (s2, &p) in anchor.iter().enumerate() {
                measures[(h * num_states + s2) * dim + j] = p;
            }
        }
    }

    let mut features = Vec::with_capacity(num_states * num_actions * dim);
    for _ in 0..num_states * num_actions {
        features.extend(simplex_point(&mut rng, dim));
    }

    // mu_h in [0,1]^d: then <phi, mu_h> lies in [0,1] for simplex features
    // and ||mu_h|| <= sqrt(d) automatically.
    let mut reward_params = Vec::with_capacity(horizon * dim);
    for _ in 0..horizon {
        for _ in 0..dim {
            reward_params.push(rng.random::<f64>());
        }
    }

    let initial_dist = simplex_point(&mut rng, num_states);

    LinearMdpEnv::new(
        num_states,
        num_actions,
        horizon,
        dim,
        features,
        measures,
        reward_params,
        initial_dist,
        ConstructionTag::RandomLinear { seed },
    )
}

/// Random linear mixture MDP from `dim` base kernels.
///
/// `phi(s'|s,a) = (P_1(s'|s,a), ..., P_d(s'|s,a)) / sqrt(d)` and
/// `theta_h = sqrt(d) * w_h` for a simplex weight `w_h`, so every row is a
/// convex combination of the base kernels and `||phi_V|| <= 1` holds for any
/// `V` into `[0,1]`. Records `c_theta = sqrt(d)`. Deterministic in `seed`.
pub fn make_random_linear_mixture(
    dim: usize,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
) -> Result<LinearMixtureEnv> {
    check_dims(dim, num_states, num_actions, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_d = (dim as f64).sqrt();

    let mut features = vec![0.0; num_states * num_actions * num_states * dim];
    for j in 0..dim {
        for s in 0..num_states {
            for a in 0..num_actions {
                let row = simplex_point(&mut rng, num_states);
                for (s2, &p) in row.iter().enumerate() {
                    features[((s * num_actions + a) * num_states + s2) * dim + j] = p / sqrt_d;
                }
            }
        }
    }

    let mut theta = Vec::with_capacity(horizon * dim);
    for _ in 0..horizon {
        let w = simplex_point(&mut rng, dim);
        theta.extend(w.into_iter().map(|x| x * sqrt_d));
    }

    let rewards: Vec<f64> = (0..num_states * num_actions).map(|_| rng.random::<f64>()).collect();
    let initial_dist = simplex_point(&mut rng, num_states);

    LinearMixtureEnv::new(
        num_states,
        num_actions,
        horizon,
        dim,
        features,
        theta,
        rewards,
        sqrt_d,
        initial_dist,
        ConstructionTag::RandomMixture { seed },
    )
}

fn check_dims(dim: usize, num_states: usize, num_actions: usize, horizon: usize) -> Result<()> {
    for (name, v) in [
        ("dim", dim),
        ("num_states", num_states),
        ("num_actions", num_actions),
        ("horizon", horizon),
    ] {
        if v == 0 {
            return Err(crate::Error::InvalidParameter {
                name,
                reason: "must be at least 1".into(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::Mdp;
    use super::*;

    #[test]
    fn linear_rows_are_convex_combinations() {
        let env = make_random_linear_mdp(3, 4, 2, 3, 42).unwrap();
        for h in 0..3 {
            for s in 0..4 {
                for a in 0..2 {
                    let sum: f64 = env.transition_row(h, s, a).iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-12);
                }
            }
        }
        assert!(env.norm_report().conforming);
    }

    #[test]
    fn degenerate_dim_one_shares_everything() {
        let env = make_random_linear_mdp(1, 3, 2, 2, 3).unwrap();
        for h in 0..2 {
            for s in 0..3 {
                let row0 = env.transition_row(h, s, 0);
                for a in 1..2 {
                    assert_eq!(env.transition_row(h, s, a), row0);
                }
                // One shared reward per step.
                assert_eq!(env.reward(h, s, 0), env.reward(h, 0, 0));
            }
        }
    }

    #[test]
    fn mixture_dim_one_uses_base_kernel_directly() {
        let env = make_random_linear_mixture(1, 3, 2, 2, 3).unwrap();
        assert_eq!(env.theta(0), &[1.0]);
        for s in 0..3 {
            for a in 0..2 {
                let row_sum: f64 = (0..3).map(|s2| env.triplet_phi(s, a, s2)[0]).sum();
                assert!((row_sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn generators_are_deterministic_in_seed() {
        let a = make_random_linear_mdp(2, 3, 2, 2, 7).unwrap();
        let b = make_random_linear_mdp(2, 3, 2, 2, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

        let c = make_random_linear_mixture(2, 3, 2, 2, 7).unwrap();
        let d = make_random_linear_mixture(2, 3, 2, 2, 7).unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), serde_json::to_string(&d).unwrap());
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(make_random_linear_mdp(0, 2, 2, 2, 0).is_err());
    }
}
