//! Exact finite-horizon dynamic programming over the full state space:
//! optimal values, policy evaluation, action gaps, per-episode regret, and
//! the gap-decomposition identity
//! `V*_1(s_1) - V^pi_1(s_1) = E[ sum_h gap_h(s_h, a_h) ]`.

use serde::{Deserialize, Serialize};

use crate::env::Mdp;
use crate::{Error, Result};

/// Gaps smaller than this are treated as zero when locating the minimal
/// positive gap, so floating-point residue cannot manufacture a fake gap.
pub const GAP_ZERO_TOLERANCE: f64 = 1e-9;

/// Deterministic policy: an action for every `(h, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    horizon: usize,
    num_states: usize,
    /// Indexed `h * S + s`.
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(horizon: usize, num_states: usize, actions: Vec<usize>) -> Self {
        assert_eq!(actions.len(), horizon * num_states);
        Policy { horizon, num_states, actions }
    }

    /// Constant policy playing `action` everywhere.
    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        Policy::new(horizon, num_states, vec![action; horizon * num_states])
    }

    pub fn action(&self, h: usize, s: usize) -> usize {
        assert!(h < self.horizon && s < self.num_states, "index out of range");
        self.actions[h * self.num_states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Stochastic policy: an action distribution for every `(h, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPolicy {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    /// Indexed `(h * S + s) * A + a`.
    probs: Vec<f64>,
}

impl MixedPolicy {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), horizon * num_states * num_actions);
        for row in probs.chunks(num_actions) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "action distribution must sum to 1");
        }
        MixedPolicy { horizon, num_states, num_actions, probs }
    }

    /// Uniform-random behavior.
    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        MixedPolicy::new(
            horizon,
            num_states,
            num_actions,
            vec![p; horizon * num_states * num_actions],
        )
    }

    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[(h * self.num_states + s) * self.num_actions + a]
    }
}

/// Optimal values, greedy policy, and the gap tables of an environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactSolution {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    /// `Q*_h(s,a)`, indexed `(h * S + s) * A + a`.
    q: Vec<f64>,
    /// `V*_h(s)` for `h in 0..=horizon` (the last row is identically zero).
    v: Vec<f64>,
    /// Greedy optimal policy, ties broken toward the lowest action index.
    policy: Policy,
    /// `gap_h(s,a) = V*_h(s) - Q*_h(s,a)`.
    gaps: Vec<f64>,
    /// Minimal strictly positive gap; `+inf` when every gap is zero.
    #[serde(with = "infinity_as_null")]
    gap_min: f64,
}

impl ExactSolution {
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.num_states + s) * self.num_actions + a]
    }

    /// `V*_h(s)`; valid for `h` up to and including the horizon.
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.num_states + s]
    }

    pub fn gap(&self, h: usize, s: usize, a: usize) -> f64 {
        self.gaps[(h * self.num_states + s) * self.num_actions + a]
    }

    /// Minimal strictly positive gap (`+inf` sentinel when none exists).
    pub fn gap_min(&self) -> f64 {
        self.gap_min
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Value tables of a fixed policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyValue {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl PolicyValue {
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.num_states + s) * self.num_actions + a]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.num_states + s]
    }
}

/// Greedy argmax with the shared lowest-index tie-break.
pub fn greedy_action(q_row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &q) in q_row.iter().enumerate().skip(1) {
        if q > q_row[best] {
            best = a;
        }
    }
    best
}

/// Backward induction `h = H-1 .. 0` with `V*_H = 0`.
pub fn solve_optimal(env: &impl Mdp) -> ExactSolution {
    let ns = env.num_states();
    let na = env.num_actions();
    let horizon = env.horizon();

    let mut q = vec![0.0; horizon * ns * na];
    let mut v = vec![0.0; (horizon + 1) * ns];
    let mut actions = vec![0usize; horizon * ns];

    for h in (0..horizon).rev() {
        for s in 0..ns {
            let mut row = vec![0.0; na];
            for (a, q_sa) in row.iter_mut().enumerate() {
                let mut acc = env.reward(h, s, a);
                for s2 in 0..ns {
                    let p = env.transition_prob(h, s, a, s2);
                    if p > 0.0 {
                        acc += p * v[(h + 1) * ns + s2];
                    }
                }
                *q_sa = acc;
            }
            let best = greedy_action(&row);
            actions[h * ns + s] = best;
            v[h * ns + s] = row[best];
            q[(h * ns + s) * na..(h * ns + s + 1) * na].copy_from_slice(&row);
        }
    }

    let mut gaps = vec![0.0; horizon * ns * na];
    let mut gap_min = f64::INFINITY;
    for h in 0..horizon {
        for s in 0..ns {
            for a in 0..na {
                let g = (v[h * ns + s] - q[(h * ns + s) * na + a]).max(0.0);
                gaps[(h * ns + s) * na + a] = g;
                if g > GAP_ZERO_TOLERANCE && g < gap_min {
                    gap_min = g;
                }
            }
        }
    }

    ExactSolution {
        horizon,
        num_states: ns,
        num_actions: na,
        q,
        v,
        policy: Policy::new(horizon, ns, actions),
        gaps,
        gap_min,
    }
}

/// Exact backward evaluation of a deterministic policy.
pub fn evaluate_policy(env: &impl Mdp, policy: &Policy) -> PolicyValue {
    let ns = env.num_states();
    let na = env.num_actions();
    let horizon = env.horizon();
    assert_eq!(policy.horizon, horizon);
    assert_eq!(policy.num_states, ns);

    let mut q = vec![0.0; horizon * ns * na];
    let mut v = vec![0.0; (horizon + 1) * ns];
    for h in (0..horizon).rev() {
        for s in 0..ns {
            for a in 0..na {
                let mut acc = env.reward(h, s, a);
                for s2 in 0..ns {
                    let p = env.transition_prob(h, s, a, s2);
                    if p > 0.0 {
                        acc += p * v[(h + 1) * ns + s2];
                    }
                }
                q[(h * ns + s) * na + a] = acc;
            }
            let chosen = policy.action(h, s);
            assert!(chosen < na, "policy action {chosen} out of range");
            v[h * ns + s] = q[(h * ns + s) * na + chosen];
        }
    }
    PolicyValue { horizon, num_states: ns, num_actions: na, q, v }
}

/// Exact backward evaluation of a stochastic policy.
pub fn evaluate_mixed_policy(env: &impl Mdp, policy: &MixedPolicy) -> PolicyValue {
    let ns = env.num_states();
    let na = env.num_actions();
    let horizon = env.horizon();
    assert_eq!(policy.horizon, horizon);

    let mut q = vec![0.0; horizon * ns * na];
    let mut v = vec![0.0; (horizon + 1) * ns];
    for h in (0..horizon).rev() {
        for s in 0..ns {
            let mut v_s = 0.0;
            for a in 0..na {
                let mut acc = env.reward(h, s, a);
                for s2 in 0..ns {
                    let p = env.transition_prob(h, s, a, s2);
                    if p > 0.0 {
                        acc += p * v[(h + 1) * ns + s2];
                    }
                }
                q[(h * ns + s) * na + a] = acc;
                v_s += policy.prob(h, s, a) * acc;
            }
            v[h * ns + s] = v_s;
        }
    }
    PolicyValue { horizon, num_states: ns, num_actions: na, q, v }
}

/// `V*_1(s_1) - V^pi_1(s_1)`.
pub fn episode_regret(sol: &ExactSolution, pv: &PolicyValue, start_state: usize) -> f64 {
    sol.v(0, start_state) - pv.v(0, start_state)
}

/// `E[ sum_h gap_h(s_h, a_h) ]` under `policy` from `start_state`, computed
/// by exact forward propagation of the state distribution. Equals
/// [`episode_regret`] to floating-point accuracy for any policy.
pub fn expected_gap_sum(
    env: &impl Mdp,
    sol: &ExactSolution,
    policy: &Policy,
    start_state: usize,
) -> f64 {
    let ns = env.num_states();
    let horizon = env.horizon();
    let mut dist = vec![0.0; ns];
    dist[start_state] = 1.0;
    let mut total = 0.0;
    for h in 0..horizon {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let w = dist[s];
            if w == 0.0 {
                continue;
            }
            let a = policy.action(h, s);
            total += w * sol.gap(h, s, a);
            for s2 in 0..ns {
                let p = env.transition_prob(h, s, a, s2);
                if p > 0.0 {
                    next[s2] += w * p;
                }
            }
        }
        dist = next;
    }
    total
}

/// Error unless `gap_min` is finite and positive; used by diagnostics that
/// need the dyadic interval grid.
pub fn require_gap_min(sol: &ExactSolution, context: &'static str) -> Result<f64> {
    if sol.gap_min().is_finite() && sol.gap_min() > 0.0 {
        Ok(sol.gap_min())
    } else {
        Err(Error::GapMinUndefined { context })
    }
}

/// Serialize the `+inf` sentinel as JSON `null`.
mod infinity_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            ser.serialize_some(value)
        } else {
            ser.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_hard_instance, HardInstanceSpec, Mdp, TabularMdp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// One state, one step, rewards (0.3, 0.7).
    fn two_arm_env() -> TabularMdp {
        TabularMdp::new(1, 2, 1, vec![1.0, 1.0], vec![0.3, 0.7], vec![1.0]).unwrap()
    }

    #[test]
    fn single_step_maximization() {
        let env = two_arm_env();
        let sol = solve_optimal(&env);
        assert!((sol.v(0, 0) - 0.7).abs() < 1e-15);
        assert!((sol.gap(0, 0, 0) - 0.4).abs() < 1e-15);
        assert_eq!(sol.gap(0, 0, 1), 0.0);
        assert!((sol.gap_min() - 0.4).abs() < 1e-15);
        assert_eq!(sol.policy().action(0, 0), 1);
    }

    #[test]
    fn suboptimal_arm_regret() {
        let env = two_arm_env();
        let sol = solve_optimal(&env);
        let pi = Policy::constant(1, 1, 0);
        let pv = evaluate_policy(&env, &pi);
        assert!((pv.v(0, 0) - 0.3).abs() < 1e-15);
        assert!((episode_regret(&sol, &pv, 0) - 0.4).abs() < 1e-15);
        assert!((expected_gap_sum(&env, &sol, &pi, 0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn optimal_policy_attains_optimum() {
        let env = TabularMdp::random(3, 2, 3, 12).unwrap();
        let sol = solve_optimal(&env);
        let pv = evaluate_policy(&env, sol.policy());
        for h in 0..3 {
            for s in 0..3 {
                assert!((pv.v(h, s) - sol.v(h, s)).abs() <= 1e-12);
            }
        }
        assert!((episode_regret(&sol, &pv, 0)).abs() <= 1e-12);
    }

    #[test]
    fn bellman_residual_is_zero() {
        let env = TabularMdp::random(3, 2, 3, 99).unwrap();
        let sol = solve_optimal(&env);
        for h in 0..3 {
            for s in 0..3 {
                let mut best = f64::NEG_INFINITY;
                for a in 0..2 {
                    let mut rhs = env.reward(h, s, a);
                    for s2 in 0..3 {
                        rhs += env.transition_prob(h, s, a, s2) * sol.v(h + 1, s2);
                    }
                    assert!((rhs - sol.q(h, s, a)).abs() <= 1e-12);
                    best = best.max(sol.q(h, s, a));
                }
                assert!((best - sol.v(h, s)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn random_policies_never_beat_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..5 {
            let env = TabularMdp::random(3, 2, 3, seed).unwrap();
            let sol = solve_optimal(&env);
            for _ in 0..200 {
                let actions: Vec<usize> = (0..9).map(|_| rng.random_range(0..2)).collect();
                let pi = Policy::new(3, 3, actions);
                let pv = evaluate_policy(&env, &pi);
                for s in 0..3 {
                    assert!(pv.v(0, s) <= sol.v(0, s) + 1e-10);
                }
            }
        }
    }

    #[test]
    fn decomposition_identity_on_random_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for seed in 0..10 {
            let env = TabularMdp::random(3, 2, 3, seed).unwrap();
            let sol = solve_optimal(&env);
            for _ in 0..10 {
                let actions: Vec<usize> = (0..9).map(|_| rng.random_range(0..2)).collect();
                let pi = Policy::new(3, 3, actions);
                let pv = evaluate_policy(&env, &pi);
                for s1 in 0..3 {
                    let lhs = episode_regret(&sol, &pv, s1);
                    let rhs = expected_gap_sum(&env, &sol, &pi, s1);
                    assert!((lhs - rhs).abs() <= 1e-10, "identity broke: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn hard_instance_gap_min_is_twice_delta() {
        let spec = HardInstanceSpec::new(3, 3, 0.05).unwrap();
        let inst = make_hard_instance(&spec).unwrap();
        let sol = solve_optimal(&inst.tabular);
        assert!((sol.gap_min() - 0.1).abs() <= 1e-12);
        // Optimal action at the start state matches the sign pattern of mu.
        assert_eq!(sol.policy().action(0, 0), spec.optimal_action(0));
        // At the last step every action is equivalent.
        for s in 0..inst.tabular.num_states() {
            for a in 0..inst.tabular.num_actions() {
                assert!(sol.gap(2, s, a) <= 1e-12);
            }
        }
    }

    #[test]
    fn gap_min_sentinel_when_no_positive_gap() {
        // One action: no gaps anywhere.
        let env = TabularMdp::new(2, 1, 2, vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5], vec![0.1, 0.9, 0.2, 0.3], vec![1.0, 0.0]).unwrap();
        let sol = solve_optimal(&env);
        assert!(sol.gap_min().is_infinite());
        assert!(require_gap_min(&sol, "peeling").is_err());
        // The sentinel survives a JSON round trip as null.
        let json = serde_json::to_string(&sol).unwrap();
        assert!(json.contains("\"gap_min\":null"));
        let back: ExactSolution = serde_json::from_str(&json).unwrap();
        assert!(back.gap_min().is_infinite());
    }

    #[test]
    fn mixed_policy_matches_monte_carlo() {
        let env = TabularMdp::random(2, 2, 2, 77).unwrap();
        let pi = MixedPolicy::uniform(2, 2, 2);
        let pv = evaluate_mixed_policy(&env, &pi);

        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 100_000;
        let mut total = 0.0;
        let mut total_sq = 0.0;
        for _ in 0..n {
            let mut s = env.sample_initial_state(rng.random::<f64>());
            let start = s;
            let mut ret = 0.0;
            for h in 0..2 {
                let a = if rng.random::<f64>() < 0.5 { 0 } else { 1 };
                ret += env.reward(h, s, a);
                s = env.sample_next_state(h, s, a, rng.random::<f64>());
            }
            // Condition on the realized start state by weighting with V(start).
            let _ = start;
            total += ret;
            total_sq += ret * ret;
        }
        let mean = total / n as f64;
        let var = (total_sq / n as f64 - mean * mean).max(0.0);
        let sigma = (var / n as f64).sqrt();

        let expected: f64 = (0..2).map(|s| env.initial_dist()[s] * pv.v(0, s)).sum();
        assert!(
            (mean - expected).abs() <= 3.0 * sigma + 1e-3,
            "MC mean {mean} vs exact {expected} (3 sigma = {})",
            3.0 * sigma
        );
    }
}
