use crate::game::model::{RewardNoise, TabularMarkovGame};

/// Player 0 is paid 1 on a match, player 1 on a mismatch.
pub fn matching_pennies() -> TabularMarkovGame {
    TabularMarkovGame::from_fn(1, 1, vec![2, 2], RewardNoise::Deterministic, 0, |_, _, a| {
        let m = if a[0] == a[1] { 1.0 } else { 0.0 };
        (vec![m, 1.0 - m], vec![1.0])
    })
    .expect("preset is valid")
}

/// Both players are paid 1 when their actions match.
pub fn coin_coordination() -> TabularMarkovGame {
    TabularMarkovGame::from_fn(1, 1, vec![2, 2], RewardNoise::Deterministic, 0, |_, _, a| {
        let r = if a[0] == a[1] { 1.0 } else { 0.0 };
        (vec![r, r], vec![1.0])
    })
    .expect("preset is valid")
}

/// Single-player bandit with Bernoulli arms.
pub fn bandit(means: &[f64]) -> TabularMarkovGame {
    TabularMarkovGame::from_fn(1, 1, vec![means.len()], RewardNoise::Bernoulli, 0, |_, _, a| {
        (vec![means[a[0]]], vec![1.0])
    })
    .expect("means must lie in [0, 1]")
}

/// Deterministic single-player chain on three states. Action 1 advances
/// toward state 2 and always pays more, so the all-ones policy is the unique
/// optimum at every state.
pub fn chain_mdp(horizon: usize) -> TabularMarkovGame {
    TabularMarkovGame::from_fn(horizon, 3, vec![2], RewardNoise::Deterministic, 0, |_, s, a| {
        let r = 0.1 + 0.4 * a[0] as f64 + 0.1 * s as f64;
        let next = if a[0] == 1 { (s + 1).min(2) } else { 0 };
        let mut p = vec![0.0; 3];
        p[next] = 1.0;
        (vec![r], p)
    })
    .expect("preset is valid")
}

/// Identical-interest one-step game paying every player the fraction of
/// players whose action agrees with `target`; `target` is the unique Nash
/// equilibrium and reachable by unilateral improvements.
pub fn dominant_cooperative(action_counts: &[usize], target: &[usize]) -> TabularMarkovGame {
    let m = action_counts.len();
    TabularMarkovGame::from_fn(1, 1, action_counts.to_vec(), RewardNoise::Bernoulli, 0, |_, _, a| {
        let hits = a.iter().zip(target).filter(|(x, y)| x == y).count();
        (vec![hits as f64 / m as f64; m], vec![1.0])
    })
    .expect("preset is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::eval::{brute_force_pure_nash, PureNashSearch};
    use crate::game::policy::MixtureMarkovPolicy;

    #[test]
    fn chain_optimum_is_all_ones() {
        let g = chain_mdp(2);
        let ne = brute_force_pure_nash(&g, PureNashSearch::default()).unwrap();
        let ones = MixtureMarkovPolicy::deterministic(2, 3, &[2], |_, _, _| 1).unwrap();
        // Actions at states the optimum never reaches are free.
        assert!(ne.contains(&ones));
        for p in &ne {
            assert_eq!(p.player_marginal(0, 0, 0), vec![0.0, 1.0]);
            assert_eq!(p.player_marginal(1, 1, 0), vec![0.0, 1.0]);
        }
    }

    #[test]
    fn cooperative_target_unique_nash() {
        let g = dominant_cooperative(&[2, 2], &[1, 1]);
        let ne = brute_force_pure_nash(&g, PureNashSearch::default()).unwrap();
        let target = MixtureMarkovPolicy::deterministic(1, 1, &[2, 2], |_, _, _| 1).unwrap();
        assert_eq!(ne, vec![target]);
    }
}
