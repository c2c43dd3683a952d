use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use crate::error::{Error, Result};
use crate::game::model::{JointActions, RewardNoise, TabularMarkovGame};
use crate::rng;

/// Default cap on `prod_i |A_i|` when expanding a congestion game.
pub const JOINT_CAP: usize = 1 << 20;

/// Each player picks a nonempty subset of facilities; a facility used by `n`
/// players pays each of them `R^f(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionGame {
    pub facilities: usize,
    /// `actions[i][a]` lists the facilities in player `i`'s action `a`.
    pub actions: Vec<Vec<Vec<usize>>>,
    /// `rewards[f][n - 1] = R^f(n)` for `n` in `1..=m`.
    pub rewards: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise: RewardNoise,
}

impl CongestionGame {
    pub fn new(
        facilities: usize,
        actions: Vec<Vec<Vec<usize>>>,
        rewards: Vec<Vec<f64>>,
        noise: RewardNoise,
    ) -> Result<Self> {
        let cg = Self { facilities, actions, rewards, noise };
        cg.validate()?;
        Ok(cg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.actions.len();
        if self.facilities == 0 || m == 0 {
            return Err(Error::InvalidGame("congestion game needs facilities and players".into()));
        }
        if self.rewards.len() != self.facilities {
            return Err(Error::ShapeMismatch("one reward row per facility".into()));
        }
        let cap = 1.0 / self.facilities as f64;
        for (f, row) in self.rewards.iter().enumerate() {
            if row.len() != m {
                return Err(Error::ShapeMismatch(format!("facility {f} needs {m} load levels")));
            }
            if let Some(r) = row.iter().find(|r| !(0.0..=cap + 1e-15).contains(*r)) {
                return Err(Error::InvalidGame(format!("facility {f} reward {r} outside [0, 1/F]")));
            }
        }
        for (i, acts) in self.actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(Error::InvalidGame(format!("player {i} has no actions")));
            }
            for (a, set) in acts.iter().enumerate() {
                if set.is_empty() || set.iter().any(|&f| f >= self.facilities) {
                    return Err(Error::InvalidGame(format!("player {i} action {a} is not a nonempty facility subset")));
                }
                let mut sorted = set.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != set.len() {
                    return Err(Error::InvalidGame(format!("player {i} action {a} repeats a facility")));
                }
            }
        }
        Ok(())
    }

    pub fn num_players(&self) -> usize {
        self.actions.len()
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.actions.iter().map(Vec::len).collect()
    }

    /// `n^f(a)` for every facility.
    pub fn loads(&self, actions: &[usize]) -> Vec<usize> {
        let mut n = vec![0; self.facilities];
        for (i, &a) in actions.iter().enumerate() {
            for &f in &self.actions[i][a] {
                n[f] += 1;
            }
        }
        n
    }

    /// `R_i(a) = sum_{f in a_i} R^f(n^f(a))`.
    pub fn player_rewards(&self, actions: &[usize]) -> Vec<f64> {
        let n = self.loads(actions);
        actions
            .iter()
            .enumerate()
            .map(|(i, &a)| self.actions[i][a].iter().map(|&f| self.rewards[f][n[f] - 1]).sum())
            .collect()
    }

    /// Constraint radius that covers the scaled facility features.
    pub fn recommended_radius(&self) -> f64 {
        self.facilities as f64
    }
}

/// Expands a congestion game into a one-step, one-state Markov game and its
/// facility-incidence features scaled by `1/sqrt(F)`.
pub fn congestion_to_markov_game(cg: &CongestionGame) -> Result<(TabularMarkovGame, FeatureMap)> {
    congestion_to_markov_game_capped(cg, JOINT_CAP)
}

pub fn congestion_to_markov_game_capped(cg: &CongestionGame, cap: usize) -> Result<(TabularMarkovGame, FeatureMap)> {
    cg.validate()?;
    let counts = cg.action_counts();
    let size = counts.iter().try_fold(1usize, |acc, &a| acc.checked_mul(a)).unwrap_or(usize::MAX);
    if size > cap {
        return Err(Error::CapExceeded { what: "congestion joint actions", size: size as u128, cap: cap as u128 });
    }
    let game =
        TabularMarkovGame::from_fn(1, 1, counts.clone(), cg.noise, 0, |_, _, a| (cg.player_rewards(a), vec![1.0]))?;
    let scale = 1.0 / (cg.facilities as f64).sqrt();
    let dims = vec![cg.facilities; counts.len()];
    let features = FeatureMap::from_fn(1, &counts, &dims, scale, |i, _, a| {
        let mut phi = vec![0.0; cg.facilities];
        for &f in &cg.actions[i][a] {
            phi[f] = scale;
        }
        phi
    })?;
    Ok((game, features))
}

/// Rosenthal potential `sum_f sum_{n=1}^{n^f(a)} R^f(n)` of a pure profile.
pub fn rosenthal_potential(cg: &CongestionGame, actions: &[usize]) -> f64 {
    cg.loads(actions).iter().zip(&cg.rewards).map(|(&n, row)| row[..n].iter().sum::<f64>()).sum()
}

/// Singleton actions: player `i`'s action `f` uses facility `f` only.
pub fn singleton_actions(players: usize, facilities: usize) -> Vec<Vec<Vec<usize>>> {
    vec![(0..facilities).map(|f| vec![f]).collect(); players]
}

/// Random congestion game with rewards nonincreasing in load:
/// `R^f(1) ~ U[0, 1/F]` and `R^f(n+1) ~ U[0, R^f(n)]`.
pub fn random_congestion(
    seed: u64,
    players: usize,
    facilities: usize,
    actions: Vec<Vec<Vec<usize>>>,
) -> Result<CongestionGame> {
    let mut rng = rng::stream(seed, &[0xc0_6e57]);
    let mut rewards = Vec::with_capacity(facilities);
    for _ in 0..facilities {
        let mut row = Vec::with_capacity(players);
        let mut hi = 1.0 / facilities as f64;
        for _ in 0..players {
            let r = rng.random::<f64>() * hi;
            row.push(r);
            hi = r;
        }
        rewards.push(row);
    }
    CongestionGame::new(facilities, actions, rewards, RewardNoise::Bernoulli)
}

/// Two players, two facilities, singleton actions, `R^f(1) = 0.5/F`, `R^f(2) = 0.25/F`.
pub fn congestion_preset() -> CongestionGame {
    let f = 2.0;
    CongestionGame::new(2, singleton_actions(2, 2), vec![vec![0.5 / f, 0.25 / f]; 2], RewardNoise::Bernoulli)
        .expect("preset is valid")
}

/// Joint-action index of a pure congestion profile in the expanded game.
pub fn profile_index(cg: &CongestionGame, actions: &[usize]) -> usize {
    JointActions::new(&cg.action_counts()).expect("validated").index(actions)
}
