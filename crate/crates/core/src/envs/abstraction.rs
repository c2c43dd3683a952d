use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use crate::error::{Error, Result};
use crate::game::model::TabularMarkovGame;

/// A total map `psi: S -> Z` over a base game's states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionSpec {
    /// `map[s] = psi(s)`.
    pub map: Vec<usize>,
    /// `|Z|`.
    pub abstract_states: usize,
}

impl AbstractionSpec {
    pub fn new(map: Vec<usize>, abstract_states: usize) -> Result<Self> {
        let spec = Self { map, abstract_states };
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity(states: usize) -> Self {
        Self { map: (0..states).collect(), abstract_states: states }
    }

    pub fn validate(&self) -> Result<()> {
        if self.abstract_states == 0 || self.abstract_states > self.map.len() {
            return Err(Error::InvalidParams(format!(
                "abstraction has {} cells for {} states",
                self.abstract_states,
                self.map.len()
            )));
        }
        if let Some(z) = self.map.iter().find(|&&z| z >= self.abstract_states) {
            return Err(Error::InvalidParams(format!("abstract state {z} out of range")));
        }
        Ok(())
    }
}

/// How far states sharing an abstract state disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionReport {
    /// `eps[h][z]`: the largest reward gap or L1 transition gap between two
    /// states mapped to `z`, over players and joint actions, at step `h`.
    pub eps: Vec<Vec<f64>>,
    /// Maximum of `eps` over steps and abstract states.
    pub nu: f64,
}

/// Features `e_(psi(s), a_i)` over the base game, with the exact per-step
/// disagreement of merged states.
pub fn abstraction_env(
    base: &TabularMarkovGame,
    spec: &AbstractionSpec,
) -> Result<(TabularMarkovGame, FeatureMap, AbstractionReport)> {
    spec.validate()?;
    if spec.map.len() != base.num_states() {
        return Err(Error::ShapeMismatch(format!(
            "abstraction covers {} states; game has {}",
            spec.map.len(),
            base.num_states()
        )));
    }
    let z_count = spec.abstract_states;
    let counts = base.action_counts();
    let dims: Vec<usize> = counts.iter().map(|a| z_count * a).collect();
    let features = FeatureMap::from_fn(base.num_states(), counts, &dims, 1.0, |i, s, a| {
        let mut phi = vec![0.0; dims[i]];
        phi[spec.map[s] * counts[i] + a] = 1.0;
        phi
    })?;

    let (horizon, states, joint) = (base.horizon(), base.num_states(), base.joint().len());
    let mut eps = vec![vec![0.0_f64; z_count]; horizon];
    for (h, row) in eps.iter_mut().enumerate() {
        for s in 0..states {
            for t in (s + 1)..states {
                if spec.map[s] != spec.map[t] {
                    continue;
                }
                let mut worst: f64 = 0.0;
                for a in 0..joint {
                    let rs = base.mean_rewards(h, s, a);
                    let rt = base.mean_rewards(h, t, a);
                    for (x, y) in rs.iter().zip(rt) {
                        worst = worst.max((x - y).abs());
                    }
                    let l1: f64 = base
                        .transition_row(h, s, a)
                        .iter()
                        .zip(base.transition_row(h, t, a))
                        .map(|(x, y)| (x - y).abs())
                        .sum();
                    worst = worst.max(l1);
                }
                let z = spec.map[s];
                row[z] = row[z].max(worst);
            }
        }
    }
    let nu = eps.iter().flatten().copied().fold(0.0, f64::max);
    Ok((base.clone(), features, AbstractionReport { eps, nu }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::model::RewardNoise;

    fn two_state(reward_gap: f64) -> TabularMarkovGame {
        TabularMarkovGame::from_fn(1, 2, vec![2], RewardNoise::Deterministic, 0, |_, s, a| {
            let r = 0.2 + 0.1 * a[0] as f64 + if s == 1 { reward_gap } else { 0.0 };
            (vec![r], vec![0.5, 0.5])
        })
        .unwrap()
    }

    #[test]
    fn identity_has_zero_eps() {
        let g = two_state(0.3);
        let (_, phi, rep) = abstraction_env(&g, &AbstractionSpec::identity(2)).unwrap();
        assert_eq!(rep.nu, 0.0);
        assert_eq!(phi.dim(0), 4);
    }

    #[test]
    fn merged_identical_states() {
        let (_, phi, rep) = abstraction_env(&two_state(0.0), &AbstractionSpec::new(vec![0, 0], 1).unwrap()).unwrap();
        assert_eq!(rep.nu, 0.0);
        assert_eq!(phi.feature(0, 0, 1), phi.feature(0, 1, 1));
    }

    #[test]
    fn merged_reward_gap() {
        let (_, _, rep) = abstraction_env(&two_state(0.3), &AbstractionSpec::new(vec![0, 0], 1).unwrap()).unwrap();
        assert!((rep.eps[0][0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(AbstractionSpec::new(vec![0, 2], 2).is_err());
        assert!(AbstractionSpec::new(vec![0], 2).is_err());
    }
}
