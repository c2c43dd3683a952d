use rand::Rng;
use rand_distr::Exp1;

use crate::error::Result;
use crate::game::model::{RewardNoise, TabularMarkovGame};
use crate::rng::{self, StreamRng};

/// Reward structure of a generated game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardStructure {
    /// Independent `U[0, 1]` rewards per player.
    #[default]
    General,
    /// Two players with `R_1 + R_2 = 1`.
    ZeroSum,
    /// One shared `U[0, 1]` reward; a potential game.
    Cooperative,
}

fn dirichlet_ones(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let mut p: Vec<f64> = draws.iter().map(|x| x / total).collect();
    // Push the rounding residue onto the largest entry so rows sum to one.
    let residue = 1.0 - p.iter().sum::<f64>();
    let top = (0..n).fold(0, |b, k| if p[k] > p[b] { k } else { b });
    p[top] += residue;
    p
}

/// Random game with `Dirichlet(1, ..., 1)` transition rows and uniform mean
/// rewards, starting in state 0.
pub fn random_game(
    seed: u64,
    states: usize,
    action_counts: &[usize],
    horizon: usize,
    structure: RewardStructure,
) -> Result<TabularMarkovGame> {
    let m = action_counts.len();
    if structure == RewardStructure::ZeroSum && m != 2 {
        return Err(crate::Error::InvalidParams("zero-sum games have exactly two players".into()));
    }
    let mut rng = rng::stream(seed, &[0x6a3e]);
    TabularMarkovGame::from_fn(horizon, states, action_counts.to_vec(), RewardNoise::Bernoulli, 0, |_, _, _| {
        let rewards = match structure {
            RewardStructure::General => (0..m).map(|_| rng.random::<f64>()).collect(),
            RewardStructure::ZeroSum => {
                let r: f64 = rng.random();
                vec![r, 1.0 - r]
            }
            RewardStructure::Cooperative => vec![rng.random::<f64>(); m],
        };
        (rewards, dirichlet_ones(&mut rng, states))
    })
}
