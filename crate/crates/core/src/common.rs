//! Types shared by the learning algorithms.

use serde::{Deserialize, Serialize};

use crate::envs::LinearGame;
use crate::game::model::TabularMarkovGame;
use crate::game::policy::MixtureMarkovPolicy;
use crate::oracles::LearnerMode;

/// Target equilibrium notion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    /// Coarse correlated equilibrium (external regret).
    #[default]
    Cce,
    /// Correlated equilibrium (swap regret).
    Ce,
}

impl EquilibriumKind {
    pub fn full_information_mode(self) -> LearnerMode {
        match self {
            Self::Cce => LearnerMode::FullExternal,
            Self::Ce => LearnerMode::FullSwap,
        }
    }

    pub fn bandit_mode(self) -> LearnerMode {
        match self {
            Self::Cce => LearnerMode::BanditExternal,
            Self::Ce => LearnerMode::BanditSwap,
        }
    }
}

/// Sizes that enter the parameter formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvDims {
    pub players: usize,
    pub horizon: usize,
    pub states: usize,
    pub d_max: usize,
    pub a_max: usize,
}

impl EnvDims {
    pub fn of_game(game: &TabularMarkovGame) -> Self {
        Self {
            players: game.num_players(),
            horizon: game.horizon(),
            states: game.num_states(),
            d_max: 0,
            a_max: game.max_actions(),
        }
    }

    pub fn of_linear(env: &LinearGame) -> Self {
        Self { d_max: env.features.d_max(), ..Self::of_game(&env.game) }
    }
}

/// Per-episode diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Repeat count `n^k` given to this episode's policy in the cover.
    pub repeats: usize,
    /// `n^tot` after the cover update.
    pub total_repeats: usize,
    /// Optimistic values `V̄_{1,i}(s_1)`.
    pub upper: Vec<f64>,
    /// Pessimistic values `V̲_{1,i}(s_1)`; absent for variants without them.
    pub lower: Option<Vec<f64>>,
    /// `max_i V̄ - V̲` at `s_1`, when both are available.
    pub certificate: Option<f64>,
    /// Trajectories sampled so far.
    pub trajectories: u64,
}

/// Result of a learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub policy: MixtureMarkovPolicy,
    /// 1-based episode whose policy was returned.
    pub output_episode: usize,
    /// Certified gap bound of the returned policy, when the algorithm has one.
    pub certified_bound: Option<f64>,
    /// Whether the bound is at most the target accuracy.
    pub certified: bool,
    pub episodes: Vec<EpisodeRecord>,
    pub trajectories: u64,
    /// Every episode's policy, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub episode_policies: Vec<MixtureMarkovPolicy>,
}

/// `max_i (upper_i - lower_i)`.
pub fn certificate(upper: &[f64], lower: &[f64]) -> f64 {
    upper.iter().zip(lower).map(|(u, l)| u - l).fold(f64::NEG_INFINITY, f64::max)
}

/// Index of the smallest certificate, earliest on ties.
pub fn argmin_certificate(records: &[EpisodeRecord]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in records.iter().enumerate() {
        if let Some(c) = r.certificate {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((k, c));
            }
        }
    }
    best.map(|(k, _)| k)
}

/// Runs `f` for every player, in parallel when the `parallel` feature is
/// on. Results come back in player order, so the outcome does not depend on
/// scheduling.
pub(crate) fn map_players<T, F>(players: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..players).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..players).map(f).collect()
    }
}

/// Stream tags for the counter-based seeds.
pub(crate) mod tags {
    pub const REPLAY: u64 = 1;
    pub const COVER: u64 = 2;
    pub const OUTPUT: u64 = 3;
    pub const EVALUATION: u64 = 4;
    pub const SOLVER: u64 = 5;
}
