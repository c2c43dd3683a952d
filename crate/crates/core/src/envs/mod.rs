//! Game families and per-player feature maps.

mod abstraction;
mod congestion;
mod features;
mod presets;
mod random;

pub use abstraction::{abstraction_env, AbstractionReport, AbstractionSpec};
pub use congestion::{
    congestion_preset, congestion_to_markov_game, congestion_to_markov_game_capped, profile_index, random_congestion,
    rosenthal_potential, singleton_actions, CongestionGame,
};
pub use features::{tabular_features, FeatureMap};
pub use presets::{bandit, chain_mdp, coin_coordination, dominant_cooperative, matching_pennies};
pub use random::{random_game, RewardStructure};

use crate::error::Result;
use crate::game::model::TabularMarkovGame;

/// A game paired with per-player features and an optional override of the
/// regression radius `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGame {
    pub game: TabularMarkovGame,
    pub features: FeatureMap,
    pub radius: Option<f64>,
}

impl LinearGame {
    pub fn new(game: TabularMarkovGame, features: FeatureMap) -> Result<Self> {
        features.check_compatible(&game)?;
        Ok(Self { game, features, radius: None })
    }

    /// The game with one-hot state-action features.
    pub fn tabular(game: TabularMarkovGame) -> Self {
        let features = tabular_features(&game);
        Self { game, features, radius: None }
    }

    /// Congestion game with scaled incidence features and `W = F`.
    pub fn congestion(cg: &CongestionGame) -> Result<Self> {
        let (game, features) = congestion_to_markov_game(cg)?;
        Ok(Self { game, features, radius: Some(cg.recommended_radius()) })
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }
}
