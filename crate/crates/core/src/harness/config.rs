//! Experiment configuration documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::common::EquilibriumKind;
use crate::envs::{
    bandit, chain_mdp, coin_coordination, congestion_preset, dominant_cooperative, matching_pennies, random_congestion,
    random_game, singleton_actions, LinearGame, RewardStructure,
};
use crate::error::{Error, Result};
use crate::game::model::TabularMarkovGame;
use crate::nash_ca::{NashCaTuning, Potential};
use crate::prebo::PreboTuning;
use crate::prefi::{check_accuracy, PrefiTuning};

/// Environment family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Random {
        states: usize,
        actions: Vec<usize>,
        horizon: usize,
        #[serde(default)]
        structure: RewardStructure,
        #[serde(default)]
        seed: u64,
    },
    MatchingPennies,
    CoinCoordination,
    Bandit {
        means: Vec<f64>,
    },
    ChainMdp {
        horizon: usize,
    },
    DominantCooperative {
        actions: Vec<usize>,
        target: Vec<usize>,
    },
    /// Two players, two facilities, fixed rewards.
    CongestionPreset,
    /// Random singleton congestion game with decreasing facility rewards.
    Congestion {
        players: usize,
        facilities: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Game document on disk; paths are relative to the config file.
    File {
        path: PathBuf,
    },
}

/// A built environment with the potential used for diagnostics, if the
/// family is a potential game.
#[derive(Debug, Clone)]
pub struct BuiltEnv {
    pub env: LinearGame,
    pub potential: Option<Potential>,
}

impl EnvSpec {
    pub fn build(&self) -> Result<BuiltEnv> {
        let shared = |game: TabularMarkovGame| BuiltEnv {
            env: LinearGame::tabular(game),
            potential: Some(Potential::SharedReward),
        };
        Ok(match self {
            Self::Random { states, actions, horizon, structure, seed } => {
                let game = random_game(*seed, *states, actions, *horizon, *structure)?;
                let potential = (*structure == RewardStructure::Cooperative || actions.len() == 1)
                    .then_some(Potential::SharedReward);
                BuiltEnv { env: LinearGame::tabular(game), potential }
            }
            Self::MatchingPennies => BuiltEnv { env: LinearGame::tabular(matching_pennies()), potential: None },
            Self::CoinCoordination => shared(coin_coordination()),
            Self::Bandit { means } => {
                if means.is_empty() || means.iter().any(|m| !(0.0..=1.0).contains(m)) {
                    return Err(Error::Config("bandit means must be nonempty and lie in [0, 1]".into()));
                }
                shared(bandit(means))
            }
            Self::ChainMdp { horizon } => {
                if *horizon == 0 {
                    return Err(Error::Config("horizon must be positive".into()));
                }
                shared(chain_mdp(*horizon))
            }
            Self::DominantCooperative { actions, target } => {
                if actions.is_empty()
                    || actions.len() != target.len()
                    || target.iter().zip(actions).any(|(t, a)| t >= a)
                {
                    return Err(Error::Config("target must name one valid action per player".into()));
                }
                shared(dominant_cooperative(actions, target))
            }
            Self::CongestionPreset => {
                let cg = congestion_preset();
                BuiltEnv { env: LinearGame::congestion(&cg)?, potential: Some(Potential::Congestion(cg)) }
            }
            Self::Congestion { players, facilities, seed } => {
                let cg = random_congestion(*seed, *players, *facilities, singleton_actions(*players, *facilities))?;
                BuiltEnv { env: LinearGame::congestion(&cg)?, potential: Some(Potential::Congestion(cg)) }
            }
            Self::File { path } => {
                BuiltEnv { env: LinearGame::tabular(TabularMarkovGame::load(path)?), potential: None }
            }
        })
    }
}

/// Learning algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "prefi")]
    Prefi,
    #[serde(rename = "prefi-agile")]
    PrefiAgile,
    #[serde(rename = "prebo")]
    Prebo,
    #[serde(rename = "nash-ca")]
    NashCa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Prefi => "prefi",
            Self::PrefiAgile => "prefi-agile",
            Self::Prebo => "prebo",
            Self::NashCa => "nash-ca",
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Exact gaps of the returned policy.
    #[serde(default = "yes")]
    pub exact: bool,
    /// Exact gaps of every episode's policy as well.
    #[serde(default)]
    pub per_episode: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { exact: true, per_episode: false }
    }
}

/// One experiment: an environment, an algorithm and a list of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub mode: EquilibriumKind,
    pub epsilon: f64,
    pub delta: f64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Override of the regression radius `W`.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub prefi: PrefiTuning,
    #[serde(default)]
    pub prebo: PreboTuning,
    #[serde(default)]
    pub nash_ca: NashCaTuning,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let EnvSpec::File { path: p } = &mut cfg.env {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut cfg.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<BuiltEnv> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        check_accuracy(self.epsilon, self.delta).map_err(|e| Error::Config(e.to_string()))?;
        if let EnvSpec::File { path } = &self.env {
            if !path.exists() {
                return Err(Error::Config(format!("game file {} does not exist", path.display())));
            }
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("radius must be positive, got {r}")));
            }
        }
        let mut built = self.env.build()?;
        if let Some(r) = self.radius {
            built.env.radius = Some(r);
        }
        if self.algorithm == Algorithm::NashCa && built.potential.is_none() {
            return Err(Error::Config("nash-ca needs a potential game (congestion or shared-reward family)".into()));
        }
        Ok(built)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"env": {"family": "matching_pennies"}, "algorithm": "prebo", "epsilon": 0.2, "delta": 0.1, "seeds": [1]}"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Prebo);
        assert!(cfg.evaluation.exact);
        assert_eq!(cfg.hash().len(), 64);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let empty = MINIMAL.replace("[1]", "[]");
        assert!(matches!(ExperimentConfig::from_json(&empty).unwrap().validate(), Err(Error::Config(_))));
        let nash = MINIMAL.replace("prebo", "nash-ca");
        assert!(ExperimentConfig::from_json(&nash).unwrap().validate().is_err());
        let unknown = MINIMAL.replace("\"seeds\"", "\"bogus\": 1, \"seeds\"");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
        let missing = MINIMAL.replace("matching_pennies\"}", "file\", \"path\": \"/nonexistent/game.json\"}");
        assert!(ExperimentConfig::from_json(&missing).unwrap().validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let b = ExperimentConfig::from_json(&MINIMAL.replace("0.2", "0.3")).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.clone().hash());
    }
}
