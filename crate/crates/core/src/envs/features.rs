use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::model::TabularMarkovGame;

/// Slack allowed on the unit-norm bound for rounding.
const NORM_SLACK: f64 = 1e-12;

/// Per-player features `phi_i(s, a_i)` with `||phi_i(s, a_i)||_2 <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    states: usize,
    action_counts: Vec<usize>,
    dims: Vec<usize>,
    /// `data[i][(s * A_i + a) * d_i + k]`.
    data: Vec<Vec<f64>>,
    /// Factor already applied to the raw features (1 when unscaled).
    scale: f64,
}

impl FeatureMap {
    pub fn new(
        states: usize,
        action_counts: Vec<usize>,
        dims: Vec<usize>,
        data: Vec<Vec<f64>>,
        scale: f64,
    ) -> Result<Self> {
        if dims.len() != action_counts.len() || data.len() != action_counts.len() {
            return Err(Error::ShapeMismatch("feature map needs one block per player".into()));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParams(format!("feature scale must be positive, got {scale}")));
        }
        for (i, ((&a, &d), block)) in action_counts.iter().zip(&dims).zip(&data).enumerate() {
            if d == 0 {
                return Err(Error::ShapeMismatch(format!("player {i} has zero feature dimension")));
            }
            if block.len() != states * a * d {
                return Err(Error::ShapeMismatch(format!(
                    "player {i}: expected {} feature entries, got {}",
                    states * a * d,
                    block.len()
                )));
            }
            for (row, phi) in block.chunks(d).enumerate() {
                if phi.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("feature"));
                }
                let norm = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1.0 + NORM_SLACK {
                    return Err(Error::InvalidParams(format!(
                        "player {i}, state {}, action {}: feature norm {norm} exceeds 1",
                        row / a,
                        row % a
                    )));
                }
            }
        }
        Ok(Self { states, action_counts, dims, data, scale })
    }

    /// Builds a map from `f(i, s, a_i)`, which must return `dims[i]` entries.
    pub fn from_fn<F>(states: usize, action_counts: &[usize], dims: &[usize], scale: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> Vec<f64>,
    {
        let mut data = Vec::with_capacity(action_counts.len());
        for (i, (&a, &d)) in action_counts.iter().zip(dims).enumerate() {
            let mut block = Vec::with_capacity(states * a * d);
            for s in 0..states {
                for ai in 0..a {
                    let phi = f(i, s, ai);
                    if phi.len() != d {
                        return Err(Error::ShapeMismatch(format!(
                            "player {i}: feature of length {} != {d}",
                            phi.len()
                        )));
                    }
                    block.extend(phi);
                }
            }
            data.push(block);
        }
        Self::new(states, action_counts.to_vec(), dims.to_vec(), data, scale)
    }

    pub fn num_players(&self) -> usize {
        self.dims.len()
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn dim(&self, player: usize) -> usize {
        self.dims[player]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn d_max(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn feature(&self, player: usize, s: usize, a: usize) -> &[f64] {
        let d = self.dims[player];
        let start = (s * self.action_counts[player] + a) * d;
        &self.data[player][start..start + d]
    }

    /// Checks that the map matches a game's state and action spaces.
    pub fn check_compatible(&self, game: &TabularMarkovGame) -> Result<()> {
        if self.states != game.num_states() || self.action_counts != game.action_counts() {
            return Err(Error::ShapeMismatch(format!(
                "features cover {} states and actions {:?}; game has {} states and actions {:?}",
                self.states,
                self.action_counts,
                game.num_states(),
                game.action_counts()
            )));
        }
        Ok(())
    }
}

/// One-hot features `e_(s, a_i)` laid out state-major, so `d_i = S * A_i`.
pub fn tabular_features(game: &TabularMarkovGame) -> FeatureMap {
    let states = game.num_states();
    let counts = game.action_counts();
    let dims: Vec<usize> = counts.iter().map(|a| states * a).collect();
    FeatureMap::from_fn(states, counts, &dims, 1.0, |i, s, a| {
        let mut phi = vec![0.0; dims[i]];
        phi[s * counts[i] + a] = 1.0;
        phi
    })
    .expect("one-hot features are valid")
}
