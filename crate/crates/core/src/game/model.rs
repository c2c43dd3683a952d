use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sample_categorical;

const SUM_TOL: f64 = 1e-12;

/// Mixed-radix indexing of joint actions. Player 0 is the most significant
/// digit, so joint index `((a_0 * A_1) + a_1) * A_2 + a_2 ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActions {
    counts: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl JointActions {
    pub fn new(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(Error::InvalidGame("every player needs at least one action".into()));
        }
        let mut strides = vec![1usize; counts.len()];
        let mut len: usize = 1;
        for i in (0..counts.len()).rev() {
            strides[i] = len;
            len = len
                .checked_mul(counts[i])
                .ok_or_else(|| Error::InvalidGame("joint action space overflows usize".into()))?;
        }
        Ok(Self { counts: counts.to_vec(), strides, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_players(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn index(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.counts.len());
        actions.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn decode_into(&self, mut index: usize, out: &mut [usize]) {
        for (i, &stride) in self.strides.iter().enumerate() {
            out[i] = index / stride;
            index %= stride;
        }
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.counts.len()];
        self.decode_into(index, &mut out);
        out
    }

    /// Action of `player` inside joint index `index`.
    pub fn action_of(&self, index: usize, player: usize) -> usize {
        (index / self.strides[player]) % self.counts[player]
    }

    /// Joint index with `player`'s action replaced.
    pub fn with_action(&self, index: usize, player: usize, action: usize) -> usize {
        let old = self.action_of(index, player);
        index - old * self.strides[player] + action * self.strides[player]
    }
}

/// How realized rewards are drawn around their means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardNoise {
    Deterministic,
    /// Realized reward is Bernoulli with the mean reward as success probability.
    #[default]
    Bernoulli,
}

/// Finite-horizon multi-player Markov game with a fixed initial state.
///
/// A random initial distribution `p_1` can be modelled by prepending a dummy
/// step whose transitions ignore the joint action and draw from `p_1`; the
/// library itself only supports a fixed `s_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMarkovGame {
    horizon: usize,
    num_states: usize,
    joint: JointActions,
    /// `[((h * S + s) * J + a) * S + s']`
    transition: Vec<f64>,
    /// `[((h * S + s) * J + a) * m + i]`
    mean_reward: Vec<f64>,
    noise: RewardNoise,
    initial_state: usize,
}

impl TabularMarkovGame {
    pub fn new(
        horizon: usize,
        num_states: usize,
        action_counts: Vec<usize>,
        transition: Vec<f64>,
        mean_reward: Vec<f64>,
        noise: RewardNoise,
        initial_state: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidGame("horizon must be positive".into()));
        }
        if num_states == 0 {
            return Err(Error::InvalidGame("need at least one state".into()));
        }
        if initial_state >= num_states {
            return Err(Error::InvalidGame(format!(
                "initial state {initial_state} out of range for {num_states} states"
            )));
        }
        let joint = JointActions::new(&action_counts)?;
        let m = joint.num_players();
        let cells = horizon * num_states * joint.len();
        if transition.len() != cells * num_states {
            return Err(Error::ShapeMismatch(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                cells * num_states
            )));
        }
        if mean_reward.len() != cells * m {
            return Err(Error::ShapeMismatch(format!(
                "mean_reward has {} entries, expected {}",
                mean_reward.len(),
                cells * m
            )));
        }
        for (c, row) in transition.chunks(num_states).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidGame(format!("transition row {c} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidGame(format!("transition row {c} sums to {sum}")));
            }
        }
        if let Some(r) = mean_reward.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidGame(format!("mean reward {r} outside [0, 1]")));
        }
        Ok(Self { horizon, num_states, joint, transition, mean_reward, noise, initial_state })
    }

    /// Builds a game from a per-cell closure returning `(per-player mean rewards, next-state distribution)`.
    pub fn from_fn<F>(
        horizon: usize,
        num_states: usize,
        action_counts: Vec<usize>,
        noise: RewardNoise,
        initial_state: usize,
        mut cell: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize, &[usize]) -> (Vec<f64>, Vec<f64>),
    {
        let joint = JointActions::new(&action_counts)?;
        let mut transition = Vec::with_capacity(horizon * num_states * joint.len() * num_states);
        let mut mean_reward = Vec::with_capacity(horizon * num_states * joint.len() * joint.num_players());
        let mut actions = vec![0; joint.num_players()];
        for h in 0..horizon {
            for s in 0..num_states {
                for a in 0..joint.len() {
                    joint.decode_into(a, &mut actions);
                    let (r, p) = cell(h, s, &actions);
                    if r.len() != joint.num_players() || p.len() != num_states {
                        return Err(Error::ShapeMismatch("cell closure returned wrong lengths".into()));
                    }
                    mean_reward.extend(r);
                    transition.extend(p);
                }
            }
        }
        Self::new(horizon, num_states, action_counts, transition, mean_reward, noise, initial_state)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_players(&self) -> usize {
        self.joint.num_players()
    }

    pub fn action_counts(&self) -> &[usize] {
        self.joint.counts()
    }

    pub fn max_actions(&self) -> usize {
        self.joint.counts().iter().copied().max().unwrap_or(1)
    }

    pub fn joint(&self) -> &JointActions {
        &self.joint
    }

    pub fn noise(&self) -> RewardNoise {
        self.noise
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Number of `(h, s, a)` cells.
    pub fn num_cells(&self) -> usize {
        self.horizon * self.num_states * self.joint.len()
    }

    fn cell(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.num_states + s) * self.joint.len() + a
    }

    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let c = self.cell(h, s, a) * self.num_states;
        &self.transition[c..c + self.num_states]
    }

    pub fn mean_rewards(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let m = self.num_players();
        let c = self.cell(h, s, a) * m;
        &self.mean_reward[c..c + m]
    }

    pub fn mean_reward(&self, h: usize, s: usize, a: usize, player: usize) -> f64 {
        self.mean_reward[self.cell(h, s, a) * self.num_players() + player]
    }

    pub fn with_noise(mut self, noise: RewardNoise) -> Self {
        self.noise = noise;
        self
    }

    /// Draws `s'` and the realized per-player rewards for one step.
    pub fn sample_step<R: Rng + ?Sized>(
        &self,
        h: usize,
        s: usize,
        a: usize,
        rng: &mut R,
        rewards: &mut [f64],
    ) -> usize {
        for (out, &mean) in rewards.iter_mut().zip(self.mean_rewards(h, s, a)) {
            *out = match self.noise {
                RewardNoise::Deterministic => mean,
                RewardNoise::Bernoulli => {
                    if rng.random::<f64>() < mean {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        sample_categorical(self.transition_row(h, s, a), rng)
    }

    pub fn to_document(&self) -> GameDocument {
        let (h, s, j, m) = (self.horizon, self.num_states, self.joint.len(), self.num_players());
        GameDocument {
            horizon: h,
            players: m,
            states: s,
            action_counts: self.joint.counts().to_vec(),
            transition: Tensor { shape: vec![h, s, j, s], data: self.transition.clone() },
            mean_reward: Tensor { shape: vec![h, s, j, m], data: self.mean_reward.clone() },
            noise: self.noise,
            initial_state: self.initial_state,
        }
    }

    pub fn from_document(doc: GameDocument) -> Result<Self> {
        let joint = JointActions::new(&doc.action_counts)?;
        if doc.players != doc.action_counts.len() {
            return Err(Error::ShapeMismatch(format!(
                "players = {} but {} action counts given",
                doc.players,
                doc.action_counts.len()
            )));
        }
        let expect_t = [doc.horizon, doc.states, joint.len(), doc.states];
        let expect_r = [doc.horizon, doc.states, joint.len(), doc.players];
        doc.transition.check_shape("transition", &expect_t)?;
        doc.mean_reward.check_shape("mean_reward", &expect_r)?;
        Self::new(
            doc.horizon,
            doc.states,
            doc.action_counts,
            doc.transition.data,
            doc.mean_reward.data,
            doc.noise,
            doc.initial_state,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Dense row-major tensor with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn check_shape(&self, name: &str, expected: &[usize]) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch(format!("{name} has shape {:?}, expected {:?}", self.shape, expected)));
        }
        let n: usize = expected.iter().product();
        if self.data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{name} holds {} values but shape {:?} needs {n}",
                self.data.len(),
                self.shape
            )));
        }
        Ok(())
    }
}

/// On-disk form of [`TabularMarkovGame`].
///
/// `transition` has shape `[horizon, states, joint_actions, states]` and
/// `mean_reward` has shape `[horizon, states, joint_actions, players]`; joint
/// actions are indexed with player 0 as the most significant digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameDocument {
    pub horizon: usize,
    pub players: usize,
    pub states: usize,
    pub action_counts: Vec<usize>,
    pub transition: Tensor,
    pub mean_reward: Tensor,
    #[serde(default)]
    pub noise: RewardNoise,
    #[serde(default)]
    pub initial_state: usize,
}
