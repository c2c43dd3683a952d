use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::model::TabularMarkovGame;
use crate::game::policy::MixtureMarkovPolicy;
use crate::rng::sample_categorical;

/// One `(s_h, a_h, r_h, s_{h+1})` tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub step: usize,
    pub state: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&Transition> {
        self.steps.last()
    }

    /// Realized return of `player`.
    pub fn total_reward(&self, player: usize) -> f64 {
        self.steps.iter().map(|t| t.rewards[player]).sum()
    }
}

/// How one player acts at the switch step of [`concat_rollout`].
#[derive(Debug, Clone, Copy)]
pub enum SwitchAction<'a> {
    /// Keep the cover policy's action (drawn from the shared mixture component).
    Cover,
    /// Draw from a per-state table: `table[s]` is the distribution at state `s`.
    PerState(&'a [Vec<f64>]),
}

static ROLLOUTS: AtomicU64 = AtomicU64::new(0);

/// Number of trajectories drawn by [`sample_trajectory`] and
/// [`concat_rollout`] in this process so far.
pub fn rollout_count() -> u64 {
    ROLLOUTS.load(Ordering::Relaxed)
}

fn check_step(game: &TabularMarkovGame, stop_step: usize) -> Result<()> {
    if stop_step == 0 || stop_step > game.horizon() {
        return Err(Error::InvalidParams(format!("stop step {stop_step} outside 1..={}", game.horizon())));
    }
    Ok(())
}

/// Plays `policy` for the first `stop_step` steps.
///
/// At each step one mixture component is drawn by weight, then every player
/// samples independently from its factor. This is the shared-seed sampling
/// scheme: all players agree on the component, act independently inside it.
pub fn sample_trajectory<R: Rng + ?Sized>(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    stop_step: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    check_step(game, stop_step)?;
    policy.check_compatible(game)?;
    ROLLOUTS.fetch_add(1, Ordering::Relaxed);
    let m = game.num_players();
    let mut steps = Vec::with_capacity(stop_step);
    let mut s = game.initial_state();
    let mut actions = vec![0; m];
    for h in 0..stop_step {
        policy.sample_component(h, s, rng).sample_actions(rng, &mut actions);
        let a = game.joint().index(&actions);
        let mut rewards = vec![0.0; m];
        let next = game.sample_step(h, s, a, rng, &mut rewards);
        steps.push(Transition { step: h, state: s, actions: actions.clone(), rewards, next_state: next });
        s = next;
    }
    Ok(Trajectory { steps })
}

/// Follows `cover` for steps `0..switch_step`, then at `switch_step` lets each
/// player act as `switch[i]` says. The returned trajectory has
/// `switch_step + 1` transitions; the last one is the switch-step tuple.
pub fn concat_rollout<R: Rng + ?Sized>(
    game: &TabularMarkovGame,
    cover: &MixtureMarkovPolicy,
    switch: &[SwitchAction<'_>],
    switch_step: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    check_step(game, switch_step + 1)?;
    cover.check_compatible(game)?;
    if switch.len() != game.num_players() {
        return Err(Error::ShapeMismatch("one switch action per player required".into()));
    }
    ROLLOUTS.fetch_add(1, Ordering::Relaxed);
    let m = game.num_players();
    let mut steps = Vec::with_capacity(switch_step + 1);
    let mut s = game.initial_state();
    let mut actions = vec![0; m];
    for h in 0..=switch_step {
        let layer = cover.sample_component(h, s, rng);
        if h < switch_step {
            layer.sample_actions(rng, &mut actions);
        } else {
            for (i, sw) in switch.iter().enumerate() {
                actions[i] = match sw {
                    SwitchAction::Cover => sample_categorical(&layer.dists[i], rng),
                    SwitchAction::PerState(table) => sample_categorical(&table[s], rng),
                };
            }
        }
        let a = game.joint().index(&actions);
        let mut rewards = vec![0.0; m];
        let next = game.sample_step(h, s, a, rng, &mut rewards);
        steps.push(Transition { step: h, state: s, actions: actions.clone(), rewards, next_state: next });
        s = next;
    }
    Ok(Trajectory { steps })
}

/// Seeded convenience wrapper around [`sample_trajectory`].
pub fn sample_trajectory_seeded(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    stop_step: usize,
    seed: u64,
) -> Result<Trajectory> {
    sample_trajectory(game, policy, stop_step, &mut crate::rng::stream(seed, &[]))
}
