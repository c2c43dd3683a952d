//! Exact backward dynamic programming over joint actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::model::TabularMarkovGame;
use crate::game::policy::{MixtureMarkovPolicy, PlayerPolicy, StrategyModification};

/// Gaps below this are treated as rounding noise; anything more negative is a bug.
pub const GAP_FLOOR: f64 = -1e-9;

/// Enumeration caps for the exact evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalLimits {
    /// Upper bound on `H * S * |A|` cells visited by the DP.
    pub max_cells: u128,
}

impl Default for EvalLimits {
    fn default() -> Self {
        Self { max_cells: 10_000_000 }
    }
}

impl EvalLimits {
    fn check(&self, game: &TabularMarkovGame) -> Result<()> {
        let cells = game.num_cells() as u128;
        if cells > self.max_cells {
            return Err(Error::CapExceeded { what: "joint-action enumeration", size: cells, cap: self.max_cells });
        }
        Ok(())
    }
}

/// `V_{h,i}(s)` for `h` in `0..=H` (layer `H` is identically zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    horizon: usize,
    states: usize,
    players: usize,
    data: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(horizon: usize, states: usize, players: usize) -> Self {
        Self { horizon, states, players, data: vec![0.0; (horizon + 1) * states * players] }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_players(&self) -> usize {
        self.players
    }

    pub fn get(&self, h: usize, s: usize, player: usize) -> f64 {
        self.data[(h * self.states + s) * self.players + player]
    }

    pub fn set(&mut self, h: usize, s: usize, player: usize, v: f64) {
        self.data[(h * self.states + s) * self.players + player] = v;
    }

    /// Values of all players at `(h, s)`.
    pub fn at(&self, h: usize, s: usize) -> &[f64] {
        let c = (h * self.states + s) * self.players;
        &self.data[c..c + self.players]
    }

    /// Values at the initial step for state `s`.
    pub fn initial(&self, s: usize) -> Vec<f64> {
        self.at(0, s).to_vec()
    }
}

/// Continuation `sum_{s'} P_h(s'|s,a) V_{h+1,i}(s')`.
fn continuation(game: &TabularMarkovGame, next: &ValueTable, h: usize, s: usize, a: usize, player: usize) -> f64 {
    game.transition_row(h, s, a)
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(sp, p)| p * next.get(h + 1, sp, player))
        .sum()
}

fn prepare(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy, limits: EvalLimits) -> Result<()> {
    policy.check_compatible(game)?;
    limits.check(game)
}

/// Exact `V^pi` for every player.
pub fn evaluate_value(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy) -> Result<ValueTable> {
    evaluate_value_with(game, policy, EvalLimits::default())
}

pub fn evaluate_value_with(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    limits: EvalLimits,
) -> Result<ValueTable> {
    prepare(game, policy, limits)?;
    let (horizon, states, m) = (game.horizon(), game.num_states(), game.num_players());
    let joint = game.joint();
    let mut values = ValueTable::zeros(horizon, states, m);
    for h in (0..horizon).rev() {
        for s in 0..states {
            let probs = policy.joint_probs(h, s, joint);
            for i in 0..m {
                let v: f64 = probs
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(a, p)| p * (game.mean_reward(h, s, a, i) + continuation(game, &values, h, s, a, i)))
                    .sum();
                values.set(h, s, i, v);
            }
        }
    }
    Ok(values)
}

/// Per-`(h, s)` values of one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerValues {
    pub player: usize,
    pub horizon: usize,
    pub states: usize,
    /// Indexed by `h * states + s` for `h` in `0..=H`.
    pub values: Vec<f64>,
}

impl PlayerValues {
    fn zeros(player: usize, horizon: usize, states: usize) -> Self {
        Self { player, horizon, states, values: vec![0.0; (horizon + 1) * states] }
    }

    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.values[h * self.states + s]
    }

    fn set(&mut self, h: usize, s: usize, v: f64) {
        self.values[h * self.states + s] = v;
    }

    /// As a single-column [`ValueTable`], for code that works on tables.
    fn as_table(&self) -> ValueTable {
        ValueTable { horizon: self.horizon, states: self.states, players: 1, data: self.values.clone() }
    }
}

fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

/// `V^{dagger, pi_{-i}}` and a deterministic maximizer.
///
/// The deviator faces the marginal of the other players,
/// `pi_{-i}(a_{-i}|s) = sum_{a_i} pi(a_i, a_{-i}|s)`, so any correlation
/// between its recommendation and the others is ignored. Ties go to the
/// smallest action index.
pub fn best_response_value(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    player: usize,
) -> Result<(PlayerValues, PlayerPolicy)> {
    best_response_value_with(game, policy, player, EvalLimits::default())
}

pub fn best_response_value_with(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    player: usize,
    limits: EvalLimits,
) -> Result<(PlayerValues, PlayerPolicy)> {
    prepare(game, policy, limits)?;
    check_player(game, player)?;
    let (horizon, states) = (game.horizon(), game.num_states());
    let joint = game.joint();
    let n_i = game.action_counts()[player];
    let mut values = PlayerValues::zeros(player, horizon, states);
    let mut actions = PlayerPolicy::constant(horizon, states, 0);
    let mut opp = vec![0.0; joint.len()];
    let mut q = vec![0.0; n_i];
    for h in (0..horizon).rev() {
        let next = values.as_table();
        for s in 0..states {
            let probs = policy.joint_probs(h, s, joint);
            opp.iter_mut().for_each(|x| *x = 0.0);
            for (a, p) in probs.iter().enumerate() {
                if *p > 0.0 {
                    opp[joint.with_action(a, player, 0)] += p;
                }
            }
            q.iter_mut().for_each(|x| *x = 0.0);
            for (key, mass) in opp.iter().enumerate() {
                if *mass <= 0.0 {
                    continue;
                }
                for (ai, qa) in q.iter_mut().enumerate() {
                    let a = joint.with_action(key, player, ai);
                    *qa += mass * (game.mean_reward(h, s, a, player) + continuation(game, &next, h, s, a, 0));
                }
            }
            let best = argmax_first(&q);
            values.set(h, s, q[best]);
            actions.actions[h * states + s] = best;
        }
    }
    Ok((values, actions))
}

/// Best strategy modification for one player and its value.
///
/// For each recommended `a_i` the opponents are distributed as the joint
/// policy conditioned on `a_i`; the modification picks the best replacement
/// against that conditional. Recommendations with zero mass keep the identity
/// map and contribute nothing.
pub fn best_modification_value(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    player: usize,
) -> Result<(PlayerValues, StrategyModification)> {
    best_modification_value_with(game, policy, player, EvalLimits::default())
}

pub fn best_modification_value_with(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    player: usize,
    limits: EvalLimits,
) -> Result<(PlayerValues, StrategyModification)> {
    prepare(game, policy, limits)?;
    check_player(game, player)?;
    let (horizon, states) = (game.horizon(), game.num_states());
    let joint = game.joint();
    let n_i = game.action_counts()[player];
    let mut values = PlayerValues::zeros(player, horizon, states);
    let mut psi = StrategyModification::identity(player, horizon, states, n_i);
    // gain[rec * n_i + to] is the unnormalized conditional payoff of playing `to` when `rec` is recommended.
    let mut gain = vec![0.0; n_i * n_i];
    let mut mass = vec![0.0; n_i];
    for h in (0..horizon).rev() {
        let next = values.as_table();
        for s in 0..states {
            let probs = policy.joint_probs(h, s, joint);
            gain.iter_mut().for_each(|x| *x = 0.0);
            mass.iter_mut().for_each(|x| *x = 0.0);
            for (a, p) in probs.iter().enumerate() {
                if *p <= 0.0 {
                    continue;
                }
                let rec = joint.action_of(a, player);
                mass[rec] += p;
                for to in 0..n_i {
                    let b = joint.with_action(a, player, to);
                    gain[rec * n_i + to] +=
                        p * (game.mean_reward(h, s, b, player) + continuation(game, &next, h, s, b, 0));
                }
            }
            let mut v = 0.0;
            for rec in 0..n_i {
                if mass[rec] <= 0.0 {
                    psi.set(h, s, rec, rec);
                    continue;
                }
                let row = &gain[rec * n_i..(rec + 1) * n_i];
                let to = argmax_first(row);
                psi.set(h, s, rec, to);
                v += row[to];
            }
            values.set(h, s, v);
        }
    }
    Ok((values, psi))
}

fn check_player(game: &TabularMarkovGame, player: usize) -> Result<()> {
    if player >= game.num_players() {
        return Err(Error::InvalidParams(format!("player {player} out of range")));
    }
    Ok(())
}

/// Per-player equilibrium gaps at the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `V^pi_{1,i}(s_1)`.
    pub policy_values: Vec<f64>,
    /// Best-response or best-modification values at `s_1`.
    pub deviation_values: Vec<f64>,
    /// Gaps clamped at zero.
    pub per_player: Vec<f64>,
    pub max: f64,
}

/// With `check_floor`, a gap below the numerical floor is an error. Only
/// deviation sets that contain the policy itself guarantee a nonnegative
/// gap: a best response to the marginal of a correlated policy can be worth
/// less than the policy.
fn gap_report(policy_values: Vec<f64>, deviation_values: Vec<f64>, check_floor: bool) -> Result<GapReport> {
    let mut per_player = Vec::with_capacity(policy_values.len());
    for (i, (v, d)) in policy_values.iter().zip(&deviation_values).enumerate() {
        let gap = d - v;
        if check_floor && gap < GAP_FLOOR {
            return Err(Error::Numerical(format!("player {i} has gap {gap:e} below the numerical floor")));
        }
        per_player.push(gap.max(0.0));
    }
    let max = per_player.iter().copied().fold(0.0, f64::max);
    Ok(GapReport { policy_values, deviation_values, per_player, max })
}

/// Markov CCE gap: best response against the marginal of the others.
pub fn cce_gap(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy) -> Result<GapReport> {
    best_response_report(game, policy, false)
}

fn best_response_report(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    check_floor: bool,
) -> Result<GapReport> {
    let values = evaluate_value(game, policy)?;
    let s1 = game.initial_state();
    let dev = (0..game.num_players())
        .map(|i| best_response_value(game, policy, i).map(|(v, _)| v.get(0, s1)))
        .collect::<Result<Vec<_>>>()?;
    gap_report(values.initial(s1), dev, check_floor)
}

/// Markov CE gap: best strategy modification.
pub fn ce_gap(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy) -> Result<GapReport> {
    let values = evaluate_value(game, policy)?;
    let s1 = game.initial_state();
    let dev = (0..game.num_players())
        .map(|i| best_modification_value(game, policy, i).map(|(v, _)| v.get(0, s1)))
        .collect::<Result<Vec<_>>>()?;
    gap_report(values.initial(s1), dev, true)
}

/// Nash gap; the policy must be a product policy.
pub fn nash_gap(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy) -> Result<GapReport> {
    for h in 0..policy.horizon() {
        for s in 0..policy.num_states() {
            if policy.cell(h, s).len() != 1 {
                return Err(Error::NotProduct { step: h, state: s });
            }
        }
    }
    best_response_report(game, policy, true)
}

/// Value of `policy` after player `i` applies `modification`.
pub fn evaluate_modified(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    modification: &StrategyModification,
) -> Result<f64> {
    let modified = policy.modified(modification)?;
    Ok(evaluate_value(game, &modified)?.get(0, game.initial_state(), modification.player))
}

/// Options for [`brute_force_pure_nash`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureNashSearch {
    /// Cap on the number of deterministic product policies enumerated.
    pub max_profiles: u128,
    pub tolerance: f64,
}

impl Default for PureNashSearch {
    fn default() -> Self {
        Self { max_profiles: 1_000_000, tolerance: 1e-9 }
    }
}

/// Enumerates every deterministic product policy and keeps those with Nash
/// gap at most `search.tolerance`.
pub fn brute_force_pure_nash(game: &TabularMarkovGame, search: PureNashSearch) -> Result<Vec<MixtureMarkovPolicy>> {
    let (horizon, states) = (game.horizon(), game.num_states());
    let cells = (horizon * states) as u32;
    let per_player: Vec<u128> =
        game.action_counts().iter().map(|&a| (a as u128).checked_pow(cells).unwrap_or(u128::MAX)).collect();
    let total = per_player.iter().try_fold(1u128, |acc, &n| acc.checked_mul(n)).unwrap_or(u128::MAX);
    if total > search.max_profiles {
        return Err(Error::CapExceeded { what: "pure policy enumeration", size: total, cap: search.max_profiles });
    }
    let counts = game.action_counts().to_vec();
    let m = counts.len();
    let mut found = Vec::new();
    for profile in 0..total {
        // Decode the profile index into one base-A_i^{SH} digit per player.
        let mut rest = profile;
        let mut codes = vec![0u128; m];
        for i in (0..m).rev() {
            codes[i] = rest % per_player[i];
            rest /= per_player[i];
        }
        let policy = MixtureMarkovPolicy::deterministic(horizon, states, &counts, |h, s, i| {
            let digit = (h * states + s) as u32;
            ((codes[i] / (counts[i] as u128).pow(digit)) % counts[i] as u128) as usize
        })?;
        if nash_gap(game, &policy)?.max <= search.tolerance {
            found.push(policy);
        }
    }
    Ok(found)
}
