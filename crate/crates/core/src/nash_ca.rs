//! Nash coordinate ascent for linear Markov potential games.
//!
//! Each outer episode estimates every player's value by Monte Carlo, lets
//! each player solve the single-agent problem left when the others are
//! frozen, and switches the one player whose estimated improvement is
//! largest, provided it exceeds `epsilon / 2`. The single-agent solver is
//! policy replay with a linear value fit, a greedy optimistic policy and a
//! lazily triggered policy cover.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::common::{argmin_certificate, certificate, map_players, tags, EpisodeRecord};
use crate::envs::{rosenthal_potential, CongestionGame, FeatureMap, LinearGame};
use crate::error::{Error, Result};
use crate::game::eval::{evaluate_value, ValueTable};
use crate::game::model::TabularMarkovGame;
use crate::game::policy::{MixtureMarkovPolicy, PlayerPolicy};
use crate::game::rollout::sample_trajectory;
use crate::prefi::{beta_formula, ceil_count, check_accuracy, lambda_formula, max_episodes_formula, trigger_formula};
use crate::regression::{clip_q, ConstrainedLeastSquares, CovarianceAccumulator, LsMoments};
use crate::rng::{self, sample_categorical};

/// The single-agent problem player `player` faces when the others follow a
/// fixed policy. Opponents are marginalized exactly at every `(h, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMdp {
    pub player: usize,
    /// One-player game with the player's own features.
    pub env: LinearGame,
}

impl InducedMdp {
    pub fn new(env: &LinearGame, opponents: &MixtureMarkovPolicy, player: usize) -> Result<Self> {
        let game = &env.game;
        opponents.check_compatible(game)?;
        if player >= game.num_players() {
            return Err(Error::InvalidParams(format!("player {player} out of range")));
        }
        let joint = game.joint();
        let (horizon, states) = (game.horizon(), game.num_states());
        let arms = game.action_counts()[player];
        // marginals[h * S + s][key] is the opponents' probability of the joint key with player's action zeroed.
        let mut marginals = Vec::with_capacity(horizon * states);
        for h in 0..horizon {
            for s in 0..states {
                let mut opp = vec![0.0; joint.len()];
                for (a, p) in opponents.joint_probs(h, s, joint).iter().enumerate() {
                    if *p > 0.0 {
                        opp[joint.with_action(a, player, 0)] += p;
                    }
                }
                marginals.push(opp);
            }
        }
        let single =
            TabularMarkovGame::from_fn(horizon, states, vec![arms], game.noise(), game.initial_state(), |h, s, a| {
                let mut reward = 0.0;
                let mut next = vec![0.0; states];
                for (key, &mass) in marginals[h * states + s].iter().enumerate() {
                    if mass <= 0.0 {
                        continue;
                    }
                    let idx = joint.with_action(key, player, a[0]);
                    reward += mass * game.mean_reward(h, s, idx, player);
                    for (n, p) in next.iter_mut().zip(game.transition_row(h, s, idx)) {
                        *n += mass * p;
                    }
                }
                (vec![reward.clamp(0.0, 1.0)], next)
            })?;
        let f = &env.features;
        let data =
            vec![(0..states).flat_map(|s| (0..arms).flat_map(move |a| f.feature(player, s, a).to_vec())).collect()];
        let features = FeatureMap::new(states, vec![arms], vec![f.dim(player)], data, f.scale())?;
        Ok(Self { player, env: LinearGame { game: single, features, radius: env.radius } })
    }

    /// `(policy_i, pi_{-i})` as a policy of the full game.
    pub fn lift(&self, policy: &PlayerPolicy, opponents: &MixtureMarkovPolicy) -> Result<MixtureMarkovPolicy> {
        let arms = opponents.action_counts()[self.player];
        opponents.with_player(self.player, |h, s| policy.dist(h, s, arms))
    }
}

/// Inputs of the single-agent solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMdpParams {
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub radius: f64,
    pub beta: f64,
    pub trigger: f64,
    pub max_episodes: usize,
    pub budget: usize,
    /// Stop as soon as an episode certifies `V̄ - V̲ <= epsilon` at `s_1`.
    pub early_exit: bool,
}

/// Multipliers and overrides for [`solver_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverTuning {
    pub budget_scale: f64,
    pub beta_scale: f64,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub radius: Option<f64>,
    pub trigger: Option<f64>,
    pub max_episodes: Option<usize>,
    pub budget: Option<usize>,
    pub early_exit: bool,
}

impl Default for SolverTuning {
    fn default() -> Self {
        Self {
            budget_scale: 1.0,
            beta_scale: 1.0,
            lambda: None,
            beta: None,
            radius: None,
            trigger: None,
            max_episodes: None,
            budget: None,
            early_exit: true,
        }
    }
}

/// Solver parameters for horizon `h` and feature dimension `d`.
pub fn solver_params(epsilon: f64, delta: f64, h: usize, d: usize, tuning: &SolverTuning) -> Result<LinearMdpParams> {
    check_accuracy(epsilon, delta)?;
    let d = d.max(1);
    let hf = h as f64;
    let budget = tuning
        .budget
        .unwrap_or_else(|| ceil_count(tuning.budget_scale * hf.powi(4) * (d * d) as f64 / (epsilon * epsilon)));
    let lambda = tuning.lambda.unwrap_or_else(|| lambda_formula(d, 1, budget, h, 1, delta));
    let radius = tuning.radius.unwrap_or(hf * (d as f64).sqrt());
    let trigger = tuning.trigger.unwrap_or_else(|| trigger_formula(1, h, budget, delta));
    let max_episodes = tuning.max_episodes.unwrap_or_else(|| max_episodes_formula(h, 1, d, budget, lambda, trigger));
    // The single-agent beta has no N inside the covering-number term.
    let beta = tuning
        .beta
        .unwrap_or_else(|| tuning.beta_scale * beta_formula(radius, h, lambda, d, 1, 1, max_episodes, 1, delta));
    Ok(LinearMdpParams {
        epsilon,
        delta,
        lambda,
        radius,
        beta,
        trigger,
        max_episodes,
        budget,
        early_exit: tuning.early_exit,
    })
}

impl LinearMdpParams {
    pub fn validate(&self) -> Result<()> {
        check_accuracy(self.epsilon, self.delta)?;
        for (name, v) in [("lambda", self.lambda), ("radius", self.radius), ("trigger", self.trigger)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!("beta must be finite and nonnegative, got {}", self.beta)));
        }
        if self.max_episodes == 0 || self.budget == 0 {
            return Err(Error::InvalidParams("episode cap and budget must be positive".into()));
        }
        Ok(())
    }
}

/// Result of [`solve_linear_mdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutput {
    pub policy: PlayerPolicy,
    pub output_episode: usize,
    pub certified_bound: f64,
    pub certified: bool,
    pub episodes: Vec<EpisodeRecord>,
    pub trajectories: u64,
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

struct SolverEpisode {
    policy: PlayerPolicy,
    upper: f64,
    lower: f64,
    covariance: Vec<CovarianceAccumulator>,
    trajectories: u64,
}

fn solver_retrain(
    env: &LinearGame,
    params: &LinearMdpParams,
    cover: &[(MixtureMarkovPolicy, usize)],
    seed: u64,
    episode: usize,
) -> Result<SolverEpisode> {
    let (game, features) = (&env.game, &env.features);
    let (horizon, states, arms) = (game.horizon(), game.num_states(), game.action_counts()[0]);
    let d = features.dim(0);
    let total: usize = cover.iter().map(|(_, n)| n).sum();
    let weights: Vec<f64> = cover.iter().map(|(_, n)| *n as f64 / total.max(1) as f64).collect();
    let mut upper = ValueTable::zeros(horizon, states, 1);
    let mut lower = ValueTable::zeros(horizon, states, 1);
    let mut policy = PlayerPolicy::constant(horizon, states, 0);
    let mut covariance = Vec::with_capacity(horizon);
    let mut trajectories = 0u64;
    for h in (0..horizon).rev() {
        let mut rng = rng::stream(seed, &[tags::REPLAY, episode as u64, h as u64]);
        let mut moments = LsMoments::new(d);
        let mut rhs_lower = DVector::zeros(d);
        for _ in 0..total {
            let j = sample_categorical(&weights, &mut rng);
            let traj = sample_trajectory(game, &cover[j].0, h + 1, &mut rng)?;
            trajectories += 1;
            let last = traj.last().expect("at least one step");
            let phi = features.feature(0, last.state, last.actions[0]);
            let r = last.rewards[0];
            moments.add(phi, r + upper.get(h + 1, last.next_state, 0));
            rhs_lower.axpy(r + lower.get(h + 1, last.next_state, 0), &DVector::from_column_slice(phi), 1.0);
        }
        let ls = ConstrainedLeastSquares::new(&moments.gram)?;
        let fit_upper = ls.solve(&moments.rhs, params.radius)?;
        let fit_lower = ls.solve(&rhs_lower, params.radius)?;
        let cov = CovarianceAccumulator::from_gram(&moments.gram, params.lambda, total)?;
        let mut q_upper = vec![0.0; arms];
        for s in 0..states {
            for (a, q) in q_upper.iter_mut().enumerate() {
                let phi = features.feature(0, s, a);
                *q = clip_q(fit_upper.predict(phi) + params.beta * cov.bonus(phi), h, horizon);
            }
            let a = argmax_first(&q_upper);
            let phi = features.feature(0, s, a);
            policy.actions[h * states + s] = a;
            upper.set(h, s, 0, q_upper[a]);
            lower.set(h, s, 0, clip_q(fit_lower.predict(phi) - params.beta * cov.bonus(phi), h, horizon));
        }
        covariance.push(cov);
    }
    covariance.reverse();
    let s1 = game.initial_state();
    Ok(SolverEpisode { policy, upper: upper.get(0, s1, 0), lower: lower.get(0, s1, 0), covariance, trajectories })
}

/// Single-agent policy replay on a one-player linear game.
pub fn solve_linear_mdp(env: &LinearGame, params: &LinearMdpParams, seed: u64) -> Result<SolverOutput> {
    params.validate()?;
    let game = &env.game;
    if game.num_players() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "solver needs a one-player game, got {} players",
            game.num_players()
        )));
    }
    env.features.check_compatible(game)?;
    let (horizon, states) = (game.horizon(), game.num_states());
    let counts = game.action_counts().to_vec();
    let mut cover: Vec<(MixtureMarkovPolicy, usize)> = Vec::new();
    let mut n_tot = 0usize;
    let mut records = Vec::new();
    let mut policies = Vec::new();
    let mut trajectories = 0u64;
    let mut certified_at = None;

    for k in 0..params.max_episodes {
        let ep = solver_retrain(env, params, &cover, seed, k)?;
        trajectories += ep.trajectories;
        let cert = certificate(&[ep.upper], &[ep.lower]);
        let mut record = EpisodeRecord {
            episode: k + 1,
            repeats: 0,
            total_repeats: n_tot,
            upper: vec![ep.upper],
            lower: Some(vec![ep.lower]),
            certificate: Some(cert),
            trajectories,
        };
        policies.push(ep.policy);
        if params.early_exit && cert <= params.epsilon {
            records.push(record);
            certified_at = Some(k);
            break;
        }
        if n_tot == params.budget {
            records.push(record);
            break;
        }
        let pol = policies.last().expect("just pushed");
        let joint = MixtureMarkovPolicy::deterministic(horizon, states, &counts, |h, s, _| pol.action(h, s))?;
        let mut info = vec![0.0; horizon];
        let mut rng = rng::stream(seed, &[tags::COVER, k as u64]);
        let mut repeats = 0;
        loop {
            repeats += 1;
            n_tot += 1;
            let traj = sample_trajectory(game, &joint, horizon, &mut rng)?;
            trajectories += 1;
            for tr in &traj.steps {
                let b = ep.covariance[tr.step].bonus(env.features.feature(0, tr.state, tr.actions[0]));
                info[tr.step] += b * b;
            }
            if info.iter().any(|&x| x >= params.trigger) || n_tot == params.budget {
                break;
            }
        }
        cover.push((joint, repeats));
        record.repeats = repeats;
        record.total_repeats = n_tot;
        record.trajectories = trajectories;
        records.push(record);
    }
    let best = certified_at.unwrap_or_else(|| argmin_certificate(&records).expect("at least one episode"));
    let bound = records[best].certificate.expect("solver records carry certificates");
    Ok(SolverOutput {
        policy: policies[best].clone(),
        output_episode: best + 1,
        certified_bound: bound,
        certified: bound <= params.epsilon,
        episodes: records,
        trajectories,
    })
}

/// Mean total reward of `player` over `episodes` rollouts.
pub fn estimate_value_mc(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    player: usize,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if player >= game.num_players() {
        return Err(Error::InvalidParams(format!("player {player} out of range")));
    }
    Ok(estimate_values_mc(game, policy, episodes, seed)?[player])
}

/// Mean total reward of every player over the same `episodes` rollouts.
pub fn estimate_values_mc(
    game: &TabularMarkovGame,
    policy: &MixtureMarkovPolicy,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::InvalidParams("at least one rollout is required".into()));
    }
    let m = game.num_players();
    let mut rng = rng::stream(seed, &[]);
    let mut sums = vec![0.0; m];
    for _ in 0..episodes {
        let traj = sample_trajectory(game, policy, game.horizon(), &mut rng)?;
        for (i, sum) in sums.iter_mut().enumerate() {
            *sum += traj.total_reward(i);
        }
    }
    Ok(sums.into_iter().map(|s| s / episodes as f64).collect())
}

/// Exact potential used for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// Rosenthal potential of a one-step congestion game.
    Congestion(CongestionGame),
    /// All players share one reward, so player 0's value is a potential.
    SharedReward,
}

impl Potential {
    pub fn evaluate(&self, game: &TabularMarkovGame, policy: &MixtureMarkovPolicy) -> Result<f64> {
        match self {
            Self::Congestion(cg) => {
                let actions: Vec<usize> = (0..game.num_players())
                    .map(|i| {
                        let d = policy.player_marginal(0, game.initial_state(), i);
                        argmax_first(&d)
                    })
                    .collect();
                Ok(rosenthal_potential(cg, &actions))
            }
            Self::SharedReward => Ok(evaluate_value(game, policy)?.get(0, game.initial_state(), 0)),
        }
    }
}

/// Inputs of [`run_nash_ca`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCaParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Outer episodes `K`.
    pub episodes: usize,
    /// Rollouts per Monte-Carlo value estimate.
    pub mc_episodes: usize,
    /// Solver tuning; accuracy and failure probability come from `epsilon / 8`
    /// and `delta / (2 m K)`.
    pub solver: SolverTuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NashCaTuning {
    pub mc_scale: f64,
    pub episodes: Option<usize>,
    pub mc_episodes: Option<usize>,
    pub solver: SolverTuning,
}

impl Default for NashCaTuning {
    fn default() -> Self {
        Self { mc_scale: 1.0, episodes: None, mc_episodes: None, solver: SolverTuning::default() }
    }
}

/// `K = 5 m H / epsilon` and `ceil(2 H^2 ln(4 m K / delta) / epsilon^2)` rollouts per estimate.
pub fn default_nash_ca_params(
    epsilon: f64,
    delta: f64,
    players: usize,
    horizon: usize,
    tuning: &NashCaTuning,
) -> Result<NashCaParams> {
    check_accuracy(epsilon, delta)?;
    let episodes = tuning.episodes.unwrap_or_else(|| ceil_count(5.0 * (players * horizon) as f64 / epsilon));
    let hf = horizon as f64;
    let mc = 2.0 * hf * hf * (4.0 * (players * episodes) as f64 / delta).ln() / (epsilon * epsilon);
    let mc_episodes = tuning.mc_episodes.unwrap_or_else(|| ceil_count(tuning.mc_scale * mc));
    Ok(NashCaParams { epsilon, delta, episodes, mc_episodes, solver: tuning.solver.clone() })
}

/// Diagnostics of one outer episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCaEpisode {
    pub episode: usize,
    /// Estimated values of the current profile.
    pub values: Vec<f64>,
    /// Estimated values after each player's unilateral switch.
    pub improved: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Player switched at the end of the episode, if any.
    pub switched: Option<usize>,
    /// Exact potential of the current profile.
    pub potential: Option<f64>,
    pub trajectories: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCaOutput {
    /// Deterministic product policy.
    pub policy: MixtureMarkovPolicy,
    pub profile: Vec<PlayerPolicy>,
    /// False when `K` episodes passed without the stopping rule firing.
    pub converged: bool,
    pub episodes: Vec<NashCaEpisode>,
    pub trajectories: u64,
}

fn profile_policy(game: &TabularMarkovGame, profile: &[PlayerPolicy]) -> Result<MixtureMarkovPolicy> {
    MixtureMarkovPolicy::deterministic(game.horizon(), game.num_states(), game.action_counts(), |h, s, i| {
        profile[i].action(h, s)
    })
}

/// Coordinate ascent from the all-zeros deterministic profile.
pub fn run_nash_ca(
    env: &LinearGame,
    params: &NashCaParams,
    potential: Option<&Potential>,
    seed: u64,
) -> Result<NashCaOutput> {
    check_accuracy(params.epsilon, params.delta)?;
    if params.episodes == 0 || params.mc_episodes == 0 {
        return Err(Error::InvalidParams("episodes and Monte-Carlo budget must be positive".into()));
    }
    env.features.check_compatible(&env.game)?;
    let game = &env.game;
    let (m, horizon, states) = (game.num_players(), game.horizon(), game.num_states());
    let solver_delta = params.delta / (2 * m * params.episodes) as f64;
    let solver: Vec<LinearMdpParams> = (0..m)
        .map(|i| {
            let mut tuning = params.solver.clone();
            if tuning.radius.is_none() {
                tuning.radius = env.radius;
            }
            solver_params(params.epsilon / 8.0, solver_delta, horizon, env.features.dim(i), &tuning)
        })
        .collect::<Result<_>>()?;
    let mut profile = vec![PlayerPolicy::constant(horizon, states, 0); m];
    let mut log = Vec::new();
    let mut trajectories = 0u64;
    let mut converged = false;

    for k in 0..params.episodes {
        let current = profile_policy(game, &profile)?;
        let values = estimate_values_mc(
            game,
            &current,
            params.mc_episodes,
            rng::derive_seed(seed, &[tags::EVALUATION, k as u64, 0]),
        )?;
        trajectories += params.mc_episodes as u64;
        let results = map_players(m, |i| -> Result<(PlayerPolicy, f64, u64)> {
            let induced = InducedMdp::new(env, &current, i)?;
            let out = solve_linear_mdp(
                &induced.env,
                &solver[i],
                rng::derive_seed(seed, &[tags::SOLVER, k as u64, i as u64]),
            )?;
            let lifted = induced.lift(&out.policy, &current)?;
            let eval_seed = rng::derive_seed(seed, &[tags::EVALUATION, k as u64, i as u64 + 1]);
            let v = estimate_value_mc(game, &lifted, i, params.mc_episodes, eval_seed)?;
            Ok((out.policy, v, out.trajectories + params.mc_episodes as u64))
        });
        let mut candidates = Vec::with_capacity(m);
        let mut improved = Vec::with_capacity(m);
        for r in results {
            let (p, v, t) = r?;
            candidates.push(p);
            improved.push(v);
            trajectories += t;
        }
        let deltas: Vec<f64> = improved.iter().zip(&values).map(|(a, b)| a - b).collect();
        let pot = potential.map(|p| p.evaluate(game, &current)).transpose()?;
        let j = argmax_first(&deltas);
        let switched = (deltas[j] > params.epsilon / 2.0).then_some(j);
        log.push(NashCaEpisode { episode: k + 1, values, improved, deltas, switched, potential: pot, trajectories });
        match switched {
            Some(j) => profile[j] = candidates.swap_remove(j),
            None => {
                converged = true;
                break;
            }
        }
    }
    assert!(log.len() <= params.episodes, "outer episodes exceed K");
    Ok(NashCaOutput { policy: profile_policy(game, &profile)?, profile, converged, episodes: log, trajectories })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{chain_mdp, random_game, RewardStructure};
    use crate::game::eval::best_response_value;
    use crate::game::model::RewardNoise;

    #[test]
    fn induced_value_matches_full_game() {
        let g = random_game(3, 3, &[2, 2], 2, RewardStructure::General).unwrap();
        let env = LinearGame::tabular(g.clone());
        let opp = MixtureMarkovPolicy::uniform_for(&g);
        for i in 0..2 {
            let induced = InducedMdp::new(&env, &opp, i).unwrap();
            let mine = PlayerPolicy { horizon: 2, states: 3, actions: vec![1, 0, 1, 1, 0, 0] };
            let single = MixtureMarkovPolicy::deterministic(2, 3, &[2], |h, s, _| mine.action(h, s)).unwrap();
            let a = evaluate_value(&induced.env.game, &single).unwrap().get(0, 0, 0);
            let b = evaluate_value(&g, &induced.lift(&mine, &opp).unwrap()).unwrap().get(0, 0, i);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_estimates() {
        let g = TabularMarkovGame::from_fn(1, 1, vec![1, 1], RewardNoise::Deterministic, 0, |_, _, _| {
            (vec![0.3, 0.7], vec![1.0])
        })
        .unwrap();
        let p = MixtureMarkovPolicy::uniform_for(&g);
        assert_eq!(estimate_value_mc(&g, &p, 1, 1, 0).unwrap(), 0.7);
        let g = TabularMarkovGame::from_fn(1, 1, vec![1], RewardNoise::Bernoulli, 0, |_, _, _| (vec![0.5], vec![1.0]))
            .unwrap();
        let v = estimate_value_mc(&g, &MixtureMarkovPolicy::uniform_for(&g), 0, 10_000, 4).unwrap();
        assert!((v - 0.5).abs() < 0.02);
        assert!(estimate_value_mc(&g, &MixtureMarkovPolicy::uniform_for(&g), 0, 0, 4).is_err());
    }

    fn practical() -> SolverTuning {
        SolverTuning {
            budget: Some(3000),
            lambda: Some(1.0),
            beta: Some(2.0),
            trigger: Some(2.0),
            ..Default::default()
        }
    }

    #[test]
    fn chain_solver_finds_optimum() {
        let g = chain_mdp(2);
        let env = LinearGame::tabular(g.clone());
        let params = solver_params(0.1, 0.1, 2, env.features.dim(0), &practical()).unwrap();
        let out = solve_linear_mdp(&env, &params, 1).unwrap();
        let pol = MixtureMarkovPolicy::deterministic(2, 3, &[2], |h, s, _| out.policy.action(h, s)).unwrap();
        let v = evaluate_value(&g, &pol).unwrap().get(0, 0, 0);
        let opt = best_response_value(&g, &pol, 0).unwrap().0.get(0, 0);
        assert!(opt - v < 1e-9, "value {v} vs optimum {opt}");
    }

    #[test]
    fn single_action_certifies() {
        let g = TabularMarkovGame::from_fn(2, 1, vec![1], RewardNoise::Bernoulli, 0, |_, _, _| (vec![0.5], vec![1.0]))
            .unwrap();
        let env = LinearGame::tabular(g);
        let params = solver_params(0.2, 0.1, 2, 2, &SolverTuning { beta: Some(0.05), ..practical() }).unwrap();
        let out = solve_linear_mdp(&env, &params, 0).unwrap();
        assert!(out.certified);
        assert!(out.episodes.last().unwrap().total_repeats < params.budget);
    }

    #[test]
    fn rejects_multiplayer_solver_input() {
        let env = LinearGame::tabular(random_game(0, 2, &[2, 2], 1, RewardStructure::General).unwrap());
        let params = solver_params(0.1, 0.1, 1, 4, &practical()).unwrap();
        assert!(matches!(solve_linear_mdp(&env, &params, 0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn episode_and_mc_formulas() {
        let p = default_nash_ca_params(0.1, 0.1, 2, 1, &NashCaTuning::default()).unwrap();
        assert_eq!(p.episodes, 100);
        let expected = (2.0 * (4.0 * 200.0 / 0.1f64).ln() / 0.01).ceil() as usize;
        assert_eq!(p.mc_episodes, expected);
    }
}
