//! Policy replay with full-information no-regret oracles.
//!
//! Each episode retrains a Markov joint policy backward in time. At step `h`
//! every player regresses its own value on its own features, using data that
//! replays the policy cover up to step `h` and switches to the current
//! no-regret policies at `h`. Optimistic and pessimistic fits bracket the
//! best-response value and the policy value; their gap at `s_1` certifies the
//! episode's policy. A lazy trigger decides how often each episode's policy
//! is replayed in later episodes.
//!
//! The agile variant adds every episode's policy to the cover once, keeps no
//! pessimistic estimate and outputs a uniformly sampled episode.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::common::{
    argmin_certificate, certificate, map_players, tags, EnvDims, EpisodeRecord, EquilibriumKind, RunOutput,
};
use crate::envs::LinearGame;
use crate::error::{Error, Result};
use crate::game::eval::ValueTable;
use crate::game::policy::{Component, MixtureMarkovPolicy, ProductLayer};
use crate::game::rollout::{concat_rollout, sample_trajectory, SwitchAction};
use crate::oracles::RegretLearner;
use crate::regression::{clip_q, ConstrainedLeastSquares, CovarianceAccumulator, LsMoments};
use crate::rng::{self, sample_categorical};

/// Joint-action count up to which episode policies are stored as mixtures
/// of joint point masses when that is smaller.
const COMPACT_LIMIT: usize = 1 << 16;

/// How the policy cover grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    /// Repeat each policy until an information trigger fires; certify the output.
    #[default]
    Lazy,
    /// Add every policy once; output a uniformly sampled episode.
    Agile,
}

/// All inputs of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefiParams {
    pub kind: EquilibriumKind,
    pub cover: CoverMode,
    pub epsilon: f64,
    pub delta: f64,
    /// Covariance regularizer.
    pub lambda: f64,
    /// Norm bound `W` on the regression coefficients.
    pub radius: f64,
    /// Bonus multiplier.
    pub beta: f64,
    /// Cover trigger threshold (lazy mode).
    pub trigger: f64,
    /// `K_max` (lazy) or the fixed episode count `K` (agile).
    pub max_episodes: usize,
    /// No-regret rounds `T` per step.
    pub rounds: usize,
    /// Data budget `N` on `n^tot` (lazy mode).
    pub budget: usize,
    /// Constant `c` in `Reg(T) = c sqrt(T ln B)` or `SwapReg(T) = c sqrt(B T ln B)`.
    pub regret_constant: f64,
    /// Keep every episode's policy in the output.
    #[serde(default)]
    pub record_policies: bool,
}

/// Multipliers for the hidden constants and direct overrides.
///
/// Overrides feed into the quantities computed after them, so overriding `N`
/// also changes `lambda`, `T_Trig`, `K_max` and `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrefiTuning {
    /// Multiplies the `N` (or agile `K`) formula.
    pub budget_scale: f64,
    /// Multiplies the `T` formula.
    pub rounds_scale: f64,
    /// Multiplies the `beta` formula.
    pub beta_scale: f64,
    /// Multiplies the regret constants 2 (external) and 3 (swap).
    pub regret_scale: f64,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub radius: Option<f64>,
    pub trigger: Option<f64>,
    pub max_episodes: Option<usize>,
    pub rounds: Option<usize>,
    pub budget: Option<usize>,
    pub record_policies: bool,
}

impl Default for PrefiTuning {
    fn default() -> Self {
        Self {
            budget_scale: 1.0,
            rounds_scale: 1.0,
            beta_scale: 1.0,
            regret_scale: 1.0,
            lambda: None,
            beta: None,
            radius: None,
            trigger: None,
            max_episodes: None,
            rounds: None,
            budget: None,
            record_policies: false,
        }
    }
}

pub(crate) fn check_accuracy(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!("epsilon and delta must lie in (0, 1); got {epsilon}, {delta}")));
    }
    Ok(())
}

pub(crate) fn ceil_count(x: f64) -> usize {
    if x.is_finite() {
        (x.ceil() as usize).max(1)
    } else {
        usize::MAX
    }
}

/// `2 ln(16 d m N H T / delta) / ln(36/35)`.
pub fn lambda_formula(d: usize, m: usize, n: usize, h: usize, t: usize, delta: f64) -> f64 {
    2.0 * (16.0 * d as f64 * m as f64 * n as f64 * h as f64 * t as f64 / delta).ln() / (36.0f64 / 35.0).ln()
}

/// `16 (W + H) sqrt(lambda + d ln(32 W N (W + H)) + 4 ln(8 m K H T / delta))`.
#[allow(clippy::too_many_arguments)]
pub fn beta_formula(
    radius: f64,
    h: usize,
    lambda: f64,
    d: usize,
    n: usize,
    m: usize,
    k: usize,
    t: usize,
    delta: f64,
) -> f64 {
    let hf = h as f64;
    let inner = lambda
        + d as f64 * (32.0 * radius * n as f64 * (radius + hf)).ln()
        + 4.0 * (8.0 * m as f64 * k as f64 * hf * t as f64 / delta).ln();
    16.0 * (radius + hf) * inner.max(0.0).sqrt()
}

/// `64 ln(8 m H N^2 / delta)`.
pub fn trigger_formula(m: usize, h: usize, n: usize, delta: f64) -> f64 {
    64.0 * (8.0 * m as f64 * h as f64 * (n as f64).powi(2) / delta).ln()
}

/// `min(2 H m d ln(N + lambda) / ln(1 + T_Trig / 4), N)`, rounded up.
pub fn max_episodes_formula(h: usize, m: usize, d: usize, n: usize, lambda: f64, trigger: f64) -> usize {
    let k = 2.0 * (h * m * d) as f64 * (n as f64 + lambda).ln() / (1.0 + trigger / 4.0).ln();
    ceil_count(k).min(n.max(1))
}

/// Parameters from the theory formulas, with the hidden constants set to the
/// tuning multipliers.
pub fn default_params(
    epsilon: f64,
    delta: f64,
    dims: EnvDims,
    kind: EquilibriumKind,
    cover: CoverMode,
    tuning: &PrefiTuning,
) -> Result<PrefiParams> {
    check_accuracy(epsilon, delta)?;
    let (h, m, d, a) = (dims.horizon, dims.players, dims.d_max.max(1), dims.a_max.max(1));
    let hf = h as f64;
    let mut t_base = hf.powi(4) * (a as f64).ln() / (epsilon * epsilon);
    if kind == EquilibriumKind::Ce {
        t_base *= a as f64;
    }
    let rounds = tuning.rounds.unwrap_or_else(|| ceil_count(tuning.rounds_scale * t_base));
    let n_base = (m * m) as f64 * hf.powi(4) * (d * d) as f64 / (epsilon * epsilon);
    let radius = tuning.radius.unwrap_or(hf * (d as f64).sqrt());
    let base_constant = match kind {
        EquilibriumKind::Cce => 2.0,
        EquilibriumKind::Ce => 3.0,
    };
    let regret_constant = tuning.regret_scale * base_constant;
    let params = match cover {
        CoverMode::Lazy => {
            let budget = tuning.budget.unwrap_or_else(|| ceil_count(tuning.budget_scale * n_base));
            let lambda = tuning.lambda.unwrap_or_else(|| lambda_formula(d, m, budget, h, rounds, delta));
            let trigger = tuning.trigger.unwrap_or_else(|| trigger_formula(m, h, budget, delta));
            let max_episodes =
                tuning.max_episodes.unwrap_or_else(|| max_episodes_formula(h, m, d, budget, lambda, trigger));
            let beta = tuning.beta.unwrap_or_else(|| {
                tuning.beta_scale * beta_formula(radius, h, lambda, d, budget, m, max_episodes, rounds, delta)
            });
            PrefiParams {
                kind,
                cover,
                epsilon,
                delta,
                lambda,
                radius,
                beta,
                trigger,
                max_episodes,
                rounds,
                budget,
                regret_constant,
                record_policies: tuning.record_policies,
            }
        }
        CoverMode::Agile => {
            // The agile formulas use the episode count K where the lazy ones use N and K_max.
            let episodes =
                tuning.max_episodes.or(tuning.budget).unwrap_or_else(|| ceil_count(tuning.budget_scale * n_base));
            let lambda = tuning.lambda.unwrap_or_else(|| lambda_formula(d, m, episodes, h, rounds, delta));
            let beta = tuning.beta.unwrap_or_else(|| {
                tuning.beta_scale * beta_formula(radius, h, lambda, d, episodes, m, episodes, rounds, delta)
            });
            PrefiParams {
                kind,
                cover,
                epsilon,
                delta,
                lambda,
                radius,
                beta,
                trigger: f64::INFINITY,
                max_episodes: episodes,
                rounds,
                budget: episodes,
                regret_constant,
                record_policies: tuning.record_policies,
            }
        }
    };
    Ok(params)
}

/// [`default_params`] for an environment, honoring its radius override.
pub fn params_for_env(
    env: &LinearGame,
    epsilon: f64,
    delta: f64,
    kind: EquilibriumKind,
    cover: CoverMode,
    tuning: &PrefiTuning,
) -> Result<PrefiParams> {
    let mut tuning = tuning.clone();
    if tuning.radius.is_none() {
        tuning.radius = env.radius;
    }
    default_params(epsilon, delta, EnvDims::of_linear(env), kind, cover, &tuning)
}

impl PrefiParams {
    pub fn validate(&self) -> Result<()> {
        check_accuracy(self.epsilon, self.delta)?;
        let positive = [("lambda", self.lambda), ("radius", self.radius), ("trigger", self.trigger)];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite())
            || !(self.regret_constant >= 0.0 && self.regret_constant.is_finite())
        {
            return Err(Error::InvalidParams("beta and the regret constant must be finite and nonnegative".into()));
        }
        if self.rounds == 0 || self.budget == 0 || self.max_episodes == 0 {
            return Err(Error::InvalidParams("rounds, budget and episode cap must be positive".into()));
        }
        Ok(())
    }

    /// `Reg(T)` or `SwapReg(T)` for a player with `arms` actions.
    pub fn regret(&self, arms: usize) -> f64 {
        let (t, b) = (self.rounds as f64, arms as f64);
        match self.kind {
            EquilibriumKind::Cce => self.regret_constant * (t * b.ln()).sqrt(),
            EquilibriumKind::Ce => self.regret_constant * (b * t * b.ln()).sqrt(),
        }
    }
}

/// What one player's data collection and fit produce at one round.
struct RoundFit {
    /// `Q̄(s, a_i)` indexed `s * A_i + a_i`.
    upper: Vec<f64>,
    lower: Option<Vec<f64>>,
    covariance: CovarianceAccumulator,
}

/// Cover entries and how data rounds pick from them.
struct Cover {
    policies: Vec<MixtureMarkovPolicy>,
    repeats: Vec<usize>,
    lazy: bool,
}

impl Cover {
    fn total(&self) -> usize {
        self.repeats.iter().sum()
    }

    /// Samples per data round: `n^tot` draws (lazy) or one per entry (agile).
    fn samples(&self) -> usize {
        if self.lazy {
            self.total()
        } else {
            self.policies.len()
        }
    }

    fn weights(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.repeats.iter().map(|&n| n as f64 / total).collect()
    }
}

struct Episode {
    policy: MixtureMarkovPolicy,
    upper: ValueTable,
    lower: Option<ValueTable>,
    /// `Sigma^{k,1}_{h,i}` indexed `h * m + i`.
    first_covariance: Vec<CovarianceAccumulator>,
    trajectories: u64,
}

struct RoundContext<'a> {
    env: &'a LinearGame,
    params: &'a PrefiParams,
    cover: &'a Cover,
    weights: &'a [f64],
    tables: &'a [Vec<Vec<f64>>],
    upper: &'a ValueTable,
    lower: Option<&'a ValueTable>,
    step: usize,
    seed: u64,
    stream: [u64; 3],
}

fn player_round(ctx: &RoundContext<'_>, i: usize) -> Result<RoundFit> {
    let (game, features, params) = (&ctx.env.game, &ctx.env.features, ctx.params);
    let h = ctx.step;
    let d = features.dim(i);
    let mut rng = rng::stream(ctx.seed, &[tags::REPLAY, ctx.stream[0], ctx.stream[1], ctx.stream[2], i as u64]);
    let switch: Vec<SwitchAction<'_>> = (0..game.num_players())
        .map(|j| if j == i { SwitchAction::Cover } else { SwitchAction::PerState(&ctx.tables[j]) })
        .collect();
    let mut moments = LsMoments::new(d);
    let mut rhs_lower = DVector::zeros(d);
    let samples = ctx.cover.samples();
    for l in 0..samples {
        let j = if ctx.cover.lazy { sample_categorical(ctx.weights, &mut rng) } else { l };
        let traj = concat_rollout(game, &ctx.cover.policies[j], &switch, h, &mut rng)?;
        let last = traj.last().expect("rollout has the switch step");
        let phi = features.feature(i, last.state, last.actions[i]);
        let r = last.rewards[i];
        moments.add(phi, r + ctx.upper.get(h + 1, last.next_state, i));
        if let Some(lower) = ctx.lower {
            rhs_lower.axpy(r + lower.get(h + 1, last.next_state, i), &DVector::from_column_slice(phi), 1.0);
        }
    }
    let ls = ConstrainedLeastSquares::new(&moments.gram)?;
    let fit_upper = ls.solve(&moments.rhs, params.radius)?;
    let fit_lower = match ctx.lower {
        Some(_) => Some(ls.solve(&rhs_lower, params.radius)?),
        None => None,
    };
    let covariance = CovarianceAccumulator::from_gram(&moments.gram, params.lambda, samples)?;
    let (states, arms, horizon) = (game.num_states(), game.action_counts()[i], game.horizon());
    let mut upper = Vec::with_capacity(states * arms);
    let mut lower = fit_lower.as_ref().map(|_| Vec::with_capacity(states * arms));
    for s in 0..states {
        for a in 0..arms {
            let phi = features.feature(i, s, a);
            let width = params.beta * covariance.bonus(phi);
            upper.push(clip_q(fit_upper.predict(phi) + width, h, horizon));
            if let (Some(fit), Some(out)) = (&fit_lower, lower.as_mut()) {
                out.push(clip_q(fit.predict(phi) - width, h, horizon));
            }
        }
    }
    Ok(RoundFit { upper, lower, covariance })
}

fn retrain(env: &LinearGame, params: &PrefiParams, cover: &Cover, seed: u64, episode: usize) -> Result<Episode> {
    let game = &env.game;
    let (horizon, states, m) = (game.horizon(), game.num_states(), game.num_players());
    let counts = game.action_counts().to_vec();
    let mode = params.kind.full_information_mode();
    let with_lower = cover.lazy;
    let rounds = params.rounds;
    let weights = if cover.lazy && cover.total() > 0 { cover.weights() } else { Vec::new() };
    let mut upper = ValueTable::zeros(horizon, states, m);
    let mut lower = with_lower.then(|| ValueTable::zeros(horizon, states, m));
    let mut first_covariance: Vec<Option<CovarianceAccumulator>> = vec![None; horizon * m];
    let mut cells: Vec<Vec<Component>> = vec![Vec::new(); horizon * states];
    let mut trajectories = 0u64;
    let weight = 1.0 / rounds as f64;

    for h in (0..horizon).rev() {
        let mut learners: Vec<Vec<RegretLearner>> = counts
            .iter()
            .map(|&a| (0..states).map(|_| RegretLearner::new(a, mode, Some(rounds))).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        for t in 0..rounds {
            let tables: Vec<Vec<Vec<f64>>> = learners
                .iter()
                .map(|per_state| per_state.iter().map(|l| l.distribution().to_vec()).collect())
                .collect();
            let fits = {
                let ctx = RoundContext {
                    env,
                    params,
                    cover,
                    weights: &weights,
                    tables: &tables,
                    upper: &upper,
                    lower: lower.as_ref(),
                    step: h,
                    seed,
                    stream: [episode as u64, h as u64, t as u64],
                };
                map_players(m, |i| player_round(&ctx, i))
            };
            trajectories += (m * cover.samples()) as u64;
            let tf = t as f64;
            for (i, fit) in fits.into_iter().enumerate() {
                let fit = fit?;
                let arms = counts[i];
                for s in 0..states {
                    let p = &tables[i][s];
                    let q_upper = &fit.upper[s * arms..(s + 1) * arms];
                    let v: f64 = p.iter().zip(q_upper).map(|(a, b)| a * b).sum();
                    upper.set(h, s, i, (tf * upper.get(h, s, i) + v) / (tf + 1.0));
                    if let (Some(low), Some(q)) = (lower.as_mut(), fit.lower.as_ref()) {
                        let v: f64 = p.iter().zip(&q[s * arms..(s + 1) * arms]).map(|(a, b)| a * b).sum();
                        low.set(h, s, i, (tf * low.get(h, s, i) + v) / (tf + 1.0));
                    }
                    let loss: Vec<f64> = q_upper.iter().map(|q| 1.0 - q / horizon as f64).collect();
                    learners[i][s].full_update(&loss)?;
                }
                if t == 0 {
                    first_covariance[h * m + i] = Some(fit.covariance);
                }
            }
            for s in 0..states {
                let dists = (0..m).map(|i| tables[i][s].clone()).collect();
                cells[h * states + s].push(Component { weight, layer: ProductLayer { dists } });
            }
        }
        for (i, &arms) in counts.iter().enumerate() {
            let bump = horizon as f64 / rounds as f64 * params.regret(arms);
            for s in 0..states {
                upper.set(h, s, i, clip_q(upper.get(h, s, i) + bump, h, horizon));
                if let Some(low) = lower.as_mut() {
                    low.set(h, s, i, clip_q(low.get(h, s, i), h, horizon));
                }
            }
        }
    }
    let mut policy = MixtureMarkovPolicy::new(horizon, states, counts, cells)?;
    policy.compact(COMPACT_LIMIT)?;
    Ok(Episode {
        policy,
        upper,
        lower,
        first_covariance: first_covariance.into_iter().map(|c| c.expect("at least one round")).collect(),
        trajectories,
    })
}

/// Lazy policy cover with certification.
pub fn run_prefi(env: &LinearGame, params: &PrefiParams, seed: u64) -> Result<RunOutput> {
    if params.cover != CoverMode::Lazy {
        return run_prefi_agile(env, params, seed);
    }
    params.validate()?;
    env.features.check_compatible(&env.game)?;
    let game = &env.game;
    let (horizon, m, s1) = (game.horizon(), game.num_players(), game.initial_state());
    let mut cover = Cover { policies: Vec::new(), repeats: Vec::new(), lazy: true };
    let mut n_tot = 0usize;
    let mut records: Vec<EpisodeRecord> = Vec::new();
    let mut policies: Vec<MixtureMarkovPolicy> = Vec::new();
    let mut trajectories = 0u64;

    for k in 0..params.max_episodes {
        let ep = retrain(env, params, &cover, seed, k)?;
        trajectories += ep.trajectories;
        let upper = ep.upper.initial(s1);
        let lower = ep.lower.as_ref().expect("lazy mode keeps lower values").initial(s1);
        let cert = certificate(&upper, &lower);
        policies.push(ep.policy);
        if n_tot == params.budget {
            records.push(EpisodeRecord {
                episode: k + 1,
                repeats: 0,
                total_repeats: n_tot,
                upper,
                lower: Some(lower),
                certificate: Some(cert),
                trajectories,
            });
            break;
        }
        let policy = policies.last().expect("just pushed");
        let mut info = vec![0.0; horizon * m];
        let mut rng = rng::stream(seed, &[tags::COVER, k as u64]);
        let mut repeats = 0;
        loop {
            repeats += 1;
            n_tot += 1;
            let traj = sample_trajectory(game, policy, horizon, &mut rng)?;
            trajectories += 1;
            for tr in &traj.steps {
                for i in 0..m {
                    let b =
                        ep.first_covariance[tr.step * m + i].bonus(env.features.feature(i, tr.state, tr.actions[i]));
                    info[tr.step * m + i] += b * b;
                }
            }
            if info.iter().any(|&x| x >= params.trigger) || n_tot == params.budget {
                break;
            }
        }
        cover.policies.push(policy.clone());
        cover.repeats.push(repeats);
        records.push(EpisodeRecord {
            episode: k + 1,
            repeats,
            total_repeats: n_tot,
            upper,
            lower: Some(lower),
            certificate: Some(cert),
            trajectories,
        });
    }
    let best = argmin_certificate(&records).expect("at least one episode");
    let bound = records[best].certificate;
    Ok(RunOutput {
        policy: policies[best].clone(),
        output_episode: best + 1,
        certified_bound: bound,
        certified: bound.is_some_and(|b| b <= params.epsilon),
        episodes: records,
        trajectories,
        episode_policies: if params.record_policies { policies } else { Vec::new() },
    })
}

/// Agile policy cover: `K` episodes, every policy replayed once, uniform output.
pub fn run_prefi_agile(env: &LinearGame, params: &PrefiParams, seed: u64) -> Result<RunOutput> {
    params.validate()?;
    env.features.check_compatible(&env.game)?;
    let s1 = env.game.initial_state();
    let mut cover = Cover { policies: Vec::new(), repeats: Vec::new(), lazy: false };
    let mut records = Vec::with_capacity(params.max_episodes);
    let mut trajectories = 0u64;
    for k in 0..params.max_episodes {
        let ep = retrain(env, params, &cover, seed, k)?;
        trajectories += ep.trajectories;
        cover.policies.push(ep.policy);
        cover.repeats.push(1);
        records.push(EpisodeRecord {
            episode: k + 1,
            repeats: 1,
            total_repeats: k + 1,
            upper: ep.upper.initial(s1),
            lower: None,
            certificate: None,
            trajectories,
        });
    }
    let mut rng = rng::stream(seed, &[tags::OUTPUT]);
    let pick = rand::Rng::random_range(&mut rng, 0..params.max_episodes);
    Ok(RunOutput {
        policy: cover.policies[pick].clone(),
        output_episode: pick + 1,
        certified_bound: None,
        certified: false,
        episodes: records,
        trajectories,
        episode_policies: if params.record_policies { cover.policies } else { Vec::new() },
    })
}
