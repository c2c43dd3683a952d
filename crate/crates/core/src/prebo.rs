//! Policy replay with adversarial-bandit oracles for tabular games.
//!
//! At step `h` of an episode, one replayed trajectory per unit of cover
//! weight reaches a state `s_h`, where all players act from their per-state
//! bandit learners. Each learner sees only its own action and the realized
//! loss `1 - (r + V̄_{h+1}(s'))/H`. Running averages of the realized targets
//! give the optimistic and pessimistic values, widened by regret and
//! concentration terms. The episode's policy at `(h, s)` is the uniform
//! mixture of the product policies played at the visits to `s`.

use serde::{Deserialize, Serialize};

use crate::common::{argmin_certificate, certificate, tags, EnvDims, EpisodeRecord, EquilibriumKind, RunOutput};
use crate::error::{Error, Result};
use crate::game::eval::ValueTable;
use crate::game::model::TabularMarkovGame;
use crate::game::policy::{Component, MixtureMarkovPolicy, ProductLayer};
use crate::game::rollout::{concat_rollout, sample_trajectory, SwitchAction};
use crate::oracles::RegretLearner;
use crate::prefi::{ceil_count, check_accuracy};
use crate::regression::clip_q;
use crate::rng::{self, sample_categorical};

const COMPACT_LIMIT: usize = 1 << 16;

/// All inputs of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreboParams {
    pub kind: EquilibriumKind,
    pub epsilon: f64,
    pub delta: f64,
    /// `T_Trig`.
    pub trigger: f64,
    /// `K_max`.
    pub max_episodes: usize,
    /// `N_max`.
    pub budget: usize,
    /// Multiplier on the `beta_n` formula.
    pub beta_scale: f64,
    /// Constant `c` in `BReg(n) = c sqrt(B n) ln(B n / delta)` or
    /// `BSwapReg(n) = c B sqrt(n) ln(B n / delta)`.
    pub regret_constant: f64,
    #[serde(default)]
    pub record_policies: bool,
}

/// Multipliers and overrides for [`default_prebo_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreboTuning {
    /// Multiplies the `N_max` formula.
    pub budget_scale: f64,
    pub beta_scale: f64,
    /// Multiplies the regret constants 2 (external) and 3 (swap).
    pub regret_scale: f64,
    pub trigger: Option<f64>,
    pub max_episodes: Option<usize>,
    pub budget: Option<usize>,
    pub record_policies: bool,
}

impl Default for PreboTuning {
    fn default() -> Self {
        Self {
            budget_scale: 1.0,
            beta_scale: 1.0,
            regret_scale: 1.0,
            trigger: None,
            max_episodes: None,
            budget: None,
            record_policies: false,
        }
    }
}

/// `9 H S ln(N_max)`, rounded up.
pub fn prebo_max_episodes(h: usize, s: usize, budget: usize) -> usize {
    ceil_count(9.0 * (h * s) as f64 * (budget as f64).ln())
}

/// `12 ln(8 K_max H S / delta)`.
pub fn prebo_trigger(k_max: usize, h: usize, s: usize, delta: f64) -> f64 {
    12.0 * (8.0 * k_max as f64 * (h * s) as f64 / delta).ln()
}

/// Parameters from the theory formulas.
pub fn default_prebo_params(
    epsilon: f64,
    delta: f64,
    dims: EnvDims,
    kind: EquilibriumKind,
    tuning: &PreboTuning,
) -> Result<PreboParams> {
    check_accuracy(epsilon, delta)?;
    let (h, s, a) = (dims.horizon, dims.states, dims.a_max.max(1) as f64);
    let mut base = (h as f64).powi(4) * s as f64 * a / (epsilon * epsilon);
    if kind == EquilibriumKind::Ce {
        base *= a;
    }
    let budget = tuning.budget.unwrap_or_else(|| ceil_count(tuning.budget_scale * base));
    let max_episodes = tuning.max_episodes.unwrap_or_else(|| prebo_max_episodes(h, s, budget));
    let trigger = tuning.trigger.unwrap_or_else(|| prebo_trigger(max_episodes, h, s, delta));
    let base_constant = match kind {
        EquilibriumKind::Cce => 2.0,
        EquilibriumKind::Ce => 3.0,
    };
    Ok(PreboParams {
        kind,
        epsilon,
        delta,
        trigger,
        max_episodes,
        budget,
        beta_scale: tuning.beta_scale,
        regret_constant: tuning.regret_scale * base_constant,
        record_policies: tuning.record_policies,
    })
}

impl PreboParams {
    pub fn validate(&self) -> Result<()> {
        check_accuracy(self.epsilon, self.delta)?;
        if !(self.trigger > 0.0 && self.trigger.is_finite()) {
            return Err(Error::InvalidParams(format!("trigger must be positive, got {}", self.trigger)));
        }
        if self.max_episodes == 0 || self.budget == 0 {
            return Err(Error::InvalidParams("episode cap and budget must be positive".into()));
        }
        if !(self.beta_scale >= 0.0 && self.regret_constant >= 0.0) {
            return Err(Error::InvalidParams("beta scale and regret constant must be nonnegative".into()));
        }
        Ok(())
    }

    /// `beta_n = sqrt(8 H^2 T_Trig ln(2 m K_max H S / delta) / (n ∨ T_Trig))`.
    pub fn beta(&self, n: usize, players: usize, horizon: usize, states: usize) -> f64 {
        let hf = horizon as f64;
        let log = (2.0 * (players * self.max_episodes * horizon * states) as f64 / self.delta).ln();
        self.beta_scale * (8.0 * hf * hf * self.trigger * log / (n as f64).max(self.trigger)).sqrt()
    }

    /// `BReg(n)` or `BSwapReg(n)` for `arms` actions; zero for a single arm.
    pub fn regret(&self, n: usize, arms: usize) -> f64 {
        if arms <= 1 || n == 0 {
            return 0.0;
        }
        let (b, nf) = (arms as f64, n as f64);
        let log = (b * nf / self.delta).ln();
        match self.kind {
            EquilibriumKind::Cce => self.regret_constant * (b * nf).sqrt() * log,
            EquilibriumKind::Ce => self.regret_constant * b * nf.sqrt() * log,
        }
    }
}

struct Episode {
    policy: MixtureMarkovPolicy,
    upper: ValueTable,
    lower: ValueTable,
    /// `n^k_h(s)` indexed `h * S + s`.
    visits: Vec<usize>,
    trajectories: u64,
}

fn retrain(
    game: &TabularMarkovGame,
    params: &PreboParams,
    cover: &[(MixtureMarkovPolicy, usize)],
    seed: u64,
    episode: usize,
) -> Result<Episode> {
    let (horizon, states, m) = (game.horizon(), game.num_states(), game.num_players());
    let counts = game.action_counts().to_vec();
    let mode = params.kind.bandit_mode();
    let total: usize = cover.iter().map(|(_, n)| n).sum();
    let weights: Vec<f64> = cover.iter().map(|(_, n)| *n as f64 / total.max(1) as f64).collect();
    let mut upper = ValueTable::zeros(horizon, states, m);
    let mut lower = ValueTable::zeros(horizon, states, m);
    let mut visits = vec![0usize; horizon * states];
    let mut cells: Vec<Vec<ProductLayer>> = vec![Vec::new(); horizon * states];
    let hf = horizon as f64;

    for h in (0..horizon).rev() {
        let mut learners: Vec<Vec<RegretLearner>> = counts
            .iter()
            .map(|&a| (0..states).map(|_| RegretLearner::new(a, mode, None)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut tables: Vec<Vec<Vec<f64>>> =
            learners.iter().map(|per| per.iter().map(|l| l.distribution().to_vec()).collect()).collect();
        let mut rng = rng::stream(seed, &[tags::REPLAY, episode as u64, h as u64]);
        for _ in 0..total {
            let j = sample_categorical(&weights, &mut rng);
            let switch: Vec<SwitchAction<'_>> = tables.iter().map(|t| SwitchAction::PerState(t)).collect();
            let traj = concat_rollout(game, &cover[j].0, &switch, h, &mut rng)?;
            let last = traj.last().expect("rollout has the switch step");
            let (s, next) = (last.state, last.next_state);
            let cell = h * states + s;
            visits[cell] += 1;
            let n = visits[cell] as f64;
            cells[cell].push(ProductLayer { dists: (0..m).map(|i| tables[i][s].clone()).collect() });
            for i in 0..m {
                let r = last.rewards[i];
                let target_upper = r + upper.get(h + 1, next, i);
                let loss = (1.0 - target_upper / hf).clamp(0.0, 1.0);
                learners[i][s].bandit_update(last.actions[i], loss)?;
                tables[i][s].copy_from_slice(learners[i][s].distribution());
                upper.set(h, s, i, ((n - 1.0) * upper.get(h, s, i) + target_upper) / n);
                let target_lower = r + lower.get(h + 1, next, i);
                lower.set(h, s, i, ((n - 1.0) * lower.get(h, s, i) + target_lower) / n);
            }
        }
        for s in 0..states {
            let n = visits[h * states + s];
            for (i, &arms) in counts.iter().enumerate() {
                if n == 0 {
                    // No data: full optimism and full pessimism.
                    upper.set(h, s, i, (horizon - h) as f64);
                    lower.set(h, s, i, 0.0);
                    continue;
                }
                let beta = params.beta(n, m, horizon, states);
                let bump = hf / n as f64 * params.regret(n, arms) + beta;
                upper.set(h, s, i, clip_q(upper.get(h, s, i) + bump, h, horizon));
                lower.set(h, s, i, clip_q(lower.get(h, s, i) - beta, h, horizon));
            }
        }
    }

    let uniform = ProductLayer::uniform(&counts);
    let cells = cells
        .into_iter()
        .map(|layers| {
            if layers.is_empty() {
                return vec![Component { weight: 1.0, layer: uniform.clone() }];
            }
            let w = 1.0 / layers.len() as f64;
            layers.into_iter().map(|layer| Component { weight: w, layer }).collect()
        })
        .collect();
    let mut policy = MixtureMarkovPolicy::new(horizon, states, counts, cells)?;
    policy.compact(COMPACT_LIMIT)?;
    Ok(Episode { policy, upper, lower, visits, trajectories: (horizon * total) as u64 })
}

/// Runs the tabular bandit-oracle learner.
pub fn run_prebo(game: &TabularMarkovGame, params: &PreboParams, seed: u64) -> Result<RunOutput> {
    params.validate()?;
    let (horizon, states, s1) = (game.horizon(), game.num_states(), game.initial_state());
    let mut cover: Vec<(MixtureMarkovPolicy, usize)> = Vec::new();
    let mut n_tot = 0usize;
    let mut records: Vec<EpisodeRecord> = Vec::new();
    let mut policies: Vec<MixtureMarkovPolicy> = Vec::new();
    let mut trajectories = 0u64;
    let mut certified_at = None;

    for k in 0..params.max_episodes {
        let ep = retrain(game, params, &cover, seed, k)?;
        trajectories += ep.trajectories;
        let upper = ep.upper.initial(s1);
        let lower = ep.lower.initial(s1);
        let cert = certificate(&upper, &lower);
        policies.push(ep.policy);
        let mut record = EpisodeRecord {
            episode: k + 1,
            repeats: 0,
            total_repeats: n_tot,
            upper,
            lower: Some(lower),
            certificate: Some(cert),
            trajectories,
        };
        if cert <= params.epsilon {
            records.push(record);
            certified_at = Some(k);
            break;
        }
        if n_tot == params.budget {
            records.push(record);
            break;
        }
        let policy = policies.last().expect("just pushed");
        let mut counter = vec![0usize; horizon * states];
        let mut rng = rng::stream(seed, &[tags::COVER, k as u64]);
        let mut repeats = 0;
        loop {
            repeats += 1;
            n_tot += 1;
            let traj = sample_trajectory(game, policy, horizon, &mut rng)?;
            trajectories += 1;
            let mut fired = false;
            for tr in &traj.steps {
                let cell = tr.step * states + tr.state;
                counter[cell] += 1;
                if counter[cell] as f64 >= (ep.visits[cell] as f64).max(params.trigger) {
                    fired = true;
                }
            }
            if fired || n_tot == params.budget {
                break;
            }
        }
        cover.push((policy.clone(), repeats));
        record.repeats = repeats;
        record.total_repeats = n_tot;
        record.trajectories = trajectories;
        records.push(record);
    }
    assert!(cover.len() <= params.max_episodes, "cover updates exceed the episode cap");
    let best = certified_at.unwrap_or_else(|| argmin_certificate(&records).expect("at least one episode"));
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
