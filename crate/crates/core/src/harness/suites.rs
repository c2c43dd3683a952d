//! Empirical checks of the no-regret learners and the constrained regression.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{
    bandit_regret_bound, bandit_swap_regret_bound, external_regret, hedge_regret_bound, swap_regret, swap_regret_bound,
    LearnerMode, RegretLearner,
};
use crate::regression::{fit_constrained_ls, ls_objective};
use crate::rng;

/// Named oracle suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Hedge,
    Swap,
    Bandit,
    BanditSwap,
    Regression,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hedge" => Self::Hedge,
            "swap" => Self::Swap,
            "bandit" => Self::Bandit,
            "bandit-swap" => Self::BanditSwap,
            "regression" => Self::Regression,
            other => {
                return Err(Error::Config(format!(
                    "unknown suite {other:?}; expected hedge, swap, bandit, bandit-swap or regression"
                )))
            }
        })
    }
}

impl Suite {
    /// Fraction of cases that must pass.
    pub fn required_rate(self) -> f64 {
        match self {
            Self::Hedge | Self::Regression => 1.0,
            Self::Swap | Self::Bandit | Self::BanditSwap => 0.95,
        }
    }
}

/// One measured statistic against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub suite: Suite,
    pub cases: Vec<OracleCase>,
    pub pass_rate: f64,
    pub required_rate: f64,
    pub passed: bool,
}

pub const ROUNDS: usize = 10_000;
pub const ARM_COUNTS: [usize; 3] = [2, 4, 8];
pub const REGRESSION_PROBES: usize = 10_000;

fn case(name: String, value: f64, threshold: f64) -> OracleCase {
    OracleCase { name, value, threshold, passed: value <= threshold }
}

fn argmax_first(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in p.iter().enumerate().skip(1) {
        if x > p[best] {
            best = k;
        }
    }
    best
}

/// Loss sequences for the full-information suites. `Alternating` and
/// `Adaptive` are deterministic; `Random` draws uniform losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    /// Arm `t mod B` loses 1.
    Alternating,
    /// The currently most likely arm loses 1.
    Adaptive,
    Random(u64),
}

/// Runs a full-information learner against an adversary and returns its
/// external and swap regret.
pub fn full_information_regret(
    mode: LearnerMode,
    arms: usize,
    rounds: usize,
    adversary: Adversary,
) -> Result<(f64, f64)> {
    let mut learner = RegretLearner::new(arms, mode, Some(rounds))?.with_history();
    let mut rng = rng::stream(
        match adversary {
            Adversary::Random(s) => s,
            _ => 0,
        },
        &[],
    );
    let mut losses = vec![0.0; arms];
    for t in 0..rounds {
        match adversary {
            Adversary::Alternating => {
                losses.iter_mut().for_each(|l| *l = 0.0);
                losses[t % arms] = 1.0;
            }
            Adversary::Adaptive => {
                losses.iter_mut().for_each(|l| *l = 0.0);
                losses[argmax_first(learner.distribution())] = 1.0;
            }
            Adversary::Random(_) => losses.iter_mut().for_each(|l| *l = rng.random::<f64>()),
        }
        learner.full_update(&losses)?;
    }
    let h = learner.history().expect("history enabled");
    Ok((external_regret(h), swap_regret(h)))
}

/// Runs a bandit learner on Bernoulli arms with random means and returns
/// its external and swap regret against the realized loss vectors.
pub fn bandit_regret(mode: LearnerMode, arms: usize, rounds: usize, seed: u64) -> Result<(f64, f64)> {
    let mut learner = RegretLearner::new(arms, mode, None)?.with_history();
    let mut rng = rng::stream(seed, &[arms as u64]);
    let means: Vec<f64> = (0..arms).map(|_| rng.random::<f64>()).collect();
    let mut losses = vec![0.0; arms];
    for _ in 0..rounds {
        for (l, m) in losses.iter_mut().zip(&means) {
            *l = if rng.random::<f64>() < *m { 1.0 } else { 0.0 };
        }
        let arm = learner.sample(&mut rng);
        learner.bandit_update_observed(arm, &losses)?;
    }
    let h = learner.history().expect("history enabled");
    Ok((external_regret(h), swap_regret(h)))
}

fn unit_ball_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    v.into_iter().map(|x| x / n).collect()
}

/// Projected gradient descent on the ball, as an independent reference.
fn projected_gradient(samples: &[(Vec<f64>, f64)], d: usize, radius: f64, iters: usize) -> Vec<f64> {
    let lipschitz: f64 = 2.0 * samples.iter().map(|(p, _)| p.iter().map(|x| x * x).sum::<f64>()).sum::<f64>();
    if lipschitz == 0.0 {
        return vec![0.0; d];
    }
    let step = 1.0 / lipschitz;
    let mut theta = vec![0.0; d];
    for _ in 0..iters {
        let mut grad = vec![0.0; d];
        for (phi, y) in samples {
            let r: f64 = phi.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() - y;
            for (g, p) in grad.iter_mut().zip(phi) {
                *g += 2.0 * r * p;
            }
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= step * g;
        }
        let n = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > radius {
            theta.iter_mut().for_each(|t| *t *= radius / n);
        }
    }
    theta
}

/// One random regression probe: returns `(excess objective over the best
/// comparator, norm excess over the radius)`.
pub fn regression_probe(seed: u64, probe: u64) -> Result<(f64, f64)> {
    let mut rng = rng::stream(seed, &[probe]);
    let d = rng.random_range(1..=5);
    let n = rng.random_range(1..=20);
    let radius = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    let samples: Vec<(Vec<f64>, f64)> =
        (0..n).map(|_| (unit_ball_point(d, &mut rng), rng.random::<f64>() * 3.0)).collect();
    let view = || samples.iter().map(|(p, y)| (p.as_slice(), *y));
    let fit = fit_constrained_ls(d, view(), radius)?;
    let objective = ls_objective(view(), &fit.theta);
    let mut best = ls_objective(view(), &projected_gradient(&samples, d, radius, 2000));
    best = best.min(ls_objective(view(), &vec![0.0; d]));
    for _ in 0..8 {
        let dir = unit_ball_point(d, &mut rng);
        let scaled: Vec<f64> = dir.iter().map(|x| x * radius).collect();
        best = best.min(ls_objective(view(), &scaled));
    }
    let excess = (objective - best) / (1.0 + best.abs());
    Ok((excess, fit.norm() - radius))
}

fn summarize(suite: Suite, cases: Vec<OracleCase>) -> OracleReport {
    let pass_rate = cases.iter().filter(|c| c.passed).count() as f64 / cases.len().max(1) as f64;
    let required_rate = suite.required_rate();
    OracleReport { suite, passed: pass_rate >= required_rate && !cases.is_empty(), cases, pass_rate, required_rate }
}

/// Runs a suite over `seeds`.
pub fn oracle_check(suite: Suite, seeds: &[u64]) -> Result<OracleReport> {
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    let t = ROUNDS as f64;
    let mut cases = Vec::new();
    match suite {
        Suite::Hedge => {
            for &b in &ARM_COUNTS {
                let bound = hedge_regret_bound(t, b);
                for adv in [Adversary::Alternating, Adversary::Adaptive] {
                    let (r, _) = full_information_regret(LearnerMode::FullExternal, b, ROUNDS, adv)?;
                    cases.push(case(format!("B={b} {adv:?}"), r, bound));
                }
                for &s in seeds {
                    let (r, _) = full_information_regret(LearnerMode::FullExternal, b, ROUNDS, Adversary::Random(s))?;
                    cases.push(case(format!("B={b} random seed {s}"), r, bound));
                }
            }
        }
        Suite::Swap => {
            for &b in &ARM_COUNTS {
                let bound = swap_regret_bound(t, b);
                for &s in seeds {
                    let adv = if s % 2 == 0 { Adversary::Random(s) } else { Adversary::Adaptive };
                    let (_, r) = full_information_regret(LearnerMode::FullSwap, b, ROUNDS, adv)?;
                    cases.push(case(format!("B={b} seed {s}"), r, bound));
                }
            }
        }
        Suite::Bandit | Suite::BanditSwap => {
            for &b in &ARM_COUNTS {
                for &s in seeds {
                    let (r, bound) = if suite == Suite::Bandit {
                        (bandit_regret(LearnerMode::BanditExternal, b, ROUNDS, s)?.0, bandit_regret_bound(t, b, 1.0))
                    } else {
                        (bandit_regret(LearnerMode::BanditSwap, b, ROUNDS, s)?.1, bandit_swap_regret_bound(t, b, 1.0))
                    };
                    cases.push(case(format!("B={b} seed {s}"), r, bound));
                }
            }
        }
        Suite::Regression => {
            let per_seed = REGRESSION_PROBES.div_ceil(seeds.len());
            for &s in seeds {
                for p in 0..per_seed as u64 {
                    let (excess, norm_excess) = regression_probe(s, p)?;
                    cases.push(case(format!("seed {s} probe {p}"), excess.max(norm_excess), 1e-7));
                }
            }
        }
    }
    Ok(summarize(suite, cases))
}
