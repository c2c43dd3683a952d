//! No-regret learners over `B` arms.
//!
//! * full-information external regret: Hedge (exponential weights);
//! * full-information swap regret: Blum–Mansour over `B` Hedge experts;
//! * bandit external regret: EXP3-IX (implicit exploration);
//! * bandit swap regret: Blum–Mansour over `B` EXP3-IX experts.
//!
//! Losses live in `[0, 1]`. Every learner keeps cumulative (estimated) losses
//! and plays `p ∝ exp(-eta * L)`, which keeps the state finite no matter how
//! many rounds are played.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sample_categorical;

/// Which regret notion the learner controls, and what feedback it gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerMode {
    FullExternal,
    FullSwap,
    BanditExternal,
    BanditSwap,
}

impl LearnerMode {
    pub fn is_bandit(self) -> bool {
        matches!(self, Self::BanditExternal | Self::BanditSwap)
    }

    pub fn is_swap(self) -> bool {
        matches!(self, Self::FullSwap | Self::BanditSwap)
    }
}

/// External-regret bound of Hedge at the fixed rate: `2 sqrt(T ln B)`.
pub fn hedge_regret_bound(rounds: f64, arms: usize) -> f64 {
    2.0 * (rounds * (arms as f64).ln()).sqrt()
}

/// Swap-regret bound of Blum–Mansour over Hedge: `3 sqrt(B T ln B)`.
pub fn swap_regret_bound(rounds: f64, arms: usize) -> f64 {
    3.0 * (arms as f64 * rounds * (arms as f64).ln()).sqrt()
}

/// Bandit external-regret bound: `2 sqrt(B T) ln(B T / delta)`.
pub fn bandit_regret_bound(rounds: f64, arms: usize, delta: f64) -> f64 {
    let b = arms as f64;
    2.0 * (b * rounds).sqrt() * (b * rounds / delta).ln().max(0.0)
}

/// Bandit swap-regret bound: `3 B sqrt(T) ln(B T / delta)`.
pub fn bandit_swap_regret_bound(rounds: f64, arms: usize, delta: f64) -> f64 {
    let b = arms as f64;
    3.0 * b * rounds.sqrt() * (b * rounds / delta).ln().max(0.0)
}

/// Played distributions and full loss vectors, for computing exact regrets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub distributions: Vec<Vec<f64>>,
    pub losses: Vec<Vec<f64>>,
}

impl History {
    pub fn push(&mut self, p: &[f64], losses: &[f64]) {
        self.distributions.push(p.to_vec());
        self.losses.push(losses.to_vec());
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    fn arms(&self) -> usize {
        self.losses.first().map_or(0, Vec::len)
    }
}

/// `sum_t <p_t, l_t> - min_b sum_t l_t(b)`.
pub fn external_regret(history: &History) -> f64 {
    let b = history.arms();
    let mut incurred = 0.0;
    let mut per_arm = vec![0.0; b];
    for (p, l) in history.distributions.iter().zip(&history.losses) {
        incurred += dot(p, l);
        for (acc, x) in per_arm.iter_mut().zip(l) {
            *acc += x;
        }
    }
    incurred - per_arm.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `sum_b max_{b'} sum_t p_t(b) (l_t(b) - l_t(b'))`: the best swap map
/// decomposes arm by arm.
pub fn swap_regret(history: &History) -> f64 {
    let b = history.arms();
    // gain[from * b + to] = sum_t p_t(from) (l_t(from) - l_t(to))
    let mut gain = vec![0.0; b * b];
    for (p, l) in history.distributions.iter().zip(&history.losses) {
        for from in 0..b {
            if p[from] == 0.0 {
                continue;
            }
            for to in 0..b {
                gain[from * b + to] += p[from] * (l[from] - l[to]);
            }
        }
    }
    (0..b).map(|from| gain[from * b..(from + 1) * b].iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `p ∝ exp(-eta * losses)`, computed stably.
fn softmax_neg(losses: &[f64], eta: f64, out: &mut [f64]) {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(losses) {
        *o = (-eta * (l - min)).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Stationary distribution `p = p Q` of a row-stochastic matrix with
/// strictly positive rows (the rows are softmax outputs).
///
/// Power iteration on the lazy chain `(I + Q) / 2` from a warm start, with a
/// direct linear solve if the fixed-point residual stays above `1e-10`.
pub fn stationary_distribution(q: &[f64], b: usize, warm: &[f64]) -> Vec<f64> {
    let mut p = warm.to_vec();
    let mut next = vec![0.0; b];
    let max_iter = (10 * b * b).max(100);
    for _ in 0..max_iter {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (j, pj) in p.iter().enumerate() {
            for (k, nk) in next.iter_mut().enumerate() {
                *nk += pj * q[j * b + k];
            }
        }
        let mut diff = 0.0;
        for (n, old) in next.iter_mut().zip(&p) {
            *n = 0.5 * (*n + old);
            diff += (*n - old).abs();
        }
        std::mem::swap(&mut p, &mut next);
        if diff <= 1e-12 {
            break;
        }
    }
    normalize(&mut p);
    if fixed_point_residual(q, b, &p) > 1e-10 {
        if let Some(exact) = stationary_solve(q, b) {
            p = exact;
        }
    }
    p
}

fn normalize(p: &mut [f64]) {
    for x in p.iter_mut() {
        *x = x.max(0.0);
    }
    let total: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= total;
    }
}

/// `max_k |(p Q)_k - p_k|`.
pub fn fixed_point_residual(q: &[f64], b: usize, p: &[f64]) -> f64 {
    (0..b)
        .map(|k| {
            let pq: f64 = (0..b).map(|j| p[j] * q[j * b + k]).sum();
            (pq - p[k]).abs()
        })
        .fold(0.0, f64::max)
}

fn stationary_solve(q: &[f64], b: usize) -> Option<Vec<f64>> {
    // (Q^T - I) p = 0 with the last equation replaced by sum(p) = 1.
    let mut a = DMatrix::from_fn(b, b, |r, c| q[c * b + r] - if r == c { 1.0 } else { 0.0 });
    let mut rhs = DVector::zeros(b);
    for c in 0..b {
        a[(b - 1, c)] = 1.0;
    }
    rhs[b - 1] = 1.0;
    let sol = a.lu().solve(&rhs)?;
    let mut p: Vec<f64> = sol.iter().copied().collect();
    if p.iter().any(|x| !x.is_finite()) {
        return None;
    }
    normalize(&mut p);
    Some(p)
}

/// One no-regret instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLearner {
    arms: usize,
    mode: LearnerMode,
    /// Known number of rounds; `None` selects the doubling schedule (full
    /// information) or the anytime rate (bandit).
    horizon: Option<usize>,
    rounds: usize,
    epoch_start: usize,
    epoch_len: usize,
    eta: f64,
    eta_override: Option<f64>,
    /// Cumulative (estimated) losses: `B` entries, or `B * B` for swap modes.
    cumulative: Vec<f64>,
    /// Swap modes: the expert matrix `Q`.
    experts: Vec<f64>,
    p: Vec<f64>,
    clipped: usize,
    history: Option<History>,
}

impl RegretLearner {
    /// A learner with uniform `p_1`. `horizon` is the number of rounds if known.
    pub fn new(arms: usize, mode: LearnerMode, horizon: Option<usize>) -> Result<Self> {
        if arms == 0 {
            return Err(Error::Learner("a learner needs at least one arm".into()));
        }
        if horizon == Some(0) {
            return Err(Error::Learner("horizon must be positive".into()));
        }
        let width = if mode.is_swap() { arms * arms } else { arms };
        let uniform = 1.0 / arms as f64;
        let mut learner = Self {
            arms,
            mode,
            horizon,
            rounds: 0,
            epoch_start: 0,
            epoch_len: horizon.unwrap_or(1),
            eta: 0.0,
            eta_override: None,
            cumulative: vec![0.0; width],
            experts: if mode.is_swap() { vec![uniform; width] } else { Vec::new() },
            p: vec![uniform; arms],
            clipped: 0,
            history: None,
        };
        learner.eta = learner.scheduled_eta();
        Ok(learner)
    }

    /// Replaces the scheduled rate with a constant.
    pub fn with_learning_rate(mut self, eta: f64) -> Self {
        self.eta_override = Some(eta);
        self.eta = eta;
        self
    }

    /// Records played distributions and full losses.
    pub fn with_history(mut self) -> Self {
        self.history = Some(History::default());
        self
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn mode(&self) -> LearnerMode {
        self.mode
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// The distribution for the next round.
    pub fn distribution(&self) -> &[f64] {
        &self.p
    }

    /// Swap modes: row `j` is expert `j`'s distribution.
    pub fn expert_matrix(&self) -> &[f64] {
        &self.experts
    }

    /// Number of full-information losses clipped into `[0, 1]`.
    pub fn clipped_losses(&self) -> usize {
        self.clipped
    }

    pub fn history(&self) -> Option<&History> {
        self.history.as_ref()
    }

    pub fn learning_rate(&self) -> f64 {
        self.eta
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.p, rng)
    }

    fn ln_arms(&self) -> f64 {
        (self.arms as f64).ln()
    }

    /// Rate for the current round: fixed horizon or doubling epoch for full
    /// information, `sqrt(ln B / (B t))` for bandits.
    fn scheduled_eta(&self) -> f64 {
        if let Some(eta) = self.eta_override {
            return eta;
        }
        let b = self.arms as f64;
        match self.mode {
            LearnerMode::FullExternal => (self.ln_arms() / self.epoch_len as f64).sqrt(),
            LearnerMode::FullSwap => (b * self.ln_arms() / self.epoch_len as f64).sqrt(),
            LearnerMode::BanditExternal | LearnerMode::BanditSwap => {
                (self.ln_arms() / (b * (self.rounds + 1) as f64)).sqrt()
            }
        }
    }

    /// Full-information update with loss vector `l_t`.
    pub fn full_update(&mut self, losses: &[f64]) -> Result<&[f64]> {
        if self.mode.is_bandit() {
            return Err(Error::Learner(format!("{:?} learner cannot take full feedback", self.mode)));
        }
        if losses.len() != self.arms {
            return Err(Error::Learner(format!("expected {} losses, got {}", self.arms, losses.len())));
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("loss"));
        }
        let clipped: Vec<f64> = losses
            .iter()
            .map(|&l| {
                if !(0.0..=1.0).contains(&l) {
                    self.clipped += 1;
                }
                l.clamp(0.0, 1.0)
            })
            .collect();
        if let Some(h) = self.history.as_mut() {
            h.push(&self.p, &clipped);
        }
        match self.mode {
            LearnerMode::FullExternal => {
                for (c, l) in self.cumulative.iter_mut().zip(&clipped) {
                    *c += l;
                }
            }
            _ => {
                let b = self.arms;
                for j in 0..b {
                    let pj = self.p[j];
                    for (c, l) in self.cumulative[j * b..(j + 1) * b].iter_mut().zip(&clipped) {
                        *c += pj * l;
                    }
                }
            }
        }
        self.rounds += 1;
        self.advance_epoch();
        self.refresh();
        Ok(&self.p)
    }

    /// Bandit update after playing `arm` (drawn from the current
    /// distribution) and observing `loss`.
    pub fn bandit_update(&mut self, arm: usize, loss: f64) -> Result<&[f64]> {
        if !self.mode.is_bandit() {
            return Err(Error::Learner(format!("{:?} learner needs full feedback", self.mode)));
        }
        if arm >= self.arms {
            return Err(Error::Learner(format!("arm {arm} out of range for {} arms", self.arms)));
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::Learner(format!("bandit loss {loss} outside [0, 1]")));
        }
        let gamma = self.implicit_exploration();
        let estimate = loss / (self.p[arm] + gamma);
        match self.mode {
            LearnerMode::BanditExternal => self.cumulative[arm] += estimate,
            _ => {
                let b = self.arms;
                for j in 0..b {
                    self.cumulative[j * b + arm] += self.p[j] * estimate;
                }
            }
        }
        self.rounds += 1;
        self.eta = self.scheduled_eta();
        self.refresh();
        Ok(&self.p)
    }

    /// Bandit update that also records the full loss vector in the history.
    pub fn bandit_update_observed(&mut self, arm: usize, losses: &[f64]) -> Result<&[f64]> {
        if losses.len() != self.arms {
            return Err(Error::Learner(format!("expected {} losses, got {}", self.arms, losses.len())));
        }
        if let Some(h) = self.history.as_mut() {
            h.push(&self.p, losses);
        }
        self.bandit_update(arm, losses[arm])
    }

    /// `gamma_t` of the current round (equal to the bandit learning rate).
    pub fn implicit_exploration(&self) -> f64 {
        match self.eta_override {
            Some(eta) => eta,
            None if self.mode.is_bandit() => self.scheduled_eta(),
            None => 0.0,
        }
    }

    /// Doubling: once an epoch is used up, the next one is twice as long and
    /// starts from uniform weights.
    fn advance_epoch(&mut self) {
        if self.horizon.is_some() || self.rounds - self.epoch_start < self.epoch_len {
            return;
        }
        self.epoch_start = self.rounds;
        self.epoch_len *= 2;
        self.cumulative.iter_mut().for_each(|c| *c = 0.0);
        self.eta = self.scheduled_eta();
    }

    fn refresh(&mut self) {
        let b = self.arms;
        if self.mode.is_swap() {
            for j in 0..b {
                softmax_neg(&self.cumulative[j * b..(j + 1) * b], self.eta, &mut self.experts[j * b..(j + 1) * b]);
            }
            self.p = stationary_distribution(&self.experts, b, &self.p);
        } else {
            softmax_neg(&self.cumulative, self.eta, &mut self.p);
        }
    }
}
