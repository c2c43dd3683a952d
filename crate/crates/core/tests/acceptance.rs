//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits with a nonzero status if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use mg_equilib::common::{EnvDims, EquilibriumKind};
use mg_equilib::envs::{
    matching_pennies, random_congestion, random_game, singleton_actions, LinearGame, RewardStructure,
};
use mg_equilib::game::{
    best_modification_value, best_response_value, brute_force_pure_nash, cce_gap, ce_gap, evaluate_value, nash_gap,
    rollout_count, Component, MixtureMarkovPolicy, ProductLayer, PureNashSearch, TabularMarkovGame,
};
use mg_equilib::harness::{run_cell, run_experiment, ExperimentConfig, RunOverrides};
use mg_equilib::nash_ca::{default_nash_ca_params, run_nash_ca, NashCaTuning, Potential, SolverTuning};
use mg_equilib::oracles::{swap_regret, History, LearnerMode, RegretLearner};
use mg_equilib::prebo::{default_prebo_params, run_prebo, PreboTuning};
use mg_equilib::prefi::{params_for_env, run_prefi, CoverMode, PrefiTuning};
use mg_equilib::regression::{fit_constrained_ls, CovarianceAccumulator};
use mg_equilib::rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- criterion 1

/// Incurred loss, per-arm cumulative loss, and per-arm swap gains of a run,
/// accumulated here from the distributions actually played.
struct Tally {
    incurred: f64,
    per_arm: Vec<f64>,
    /// cross[a * B + b] = sum_t p_t(a) (l_t(a) - l_t(b)).
    cross: Vec<f64>,
}

impl Tally {
    fn new(b: usize) -> Self {
        Self { incurred: 0.0, per_arm: vec![0.0; b], cross: vec![0.0; b * b] }
    }

    fn push(&mut self, p: &[f64], l: &[f64]) {
        let b = p.len();
        self.incurred += p.iter().zip(l).map(|(x, y)| x * y).sum::<f64>();
        for a in 0..b {
            self.per_arm[a] += l[a];
            for c in 0..b {
                self.cross[a * b + c] += p[a] * (l[a] - l[c]);
            }
        }
    }

    fn external(&self) -> f64 {
        self.incurred - self.per_arm.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn swap(&self) -> f64 {
        let b = self.per_arm.len();
        (0..b).map(|a| (0..b).map(|c| self.cross[a * b + c]).fold(f64::NEG_INFINITY, f64::max)).sum()
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = k;
        }
    }
    best
}

const T: usize = 10_000;

fn hedge_run(b: usize, adversary: usize) -> f64 {
    let mut learner = RegretLearner::new(b, LearnerMode::FullExternal, Some(T)).unwrap();
    let mut tally = Tally::new(b);
    let phase = (T as f64).sqrt() as usize;
    let mut l = vec![0.0; b];
    for t in 0..T {
        l.iter_mut().for_each(|x| *x = 0.0);
        match adversary {
            0 => l[t % b] = 1.0,
            1 => l[argmax(learner.distribution())] = 1.0,
            _ => {
                // The best arm rotates every sqrt(T) rounds.
                for (a, x) in l.iter_mut().enumerate() {
                    *x = if a == (t / phase) % b { 0.0 } else { 1.0 };
                }
            }
        }
        tally.push(learner.distribution(), &l);
        learner.full_update(&l).unwrap();
    }
    tally.external()
}

fn swap_run(b: usize, seed: u64) -> f64 {
    let mut learner = RegretLearner::new(b, LearnerMode::FullSwap, Some(T)).unwrap();
    let mut tally = Tally::new(b);
    let mut r = rng::stream(seed, &[b as u64, 11]);
    let mut l = vec![0.0; b];
    for _ in 0..T {
        if r.random::<f64>() < 0.5 {
            l.iter_mut().for_each(|x| *x = 0.0);
            l[argmax(learner.distribution())] = 1.0;
        } else {
            l.iter_mut().for_each(|x| *x = r.random::<f64>());
        }
        tally.push(learner.distribution(), &l);
        learner.full_update(&l).unwrap();
    }
    tally.swap()
}

fn bandit_run(b: usize, seed: u64) -> f64 {
    let mut learner = RegretLearner::new(b, LearnerMode::BanditExternal, None).unwrap();
    let mut tally = Tally::new(b);
    let mut r = rng::stream(seed, &[b as u64, 13]);
    let means: Vec<f64> = (0..b).map(|_| r.random::<f64>()).collect();
    let mut l = vec![0.0; b];
    for _ in 0..T {
        for (x, m) in l.iter_mut().zip(&means) {
            *x = if r.random::<f64>() < *m { 1.0 } else { 0.0 };
        }
        tally.push(learner.distribution(), &l);
        let arm = learner.sample(&mut r);
        learner.bandit_update(arm, l[arm]).unwrap();
    }
    tally.external()
}

/// Random history with dyadic entries, so every sum is exact in floating point.
fn dyadic_history(seed: u64, b: usize, t: usize) -> History {
    let mut r = rng::stream(seed, &[17]);
    let mut h = History::default();
    for _ in 0..t {
        let mut units = vec![0u32; b];
        for _ in 0..8 {
            units[r.random_range(0..b)] += 1;
        }
        let p: Vec<f64> = units.iter().map(|&u| u as f64 / 8.0).collect();
        let l: Vec<f64> = (0..b).map(|_| r.random_range(0..=4) as f64 / 4.0).collect();
        h.push(&p, &l);
    }
    h
}

fn exhaustive_swap(h: &History, b: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let maps = b.pow(b as u32);
    for code in 0..maps {
        let psi: Vec<usize> = (0..b).map(|a| (code / b.pow(a as u32)) % b).collect();
        let mut total = 0.0;
        for (p, l) in h.distributions.iter().zip(&h.losses) {
            for a in 0..b {
                total += p[a] * (l[a] - l[psi[a]]);
            }
        }
        best = best.max(total);
    }
    best
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let tf = T as f64;
    let mut hedge_ok = true;
    let mut worst_hedge: f64 = 0.0;
    for b in [2, 4, 8] {
        let bound = 2.0 * (tf * (b as f64).ln()).sqrt();
        for adv in 0..3 {
            let r = hedge_run(b, adv);
            worst_hedge = worst_hedge.max(r / bound);
            hedge_ok &= r <= bound;
        }
    }
    let hedge_time = start.elapsed();
    let mut swap_rates = Vec::new();
    let mut bandit_rates = Vec::new();
    for b in [2, 4, 8] {
        let bf = b as f64;
        let swap_bound = 3.0 * (bf * tf * bf.ln()).sqrt();
        let bandit_bound = 2.0 * (bf * tf).sqrt() * (bf * tf).ln();
        let swap_pass = (0..50).filter(|&s| swap_run(b, s) <= swap_bound).count();
        let bandit_pass = (0..50).filter(|&s| bandit_run(b, s) <= bandit_bound).count();
        swap_rates.push(swap_pass as f64 / 50.0);
        bandit_rates.push(bandit_pass as f64 / 50.0);
    }
    let mut exact = true;
    for seed in 0..50 {
        let h = dyadic_history(seed, 3, 20);
        exact &= swap_regret(&h) == exhaustive_swap(&h, 3);
    }
    let pass = hedge_ok
        && hedge_time < Duration::from_secs(10)
        && swap_rates.iter().all(|&r| r >= 0.95)
        && bandit_rates.iter().all(|&r| r >= 0.95)
        && exact;
    outcome(
        pass,
        format!(
            "hedge worst regret/bound {worst_hedge:.3} in {:.2}s; swap pass rates {swap_rates:?}; bandit pass rates {bandit_rates:?}; decomposition exact {exact}",
            hedge_time.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn random_simplex<R: Rng>(n: usize, r: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn random_mixture<R: Rng>(game: &TabularMarkovGame, r: &mut R) -> MixtureMarkovPolicy {
    let counts = game.action_counts().to_vec();
    let cells = (0..game.horizon() * game.num_states())
        .map(|_| {
            let w = random_simplex(2, r);
            w.into_iter()
                .map(|weight| Component {
                    weight,
                    layer: ProductLayer { dists: counts.iter().map(|&a| random_simplex(a, r)).collect() },
                })
                .collect()
        })
        .collect();
    MixtureMarkovPolicy::new(game.horizon(), game.num_states(), counts, cells).unwrap()
}

fn exhaustive_best_response(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy, i: usize) -> f64 {
    let (h, s, a) = (game.horizon(), game.num_states(), game.action_counts()[i]);
    let cells = h * s;
    let mut best = f64::NEG_INFINITY;
    for code in 0..a.pow(cells as u32) {
        let dev = policy
            .with_player(i, |hh, ss| {
                let c = hh * s + ss;
                let act = (code / a.pow(c as u32)) % a;
                let mut d = vec![0.0; a];
                d[act] = 1.0;
                d
            })
            .unwrap();
        best = best.max(evaluate_value(game, &dev).unwrap().get(0, game.initial_state(), i));
    }
    best
}

/// Backward induction where every `(h, s)` picks the best of all `A^A` maps
/// by direct search.
fn exhaustive_modification(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy, i: usize) -> f64 {
    let (horizon, states, a) = (game.horizon(), game.num_states(), game.action_counts()[i]);
    let joint = game.joint();
    let mut next = vec![0.0; states];
    for h in (0..horizon).rev() {
        let mut cur = vec![0.0; states];
        for (s, out) in cur.iter_mut().enumerate() {
            let probs = policy.joint_probs(h, s, joint);
            let mut best = f64::NEG_INFINITY;
            for code in 0..a.pow(a as u32) {
                let mut v = 0.0;
                for (idx, &p) in probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let rec = joint.action_of(idx, i);
                    let played = joint.with_action(idx, i, (code / a.pow(rec as u32)) % a);
                    let cont: f64 = game.transition_row(h, s, played).iter().zip(&next).map(|(q, v)| q * v).sum();
                    v += p * (game.mean_reward(h, s, played, i) + cont);
                }
                best = best.max(v);
            }
            *out = best;
        }
        next = cur;
    }
    next[game.initial_state()]
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(2024, &[2]);
    let (mut br_err, mut mod_err): (f64, f64) = (0.0, 0.0);
    let mut dominance = true;
    for g in 0..100u64 {
        let s = r.random_range(1..=3);
        let h = r.random_range(1..=2);
        let counts = [r.random_range(1..=2), r.random_range(1..=2)];
        let game = random_game(g, s, &counts, h, RewardStructure::General).unwrap();
        let policy = random_mixture(&game, &mut r);
        let s1 = game.initial_state();
        for i in 0..2 {
            let lib = best_response_value(&game, &policy, i).unwrap().0.get(0, s1);
            br_err = br_err.max((lib - exhaustive_best_response(&game, &policy, i)).abs());
            let lib = best_modification_value(&game, &policy, i).unwrap().0.get(0, s1);
            mod_err = mod_err.max((lib - exhaustive_modification(&game, &policy, i)).abs());
        }
        let cce = cce_gap(&game, &policy).unwrap();
        let ce = ce_gap(&game, &policy).unwrap();
        dominance &= ce.per_player.iter().zip(&cce.per_player).all(|(c, d)| *c >= d - 1e-9);
    }
    let elapsed = start.elapsed();
    outcome(
        br_err <= 1e-12 && mod_err <= 1e-12 && dominance && elapsed < Duration::from_secs(60),
        format!("max |BR - enumeration| {br_err:.1e}, max |modification - search| {mod_err:.1e}, dominance {dominance}, {:.2}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- criterion 3

fn ball_point<R: Rng>(d: usize, radius: f64, r: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    let scale = radius * r.random::<f64>().powf(1.0 / d as f64) / n;
    g.into_iter().map(|x| x * scale).collect()
}

fn criterion_3() -> Outcome {
    let mut r = rng::stream(77, &[3]);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut norm_ok = true;
    for _ in 0..100 {
        let d = r.random_range(1..=8);
        let n = r.random_range(0..=50);
        let radius = [0.1, 0.5, 1.0, 3.0, 10.0][r.random_range(0..5)];
        let data: Vec<(Vec<f64>, f64)> =
            (0..n).map(|_| (ball_point(d, 1.0, &mut r), r.random::<f64>() * 4.0 - 1.0)).collect();
        let fit = fit_constrained_ls(d, data.iter().map(|(p, y)| (p.as_slice(), *y)), radius).unwrap();
        norm_ok &= fit.norm() <= radius + 1e-9;
        let mut gram = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        let mut c = 0.0;
        for (p, y) in &data {
            let v = DVector::from_column_slice(p);
            gram += &v * v.transpose();
            rhs += &v * *y;
            c += y * y;
        }
        let objective = |t: &DVector<f64>| (t.transpose() * &gram * t)[(0, 0)] - 2.0 * t.dot(&rhs) + c;
        let theta = DVector::from_column_slice(&fit.theta);
        let mine = objective(&theta);
        let tol = 1e-9 * (1.0 + mine.abs());
        let mut best_probe = f64::INFINITY;
        for _ in 0..10_000 {
            best_probe = best_probe.min(objective(&DVector::from_vec(ball_point(d, radius, &mut r))));
        }
        let unconstrained = gram.clone().pseudo_inverse(1e-12).unwrap() * &rhs;
        let norm = unconstrained.norm();
        let projected = if norm > radius { unconstrained * (radius / norm) } else { unconstrained };
        best_probe = best_probe.min(objective(&projected));
        worst_excess = worst_excess.max((mine - best_probe) / tol);
    }
    let e1 = [1.0, 0.0, 0.0];
    let one = [1.0];
    let ex1 = fit_constrained_ls(3, [(&e1[..], 1.0)], 10.0).unwrap().theta;
    let ex2 = fit_constrained_ls(3, [(&e1[..], 1.0)], 0.5).unwrap().theta;
    let ex3 = fit_constrained_ls(1, [(&one[..], 0.0), (&one[..], 1.0)], 10.0).unwrap().theta;
    let dev = [
        ex1.iter().zip([1.0, 0.0, 0.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        ex2.iter().zip([0.5, 0.0, 0.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        (ex3[0] - 0.5).abs(),
    ];
    let closed_forms = dev.iter().all(|&e| e <= 1e-12);
    let mut monotone = true;
    for _ in 0..1000 {
        let d = r.random_range(1..=6);
        let mut acc = CovarianceAccumulator::new(d, r.random::<f64>() + 0.1).unwrap();
        let probes: Vec<Vec<f64>> = (0..4).map(|_| ball_point(d, 1.0, &mut r)).collect();
        let mut last: Vec<f64> = probes.iter().map(|p| acc.bonus(p)).collect();
        for _ in 0..30 {
            acc.add(&ball_point(d, 1.0, &mut r));
            for (p, prev) in probes.iter().zip(last.iter_mut()) {
                let b = acc.bonus(p);
                monotone &= b <= *prev + 1e-12;
                *prev = b;
            }
        }
    }
    outcome(
        worst_excess <= 1.0 && norm_ok && closed_forms && monotone,
        format!("worst excess over best probe {worst_excess:.2} (units of 1e-9 relative), norms ok {norm_ok}, closed-form deviations {dev:?}, bonus monotone {monotone}"),
    )
}

// ---------------------------------------------------------------- criterion 4

fn prebo_suite(kind: EquilibriumKind, states: usize) -> (usize, bool, Duration, f64) {
    let tuning = PreboTuning { beta_scale: 0.01, regret_scale: 0.05, budget_scale: 4.0, ..Default::default() };
    let mut ok = 0;
    let mut within_budget = true;
    let mut times = Vec::new();
    let mut worst: f64 = 0.0;
    for g in 0..20u64 {
        let game = random_game(g, states, &[2, 2], 2, RewardStructure::General).unwrap();
        let params = default_prebo_params(0.25, 0.1, EnvDims::of_game(&game), kind, &tuning).unwrap();
        let start = Instant::now();
        let out = run_prebo(&game, &params, g).unwrap();
        times.push(start.elapsed());
        let gap = match kind {
            EquilibriumKind::Cce => cce_gap(&game, &out.policy).unwrap().max,
            EquilibriumKind::Ce => ce_gap(&game, &out.policy).unwrap().max,
        };
        worst = worst.max(gap);
        ok += usize::from(gap <= 0.25 + 0.05);
        within_budget &= out.trajectories <= (params.budget * params.max_episodes * 2) as u64;
    }
    times.sort();
    (ok, within_budget, times[times.len() / 2], worst)
}

fn criterion_4() -> Outcome {
    let (cce_ok, cce_budget, cce_median, cce_worst) = prebo_suite(EquilibriumKind::Cce, 3);
    let (ce_ok, ce_budget, ce_median, ce_worst) = prebo_suite(EquilibriumKind::Ce, 1);
    let limit = Duration::from_secs(120);
    outcome(
        cce_ok >= 18 && ce_ok >= 18 && cce_budget && ce_budget && cce_median < limit && ce_median < limit,
        format!(
            "CCE gap <= 0.30 in {cce_ok}/20 (worst {cce_worst:.3}, median {:.2}s); CE gap <= 0.30 in {ce_ok}/20 on S=1 (worst {ce_worst:.3}, median {:.2}s); within N_max*K_max*H {}",
            cce_median.as_secs_f64(),
            ce_median.as_secs_f64(),
            cce_budget && ce_budget
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

struct PrefiStats {
    sound: usize,
    runs: usize,
    optimistic: usize,
    pessimistic: usize,
    pairs: usize,
    slowest: Duration,
    mean_bound: f64,
}

fn prefi_suite(envs: &[LinearGame], tuning: &PrefiTuning) -> PrefiStats {
    let mut st = PrefiStats {
        sound: 0,
        runs: 0,
        optimistic: 0,
        pessimistic: 0,
        pairs: 0,
        slowest: Duration::ZERO,
        mean_bound: 0.0,
    };
    for (seed, env) in envs.iter().enumerate() {
        let game = &env.game;
        let s1 = game.initial_state();
        let params = params_for_env(env, 0.2, 0.1, EquilibriumKind::Cce, CoverMode::Lazy, tuning).unwrap();
        let start = Instant::now();
        let out = run_prefi(env, &params, seed as u64).unwrap();
        st.slowest = st.slowest.max(start.elapsed());
        let bound = out.certified_bound.unwrap();
        st.mean_bound += bound / envs.len() as f64;
        st.runs += 1;
        st.sound += usize::from(cce_gap(game, &out.policy).unwrap().max <= bound + 0.05);
        for (ep, policy) in out.episodes.iter().zip(&out.episode_policies) {
            let values = evaluate_value(game, policy).unwrap().initial(s1);
            let lower = ep.lower.as_ref().unwrap();
            for i in 0..game.num_players() {
                let br = best_response_value(game, policy, i).unwrap().0.get(0, s1);
                st.pairs += 1;
                st.optimistic += usize::from(ep.upper[i] + 1e-6 >= br);
                st.pessimistic += usize::from(lower[i] <= values[i] + 1e-6);
            }
        }
    }
    st
}

fn criterion_5() -> Outcome {
    let pennies: Vec<LinearGame> = (0..10).map(|_| LinearGame::tabular(matching_pennies())).collect();
    let mdps: Vec<LinearGame> =
        (0..10).map(|g| LinearGame::tabular(random_game(g, 3, &[2], 2, RewardStructure::General).unwrap())).collect();
    let theory = PrefiTuning { budget_scale: 0.1, rounds_scale: 0.1, record_policies: true, ..Default::default() };
    let practical = PrefiTuning { beta: Some(1.0), lambda: Some(1.0), trigger: Some(20.0), ..theory.clone() };
    let mut pass = true;
    let mut details = Vec::new();
    for (tname, tuning) in [("theory", &theory), ("practical", &practical)] {
        for (ename, envs) in [("pennies", &pennies), ("linear MDP d=6", &mdps)] {
            let st = prefi_suite(envs, tuning);
            let ok = st.sound as f64 >= 0.9 * st.runs as f64
                && st.optimistic as f64 >= 0.9 * st.pairs as f64
                && st.pessimistic as f64 >= 0.9 * st.pairs as f64
                && st.slowest < Duration::from_secs(300);
            pass &= ok;
            details.push(format!(
                "{tname}/{ename}: sound {}/{}, optimism {}/{}, pessimism {}/{}, mean bound {:.3}, slowest {:.2}s",
                st.sound,
                st.runs,
                st.optimistic,
                st.pairs,
                st.pessimistic,
                st.pairs,
                st.mean_bound,
                st.slowest.as_secs_f64()
            ));
        }
    }
    outcome(pass, details.join("; "))
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Outcome {
    let tuning = NashCaTuning {
        solver: SolverTuning {
            beta: Some(1.0),
            lambda: Some(1.0),
            trigger: Some(5.0),
            budget: Some(2000),
            ..Default::default()
        },
        ..Default::default()
    };
    let (mut in_set, mut small_gap, mut pure, mut ascents, mut switches) = (0, 0, 0, 0, 0);
    let mut slowest = Duration::ZERO;
    let mut misses = Vec::new();
    for g in 0..10u64 {
        let cg = random_congestion(g, 2, 2, singleton_actions(2, 2)).unwrap();
        let env = LinearGame::congestion(&cg).unwrap();
        let params = default_nash_ca_params(0.1, 0.1, 2, 1, &tuning).unwrap();
        let start = Instant::now();
        let out = run_nash_ca(&env, &params, Some(&Potential::Congestion(cg.clone())), g).unwrap();
        slowest = slowest.max(start.elapsed());
        let gap = nash_gap(&env.game, &out.policy).unwrap().max;
        let ne = brute_force_pure_nash(&env.game, PureNashSearch::default()).unwrap();
        let member = ne.contains(&out.policy);
        pure += usize::from(out.policy.is_deterministic());
        small_gap += usize::from(gap <= 0.1);
        in_set += usize::from(member && gap <= 0.1);
        if !member {
            misses.push(format!("game {g} gap {gap:.4}"));
        }
        for w in out.episodes.windows(2) {
            if w[0].switched.is_some() {
                switches += 1;
                ascents += usize::from(w[1].potential.unwrap() > w[0].potential.unwrap());
            }
        }
    }
    outcome(
        pure == 10 && in_set >= 9 && ascents == switches && slowest < Duration::from_secs(120),
        format!(
            "pure {pure}/10, Nash gap <= 0.1 in {small_gap}/10, in pure-NE set with gap <= 0.1 in {in_set}/10 (misses: {}), potential increased on {ascents}/{switches} switches, slowest {:.2}s",
            if misses.is_empty() { "none".to_string() } else { misses.join(", ") },
            slowest.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

const CONFIGS: [&str; 4] = [
    r#"{"env": {"family": "matching_pennies"}, "algorithm": "prefi", "epsilon": 0.2, "delta": 0.1, "seeds": [3, 4],
        "prefi": {"budget": 30, "rounds": 5, "beta": 0.5, "lambda": 1.0, "trigger": 3.0}}"#,
    r#"{"env": {"family": "random", "states": 2, "actions": [2, 2], "horizon": 2, "seed": 5}, "algorithm": "prefi-agile",
        "epsilon": 0.2, "delta": 0.1, "seeds": [1, 2], "prefi": {"budget": 6, "rounds": 4, "beta": 0.5, "lambda": 1.0}}"#,
    r#"{"env": {"family": "random", "states": 3, "actions": [2, 2], "horizon": 2, "seed": 9}, "algorithm": "prebo",
        "mode": "ce", "epsilon": 0.25, "delta": 0.1, "seeds": [7, 8], "prebo": {"beta_scale": 0.01, "regret_scale": 0.05}}"#,
    r#"{"env": {"family": "congestion", "players": 2, "facilities": 2, "seed": 1}, "algorithm": "nash-ca", "epsilon": 0.1,
        "delta": 0.1, "seeds": [0, 1], "nash_ca": {"solver": {"beta": 1.0, "lambda": 1.0, "trigger": 5.0, "budget": 500}}}"#,
];

fn read_dir_sorted(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .filter(|(name, _)| name != "summary.csv")
        .collect();
    files.sort();
    files
}

fn criterion_7() -> Outcome {
    let mut identical = true;
    let mut counted = true;
    let mut checked = 0;
    for text in CONFIGS {
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let built = cfg.validate().unwrap();
        for &seed in &cfg.seeds {
            let before = rollout_count();
            let a = run_cell(&cfg, &built, seed).unwrap();
            counted &= rollout_count() - before == a.record.trajectories;
            let b = run_cell(&cfg, &built, seed).unwrap();
            identical &= a.stream == b.stream && a.policy == b.policy;
            checked += 1;
        }
        let dir = tempfile::tempdir().unwrap();
        let mut outputs = Vec::new();
        for threads in [1, 4, 1] {
            let out = dir.path().join(format!("t{threads}-{}", outputs.len()));
            let ov = RunOverrides { out: Some(out.clone()), threads: Some(threads), ..Default::default() };
            run_experiment(cfg.clone(), &ov).unwrap();
            outputs.push(read_dir_sorted(&out));
        }
        identical &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    outcome(
        identical && counted,
        format!("{checked} cells over 4 algorithms: reruns and 1-vs-4-thread artifacts byte-identical {identical}; trajectory counts match instrumented rollouts {counted}"),
    )
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 7] = [
        ("1 oracle suites", criterion_1),
        ("2 evaluation oracles", criterion_2),
        ("3 regression", criterion_3),
        ("4 bandit-oracle learner end to end", criterion_4),
        ("5 full-information learner end to end", criterion_5),
        ("6 coordinate ascent on congestion games", criterion_6),
        ("7 determinism and accounting", criterion_7),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {name}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
