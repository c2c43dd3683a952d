//! Browser bindings: each export runs a small experiment and returns a JSON
//! document for the demo page to plot.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mg_equilib::common::{EnvDims, EquilibriumKind};
use mg_equilib::envs::{random_congestion, random_game, singleton_actions, LinearGame, RewardStructure};
use mg_equilib::game::{brute_force_pure_nash, cce_gap, ce_gap, nash_gap, PureNashSearch};
use mg_equilib::nash_ca::{default_nash_ca_params, run_nash_ca, NashCaTuning, Potential, SolverTuning};
use mg_equilib::oracles::{hedge_regret_bound, LearnerMode, RegretLearner};
use mg_equilib::prebo::{default_prebo_params, run_prebo, PreboTuning};
use mg_equilib::{Error, Result};

const CURVE_POINTS: usize = 200;

fn check(name: &str, value: usize, lo: usize, hi: usize) -> Result<()> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [{lo}, {hi}], got {value}")))
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Serialize)]
struct HedgeCurve {
    rounds: Vec<usize>,
    regret: Vec<f64>,
    bound: Vec<f64>,
}

/// External regret of Hedge over time against `alternating` or `adaptive`
/// losses, with the `2 sqrt(T ln B)` bound.
pub fn hedge_curve_json(arms: usize, rounds: usize, adversary: &str) -> Result<String> {
    check("arms", arms, 2, 16)?;
    check("rounds", rounds, 1, 100_000)?;
    let adaptive = match adversary {
        "alternating" => false,
        "adaptive" => true,
        other => return Err(Error::Config(format!("unknown adversary {other:?}"))),
    };
    let mut learner = RegretLearner::new(arms, LearnerMode::FullExternal, Some(rounds))?;
    let mut incurred = 0.0;
    let mut per_arm = vec![0.0; arms];
    let every = rounds.div_ceil(CURVE_POINTS);
    let mut curve = HedgeCurve { rounds: Vec::new(), regret: Vec::new(), bound: Vec::new() };
    let mut losses = vec![0.0; arms];
    for t in 0..rounds {
        losses.iter_mut().for_each(|l| *l = 0.0);
        let p = learner.distribution();
        let hit = if adaptive { (0..arms).fold(0, |b, a| if p[a] > p[b] { a } else { b }) } else { t % arms };
        losses[hit] = 1.0;
        incurred += p[hit];
        per_arm[hit] += 1.0;
        learner.full_update(&losses)?;
        if (t + 1) % every == 0 || t + 1 == rounds {
            curve.rounds.push(t + 1);
            curve.regret.push(incurred - per_arm.iter().copied().fold(f64::INFINITY, f64::min));
            curve.bound.push(hedge_regret_bound((t + 1) as f64, arms));
        }
    }
    to_json(&curve)
}

#[derive(Serialize)]
struct NashStep {
    episode: usize,
    potential: Option<f64>,
    deltas: Vec<f64>,
    switched: Option<usize>,
}

#[derive(Serialize)]
struct NashTrace {
    steps: Vec<NashStep>,
    profile: Vec<usize>,
    converged: bool,
    nash_gap: f64,
    in_pure_ne_set: bool,
    trajectories: u64,
}

/// Coordinate ascent on a random singleton congestion game.
pub fn nash_ca_trace_json(players: usize, facilities: usize, seed: u64, epsilon: f64) -> Result<String> {
    check("players", players, 2, 4)?;
    check("facilities", facilities, 2, 4)?;
    let cg = random_congestion(seed, players, facilities, singleton_actions(players, facilities))?;
    let env = LinearGame::congestion(&cg)?;
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
    let params = default_nash_ca_params(epsilon, 0.1, players, 1, &tuning)?;
    let out = run_nash_ca(&env, &params, Some(&Potential::Congestion(cg)), seed)?;
    let profile = (0..players)
        .map(|i| {
            let d = out.policy.player_marginal(0, 0, i);
            d.iter().position(|&x| x == 1.0).unwrap_or(0)
        })
        .collect();
    let ne = brute_force_pure_nash(&env.game, PureNashSearch::default())?;
    let trace = NashTrace {
        steps: out
            .episodes
            .iter()
            .map(|e| NashStep {
                episode: e.episode,
                potential: e.potential,
                deltas: e.deltas.clone(),
                switched: e.switched,
            })
            .collect(),
        profile,
        converged: out.converged,
        nash_gap: nash_gap(&env.game, &out.policy)?.max,
        in_pure_ne_set: ne.contains(&out.policy),
        trajectories: out.trajectories,
    };
    to_json(&trace)
}

#[derive(Serialize)]
struct PreboStep {
    episode: usize,
    certificate: Option<f64>,
    exact_gap: f64,
    trajectories: u64,
}

#[derive(Serialize)]
struct PreboTrace {
    steps: Vec<PreboStep>,
    output_episode: usize,
    output_gap: f64,
}

/// Bandit-oracle policy replay on a random two-player game, with the exact
/// gap of every episode's policy.
pub fn prebo_trace_json(states: usize, seed: u64, epsilon: f64, mode: &str) -> Result<String> {
    check("states", states, 1, 4)?;
    let kind = match mode {
        "cce" => EquilibriumKind::Cce,
        "ce" => EquilibriumKind::Ce,
        other => return Err(Error::Config(format!("unknown mode {other:?}"))),
    };
    let game = random_game(seed, states, &[2, 2], 2, RewardStructure::General)?;
    let tuning = PreboTuning {
        beta_scale: 0.01,
        regret_scale: 0.05,
        budget_scale: 4.0,
        record_policies: true,
        ..Default::default()
    };
    let params = default_prebo_params(epsilon, 0.1, EnvDims::of_game(&game), kind, &tuning)?;
    let out = run_prebo(&game, &params, seed)?;
    let gap = |p| match kind {
        EquilibriumKind::Cce => cce_gap(&game, p).map(|g| g.max),
        EquilibriumKind::Ce => ce_gap(&game, p).map(|g| g.max),
    };
    let steps = out
        .episodes
        .iter()
        .zip(&out.episode_policies)
        .map(|(e, p)| {
            Ok(PreboStep {
                episode: e.episode,
                certificate: e.certificate,
                exact_gap: gap(p)?,
                trajectories: e.trajectories,
            })
        })
        .collect::<Result<_>>()?;
    to_json(&PreboTrace { steps, output_episode: out.output_episode, output_gap: gap(&out.policy)? })
}

fn js(r: Result<String>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn hedge_curve(arms: usize, rounds: usize, adversary: &str) -> std::result::Result<String, JsValue> {
    js(hedge_curve_json(arms, rounds, adversary))
}

#[wasm_bindgen]
pub fn nash_ca_trace(
    players: usize,
    facilities: usize,
    seed: u32,
    epsilon: f64,
) -> std::result::Result<String, JsValue> {
    js(nash_ca_trace_json(players, facilities, seed.into(), epsilon))
}

#[wasm_bindgen]
pub fn prebo_trace(states: usize, seed: u32, epsilon: f64, mode: &str) -> std::result::Result<String, JsValue> {
    js(prebo_trace_json(states, seed.into(), epsilon, mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn hedge_curve_stays_below_bound() {
        let v = parse(&hedge_curve_json(4, 5000, "adaptive").unwrap());
        let regret = v["regret"].as_array().unwrap();
        let bound = v["bound"].as_array().unwrap();
        assert_eq!(regret.len(), 200);
        assert_eq!(v["rounds"][199], 5000);
        for (r, b) in regret.iter().zip(bound) {
            assert!(r.as_f64().unwrap() <= b.as_f64().unwrap());
        }
        assert!(hedge_curve_json(1, 10, "adaptive").is_err());
        assert!(hedge_curve_json(2, 10, "nope").is_err());
    }

    #[test]
    fn nash_trace_potential_rises_on_switches() {
        let v = parse(&nash_ca_trace_json(2, 2, 1, 0.1).unwrap());
        assert!(v["nash_gap"].as_f64().unwrap() <= 0.1);
        let steps = v["steps"].as_array().unwrap();
        for w in steps.windows(2) {
            if !w[0]["switched"].is_null() {
                assert!(w[1]["potential"].as_f64().unwrap() > w[0]["potential"].as_f64().unwrap());
            }
        }
        assert_eq!(v["profile"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn prebo_trace_reports_the_output_gap() {
        let v = parse(&prebo_trace_json(2, 3, 0.25, "cce").unwrap());
        let steps = v["steps"].as_array().unwrap();
        assert!(!steps.is_empty());
        let k = v["output_episode"].as_u64().unwrap() as usize;
        assert_eq!(steps[k - 1]["exact_gap"], v["output_gap"]);
        assert!(prebo_trace_json(2, 3, 0.25, "nash").is_err());
    }
}
