//! Running experiment cells and writing their artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{Algorithm, BuiltEnv, ExperimentConfig};
use crate::common::EnvDims;
use crate::common::RunOutput;
use crate::error::{Error, Result};
use crate::game::eval::{best_modification_value, best_response_value, cce_gap, ce_gap, evaluate_value, nash_gap};
use crate::game::model::TabularMarkovGame;
use crate::game::policy::MixtureMarkovPolicy;
use crate::nash_ca::{default_nash_ca_params, run_nash_ca};
use crate::prebo::{default_prebo_params, run_prebo};
use crate::prefi::{params_for_env, run_prefi, run_prefi_agile, CoverMode};

/// Exact gaps of a policy. The Nash gap is present only for product policies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Gaps {
    pub nash: Option<f64>,
    pub cce: Option<f64>,
    pub ce: Option<f64>,
}

impl Gaps {
    pub fn exact(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy) -> Result<Self> {
        let nash = if policy.is_product() { Some(nash_gap(game, policy)?.max) } else { None };
        Ok(Self { nash, cce: Some(cce_gap(game, policy)?.max), ce: Some(ce_gap(game, policy)?.max) })
    }
}

/// Final record of one `(config, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub episodes: usize,
    pub output_episode: usize,
    pub certified: bool,
    pub certified_bound: Option<f64>,
    pub trajectories: u64,
    pub gaps: Gaps,
    /// Policy document, relative to the output directory.
    pub policy_file: String,
}

/// Everything a cell produces, before it is written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub record: RunRecord,
    /// Newline-delimited records: one per episode, then the final record.
    pub stream: String,
    pub policy: MixtureMarkovPolicy,
}

fn push_line(stream: &mut String, value: &Value) {
    stream.push_str(&value.to_string());
    stream.push('\n');
}

fn episode_lines(
    stream: &mut String,
    game: &TabularMarkovGame,
    out: &RunOutput,
    seed: u64,
    per_episode: bool,
) -> Result<()> {
    for (k, ep) in out.episodes.iter().enumerate() {
        let mut v = serde_json::to_value(ep)?;
        v["kind"] = json!("episode");
        v["seed"] = json!(seed);
        if per_episode {
            if let Some(p) = out.episode_policies.get(k) {
                v["gaps"] = serde_json::to_value(Gaps::exact(game, p)?)?;
            }
        }
        push_line(stream, &v);
    }
    Ok(())
}

/// Runs one cell. Deterministic in `(config, seed)`.
pub fn run_cell(cfg: &ExperimentConfig, built: &BuiltEnv, seed: u64) -> Result<CellResult> {
    let env = &built.env;
    let game = &env.game;
    let per_episode = cfg.evaluation.exact && cfg.evaluation.per_episode;
    let mut stream = String::new();
    let (policy, episodes, output_episode, certified, certified_bound, trajectories) = match cfg.algorithm {
        Algorithm::Prefi | Algorithm::PrefiAgile | Algorithm::Prebo => {
            let out = match cfg.algorithm {
                Algorithm::Prebo => {
                    let mut tuning = cfg.prebo.clone();
                    tuning.record_policies |= per_episode;
                    let params =
                        default_prebo_params(cfg.epsilon, cfg.delta, EnvDims::of_game(game), cfg.mode, &tuning)?;
                    run_prebo(game, &params, seed)?
                }
                alg => {
                    let cover = if alg == Algorithm::Prefi { CoverMode::Lazy } else { CoverMode::Agile };
                    let mut tuning = cfg.prefi.clone();
                    tuning.record_policies |= per_episode;
                    let params = params_for_env(env, cfg.epsilon, cfg.delta, cfg.mode, cover, &tuning)?;
                    match cover {
                        CoverMode::Lazy => run_prefi(env, &params, seed)?,
                        CoverMode::Agile => run_prefi_agile(env, &params, seed)?,
                    }
                }
            };
            episode_lines(&mut stream, game, &out, seed, per_episode)?;
            (out.policy, out.episodes.len(), out.output_episode, out.certified, out.certified_bound, out.trajectories)
        }
        Algorithm::NashCa => {
            let params =
                default_nash_ca_params(cfg.epsilon, cfg.delta, game.num_players(), game.horizon(), &cfg.nash_ca)?;
            let out = run_nash_ca(env, &params, built.potential.as_ref(), seed)?;
            for ep in &out.episodes {
                let mut v = serde_json::to_value(ep)?;
                v["kind"] = json!("episode");
                v["seed"] = json!(seed);
                push_line(&mut stream, &v);
            }
            let n = out.episodes.len();
            (out.policy, n, n, out.converged, None, out.trajectories)
        }
    };
    let gaps = if cfg.evaluation.exact { Gaps::exact(game, &policy)? } else { Gaps::default() };
    let record = RunRecord {
        config_hash: cfg.hash(),
        algorithm: cfg.algorithm,
        seed,
        episodes,
        output_episode,
        certified,
        certified_bound,
        trajectories,
        gaps,
        policy_file: cell_name(cfg.algorithm, seed, "policy.json"),
    };
    let mut v = serde_json::to_value(&record)?;
    v["kind"] = json!("final");
    push_line(&mut stream, &v);
    Ok(CellResult { record, stream, policy })
}

fn cell_name(algorithm: Algorithm, seed: u64, suffix: &str) -> String {
    format!("{}-seed{seed}.{suffix}", algorithm.name())
}

/// Command-line overrides of a config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    /// Replaces the seed list with this single seed.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Worker threads for the seed pool; `None` uses the global pool.
    pub threads: Option<usize>,
    pub exact_eval: Option<bool>,
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub record: RunRecord,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output: PathBuf,
    pub rows: Vec<SummaryRow>,
    /// Seeds whose cell failed, with the error message.
    pub failures: Vec<(u64, String)>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// The summary table as CSV text.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("seed,episodes,trajectories,certified_bound,exact_cce_gap,exact_ce_gap,wall_ms\n");
    for r in rows {
        let rec = &r.record;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            rec.seed,
            rec.episodes,
            rec.trajectories,
            opt(rec.certified_bound),
            opt(rec.gaps.cce),
            opt(rec.gaps.ce),
            r.wall_ms
        );
    }
    out
}

#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, u128) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_millis())
}

#[cfg(target_arch = "wasm32")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, u128) {
    (f(), 0)
}

fn run_seeds(
    cfg: &ExperimentConfig,
    built: &BuiltEnv,
    seeds: &[u64],
    threads: Option<usize>,
) -> Result<Vec<(u64, Result<CellResult>, u128)>> {
    let cell = |&seed: &u64| {
        let (res, ms) = timed(|| run_cell(cfg, built, seed));
        (seed, res, ms)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
                Ok(pool.install(|| seeds.par_iter().map(cell).collect()))
            }
            None => Ok(seeds.par_iter().map(cell).collect()),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        if threads.is_some_and(|n| n == 0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        Ok(seeds.iter().map(cell).collect())
    }
}

/// Runs every seed of a config and writes per-cell record streams, policy
/// documents and `summary.csv` into the output directory. Failed cells get
/// an error record in their stream; the call then returns an error naming
/// them after all other artifacts are written.
pub fn run_experiment(mut cfg: ExperimentConfig, overrides: &RunOverrides) -> Result<RunSummary> {
    if let Some(seed) = overrides.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(exact) = overrides.exact_eval {
        cfg.evaluation.exact = exact;
    }
    let output = overrides
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config("no output directory given".into()))?;
    let built = cfg.validate()?;
    std::fs::create_dir_all(&output)?;
    let results = run_seeds(&cfg, &built, &cfg.seeds, overrides.threads)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (seed, res, wall_ms) in results {
        let stream_path = output.join(cell_name(cfg.algorithm, seed, "ndjson"));
        match res {
            Ok(cell) => {
                std::fs::write(&stream_path, &cell.stream)?;
                cell.policy.save(output.join(&cell.record.policy_file))?;
                rows.push(SummaryRow { record: cell.record, wall_ms });
            }
            Err(e) => {
                let line = json!({"kind": "error", "seed": seed, "message": e.to_string()});
                std::fs::write(&stream_path, format!("{line}\n"))?;
                failures.push((seed, e.to_string()));
            }
        }
    }
    let mut csv = summary_csv(&rows);
    if !failures.is_empty() {
        csv.push_str(&format!("# partial: {} cell(s) failed\n", failures.len()));
    }
    std::fs::write(output.join("summary.csv"), csv)?;
    if !failures.is_empty() {
        let list: Vec<String> = failures.iter().map(|(s, m)| format!("seed {s}: {m}")).collect();
        return Err(Error::Config(format!("{} cell(s) failed: {}", failures.len(), list.join("; "))));
    }
    Ok(RunSummary { output, rows, failures })
}

/// Per-player values of a policy and of the best deviations, with the gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy_values: Vec<f64>,
    pub best_response_values: Vec<f64>,
    pub modification_values: Vec<f64>,
    pub gaps: Gaps,
}

pub fn evaluate_policy(game: &TabularMarkovGame, policy: &MixtureMarkovPolicy) -> Result<EvalReport> {
    policy.check_compatible(game)?;
    let s1 = game.initial_state();
    let m = game.num_players();
    let policy_values = evaluate_value(game, policy)?.initial(s1);
    let best_response_values =
        (0..m).map(|i| best_response_value(game, policy, i).map(|(v, _)| v.get(0, s1))).collect::<Result<_>>()?;
    let modification_values =
        (0..m).map(|i| best_modification_value(game, policy, i).map(|(v, _)| v.get(0, s1))).collect::<Result<_>>()?;
    Ok(EvalReport { policy_values, best_response_values, modification_values, gaps: Gaps::exact(game, policy)? })
}

/// Loads a game document and a policy document and evaluates them.
pub fn evaluate_files(game: impl AsRef<Path>, policy: impl AsRef<Path>) -> Result<EvalReport> {
    let game = TabularMarkovGame::load(game)?;
    let policy = MixtureMarkovPolicy::load(policy)?;
    evaluate_policy(&game, &policy)
}
