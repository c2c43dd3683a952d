use std::path::Path;
use std::process::{Command, Output};

use mg_equilib::envs::{dominant_cooperative, matching_pennies, random_game, RewardStructure};
use mg_equilib::game::{MixtureMarkovPolicy, ProductLayer};
use mg_equilib::harness::{evaluate_policy, EvalReport};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mg-equilib")).args(args).env_remove("MG_EQUILIB_THREADS").output().unwrap()
}

fn write_config(dir: &Path, seeds: &str) -> String {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{"env": {{"family": "random", "states": 2, "actions": [2, 2], "horizon": 2, "seed": 4}},
            "algorithm": "prebo", "epsilon": 0.25, "delta": 0.1, "seeds": {seeds}, "output": "out",
            "prebo": {{"beta_scale": 0.01, "regret_scale": 0.05}}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn empty_seed_list_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--config", &write_config(dir.path(), "[]")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed list is empty"));
}

#[test]
fn missing_config_exits_nonzero() {
    let out = cli(&["run", "--config", "/nonexistent/config.json"]);
    assert!(!out.status.success());
}

#[test]
fn run_writes_artifacts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[1, 2, 3]");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(cli(&["run", "--config", &config, "--out", a.to_str().unwrap()]).status.success());
    assert!(cli(&["run", "--config", &config, "--out", b.to_str().unwrap(), "--threads", "2"]).status.success());
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), "seed,episodes,trajectories,certified_bound,exact_cce_gap,exact_ce_gap,wall_ms");
    assert_eq!(lines.count(), 3);
    for seed in 1..=3 {
        let name = format!("prebo-seed{seed}.ndjson");
        let sa = std::fs::read(a.join(&name)).unwrap();
        assert_eq!(sa, std::fs::read(b.join(&name)).unwrap());
        let last = String::from_utf8(sa).unwrap().lines().last().unwrap().to_string();
        let record: serde_json::Value = serde_json::from_str(&last).unwrap();
        assert_eq!(record["kind"], "final");
        let policy = format!("prebo-seed{seed}.policy.json");
        assert_eq!(std::fs::read(a.join(&policy)).unwrap(), std::fs::read(b.join(&policy)).unwrap());
    }
}

#[test]
fn seed_flag_and_relative_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[1, 2, 3]");
    let out = Command::new(env!("CARGO_BIN_EXE_mg-equilib"))
        .args(["run", "--config", &config, "--seed", "9", "--exact-eval=false"])
        .env("MG_EQUILIB_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("9,"));
    // Exact evaluation is off, so both gap columns are empty.
    let cols: Vec<&str> = rows[0].split(',').collect();
    assert_eq!((cols[4], cols[5]), ("", ""));
}

fn eval(game: &Path, policy: &Path) -> EvalReport {
    let out = cli(&["eval", game.to_str().unwrap(), policy.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn eval_uniform_matching_pennies_has_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let game = matching_pennies();
    let (g, p) = (dir.path().join("game.json"), dir.path().join("policy.json"));
    game.save(&g).unwrap();
    MixtureMarkovPolicy::uniform_for(&game).save(&p).unwrap();
    let report = eval(&g, &p);
    assert_eq!(report.gaps.cce, Some(0.0));
    assert_eq!(report.gaps.ce, Some(0.0));
    assert_eq!(report.gaps.nash, Some(0.0));
}

#[test]
fn eval_dominant_policy_has_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let game = dominant_cooperative(&[3, 2], &[2, 1]);
    let policy =
        MixtureMarkovPolicy::deterministic(game.horizon(), game.num_states(), game.action_counts(), |_, _, i| {
            [2, 1][i]
        })
        .unwrap();
    let (g, p) = (dir.path().join("game.json"), dir.path().join("policy.json"));
    game.save(&g).unwrap();
    policy.save(&p).unwrap();
    let report = eval(&g, &p);
    assert_eq!(report.gaps.nash.unwrap().abs(), 0.0);
    assert_eq!(report.gaps.ce.unwrap().abs(), 0.0);
}

#[test]
fn eval_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let game = random_game(11, 3, &[2, 3], 2, RewardStructure::General).unwrap();
    let policy = MixtureMarkovPolicy::from_layers(game.horizon(), game.num_states(), game.action_counts(), |h, s| {
        ProductLayer {
            dists: vec![vec![0.3, 0.7], if (h + s) % 2 == 0 { vec![0.2, 0.5, 0.3] } else { vec![1.0, 0.0, 0.0] }],
        }
    })
    .unwrap();
    let (g, p) = (dir.path().join("game.json"), dir.path().join("policy.json"));
    game.save(&g).unwrap();
    policy.save(&p).unwrap();
    let direct = evaluate_policy(&game, &policy).unwrap();
    assert_eq!(eval(&g, &p), direct);
}

#[test]
fn eval_shape_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let game = matching_pennies();
    let other = random_game(1, 2, &[3, 3], 2, RewardStructure::General).unwrap();
    let (g, p) = (dir.path().join("game.json"), dir.path().join("policy.json"));
    game.save(&g).unwrap();
    MixtureMarkovPolicy::uniform_for(&other).save(&p).unwrap();
    assert!(!cli(&["eval", g.to_str().unwrap(), p.to_str().unwrap()]).status.success());
}

#[test]
fn oracle_check_hedge_passes_and_unknown_suite_fails() {
    let out = cli(&["oracle-check", "hedge", "--seeds", "1,2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    let out = cli(&["oracle-check", "nonsense"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn gen_env_writes_loadable_games() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let p = path.to_str().unwrap();
    assert!(cli(&["gen-env", "random", "--out", p, "--states", "4", "--actions", "2,3", "--seed", "5"])
        .status
        .success());
    let game = mg_equilib::game::TabularMarkovGame::load(&path).unwrap();
    assert_eq!(game, random_game(5, 4, &[2, 3], 2, RewardStructure::General).unwrap());
    assert!(cli(&["gen-env", "congestion", "--out", p, "--players", "3", "--facilities", "2"]).status.success());
    assert_eq!(mg_equilib::game::TabularMarkovGame::load(&path).unwrap().num_players(), 3);
}

#[test]
fn shipped_configs_run() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        let dir = tempfile::tempdir().unwrap();
        let out =
            cli(&["run", "--config", path.to_str().unwrap(), "--seed", "0", "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        count += 1;
    }
    assert_eq!(count, 3);
}
