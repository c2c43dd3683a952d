use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mg_equilib::envs::RewardStructure;
use mg_equilib::harness::{
    evaluate_files, gen_env, oracle_check, run_experiment, EnvSpec, ExperimentConfig, RunOverrides, Suite,
};

#[derive(Parser)]
#[command(name = "mg-equilib", version, about = "Equilibrium learning in multi-player Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config's.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "MG_EQUILIB_THREADS")]
        threads: Option<usize>,
        /// Compute exact gaps of the output policy (default from the config).
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        exact_eval: Option<bool>,
    },
    /// Print values, deviation values and gaps of a policy in a game.
    Eval { game: PathBuf, policy: PathBuf },
    /// Run an empirical oracle suite and report cases against thresholds.
    OracleCheck {
        /// hedge, swap, bandit, bandit-swap or regression.
        suite: String,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        /// Print every case, not just the summary.
        #[arg(long)]
        verbose: bool,
    },
    /// Write a generated game document.
    GenEnv {
        kind: EnvKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        states: usize,
        /// Comma-separated action counts, one per player.
        #[arg(long, value_delimiter = ',', default_value = "2,2")]
        actions: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = Structure::General)]
        structure: Structure,
        #[arg(long, default_value_t = 2)]
        players: usize,
        #[arg(long, default_value_t = 2)]
        facilities: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Random,
    Congestion,
    CongestionPreset,
    MatchingPennies,
}

#[derive(Clone, Copy, ValueEnum)]
enum Structure {
    General,
    Cooperative,
    ZeroSum,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out, threads, exact_eval } => {
            if threads == Some(0) {
                bail!("--threads must be positive");
            }
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let summary = run_experiment(cfg, &RunOverrides { seed, out, threads, exact_eval })?;
            for row in &summary.rows {
                let r = &row.record;
                println!(
                    "seed {}: {} episodes, {} trajectories, certified bound {}, {} ms",
                    r.seed,
                    r.episodes,
                    r.trajectories,
                    r.certified_bound.map_or("-".to_string(), |b| format!("{b:.4}")),
                    row.wall_ms
                );
            }
            println!("artifacts in {}", summary.output.display());
        }
        Command::Eval { game, policy } => {
            let report = evaluate_files(&game, &policy)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::OracleCheck { suite, seeds, verbose } => {
            let suite: Suite = suite.parse()?;
            let report = oracle_check(suite, &seeds)?;
            if verbose {
                for c in &report.cases {
                    println!(
                        "{} {}: {:.6} <= {:.6}",
                        if c.passed { "ok  " } else { "FAIL" },
                        c.name,
                        c.value,
                        c.threshold
                    );
                }
            }
            let worst = report.cases.iter().map(|c| c.value / c.threshold).fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{:?}: pass rate {:.3} (required {:.2}) over {} cases, worst value/threshold {worst:.3}: {}",
                report.suite,
                report.pass_rate,
                report.required_rate,
                report.cases.len(),
                if report.passed { "PASS" } else { "FAIL" }
            );
            if !report.passed {
                bail!("suite {suite:?} failed");
            }
        }
        Command::GenEnv { kind, out, seed, states, actions, horizon, structure, players, facilities } => {
            let spec = match kind {
                EnvKind::Random => EnvSpec::Random {
                    states,
                    actions,
                    horizon,
                    structure: match structure {
                        Structure::General => RewardStructure::General,
                        Structure::Cooperative => RewardStructure::Cooperative,
                        Structure::ZeroSum => RewardStructure::ZeroSum,
                    },
                    seed,
                },
                EnvKind::Congestion => EnvSpec::Congestion { players, facilities, seed },
                EnvKind::CongestionPreset => EnvSpec::CongestionPreset,
                EnvKind::MatchingPennies => EnvSpec::MatchingPennies,
            };
            gen_env(&spec, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
