use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vertexnet::harness::{self, ExperimentConfig};
use vertexnet::{Error, Result};

#[derive(Parser)]
#[command(name = "vertexnet", version, about = "Safe reinforcement learning with vertex networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write metrics, config echo and checkpoint.
    Train {
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long = "theta-bar")]
        theta_bar: Option<f64>,
        /// `key = value` file applied before the flags above.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy rollout of a checkpoint; writes trajectory.csv.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize and plot completed runs.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "compare")]
        out: PathBuf,
    },
}

fn train_config(
    config: Option<PathBuf>,
    flags: [(&str, Option<String>); 5],
    overrides: &[String],
) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::from_file(&path)?,
        None => ExperimentConfig::default(),
    };
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            env,
            policy,
            seed,
            episodes,
            theta_bar,
            config,
            overrides,
            out,
        } => {
            let cfg = train_config(
                config,
                [
                    ("env", env),
                    ("policy", policy),
                    ("seed", seed.map(|v| v.to_string())),
                    ("episodes", episodes.map(|v| v.to_string())),
                    ("theta_bar", theta_bar.map(|v| v.to_string())),
                ],
                &overrides,
            )?;
            let out = out.unwrap_or_else(|| cfg.default_out());
            let report = harness::run_train(&cfg, &out)?;
            let worst = report.metrics.iter().map(|m| m.max_violation).fold(0.0, f64::max);
            let fallbacks: usize = report.metrics.iter().map(|m| m.fallback_count).sum();
            println!(
                "{}: {} episodes, max constraint metric {worst}, fallback steps {fallbacks}",
                out.display(),
                report.metrics.len()
            );
        }
        Command::Eval { checkpoint, out } => {
            let rows = harness::run_eval(&checkpoint, &out)?;
            let last = rows.last().expect("rollout has a terminal row");
            print!("{}: {} steps", out.display(), rows.len() - 1);
            if let Some(d) = last.target_sq_distance {
                print!(", final squared distance to target {d}");
            }
            println!();
        }
        Command::Compare { runs, out } => {
            let rows = harness::compare(&runs, &out)?;
            for r in rows {
                println!(
                    "{} {} {} seed={} first={} last={} max_violation={} fallbacks={}",
                    r.run,
                    r.env,
                    r.policy,
                    r.seed,
                    r.first_mean_reward,
                    r.last_mean_reward,
                    r.max_violation,
                    r.total_fallbacks
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
