use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;

use super::config::ExperimentConfig;
use crate::ddpg::{greedy_rollout, EpisodeMetrics, TrajectoryStep, Trainer};
use crate::envs::{AffineEnv, EnvRegistry, SimRng};
use crate::error::{Error, Result};
use crate::nets::Mlp;
use crate::policies::{Policy, PolicyRegistry};

pub const METRICS_FILE: &str = "metrics.csv";
pub const ECHO_FILE: &str = "config.echo";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_HEADER: [&str; 5] = [
    "episode",
    "accumulated_reward",
    "max_violation",
    "fallback_count",
    "steps",
];

const CHECKPOINT_MAGIC: &str = "vertexnet-checkpoint 1";
const TRUNK_MARKER: &str = "[trunk]";

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn build_env(cfg: &ExperimentConfig) -> Result<AffineEnv> {
    EnvRegistry::default().build(&cfg.env, &cfg.env_params)
}

/// Appends one row per episode and flushes immediately, so an aborted run
/// keeps every completed episode on disk.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(csv_err)?;
        inner.write_record(METRICS_HEADER).map_err(csv_err)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn append(&mut self, m: &EpisodeMetrics) -> Result<()> {
        self.inner
            .write_record([
                m.episode.to_string(),
                m.accumulated_reward.to_string(),
                m.max_violation.to_string(),
                m.fallback_count.to_string(),
                m.steps.to_string(),
            ])
            .map_err(csv_err)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// The five persisted columns of an episode record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub accumulated_reward: f64,
    pub max_violation: f64,
    pub fallback_count: usize,
    pub steps: usize,
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    if !path.is_file() {
        return Err(Error::MissingRun(path.display().to_string()));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header != METRICS_HEADER {
        return Err(Error::Io(format!("{}: unexpected header", path.display())));
    }
    let bad = |what: &str| Error::Io(format!("{}: bad {what}", path.display()));
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(MetricsRow {
                episode: rec[0].parse().map_err(|_| bad("episode"))?,
                accumulated_reward: rec[1].parse().map_err(|_| bad("accumulated_reward"))?,
                max_violation: rec[2].parse().map_err(|_| bad("max_violation"))?,
                fallback_count: rec[3].parse().map_err(|_| bad("fallback_count"))?,
                steps: rec[4].parse().map_err(|_| bad("steps"))?,
            })
        })
        .collect()
}

pub struct TrainReport {
    pub metrics: Vec<EpisodeMetrics>,
    pub policy: Box<dyn Policy>,
}

/// Trains one agent, writing `config.echo`, `metrics.csv` and the final
/// checkpoint into `out`.
pub fn run_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join(ECHO_FILE), cfg.echo())?;
    let env = build_env(cfg)?;
    let mut trainer = Trainer::new(env, &cfg.policy, cfg.ddpg.clone(), cfg.seed)?;
    let mut writer = MetricsWriter::create(&out.join(METRICS_FILE))?;
    let mut metrics = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let m = trainer.run_episode()?;
        writer.append(&m)?;
        metrics.push(m);
    }
    let policy = trainer.into_policy();
    write_checkpoint(&out.join(CHECKPOINT_FILE), cfg, policy.as_ref())?;
    Ok(TrainReport { metrics, policy })
}

pub fn write_checkpoint(path: &Path, cfg: &ExperimentConfig, policy: &dyn Policy) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    w.write_all(cfg.echo().as_bytes())?;
    writeln!(w, "{TRUNK_MARKER}")?;
    policy.trunk().write_text(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Restores the configuration and the trained policy.
pub fn read_checkpoint(path: &Path) -> Result<(ExperimentConfig, Box<dyn Policy>)> {
    let file = File::open(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let next = |lines: &mut std::io::Lines<BufReader<File>>| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?
            .map_err(Error::from)
    };
    if next(&mut lines)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let mut cfg = ExperimentConfig::default();
    loop {
        let line = next(&mut lines)?;
        if line == TRUNK_MARKER {
            break;
        }
        cfg.apply_text(&line)?;
    }
    cfg.validate()?;
    let trunk = Mlp::read_text(&mut lines)?;
    let env = build_env(&cfg)?;
    let mut rng = SimRng::seed_from_u64(cfg.seed);
    let mut policy = PolicyRegistry::default().build(&cfg.policy, &env, &cfg.ddpg.hidden, &mut rng)?;
    policy
        .set_trunk(trunk)
        .map_err(|e| Error::Checkpoint(format!("trunk does not fit policy: {e}")))?;
    Ok((cfg, policy))
}

/// Greedy single-episode rollout of a checkpointed policy; writes
/// `trajectory.csv` and `config.echo` into `out`.
pub fn run_eval(checkpoint: &Path, out: &Path) -> Result<Vec<TrajectoryStep>> {
    let (cfg, policy) = read_checkpoint(checkpoint)?;
    let env = build_env(&cfg)?;
    let rows = greedy_rollout(&env, policy.as_ref(), cfg.seed)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(ECHO_FILE), cfg.echo())?;
    write_trajectory(&out.join(TRAJECTORY_FILE), &env, &rows)?;
    Ok(rows)
}

pub fn write_trajectory(path: &Path, env: &AffineEnv, rows: &[TrajectoryStep]) -> Result<()> {
    let with_target = rows.first().is_some_and(|r| r.target_sq_distance.is_some());
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(env.system().state_labels().iter().map(|s| s.to_string()));
    header.extend((1..=env.action_dim()).map(|k| format!("u{k}")));
    header.extend(["reward", "constraint_metric", "fallback_used"].map(String::from));
    if with_target {
        header.push("sq_dist_target".into());
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec: Vec<String> = vec![r.t.to_string()];
        rec.extend(r.state.iter().map(f64::to_string));
        if r.action.is_empty() {
            rec.extend((0..env.action_dim()).map(|_| String::new()));
        } else {
            rec.extend(r.action.iter().map(f64::to_string));
        }
        rec.push(r.reward.to_string());
        rec.push(r.constraint_metric.to_string());
        rec.push(u8::from(r.fallback_used).to_string());
        if with_target {
            rec.push(r.target_sq_distance.map_or_else(String::new, |d| d.to_string()));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
