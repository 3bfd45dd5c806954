use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::run::{read_metrics, MetricsRow, ECHO_FILE, METRICS_FILE};
use super::svg::{Chart, Series};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: [&str; 10] = [
    "run",
    "env",
    "policy",
    "seed",
    "theta_bar",
    "episodes",
    "first_mean_reward",
    "last_mean_reward",
    "max_violation",
    "total_fallbacks",
];

/// One completed run: its resolved configuration and per-episode metrics.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub name: String,
    pub config: ExperimentConfig,
    pub metrics: Vec<MetricsRow>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self> {
        let metrics = read_metrics(&dir.join(METRICS_FILE))?;
        let echo = dir.join(ECHO_FILE);
        let text = fs::read_to_string(&echo).map_err(|_| Error::MissingRun(echo.display().to_string()))?;
        let mut config = ExperimentConfig::default();
        config.apply_text(&text)?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        Ok(Self {
            name,
            config,
            metrics,
        })
    }

    /// Upper bound on the constraint metric for this run's environment.
    pub fn violation_bound(&self) -> f64 {
        if self.config.env == "hovercraft" {
            self.config.env_params.theta_bar
        } else {
            1.0
        }
    }
}

/// Number of episodes in a 10% window: `ceil(n / 10)`, at least one.
pub fn window_len(n: usize) -> usize {
    n.div_ceil(10).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub run: String,
    pub env: String,
    pub policy: String,
    pub seed: u64,
    pub theta_bar: f64,
    pub episodes: usize,
    pub first_mean_reward: f64,
    pub last_mean_reward: f64,
    pub max_violation: f64,
    pub total_fallbacks: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn summarize(run: &RunRecord) -> SummaryRow {
    let m = &run.metrics;
    let k = window_len(m.len()).min(m.len());
    SummaryRow {
        run: run.name.clone(),
        env: run.config.env.clone(),
        policy: run.config.policy.clone(),
        seed: run.config.seed,
        theta_bar: run.config.env_params.theta_bar,
        episodes: m.len(),
        first_mean_reward: mean(m[..k].iter().map(|r| r.accumulated_reward)),
        last_mean_reward: mean(m[m.len() - k..].iter().map(|r| r.accumulated_reward)),
        max_violation: m.iter().map(|r| r.max_violation).fold(0.0, f64::max),
        total_fallbacks: m.iter().map(|r| r.fallback_count).sum(),
    }
}

/// Loads every run, writes `summary.csv` plus a reward and a violation chart
/// per environment into `out`, and returns the summary rows.
pub fn compare(run_dirs: &[PathBuf], out: &Path) -> Result<Vec<SummaryRow>> {
    if run_dirs.is_empty() {
        return Err(Error::Config("compare needs at least one run directory".into()));
    }
    let runs = run_dirs
        .iter()
        .map(|d| RunRecord::load(d))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out)?;
    let rows: Vec<SummaryRow> = runs.iter().map(summarize).collect();
    write_summary(&out.join(SUMMARY_FILE), &rows)?;

    let mut envs: Vec<&str> = runs.iter().map(|r| r.config.env.as_str()).collect();
    envs.sort_unstable();
    envs.dedup();
    for env in envs {
        let group: Vec<&RunRecord> = runs.iter().filter(|r| r.config.env == env).collect();
        let series = |f: fn(&MetricsRow) -> f64| -> Vec<Series> {
            group
                .iter()
                .map(|r| Series {
                    label: format!("{} ({})", r.config.policy, r.name),
                    points: r.metrics.iter().map(|m| (m.episode as f64, f(m))).collect(),
                })
                .collect()
        };
        let reward = series(|m| m.accumulated_reward);
        fs::write(
            out.join(format!("{env}_reward.svg")),
            Chart {
                title: &format!("{env}: accumulated reward"),
                x_label: "episode",
                y_label: "accumulated reward",
                series: &reward,
                reference: None,
            }
            .render(),
        )?;
        let bound = group[0].violation_bound();
        let shared_bound = group.iter().all(|r| r.violation_bound() == bound);
        let violation = series(|m| m.max_violation);
        fs::write(
            out.join(format!("{env}_violation.svg")),
            Chart {
                title: &format!("{env}: max constraint metric"),
                x_label: "episode",
                y_label: "max constraint metric",
                series: &violation,
                reference: shared_bound.then_some((bound, "bound")),
            }
            .render(),
        )?;
    }
    Ok(rows)
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(SUMMARY_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.run.clone(),
            r.env.clone(),
            r.policy.clone(),
            r.seed.to_string(),
            r.theta_bar.to_string(),
            r.episodes.to_string(),
            r.first_mean_reward.to_string(),
            r.last_mean_reward.to_string(),
            r.max_violation.to_string(),
            r.total_fallbacks.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
