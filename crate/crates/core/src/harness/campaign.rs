use serde::{Deserialize, Serialize};

use super::config::{OutageSpec, ScenarioConfig, Seeds};
use super::metrics::RunMetrics;
use super::trajectory::TrajectoryKind;
use super::{run_episode, HarnessError};
use crate::par::{map_indexed, Execution};
use crate::rng::derive;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let x = p * (v.len() - 1) as f64;
            let (i, f) = (x.floor() as usize, x.fract());
            if i + 1 < v.len() {
                v[i] * (1.0 - f) + v[i + 1] * f
            } else {
                v[i]
            }
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRun {
    pub index: usize,
    pub trajectory: TrajectoryKind,
    pub outage: f64,
    pub seeds: Seeds,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub runs: Vec<CampaignRun>,
    pub goals_reached: usize,
    /// Over runs that reached the goal.
    pub tracking: Option<Quantiles>,
    pub position: Option<Quantiles>,
}

impl CampaignResult {
    pub fn from_runs(runs: Vec<CampaignRun>) -> Self {
        let reached: Vec<&CampaignRun> = runs.iter().filter(|r| r.metrics.goal_reached).collect();
        let tracking = Quantiles::of(&reached.iter().map(|r| r.metrics.max_tracking_err).collect::<Vec<_>>());
        let position = Quantiles::of(&reached.iter().map(|r| r.metrics.rms_pos_err).collect::<Vec<_>>());
        Self {
            goals_reached: reached.len(),
            tracking,
            position,
            runs,
        }
    }
}

/// Configuration of run `index`: trajectories vary fastest, then outage
/// durations, then seeds.
pub fn campaign_config(
    base: &ScenarioConfig,
    index: usize,
    seed: u64,
    trajectories: &[TrajectoryKind],
    outages: &[f64],
) -> ScenarioConfig {
    let nt = trajectories.len().max(1);
    let no = outages.len().max(1);
    let mut cfg = base.clone();
    if let Some(t) = trajectories.get(index % nt) {
        cfg.trajectory = *t;
    }
    if let Some(d) = outages.get((index / nt) % no) {
        cfg.outages = vec![OutageSpec::with_duration(*d)];
    }
    cfg.seeds = Seeds::from_base(derive(seed, (index / (nt * no)) as u64));
    cfg.record = false;
    cfg
}

/// Runs `n_runs` episodes in parallel; the result is ordered by run index.
pub fn run_campaign(
    base: &ScenarioConfig,
    n_runs: usize,
    seed: u64,
    trajectories: &[TrajectoryKind],
    outages: &[f64],
    exec: Execution,
) -> Result<CampaignResult, HarnessError> {
    if n_runs == 0 {
        return Err(HarnessError::Config("a campaign needs at least one run".into()));
    }
    let results = map_indexed(n_runs, exec, |i| {
        let cfg = campaign_config(base, i, seed, trajectories, outages);
        run_episode(&cfg).map(|out| CampaignRun {
            index: i,
            trajectory: cfg.trajectory,
            outage: cfg.outages.first().map(|o| o.duration).unwrap_or(0.0),
            seeds: cfg.seeds,
            metrics: out.metrics,
        })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(CampaignResult::from_runs(runs))
}
