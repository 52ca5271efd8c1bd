use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Mode, OutageSpec, ScenarioConfig, Seeds};
use super::episode::{record_truth, replay_filter, run_episode, TruthRecording};
use super::metrics::RunMetrics;
use super::trajectory::TrajectoryKind;
use super::HarnessError;
use crate::nav::{FilterKind, TuningVector};
use crate::par::{map_indexed, Execution};
use crate::rng::derive;
use crate::tune::{Outcome, Problem, G_MAX_DEG};

/// USBL outage applied in every tuning episode, s.
pub const TUNING_OUTAGE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEval {
    pub trajectory: TrajectoryKind,
    pub metrics: RunMetrics,
}

/// Objective `j` (m), RMS Euler error `g` (deg) and crash flag of one
/// candidate. `j` and `g` are absent for a crash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub j: Option<f64>,
    pub g: Option<f64>,
    pub crashed: bool,
    pub per_trajectory: Vec<TrajectoryEval>,
}

impl EvalResult {
    fn aggregate(mode: Mode, per_trajectory: Vec<TrajectoryEval>) -> Self {
        let failed = per_trajectory.iter().any(|t| {
            let m = &t.metrics;
            m.crash || !m.goal_reached || !m.rms_pos_err.is_finite() || !m.rms_euler_err.is_finite() || !m.max_tracking_err.is_finite()
        });
        if failed {
            return Self { j: None, g: None, crashed: true, per_trajectory };
        }
        let n = per_trajectory.len() as f64;
        let j = per_trajectory
            .iter()
            .map(|t| match mode {
                Mode::Ol => t.metrics.rms_pos_err,
                Mode::Cl => t.metrics.max_tracking_err,
            })
            .sum::<f64>()
            / n;
        let g = (per_trajectory.iter().map(|t| t.metrics.rms_euler_err.powi(2)).sum::<f64>() / n).sqrt();
        Self { j: Some(j), g: Some(g), crashed: false, per_trajectory }
    }

    pub fn outcome(&self) -> Outcome {
        match (self.crashed, self.j, self.g) {
            (false, Some(j), Some(g)) => Outcome::constrained(j, g),
            _ => Outcome::crash(),
        }
    }
}

/// The three tuning episodes: spiral, zigzag and lawnmower, each with its
/// own seed derived from `seed` and a single USBL outage.
pub fn tuning_scenarios(base: &ScenarioConfig, filter: FilterKind, mode: Mode, seed: u64) -> Vec<ScenarioConfig> {
    TrajectoryKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut c = base.clone();
            c.trajectory = kind;
            c.filter = filter;
            c.mode = mode;
            c.seeds = Seeds::from_base(derive(seed, i as u64));
            c.outages = vec![OutageSpec::with_duration(TUNING_OUTAGE)];
            c.record = false;
            c
        })
        .collect()
}

fn episode_metrics(r: Result<super::EpisodeOutput, HarnessError>) -> RunMetrics {
    r.map(|o| o.metrics).unwrap_or_else(|_| RunMetrics::crashed(0.0, 0.0))
}

/// Runs the scenario set with tuning vector `a`, without caching.
pub fn evaluate_candidate(a: &TuningVector, scenarios: &[ScenarioConfig], exec: Execution) -> EvalResult {
    let mode = scenarios.first().map_or(Mode::Ol, |c| c.mode);
    let per = map_indexed(scenarios.len(), exec, |i| {
        let mut c = scenarios[i].clone();
        c.tuning = *a;
        TrajectoryEval { trajectory: c.trajectory, metrics: episode_metrics(run_episode(&c)) }
    });
    EvalResult::aggregate(mode, per)
}

/// Tuning objective over a fixed scenario set. Open-loop truth recordings
/// do not depend on the tuning vector and are computed once.
pub struct CandidateEvaluator {
    pub scenarios: Vec<ScenarioConfig>,
    pub mode: Mode,
    pub exec: Execution,
    recordings: Option<Vec<Result<TruthRecording, String>>>,
}

impl CandidateEvaluator {
    pub fn new(base: &ScenarioConfig, filter: FilterKind, mode: Mode, seed: u64, exec: Execution) -> Self {
        Self::from_scenarios(tuning_scenarios(base, filter, mode, seed), exec)
    }

    pub fn from_scenarios(scenarios: Vec<ScenarioConfig>, exec: Execution) -> Self {
        let mode = scenarios.first().map_or(Mode::Ol, |c| c.mode);
        assert!(scenarios.iter().all(|c| c.mode == mode), "mixed modes in scenario set");
        let recordings = (mode == Mode::Ol)
            .then(|| map_indexed(scenarios.len(), exec, |i| record_truth(&scenarios[i]).map_err(|e| e.to_string())));
        Self { scenarios, mode, exec, recordings }
    }

    pub fn evaluate(&self, a: &TuningVector) -> EvalResult {
        let Some(recs) = &self.recordings else {
            return evaluate_candidate(a, &self.scenarios, self.exec);
        };
        let per = map_indexed(self.scenarios.len(), self.exec, |i| {
            let mut c = self.scenarios[i].clone();
            c.tuning = *a;
            let metrics = match &recs[i] {
                Ok(rec) => episode_metrics(replay_filter(&c, rec, Instant::now())),
                Err(_) => RunMetrics::crashed(0.0, 0.0),
            };
            TrajectoryEval { trajectory: c.trajectory, metrics }
        });
        EvalResult::aggregate(self.mode, per)
    }
}

impl Problem for CandidateEvaluator {
    fn lower(&self) -> Vec<f64> {
        vec![TuningVector::LOWER; 5]
    }
    fn upper(&self) -> Vec<f64> {
        vec![TuningVector::UPPER; 5]
    }
    /// The Euler-angle constraint applies to open-loop tuning only.
    fn g_max(&self) -> Option<f64> {
        (self.mode == Mode::Ol).then_some(G_MAX_DEG)
    }
    fn evaluate(&self, x: &[f64]) -> Outcome {
        CandidateEvaluator::evaluate(self, &TuningVector::from_slice(x)).outcome()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    #[test]
    fn identity_multipliers_reproduce_nominal() {
        for (filter, mode) in [(FilterKind::Sins, Mode::Ol), (FilterKind::Hmm, Mode::Cl)] {
            let scen = tuning_scenarios(&base(), filter, mode, 11);
            let ev = CandidateEvaluator::from_scenarios(scen.clone(), Execution::Sequential);
            let tuned = ev.evaluate(&TuningVector::from_slice(&[0.0; 5]));
            let nominal: Vec<RunMetrics> = scen.iter().map(|c| run_episode(c).unwrap().metrics).collect();
            for (t, n) in tuned.per_trajectory.iter().zip(&nominal) {
                assert_eq!(t.metrics.rms_pos_err.to_bits(), n.rms_pos_err.to_bits());
                assert_eq!(t.metrics.rms_euler_err.to_bits(), n.rms_euler_err.to_bits());
                assert_eq!(t.metrics.max_tracking_err.to_bits(), n.max_tracking_err.to_bits());
            }
            let twice = ev.evaluate(&TuningVector::nominal());
            assert_eq!(serde_json::to_string(&tuned).unwrap(), serde_json::to_string(&twice).unwrap());
        }
    }

    #[test]
    fn crash_nullifies_objective() {
        let mut m = RunMetrics::crashed(1.0, 0.0);
        m.crash = true;
        let r = EvalResult::aggregate(Mode::Ol, vec![TrajectoryEval { trajectory: TrajectoryKind::Spiral, metrics: m }]);
        assert!(r.crashed && r.j.is_none() && r.g.is_none());
        assert!(r.outcome().crashed);
    }

    #[test]
    fn pathological_multipliers_crash() {
        // Large process noise with an overconfident attitude aid (SINS) and
        // uniformly tiny covariances (HMM) both miss the goal.
        for (filter, a) in [(FilterKind::Sins, [3.0, 3.0, 3.0, 3.0, -3.0]), (FilterKind::Hmm, [-3.0; 5])] {
            let scen = tuning_scenarios(&base(), filter, Mode::Cl, 11);
            let r = evaluate_candidate(&TuningVector::from_slice(&a), &scen, Execution::Parallel);
            assert!(r.crashed, "{filter:?}");
            assert!(r.per_trajectory.iter().any(|t| t.metrics.crash || !t.metrics.goal_reached));
        }
    }
}
