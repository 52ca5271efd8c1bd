//! Scenario configuration, episode co-simulation, metrics and Monte Carlo
//! campaigns.

mod campaign;
mod config;
mod episode;
mod metrics;
mod output;
mod trajectory;
mod tuning;

pub use campaign::{run_campaign, CampaignResult, CampaignRun, Quantiles};
pub use config::{Mode, OutageSpec, ScenarioConfig, Seeds};
pub use episode::{record_truth, replay_filter, run_episode, ControlTick, EpisodeOutput, TimeRow, TruthRecording};
pub use metrics::{max_tracking_error, point_segment_distance, rms_euler_error, rms_position_error, PathIndex, RunMetrics};
pub use output::{
    read_series_csv, tuning_fragment, write_allan_csv, write_benchmark_csv, write_campaign_csv, write_campaign_summary_json,
    write_history_csv, write_metrics_json, write_timeseries_csv, OUTPUT_VERSION,
};
pub use tuning::{evaluate_candidate, tuning_scenarios, CandidateEvaluator, EvalResult, TrajectoryEval, TUNING_OUTAGE};
pub use trajectory::{
    build_trajectory, polyline_length, LawnmowerParams, SpiralParams, TrajectoryKind, TrajectoryParams, ZigzagParams,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plant(#[from] crate::plant::PlantError),
    #[error(transparent)]
    Gnc(#[from] crate::gnc::GncError),
    #[error(transparent)]
    Nav(#[from] crate::nav::NavError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
