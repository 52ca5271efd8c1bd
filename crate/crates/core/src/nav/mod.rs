//! Unscented navigation filters with strapdown and hydrodynamic prediction.

mod config;
mod filter;
mod mahony;
mod state;
mod ukf;

pub use config::{FilterKind, InitialStd, NoiseConfig, TuningVector};
pub use filter::{run_filter, EpisodeStreams, FilterOptions, HmmFilter, NavEstimate, NavFilter, SensorStep, SinsFilter};
pub use mahony::{mahony_step, MahonyParams, MahonyState};
pub use state::{
    ahrs_meas_model, depth_meas_model, hmm_euler_step, hmm_process_rhs, mag_meas_model, sins_euler_step, sins_process_rhs,
    usbl_meas_model, HmmDerivative, NavStateHmm, NavStateSins, SinsDerivative, HMM_DIM, SINS_DIM,
};
pub use ukf::{chi2_999, manifold_mean, Manifold, SigmaPointParams, Ukf, UpdateInfo};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NavError {
    #[error("covariance is not positive definite")]
    CholeskyFailure,
    #[error("non-finite filter state")]
    NonFinite,
    #[error("USBL fix is not valid")]
    InvalidFix,
    #[error("attitude at gimbal lock")]
    GimbalLock,
    #[error("position error {0} m exceeds the divergence limit")]
    Diverged(f64),
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
}
