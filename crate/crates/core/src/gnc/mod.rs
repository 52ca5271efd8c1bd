//! Path planning (Dubins curves with linear depth interpolation),
//! line-of-sight guidance with sideslip compensation, and integral-augmented
//! LQR control of the thrusters.

mod dubins;
mod guidance;
mod lqr;

pub use dubins::{dubins_shortest, dubins_word, DubinsPath, DubinsWord, Pose2};
pub use guidance::{
    depth_reference, los_yaw_reference, vertical_guidance, Guidance, GuidanceParams, GuidanceReference, Waypoint,
};
pub use lqr::{
    jacobians, linearize_discretize, lqr_synthesize, model_rhs, solve_dare, ControlInput, Controller, InputMatrix,
    LqrGains, LqrWeights, StateMatrix, Trim, NA, NU, NX,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{ActuatorParams, HydroModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GncError {
    #[error("trim is not an equilibrium (|f| = {0:.3e})")]
    NonEquilibrium(f64),
    #[error("Riccati iteration did not converge")]
    RiccatiDiverged,
}

/// Control-loop configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlParams {
    /// Guidance and control rate, Hz.
    pub rate_hz: f64,
    /// Planned constant surge speed, m/s.
    pub surge: f64,
    pub weights: LqrWeights,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            surge: 0.5,
            weights: LqrWeights::default(),
        }
    }
}

/// Designs the controller on the nominal model at the planned surge.
pub fn design_controller(model: &HydroModel, act: &ActuatorParams, params: &ControlParams) -> Result<Controller, GncError> {
    let dt = 1.0 / params.rate_hz;
    let trim = Trim::level_surge(model, act, params.surge);
    let (a, b) = linearize_discretize(model, act, &trim, dt)?;
    let p = model.params();
    let gains = lqr_synthesize(&a, &b, &params.weights, trim, dt, p.r_g.z * p.weight)?;
    Ok(Controller::new(gains, act.clone()))
}
