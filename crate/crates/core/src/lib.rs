//! Guidance, navigation and control simulator for a miniature underactuated
//! AUV, with two quaternion unscented Kalman filters (strapdown-inertial and
//! hydrodynamic-model prediction) and Bayesian-optimization / PSO tuning of
//! their noise covariances.

pub mod frames;
pub mod gnc;
pub mod harness;
pub mod nav;
pub mod par;
pub mod plant;
pub mod rng;
pub mod sensors;
mod serde_mat;
pub mod tune;

/// Local gravity magnitude, m/s^2.
pub const GRAVITY: f64 = 9.81;
