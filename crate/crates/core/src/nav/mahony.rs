use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::frames::UnitQuaternion;
use crate::sensors::{ImuSample, MagSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MahonyParams {
    pub k_p: f64,
    pub k_i: f64,
    /// Accelerometer weight.
    pub k1: f64,
    /// Magnetometer weight.
    pub k2: f64,
}

impl Default for MahonyParams {
    fn default() -> Self {
        Self {
            k_p: 55.7037,
            k_i: 48.3934,
            k1: 0.4828,
            k2: 0.0749,
        }
    }
}

/// Attitude and gyro-bias integrator of the complementary filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MahonyState {
    pub q: UnitQuaternion,
    pub bias: Vector3<f64>,
}

impl MahonyState {
    pub fn new(q: UnitQuaternion) -> Self {
        Self {
            q,
            bias: Vector3::zeros(),
        }
    }
}

fn unit_or_zero(v: &Vector3<f64>) -> Vector3<f64> {
    let n = v.norm();
    if n > 1e-12 {
        v / n
    } else {
        Vector3::zeros()
    }
}

/// One explicit Euler step. `field_n` is the reference magnetic field in
/// NED; `mag = None` skips the magnetometer term.
pub fn mahony_step(
    state: &MahonyState,
    imu: &ImuSample,
    mag: Option<&MagSample>,
    field_n: &Vector3<f64>,
    params: &MahonyParams,
    dt: f64,
) -> MahonyState {
    let q = state.q;
    let a_hat = unit_or_zero(&imu.f_ib_b);
    let v_acc = q.inverse_rotate(&-Vector3::z());
    let mut e = params.k1 * a_hat.cross(&v_acc);
    if let Some(m) = mag {
        let m_hat = unit_or_zero(&m.m_b);
        let v_mag = q.inverse_rotate(&unit_or_zero(field_n));
        e += params.k2 * m_hat.cross(&v_mag);
    }
    let bias = state.bias - params.k_i * e * dt;
    let w = imu.omega_ib_b - bias + params.k_p * e;
    let q = UnitQuaternion::from_vector(&(q.as_vector() + q.kinematics_rhs(&w) * dt)).normalized();
    MahonyState { q, bias }
}
