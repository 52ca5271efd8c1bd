//! Stochastic sensor emulators fed by ground truth, and Allan-variance tools
//! for identifying their Gauss-Markov error parameters.

mod allan;
mod gauss_markov;
mod usbl;

pub use allan::{allan_deviation, allan_variance_model, fit_gm_params, AllanPoint};
pub use gauss_markov::{gm_error_step, GmErrorParams, GmErrorState};
pub use usbl::{simulate_usbl, OutageWindow, UsblFix, UsblParams};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::UnitQuaternion;
use crate::rng::{normal, Rng};
use crate::GRAVITY;

/// Pressure gain, Pa per metre of water.
pub const K_P: f64 = 9806.38;
/// Atmospheric pressure, Pa.
pub const P_0: f64 = 101325.0;
/// Full-scale range of the pressure sensor, Pa (500 dbar).
pub const P_FULL_SCALE: f64 = 500.0 * 1e4;

pub const IMU_RATE_HZ: f64 = 100.0;
pub const MAG_RATE_HZ: f64 = 100.0;
pub const DEPTH_RATE_HZ: f64 = 2.0;
pub const USBL_RATE_HZ: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("series has {0} samples, at least 1000 are required")]
    TooShort(usize),
    #[error("Allan curve must span at least two decades of tau")]
    NarrowCurve,
    #[error("Gauss-Markov fit residual {0:.3} exceeds threshold")]
    FitFailed(f64),
    #[error("USBL geometry is degenerate (condition number {0:.3e})")]
    DegenerateGeometry(f64),
    #[error("USBL range {0:.3} m is below the 0.5 m minimum")]
    TooClose(f64),
}

pub(crate) fn quantize(x: f64, step: f64) -> f64 {
    if step > 0.0 {
        (x / step).round() * step
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Specific force, m/s^2.
    pub f_ib_b: Vector3<f64>,
    /// Angular rate, rad/s.
    pub omega_ib_b: Vector3<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagSample {
    pub m_b: Vector3<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub p_abs: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuParams {
    pub accel: GmErrorParams,
    pub gyro: GmErrorParams,
}

impl Default for ImuParams {
    /// Tactical-grade magnitudes: accelerometer 0.07 m/s/sqrt(h) velocity
    /// random walk and 0.05 mg bias instability, gyroscope 0.15 deg/sqrt(h)
    /// angle random walk and 0.5 deg/h bias instability. Turn-on biases are
    /// 1 mg and 0.01 deg/s (1 sigma).
    fn default() -> Self {
        Self {
            accel: GmErrorParams {
                n: 0.07 / 60.0,
                b: 0.05e-3 * GRAVITY,
                k: 2e-5,
                corr_time: 100.0,
                turn_on_bias_std: 1e-3 * GRAVITY,
                quantization_step: 1e-5,
            },
            gyro: GmErrorParams {
                n: (0.15 / 60.0_f64).to_radians(),
                b: (0.5 / 3600.0_f64).to_radians(),
                k: 1e-7,
                corr_time: 100.0,
                turn_on_bias_std: 0.01_f64.to_radians(),
                quantization_step: 1e-6,
            },
        }
    }
}

impl ImuParams {
    pub fn noiseless() -> Self {
        Self {
            accel: GmErrorParams::zero(),
            gyro: GmErrorParams::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MagParams {
    pub errors: GmErrorParams,
    /// Local field in NED, gauss.
    pub field_n: Vector3<f64>,
}

impl Default for MagParams {
    fn default() -> Self {
        Self {
            errors: GmErrorParams {
                n: 4e-4,
                b: 5e-4,
                k: 0.0,
                corr_time: 100.0,
                turn_on_bias_std: 0.0,
                quantization_step: 1e-4,
            },
            field_n: Vector3::new(0.2, 0.0, 0.45),
        }
    }
}

impl MagParams {
    pub fn noiseless() -> Self {
        Self {
            errors: GmErrorParams::zero(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthParams {
    /// White pressure noise, Pa (1 sigma).
    pub noise_std: f64,
    pub quantization_step: f64,
}

impl Default for DepthParams {
    fn default() -> Self {
        Self {
            noise_std: 2500.0,
            quantization_step: 0.1,
        }
    }
}

/// Per-axis Gauss-Markov error generator with a turn-on bias drawn at
/// construction.
#[derive(Debug, Clone)]
struct AxisErrors {
    params: GmErrorParams,
    turn_on: Vector3<f64>,
    state: [GmErrorState; 3],
}

impl AxisErrors {
    fn new(params: GmErrorParams, rng: &mut Rng) -> Self {
        let turn_on = Vector3::from_fn(|_, _| params.turn_on_bias_std * normal(rng));
        Self {
            params,
            turn_on,
            state: [GmErrorState::default(); 3],
        }
    }

    fn next(&mut self, dt: f64, rng: &mut Rng) -> Vector3<f64> {
        let mut e = self.turn_on;
        for (i, s) in self.state.iter_mut().enumerate() {
            let draws = [normal(rng), normal(rng), normal(rng)];
            let (z, next) = gm_error_step(s, &self.params, dt, &draws);
            *s = next;
            e[i] += z;
        }
        e
    }
}

/// IMU emulator with its own random stream.
#[derive(Debug, Clone)]
pub struct Imu {
    accel: AxisErrors,
    gyro: AxisErrors,
    rng: Rng,
}

impl Imu {
    pub fn new(params: &ImuParams, mut rng: Rng) -> Self {
        let accel = AxisErrors::new(params.accel, &mut rng);
        let gyro = AxisErrors::new(params.gyro, &mut rng);
        Self { accel, gyro, rng }
    }

    pub fn turn_on_biases(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.accel.turn_on, self.gyro.turn_on)
    }

    /// Samples specific force and angular rate for the true body
    /// acceleration `nu1_dot`, attitude `q` and body rate `nu2`.
    pub fn sample(
        &mut self,
        nu1_dot: &Vector3<f64>,
        q: &UnitQuaternion,
        nu2: &Vector3<f64>,
        t: f64,
        dt: f64,
    ) -> ImuSample {
        let ea = self.accel.next(dt, &mut self.rng);
        let eg = self.gyro.next(dt, &mut self.rng);
        simulate_imu(nu1_dot, q, nu2, &ea, &eg, &self.accel.params, &self.gyro.params, t)
    }
}

/// Specific force and rate from truth plus the given error realisations,
/// quantized per channel.
#[allow(clippy::too_many_arguments)]
pub fn simulate_imu(
    nu1_dot: &Vector3<f64>,
    q: &UnitQuaternion,
    nu2: &Vector3<f64>,
    accel_error: &Vector3<f64>,
    gyro_error: &Vector3<f64>,
    accel: &GmErrorParams,
    gyro: &GmErrorParams,
    t: f64,
) -> ImuSample {
    let g_b = q.inverse_rotate(&Vector3::new(0.0, 0.0, GRAVITY));
    let f = nu1_dot - g_b + accel_error;
    let w = nu2 + gyro_error;
    ImuSample {
        f_ib_b: f.map(|x| quantize(x, accel.quantization_step)),
        omega_ib_b: w.map(|x| quantize(x, gyro.quantization_step)),
        t,
    }
}

#[derive(Debug, Clone)]
pub struct Magnetometer {
    errors: AxisErrors,
    field_n: Vector3<f64>,
    rng: Rng,
}

impl Magnetometer {
    pub fn new(params: &MagParams, mut rng: Rng) -> Self {
        let errors = AxisErrors::new(params.errors, &mut rng);
        Self {
            errors,
            field_n: params.field_n,
            rng,
        }
    }

    pub fn sample(&mut self, q: &UnitQuaternion, t: f64, dt: f64) -> MagSample {
        let e = self.errors.next(dt, &mut self.rng);
        simulate_mag(q, &self.field_n, &e, self.errors.params.quantization_step, t)
    }
}

/// Field rotated into the body frame plus the given error realisation.
pub fn simulate_mag(
    q: &UnitQuaternion,
    field_n: &Vector3<f64>,
    error: &Vector3<f64>,
    quantization_step: f64,
    t: f64,
) -> MagSample {
    let m = q.inverse_rotate(field_n) + error;
    MagSample {
        m_b: m.map(|x| quantize(x, quantization_step)),
        t,
    }
}

/// Absolute pressure for depth `d` with white noise draw `noise` (standard
/// normal), quantized and saturated to the sensor range.
pub fn simulate_depth(d: f64, noise: f64, params: &DepthParams, t: f64) -> DepthSample {
    let p = K_P * d + P_0 + params.noise_std * noise;
    let p = quantize(p, params.quantization_step).clamp(P_0, P_0 + P_FULL_SCALE);
    DepthSample { p_abs: p, t }
}
