use nalgebra::{Matrix1, Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::state::{HMM_DIM, SINS_DIM};
use crate::sensors::{GmErrorParams, ImuParams, MagParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Sins,
    Hmm,
}

impl FilterKind {
    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Sins => "sins",
            FilterKind::Hmm => "hmm",
        }
    }
}

/// Base-10 exponents of the five noise multipliers.
///
/// SINS: `Q_a`, `Q_g`, `Q_ba`, `Q_bg`, `R_mag`.
/// HMM: `Q_nu1`, `Q_eta1`, `Q_nu2`, `Q_eta2`, `R_ahrs`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TuningVector {
    pub a: [f64; 5],
}

impl TuningVector {
    pub const LOWER: f64 = -3.0;
    pub const UPPER: f64 = 3.0;

    pub fn nominal() -> Self {
        Self::default()
    }

    pub fn from_slice(a: &[f64]) -> Self {
        let mut v = [0.0; 5];
        v.copy_from_slice(&a[..5]);
        Self { a: v }
    }

    pub fn multiplier(&self, i: usize) -> f64 {
        10f64.powf(self.a[i])
    }
}

/// One-sigma values per state group used for `P0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialStd {
    pub nu1: f64,
    pub nu2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub current: f64,
    pub b_a: f64,
    pub b_g: f64,
}

impl Default for InitialStd {
    fn default() -> Self {
        Self {
            nu1: 0.25,
            nu2: 0.5,
            eta1: 0.5,
            eta2: 2.5f64.to_radians(),
            current: 5.0,
            b_a: 0.1,
            b_g: 1e-3f64.to_radians(),
        }
    }
}

/// Nominal noise levels. Process entries are one-sigma densities per
/// `sqrt(s)`, so the discrete block is `sigma^2 * dt`. Measurement entries
/// are one-sigma per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub accel_white: f64,
    pub gyro_white: f64,
    pub accel_bias: f64,
    pub gyro_bias: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub current: f64,
    pub usbl: f64,
    pub press: f64,
    pub mag: f64,
    pub ahrs: [f64; 3],
    pub p0: InitialStd,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::from_sensors(&ImuParams::default(), &MagParams::default(), 100.0)
    }
}

fn bias_drive(p: &GmErrorParams) -> f64 {
    let gm = if p.corr_time > 0.0 { 2.0 * p.b * p.b / p.corr_time } else { 0.0 };
    (p.k * p.k + gm).sqrt()
}

impl NoiseConfig {
    /// Builds the IMU and magnetometer entries from Allan-type error
    /// parameters; `mag_rate_hz` converts the magnetometer density into a
    /// per-sample sigma.
    pub fn from_sensors(imu: &ImuParams, mag: &MagParams, mag_rate_hz: f64) -> Self {
        Self {
            accel_white: imu.accel.n,
            gyro_white: imu.gyro.n,
            accel_bias: bias_drive(&imu.accel),
            gyro_bias: bias_drive(&imu.gyro),
            nu1: 1e-3,
            nu2: 1e-3,
            eta1: 0.01,
            eta2: 0.01f64.to_radians(),
            current: 1e-3,
            usbl: 1.0,
            press: 2500.0,
            mag: mag.errors.n * mag_rate_hz.sqrt(),
            ahrs: [0.25f64.to_radians(), 0.25f64.to_radians(), 0.8f64.to_radians()],
            p0: InitialStd::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.accel_white,
            self.gyro_white,
            self.accel_bias,
            self.gyro_bias,
            self.nu1,
            self.nu2,
            self.eta1,
            self.eta2,
            self.current,
            self.usbl,
            self.press,
            self.mag,
            self.ahrs[0],
            self.ahrs[1],
            self.ahrs[2],
            self.p0.nu1,
            self.p0.nu2,
            self.p0.eta1,
            self.p0.eta2,
            self.p0.current,
            self.p0.b_a,
            self.p0.b_g,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("noise standard deviations must be finite and positive".into())
        }
    }

    /// Continuous SINS process covariance over `[nu1, eta1, theta, b_a, b_g]`.
    pub fn sins_q(&self, t: &TuningVector) -> SMatrix<f64, SINS_DIM, SINS_DIM> {
        let mut d = SVector::<f64, SINS_DIM>::zeros();
        let blocks = [
            (0, self.accel_white.powi(2) * t.multiplier(0)),
            (6, self.gyro_white.powi(2) * t.multiplier(1)),
            (9, self.accel_bias.powi(2) * t.multiplier(2)),
            (12, self.gyro_bias.powi(2) * t.multiplier(3)),
        ];
        for (at, v) in blocks {
            d.fixed_rows_mut::<3>(at).fill(v);
        }
        SMatrix::from_diagonal(&d)
    }

    pub fn sins_r_mag(&self, t: &TuningVector) -> Matrix3<f64> {
        Matrix3::identity() * (self.mag.powi(2) * t.multiplier(4))
    }

    /// Continuous HMM process covariance over `[nu1, nu2, eta1, theta, u_c, v_c]`.
    pub fn hmm_q(&self, t: &TuningVector) -> SMatrix<f64, HMM_DIM, HMM_DIM> {
        let mut d = SVector::<f64, HMM_DIM>::zeros();
        let blocks = [
            (0, self.nu1.powi(2) * t.multiplier(0)),
            (6, self.eta1.powi(2) * t.multiplier(1)),
            (3, self.nu2.powi(2) * t.multiplier(2)),
            (9, self.eta2.powi(2) * t.multiplier(3)),
        ];
        for (at, v) in blocks {
            d.fixed_rows_mut::<3>(at).fill(v);
        }
        d[12] = self.current.powi(2);
        d[13] = self.current.powi(2);
        SMatrix::from_diagonal(&d)
    }

    pub fn hmm_r_ahrs(&self, t: &TuningVector) -> Matrix3<f64> {
        let m = t.multiplier(4);
        Matrix3::from_diagonal(&Vector3::from(self.ahrs).map(|s| s * s * m))
    }

    pub fn r_usbl(&self) -> Matrix3<f64> {
        Matrix3::identity() * self.usbl.powi(2)
    }

    pub fn r_press(&self) -> Matrix1<f64> {
        Matrix1::new(self.press.powi(2))
    }

    pub fn sins_p0(&self) -> SMatrix<f64, SINS_DIM, SINS_DIM> {
        let p = &self.p0;
        let mut d = SVector::<f64, SINS_DIM>::zeros();
        for (at, s) in [(0, p.nu1), (3, p.eta1), (6, p.eta2), (9, p.b_a), (12, p.b_g)] {
            d.fixed_rows_mut::<3>(at).fill(s * s);
        }
        SMatrix::from_diagonal(&d)
    }

    pub fn hmm_p0(&self) -> SMatrix<f64, HMM_DIM, HMM_DIM> {
        let p = &self.p0;
        let mut d = SVector::<f64, HMM_DIM>::zeros();
        for (at, s) in [(0, p.nu1), (3, p.nu2), (6, p.eta1), (9, p.eta2)] {
            d.fixed_rows_mut::<3>(at).fill(s * s);
        }
        d[12] = p.current * p.current;
        d[13] = p.current * p.current;
        SMatrix::from_diagonal(&d)
    }
}
