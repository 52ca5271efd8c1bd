use nalgebra::{Matrix3, OMatrix, Vector3, U10, U3, U5};
use serde::{Deserialize, Serialize};

use super::SensorError;
use crate::frames::UnitQuaternion;

type PairMatrix = OMatrix<f64, U10, U3>;
const PAIRS: usize = 10;

/// Acoustic parameters of the USBL and its five-hydrophone array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UsblParams {
    /// Speed of sound, m/s.
    pub c: f64,
    /// Body-frame hydrophone positions, m.
    pub hydrophones: [Vector3<f64>; 5],
    /// Round-trip-time white noise, s.
    pub sigma_rtt: f64,
    /// TDOA white noise, s.
    pub sigma_tdoa: f64,
    pub rate_hz: f64,
}

impl Default for UsblParams {
    /// Four hydrophones on the vertices of a regular tetrahedron with 0.1 m
    /// circumradius plus one at the array origin.
    fn default() -> Self {
        let k = 0.1 / 3f64.sqrt();
        Self {
            c: 1500.0,
            hydrophones: [
                Vector3::zeros(),
                Vector3::new(k, k, k),
                Vector3::new(k, -k, -k),
                Vector3::new(-k, k, -k),
                Vector3::new(-k, -k, k),
            ],
            sigma_rtt: 6.67e-6,
            sigma_tdoa: 0.3e-6,
            rate_hz: 1.0,
        }
    }
}

impl UsblParams {
    pub fn noiseless() -> Self {
        Self {
            sigma_rtt: 0.0,
            sigma_tdoa: 0.0,
            ..Self::default()
        }
    }

    /// `S = D * P_HYDRO`: one row `p_i - p_j` per pair `i < j`.
    pub fn pair_matrix(&self) -> OMatrix<f64, U10, U3> {
        let d = OMatrix::<f64, U10, U5>::from_fn(|row, col| {
            let (i, j) = pair(row);
            if col == i {
                1.0
            } else if col == j {
                -1.0
            } else {
                0.0
            }
        });
        let p = OMatrix::<f64, U5, U3>::from_fn(|r, c| self.hydrophones[r][c]);
        d * p
    }
}

fn pair(row: usize) -> (usize, usize) {
    let mut k = 0;
    for i in 0..5 {
        for j in (i + 1)..5 {
            if k == row {
                return (i, j);
            }
            k += 1;
        }
    }
    unreachable!("pair index {row} out of range")
}

/// Scheduled USBL outage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageWindow {
    pub start: f64,
    pub duration: f64,
}

impl OutageWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsblFix {
    /// Measured NED position, m (zero when invalid).
    pub eta_meas: Vector3<f64>,
    /// Predicted 1-sigma position error, m.
    pub accuracy: f64,
    pub t: f64,
    pub valid: bool,
}

impl UsblFix {
    pub fn invalid(t: f64) -> Self {
        Self {
            eta_meas: Vector3::zeros(),
            accuracy: 0.0,
            t,
            valid: false,
        }
    }
}

/// Simulates one USBL fix for the transceiver at `eta1` with attitude `q`
/// and the transponder at the origin.
///
/// `noise` holds 11 standard normal draws: the RTT draw followed by one
/// per hydrophone pair. The direction is measured in the body frame and
/// resolved in NED with the device's attitude.
pub fn simulate_usbl(
    eta1: &Vector3<f64>,
    q: &UnitQuaternion,
    params: &UsblParams,
    outages: &[OutageWindow],
    noise: &[f64; 11],
    t: f64,
) -> Result<UsblFix, SensorError> {
    if outages.iter().any(|w| w.contains(t)) {
        return Ok(UsblFix::invalid(t));
    }
    let range = eta1.norm();
    if range < 0.5 {
        return Err(SensorError::TooClose(range));
    }
    let s = params.pair_matrix();
    let sts = s.transpose() * s;
    let eig = sts.symmetric_eigenvalues();
    let cond = eig.max() / eig.min().max(f64::MIN_POSITIVE);
    if !(cond <= 1e8) {
        return Err(SensorError::DegenerateGeometry(cond));
    }
    let sts_inv = sts
        .try_inverse()
        .ok_or(SensorError::DegenerateGeometry(f64::INFINITY))?;

    let c = params.c;
    let rtt = 2.0 / c * range + params.sigma_rtt * noise[0];
    // Unit direction from the vehicle to the transponder, body frame.
    let toward_b = q.inverse_rotate(&(-eta1 / range));
    let mut tdoa: OMatrix<f64, U10, nalgebra::U1> = -(s * toward_b) / c;
    for k in 0..PAIRS {
        tdoa[k] += params.sigma_tdoa * noise[k + 1];
    }
    let d = -c * (sts_inv * (s.transpose() * tdoa));
    let dn = d.norm();
    if !(dn > 0.0) {
        return Err(SensorError::DegenerateGeometry(f64::INFINITY));
    }
    let dir = d / dn;
    let slant = 0.5 * c * rtt;
    let eta_meas = q.rotate(&(-dir * slant));

    Ok(UsblFix {
        eta_meas,
        accuracy: predicted_accuracy(&s, &sts_inv, &d, slant, params),
        t,
        valid: true,
    })
}

/// First-order 1-sigma position error, `sqrt(trace(cov))`.
fn predicted_accuracy(
    _s: &PairMatrix,
    sts_inv: &Matrix3<f64>,
    d: &Vector3<f64>,
    slant: f64,
    params: &UsblParams,
) -> f64 {
    let c = params.c;
    let dn = d.norm();
    let u = d / dn;
    let cov_d = sts_inv * (c * c * params.sigma_tdoa * params.sigma_tdoa);
    let proj = Matrix3::identity() - u * u.transpose();
    let cov_u = proj * cov_d * proj / (dn * dn);
    let sigma_r = 0.5 * c * params.sigma_rtt;
    (slant * slant * cov_u.trace() + sigma_r * sigma_r).sqrt()
}
