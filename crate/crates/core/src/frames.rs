//! Quaternion and rotation kernel shared by the plant, the sensor emulators
//! and the navigation filters.
//!
//! Quaternions are stored scalar-first, `q = [eta, eps1, eps2, eps3]`, and
//! describe the rotation from body to NED. Euler angles follow the zyx
//! (roll-pitch-yaw) convention used in marine craft modelling.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4x3, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance from `|pitch| = pi/2` below which Euler angles are rejected.
pub const GIMBAL_LOCK_MARGIN: f64 = 1e-6;

const MEAN_TOLERANCE: f64 = 1e-10;
const MEAN_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FramesError {
    #[error("pitch {pitch} rad is within {GIMBAL_LOCK_MARGIN} of +-pi/2")]
    GimbalLock { pitch: f64 },
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = a - two_pi * ((a + PI) / two_pi).floor();
    if w <= -PI {
        w += two_pi;
    }
    if w > PI {
        w -= two_pi;
    }
    w
}

/// Skew-symmetric cross-product matrix, `skew(a) * b == a x b`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const ZERO: EulerAngles = EulerAngles {
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
    };

    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    /// Per-axis difference with every component wrapped to `(-pi, pi]`.
    pub fn wrapped_difference(&self, other: &EulerAngles) -> Vector3<f64> {
        Vector3::new(
            wrap_angle(self.roll - other.roll),
            wrap_angle(self.pitch - other.pitch),
            wrap_angle(self.yaw - other.yaw),
        )
    }
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub eta: f64,
    pub eps: Vector3<f64>,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            eta: 1.0,
            eps: Vector3::zeros(),
        }
    }

    /// Builds a quaternion from raw components and normalizes it. A zero
    /// input collapses to the identity.
    pub fn new_normalize(eta: f64, eps1: f64, eps2: f64, eps3: f64) -> Self {
        Self {
            eta,
            eps: Vector3::new(eps1, eps2, eps3),
        }
        .normalized()
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new_normalize(v[0], v[1], v[2], v[3])
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.eta, self.eps.x, self.eps.y, self.eps.z)
    }

    pub fn norm(&self) -> f64 {
        (self.eta * self.eta + self.eps.norm_squared()).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Self::identity();
        }
        Self {
            eta: self.eta / n,
            eps: self.eps / n,
        }
    }

    /// Resolves the double cover so that `eta >= 0`.
    pub fn canonical(self) -> Self {
        if self.eta < 0.0 {
            Self {
                eta: -self.eta,
                eps: -self.eps,
            }
        } else {
            self
        }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            eta: self.eta,
            eps: -self.eps,
        }
    }

    /// Rotation about `axis` (need not be normalized) by `angle` radians.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self::from_rotation_vector(&(axis * (angle / n)))
    }

    /// Exponential map of a rotation vector.
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        let half = 0.5 * angle;
        let k = if angle < 1e-8 {
            0.5 - angle * angle / 48.0
        } else {
            half.sin() / angle
        };
        Self {
            eta: half.cos(),
            eps: v * k,
        }
        .normalized()
    }

    /// Logarithm map; returns the shortest rotation vector.
    pub fn to_rotation_vector(&self) -> Vector3<f64> {
        let q = self.canonical();
        let s = q.eps.norm();
        if s < 1e-12 {
            return q.eps * (2.0 / q.eta.max(f64::MIN_POSITIVE));
        }
        let angle = 2.0 * s.atan2(q.eta);
        q.eps * (angle / s)
    }

    /// Rotation matrix `C_b^n` (body to NED).
    pub fn to_dcm(&self) -> Matrix3<f64> {
        let q = self.normalized();
        let s = skew(&q.eps);
        Matrix3::identity() + s * (2.0 * q.eta) + s * s * 2.0
    }

    /// Rotates a body-frame vector into NED.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_dcm() * v
    }

    /// Rotates a NED vector into the body frame.
    pub fn inverse_rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_dcm().transpose() * v
    }

    pub fn from_euler(e: &EulerAngles) -> Self {
        let (sr, cr) = (0.5 * e.roll).sin_cos();
        let (sp, cp) = (0.5 * e.pitch).sin_cos();
        let (sy, cy) = (0.5 * e.yaw).sin_cos();
        Self {
            eta: cr * cp * cy + sr * sp * sy,
            eps: Vector3::new(
                sr * cp * cy - cr * sp * sy,
                cr * sp * cy + sr * cp * sy,
                cr * cp * sy - sr * sp * cy,
            ),
        }
        .normalized()
        .canonical()
    }

    pub fn to_euler(&self) -> Result<EulerAngles, FramesError> {
        let e = self.to_euler_unchecked();
        if FRAC_PI_2 - e.pitch.abs() < GIMBAL_LOCK_MARGIN {
            return Err(FramesError::GimbalLock { pitch: e.pitch });
        }
        Ok(e)
    }

    /// Euler angles without the gimbal-lock check; pitch is clamped to
    /// `[-pi/2, pi/2]`.
    pub fn to_euler_unchecked(&self) -> EulerAngles {
        let q = self.normalized();
        let (n, e1, e2, e3) = (q.eta, q.eps.x, q.eps.y, q.eps.z);
        let r11 = 1.0 - 2.0 * (e2 * e2 + e3 * e3);
        let r21 = 2.0 * (e1 * e2 + e3 * n);
        let r31 = 2.0 * (e1 * e3 - e2 * n);
        let r32 = 2.0 * (e2 * e3 + e1 * n);
        let r33 = 1.0 - 2.0 * (e1 * e1 + e2 * e2);
        EulerAngles {
            roll: wrap_angle(r32.atan2(r33)),
            pitch: -r31.clamp(-1.0, 1.0).asin(),
            yaw: wrap_angle(r21.atan2(r11)),
        }
    }

    /// Quaternion derivative for body rate `omega`, `0.5 * q (x) (0, omega)`.
    pub fn kinematics_rhs(&self, omega: &Vector3<f64>) -> Vector4<f64> {
        angular_rate_transform(self) * omega
    }

    /// `self (x) other` (Hamilton product).
    pub fn product(&self, other: &UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion {
            eta: self.eta * other.eta - self.eps.dot(&other.eps),
            eps: other.eps * self.eta + self.eps * other.eta + self.eps.cross(&other.eps),
        }
    }

    /// Rotation angle between two attitudes, in `[0, pi]`.
    pub fn angle_to(&self, other: &UnitQuaternion) -> f64 {
        self.conjugate().product(other).to_rotation_vector().norm()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        self.product(&rhs).normalized()
    }
}

/// Angular velocity transformation `T_q` with `q_dot = T_q(q) * omega`.
pub fn angular_rate_transform(q: &UnitQuaternion) -> Matrix4x3<f64> {
    let (n, e) = (q.eta, q.eps);
    0.5 * Matrix4x3::new(
        -e.x, -e.y, -e.z, //
        n, -e.z, e.y, //
        e.z, n, -e.x, //
        -e.y, e.x, n,
    )
}

/// Result of the iterative weighted quaternion mean.
#[derive(Debug, Clone, Copy)]
pub struct QuatMean {
    pub mean: UnitQuaternion,
    pub iterations: usize,
    /// False when the iteration budget ran out; `mean` is then the best
    /// iterate.
    pub converged: bool,
}

/// Weighted mean on the rotation-vector chart. Negative weights are
/// accepted as long as all weights sum to one. Iteration starts from the
/// first quaternion.
pub fn quat_weighted_mean(quats: &[UnitQuaternion], weights: &[f64]) -> QuatMean {
    assert_eq!(quats.len(), weights.len(), "one weight per quaternion");
    let Some(first) = quats.first() else {
        return QuatMean {
            mean: UnitQuaternion::identity(),
            iterations: 0,
            converged: true,
        };
    };
    let mut mean = *first;
    let mut best = (f64::INFINITY, mean);
    let mut previous = f64::INFINITY;
    for it in 1..=MEAN_MAX_ITERATIONS {
        let inv = mean.conjugate();
        let step: Vector3<f64> = quats
            .iter()
            .zip(weights)
            .map(|(q, w)| inv.product(q).to_rotation_vector() * *w)
            .sum();
        let size = step.norm();
        if size < best.0 {
            best = (size, mean);
        }
        mean = (mean * UnitQuaternion::from_rotation_vector(&step)).normalized();
        // Large negative zeroth weights put a floor on the attainable step
        // size; stalling below 1e-8 is accepted as converged.
        if size < MEAN_TOLERANCE || (size < 1e-8 && size >= previous) {
            return QuatMean {
                mean,
                iterations: it,
                converged: true,
            };
        }
        previous = size;
    }
    QuatMean {
        mean: best.1,
        iterations: MEAN_MAX_ITERATIONS,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rzyx(e: &EulerAngles) -> Matrix3<f64> {
        let (sr, cr) = e.roll.sin_cos();
        let (sp, cp) = e.pitch.sin_cos();
        let (sy, cy) = e.yaw.sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        rz * ry * rx
    }

    #[test]
    fn identity_dcm() {
        assert_abs_diff_eq!(
            UnitQuaternion::identity().to_dcm(),
            Matrix3::identity(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn yaw_90_maps_x_to_east() {
        let q = UnitQuaternion::from_euler(&EulerAngles::new(0.0, 0.0, FRAC_PI_2));
        let v = q.rotate(&Vector3::x());
        assert_abs_diff_eq!(v, Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn euler_zero_and_yaw_pi() {
        let q = UnitQuaternion::from_euler(&EulerAngles::ZERO);
        assert_eq!(q, UnitQuaternion::identity());
        let q = UnitQuaternion::from_euler(&EulerAngles::new(0.0, 0.0, PI));
        assert_abs_diff_eq!(q.eta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.eps, Vector3::z(), epsilon = 1e-12);
    }

    #[test]
    fn gimbal_lock_is_signalled() {
        let q = UnitQuaternion::from_euler(&EulerAngles::new(0.1, FRAC_PI_2, 0.2));
        assert!(matches!(q.to_euler(), Err(FramesError::GimbalLock { .. })));
    }

    #[test]
    fn wrap_examples() {
        assert_abs_diff_eq!(wrap_angle(PI + 0.1), -PI + 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-3.0 * PI), PI, epsilon = 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
    }

    #[test]
    fn zero_rate_gives_zero_derivative() {
        let q = UnitQuaternion::from_euler(&EulerAngles::new(0.3, -0.2, 1.0));
        assert_eq!(q.kinematics_rhs(&Vector3::zeros()), Vector4::zeros());
    }

    #[test]
    fn small_yaw_step_integrates_to_rate_times_dt() {
        let (w, dt) = (0.7, 1e-4);
        let q = UnitQuaternion::identity();
        let qd = q.kinematics_rhs(&Vector3::new(0.0, 0.0, w));
        let next = UnitQuaternion::from_vector(&(q.as_vector() + qd * dt));
        assert_abs_diff_eq!(next.to_euler().unwrap().yaw, w * dt, epsilon = 1e-10);
    }

    #[test]
    fn rate_transform_identity_example() {
        let t = angular_rate_transform(&UnitQuaternion::identity());
        assert_abs_diff_eq!(
            t * Vector3::z(),
            Vector4::new(0.0, 0.0, 0.0, 0.5),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rate_transform_matches_quaternion_product() {
        let mut rng = crate::rng::stream(11, 0);
        use rand::Rng;
        for _ in 0..100 {
            let q = UnitQuaternion::new_normalize(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let w = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let pure = UnitQuaternion { eta: 0.0, eps: w };
            let expected = q.product(&pure).as_vector() * 0.5;
            assert_abs_diff_eq!(angular_rate_transform(&q) * w, expected, epsilon = 1e-12);
            for c in angular_rate_transform(&q).column_iter() {
                assert_abs_diff_eq!(c.norm(), 0.5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mean_of_identical_quaternions() {
        let q = UnitQuaternion::from_euler(&EulerAngles::new(0.1, 0.2, 0.3));
        let m = quat_weighted_mean(&[q, q, q], &[0.2, 0.3, 0.5]);
        assert!(m.converged);
        assert!(m.mean.angle_to(&q) < 1e-12);
    }

    #[test]
    fn mean_of_symmetric_pair_is_identity() {
        let a = UnitQuaternion::from_euler(&EulerAngles::new(0.0, 0.0, 0.05));
        let b = UnitQuaternion::from_euler(&EulerAngles::new(0.0, 0.0, -0.05));
        let m = quat_weighted_mean(&[a, b], &[0.5, 0.5]);
        assert!(m.mean.angle_to(&UnitQuaternion::identity()) < 1e-12);
    }

    #[test]
    fn mean_accepts_negative_zeroth_weight() {
        let c = UnitQuaternion::from_euler(&EulerAngles::new(0.2, -0.1, 2.0));
        let n = 3.0;
        let alpha: f64 = 1e-3;
        let lambda = alpha * alpha * n - n;
        let w0 = lambda / (n + lambda);
        let wi = 0.5 / (n + lambda);
        let mut quats = vec![c];
        let mut weights = vec![w0];
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut v = Vector3::zeros();
                v[axis] = sign * 1e-4;
                quats.push(c * UnitQuaternion::from_rotation_vector(&v));
                weights.push(wi);
            }
        }
        let m = quat_weighted_mean(&quats, &weights);
        assert!(m.converged);
        assert!(m.mean.angle_to(&c) < 1e-9);
    }

    #[test]
    fn small_cluster_mean_matches_linear_average() {
        let mut rng = crate::rng::stream(5, 1);
        use rand::Rng;
        let centre = UnitQuaternion::from_euler(&EulerAngles::new(0.4, 0.1, -2.5));
        let n = 12;
        let quats: Vec<_> = (0..n)
            .map(|_| {
                let v = Vector3::new(
                    rng.random_range(-1e-3..1e-3),
                    rng.random_range(-1e-3..1e-3),
                    rng.random_range(-1e-3..1e-3),
                );
                centre * UnitQuaternion::from_rotation_vector(&v)
            })
            .collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let chart = quat_weighted_mean(&quats, &weights).mean;
        let linear: Vector4<f64> = quats
            .iter()
            .zip(&weights)
            .map(|(q, w)| q.as_vector() * *w)
            .sum();
        let linear = UnitQuaternion::from_vector(&linear);
        assert!(chart.angle_to(&linear) < 1e-6);
    }

    proptest! {
        #[test]
        fn dcm_is_orthonormal(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0) {
            prop_assume!(a * a + b * b + c * c + d * d > 1e-3);
            let r = UnitQuaternion::new_normalize(a, b, c, d).to_dcm();
            prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn euler_round_trip(r in -3.1f64..3.1, p in -1.5f64..1.5, y in -3.1f64..3.1) {
            let e = EulerAngles::new(r, p, y);
            let q = UnitQuaternion::from_euler(&e);
            prop_assert!((q.norm() - 1.0).abs() < 1e-9);
            prop_assert!(q.eta >= 0.0);
            let back = q.to_euler().unwrap();
            prop_assert!(back.wrapped_difference(&e).norm() < 1e-9);
            prop_assert!((q.to_dcm() - rzyx(&e)).norm() < 1e-12);
        }

        #[test]
        fn wrap_is_idempotent_and_congruent(a in -100.0f64..100.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_angle(w), w);
            let k = ((a - w) / (2.0 * PI)).round();
            prop_assert!((a - w - k * 2.0 * PI).abs() < 1e-9);
        }

        #[test]
        fn derivative_is_tangent(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0,
                                 wx in -3.0f64..3.0, wy in -3.0f64..3.0, wz in -3.0f64..3.0) {
            prop_assume!(a * a + b * b + c * c + d * d > 1e-3);
            let q = UnitQuaternion::new_normalize(a, b, c, d);
            let qd = q.kinematics_rhs(&Vector3::new(wx, wy, wz));
            prop_assert!(q.as_vector().dot(&qd).abs() < 1e-12);
        }
    }
}
