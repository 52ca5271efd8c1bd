use nalgebra::{SVector, Vector1, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::ukf::Manifold;
use super::NavError;
use crate::frames::{EulerAngles, FramesError, UnitQuaternion};
use crate::plant::{stack, GeneralizedForce, HydroModel};
use crate::sensors::{ImuSample, UsblFix, K_P, P_0};
use crate::GRAVITY;

pub const SINS_DIM: usize = 15;
pub const HMM_DIM: usize = 14;

fn retract_q(q: &UnitQuaternion, d: Vector3<f64>) -> UnitQuaternion {
    q.product(&UnitQuaternion::from_rotation_vector(&d)).normalized()
}

fn local_q(q: &UnitQuaternion, other: &UnitQuaternion) -> Vector3<f64> {
    q.conjugate().product(other).to_rotation_vector()
}

fn slice3(v: &[f64], at: usize) -> Vector3<f64> {
    Vector3::new(v[at], v[at + 1], v[at + 2])
}

/// Strapdown filter state. `nu1` is the body-frame velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavStateSins {
    pub nu1: Vector3<f64>,
    pub eta1: Vector3<f64>,
    pub q: UnitQuaternion,
    pub b_a: Vector3<f64>,
    pub b_g: Vector3<f64>,
}

impl NavStateSins {
    /// Body rate rebuilt from the gyro sample, `ω̃ − b_g`.
    pub fn nu2(&self, imu: &ImuSample) -> Vector3<f64> {
        imu.omega_ib_b - self.b_g
    }
}

impl Manifold<SINS_DIM> for NavStateSins {
    fn retract(&self, d: &SVector<f64, SINS_DIM>) -> Self {
        let d = d.as_slice();
        Self {
            nu1: self.nu1 + slice3(d, 0),
            eta1: self.eta1 + slice3(d, 3),
            q: retract_q(&self.q, slice3(d, 6)),
            b_a: self.b_a + slice3(d, 9),
            b_g: self.b_g + slice3(d, 12),
        }
    }

    fn local(&self, o: &Self) -> SVector<f64, SINS_DIM> {
        let mut d = SVector::<f64, SINS_DIM>::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&(o.nu1 - self.nu1));
        d.fixed_rows_mut::<3>(3).copy_from(&(o.eta1 - self.eta1));
        d.fixed_rows_mut::<3>(6).copy_from(&local_q(&self.q, &o.q));
        d.fixed_rows_mut::<3>(9).copy_from(&(o.b_a - self.b_a));
        d.fixed_rows_mut::<3>(12).copy_from(&(o.b_g - self.b_g));
        d
    }

    fn is_finite(&self) -> bool {
        let v = [self.nu1, self.eta1, self.b_a, self.b_g, self.q.eps];
        v.iter().all(|x| x.iter().all(|c| c.is_finite())) && self.q.eta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinsDerivative {
    pub nu1_dot: Vector3<f64>,
    pub eta1_dot: Vector3<f64>,
    pub q_dot: nalgebra::Vector4<f64>,
}

/// Strapdown mechanization without Coriolis and transport-rate terms.
/// With `ned_velocity` the velocity is resolved in NED instead of body axes.
pub fn sins_process_rhs(x: &NavStateSins, imu: &ImuSample, ned_velocity: bool) -> SinsDerivative {
    let f = imu.f_ib_b - x.b_a;
    let w = imu.omega_ib_b - x.b_g;
    let g_n = Vector3::new(0.0, 0.0, GRAVITY);
    let (nu1_dot, eta1_dot) = if ned_velocity {
        (x.q.rotate(&f) + g_n, x.nu1)
    } else {
        (f + x.q.inverse_rotate(&g_n), x.q.rotate(&x.nu1))
    };
    SinsDerivative {
        nu1_dot,
        eta1_dot,
        q_dot: x.q.kinematics_rhs(&w),
    }
}

/// One explicit Euler step of the strapdown model.
pub fn sins_euler_step(x: &NavStateSins, imu: &ImuSample, dt: f64, ned_velocity: bool) -> NavStateSins {
    let d = sins_process_rhs(x, imu, ned_velocity);
    NavStateSins {
        nu1: x.nu1 + d.nu1_dot * dt,
        eta1: x.eta1 + d.eta1_dot * dt,
        q: UnitQuaternion::from_vector(&(x.q.as_vector() + d.q_dot * dt)).normalized(),
        b_a: x.b_a,
        b_g: x.b_g,
    }
}

/// Hydrodynamic-model filter state; `u_c`, `v_c` are the NED current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavStateHmm {
    pub nu1: Vector3<f64>,
    pub nu2: Vector3<f64>,
    pub eta1: Vector3<f64>,
    pub q: UnitQuaternion,
    pub u_c: f64,
    pub v_c: f64,
}

impl Manifold<HMM_DIM> for NavStateHmm {
    fn retract(&self, d: &SVector<f64, HMM_DIM>) -> Self {
        let d = d.as_slice();
        Self {
            nu1: self.nu1 + slice3(d, 0),
            nu2: self.nu2 + slice3(d, 3),
            eta1: self.eta1 + slice3(d, 6),
            q: retract_q(&self.q, slice3(d, 9)),
            u_c: self.u_c + d[12],
            v_c: self.v_c + d[13],
        }
    }

    fn local(&self, o: &Self) -> SVector<f64, HMM_DIM> {
        let mut d = SVector::<f64, HMM_DIM>::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&(o.nu1 - self.nu1));
        d.fixed_rows_mut::<3>(3).copy_from(&(o.nu2 - self.nu2));
        d.fixed_rows_mut::<3>(6).copy_from(&(o.eta1 - self.eta1));
        d.fixed_rows_mut::<3>(9).copy_from(&local_q(&self.q, &o.q));
        d[12] = o.u_c - self.u_c;
        d[13] = o.v_c - self.v_c;
        d
    }

    fn is_finite(&self) -> bool {
        let v = [self.nu1, self.nu2, self.eta1, self.q.eps];
        v.iter().all(|x| x.iter().all(|c| c.is_finite()))
            && self.q.eta.is_finite()
            && self.u_c.is_finite()
            && self.v_c.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmmDerivative {
    pub nu_dot: Vector6<f64>,
    pub eta1_dot: Vector3<f64>,
    pub q_dot: nalgebra::Vector4<f64>,
}

/// Equations of motion with a 2-D random-walk current.
pub fn hmm_process_rhs(x: &NavStateHmm, tau: &GeneralizedForce, model: &HydroModel) -> HmmDerivative {
    let nu = stack(&x.nu1, &x.nu2);
    let v_c_b = x.q.inverse_rotate(&Vector3::new(x.u_c, x.v_c, 0.0));
    let nu_r = nu - stack(&v_c_b, &Vector3::zeros());
    HmmDerivative {
        nu_dot: model.acceleration(&nu, &nu_r, &x.q, &tau.tau),
        eta1_dot: x.q.rotate(&x.nu1),
        q_dot: x.q.kinematics_rhs(&x.nu2),
    }
}

/// `substeps` explicit Euler steps spanning `dt`.
pub fn hmm_euler_step(x: &NavStateHmm, tau: &GeneralizedForce, model: &HydroModel, dt: f64, substeps: usize) -> NavStateHmm {
    let h = dt / substeps.max(1) as f64;
    let mut s = *x;
    for _ in 0..substeps.max(1) {
        let d = hmm_process_rhs(&s, tau, model);
        s = NavStateHmm {
            nu1: s.nu1 + d.nu_dot.fixed_rows::<3>(0) * h,
            nu2: s.nu2 + d.nu_dot.fixed_rows::<3>(3) * h,
            eta1: s.eta1 + d.eta1_dot * h,
            q: UnitQuaternion::from_vector(&(s.q.as_vector() + d.q_dot * h)).normalized(),
            u_c: s.u_c,
            v_c: s.v_c,
        };
    }
    s
}

/// Absolute pressure predicted from the estimated depth.
pub fn depth_meas_model(depth: f64) -> Vector1<f64> {
    Vector1::new(K_P * depth + P_0)
}

/// Body-frame magnetic field predicted from the estimated attitude.
pub fn mag_meas_model(q: &UnitQuaternion, field_n: &Vector3<f64>) -> Vector3<f64> {
    q.inverse_rotate(field_n)
}

/// Euler angles of the estimated attitude.
pub fn ahrs_meas_model(q: &UnitQuaternion) -> Result<EulerAngles, FramesError> {
    q.to_euler()
}

/// Predicted USBL position and the accuracy-weighted covariance
/// `R_base · accuracy²`.
pub fn usbl_meas_model(eta1: &Vector3<f64>, fix: &UsblFix, r_base: &nalgebra::Matrix3<f64>) -> Result<(Vector3<f64>, nalgebra::Matrix3<f64>), NavError> {
    if !fix.valid {
        return Err(NavError::InvalidFix);
    }
    Ok((*eta1, r_base * (fix.accuracy * fix.accuracy)))
}
