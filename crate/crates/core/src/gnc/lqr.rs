use nalgebra::{SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{GncError, GuidanceReference};
use crate::frames::{wrap_angle, EulerAngles, UnitQuaternion};
use crate::plant::{actuator_map, ActuatorCommand, ActuatorParams, HydroModel};

/// Linear model states `[u, v, w, p, q, r, φ, θ, ψ]`.
pub const NX: usize = 9;
/// Thruster channels `[main, differential, vertical]`.
pub const NU: usize = 3;
/// Augmented states: model states plus integrals of the u, θ, ψ errors.
pub const NA: usize = NX + 3;

pub type StateMatrix = SMatrix<f64, NX, NX>;
pub type InputMatrix = SMatrix<f64, NX, NU>;

/// Tracked outputs in the model state.
const TRACKED: [usize; 3] = [0, 7, 8];
/// Thruster channel driving each tracked output, used for anti-windup.
const CHANNEL_OF: [usize; 3] = [0, 2, 1];

/// Operating point: model state and thruster command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trim {
    pub x: SVector<f64, NX>,
    pub thruster: [f64; NU],
}

impl Trim {
    /// Level straight run at surge `u0`, main thruster balancing drag.
    pub fn level_surge(model: &HydroModel, act: &ActuatorParams, u0: f64) -> Self {
        let mut x = SVector::<f64, NX>::zeros();
        x[0] = u0;
        let mut t = Self { x, thruster: [0.0; NU] };
        let f0 = model_rhs(model, act, &x, &[0.0; NU])[0];
        let gain = model_rhs(model, act, &x, &[1.0, 0.0, 0.0])[0] - f0;
        t.thruster[0] = -f0 / gain;
        t
    }
}

/// Continuous model `ẋ = f(x, u)` on the reduced state, still water.
pub fn model_rhs(model: &HydroModel, act: &ActuatorParams, x: &SVector<f64, NX>, thruster: &[f64; NU]) -> SVector<f64, NX> {
    let nu = Vector6::new(x[0], x[1], x[2], x[3], x[4], x[5]);
    let (phi, theta) = (x[6], x[7]);
    let q = UnitQuaternion::from_euler(&EulerAngles::new(phi, theta, x[8]));
    // Linear thruster map without saturation, valid for small deviations.
    let cmd = ActuatorCommand {
        thruster: *thruster,
        ..Default::default()
    };
    let tau = linear_tau(&cmd, act);
    let acc = model.acceleration(&nu, &nu, &q, &tau);
    let (sp, cp, tt, ct) = (phi.sin(), phi.cos(), theta.tan(), theta.cos());
    let (p, qr, r) = (x[3], x[4], x[5]);
    let mut out = SVector::<f64, NX>::zeros();
    out.fixed_rows_mut::<6>(0).copy_from(&acc);
    out[6] = p + sp * tt * qr + cp * tt * r;
    out[7] = cp * qr - sp * r;
    out[8] = (sp * qr + cp * r) / ct;
    out
}

fn linear_tau(cmd: &ActuatorCommand, act: &ActuatorParams) -> Vector6<f64> {
    // actuator_map saturates, so evaluate per unit channel and scale.
    let mut tau = Vector6::zeros();
    for (k, c) in cmd.thruster.iter().enumerate() {
        let mut unit = ActuatorCommand::default();
        unit.thruster[k] = 1.0;
        tau += actuator_map(&unit, act).tau * *c;
    }
    tau
}

/// Central-difference Jacobians of [`model_rhs`] at `(x, u)`.
pub fn jacobians(model: &HydroModel, act: &ActuatorParams, x: &SVector<f64, NX>, u: &[f64; NU]) -> (StateMatrix, InputMatrix) {
    let h = 1e-6;
    let mut a = StateMatrix::zeros();
    for j in 0..NX {
        let (mut xp, mut xm) = (*x, *x);
        xp[j] += h;
        xm[j] -= h;
        let d = (model_rhs(model, act, &xp, u) - model_rhs(model, act, &xm, u)) / (2.0 * h);
        a.set_column(j, &d);
    }
    let mut b = InputMatrix::zeros();
    for j in 0..NU {
        let (mut up, mut um) = (*u, *u);
        up[j] += h;
        um[j] -= h;
        let d = (model_rhs(model, act, x, &up) - model_rhs(model, act, x, &um)) / (2.0 * h);
        b.set_column(j, &d);
    }
    (a, b)
}

/// Linearizes at `trim` and discretizes with the second-order truncated
/// matrix exponential: `A_d = I + A dt + A² dt²/2`, `B_d = (I dt + A dt²/2) B`.
pub fn linearize_discretize(model: &HydroModel, act: &ActuatorParams, trim: &Trim, dt: f64) -> Result<(StateMatrix, InputMatrix), GncError> {
    let f0 = model_rhs(model, act, &trim.x, &trim.thruster);
    if f0.norm() > 1e-6 {
        return Err(GncError::NonEquilibrium(f0.norm()));
    }
    let (a, b) = jacobians(model, act, &trim.x, &trim.thruster);
    let i = StateMatrix::identity();
    let ad = i + a * dt + a * a * (0.5 * dt * dt);
    let bd = (i * dt + a * (0.5 * dt * dt)) * b;
    Ok((ad, bd))
}

/// Solves `P = Q + AᵀPA − AᵀPB (R + BᵀPB)⁻¹ BᵀPA` by fixed-point iteration
/// and returns `(P, K)` with `K = (R + BᵀPB)⁻¹ BᵀPA`.
pub fn solve_dare<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    q: &SMatrix<f64, N, N>,
    r: &SMatrix<f64, M, M>,
) -> Result<(SMatrix<f64, N, N>, SMatrix<f64, M, N>), GncError> {
    let mut p = *q;
    for _ in 0..MAX_RICCATI_ITER {
        let s = r + b.transpose() * p * b;
        let s_inv = s.try_inverse().ok_or(GncError::RiccatiDiverged)?;
        let k = s_inv * b.transpose() * p * a;
        let next = q + a.transpose() * p * a - a.transpose() * p * b * k;
        let next = (next + next.transpose()) * 0.5;
        let delta = (next - p).norm();
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            return Err(GncError::RiccatiDiverged);
        }
        if delta <= 1e-10 * p.norm().max(1.0) {
            let s = r + b.transpose() * p * b;
            let k = s.try_inverse().ok_or(GncError::RiccatiDiverged)? * b.transpose() * p * a;
            return Ok((p, k));
        }
    }
    Err(GncError::RiccatiDiverged)
}

const MAX_RICCATI_ITER: usize = 10_000;

/// Diagonal LQR weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrWeights {
    pub u: f64,
    pub theta: f64,
    pub psi: f64,
    pub q: f64,
    pub r: f64,
    /// Integral weights on the u, θ, ψ errors.
    pub integral: [f64; 3],
    /// Input weights per thruster channel.
    pub input: [f64; NU],
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            u: 100.0,
            theta: 100.0,
            psi: 100.0,
            q: 25.0,
            r: 25.0,
            integral: [10.0, 10.0, 10.0],
            input: [1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrGains {
    /// Feedback on `[x − x_ref; integrals]`.
    pub k: SMatrix<f64, NU, NA>,
    pub trim: Trim,
    pub dt: f64,
    /// Restoring pitch moment per unit `sin θ`, N·m, for the mass feed-forward.
    pub pitch_stiffness: f64,
}

/// Builds the integral-augmented discrete model and solves for the gains.
pub fn lqr_synthesize(a_d: &StateMatrix, b_d: &InputMatrix, w: &LqrWeights, trim: Trim, dt: f64, pitch_stiffness: f64) -> Result<LqrGains, GncError> {
    let mut a = SMatrix::<f64, NA, NA>::zeros();
    a.fixed_view_mut::<NX, NX>(0, 0).copy_from(a_d);
    for (i, &s) in TRACKED.iter().enumerate() {
        a[(NX + i, s)] = dt;
        a[(NX + i, NX + i)] = 1.0;
    }
    let mut b = SMatrix::<f64, NA, NU>::zeros();
    b.fixed_view_mut::<NX, NU>(0, 0).copy_from(b_d);
    let mut q = SMatrix::<f64, NA, NA>::zeros();
    q[(0, 0)] = w.u;
    q[(7, 7)] = w.theta;
    q[(8, 8)] = w.psi;
    q[(4, 4)] = w.q;
    q[(5, 5)] = w.r;
    for i in 0..3 {
        q[(NX + i, NX + i)] = w.integral[i];
    }
    let r = SMatrix::<f64, NU, NU>::from_diagonal(&w.input.into());
    let (_, k) = solve_dare(&a, &b, &q, &r)?;
    Ok(LqrGains { k, trim, dt, pitch_stiffness })
}

impl LqrGains {
    /// Closed-loop augmented transition matrix for the nominal model.
    pub fn closed_loop(&self, a_d: &StateMatrix, b_d: &InputMatrix) -> SMatrix<f64, NA, NA> {
        let mut a = SMatrix::<f64, NA, NA>::zeros();
        a.fixed_view_mut::<NX, NX>(0, 0).copy_from(a_d);
        for (i, &s) in TRACKED.iter().enumerate() {
            a[(NX + i, s)] = self.dt;
            a[(NX + i, NX + i)] = 1.0;
        }
        let mut b = SMatrix::<f64, NA, NU>::zeros();
        b.fixed_view_mut::<NX, NU>(0, 0).copy_from(b_d);
        a - b * self.k
    }
}

/// Body velocities and attitude seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub nu: Vector6<f64>,
    pub euler: EulerAngles,
}

/// LQR tracking controller with integral action and anti-windup.
#[derive(Debug, Clone)]
pub struct Controller {
    gains: LqrGains,
    actuators: ActuatorParams,
    integral: Vector3<f64>,
}

impl Controller {
    pub fn new(gains: LqrGains, actuators: ActuatorParams) -> Self {
        Self {
            gains,
            actuators,
            integral: Vector3::zeros(),
        }
    }

    pub fn gains(&self) -> &LqrGains {
        &self.gains
    }

    pub fn integral(&self) -> Vector3<f64> {
        self.integral
    }

    /// Computes the saturated command and advances the integrators, each of
    /// which holds while its thruster channel is saturated.
    pub fn control_step(&mut self, input: &ControlInput, reference: &GuidanceReference) -> ActuatorCommand {
        let g = &self.gains;
        let e = &input.euler;
        let mut dx = SVector::<f64, NA>::zeros();
        for i in 0..6 {
            dx[i] = input.nu[i] - g.trim.x[i];
        }
        dx[0] = input.nu[0] - reference.surge;
        dx[6] = e.roll;
        dx[7] = e.pitch - reference.theta;
        dx[8] = wrap_angle(e.yaw - reference.psi);
        let err = Vector3::new(dx[0], dx[7], dx[8]);
        for i in 0..3 {
            dx[NX + i] = self.integral[i];
        }
        let u = -(g.k * dx);
        let mut thruster = [0.0; NU];
        let mut saturated = [false; NU];
        for c in 0..NU {
            let raw = g.trim.thruster[c] + u[c];
            thruster[c] = raw.clamp(-1.0, 1.0);
            saturated[c] = raw != thruster[c];
        }
        for i in 0..3 {
            if !saturated[CHANNEL_OF[i]] {
                self.integral[i] += g.dt * err[i];
            }
        }
        let moment = g.pitch_stiffness * reference.theta.sin();
        ActuatorCommand {
            thruster,
            movable_mass_pos: self.actuators.movable_mass_for_moment(moment),
            buoyancy_delta: 0.0,
        }
    }
}
