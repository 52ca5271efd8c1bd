use nalgebra::{SMatrix, Vector1, Vector3};
use serde::{Deserialize, Serialize};

use super::config::{FilterKind, NoiseConfig, TuningVector};
use super::mahony::{mahony_step, MahonyParams, MahonyState};
use super::state::*;
use super::ukf::{SigmaPointParams, Ukf};
use super::NavError;
use crate::frames::{EulerAngles, UnitQuaternion};
use crate::plant::{GeneralizedForce, HydroModel, HydroParams, VehicleState};
use crate::sensors::{DepthSample, ImuSample, MagSample, UsblFix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterOptions {
    pub sins_alpha: f64,
    pub hmm_alpha: f64,
    /// Euler substeps per HMM prediction.
    pub hmm_substeps: usize,
    /// Resolve the SINS velocity in NED instead of body axes.
    pub ned_velocity: bool,
    pub mahony: MahonyParams,
    /// Position error that counts as divergence, m.
    pub crash_position_error: f64,
    /// Lower bound on the reported USBL accuracy, m; keeps `R_usbl` positive
    /// definite for noiseless fixes.
    pub usbl_min_accuracy: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            sins_alpha: 1.0,
            hmm_alpha: 1e-3,
            hmm_substeps: 10,
            ned_velocity: false,
            mahony: MahonyParams::default(),
            crash_position_error: 1e4,
            usbl_min_accuracy: 0.01,
        }
    }
}

/// Sensor data available at one 100 Hz tick. `tau` is present on control
/// ticks and carries the force held since the previous control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorStep {
    pub t: f64,
    pub imu: ImuSample,
    pub mag: Option<MagSample>,
    pub depth: Option<DepthSample>,
    pub usbl: Option<UsblFix>,
    pub tau: Option<GeneralizedForce>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavEstimate {
    pub t: f64,
    /// Body-frame linear velocity.
    pub nu1: Vector3<f64>,
    pub nu2: Vector3<f64>,
    pub eta1: Vector3<f64>,
    pub q: UnitQuaternion,
    pub euler: EulerAngles,
    pub sigma3_nu1: Vector3<f64>,
    pub sigma3_eta1: Vector3<f64>,
    pub sigma3_att: Vector3<f64>,
}

fn sigma3<const N: usize>(p: &SMatrix<f64, N, N>, at: usize) -> Vector3<f64> {
    Vector3::new(p[(at, at)], p[(at + 1, at + 1)], p[(at + 2, at + 2)]).map(|v| 3.0 * v.max(0.0).sqrt())
}

#[derive(Debug, Clone)]
pub struct SinsFilter {
    ukf: Ukf<NavStateSins, SINS_DIM>,
    q_c: SMatrix<f64, SINS_DIM, SINS_DIM>,
    r_mag: nalgebra::Matrix3<f64>,
    r_usbl: nalgebra::Matrix3<f64>,
    r_press: nalgebra::Matrix1<f64>,
    field_n: Vector3<f64>,
    ned_velocity: bool,
    last_imu: Option<ImuSample>,
    usbl_min_accuracy: f64,
    t: f64,
    outliers: usize,
}

impl SinsFilter {
    pub fn new(init: &VehicleState, t0: f64, noise: &NoiseConfig, tuning: &TuningVector, field_n: Vector3<f64>, opts: &FilterOptions) -> Self {
        let nu1 = if opts.ned_velocity { init.q.rotate(&init.nu1) } else { init.nu1 };
        let x = NavStateSins {
            nu1,
            eta1: init.eta1,
            q: init.q,
            b_a: Vector3::zeros(),
            b_g: Vector3::zeros(),
        };
        Self {
            ukf: Ukf::new(x, noise.sins_p0(), SigmaPointParams::with_alpha(opts.sins_alpha)),
            q_c: noise.sins_q(tuning),
            r_mag: noise.sins_r_mag(tuning),
            r_usbl: noise.r_usbl(),
            r_press: noise.r_press(),
            field_n,
            ned_velocity: opts.ned_velocity,
            last_imu: None,
            usbl_min_accuracy: opts.usbl_min_accuracy,
            t: t0,
            outliers: 0,
        }
    }

    pub fn state(&self) -> &NavStateSins {
        &self.ukf.x
    }

    pub fn covariance(&self) -> &SMatrix<f64, SINS_DIM, SINS_DIM> {
        &self.ukf.p
    }

    pub fn step(&mut self, s: &SensorStep) -> Result<(), NavError> {
        if let Some(prev) = self.last_imu {
            let dt = s.t - self.t;
            if dt > 0.0 {
                let ned = self.ned_velocity;
                self.ukf.predict(|x| sins_euler_step(x, &prev, dt, ned), &(self.q_c * dt))?;
            }
        }
        self.t = s.t;
        self.last_imu = Some(s.imu);
        if let Some(m) = &s.mag {
            let field = self.field_n;
            let info = self.ukf.update(|x| mag_meas_model(&x.q, &field), &self.r_mag, &m.m_b, &[false; 3])?;
            self.outliers += info.outlier as usize;
        }
        if let Some(d) = &s.depth {
            fuse_depth(&mut self.ukf, d, &self.r_press, |x| x.eta1.z, &mut self.outliers)?;
        }
        if let Some(f) = s.usbl.as_ref().filter(|f| f.valid) {
            let f = UsblFix { accuracy: f.accuracy.max(self.usbl_min_accuracy), ..*f };
            let (_, r) = usbl_meas_model(&self.ukf.x.eta1, &f, &self.r_usbl)?;
            let info = self.ukf.update(|x| x.eta1, &r, &f.eta_meas, &[false; 3])?;
            self.outliers += info.outlier as usize;
        }
        Ok(())
    }

    pub fn estimate(&self) -> NavEstimate {
        let x = &self.ukf.x;
        let p = &self.ukf.p;
        let nu2 = self.last_imu.map(|i| x.nu2(&i)).unwrap_or_default();
        let nu1 = if self.ned_velocity { x.q.inverse_rotate(&x.nu1) } else { x.nu1 };
        NavEstimate {
            t: self.t,
            nu1,
            nu2,
            eta1: x.eta1,
            q: x.q,
            euler: x.q.to_euler_unchecked(),
            sigma3_nu1: sigma3(p, 0),
            sigma3_eta1: sigma3(p, 3),
            sigma3_att: sigma3(p, 6),
        }
    }
}

fn fuse_depth<S, const N: usize>(
    ukf: &mut Ukf<S, N>,
    d: &DepthSample,
    r: &nalgebra::Matrix1<f64>,
    depth_of: impl Fn(&S) -> f64,
    outliers: &mut usize,
) -> Result<(), NavError>
where
    S: super::ukf::Manifold<N>,
{
    let info = ukf.update(|x| depth_meas_model(depth_of(x)), r, &Vector1::new(d.p_abs), &[false])?;
    *outliers += info.outlier as usize;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct HmmFilter {
    ukf: Ukf<NavStateHmm, HMM_DIM>,
    model: HydroModel,
    q_c: SMatrix<f64, HMM_DIM, HMM_DIM>,
    r_ahrs: nalgebra::Matrix3<f64>,
    r_usbl: nalgebra::Matrix3<f64>,
    r_press: nalgebra::Matrix1<f64>,
    field_n: Vector3<f64>,
    mahony: MahonyParams,
    ahrs: MahonyState,
    substeps: usize,
    usbl_min_accuracy: f64,
    t_ahrs: f64,
    t: f64,
    outliers: usize,
}

impl HmmFilter {
    pub fn new(
        init: &VehicleState,
        t0: f64,
        noise: &NoiseConfig,
        tuning: &TuningVector,
        field_n: Vector3<f64>,
        model_params: &HydroParams,
        opts: &FilterOptions,
    ) -> Result<Self, NavError> {
        let model = HydroModel::new(model_params.clone()).map_err(|e| NavError::InvalidConfig(e.to_string()))?;
        let x = NavStateHmm {
            nu1: init.nu1,
            nu2: init.nu2,
            eta1: init.eta1,
            q: init.q,
            u_c: 0.0,
            v_c: 0.0,
        };
        Ok(Self {
            ukf: Ukf::new(x, noise.hmm_p0(), SigmaPointParams::with_alpha(opts.hmm_alpha)),
            model,
            q_c: noise.hmm_q(tuning),
            r_ahrs: noise.hmm_r_ahrs(tuning),
            r_usbl: noise.r_usbl(),
            r_press: noise.r_press(),
            field_n,
            mahony: opts.mahony,
            ahrs: MahonyState::new(init.q),
            substeps: opts.hmm_substeps.max(1),
            usbl_min_accuracy: opts.usbl_min_accuracy,
            t_ahrs: t0,
            t: t0,
            outliers: 0,
        })
    }

    pub fn state(&self) -> &NavStateHmm {
        &self.ukf.x
    }

    pub fn covariance(&self) -> &SMatrix<f64, HMM_DIM, HMM_DIM> {
        &self.ukf.p
    }

    pub fn ahrs(&self) -> &MahonyState {
        &self.ahrs
    }

    pub fn step(&mut self, s: &SensorStep) -> Result<(), NavError> {
        let dt_ahrs = s.t - self.t_ahrs;
        if dt_ahrs > 0.0 {
            self.ahrs = mahony_step(&self.ahrs, &s.imu, s.mag.as_ref(), &self.field_n, &self.mahony, dt_ahrs);
        }
        self.t_ahrs = s.t;
        let Some(tau) = s.tau else {
            return Ok(());
        };
        let dt = s.t - self.t;
        if dt > 0.0 {
            let (model, n) = (&self.model, self.substeps);
            self.ukf.predict(|x| hmm_euler_step(x, &tau, model, dt, n), &(self.q_c * dt))?;
        }
        self.t = s.t;
        let euler = self.ahrs.q.to_euler().map_err(|_| NavError::GimbalLock)?;
        let z = euler.as_vector();
        let info = self.ukf.update(
            |x| x.q.to_euler_unchecked().as_vector(),
            &self.r_ahrs,
            &z,
            &[true; 3],
        )?;
        self.outliers += info.outlier as usize;
        if let Some(d) = &s.depth {
            fuse_depth(&mut self.ukf, d, &self.r_press, |x| x.eta1.z, &mut self.outliers)?;
        }
        if let Some(f) = s.usbl.as_ref().filter(|f| f.valid) {
            let f = UsblFix { accuracy: f.accuracy.max(self.usbl_min_accuracy), ..*f };
            let (_, r) = usbl_meas_model(&self.ukf.x.eta1, &f, &self.r_usbl)?;
            let info = self.ukf.update(|x| x.eta1, &r, &f.eta_meas, &[false; 3])?;
            self.outliers += info.outlier as usize;
        }
        Ok(())
    }

    pub fn estimate(&self) -> NavEstimate {
        let x = &self.ukf.x;
        let p = &self.ukf.p;
        NavEstimate {
            t: self.t,
            nu1: x.nu1,
            nu2: x.nu2,
            eta1: x.eta1,
            q: x.q,
            euler: x.q.to_euler_unchecked(),
            sigma3_nu1: sigma3(p, 0),
            sigma3_eta1: sigma3(p, 6),
            sigma3_att: sigma3(p, 9),
        }
    }
}

/// Either filter behind one interface.
#[derive(Debug, Clone)]
pub enum NavFilter {
    Sins(SinsFilter),
    Hmm(Box<HmmFilter>),
}

impl NavFilter {
    /// Starts from the true motion state with zero biases and current.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: FilterKind,
        init: &VehicleState,
        t0: f64,
        noise: &NoiseConfig,
        tuning: &TuningVector,
        field_n: Vector3<f64>,
        model_params: &HydroParams,
        opts: &FilterOptions,
    ) -> Result<Self, NavError> {
        noise.validate().map_err(NavError::InvalidConfig)?;
        Ok(match kind {
            FilterKind::Sins => NavFilter::Sins(SinsFilter::new(init, t0, noise, tuning, field_n, opts)),
            FilterKind::Hmm => NavFilter::Hmm(Box::new(HmmFilter::new(init, t0, noise, tuning, field_n, model_params, opts)?)),
        })
    }

    pub fn kind(&self) -> FilterKind {
        match self {
            NavFilter::Sins(_) => FilterKind::Sins,
            NavFilter::Hmm(_) => FilterKind::Hmm,
        }
    }

    pub fn step(&mut self, s: &SensorStep) -> Result<(), NavError> {
        match self {
            NavFilter::Sins(f) => f.step(s),
            NavFilter::Hmm(f) => f.step(s),
        }
    }

    pub fn estimate(&self) -> NavEstimate {
        match self {
            NavFilter::Sins(f) => f.estimate(),
            NavFilter::Hmm(f) => f.estimate(),
        }
    }

    pub fn outliers(&self) -> usize {
        match self {
            NavFilter::Sins(f) => f.outliers,
            NavFilter::Hmm(f) => f.outliers,
        }
    }

    /// `max |P − Pᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        match self {
            NavFilter::Sins(f) => (f.ukf.p - f.ukf.p.transpose()).amax(),
            NavFilter::Hmm(f) => (f.ukf.p - f.ukf.p.transpose()).amax(),
        }
    }

    /// Divergence check against the true position.
    pub fn check_position(&self, truth: &Vector3<f64>, limit: f64) -> Result<(), NavError> {
        let err = (self.estimate().eta1 - truth).norm();
        if err.is_finite() && err <= limit {
            Ok(())
        } else {
            Err(NavError::Diverged(err))
        }
    }
}

/// Recorded sensor streams plus the true state at every tick.
#[derive(Debug, Clone)]
pub struct EpisodeStreams {
    pub steps: Vec<SensorStep>,
    pub truth: Vec<VehicleState>,
}

/// Runs a filter over a recorded episode, returning one estimate per tick.
pub fn run_filter(
    streams: &EpisodeStreams,
    kind: FilterKind,
    noise: &NoiseConfig,
    tuning: &TuningVector,
    field_n: Vector3<f64>,
    model_params: &HydroParams,
    opts: &FilterOptions,
) -> Result<Vec<NavEstimate>, NavError> {
    let (Some(first), Some(init)) = (streams.steps.first(), streams.truth.first()) else {
        return Ok(Vec::new());
    };
    let mut f = NavFilter::new(kind, init, first.t, noise, tuning, field_n, model_params, opts)?;
    let mut out = Vec::with_capacity(streams.steps.len());
    for (s, truth) in streams.steps.iter().zip(&streams.truth) {
        f.step(s)?;
        f.check_position(&truth.eta1, opts.crash_position_error)?;
        out.push(f.estimate());
    }
    Ok(out)
}
