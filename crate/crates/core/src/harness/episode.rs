use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::config::{Mode, ScenarioConfig};
use super::metrics::{max_tracking_error, rms_euler_error, rms_position_error, RunMetrics};
use super::HarnessError;
use crate::frames::{EulerAngles, UnitQuaternion};
use crate::gnc::{design_controller, ControlInput, Guidance, GuidanceReference};
use crate::nav::{EpisodeStreams, NavEstimate, NavFilter, SensorStep};
use crate::plant::{
    actuator_map, apply_model_mismatch, current_step, fossen_rhs, integrate_plant, ActuatorCommand, HydroModel,
    VehicleState, WaterCurrentState,
};
use crate::rng::{normal, normal3, stream};
use crate::sensors::{simulate_depth, simulate_usbl, Imu, Magnetometer, UsblFix};

/// Spacing of the dense reference polyline, m.
const REFERENCE_SPACING: f64 = 0.25;

/// One control tick of an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTick {
    /// Index into the 100 Hz sensor stream.
    pub step: usize,
    pub t: f64,
    pub truth: VehicleState,
    pub reference: GuidanceReference,
    pub command: ActuatorCommand,
}

/// Plant, sensor and guidance record of an episode flown on ground truth.
#[derive(Debug, Clone)]
pub struct TruthRecording {
    pub streams: EpisodeStreams,
    pub ticks: Vec<ControlTick>,
    pub reference: Vec<Vector3<f64>>,
    pub goal_reached: bool,
    pub plant_failed: bool,
    pub end_time: f64,
}

/// One row of the 10 Hz time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRow {
    pub t: f64,
    pub n: f64,
    pub e: f64,
    pub d: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub n_est: f64,
    pub e_est: f64,
    pub d_est: f64,
    pub roll_est: f64,
    pub pitch_est: f64,
    pub yaw_est: f64,
    pub n_3sigma: f64,
    pub e_3sigma: f64,
    pub d_3sigma: f64,
    pub d_ref: f64,
    pub pitch_ref: f64,
    pub yaw_ref: f64,
    pub cross_track: f64,
    pub thrust_main: f64,
    pub thrust_diff: f64,
    pub thrust_vert: f64,
    pub movable_mass: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    pub metrics: RunMetrics,
    pub timeseries: Vec<TimeRow>,
    pub reference: Vec<Vector3<f64>>,
}

struct Rates {
    dt: f64,
    control: usize,
    depth: usize,
    usbl: usize,
    steps: usize,
}

impl Rates {
    fn new(cfg: &ScenarioConfig) -> Self {
        let div = |r: f64| ((cfg.base_rate_hz / r).round() as usize).max(1);
        Self {
            dt: 1.0 / cfg.base_rate_hz,
            control: div(cfg.control.rate_hz),
            depth: div(cfg.depth_rate_hz),
            usbl: div(cfg.usbl.rate_hz),
            steps: (cfg.duration() * cfg.base_rate_hz).round() as usize,
        }
    }
}

fn initial_state(cfg: &ScenarioConfig) -> VehicleState {
    VehicleState {
        eta1: Vector3::from(cfg.start),
        q: UnitQuaternion::from_euler(&EulerAngles::new(0.0, 0.0, cfg.start_heading)),
        ..VehicleState::default()
    }
}

fn truth_estimate(s: &VehicleState, t: f64) -> NavEstimate {
    NavEstimate {
        t,
        nu1: s.nu1,
        nu2: s.nu2,
        eta1: s.eta1,
        q: s.q,
        euler: s.q.to_euler_unchecked(),
        sigma3_nu1: Vector3::zeros(),
        sigma3_eta1: Vector3::zeros(),
        sigma3_att: Vector3::zeros(),
    }
}

enum Feedback<'a> {
    Truth(&'a mut Vec<SensorStep>, &'a mut Vec<VehicleState>),
    Filter(&'a mut NavFilter, &'a mut Vec<NavEstimate>),
}

struct Flown {
    ticks: Vec<ControlTick>,
    reference: Vec<Vector3<f64>>,
    goal_reached: bool,
    crashed: bool,
    plant_failed: bool,
    end_time: f64,
}

/// Fixed-step co-simulation of plant, sensors, guidance and control.
fn fly(cfg: &ScenarioConfig, mut feedback: Feedback<'_>) -> Result<Flown, HarnessError> {
    cfg.validate()?;
    let rates = Rates::new(cfg);
    let dt = rates.dt;
    let plant_params = if cfg.model_mismatch {
        apply_model_mismatch(&cfg.plant, &cfg.mismatch, cfg.seeds.mismatch)
    } else {
        cfg.plant.clone()
    };
    let plant = HydroModel::new(plant_params)?;
    let nominal = HydroModel::new(cfg.plant.clone())?;
    let mut controller = design_controller(&nominal, &cfg.actuators, &cfg.control)?;
    let waypoints = cfg.waypoints();
    let goal = waypoints.last().map(|w| w.position()).unwrap_or_default();
    let mut state = initial_state(cfg);
    let mut guidance = Guidance::new(waypoints[1..].to_vec(), &state.eta1, cfg.start_heading, cfg.guidance);
    let outages = cfg.outage_windows();

    let seed = cfg.seeds.sensor;
    let mut imu = Imu::new(&cfg.imu, stream(seed, 1));
    let mut mag = Magnetometer::new(&cfg.mag, stream(seed, 2));
    let mut depth_rng = stream(seed, 3);
    let mut usbl_rng = stream(seed, 4);
    let mut current_rng = stream(cfg.seeds.current, 5);
    let mut current = WaterCurrentState::default();
    let mut cmd = ActuatorCommand::default();
    let mut tau = actuator_map(&cmd, &cfg.actuators);

    let mut out = Flown {
        ticks: Vec::with_capacity(rates.steps / rates.control + 1),
        reference: Vec::new(),
        goal_reached: false,
        crashed: false,
        plant_failed: false,
        end_time: 0.0,
    };
    for k in 0..rates.steps {
        let t = k as f64 * dt;
        out.end_time = t;
        let acc = fossen_rhs(&state, &tau, &current, &plant).nu_dot;
        let nu1_dot = Vector3::new(acc[0], acc[1], acc[2]);
        let imu_s = imu.sample(&nu1_dot, &state.q, &state.nu2, t, dt);
        let mag_s = mag.sample(&state.q, t, dt);
        let depth_s = (k % rates.depth == 0).then(|| simulate_depth(state.eta1.z, normal(&mut depth_rng), &cfg.depth, t));
        let usbl_s = (k % rates.usbl == 0).then(|| {
            let noise: [f64; 11] = std::array::from_fn(|_| normal(&mut usbl_rng));
            simulate_usbl(&state.eta1, &state.q, &cfg.usbl, &outages, &noise, t).unwrap_or(UsblFix::invalid(t))
        });
        let control_tick = k % rates.control == 0;
        let step = SensorStep {
            t,
            imu: imu_s,
            mag: Some(mag_s),
            depth: depth_s,
            usbl: usbl_s,
            tau: control_tick.then_some(tau),
        };
        let estimate = match &mut feedback {
            Feedback::Truth(steps, truth) => {
                steps.push(step);
                truth.push(state);
                truth_estimate(&state, t)
            }
            Feedback::Filter(filter, estimates) => {
                let ok = filter
                    .step(&step)
                    .and_then(|_| filter.check_position(&state.eta1, cfg.filter_options.crash_position_error));
                if ok.is_err() {
                    out.crashed = true;
                    break;
                }
                let e = filter.estimate();
                if control_tick {
                    estimates.push(e);
                }
                e
            }
        };

        if control_tick {
            let reference = guidance.update(&estimate.eta1, estimate.euler.yaw, estimate.nu1.x, estimate.nu1.y);
            if reference.done {
                out.goal_reached = (state.eta1 - goal).norm() <= cfg.goal_radius;
            }
            if !reference.done {
                let input = ControlInput {
                    nu: crate::plant::stack(&estimate.nu1, &estimate.nu2),
                    euler: estimate.euler,
                };
                cmd = controller.control_step(&input, &reference);
                tau = actuator_map(&cmd, &cfg.actuators);
            }
            out.ticks.push(ControlTick { step: k, t, truth: state, reference, command: cmd });
            if reference.done {
                break;
            }
        }

        match integrate_plant(&state, &tau, &current, &plant, dt) {
            Ok(s) => state = s,
            Err(_) => {
                out.plant_failed = true;
                break;
            }
        }
        current = current_step(&current, &cfg.current, dt, &normal3(&mut current_rng));
    }
    out.reference = guidance.reference_polyline(REFERENCE_SPACING);
    Ok(out)
}

/// Flies the episode on ground truth and records every sensor stream.
pub fn record_truth(cfg: &ScenarioConfig) -> Result<TruthRecording, HarnessError> {
    let mut steps = Vec::new();
    let mut truth = Vec::new();
    let flown = fly(cfg, Feedback::Truth(&mut steps, &mut truth))?;
    Ok(TruthRecording {
        streams: EpisodeStreams { steps, truth },
        ticks: flown.ticks,
        reference: flown.reference,
        goal_reached: flown.goal_reached,
        plant_failed: flown.plant_failed,
        end_time: flown.end_time,
    })
}

fn new_filter(cfg: &ScenarioConfig) -> Result<NavFilter, HarnessError> {
    let init = initial_state(cfg);
    Ok(NavFilter::new(
        cfg.filter,
        &init,
        0.0,
        &cfg.noise,
        &cfg.tuning,
        cfg.mag.field_n,
        &cfg.plant,
        &cfg.filter_options,
    )?)
}

/// Runs the configured filter passively over a truth recording.
pub fn replay_filter(cfg: &ScenarioConfig, rec: &TruthRecording, started: Instant) -> Result<EpisodeOutput, HarnessError> {
    let mut filter = new_filter(cfg)?;
    let mut estimates = Vec::with_capacity(rec.ticks.len());
    let mut crashed = rec.plant_failed;
    let mut next_tick = rec.ticks.iter().peekable();
    for (k, (s, truth)) in rec.streams.steps.iter().zip(&rec.streams.truth).enumerate() {
        let ok = filter
            .step(s)
            .and_then(|_| filter.check_position(&truth.eta1, cfg.filter_options.crash_position_error));
        if ok.is_err() {
            crashed = true;
            break;
        }
        if next_tick.peek().is_some_and(|c| c.step == k) {
            next_tick.next();
            estimates.push(filter.estimate());
        }
    }
    Ok(finish(cfg, &rec.ticks, &estimates, &rec.reference, rec.goal_reached, crashed, rec.end_time, started))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &ScenarioConfig,
    ticks: &[ControlTick],
    estimates: &[NavEstimate],
    reference: &[Vector3<f64>],
    goal_reached: bool,
    crashed: bool,
    end_time: f64,
    started: Instant,
) -> EpisodeOutput {
    let wall = started.elapsed().as_secs_f64();
    let n = ticks.len().min(estimates.len());
    let timeseries = if cfg.record {
        ticks[..n].iter().zip(estimates).map(|(c, e)| time_row(c, e)).collect()
    } else {
        Vec::new()
    };
    let metrics = if crashed {
        RunMetrics::crashed(end_time, wall)
    } else {
        let truth_pos: Vec<_> = ticks.iter().map(|c| c.truth.eta1).collect();
        let est_pos: Vec<_> = estimates.iter().map(|e| e.eta1).collect();
        let truth_att: Vec<_> = ticks.iter().map(|c| c.truth.q.to_euler_unchecked()).collect();
        let est_att: Vec<_> = estimates.iter().map(|e| e.euler).collect();
        RunMetrics {
            rms_pos_err: rms_position_error(&truth_pos, &est_pos),
            rms_euler_err: rms_euler_error(&truth_att, &est_att),
            max_tracking_err: max_tracking_error(&truth_pos, reference),
            goal_reached,
            crash: false,
            sim_time: end_time,
            wall_time: wall,
        }
    };
    EpisodeOutput {
        metrics,
        timeseries,
        reference: reference.to_vec(),
    }
}

fn time_row(c: &ControlTick, e: &NavEstimate) -> TimeRow {
    let tr = c.truth.q.to_euler_unchecked();
    TimeRow {
        t: c.t,
        n: c.truth.eta1.x,
        e: c.truth.eta1.y,
        d: c.truth.eta1.z,
        roll: tr.roll,
        pitch: tr.pitch,
        yaw: tr.yaw,
        n_est: e.eta1.x,
        e_est: e.eta1.y,
        d_est: e.eta1.z,
        roll_est: e.euler.roll,
        pitch_est: e.euler.pitch,
        yaw_est: e.euler.yaw,
        n_3sigma: e.sigma3_eta1.x,
        e_3sigma: e.sigma3_eta1.y,
        d_3sigma: e.sigma3_eta1.z,
        d_ref: c.reference.d_ref,
        pitch_ref: c.reference.theta,
        yaw_ref: c.reference.psi,
        cross_track: c.reference.cross_track,
        thrust_main: c.command.thruster[0],
        thrust_diff: c.command.thruster[1],
        thrust_vert: c.command.thruster[2],
        movable_mass: c.command.movable_mass_pos,
    }
}

/// Runs one episode. Failures of the filter or the plant are reported as
/// a crash in the metrics.
pub fn run_episode(cfg: &ScenarioConfig) -> Result<EpisodeOutput, HarnessError> {
    let started = Instant::now();
    match cfg.mode {
        Mode::Ol => replay_filter(cfg, &record_truth(cfg)?, started),
        Mode::Cl => {
            let mut filter = new_filter(cfg)?;
            let mut estimates = Vec::new();
            let flown = fly(cfg, Feedback::Filter(&mut filter, &mut estimates))?;
            let crashed = flown.crashed || flown.plant_failed;
            Ok(finish(cfg, &flown.ticks, &estimates, &flown.reference, flown.goal_reached, crashed, flown.end_time, started))
        }
    }
}
