use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::dubins::{dubins_shortest, DubinsPath, Pose2};
use crate::frames::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub n: f64,
    pub e: f64,
    pub d: f64,
    /// Arrival heading, rad; defaults to the direction of the incoming leg.
    #[serde(default)]
    pub heading: Option<f64>,
    #[serde(default = "default_surge")]
    pub surge_ref: f64,
}

fn default_surge() -> f64 {
    0.5
}

impl Waypoint {
    pub fn new(n: f64, e: f64, d: f64) -> Self {
        Self {
            n,
            e,
            d,
            heading: None,
            surge_ref: default_surge(),
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.n, self.e, self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceParams {
    /// Horizontal lookahead distance, m.
    pub delta: f64,
    /// Vertical lookahead distance, m.
    pub vertical_lookahead: f64,
    /// Dubins turn radius, m.
    pub radius: f64,
    /// Pitch reference limit, rad.
    pub pitch_limit: f64,
    /// Below this surge speed the sideslip term is dropped, m/s.
    pub sideslip_min_surge: f64,
    /// Remaining arc length at which a waypoint counts as reached, m.
    pub arrival_margin: f64,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        Self {
            delta: 4.0,
            vertical_lookahead: 4.0,
            radius: 5.0,
            pitch_limit: 20f64.to_radians(),
            sideslip_min_surge: 0.05,
            arrival_margin: 0.5,
        }
    }
}

/// Linear depth interpolation along the path, `s` in `[0, 1]`.
pub fn depth_reference(d_start: f64, d_goal: f64, s: f64) -> f64 {
    d_start + s.clamp(0.0, 1.0) * (d_goal - d_start)
}

/// Line-of-sight yaw reference with sideslip compensation.
pub fn los_yaw_reference(gamma_p: f64, h_e: f64, delta: f64, v_est: f64, u_est: f64) -> f64 {
    los_yaw_reference_with(gamma_p, h_e, delta, v_est, u_est, GuidanceParams::default().sideslip_min_surge)
}

fn los_yaw_reference_with(gamma_p: f64, h_e: f64, delta: f64, v: f64, u: f64, u_min: f64) -> f64 {
    let beta = if u.abs() < u_min { 0.0 } else { (v / u).atan() };
    wrap_angle(gamma_p + (-h_e / delta).atan() - beta)
}

/// Pitch reference from the depth error `d_ref - d`; a positive error
/// (vehicle too shallow) commands nose-down. Not saturated.
pub fn vertical_guidance(depth_error: f64, lookahead: f64) -> f64 {
    -(depth_error / lookahead).atan()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceReference {
    pub surge: f64,
    pub theta: f64,
    pub psi: f64,
    pub d_ref: f64,
    /// Horizontal cross-track error, m.
    pub cross_track: f64,
    /// Index of the waypoint being approached.
    pub leg: usize,
    pub done: bool,
}

/// Waypoint sequencer with Dubins planning and LOS guidance. A new path is
/// planned from the supplied vehicle pose each time a waypoint is reached.
#[derive(Debug, Clone)]
pub struct Guidance {
    waypoints: Vec<Waypoint>,
    headings: Vec<f64>,
    params: GuidanceParams,
    leg: usize,
    path: DubinsPath,
    d_start: f64,
    s: f64,
    done: bool,
    planned: Vec<(DubinsPath, f64, f64)>,
}

impl Guidance {
    pub fn new(waypoints: Vec<Waypoint>, start: &Vector3<f64>, start_psi: f64, params: GuidanceParams) -> Self {
        assert!(!waypoints.is_empty(), "at least one waypoint is required");
        assert!(params.delta > 0.0 && params.vertical_lookahead > 0.0);
        let mut headings = Vec::with_capacity(waypoints.len());
        let mut prev = Vector2::new(start.x, start.y);
        for w in &waypoints {
            let here = Vector2::new(w.n, w.e);
            let dir = here - prev;
            let h = w.heading.unwrap_or_else(|| {
                if dir.norm() > 1e-9 {
                    dir.y.atan2(dir.x)
                } else {
                    headings.last().copied().unwrap_or(start_psi)
                }
            });
            headings.push(h);
            prev = here;
        }
        let mut g = Self {
            path: dubins_shortest(&Pose2::new(start.x, start.y, start_psi), &Pose2::new(waypoints[0].n, waypoints[0].e, headings[0]), params.radius),
            waypoints,
            headings,
            params,
            leg: 0,
            d_start: start.z,
            s: 0.0,
            done: false,
            planned: Vec::new(),
        };
        g.planned.push((g.path, g.d_start, g.waypoints[0].d));
        g
    }

    pub fn params(&self) -> &GuidanceParams {
        &self.params
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Planned legs so far: path, start depth and goal depth.
    pub fn planned(&self) -> &[(DubinsPath, f64, f64)] {
        &self.planned
    }

    /// Dense 3-D polyline of every leg planned so far.
    pub fn reference_polyline(&self, spacing: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        for (path, d0, d1) in &self.planned {
            let len = path.length();
            let n = ((len / spacing).ceil() as usize).max(1);
            for i in 0..=n {
                let s = len * i as f64 / n as f64;
                let p = path.sample(s);
                let frac = if len > 0.0 { s / len } else { 1.0 };
                out.push(Vector3::new(p.n, p.e, depth_reference(*d0, *d1, frac)));
            }
        }
        out
    }

    /// Guidance update from the vehicle position, heading and body-frame
    /// surge/sway speeds.
    pub fn update(&mut self, eta1: &Vector3<f64>, psi: f64, u: f64, v: f64) -> GuidanceReference {
        let p = &self.params;
        let len = self.path.length();
        let here = Vector2::new(eta1.x, eta1.y);
        let (s, pose, cross) = self.path.project(&here, self.s - 1.0, self.s + 2.0 * p.delta);
        self.s = s;

        if !self.done && len - s <= p.arrival_margin {
            if self.leg + 1 < self.waypoints.len() {
                self.leg += 1;
                let w = self.waypoints[self.leg];
                self.d_start = self.waypoints[self.leg - 1].d;
                self.path = dubins_shortest(&Pose2::new(eta1.x, eta1.y, psi), &Pose2::new(w.n, w.e, self.headings[self.leg]), p.radius);
                self.s = 0.0;
                self.planned.push((self.path, self.d_start, w.d));
                return self.update(eta1, psi, u, v);
            }
            self.done = true;
        }

        let w = self.waypoints[self.leg];
        let frac = if len > 0.0 { s / len } else { 1.0 };
        let d_ref = depth_reference(self.d_start, w.d, frac);
        let slope = if len > 0.0 { (w.d - self.d_start) / len } else { 0.0 };
        let theta = (-slope.atan() + vertical_guidance(d_ref - eta1.z, p.vertical_lookahead))
            .clamp(-p.pitch_limit, p.pitch_limit);
        let psi_d = los_yaw_reference_with(pose.psi, cross, p.delta, v, u, p.sideslip_min_surge);
        GuidanceReference {
            surge: w.surge_ref,
            theta,
            psi: psi_d,
            d_ref,
            cross_track: cross,
            leg: self.leg,
            done: self.done,
        }
    }
}
