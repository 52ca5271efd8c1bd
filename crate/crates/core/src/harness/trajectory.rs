use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, TAU};

use crate::gnc::Waypoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Spiral,
    Zigzag,
    Lawnmower,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 3] = [TrajectoryKind::Spiral, TrajectoryKind::Zigzag, TrajectoryKind::Lawnmower];

    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Spiral => "spiral",
            TrajectoryKind::Zigzag => "zigzag",
            TrajectoryKind::Lawnmower => "lawnmower",
        }
    }
}

/// Helical descent, turning to starboard from a northward start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpiralParams {
    pub radius: f64,
    pub turns: f64,
    pub waypoints_per_turn: usize,
    pub end_depth: f64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        Self {
            radius: 15.0,
            turns: 3.0,
            waypoints_per_turn: 6,
            end_depth: 40.0,
        }
    }
}

/// Legs alternating between +45 deg and -45 deg from north at constant depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZigzagParams {
    pub legs: usize,
    pub leg_length: f64,
    pub angle: f64,
}

impl Default for ZigzagParams {
    fn default() -> Self {
        Self {
            legs: 6,
            leg_length: 40.0,
            angle: FRAC_PI_4,
        }
    }
}

/// North-south survey legs stepping east.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LawnmowerParams {
    pub legs: usize,
    pub leg_length: f64,
    pub spacing: f64,
}

impl Default for LawnmowerParams {
    fn default() -> Self {
        Self {
            legs: 4,
            leg_length: 60.0,
            spacing: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryParams {
    pub spiral: SpiralParams,
    pub zigzag: ZigzagParams,
    pub lawnmower: LawnmowerParams,
}

/// Waypoints from `start` (included as the first entry) to the goal.
pub fn build_trajectory(kind: TrajectoryKind, params: &TrajectoryParams, start: [f64; 3], surge: f64) -> Vec<Waypoint> {
    let [n0, e0, d0] = start;
    let wp = |n: f64, e: f64, d: f64| Waypoint { surge_ref: surge, ..Waypoint::new(n, e, d) };
    let mut out = vec![wp(n0, e0, d0)];
    match kind {
        TrajectoryKind::Spiral => {
            let p = &params.spiral;
            let count = (p.turns * p.waypoints_per_turn as f64).round() as usize;
            for k in 1..=count {
                let frac = k as f64 / count as f64;
                let phi = frac * p.turns * TAU;
                let d = d0 + (p.end_depth - d0) * frac;
                let mut w = wp(n0 + p.radius * phi.sin(), e0 + p.radius * (1.0 - phi.cos()), d);
                w.heading = Some(crate::frames::wrap_angle(phi));
                out.push(w);
            }
        }
        TrajectoryKind::Zigzag => {
            let p = &params.zigzag;
            let (mut n, mut e) = (n0, e0);
            for i in 0..p.legs {
                let a = if i % 2 == 0 { p.angle } else { -p.angle };
                n += p.leg_length * a.cos();
                e += p.leg_length * a.sin();
                out.push(wp(n, e, d0));
            }
        }
        TrajectoryKind::Lawnmower => {
            let p = &params.lawnmower;
            for i in 0..p.legs {
                let e = e0 + p.spacing * i as f64;
                let far = if i % 2 == 0 { n0 + p.leg_length } else { n0 };
                if i > 0 {
                    let near = if i % 2 == 0 { n0 } else { n0 + p.leg_length };
                    out.push(wp(near, e, d0));
                }
                out.push(wp(far, e, d0));
            }
        }
    }
    out
}

/// Length of the straight-line polyline through the waypoints.
pub fn polyline_length(wps: &[Waypoint]) -> f64 {
    wps.windows(2).map(|w| (w[1].position() - w[0].position()).norm()).sum()
}
