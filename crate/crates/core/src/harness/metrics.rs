use std::collections::HashMap;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::frames::EulerAngles;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rms_pos_err: f64,
    /// Degrees.
    pub rms_euler_err: f64,
    pub max_tracking_err: f64,
    pub goal_reached: bool,
    pub crash: bool,
    pub sim_time: f64,
    /// Excluded from serialized output, which must be reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl RunMetrics {
    pub fn crashed(sim_time: f64, wall_time: f64) -> Self {
        Self {
            rms_pos_err: f64::NAN,
            rms_euler_err: f64::NAN,
            max_tracking_err: f64::NAN,
            goal_reached: false,
            crash: true,
            sim_time,
            wall_time,
        }
    }
}

/// RMS of `|estimate − truth|`.
pub fn rms_position_error(truth: &[Vector3<f64>], est: &[Vector3<f64>]) -> f64 {
    let n = truth.len().min(est.len());
    if n == 0 {
        return 0.0;
    }
    let s: f64 = truth.iter().zip(est).map(|(a, b)| (a - b).norm_squared()).sum();
    (s / n as f64).sqrt()
}

/// RMS over time of the norm of the wrapped per-axis Euler error, degrees.
pub fn rms_euler_error(truth: &[EulerAngles], est: &[EulerAngles]) -> f64 {
    let n = truth.len().min(est.len());
    if n == 0 {
        return 0.0;
    }
    let s: f64 = truth.iter().zip(est).map(|(a, b)| b.wrapped_difference(a).norm_squared()).sum();
    (s / n as f64).sqrt().to_degrees()
}

pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    let t = if l2 > 0.0 { ((p - a).dot(&ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Nearest-segment queries on a polyline, bucketed on a horizontal grid.
pub struct PathIndex {
    points: Vec<Vector3<f64>>,
    cell: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
    max_ring: i64,
}

impl PathIndex {
    pub fn new(points: Vec<Vector3<f64>>, cell: f64) -> Self {
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let key = |v: f64| (v / cell).floor() as i64;
        let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
        for i in 0..points.len().saturating_sub(1) {
            let (a, b) = (points[i], points[i + 1]);
            for k0 in key(a.x.min(b.x))..=key(a.x.max(b.x)) {
                for k1 in key(a.y.min(b.y))..=key(a.y.max(b.y)) {
                    grid.entry((k0, k1)).or_default().push(i);
                }
            }
        }
        for p in &points {
            lo = lo.inf(&p.xy());
            hi = hi.sup(&p.xy());
        }
        let max_ring = if points.is_empty() { 0 } else { ((hi - lo).amax() / cell).ceil() as i64 + 2 };
        Self { points, cell, grid, max_ring }
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        match self.points.len() {
            0 => return f64::INFINITY,
            1 => return (p - self.points[0]).norm(),
            _ => {}
        }
        let c = ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64);
        let mut best = f64::INFINITY;
        // Cells outside the world bounding box are empty; clamp the ring
        // search to reach the path from far queries.
        let offset = {
            let first = &self.points[0];
            (((p.xy() - first.xy()).amax()) / self.cell).ceil() as i64
        };
        for r in 0..=(self.max_ring + offset.max(0)) {
            if best < (r as f64 - 1.0) * self.cell {
                break;
            }
            for i in -r..=r {
                for j in -r..=r {
                    if i.abs() != r && j.abs() != r {
                        continue;
                    }
                    if let Some(segs) = self.grid.get(&(c.0 + i, c.1 + j)) {
                        for &s in segs {
                            best = best.min(point_segment_distance(p, &self.points[s], &self.points[s + 1]));
                        }
                    }
                }
            }
        }
        best
    }
}

/// Maximum over `track` of the distance to the polyline `path`.
pub fn max_tracking_error(track: &[Vector3<f64>], path: &[Vector3<f64>]) -> f64 {
    let index = PathIndex::new(path.to_vec(), 2.0);
    track.iter().map(|p| index.distance(p)).fold(0.0, f64::max)
}
