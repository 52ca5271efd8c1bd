use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{clamp_to_box, OptBudget, OptResult, Outcome, Problem, Recorder, TuneError};
use crate::par::{map_slice, Execution};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub swarm: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit as a fraction of each box width.
    pub v_max_fraction: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            swarm: 15,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            v_max_fraction: 0.2,
        }
    }
}

struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best: Outcome,
}

/// Global-best particle swarm with feasibility-first comparisons.
///
/// Each generation is evaluated as a batch on `exec`; the last generation
/// is truncated so no more than `budget.max_evals` evaluations are made.
pub fn pso_minimize<P: Problem + ?Sized>(
    problem: &P,
    budget: &OptBudget,
    params: &PsoParams,
    seed: u64,
    exec: Execution,
) -> Result<OptResult, TuneError> {
    if budget.max_evals == 0 || params.swarm == 0 {
        return Err(TuneError::InvalidBudget("empty swarm or budget".into()));
    }
    let (lo, hi) = (problem.lower(), problem.upper());
    let dim = lo.len();
    let g_max = problem.g_max();
    let width: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
    let vmax: Vec<f64> = width.iter().map(|w| w * params.v_max_fraction).collect();
    let mut rng = stream(seed, 0x70736f);
    let mut rec = Recorder::new(g_max);

    let n0 = params.swarm.min(budget.max_evals);
    let init: Vec<Vec<f64>> = (0..n0)
        .map(|_| (0..dim).map(|d| rng.random_range(lo[d]..=hi[d])).collect())
        .collect();
    let outcomes = map_slice(&init, exec, |x| problem.evaluate(x));
    let mut swarm: Vec<Particle> = Vec::with_capacity(n0);
    for (x, o) in init.into_iter().zip(outcomes) {
        rec.push(x.clone(), o);
        let v = (0..dim)
            .map(|d| rng.random_range(-vmax[d]..=vmax[d]) * 0.5)
            .collect();
        swarm.push(Particle {
            best_x: x.clone(),
            x,
            v,
            best: o,
        });
    }
    let mut gbest = best_of(&swarm, g_max);

    while rec.len() < budget.max_evals {
        let batch = params.swarm.min(budget.max_evals - rec.len());
        let g = swarm[gbest].best_x.clone();
        for p in swarm.iter_mut().take(batch) {
            for d in 0..dim {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let v = params.inertia * p.v[d]
                    + params.cognitive * r1 * (p.best_x[d] - p.x[d])
                    + params.social * r2 * (g[d] - p.x[d]);
                p.v[d] = v.clamp(-vmax[d], vmax[d]);
                p.x[d] += p.v[d];
                if p.x[d] < lo[d] || p.x[d] > hi[d] {
                    p.v[d] = 0.0;
                }
            }
            clamp_to_box(&mut p.x, &lo, &hi);
        }
        let xs: Vec<Vec<f64>> = swarm.iter().take(batch).map(|p| p.x.clone()).collect();
        let outcomes = map_slice(&xs, exec, |x| problem.evaluate(x));
        for (p, o) in swarm.iter_mut().zip(outcomes) {
            rec.push(p.x.clone(), o);
            if o.compare(&p.best, g_max).is_lt() {
                p.best = o;
                p.best_x = p.x.clone();
            }
        }
        gbest = best_of(&swarm, g_max);
    }
    rec.finish()
}

fn best_of(swarm: &[Particle], g_max: Option<f64>) -> usize {
    let mut b = 0;
    for (i, p) in swarm.iter().enumerate() {
        if p.best.compare(&swarm[b].best, g_max).is_lt() {
            b = i;
        }
    }
    b
}
