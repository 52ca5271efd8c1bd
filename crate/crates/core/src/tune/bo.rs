use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::cmes::{Cmes, CmesModels};
use super::gp::{gp_fit, GpFitOptions, GpModel, SeArdKernel};
use super::simplex::nelder_mead;
use super::{clamp_to_box, OptBudget, OptResult, Outcome, Problem, Recorder, TuneError};
use crate::rng::{stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoParams {
    /// Random candidates scored per iteration.
    pub candidates: usize,
    /// Best candidates polished by Nelder-Mead.
    pub refine_top: usize,
    pub refine_iters: usize,
    /// Model `ln J` instead of `J`. Requires `J > 0`.
    pub log_objective: bool,
    /// Crash virtual value = worst completed target + `crash_std_factor` std.
    pub crash_std_factor: f64,
    /// Full multi-start hyperparameter refit period, in iterations.
    pub refit_every: usize,
}

impl Default for BoParams {
    fn default() -> Self {
        Self {
            candidates: 1000,
            refine_top: 3,
            refine_iters: 40,
            log_objective: false,
            crash_std_factor: 3.0,
            refit_every: 10,
        }
    }
}

/// Latin hypercube of `n` points in the unit cube of dimension `dim`.
pub fn latin_hypercube(n: usize, dim: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (i, p) in perm.into_iter().enumerate() {
            pts[i][d] = (p as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

struct Surrogates {
    objective: GpModel,
    constraint: Option<GpModel>,
    crash: Option<GpModel>,
    incumbent: Option<f64>,
}

#[derive(Default)]
struct Warm {
    objective: Option<SeArdKernel>,
    constraint: Option<SeArdKernel>,
    crash: Option<SeArdKernel>,
}

fn fit(
    x: Vec<Vec<f64>>,
    y: &[f64],
    warm: &mut Option<SeArdKernel>,
    full: bool,
    seed: u64,
) -> Option<GpModel> {
    let opts = GpFitOptions {
        restarts: if full || warm.is_none() { 4 } else { 0 },
        iterations: if full || warm.is_none() { 60 } else { 15 },
        seed,
        ..GpFitOptions::default()
    };
    let gp = gp_fit(x, y, &opts, warm.as_ref()).ok()?;
    *warm = Some(gp.kernel.clone());
    Some(gp)
}

fn build_surrogates(
    u: &[Vec<f64>],
    outcomes: &[Outcome],
    g_max: Option<f64>,
    params: &BoParams,
    warm: &mut Warm,
    full: bool,
    seed: u64,
) -> Option<Surrogates> {
    let tf = |j: f64| if params.log_objective { j.max(1e-300).ln() } else { j };
    let done: Vec<usize> = (0..outcomes.len()).filter(|&i| !outcomes[i].crashed && outcomes[i].j.is_some()).collect();
    if done.len() < 2 {
        return None;
    }
    let yd: Vec<f64> = done.iter().map(|&i| tf(outcomes[i].j.unwrap())).collect();
    let n = yd.len() as f64;
    let mean = yd.iter().sum::<f64>() / n;
    let std = (yd.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let worst = yd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let virtual_value = worst + params.crash_std_factor * std;
    let y: Vec<f64> = outcomes
        .iter()
        .map(|o| match (o.crashed, o.j) {
            (false, Some(j)) => tf(j),
            _ => virtual_value,
        })
        .collect();
    let objective = fit(u.to_vec(), &y, &mut warm.objective, full, seed)?;

    let constraint = match g_max {
        Some(_) => {
            let gi: Vec<usize> = done.iter().copied().filter(|&i| outcomes[i].g.is_some()).collect();
            let xs: Vec<Vec<f64>> = gi.iter().map(|&i| u[i].clone()).collect();
            let gs: Vec<f64> = gi.iter().map(|&i| outcomes[i].g.unwrap()).collect();
            fit(xs, &gs, &mut warm.constraint, full, seed ^ 1)
        }
        None => None,
    };
    let crash = if done.len() < outcomes.len() {
        let labels: Vec<f64> = outcomes.iter().map(|o| if o.crashed { -1.0 } else { 1.0 }).collect();
        fit(u.to_vec(), &labels, &mut warm.crash, full, seed ^ 2)
    } else {
        None
    };
    let incumbent = outcomes
        .iter()
        .filter(|o| o.is_feasible(g_max))
        .map(|o| tf(o.j.unwrap()))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    Some(Surrogates {
        objective,
        constraint,
        crash,
        incumbent,
    })
}

fn propose(s: &Surrogates, g_max: Option<f64>, dim: usize, params: &BoParams, rng: &mut Rng) -> Vec<f64> {
    let models = CmesModels {
        objective: &s.objective,
        constraint: match (&s.constraint, g_max) {
            (Some(gp), Some(g)) => Some((gp, g)),
            _ => None,
        },
        crash: s.crash.as_ref(),
    };
    let cands: Vec<Vec<f64>> = (0..params.candidates.max(1))
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let acq = Cmes::new(models, &cands, s.incumbent);
    let mut scored: Vec<(f64, usize)> = cands.iter().enumerate().map(|(i, c)| (acq.value(c), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let lo = vec![0.0; dim];
    let hi = vec![1.0; dim];
    let mut best = (scored[0].0, cands[scored[0].1].clone());
    for &(_, i) in scored.iter().take(params.refine_top) {
        let neg = |x: &[f64]| {
            let mut c = x.to_vec();
            clamp_to_box(&mut c, &lo, &hi);
            -acq.value(&c)
        };
        let (mut x, _) = nelder_mead(neg, &cands[i], &vec![0.05; dim], params.refine_iters, 1e-12);
        clamp_to_box(&mut x, &lo, &hi);
        let v = acq.value(&x);
        if v > best.0 {
            best = (v, x);
        }
    }
    best.1
}

/// Gaussian-process Bayesian optimization with constrained max-value
/// entropy search.
///
/// Evaluations are strictly sequential. Crashed evaluations enter the
/// objective surrogate as virtual points and train a crash classifier.
pub fn bo_minimize<P: Problem + ?Sized>(
    problem: &P,
    budget: &OptBudget,
    params: &BoParams,
    seed: u64,
) -> Result<OptResult, TuneError> {
    budget.validate()?;
    let (lo, hi) = (problem.lower(), problem.upper());
    let dim = lo.len();
    let g_max = problem.g_max();
    let mut rng = stream(seed, 0x626f);
    let to_x = |u: &[f64]| -> Vec<f64> {
        let mut x: Vec<f64> = (0..dim).map(|d| lo[d] + u[d] * (hi[d] - lo[d])).collect();
        clamp_to_box(&mut x, &lo, &hi);
        x
    };
    let mut rec = Recorder::new(g_max);
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(budget.max_evals);
    let mut outcomes: Vec<Outcome> = Vec::with_capacity(budget.max_evals);
    for u in latin_hypercube(budget.init_design_size, dim, &mut rng) {
        let x = to_x(&u);
        let o = problem.evaluate(&x);
        rec.push(x, o);
        us.push(u);
        outcomes.push(o);
    }
    let mut warm = Warm::default();
    let mut iter = 0usize;
    while rec.len() < budget.max_evals {
        let full = iter.is_multiple_of(params.refit_every.max(1));
        let u = match build_surrogates(&us, &outcomes, g_max, params, &mut warm, full, seed.wrapping_add(iter as u64)) {
            Some(s) => propose(&s, g_max, dim, params, &mut rng),
            None => (0..dim).map(|_| rng.random::<f64>()).collect(),
        };
        let x = to_x(&u);
        let o = problem.evaluate(&x);
        rec.push(x, o);
        us.push(u);
        outcomes.push(o);
        iter += 1;
    }
    rec.finish()
}
