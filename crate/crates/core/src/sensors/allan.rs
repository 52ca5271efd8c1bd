use serde::{Deserialize, Serialize};

use super::{GmErrorParams, SensorError};
use crate::par::Execution;
use crate::tune::{nelder_mead, pso_minimize, FnProblem, OptBudget, Outcome, PsoParams};

const MIN_SAMPLES: usize = 1000;
const POINTS_PER_DECADE: f64 = 10.0;
/// Terms contributing less than this fraction of the model variance at
/// every tau are dropped from a fit.
const PRUNE_FRACTION: f64 = 0.01;
/// Largest accepted RMS of the natural-log variance residual.
const FIT_RESIDUAL_MAX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllanPoint {
    pub tau: f64,
    pub adev: f64,
}

/// Overlapping Allan deviation at log-spaced cluster sizes from 2 samples
/// to a fifth of the record.
pub fn allan_deviation(series: &[f64], fs: f64) -> Result<Vec<AllanPoint>, SensorError> {
    let n = series.len();
    if n < MIN_SAMPLES {
        return Err(SensorError::TooShort(n));
    }
    // Offset removal keeps the running sum well conditioned.
    let y0 = series[0];
    let mut x = Vec::with_capacity(n + 1);
    x.push(0.0);
    let mut acc = 0.0;
    for &y in series {
        acc += y - y0;
        x.push(acc);
    }

    let m_max = n / 5;
    let mut out = Vec::new();
    let mut last = 0usize;
    let decades = (m_max as f64 / 2.0).log10();
    let steps = (decades * POINTS_PER_DECADE).ceil() as usize;
    for i in 0..=steps {
        let m = (2.0 * 10f64.powf(i as f64 / POINTS_PER_DECADE)).round() as usize;
        let m = m.min(m_max);
        if m <= last {
            continue;
        }
        last = m;
        let terms = n - 2 * m + 1;
        let mut s = 0.0;
        for k in 0..terms {
            let d = x[k + 2 * m] - 2.0 * x[k + m] + x[k];
            s += d * d;
        }
        let mf = m as f64;
        let avar = s / (2.0 * mf * mf * terms as f64);
        out.push(AllanPoint {
            tau: mf / fs,
            adev: avar.sqrt(),
        });
    }
    Ok(out)
}

/// Analytic Allan variance of white noise, first-order Gauss-Markov bias
/// and random walk.
pub fn allan_variance_model(p: &GmErrorParams, tau: f64) -> f64 {
    let [w, gm, rw] = model_terms(p.n, p.b, p.corr_time, p.k, tau);
    w + gm + rw
}

fn model_terms(n: f64, b: f64, t: f64, k: f64, tau: f64) -> [f64; 3] {
    let white = n * n / tau;
    let gm = if b > 0.0 && t > 0.0 {
        let r = tau / t;
        let bracket = if r < 1e-4 {
            // Series expansion avoids cancellation for tau << T.
            r * r / 3.0 - r * r * r / 4.0
        } else {
            1.0 - (3.0 - 4.0 * (-r).exp() + (-2.0 * r).exp()) / (2.0 * r)
        };
        2.0 * b * b / r * bracket
    } else {
        0.0
    };
    let walk = k * k * tau / 3.0;
    [white, gm, walk]
}

/// Fits `(N, B, T, K)` to an Allan deviation curve by minimizing the weighted squared
/// log residual of the variance, first with the particle swarm and then
/// with a simplex polish. Terms below one percent of the model everywhere
/// are set to zero.
pub fn fit_gm_params(curve: &[AllanPoint]) -> Result<GmErrorParams, SensorError> {
    if !curve.is_empty() && curve.iter().all(|p| p.adev == 0.0) {
        return Ok(GmErrorParams {
            corr_time: 0.0,
            ..GmErrorParams::zero()
        });
    }
    let pts: Vec<AllanPoint> = curve
        .iter()
        .copied()
        .filter(|p| p.tau > 0.0 && p.adev > 0.0 && p.adev.is_finite())
        .collect();
    let (tmin, tmax) = pts.iter().fold((f64::INFINITY, 0f64), |(a, b), p| (a.min(p.tau), b.max(p.tau)));
    if pts.len() < 3 || tmax / tmin < 100.0 * (1.0 - 1e-9) {
        return Err(SensorError::NarrowCurve);
    }
    let (amin, amax) = pts.iter().fold((f64::INFINITY, 0f64), |(a, b), p| (a.min(p.adev), b.max(p.adev)));

    let l = f64::log10;
    // No single term may exceed the largest observed deviation by much.
    let lower = vec![
        l(amin * tmin.sqrt()) - 3.0,
        l(amin) - 3.0,
        l(tmin) - 1.0,
        l(amin * (3.0 / tmax).sqrt()) - 3.0,
    ];
    let upper = vec![
        l(amax * tmax.sqrt()) + 1.0,
        l(amax) + 1.0,
        l(tmax) + 1.0,
        l(amax * (3.0 / tmin).sqrt()) + 1.0,
    ];

    // Weights follow the number of independent clusters, which falls as 1/tau.
    let wsum: f64 = pts.iter().map(|p| tmin / p.tau).sum();
    let cost = |th: &[f64]| -> f64 {
        let (n, b, t, k) = unpack(th);
        pts.iter()
            .map(|p| {
                let m: f64 = model_terms(n, b, t, k, p.tau).iter().sum();
                let r = m.ln() - 2.0 * p.adev.ln();
                tmin / p.tau * r * r
            })
            .sum::<f64>()
            / wsum
    };

    let problem = FnProblem::new(lower.clone(), upper.clone(), |th: &[f64]| Outcome::value(cost(th)));
    let budget = OptBudget::with_max_evals(15 * 120);
    let swarm = pso_minimize(&problem, &budget, &PsoParams::default(), 0x616c6c, Execution::Sequential)
        .expect("unconstrained problem always has a feasible point");
    let boxed = |th: &[f64]| {
        if th.iter().zip(&lower).zip(&upper).all(|((v, a), b)| v >= a && v <= b) {
            cost(th)
        } else {
            f64::INFINITY
        }
    };
    let (th, c) = nelder_mead(boxed, &swarm.best_x, &[0.1; 4], 2000, 1e-14);
    let (th, c) = if c <= swarm.best.j.unwrap() { (th, c) } else { (swarm.best_x, swarm.best.j.unwrap()) };

    let rms = c.sqrt();
    if !(rms <= FIT_RESIDUAL_MAX) {
        return Err(SensorError::FitFailed(rms));
    }
    let (mut n, mut b, t, mut k) = unpack(&th);
    let mut keep = [false; 3];
    for p in &pts {
        let terms = model_terms(n, b, t, k, p.tau);
        let total: f64 = terms.iter().sum();
        for i in 0..3 {
            keep[i] |= terms[i] >= PRUNE_FRACTION * total;
        }
    }
    if !keep[0] {
        n = 0.0;
    }
    if !keep[1] {
        b = 0.0;
    }
    if !keep[2] {
        k = 0.0;
    }
    Ok(GmErrorParams {
        n,
        b,
        k,
        corr_time: t,
        turn_on_bias_std: 0.0,
        quantization_step: 0.0,
    })
}

fn unpack(th: &[f64]) -> (f64, f64, f64, f64) {
    (10f64.powf(th[0]), 10f64.powf(th[1]), 10f64.powf(th[2]), 10f64.powf(th[3]))
}
