use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::gp::GpModel;

/// Number of stratified min-value samples.
pub const MIN_VALUE_SAMPLES: usize = 16;

/// Posterior variance below which a point carries no information.
const VAR_FLOOR: f64 = 1e-12;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Surrogates entering the acquisition. `constraint` holds the regression
/// GP of `g` with its threshold; `crash` is a regression GP on labels
/// `+1` (completed) and `-1` (crashed).
#[derive(Debug, Clone, Copy)]
pub struct CmesModels<'a> {
    pub objective: &'a GpModel,
    pub constraint: Option<(&'a GpModel, f64)>,
    pub crash: Option<&'a GpModel>,
}

impl CmesModels<'_> {
    /// Probability that `x` satisfies the constraint and does not crash.
    pub fn probability_of_feasibility(&self, x: &[f64]) -> f64 {
        let mut p = 1.0;
        if let Some((gp, g_max)) = self.constraint {
            let (m, v) = gp.predict(x);
            p *= if v > VAR_FLOOR {
                norm_cdf((g_max - m) / v.sqrt())
            } else if m <= g_max {
                1.0
            } else {
                0.0
            };
        }
        if let Some(gp) = self.crash {
            let (m, v) = gp.predict(x);
            p *= norm_cdf(m / (1.0 + v).sqrt());
        }
        p
    }
}

/// Constrained max-value entropy search for minimization.
///
/// Realizations of the feasible minimum `y*` follow a Gumbel fit to
/// `P(y* > z) = prod_i [1 - PoF_i Phi((z - mu_i) / s_i)]` over a candidate
/// set, drawn at stratified quantiles and capped at the incumbent.
#[derive(Debug, Clone)]
pub struct Cmes<'a> {
    pub models: CmesModels<'a>,
    pub min_samples: Vec<f64>,
}

impl<'a> Cmes<'a> {
    pub fn new(models: CmesModels<'a>, candidates: &[Vec<f64>], incumbent: Option<f64>) -> Self {
        let stats: Vec<(f64, f64, f64)> = candidates
            .iter()
            .map(|x| {
                let (m, v) = models.objective.predict(x);
                (m, v.max(0.0).sqrt(), models.probability_of_feasibility(x))
            })
            .collect();
        let lo = stats.iter().map(|(m, s, _)| m - 8.0 * s).fold(f64::INFINITY, f64::min);
        let hi = incumbent.unwrap_or_else(|| stats.iter().map(|s| s.0).fold(f64::INFINITY, f64::min));
        let lo = lo.min(hi - 1e-9);
        let survival = |z: f64| -> f64 {
            stats
                .iter()
                .map(|(m, s, pof)| {
                    let below = if *s > 0.0 {
                        norm_cdf((z - m) / s)
                    } else if z >= *m {
                        1.0
                    } else {
                        0.0
                    };
                    (1.0 - pof * below).max(0.0).ln()
                })
                .sum::<f64>()
                .exp()
        };
        let quantile = |p: f64| -> f64 {
            if survival(hi) >= p {
                return hi;
            }
            let (mut a, mut b) = (lo, hi);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if survival(mid) > p {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };
        let (z25, z50, z75) = (quantile(0.25), quantile(0.5), quantile(0.75));
        let ll = |p: f64| (-p.ln()).ln();
        let scale = ((z25 - z75) / (ll(0.25) - ll(0.75))).max(1e-12);
        let loc = z50 - scale * ll(0.5);
        let min_samples = (0..MIN_VALUE_SAMPLES)
            .map(|k| {
                let p = (k as f64 + 0.5) / MIN_VALUE_SAMPLES as f64;
                (loc + scale * ll(p)).min(hi)
            })
            .collect();
        Self { models, min_samples }
    }

    /// Acquisition value at `x`; zero where the objective is known.
    pub fn value(&self, x: &[f64]) -> f64 {
        let (m, v) = self.models.objective.predict(x);
        if v <= VAR_FLOOR {
            return 0.0;
        }
        let s = v.sqrt();
        let gain = self
            .min_samples
            .iter()
            .map(|ystar| {
                let gamma = ((m - ystar) / s).max(-35.0);
                let cdf = norm_cdf(gamma);
                (gamma * norm_pdf(gamma) / (2.0 * cdf) - cdf.ln()).max(0.0)
            })
            .sum::<f64>()
            / self.min_samples.len() as f64;
        gain * self.models.probability_of_feasibility(x)
    }
}

/// Convenience wrapper building the min-value samples and scoring `x`.
pub fn acquisition_cmes(models: CmesModels<'_>, candidates: &[Vec<f64>], incumbent: Option<f64>, x: &[f64]) -> f64 {
    Cmes::new(models, candidates, incumbent).value(x)
}
