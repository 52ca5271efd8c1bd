use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HydroParams;

/// Ranges of the model-mismatch generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MismatchBounds {
    pub factor_min: f64,
    pub factor_max: f64,
    /// Half-width of the uniform buoyancy perturbation as a fraction of the
    /// weight.
    pub buoyancy_fraction: f64,
}

impl Default for MismatchBounds {
    fn default() -> Self {
        Self {
            factor_min: 0.7,
            factor_max: 1.3,
            buoyancy_fraction: 0.02,
        }
    }
}

impl MismatchBounds {
    pub fn none() -> Self {
        Self {
            factor_min: 1.0,
            factor_max: 1.0,
            buoyancy_fraction: 0.0,
        }
    }
}

/// Perturbs the diagonal added mass and damping entries by independent
/// log-uniform factors and shifts the buoyancy, deterministically per seed.
pub fn apply_model_mismatch(params: &HydroParams, bounds: &MismatchBounds, seed: u64) -> HydroParams {
    let mut rng = crate::rng::stream(seed, 0x6d69_736d);
    let (lo, hi) = (bounds.factor_min.ln(), bounds.factor_max.ln());
    let factor = |rng: &mut crate::rng::Rng| {
        if hi > lo {
            rng.random_range(lo..hi).exp()
        } else {
            1.0
        }
    };
    let mut out = params.clone();
    for i in 0..6 {
        out.m_a[(i, i)] *= factor(&mut rng);
    }
    for i in 0..6 {
        out.d_lin[(i, i)] *= factor(&mut rng);
    }
    let w = bounds.buoyancy_fraction * params.weight;
    if w > 0.0 {
        out.buoyancy += rng.random_range(-w..w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let p = HydroParams::nominal();
        let b = MismatchBounds::default();
        assert_eq!(apply_model_mismatch(&p, &b, 7), apply_model_mismatch(&p, &b, 7));
        assert_ne!(apply_model_mismatch(&p, &b, 7), apply_model_mismatch(&p, &b, 8));
    }

    #[test]
    fn degenerate_bounds_leave_params_unchanged() {
        let p = HydroParams::nominal();
        assert_eq!(apply_model_mismatch(&p, &MismatchBounds::none(), 3), p);
    }

    #[test]
    fn perturbed_params_stay_valid() {
        let p = HydroParams::nominal();
        let b = MismatchBounds::default();
        for seed in 0..1000 {
            let q = apply_model_mismatch(&p, &b, seed);
            q.validate().unwrap();
            for i in 0..6 {
                let f = q.d_lin[(i, i)] / p.d_lin[(i, i)];
                assert!((0.7..=1.3).contains(&f));
            }
            assert!((q.buoyancy - q.weight).abs() <= 0.02 * q.weight);
        }
    }
}
