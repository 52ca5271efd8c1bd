use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// First-order Gauss-Markov water current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaterCurrentParams {
    /// Inverse correlation time, 1/s.
    pub mu: f64,
    /// White-noise intensity per NED axis, m/s.
    pub sigma_w: Vector3<f64>,
    /// Saturation per NED axis, m/s.
    pub v_max: Vector3<f64>,
}

impl Default for WaterCurrentParams {
    fn default() -> Self {
        Self {
            mu: 0.2,
            sigma_w: Vector3::new(0.05, 0.05, 0.01),
            v_max: Vector3::new(0.20, 0.20, 0.05),
        }
    }
}

impl WaterCurrentParams {
    pub fn still() -> Self {
        Self {
            sigma_w: Vector3::zeros(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WaterCurrentState {
    /// NED current velocity, m/s.
    pub v_c_n: Vector3<f64>,
}

/// Euler-Maruyama step followed by saturation to `+-v_max`.
pub fn current_step(
    state: &WaterCurrentState,
    params: &WaterCurrentParams,
    dt: f64,
    noise: &Vector3<f64>,
) -> WaterCurrentState {
    let v = state.v_c_n;
    let next = v - v * (params.mu * dt) + params.sigma_w.component_mul(noise) * dt.sqrt();
    WaterCurrentState {
        v_c_n: Vector3::from_fn(|i, _| next[i].clamp(-params.v_max[i], params.v_max[i])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_decay_is_exponential() {
        let p = WaterCurrentParams::default();
        let mut s = WaterCurrentState {
            v_c_n: Vector3::new(0.1, 0.0, 0.0),
        };
        let dt = 0.001;
        for _ in 0..5000 {
            s = current_step(&s, &p, dt, &Vector3::zeros());
        }
        let expected = 0.1 * (-1.0f64).exp();
        assert!((s.v_c_n.x - expected).abs() / expected < 0.01);
    }

    #[test]
    fn saturates_exactly() {
        let p = WaterCurrentParams::default();
        let s = WaterCurrentState {
            v_c_n: Vector3::new(5.0, -5.0, 1.0),
        };
        let next = current_step(&s, &p, 0.01, &Vector3::zeros());
        assert_eq!(next.v_c_n, Vector3::new(0.2, -0.2, 0.05));
    }
}
