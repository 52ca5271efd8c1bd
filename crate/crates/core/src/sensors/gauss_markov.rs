use serde::{Deserialize, Serialize};

/// Error model of one sensor axis: white noise, first-order Gauss-Markov
/// bias instability and random walk, plus a turn-on bias and quantization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmErrorParams {
    /// White-noise density, unit/sqrt(s).
    pub n: f64,
    /// Stationary standard deviation of the Gauss-Markov bias, unit.
    pub b: f64,
    /// Random-walk intensity, unit*sqrt(1/s).
    pub k: f64,
    /// Correlation time of the Gauss-Markov bias, s.
    pub corr_time: f64,
    pub turn_on_bias_std: f64,
    pub quantization_step: f64,
}

impl Default for GmErrorParams {
    fn default() -> Self {
        Self::zero()
    }
}

impl GmErrorParams {
    pub fn zero() -> Self {
        Self {
            n: 0.0,
            b: 0.0,
            k: 0.0,
            corr_time: 100.0,
            turn_on_bias_std: 0.0,
            quantization_step: 0.0,
        }
    }

    /// Per-sample white-noise standard deviation at step `dt`.
    pub fn white_std(&self, dt: f64) -> f64 {
        self.n / dt.sqrt()
    }

    /// Spectral density driving the bias in a random-walk model: the
    /// random-walk intensity plus the Gauss-Markov driving noise.
    pub fn bias_drive_density(&self) -> f64 {
        let gm = if self.corr_time > 0.0 {
            2.0 * self.b * self.b / self.corr_time
        } else {
            0.0
        };
        self.k * self.k + gm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GmErrorState {
    pub bias: f64,
    pub walk: f64,
}

/// Advances the correlated error states by `dt` and returns the total error
/// `z_N + z_B + z_K` sampled with three standard normal draws.
pub fn gm_error_step(
    state: &GmErrorState,
    params: &GmErrorParams,
    dt: f64,
    noise: &[f64; 3],
) -> (f64, GmErrorState) {
    let white = params.white_std(dt) * noise[0];
    let bias = if params.b > 0.0 && params.corr_time > 0.0 {
        let phi = (-dt / params.corr_time).exp();
        phi * state.bias + params.b * (1.0 - phi * phi).sqrt() * noise[1]
    } else {
        0.0
    };
    let walk = state.walk + params.k * dt.sqrt() * noise[2];
    (white + bias + walk, GmErrorState { bias, walk })
}
