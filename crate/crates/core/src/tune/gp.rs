use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;

use super::TuneError;
use crate::rng::{stream, Rng};

/// Diagonal jitter added to every Gram matrix.
pub const JITTER: f64 = 1e-8;

/// Squared-exponential ARD kernel in log parametrization.
#[derive(Debug, Clone, PartialEq)]
pub struct SeArdKernel {
    pub log_lengthscales: Vec<f64>,
    pub log_signal_var: f64,
    pub log_noise_var: f64,
}

impl SeArdKernel {
    pub fn new(lengthscales: &[f64], signal_var: f64, noise_var: f64) -> Self {
        Self {
            log_lengthscales: lengthscales.iter().map(|l| l.ln()).collect(),
            log_signal_var: signal_var.ln(),
            log_noise_var: noise_var.max(1e-300).ln(),
        }
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscales.len()
    }

    fn theta(&self) -> Vec<f64> {
        let mut t = self.log_lengthscales.clone();
        t.push(self.log_signal_var);
        t.push(self.log_noise_var);
        t
    }

    fn from_theta(t: &[f64]) -> Self {
        let d = t.len() - 2;
        Self {
            log_lengthscales: t[..d].to_vec(),
            log_signal_var: t[d],
            log_noise_var: t[d + 1],
        }
    }

    /// Noise-free covariance `k(a, b)`.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        se(a, b, &self.inv_lengthscales(), self.log_signal_var.exp())
    }

    fn inv_lengthscales(&self) -> Vec<f64> {
        self.log_lengthscales.iter().map(|l| (-l).exp()).collect()
    }

    /// Noise-free symmetric kernel matrix.
    fn kse_matrix(&self, x: &[Vec<f64>]) -> DMatrix<f64> {
        let n = x.len();
        let (il, sf2) = (self.inv_lengthscales(), self.log_signal_var.exp());
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            k[(j, j)] = sf2;
            for i in 0..j {
                let v = se(&x[i], &x[j], &il, sf2);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    fn gram(&self, x: &[Vec<f64>]) -> DMatrix<f64> {
        let mut k = self.kse_matrix(x);
        let sn2 = self.log_noise_var.exp() + JITTER;
        for i in 0..x.len() {
            k[(i, i)] += sn2;
        }
        k
    }
}

fn se(a: &[f64], b: &[f64], inv_l: &[f64], sf2: f64) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(inv_l).map(|((x, y), il)| ((x - y) * il).powi(2)).sum();
    sf2 * (-0.5 * r2).exp()
}

/// Bounds of the hyperparameter search in log space, for unit-cube inputs
/// and standardized targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperBounds {
    pub log_lengthscale: (f64, f64),
    pub log_signal_var: (f64, f64),
    pub log_noise_var: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            log_lengthscale: (0.01f64.ln(), 10f64.ln()),
            log_signal_var: (0.05f64.ln(), 20f64.ln()),
            log_noise_var: (1e-8f64.ln(), 1f64.ln()),
        }
    }
}

impl HyperBounds {
    fn clamp(&self, t: &mut [f64]) {
        let d = t.len() - 2;
        for v in &mut t[..d] {
            *v = v.clamp(self.log_lengthscale.0, self.log_lengthscale.1);
        }
        t[d] = t[d].clamp(self.log_signal_var.0, self.log_signal_var.1);
        t[d + 1] = t[d + 1].clamp(self.log_noise_var.0, self.log_noise_var.1);
    }

    fn sample(&self, d: usize, rng: &mut Rng) -> Vec<f64> {
        let mut t: Vec<f64> = (0..d).map(|_| rng.random_range(self.log_lengthscale.0..self.log_lengthscale.1)).collect();
        t.push(rng.random_range(self.log_signal_var.0..self.log_signal_var.1));
        t.push(rng.random_range(self.log_noise_var.0..self.log_noise_var.1));
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpFitOptions {
    /// Random starts in addition to the default and warm starts.
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub bounds: HyperBounds,
}

impl Default for GpFitOptions {
    fn default() -> Self {
        Self {
            restarts: 4,
            iterations: 60,
            seed: 0x6770,
            bounds: HyperBounds::default(),
        }
    }
}

/// Exact GP regression posterior.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub kernel: SeArdKernel,
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    inv_l: Vec<f64>,
    sf2: f64,
}

fn cholesky_with_jitter(mut k: DMatrix<f64>) -> Cholesky<f64, Dyn> {
    let n = k.nrows();
    let mut extra = 0.0;
    loop {
        if let Some(c) = k.clone().cholesky() {
            return c;
        }
        let step = if extra == 0.0 { JITTER * 10.0 } else { extra * 10.0 };
        for i in 0..n {
            k[(i, i)] += step - extra;
        }
        extra = step;
        assert!(extra < 1e6, "Gram matrix cannot be regularized");
    }
}

impl GpModel {
    /// Posterior with fixed hyperparameters. With `standardize` the targets
    /// are shifted and scaled to zero mean and unit variance first.
    pub fn new(x: Vec<Vec<f64>>, y: &[f64], kernel: SeArdKernel, standardize: bool) -> Self {
        let (y_mean, y_std) = if standardize { mean_std(y) } else { (0.0, 1.0) };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_std));
        let chol = cholesky_with_jitter(kernel.gram(&x));
        let alpha = chol.solve(&ys);
        let (inv_l, sf2) = (kernel.inv_lengthscales(), kernel.log_signal_var.exp());
        Self { kernel, x, y_mean, y_std, chol, alpha, inv_l, sf2 }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    /// Latent posterior mean and variance at `x`, in target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let mut k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| se(xi, x, &self.inv_l, self.sf2)));
        let mean = k.dot(&self.alpha);
        self.chol.l_dirty().solve_lower_triangular_mut(&mut k);
        let var = (self.sf2 - k.norm_squared()).max(0.0);
        (self.y_mean + self.y_std * mean, var * self.y_std * self.y_std)
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.x.len() as f64;
        let ys = self.chol.l() * self.chol.l().transpose() * &self.alpha;
        let logdet: f64 = self.chol.l().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * ys.dot(&self.alpha) - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

fn mean_std(y: &[f64]) -> (f64, f64) {
    let n = y.len().max(1) as f64;
    let m = y.iter().sum::<f64>() / n;
    let v = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let s = v.sqrt();
    (m, if s > 1e-12 { s } else { 1.0 })
}

struct LmlPoint {
    theta: Vec<f64>,
    lml: f64,
    kse: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

/// Log marginal likelihood for standardized targets `y`.
fn lml_at(x: &[Vec<f64>], y: &DVector<f64>, theta: Vec<f64>) -> Option<LmlPoint> {
    let kern = SeArdKernel::from_theta(&theta);
    let n = x.len();
    let kse = kern.kse_matrix(x);
    let mut k = kse.clone();
    let sn2 = kern.log_noise_var.exp() + JITTER;
    for i in 0..n {
        k[(i, i)] += sn2;
    }
    let chol = k.cholesky()?;
    let alpha = chol.solve(y);
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    lml.is_finite().then_some(LmlPoint { theta, lml, kse, chol, alpha })
}

fn lml_grad(x: &[Vec<f64>], p: &LmlPoint) -> Vec<f64> {
    let n = x.len();
    let d = p.theta.len() - 2;
    let il: Vec<f64> = p.theta[..d].iter().map(|l| (-l).exp()).collect();
    let w = &p.alpha * p.alpha.transpose() - p.chol.inverse();
    let mut grad = vec![0.0; d + 2];
    for j in 0..n {
        for i in 0..j {
            let c = w[(i, j)] * p.kse[(i, j)];
            for l in 0..d {
                let r = (x[i][l] - x[j][l]) * il[l];
                grad[l] += c * r * r;
            }
            grad[d] += c;
        }
        grad[d] += 0.5 * w[(j, j)] * p.kse[(j, j)];
        grad[d + 1] += 0.5 * w[(j, j)] * p.theta[d + 1].exp();
    }
    grad
}

/// Log marginal likelihood and its gradient for standardized targets `y`.
#[cfg(test)]
fn lml_and_grad(x: &[Vec<f64>], y: &DVector<f64>, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
    let p = lml_at(x, y, theta.to_vec())?;
    Some((p.lml, lml_grad(x, &p)))
}

/// Projected gradient ascent with a backtracking step.
fn ascend(x: &[Vec<f64>], y: &DVector<f64>, start: Vec<f64>, opts: &GpFitOptions) -> Option<(f64, Vec<f64>)> {
    let mut theta = start;
    opts.bounds.clamp(&mut theta);
    let mut cur = lml_at(x, y, theta)?;
    let mut step = 0.1;
    for _ in 0..opts.iterations {
        let g = lml_grad(x, &cur);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-6 {
            break;
        }
        let mut accepted = false;
        while step > 1e-8 {
            let mut cand: Vec<f64> = cur.theta.iter().zip(&g).map(|(t, gi)| t + step * gi / gn).collect();
            opts.bounds.clamp(&mut cand);
            if let Some(next) = lml_at(x, y, cand) {
                if next.lml > cur.lml {
                    cur = next;
                    step *= 1.5;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((cur.lml, cur.theta))
}

/// Fits the kernel hyperparameters by multi-start maximization of the log
/// marginal likelihood on standardized targets. `warm` adds a start at a
/// previous solution.
pub fn gp_fit(x: Vec<Vec<f64>>, y: &[f64], opts: &GpFitOptions, warm: Option<&SeArdKernel>) -> Result<GpModel, TuneError> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(TuneError::DegenerateData);
    }
    let (m, s) = mean_std(y);
    if y.iter().all(|v| (v - y[0]).abs() <= 1e-12 * y[0].abs().max(1.0)) {
        return Err(TuneError::DegenerateData);
    }
    let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - m) / s));
    let d = x[0].len();
    let mut starts = vec![SeArdKernel::new(&vec![0.3; d], 1.0, 1e-4).theta()];
    if let Some(k) = warm {
        starts.push(k.theta());
    }
    let mut rng = stream(opts.seed, x.len() as u64);
    for _ in 0..opts.restarts {
        starts.push(opts.bounds.sample(d, &mut rng));
    }
    let best = starts
        .into_iter()
        .filter_map(|s| ascend(&x, &ys, s, opts))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, t)| SeArdKernel::from_theta(&t))
        .unwrap_or_else(|| SeArdKernel::new(&vec![0.3; d], 1.0, 1e-4));
    Ok(GpModel::new(x, y, best, true))
}
