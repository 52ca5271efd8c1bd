use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::NavError;

/// A state living on a manifold with an `N`-dimensional tangent chart.
pub trait Manifold<const N: usize>: Clone {
    /// `self ⊞ delta`.
    fn retract(&self, delta: &SVector<f64, N>) -> Self;
    /// `other ⊟ self`, the chart coordinates of `other` about `self`.
    fn local(&self, other: &Self) -> SVector<f64, N>;
    fn is_finite(&self) -> bool;
}

impl<const N: usize> Manifold<N> for SVector<f64, N> {
    fn retract(&self, delta: &SVector<f64, N>) -> Self {
        self + delta
    }
    fn local(&self, other: &Self) -> SVector<f64, N> {
        other - self
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

const MEAN_MAX_ITER: usize = 50;

/// Weighted mean on the chart, iterated from `points[0]`.
pub fn manifold_mean<S: Manifold<N>, const N: usize>(points: &[S], weights: &[f64]) -> S {
    let mut mean = points[0].clone();
    let mut prev = f64::INFINITY;
    for _ in 0..MEAN_MAX_ITER {
        let mut delta = SVector::<f64, N>::zeros();
        for (p, w) in points.iter().zip(weights) {
            delta += mean.local(p) * *w;
        }
        let norm = delta.norm();
        mean = mean.retract(&delta);
        // Large negative weights leave a rounding-noise floor; a stalled
        // update below 1e-8 is accepted.
        if norm < 1e-12 || (norm < 1e-8 && norm > 0.5 * prev) {
            break;
        }
        prev = norm;
    }
    mean
}

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigmaPointParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for SigmaPointParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl SigmaPointParams {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn lambda(&self, n: usize) -> f64 {
        let n = n as f64;
        self.alpha * self.alpha * (n + self.kappa) - n
    }

    /// `(wm0, wc0, wi)` for dimension `n`.
    pub fn weights(&self, n: usize) -> (f64, f64, f64) {
        let l = self.lambda(n);
        let s = n as f64 + l;
        let wm0 = l / s;
        (wm0, wm0 + 1.0 - self.alpha * self.alpha + self.beta, 0.5 / s)
    }
}

/// Chi-square 99.9 % quantiles for 1 to 6 degrees of freedom.
const CHI2_999: [f64; 6] = [10.828, 13.816, 16.266, 18.467, 20.515, 22.458];

pub fn chi2_999(dof: usize) -> f64 {
    CHI2_999[dof.clamp(1, 6) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo<const M: usize> {
    pub innovation: SVector<f64, M>,
    /// Normalized innovation squared.
    pub nis: f64,
    /// NIS above the chi-square 99.9 % bound; the update is still applied.
    pub outlier: bool,
}

/// Unscented Kalman filter on a manifold state with an `N`-dimensional
/// chart.
#[derive(Debug, Clone)]
pub struct Ukf<S, const N: usize> {
    pub x: S,
    pub p: SMatrix<f64, N, N>,
    pub params: SigmaPointParams,
}

fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

impl<S: Manifold<N>, const N: usize> Ukf<S, N> {
    pub fn new(x: S, p: SMatrix<f64, N, N>, params: SigmaPointParams) -> Self {
        Self { x, p, params }
    }

    fn sigma_points(&self) -> Result<Vec<S>, NavError> {
        let scale = N as f64 + self.params.lambda(N);
        let chol = (self.p * scale).cholesky().ok_or(NavError::CholeskyFailure)?;
        let l = chol.l();
        let mut pts = Vec::with_capacity(2 * N + 1);
        pts.push(self.x.clone());
        for i in 0..N {
            pts.push(self.x.retract(&l.column(i).into_owned()));
        }
        for i in 0..N {
            pts.push(self.x.retract(&(-l.column(i).into_owned())));
        }
        Ok(pts)
    }

    fn weight_vectors(&self) -> (Vec<f64>, Vec<f64>) {
        let (wm0, wc0, wi) = self.params.weights(N);
        let mut wm = vec![wi; 2 * N + 1];
        let mut wc = vec![wi; 2 * N + 1];
        wm[0] = wm0;
        wc[0] = wc0;
        (wm, wc)
    }

    /// Propagates every sigma point through `step` and adds the discrete
    /// process noise `q_d`.
    pub fn predict<F>(&mut self, step: F, q_d: &SMatrix<f64, N, N>) -> Result<(), NavError>
    where
        F: Fn(&S) -> S,
    {
        let pts: Vec<S> = self.sigma_points()?.iter().map(&step).collect();
        let (wm, wc) = self.weight_vectors();
        let mean = manifold_mean(&pts, &wm);
        // Residuals in the chart about the propagated centre point, so the
        // mean's convergence floor never enters the covariance through the
        // large negative centre weight.
        let ds: Vec<SVector<f64, N>> = pts.iter().map(|pt| pts[0].local(pt)).collect();
        let d_bar = ds.iter().zip(&wm).fold(SVector::<f64, N>::zeros(), |acc, (d, w)| acc + d * *w);
        let mut p = *q_d;
        for (d, w) in ds.iter().zip(&wc) {
            let d = d - d_bar;
            p += d * d.transpose() * *w;
        }
        if !mean.is_finite() || !p.iter().all(|v| v.is_finite()) {
            return Err(NavError::NonFinite);
        }
        self.x = mean;
        self.p = symmetrize(&p);
        Ok(())
    }

    /// Unscented measurement update. Components flagged in `angular` are
    /// wrapped to `(−π, π]` when forming differences and the innovation.
    pub fn update<const M: usize, H>(
        &mut self,
        h: H,
        r: &SMatrix<f64, M, M>,
        z: &SVector<f64, M>,
        angular: &[bool; M],
    ) -> Result<UpdateInfo<M>, NavError>
    where
        H: Fn(&S) -> SVector<f64, M>,
    {
        let pts = self.sigma_points()?;
        let (wm, wc) = self.weight_vectors();
        let zs: Vec<SVector<f64, M>> = pts.iter().map(&h).collect();
        let diff = |a: &SVector<f64, M>, b: &SVector<f64, M>| {
            let mut d = a - b;
            for k in 0..M {
                if angular[k] {
                    d[k] = crate::frames::wrap_angle(d[k]);
                }
            }
            d
        };
        let mut z_hat = zs[0];
        let mut acc = SVector::<f64, M>::zeros();
        for (zi, w) in zs.iter().zip(&wm) {
            acc += diff(zi, &zs[0]) * *w;
        }
        z_hat += acc;
        let mut s = *r;
        let mut c = SMatrix::<f64, N, M>::zeros();
        for ((zi, pt), w) in zs.iter().zip(&pts).zip(&wc) {
            let dz = diff(zi, &z_hat);
            let dx = self.x.local(pt);
            s += dz * dz.transpose() * *w;
            c += dx * dz.transpose() * *w;
        }
        let s = symmetrize(&s);
        let s_chol = s.cholesky().ok_or(NavError::CholeskyFailure)?;
        let innovation = diff(z, &z_hat);
        let k = c * s_chol.inverse();
        let nis = innovation.dot(&s_chol.solve(&innovation));
        let x = self.x.retract(&(k * innovation));
        let p = symmetrize(&(self.p - k * s * k.transpose()));
        if !x.is_finite() || !p.iter().all(|v| v.is_finite()) {
            return Err(NavError::NonFinite);
        }
        self.x = x;
        self.p = p;
        Ok(UpdateInfo {
            innovation,
            nis,
            outlier: nis > chi2_999(M),
        })
    }
}
