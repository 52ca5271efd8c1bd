//! Constrained tuning of the filter noise covariances: Gaussian-process
//! Bayesian optimization with constrained max-value entropy search, and a
//! feasibility-first particle swarm.

mod benchmark;
mod bo;
mod cmes;
mod gp;
mod pso;
mod simplex;

pub use benchmark::{run_synthetic_benchmark, BenchmarkRun, DiskBowl, Optimizer};
pub use bo::{bo_minimize, latin_hypercube, BoParams};
pub use cmes::{acquisition_cmes, norm_cdf, norm_pdf, Cmes, CmesModels, MIN_VALUE_SAMPLES};
pub use gp::{gp_fit, GpFitOptions, GpModel, HyperBounds, SeArdKernel, JITTER};
pub use pso::{pso_minimize, PsoParams};
pub use simplex::nelder_mead;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on the RMS Euler-angle error of a feasible candidate, deg.
pub const G_MAX_DEG: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("no feasible point among {} evaluations", .0.history.len())]
    NoFeasiblePoint(Box<OptResult>),
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("all training targets are identical")]
    DegenerateData,
}

/// Result of one candidate evaluation. A crash carries no objective or
/// constraint value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub j: Option<f64>,
    pub g: Option<f64>,
    pub crashed: bool,
}

impl Outcome {
    pub fn value(j: f64) -> Self {
        Self {
            j: Some(j),
            g: None,
            crashed: false,
        }
    }

    pub fn constrained(j: f64, g: f64) -> Self {
        Self {
            j: Some(j),
            g: Some(g),
            crashed: false,
        }
    }

    pub fn crash() -> Self {
        Self {
            j: None,
            g: None,
            crashed: true,
        }
    }

    /// Constraint violation `max(0, g - g_max)`; infinite for a crash.
    pub fn violation(&self, g_max: Option<f64>) -> f64 {
        if self.crashed {
            return f64::INFINITY;
        }
        match (self.g, g_max) {
            (Some(g), Some(max)) => (g - max).max(0.0),
            _ => 0.0,
        }
    }

    pub fn is_feasible(&self, g_max: Option<f64>) -> bool {
        !self.crashed && self.j.is_some() && self.violation(g_max) == 0.0
    }

    /// Feasibility-first ordering: feasible beats infeasible, feasible
    /// points compare by `j`, infeasible ones by violation.
    pub fn compare(&self, other: &Self, g_max: Option<f64>) -> Ordering {
        let (va, vb) = (self.violation(g_max), other.violation(g_max));
        match (va == 0.0, vb == 0.0) {
            (true, true) => {
                let a = self.j.unwrap_or(f64::INFINITY);
                let b = other.j.unwrap_or(f64::INFINITY);
                a.total_cmp(&b)
            }
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => va.total_cmp(&vb).then_with(|| {
                let a = self.j.unwrap_or(f64::INFINITY);
                let b = other.j.unwrap_or(f64::INFINITY);
                a.total_cmp(&b)
            }),
        }
    }
}

/// A box-bounded black-box minimization problem.
pub trait Problem: Sync {
    fn lower(&self) -> Vec<f64>;
    fn upper(&self) -> Vec<f64>;
    /// Feasibility threshold on `Outcome::g`, if constrained.
    fn g_max(&self) -> Option<f64> {
        None
    }
    fn evaluate(&self, x: &[f64]) -> Outcome;

    fn dim(&self) -> usize {
        self.lower().len()
    }
}

/// Adapts a closure to [`Problem`].
pub struct FnProblem<F> {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub g_max: Option<f64>,
    pub f: F,
}

impl<F> FnProblem<F>
where
    F: Fn(&[f64]) -> Outcome + Sync,
{
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, f: F) -> Self {
        Self {
            lower,
            upper,
            g_max: None,
            f,
        }
    }

    pub fn with_g_max(mut self, g_max: f64) -> Self {
        self.g_max = Some(g_max);
        self
    }
}

impl<F> Problem for FnProblem<F>
where
    F: Fn(&[f64]) -> Outcome + Sync,
{
    fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }
    fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }
    fn g_max(&self) -> Option<f64> {
        self.g_max
    }
    fn evaluate(&self, x: &[f64]) -> Outcome {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptBudget {
    pub max_evals: usize,
    pub init_design_size: usize,
    pub restarts: usize,
}

impl Default for OptBudget {
    fn default() -> Self {
        Self {
            max_evals: 225,
            init_design_size: 10,
            restarts: 5,
        }
    }
}

impl OptBudget {
    pub fn with_max_evals(max_evals: usize) -> Self {
        Self {
            max_evals,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TuneError> {
        if self.init_design_size == 0 || self.init_design_size >= self.max_evals {
            return Err(TuneError::InvalidBudget(format!(
                "init_design_size {} must be in 1..{}",
                self.init_design_size, self.max_evals
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub x: Vec<f64>,
    pub outcome: Outcome,
    /// Best feasible objective up to and including this entry.
    pub best_so_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_x: Vec<f64>,
    pub best: Outcome,
    pub history: Vec<HistoryEntry>,
}

/// Accumulates evaluations in order and tracks the incumbent.
#[derive(Debug, Clone)]
pub(crate) struct Recorder {
    g_max: Option<f64>,
    history: Vec<HistoryEntry>,
    best: Option<usize>,
}

impl Recorder {
    pub(crate) fn new(g_max: Option<f64>) -> Self {
        Self {
            g_max,
            history: Vec::new(),
            best: None,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.history.len()
    }

    #[cfg(test)]
    pub(crate) fn entries(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub(crate) fn push(&mut self, x: Vec<f64>, outcome: Outcome) {
        let idx = self.history.len();
        let better = match self.best {
            None => true,
            Some(b) => outcome.compare(&self.history[b].outcome, self.g_max) == Ordering::Less,
        };
        if better {
            self.best = Some(idx);
        }
        let prev = self.history.last().and_then(|e| e.best_so_far);
        let here = outcome.is_feasible(self.g_max).then(|| outcome.j.unwrap());
        let best_so_far = match (prev, here) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.history.push(HistoryEntry {
            iter: idx,
            x,
            outcome,
            best_so_far,
        });
    }

    pub(crate) fn finish(self) -> Result<OptResult, TuneError> {
        let b = self.best.expect("at least one evaluation");
        let best = self.history[b].clone();
        let feasible = best.outcome.is_feasible(self.g_max);
        let res = OptResult {
            best_x: best.x,
            best: best.outcome,
            history: self.history,
        };
        if feasible {
            Ok(res)
        } else {
            Err(TuneError::NoFeasiblePoint(Box::new(res)))
        }
    }
}

pub(crate) fn clamp_to_box(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}
