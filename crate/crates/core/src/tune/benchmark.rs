//! Shared synthetic constrained benchmark for comparing optimizers.

use serde::{Deserialize, Serialize};

use super::{bo_minimize, pso_minimize, BoParams, OptBudget, OptResult, Outcome, Problem, PsoParams, TuneError};
use crate::par::{map_slice, Execution};

/// Quadratic bowl centred at `(1, 1)` restricted to the unit disk, on
/// `[-2, 2]^2`. The optimum lies on the disk boundary at `(1, 1) / sqrt 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiskBowl;

impl DiskBowl {
    pub const OPTIMUM: f64 = 2.0 * (1.0 - std::f64::consts::FRAC_1_SQRT_2) * (1.0 - std::f64::consts::FRAC_1_SQRT_2);
}

impl Problem for DiskBowl {
    fn lower(&self) -> Vec<f64> {
        vec![-2.0, -2.0]
    }
    fn upper(&self) -> Vec<f64> {
        vec![2.0, 2.0]
    }
    fn g_max(&self) -> Option<f64> {
        Some(1.0)
    }
    fn evaluate(&self, x: &[f64]) -> Outcome {
        let f = (x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2);
        Outcome::constrained(f, x[0] * x[0] + x[1] * x[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Bo,
    Pso,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Bo => "bo",
            Optimizer::Pso => "pso",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub optimizer: Optimizer,
    pub seed: u64,
    pub result: OptResult,
}

impl BenchmarkRun {
    /// Gap between the best feasible value and the known optimum.
    pub fn gap(&self) -> Option<f64> {
        self.result.best.is_feasible(Some(1.0)).then(|| self.result.best.j.unwrap() - DiskBowl::OPTIMUM)
    }
}

/// Runs PSO and BO on [`DiskBowl`] for every seed. Seeds run on `exec`;
/// each BO run is sequential.
pub fn run_synthetic_benchmark(seeds: &[u64], budget: &OptBudget, exec: Execution) -> Result<Vec<BenchmarkRun>, TuneError> {
    let jobs: Vec<(Optimizer, u64)> = [Optimizer::Bo, Optimizer::Pso]
        .iter()
        .flat_map(|&o| seeds.iter().map(move |&s| (o, s)))
        .collect();
    map_slice(&jobs, exec, |&(optimizer, seed)| {
        let result = match optimizer {
            Optimizer::Bo => bo_minimize(&DiskBowl, budget, &BoParams::default(), seed),
            Optimizer::Pso => pso_minimize(&DiskBowl, budget, &PsoParams::default(), seed, Execution::Sequential),
        };
        result.map(|result| BenchmarkRun { optimizer, seed, result })
    })
    .into_iter()
    .collect()
}
