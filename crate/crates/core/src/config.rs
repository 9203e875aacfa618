use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Knobs shared by the fixed-point solvers and the Monte Carlo estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Weight on the new response in `σ ← (1 - d)σ + d·Q(U(σ))`.
    pub damping: f64,
    pub seed: u64,
    pub mc_samples: usize,
    /// Total Gauss-Legendre nodes per quadrature integral.
    pub quadrature_nodes: usize,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iters: 100_000,
            damping: 0.5,
            seed: 0,
            mc_samples: 100_000,
            quadrature_nodes: 2048,
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.tol.is_infinite() {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.quadrature_nodes == 0 {
            return Err(Error::InvalidParameter(
                "quadrature_nodes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}
