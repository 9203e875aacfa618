//! Structural and logit quantal response equilibria of finite normal-form
//! games, with numerical checks of when monotone structural models can and
//! cannot approach a Nash equilibrium.
//!
//! Modules:
//! - [`game`]: games, mixed strategies, expected utility, Nash and payoff
//!   monotonicity checks, built-in example games.
//! - [`logit`]: the logit response, fixed points and path tracing.
//! - [`structural`]: perturbation families and the structural response by
//!   Monte Carlo or quadrature.
//! - [`dice`]: exact enumeration for permutation-orbit perturbations.
//! - [`paradox`]: premise checks, bounds and exclusion certificates.
//! - [`report`]: reproducible CSV/JSON output.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and [`Execution::Parallel`] is selected; results are
//! identical in either mode.

pub mod config;
pub mod dice;
pub mod error;
pub mod exec;
mod fixed_point;
pub mod game;
pub mod logit;
pub mod paradox;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod structural;

pub use config::SolverConfig;
pub use error::{Error, Result};
pub use exec::Execution;
pub use game::{
    build_paradox_game, build_prism_game, expected_utility, is_nash, is_payoff_monotone, Game,
    MixedStrategy, OrdinalComparison, StrategyProfile, UtilityVector,
};
pub use logit::{logit_qrf, solve_logit_fixed_point, trace_logit_path, LogitParams};
pub use structural::{
    qrf_monte_carlo, qrf_quadrature_iid, solve_structural_qre, Marginal, MarginalKind,
    PerturbationFamily, QrfMethod,
};
