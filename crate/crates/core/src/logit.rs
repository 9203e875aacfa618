//! Logistic quantal response, logit equilibria and principal-branch tracing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::fixed_point::damped_iteration;
use crate::game::{expected_utility, Game, MixedStrategy, StrategyProfile, UtilityVector};

/// Precision parameter for each player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LogitParams(Vec<f64>);

impl TryFrom<Vec<f64>> for LogitParams {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LogitParams::new(v)
    }
}

impl From<LogitParams> for Vec<f64> {
    fn from(p: LogitParams) -> Self {
        p.0
    }
}

impl LogitParams {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and nonnegative, got {l}"
            )));
        }
        Ok(LogitParams(lambdas))
    }

    pub fn homogeneous(players: usize, lambda: f64) -> Result<Self> {
        LogitParams::new(vec![lambda; players])
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, t: f64) -> LogitParams {
        LogitParams(self.0.iter().map(|l| l * t).collect())
    }
}

/// `exp(λ x_a) / Σ_b exp(λ x_b)`, evaluated after subtracting `max x`.
pub fn logit_qrf(x: &UtilityVector, lambda: f64) -> Result<MixedStrategy> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let max = x.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = x
        .values()
        .iter()
        .map(|v| (lambda * (v - max)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(MixedStrategy::from_raw(
        weights.into_iter().map(|w| w / total).collect(),
    ))
}

pub(crate) fn logit_response(
    game: &Game,
    params: &LogitParams,
    profile: &StrategyProfile,
) -> Result<StrategyProfile> {
    let strategies = (0..game.player_count())
        .map(|i| logit_qrf(&expected_utility(game, profile, i)?, params.0[i]))
        .collect::<Result<Vec<_>>>()?;
    StrategyProfile::new(strategies)
}

fn check_params(game: &Game, params: &LogitParams) -> Result<()> {
    if params.0.len() != game.player_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} lambdas for {} players",
            params.0.len(),
            game.player_count()
        )));
    }
    Ok(())
}

/// Damped fixed-point iteration on the logit response map.
pub fn solve_logit_fixed_point(
    game: &Game,
    params: &LogitParams,
    start: &StrategyProfile,
    config: &SolverConfig,
) -> Result<(StrategyProfile, f64)> {
    check_params(game, params)?;
    damped_iteration(game, start, config, |sigma| {
        Ok((logit_response(game, params, sigma)?, 0.0))
    })
}

/// Max-norm distance between `profile` and its logit response.
pub fn logit_residual(game: &Game, params: &LogitParams, profile: &StrategyProfile) -> Result<f64> {
    check_params(game, params)?;
    Ok(profile.distance(&logit_response(game, params, profile)?))
}

/// Solves from the uniform profile and from `random_starts` seeded random
/// profiles. Start `s > 0` draws from ChaCha8 stream `s` of `config.seed`.
pub fn solve_logit_multistart(
    game: &Game,
    params: &LogitParams,
    random_starts: usize,
    config: &SolverConfig,
) -> Vec<Result<(StrategyProfile, f64)>> {
    map_indexed(config.execution, random_starts + 1, |s| {
        let start = start_profile(game, config.seed, s as u64);
        solve_logit_fixed_point(game, params, &start, config)
    })
}

/// Start 0 is uniform; start `s > 0` is a flat-Dirichlet draw from
/// ChaCha8 stream `s` of `seed`.
pub fn start_profile(game: &Game, seed: u64, index: u64) -> StrategyProfile {
    if index == 0 {
        return game.uniform_profile();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    StrategyProfile::random(game.action_counts(), &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    /// `lambda_max` was zero: the uniform profile is the exact answer.
    Converged,
    MaxLambda,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub lambda: f64,
    pub profile: StrategyProfile,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub direction: LogitParams,
    pub points: Vec<TracePoint>,
    pub terminal_reason: TerminalReason,
}

const INITIAL_STEP: f64 = 0.1;
const MAX_STEP: f64 = 1.0;
const MAX_HALVINGS: usize = 30;

/// Follows the principal branch `t ↦ σ(t·direction)` from `t = 0` to
/// `lambda_max`, warm-starting each solve from the previous point. Steps
/// double on success (capped at 1) and halve on failure; after
/// `MAX_HALVINGS` consecutive failures the trace stops with the last good
/// point and [`TerminalReason::StepFailure`].
pub fn trace_logit_path(
    game: &Game,
    direction: &LogitParams,
    lambda_max: f64,
    config: &SolverConfig,
) -> Result<TraceResult> {
    check_params(game, direction)?;
    config.validate()?;
    if !(lambda_max.is_finite() && lambda_max >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda_max must be finite and nonnegative, got {lambda_max}"
        )));
    }
    let uniform = game.uniform_profile();
    let residual = logit_residual(game, &direction.scaled(0.0), &uniform)?;
    let mut points = vec![TracePoint {
        lambda: 0.0,
        profile: uniform,
        residual,
    }];
    if lambda_max == 0.0 {
        return Ok(TraceResult {
            direction: direction.clone(),
            points,
            terminal_reason: TerminalReason::Converged,
        });
    }

    let mut step = INITIAL_STEP;
    let mut halvings = 0;
    let mut lambda = 0.0;
    while lambda < lambda_max {
        let next = (lambda + step).min(lambda_max);
        let last = &points.last().expect("trace starts with a point").profile;
        match solve_logit_fixed_point(game, &direction.scaled(next), last, config) {
            Ok((profile, residual)) => {
                points.push(TracePoint {
                    lambda: next,
                    profile,
                    residual,
                });
                lambda = next;
                step = (step * 2.0).min(MAX_STEP);
                halvings = 0;
            }
            Err(Error::NonConvergence { .. }) => {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Ok(TraceResult {
                        direction: direction.clone(),
                        points,
                        terminal_reason: TerminalReason::StepFailure,
                    });
                }
                step /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TraceResult {
        direction: direction.clone(),
        points,
        terminal_reason: TerminalReason::MaxLambda,
    })
}

/// Minimum of `x ↦ α²/x + α + x` over `(0, 1 - 2α]` and its minimizer.
///
/// For `α > 1/3` the unconstrained minimizer `x = α` lies right of the
/// interval, so the function is decreasing there and the minimum sits at
/// `x = 1 - 2α`. A value above 1 rules out logit equilibria of the prism game
/// with `σ_1(a_2) = α`.
pub fn logit_feasibility_bound(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 1.0 / 3.0 && alpha < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (1/3, 1/2), got {alpha}"
        )));
    }
    let x = 1.0 - 2.0 * alpha;
    Ok((alpha * alpha / x + alpha + x, x))
}
