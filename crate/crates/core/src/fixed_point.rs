use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::game::{Game, StrategyProfile};

/// Damped iteration `σ ← (1 - d)σ + d·R(σ)`.
///
/// `respond` returns the response profile together with an allowed slack
/// (sampling noise) that is added to `config.tol` in the stopping rule.
/// Returns the last iterate whose residual `‖σ - R(σ)‖∞` met the rule.
pub(crate) fn damped_iteration<F>(
    game: &Game,
    start: &StrategyProfile,
    config: &SolverConfig,
    mut respond: F,
) -> Result<(StrategyProfile, f64)>
where
    F: FnMut(&StrategyProfile) -> Result<(StrategyProfile, f64)>,
{
    config.validate()?;
    check_dimensions(game, start)?;
    let mut sigma = start.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..config.max_iters {
        let (response, slack) = respond(&sigma)?;
        residual = sigma.distance(&response);
        if residual <= config.tol + slack {
            return Ok((sigma, residual));
        }
        sigma = sigma.mix(&response, config.damping);
    }
    Err(Error::NonConvergence {
        iterations: config.max_iters,
        residual,
        last: sigma,
    })
}

pub(crate) fn check_dimensions(game: &Game, profile: &StrategyProfile) -> Result<()> {
    let ok = profile.len() == game.player_count()
        && profile
            .iter()
            .zip(game.action_counts())
            .all(|(s, &k)| s.len() == k);
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "profile shape {:?} does not match game actions {:?}",
            profile.iter().map(|s| s.len()).collect::<Vec<_>>(),
            game.action_counts()
        )))
    }
}
