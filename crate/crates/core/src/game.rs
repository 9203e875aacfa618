//! Finite normal-form games, mixed strategies and expected utilities.
//!
//! Payoffs are stored per player as a flat array over joint actions in
//! row-major order with player 1's action varying fastest: the joint action
//! `(a_1, ..., a_n)` sits at index `a_1 + |A_1| * (a_2 + |A_2| * (a_3 + ...))`.
//! The same layout is used by the JSON format.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a mixed strategy.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Default absolute tolerance for utility and probability ties.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameJson", into = "GameJson")]
pub struct Game {
    action_counts: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

/// Wire format: `{ "players": n, "actions": [|A_1|, ...], "payoffs": [[...], ...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameJson {
    pub players: usize,
    pub actions: Vec<usize>,
    pub payoffs: Vec<Vec<f64>>,
}

impl TryFrom<GameJson> for Game {
    type Error = Error;

    fn try_from(json: GameJson) -> Result<Self> {
        if json.players != json.actions.len() {
            return Err(Error::InvalidGame(format!(
                "players = {} but {} action counts given",
                json.players,
                json.actions.len()
            )));
        }
        Game::new(json.actions, json.payoffs)
    }
}

impl From<Game> for GameJson {
    fn from(game: Game) -> Self {
        GameJson {
            players: game.player_count(),
            actions: game.action_counts,
            payoffs: game.payoffs,
        }
    }
}

impl Game {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if action_counts.is_empty() {
            return Err(Error::InvalidGame(
                "a game needs at least one player".into(),
            ));
        }
        if let Some(i) = action_counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidGame(format!(
                "player {} has no actions",
                i + 1
            )));
        }
        if payoffs.len() != action_counts.len() {
            return Err(Error::InvalidGame(format!(
                "{} payoff arrays for {} players",
                payoffs.len(),
                action_counts.len()
            )));
        }
        let joint: usize = action_counts.iter().product();
        for (i, p) in payoffs.iter().enumerate() {
            if p.len() != joint {
                return Err(Error::InvalidGame(format!(
                    "player {} has {} payoffs, expected {joint}",
                    i + 1,
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGame(format!(
                    "player {} has a non-finite payoff",
                    i + 1
                )));
            }
        }
        let mut strides = Vec::with_capacity(action_counts.len());
        let mut stride = 1;
        for &c in &action_counts {
            strides.push(stride);
            stride *= c;
        }
        Ok(Game {
            action_counts,
            payoffs,
            strides,
        })
    }

    pub fn player_count(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn joint_action_count(&self) -> usize {
        self.action_counts.iter().product()
    }

    /// Flat payoff array for one player.
    pub fn payoffs(&self, player: usize) -> &[f64] {
        &self.payoffs[player]
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn payoff(&self, player: usize, actions: &[usize]) -> f64 {
        self.payoffs[player][self.joint_index(actions)]
    }

    fn action_of(&self, joint: usize, player: usize) -> usize {
        (joint / self.strides[player]) % self.action_counts[player]
    }

    fn check_profile(&self, profile: &StrategyProfile) -> Result<()> {
        if profile.len() != self.player_count() {
            return Err(Error::DimensionMismatch(format!(
                "profile has {} strategies, game has {} players",
                profile.len(),
                self.player_count()
            )));
        }
        for (i, (s, &c)) in profile.iter().zip(&self.action_counts).enumerate() {
            if s.len() != c {
                return Err(Error::DimensionMismatch(format!(
                    "player {} strategy has {} entries, expected {c}",
                    i + 1,
                    s.len()
                )));
            }
        }
        Ok(())
    }

    pub fn uniform_profile(&self) -> StrategyProfile {
        StrategyProfile::uniform(&self.action_counts)
    }
}

/// A point of the probability simplex over one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        MixedStrategy::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(s: MixedStrategy) -> Self {
        s.0
    }
}

impl MixedStrategy {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidStrategy("empty strategy".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidStrategy(format!(
                "entries must be finite and nonnegative: {probabilities:?}"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidStrategy(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(MixedStrategy(probabilities))
    }

    /// Skips validation; callers guarantee a simplex point up to rounding.
    pub(crate) fn from_raw(probabilities: Vec<f64>) -> Self {
        debug_assert!((probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        MixedStrategy(probabilities)
    }

    pub fn uniform(k: usize) -> Self {
        MixedStrategy(vec![1.0 / k as f64; k])
    }

    pub fn pure(k: usize, action: usize) -> Self {
        let mut p = vec![0.0; k];
        p[action] = 1.0;
        MixedStrategy(p)
    }

    /// Flat Dirichlet(1, ..., 1) draw, i.e. uniform on the simplex.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        MixedStrategy(draws.into_iter().map(|d| d / total).collect())
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Max-norm distance.
    pub fn distance(&self, other: &MixedStrategy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for MixedStrategy {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategyProfile(Vec<MixedStrategy>);

impl StrategyProfile {
    pub fn new(strategies: Vec<MixedStrategy>) -> Result<Self> {
        if strategies.is_empty() {
            return Err(Error::InvalidStrategy("empty profile".into()));
        }
        Ok(StrategyProfile(strategies))
    }

    /// Builds a profile from raw probability vectors, validating each.
    pub fn from_vecs(strategies: Vec<Vec<f64>>) -> Result<Self> {
        let s = strategies
            .into_iter()
            .map(MixedStrategy::new)
            .collect::<Result<Vec<_>>>()?;
        StrategyProfile::new(s)
    }

    pub fn uniform(action_counts: &[usize]) -> Self {
        StrategyProfile(
            action_counts
                .iter()
                .map(|&k| MixedStrategy::uniform(k))
                .collect(),
        )
    }

    pub fn random<R: Rng + ?Sized>(action_counts: &[usize], rng: &mut R) -> Self {
        StrategyProfile(
            action_counts
                .iter()
                .map(|&k| MixedStrategy::random(k, rng))
                .collect(),
        )
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MixedStrategy> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Max-norm distance over all probability entries.
    pub fn distance(&self, other: &StrategyProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }

    /// All entries, player-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flat_map(|s| s.0.iter().copied()).collect()
    }

    /// `(1 - w) * self + w * other`, entrywise.
    pub fn mix(&self, other: &StrategyProfile, w: f64) -> StrategyProfile {
        StrategyProfile(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| {
                    MixedStrategy(
                        a.0.iter()
                            .zip(&b.0)
                            .map(|(x, y)| (1.0 - w) * x + w * y)
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for StrategyProfile {
    type Output = MixedStrategy;
    fn index(&self, i: usize) -> &MixedStrategy {
        &self.0[i]
    }
}

/// Expected utility of each of one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UtilityVector(Vec<f64>);

impl TryFrom<Vec<f64>> for UtilityVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        UtilityVector::new(v)
    }
}

impl From<UtilityVector> for Vec<f64> {
    fn from(u: UtilityVector) -> Self {
        u.0
    }
}

impl UtilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty utility vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "utility vector has non-finite entries: {values:?}"
            )));
        }
        Ok(UtilityVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for UtilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A pair of actions `(better, worse)` of one player whose probabilities
/// disagree with their utility ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrdinalViolation {
    pub player: usize,
    /// Action with the higher (or tied) expected utility.
    pub better: usize,
    pub worse: usize,
    /// How far the probabilities are from respecting the ordering.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalComparison {
    pub tie_tolerance: f64,
    pub verdict: bool,
    pub witness: Option<OrdinalViolation>,
}

/// Checks that `probs` is ordinally equivalent to `utils` under `tol`.
///
/// Strict utility gaps (`u_a > u_b + tol`) need `p_a > p_b`; utility ties
/// (`|u_a - u_b| <= tol`) need `|p_a - p_b| <= tol`. Returns the violating
/// pair with the largest margin, if any.
pub fn ordinal_violation(utils: &[f64], probs: &[f64], tol: f64) -> Option<(usize, usize, f64)> {
    let mut worst: Option<(usize, usize, f64)> = None;
    for a in 0..utils.len() {
        for b in 0..utils.len() {
            if a == b {
                continue;
            }
            let gap = utils[a] - utils[b];
            let margin = if gap > tol {
                if probs[a] > probs[b] {
                    continue;
                }
                probs[b] - probs[a]
            } else if gap.abs() <= tol {
                // visit each tied pair once
                if a > b {
                    continue;
                }
                let d = (probs[a] - probs[b]).abs();
                if d <= tol {
                    continue;
                }
                d - tol
            } else {
                continue;
            };
            if worst.is_none_or(|(_, _, m)| margin > m) {
                worst = Some((a, b, margin));
            }
        }
    }
    worst
}

/// `U_i(σ_{-i}, a_i)` for every action `a_i` of `player`.
pub fn expected_utility(
    game: &Game,
    profile: &StrategyProfile,
    player: usize,
) -> Result<UtilityVector> {
    game.check_profile(profile)?;
    if player >= game.player_count() {
        return Err(Error::DimensionMismatch(format!(
            "player index {player} out of range"
        )));
    }
    let k = game.action_counts[player];
    let mut values = vec![0.0; k];
    let payoffs = &game.payoffs[player];
    'joint: for (joint, &u) in payoffs.iter().enumerate() {
        let mut weight = 1.0;
        for j in 0..game.player_count() {
            if j == player {
                continue;
            }
            weight *= profile[j][game.action_of(joint, j)];
            if weight == 0.0 {
                continue 'joint;
            }
        }
        values[game.action_of(joint, player)] += weight * u;
    }
    Ok(UtilityVector(values))
}

/// `U_i(σ)`.
pub fn profile_utility(game: &Game, profile: &StrategyProfile, player: usize) -> Result<f64> {
    let u = expected_utility(game, profile, player)?;
    Ok(u.0
        .iter()
        .zip(profile[player].probabilities())
        .map(|(u, p)| u * p)
        .sum())
}

/// No player gains more than `tol` from a pure deviation.
pub fn is_nash(game: &Game, profile: &StrategyProfile, tol: f64) -> Result<bool> {
    for i in 0..game.player_count() {
        let u = expected_utility(game, profile, i)?;
        let current: f64 =
            u.0.iter()
                .zip(profile[i].probabilities())
                .map(|(u, p)| u * p)
                .sum();
        if u.0.iter().any(|&v| v > current + tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Two-sided ordinal equivalence of every player's strategy with their
/// expected utilities. The witness is the worst pair of the first violating
/// player.
pub fn is_payoff_monotone(
    game: &Game,
    profile: &StrategyProfile,
    tie_tolerance: f64,
) -> Result<OrdinalComparison> {
    if tie_tolerance.is_nan() || tie_tolerance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tie tolerance must be nonnegative, got {tie_tolerance}"
        )));
    }
    for i in 0..game.player_count() {
        let u = expected_utility(game, profile, i)?;
        if let Some((better, worse, margin)) =
            ordinal_violation(&u.0, profile[i].probabilities(), tie_tolerance)
        {
            return Ok(OrdinalComparison {
                tie_tolerance,
                verdict: false,
                witness: Some(OrdinalViolation {
                    player: i,
                    better,
                    worse,
                    margin,
                }),
            });
        }
    }
    Ok(OrdinalComparison {
        tie_tolerance,
        verdict: true,
        witness: None,
    })
}

/// The 3x2 prism game: player 1 picks among `a_1..a_3`, player 2 between
/// `b_1`, `b_2`. Under `b_1` everyone gets 100; under `b_2` player 1 gets
/// 101, 102, 104 and player 2 gets 0.
pub fn build_prism_game() -> Game {
    let p1 = vec![100.0, 100.0, 100.0, 101.0, 102.0, 104.0];
    let p2 = vec![100.0, 100.0, 100.0, 0.0, 0.0, 0.0];
    Game::new(vec![3, 2], vec![p1, p2]).expect("prism game is well formed")
}

/// Player 1 has `k` actions and earns 5 whenever every opponent plays their
/// designated action (action 0), otherwise `(1, 2, ..., 2, 4)`. Each
/// opponent earns 1 for their designated action and 0 otherwise.
pub fn build_paradox_game(k: usize, opponent_action_counts: &[usize]) -> Result<Game> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "player 1 needs at least 3 actions, got {k}"
        )));
    }
    if opponent_action_counts.contains(&0) {
        return Err(Error::InvalidParameter("opponent with zero actions".into()));
    }
    if !opponent_action_counts.iter().any(|&c| c >= 2) {
        return Err(Error::InvalidParameter(
            "at least one opponent needs two or more actions".into(),
        ));
    }
    let mut counts = vec![k];
    counts.extend_from_slice(opponent_action_counts);
    let joint: usize = counts.iter().product();
    let n = counts.len();
    let mut payoffs = vec![vec![0.0; joint]; n];
    let mut actions = vec![0usize; n];
    for idx in 0..joint {
        let mut rest = idx;
        for (slot, &c) in actions.iter_mut().zip(&counts) {
            *slot = rest % c;
            rest /= c;
        }
        let designated = actions[1..].iter().all(|&a| a == 0);
        payoffs[0][idx] = if designated {
            5.0
        } else if actions[0] == 0 {
            1.0
        } else if actions[0] == k - 1 {
            4.0
        } else {
            2.0
        };
        for (p, &a) in payoffs.iter_mut().zip(&actions).skip(1) {
            p[idx] = if a == 0 { 1.0 } else { 0.0 };
        }
    }
    Game::new(counts, payoffs)
}
