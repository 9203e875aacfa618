//! Checks around the paradox game: a Nash equilibrium that is a limit of
//! payoff-monotone profiles but has a neighborhood free of equilibria of
//! every monotone structural model.

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::game::{
    expected_utility, is_nash, is_payoff_monotone, Game, MixedStrategy, StrategyProfile,
    UtilityVector,
};
use crate::logit::start_profile;
use crate::structural::{
    qrf_quadrature_iid, solve_structural_qre, structural_residual, PerturbationFamily, QrfMethod,
};

/// `d1 = U(a_2) - U(a_1)`, `d2 = U(a_K) - U(a_{K-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPair {
    pub d1: f64,
    pub d2: f64,
}

fn player_one_actions(game: &Game) -> Result<usize> {
    let k = game.action_counts()[0];
    if k < 3 {
        return Err(Error::Precondition(format!(
            "player 1 needs at least 3 actions, got {k}"
        )));
    }
    Ok(k)
}

/// The profile `(1 - 1/λ)σ + (1/λ)·uniform` where opponents play their
/// first action and player 1 plays `(0, α, ..., α, 1 - (K-2)α)`.
pub fn lemma2_sequence(game: &Game, alpha: f64, lambda: u64) -> Result<StrategyProfile> {
    let sigma = lemma2_limit(game, alpha)?;
    if lambda == 0 {
        return Err(Error::InvalidParameter(
            "lambda must be a positive integer".into(),
        ));
    }
    Ok(sigma.mix(&game.uniform_profile(), 1.0 / lambda as f64))
}

/// The limit of [`lemma2_sequence`] as `λ → ∞`.
pub fn lemma2_limit(game: &Game, alpha: f64) -> Result<StrategyProfile> {
    let k = player_one_actions(game)?;
    let (lo, hi) = (1.0 / k as f64, 1.0 / (k - 1) as f64);
    if !(alpha > lo && alpha < hi) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in ({lo}, {hi}), got {alpha}"
        )));
    }
    let mut first = vec![alpha; k];
    first[0] = 0.0;
    first[k - 1] = 1.0 - (k - 2) as f64 * alpha;
    let mut strategies = vec![MixedStrategy::new(first)?];
    strategies.extend(
        game.action_counts()[1..]
            .iter()
            .map(|&c| MixedStrategy::pure(c, 0)),
    );
    StrategyProfile::new(strategies)
}

/// Smallest `Λ` in `2..=lambda_max` such that every integer `λ` in
/// `[Λ, 10Λ]` gives a payoff-monotone sequence element.
pub fn find_lemma2_threshold(
    game: &Game,
    alpha: f64,
    lambda_max: u64,
    tol: f64,
) -> Result<Option<u64>> {
    let mut cache = std::collections::BTreeMap::new();
    let mut passes = |l: u64| -> Result<bool> {
        if let Some(&v) = cache.get(&l) {
            return Ok(v);
        }
        let v = is_payoff_monotone(game, &lemma2_sequence(game, alpha, l)?, tol)?.verdict;
        cache.insert(l, v);
        Ok(v)
    };
    'candidate: for start in 2..=lambda_max {
        for l in start..=10 * start {
            if !passes(l)? {
                continue 'candidate;
            }
        }
        return Ok(Some(start));
    }
    Ok(None)
}

/// Whether `v_1 < v_2 = ... = v_{K-1} < v_K` (middle equal within `tol`)
/// and `d2 > d1 + tol`.
pub fn utilities_premise(v: &[f64], tol: f64) -> (bool, GapPair) {
    let k = v.len();
    if k < 3 {
        return (
            false,
            GapPair {
                d1: f64::NAN,
                d2: f64::NAN,
            },
        );
    }
    let gaps = GapPair {
        d1: v[1] - v[0],
        d2: v[k - 1] - v[k - 2],
    };
    let middle = v[1..k - 1].iter().all(|&m| (m - v[1]).abs() <= tol);
    let holds = middle && gaps.d1 > tol && gaps.d2 > gaps.d1 + tol;
    (holds, gaps)
}

/// Evaluates the gap premise on player 1's expected utilities.
pub fn prop1_premises_hold(
    game: &Game,
    profile: &StrategyProfile,
    tol: f64,
) -> Result<(bool, GapPair)> {
    player_one_actions(game)?;
    let u = expected_utility(game, profile, 0)?;
    Ok(utilities_premise(u.values(), tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Row {
    pub family: usize,
    pub utilities: Vec<f64>,
    /// Probability of the second-best action `a_{K-1}`.
    pub probability: f64,
    pub bound: f64,
    /// `bound + tol - probability`; negative means violated.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub all_pass: bool,
    pub min_margin: f64,
    pub rows: Vec<Prop1Row>,
}

/// Quadrature probability of `a_{K-1}` under player 1's marginal of every
/// family, against the bound `1/K`.
pub fn prop1_bound_check(
    families: &[PerturbationFamily],
    v_instances: &[UtilityVector],
    tol: f64,
    config: &SolverConfig,
) -> Result<Prop1Report> {
    if families.is_empty() || v_instances.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one family and one vector".into(),
        ));
    }
    for v in v_instances {
        if !utilities_premise(v.values(), 0.0).0 {
            return Err(Error::Precondition(format!(
                "utility vector {:?} violates the gap premise",
                v.values()
            )));
        }
    }
    for f in families {
        f.marginal(0)?;
    }
    let n = v_instances.len();
    let rows = map_indexed(config.execution, families.len() * n, |idx| {
        let (fi, vi) = (idx / n, idx % n);
        let v = &v_instances[vi];
        let k = v.len();
        let est = qrf_quadrature_iid(v, &families[fi], 0, config.quadrature_nodes)?;
        let probability = est.probabilities[k - 2];
        let bound = 1.0 / k as f64;
        let margin = bound + tol - probability;
        Ok(Prop1Row {
            family: fi,
            utilities: v.values().to_vec(),
            probability,
            bound,
            margin,
            pass: margin >= 0.0,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Prop1Report {
        all_pass: rows.iter().all(|r| r.pass),
        min_margin: rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min),
        rows,
    })
}

/// `n` premise-satisfying vectors `(0, d1, ..., d1, d1 + d2)` of length
/// `k`: `d1` steps through `0.2, 0.4, ...` and `d2 / d1` cycles through
/// `1.01, 1.5, 2, 4`.
pub fn premise_grid(k: usize, n: usize) -> Vec<UtilityVector> {
    const RATIOS: [f64; 4] = [1.01, 1.5, 2.0, 4.0];
    (0..n)
        .map(|i| {
            let d1 = 0.2 * (1 + i / RATIOS.len()) as f64;
            let v = crate::dice::gap_vector(k, d1, d1 * RATIOS[i % RATIOS.len()]);
            UtilityVector::new(v).expect("finite grid")
        })
        .collect()
}

/// Largest ε for which the open max-norm ball around `sigma_star` keeps
/// `σ_1(a_1) < 1/K` and `σ_1(a_j) > 1/K` for every middle action.
pub fn max_feasible_epsilon(sigma_star: &StrategyProfile) -> f64 {
    let p = sigma_star[0].probabilities();
    let k = p.len();
    let inv = 1.0 / k as f64;
    p[1..k - 1]
        .iter()
        .map(|&m| m - inv)
        .fold(inv - p[0], f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedEquilibrium {
    pub start: usize,
    pub profile: StrategyProfile,
    pub residual: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEvidence {
    pub family: PerturbationFamily,
    pub equilibria: Vec<SolvedEquilibrium>,
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionCertificate {
    pub game: Game,
    pub sigma_star: StrategyProfile,
    pub epsilon: f64,
    pub max_feasible_epsilon: f64,
    pub analytic_reason: String,
    /// Profiles in the ball on which the premise was evaluated.
    pub premise_samples: usize,
    pub quadrature_nodes: usize,
    pub tol: f64,
    pub numeric_evidence: Vec<FamilyEvidence>,
}

impl ExclusionCertificate {
    /// Re-solves nothing; re-evaluates every stored equilibrium against the
    /// stored game. True when all residuals are within `tol` and all
    /// distances exceed ε.
    pub fn recheck(&self) -> Result<bool> {
        if !is_nash(&self.game, &self.sigma_star, NASH_TOLERANCE)? {
            return Ok(false);
        }
        let config = SolverConfig {
            tol: self.tol,
            quadrature_nodes: self.quadrature_nodes,
            ..SolverConfig::default()
        };
        for ev in &self.numeric_evidence {
            for eq in &ev.equilibria {
                let r = structural_residual(
                    &self.game,
                    &ev.family,
                    QrfMethod::Quadrature,
                    &eq.profile,
                    &config,
                )?;
                if r > self.tol || eq.profile.distance(&self.sigma_star) <= self.epsilon {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

const NASH_TOLERANCE: f64 = 1e-9;
const PREMISE_SAMPLES: usize = 256;

/// Samples profiles inside the ball and confirms the ingredients of the
/// contradiction on each. Returns the reason text and the sample count.
fn analytic_branch(
    game: &Game,
    sigma_star: &StrategyProfile,
    epsilon: f64,
    seed: u64,
) -> Result<(String, usize)> {
    let k = game.action_counts()[0];
    let inv = 1.0 / k as f64;
    let tol = NASH_TOLERANCE;
    let mut d1_min = f64::INFINITY;
    let mut ratio_min = f64::INFINITY;
    for s in 0..PREMISE_SAMPLES {
        let r = start_profile(game, seed, s as u64 + 1);
        let d = r.distance(sigma_star);
        if d == 0.0 {
            continue;
        }
        let t = (s as f64 + 0.5) / PREMISE_SAMPLES as f64;
        let p = sigma_star.mix(&r, epsilon * t / d);
        let s1 = p[0].probabilities();
        if !(s1[0] < inv && s1[k - 2] > inv) {
            return Err(Error::ClaimFalsified(format!(
                "sampled profile {:?} leaves the ball condition",
                p.flatten()
            )));
        }
        let u = expected_utility(game, &p, 0)?;
        let tied = u.values().iter().all(|&x| (x - u[0]).abs() <= tol);
        if tied {
            continue;
        }
        let (holds, gaps) = utilities_premise(u.values(), tol);
        if !holds {
            return Err(Error::Precondition(format!(
                "gap premise fails at {:?} (d1 = {}, d2 = {}); the analytic argument does not apply",
                p.flatten(),
                gaps.d1,
                gaps.d2
            )));
        }
        d1_min = d1_min.min(gaps.d1);
        ratio_min = ratio_min.min(gaps.d2 / gaps.d1);
    }
    if !d1_min.is_finite() {
        return Err(Error::Precondition(
            "no non-degenerate profile sampled in the ball".into(),
        ));
    }
    // opponents at sigma_star's own play: either all utilities tie or the premise holds
    let u_star = expected_utility(game, sigma_star, 0)?;
    let star_tied = u_star
        .values()
        .iter()
        .all(|&x| (x - u_star[0]).abs() <= tol);
    if !star_tied && !utilities_premise(u_star.values(), tol).0 {
        return Err(Error::Precondition(
            "gap premise fails at sigma_star's opponent play".into(),
        ));
    }
    let reason = format!(
        "ball keeps sigma_1(a_1) < 1/{k} < sigma_1(a_{k_1}); at {PREMISE_SAMPLES} sampled profiles \
         with non-degenerate opponents the gap premise holds (min d1 = {d1_min:.3e}, min d2/d1 = \
         {ratio_min:.6}), so any monotone model puts at most 1/{k} on a_{k_1}; with opponents exactly \
         at sigma_star all utilities {tie} and monotonicity forces uniform play, contradicting \
         sigma_1(a_1) < 1/{k}",
        k_1 = k - 1,
        tie = if star_tied { "tie" } else { "satisfy the premise" },
    );
    Ok((reason, PREMISE_SAMPLES))
}

/// Certifies that no equilibrium of a monotone structural model lies in the
/// open max-norm ε-ball around `sigma_star`.
///
/// The analytic branch checks the premises of the gap bound inside the
/// ball. The numeric branch solves the structural QRE of each family by
/// quadrature from `starts` starting profiles and fails with
/// [`Error::ClaimFalsified`] if any solution lands inside the ball.
pub fn exclusion_ball_search(
    game: &Game,
    sigma_star: &StrategyProfile,
    epsilon: f64,
    families: &[PerturbationFamily],
    starts: usize,
    config: &SolverConfig,
) -> Result<ExclusionCertificate> {
    config.validate()?;
    player_one_actions(game)?;
    if !is_nash(game, sigma_star, NASH_TOLERANCE)? {
        return Err(Error::Precondition(
            "sigma_star is not a Nash equilibrium".into(),
        ));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let max_feasible = max_feasible_epsilon(sigma_star);
    if epsilon > max_feasible {
        return Err(Error::EpsilonTooLarge {
            epsilon,
            max_feasible: max_feasible.max(0.0),
        });
    }
    if families.is_empty() || starts == 0 {
        return Err(Error::InvalidParameter(
            "need at least one family and one start".into(),
        ));
    }
    let (analytic_reason, premise_samples) =
        analytic_branch(game, sigma_star, epsilon, config.seed)?;

    let inner = config.clone().with_execution(Execution::Serial);
    let solved = map_indexed(config.execution, families.len() * starts, |idx| {
        let (fi, s) = (idx / starts, idx % starts);
        let start = start_profile(game, config.seed, s as u64);
        let (profile, residual) =
            solve_structural_qre(game, &families[fi], QrfMethod::Quadrature, &start, &inner)?;
        let distance = profile.distance(sigma_star);
        Ok(SolvedEquilibrium {
            start: s,
            profile,
            residual,
            distance,
        })
    });
    let mut solved = solved.into_iter();
    let mut numeric_evidence = Vec::with_capacity(families.len());
    for family in families {
        let equilibria = solved.by_ref().take(starts).collect::<Result<Vec<_>>>()?;
        let min_distance = equilibria
            .iter()
            .map(|e| e.distance)
            .fold(f64::INFINITY, f64::min);
        if let Some(bad) = equilibria.iter().find(|e| e.distance <= epsilon) {
            return Err(Error::ClaimFalsified(format!(
                "equilibrium {:?} lies at distance {} <= {epsilon}",
                bad.profile.flatten(),
                bad.distance
            )));
        }
        numeric_evidence.push(FamilyEvidence {
            family: family.clone(),
            equilibria,
            min_distance,
        });
    }
    Ok(ExclusionCertificate {
        game: game.clone(),
        sigma_star: sigma_star.clone(),
        epsilon,
        max_feasible_epsilon: max_feasible,
        analytic_reason,
        premise_samples,
        quadrature_nodes: config.quadrature_nodes,
        tol: config.tol,
        numeric_evidence,
    })
}

/// Flags of a sampled profile. A profile with no flag set is "other".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionClass {
    pub nash: bool,
    pub monotone_interior: bool,
    pub monotone_boundary: bool,
    pub excluded_by_prop1: bool,
}

impl RegionClass {
    /// Set flags joined by `+`, or `other`.
    pub fn label(&self) -> String {
        let names = [
            (self.nash, "nash"),
            (self.monotone_interior, "monotone_interior"),
            (self.monotone_boundary, "monotone_boundary"),
            (self.excluded_by_prop1, "excluded_by_prop1"),
        ];
        let set: Vec<&str> = names.iter().filter(|(f, _)| *f).map(|(_, n)| *n).collect();
        if set.is_empty() {
            "other".into()
        } else {
            set.join("+")
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone_interior || self.monotone_boundary
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub profile: StrategyProfile,
    pub classification: RegionClass,
}

/// Classifies a profile: Nash; payoff monotone with every opponent action
/// played with probability above `tol` (interior) or not (boundary); and
/// monotone with `σ_1(a_{K-1}) > 1/K`, which no monotone structural model
/// can produce.
pub fn classify_region(game: &Game, profile: &StrategyProfile, tol: f64) -> Result<RegionClass> {
    let k = player_one_actions(game)?;
    let nash = is_nash(game, profile, tol)?;
    let monotone = is_payoff_monotone(game, profile, tol)?.verdict;
    let interior = profile
        .iter()
        .skip(1)
        .all(|s| s.probabilities().iter().all(|&p| p > tol));
    Ok(RegionClass {
        nash,
        monotone_interior: monotone && interior,
        monotone_boundary: monotone && !interior,
        excluded_by_prop1: monotone && profile[0][k - 2] > 1.0 / k as f64,
    })
}

/// Uniform samples on the product of simplices, classified with
/// tolerance `1e-9`.
pub fn monotone_region_sample(game: &Game, samples: usize, seed: u64) -> Result<Vec<RegionSample>> {
    player_one_actions(game)?;
    (0..samples)
        .map(|s| {
            let profile = start_profile(game, seed, s as u64 + 1);
            let classification = classify_region(game, &profile, NASH_TOLERANCE)?;
            Ok(RegionSample {
                profile,
                classification,
            })
        })
        .collect()
}
