//! Structural quantal response for i.i.d. additive payoff perturbations.
//!
//! A player with utilities `x` and perturbation `ε` picks `argmax_a x_a + ε_a`.
//! For i.i.d. coordinates with CDF `F` and density `f`,
//!
//! ```text
//! P(k) = ∫ f(t) · Π_{l≠k} F(t + x_k - x_l) dt
//! ```
//!
//! which [`qrf_quadrature_iid`] evaluates by composite Gauss-Legendre, and
//! [`qrf_monte_carlo`] estimates by counting argmaxes over seeded draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::fixed_point::damped_iteration;
use crate::game::{
    expected_utility, ordinal_violation, Game, MixedStrategy, StrategyProfile, UtilityVector,
};
use crate::quadrature::CompositeRule;
use crate::sampling::{argmax_counts, FrozenSample};

/// Probability left outside the quadrature interval on each side.
pub const TAIL_MASS: f64 = 1e-13;

/// Gauss-Legendre order used inside each quadrature panel.
pub const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalKind {
    /// Max-type extreme value, location 0.
    Gumbel,
    /// Centered normal; `scale` is the standard deviation.
    Normal,
    /// Uniform on `[0, scale]`.
    Uniform,
}

impl MarginalKind {
    pub const ALL: [MarginalKind; 3] = [
        MarginalKind::Gumbel,
        MarginalKind::Normal,
        MarginalKind::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MarginalKind::Gumbel => "gumbel",
            MarginalKind::Normal => "normal",
            MarginalKind::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for MarginalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gumbel" => Ok(MarginalKind::Gumbel),
            "normal" => Ok(MarginalKind::Normal),
            "uniform" => Ok(MarginalKind::Uniform),
            other => Err(Error::InvalidParameter(format!(
                "unknown marginal '{other}'"
            ))),
        }
    }
}

/// The distribution of each coordinate of one player's perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub kind: MarginalKind,
    pub scale: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Lower quantile of the standard normal by bisection on the CDF.
fn std_normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if std_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Marginal {
    pub fn new(kind: MarginalKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Marginal { kind, scale })
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let z = t / self.scale;
        match self.kind {
            MarginalKind::Gumbel => (-(-z).exp()).exp(),
            MarginalKind::Normal => std_normal_cdf(z),
            MarginalKind::Uniform => z.clamp(0.0, 1.0),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let z = t / self.scale;
        let density = match self.kind {
            MarginalKind::Gumbel => (-(z + (-z).exp())).exp(),
            MarginalKind::Normal => std_normal_pdf(z),
            MarginalKind::Uniform => {
                if (0.0..=1.0).contains(&z) {
                    1.0
                } else {
                    0.0
                }
            }
        };
        density / self.scale
    }

    /// Interval carrying all but `2 * TAIL_MASS` of the probability.
    pub fn integration_interval(&self) -> (f64, f64) {
        match self.kind {
            MarginalKind::Gumbel => {
                let lo = -(-TAIL_MASS.ln()).ln();
                let hi = -(-(-TAIL_MASS).ln_1p()).ln();
                (self.scale * lo, self.scale * hi)
            }
            MarginalKind::Normal => {
                let q = std_normal_quantile(TAIL_MASS);
                (self.scale * q, -self.scale * q)
            }
            MarginalKind::Uniform => (0.0, self.scale),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = match self.kind {
            MarginalKind::Gumbel => Gumbel::new(0.0, 1.0).expect("unit Gumbel").sample(rng),
            MarginalKind::Normal => StandardNormal.sample(rng),
            MarginalKind::Uniform => rng.random::<f64>(),
        };
        self.scale * z
    }
}

/// One marginal per player; every action of a player gets an independent
/// draw from that player's marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FamilyEntry>", into = "Vec<FamilyEntry>")]
pub struct PerturbationFamily {
    marginals: Vec<Marginal>,
}

/// Wire format of one player's entry:
/// `{ "player": i, "marginal": "gumbel" | "normal" | "uniform", "scale": s }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub player: usize,
    pub marginal: MarginalKind,
    pub scale: f64,
}

impl TryFrom<Vec<FamilyEntry>> for PerturbationFamily {
    type Error = Error;
    fn try_from(mut entries: Vec<FamilyEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.player);
        if entries.iter().enumerate().any(|(i, e)| e.player != i) {
            return Err(Error::InvalidParameter(
                "family entries must cover players 0..n exactly once".into(),
            ));
        }
        let marginals = entries
            .into_iter()
            .map(|e| Marginal::new(e.marginal, e.scale))
            .collect::<Result<Vec<_>>>()?;
        PerturbationFamily::new(marginals)
    }
}

impl From<PerturbationFamily> for Vec<FamilyEntry> {
    fn from(f: PerturbationFamily) -> Self {
        f.marginals
            .into_iter()
            .enumerate()
            .map(|(player, m)| FamilyEntry {
                player,
                marginal: m.kind,
                scale: m.scale,
            })
            .collect()
    }
}

impl PerturbationFamily {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidParameter(
                "family needs at least one player".into(),
            ));
        }
        Ok(PerturbationFamily { marginals })
    }

    /// The same marginal for every player.
    pub fn iid(players: usize, kind: MarginalKind, scale: f64) -> Result<Self> {
        let m = Marginal::new(kind, scale)?;
        PerturbationFamily::new(vec![m; players])
    }

    pub fn marginal(&self, player: usize) -> Result<&Marginal> {
        self.marginals.get(player).ok_or_else(|| {
            Error::DimensionMismatch(format!(
                "family has {} players, asked for player {player}",
                self.marginals.len()
            ))
        })
    }

    pub fn players(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QrfMethod {
    MonteCarlo,
    Quadrature,
}

impl std::str::FromStr for QrfMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monte_carlo" | "monte-carlo" | "mc" => Ok(QrfMethod::MonteCarlo),
            "quadrature" | "quad" => Ok(QrfMethod::Quadrature),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimateMethod {
    MonteCarlo { samples: u64, ties: u64 },
    Quadrature { nodes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrfEstimate {
    pub probabilities: MixedStrategy,
    pub standard_errors: Vec<f64>,
    #[serde(flatten)]
    pub method: EstimateMethod,
}

impl QrfEstimate {
    pub fn max_standard_error(&self) -> f64 {
        self.standard_errors.iter().copied().fold(0.0, f64::max)
    }
}

fn mc_estimate(counts: crate::sampling::ArgmaxCounts) -> QrfEstimate {
    let n = counts.samples as f64;
    let probs: Vec<f64> = counts.counts.iter().map(|&c| c as f64 / n).collect();
    let se = probs.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    QrfEstimate {
        probabilities: MixedStrategy::from_raw(probs),
        standard_errors: se,
        method: EstimateMethod::MonteCarlo {
            samples: counts.samples,
            ties: counts.ties,
        },
    }
}

/// Fraction of `config.mc_samples` perturbation draws under which each
/// action is the argmax of `x + ε`. Ties go to the lowest index and are
/// counted in the returned method record.
pub fn qrf_monte_carlo(
    x: &UtilityVector,
    family: &PerturbationFamily,
    player: usize,
    config: &SolverConfig,
) -> Result<QrfEstimate> {
    if config.mc_samples == 0 {
        return Err(Error::InvalidParameter(
            "mc_samples must be positive".into(),
        ));
    }
    let marginal = family.marginal(player)?;
    let counts = argmax_counts(
        x.values(),
        marginal,
        player,
        config.mc_samples,
        config.seed,
        config.execution,
    );
    Ok(mc_estimate(counts))
}

fn quadrature_probabilities(x: &[f64], marginal: &Marginal, nodes: usize) -> Vec<f64> {
    let rule = CompositeRule::new(PANEL_ORDER);
    let panels = (nodes / PANEL_ORDER).max(1);
    let (lo, hi) = marginal.integration_interval();
    let k = x.len();
    let mut raw = Vec::with_capacity(k);
    for a in 0..k {
        let shifts: Vec<f64> = (0..k).filter(|&l| l != a).map(|l| x[a] - x[l]).collect();
        // Bounded support puts kinks where a shifted CDF hits 0 or 1; split there.
        let mut cuts = vec![lo, hi];
        if marginal.kind == MarginalKind::Uniform {
            for d in &shifts {
                for c in [-d, marginal.scale - d] {
                    if c > lo && c < hi {
                        cuts.push(c);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let per_piece = panels.div_ceil(cuts.len() - 1);
        let integrand = |t: f64| {
            let mut v = marginal.pdf(t);
            for d in &shifts {
                if v == 0.0 {
                    break;
                }
                v *= marginal.cdf(t + d);
            }
            v
        };
        let total: f64 = cuts
            .windows(2)
            .map(|w| rule.integrate(w[0], w[1], per_piece, integrand))
            .sum();
        raw.push(total);
    }
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / sum).collect()
}

/// Choice probabilities by one-dimensional quadrature of the i.i.d. argmax
/// integral. Standard errors are zero.
pub fn qrf_quadrature_iid(
    x: &UtilityVector,
    family: &PerturbationFamily,
    player: usize,
    nodes: usize,
) -> Result<QrfEstimate> {
    if nodes == 0 {
        return Err(Error::InvalidParameter(
            "quadrature needs at least one node".into(),
        ));
    }
    let marginal = family.marginal(player)?;
    let probs = quadrature_probabilities(x.values(), marginal, nodes);
    Ok(QrfEstimate {
        standard_errors: vec![0.0; probs.len()],
        probabilities: MixedStrategy::from_raw(probs),
        method: EstimateMethod::Quadrature { nodes },
    })
}

/// The structural response map `σ ↦ (Q_i(U_i(σ_{-i}, ·)))_i`, with the
/// sampling slack `3 · max s.e.` for the Monte Carlo variant.
enum ResponseMap {
    Quadrature { nodes: usize },
    MonteCarlo { samples: Vec<FrozenSample> },
}

impl ResponseMap {
    fn new(
        game: &Game,
        family: &PerturbationFamily,
        method: QrfMethod,
        config: &SolverConfig,
    ) -> Result<Self> {
        if family.players() != game.player_count() {
            return Err(Error::DimensionMismatch(format!(
                "family covers {} players, game has {}",
                family.players(),
                game.player_count()
            )));
        }
        Ok(match method {
            QrfMethod::Quadrature => ResponseMap::Quadrature {
                nodes: config.quadrature_nodes,
            },
            QrfMethod::MonteCarlo => {
                if config.mc_samples == 0 {
                    return Err(Error::InvalidParameter(
                        "mc_samples must be positive".into(),
                    ));
                }
                let samples = (0..game.player_count())
                    .map(|i| {
                        Ok(FrozenSample::draw(
                            family.marginal(i)?,
                            i,
                            game.action_counts()[i],
                            config.mc_samples,
                            config.seed,
                            config.execution,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ResponseMap::MonteCarlo { samples }
            }
        })
    }

    fn respond(
        &self,
        game: &Game,
        family: &PerturbationFamily,
        profile: &StrategyProfile,
        config: &SolverConfig,
    ) -> Result<(StrategyProfile, f64)> {
        let mut strategies = Vec::with_capacity(game.player_count());
        let mut slack: f64 = 0.0;
        for i in 0..game.player_count() {
            let u = expected_utility(game, profile, i)?;
            let est = match self {
                ResponseMap::Quadrature { nodes } => qrf_quadrature_iid(&u, family, i, *nodes)?,
                ResponseMap::MonteCarlo { samples } => {
                    mc_estimate(samples[i].counts(u.values(), config.execution))
                }
            };
            slack = slack.max(3.0 * est.max_standard_error());
            strategies.push(est.probabilities);
        }
        Ok((StrategyProfile::new(strategies)?, slack))
    }
}

/// Damped fixed-point iteration on the structural response map.
///
/// The Monte Carlo variant draws one sample per player up front and reuses
/// it in every iteration (common random numbers), and accepts a residual of
/// `config.tol + 3 · max s.e.`.
pub fn solve_structural_qre(
    game: &Game,
    family: &PerturbationFamily,
    method: QrfMethod,
    start: &StrategyProfile,
    config: &SolverConfig,
) -> Result<(StrategyProfile, f64)> {
    let map = ResponseMap::new(game, family, method, config)?;
    damped_iteration(game, start, config, |sigma| {
        map.respond(game, family, sigma, config)
    })
}

/// `‖σ - Q(U(σ))‖∞` under the structural response map.
pub fn structural_residual(
    game: &Game,
    family: &PerturbationFamily,
    method: QrfMethod,
    profile: &StrategyProfile,
    config: &SolverConfig,
) -> Result<f64> {
    let map = ResponseMap::new(game, family, method, config)?;
    let (response, _) = map.respond(game, family, profile, config)?;
    Ok(profile.distance(&response))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub verdict: bool,
    pub worst_violation: f64,
    pub witness: Option<UtilityVector>,
    pub vectors_checked: usize,
}

/// Utility vectors with exact ties that random draws would never produce.
fn crafted_vectors(k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; k], (0..k).map(|a| a as f64).collect()];
    if k >= 2 {
        let mut pair = vec![0.5; k];
        pair[0] = -0.3;
        out.push(pair);
        let mut top_tie = (0..k).map(|a| 0.25 * a as f64).collect::<Vec<_>>();
        top_tie[k - 1] = top_tie[k - 2];
        out.push(top_tie);
    }
    if k >= 3 {
        let mut premise = vec![1.0; k];
        premise[0] = 0.0;
        premise[k - 1] = 3.0;
        out.push(premise);
    }
    out
}

/// Tests ordinal equivalence of an arbitrary quantal response function on
/// `trials` standard-normal utility vectors plus a few crafted ones with
/// ties. The tolerance per vector is `max(3 · max s.e., 1e-8)`.
pub fn check_qrf_monotone_with<F>(
    k: usize,
    trials: usize,
    seed: u64,
    qrf: F,
) -> Result<MonotoneCheck>
where
    F: Fn(&UtilityVector) -> Result<QrfEstimate>,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one action".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut vectors = crafted_vectors(k);
    for _ in 0..trials {
        vectors.push(
            (0..k)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
    }
    let mut worst = 0.0;
    let mut witness = None;
    let mut verdict = true;
    for v in &vectors {
        let x = UtilityVector::new(v.clone())?;
        let est = qrf(&x)?;
        let tol = (3.0 * est.max_standard_error()).max(1e-8);
        if let Some((_, _, margin)) = ordinal_violation(v, est.probabilities.probabilities(), tol) {
            if verdict || margin > worst {
                worst = margin;
                witness = Some(x);
            }
            verdict = false;
        }
    }
    Ok(MonotoneCheck {
        verdict,
        worst_violation: worst,
        witness,
        vectors_checked: vectors.len(),
    })
}

/// Sampled check that the quadrature QRF of `family` for `player` is
/// ordinally equivalent to its input on `k`-action utility vectors.
pub fn check_qrf_monotone(
    family: &PerturbationFamily,
    player: usize,
    k: usize,
    trials: usize,
    config: &SolverConfig,
) -> Result<MonotoneCheck> {
    family.marginal(player)?;
    check_qrf_monotone_with(k, trials, config.seed, |x| {
        qrf_quadrature_iid(x, family, player, config.quadrature_nodes)
    })
}

/// Monte Carlo mass of `{ε : action k is the unique argmax of ε}` for a
/// `k_actions`-dimensional perturbation. Actions are 0-based.
pub fn estimate_region_mass(
    family: &PerturbationFamily,
    player: usize,
    k_actions: usize,
    k: usize,
    config: &SolverConfig,
) -> Result<(f64, f64)> {
    if k >= k_actions {
        return Err(Error::InvalidParameter(format!(
            "action {k} out of range for {k_actions} actions"
        )));
    }
    if k_actions == 1 {
        return Ok((1.0, 0.0));
    }
    let zeros = UtilityVector::new(vec![0.0; k_actions])?;
    let est = qrf_monte_carlo(&zeros, family, player, config)?;
    let ties = match est.method {
        EstimateMethod::MonteCarlo { ties, .. } => ties,
        EstimateMethod::Quadrature { .. } => 0,
    };
    // ties break toward the lowest index and would bias it
    if ties > 0 {
        return Err(Error::Precondition(format!(
            "{ties} exact ties among continuous draws"
        )));
    }
    Ok((est.probabilities[k], est.standard_errors[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_paradox_game, build_prism_game, is_payoff_monotone};
    use crate::logit::{logit_qrf, solve_logit_fixed_point, LogitParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uv(v: &[f64]) -> UtilityVector {
        UtilityVector::new(v.to_vec()).unwrap()
    }

    fn fam(kind: MarginalKind, scale: f64) -> PerturbationFamily {
        PerturbationFamily::iid(2, kind, scale).unwrap()
    }

    fn mc_cfg(samples: usize, seed: u64) -> SolverConfig {
        SolverConfig {
            mc_samples: samples,
            seed,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn marginal_cdfs_hit_their_quantiles() {
        for kind in MarginalKind::ALL {
            let m = Marginal::new(kind, 2.5).unwrap();
            let (lo, hi) = m.integration_interval();
            if kind == MarginalKind::Uniform {
                assert_eq!((lo, hi), (0.0, 2.5));
            } else {
                assert!((m.cdf(lo) - TAIL_MASS).abs() < 1e-15);
                assert!((1.0 - m.cdf(hi) - TAIL_MASS).abs() < 1e-15);
            }
            // density integrates to one over the interval
            let rule = CompositeRule::new(16);
            let mass = rule.integrate(lo, hi, 128, |t| m.pdf(t));
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-11);
        }
        assert!(Marginal::new(MarginalKind::Normal, 0.0).is_err());
        assert!(Marginal::new(MarginalKind::Normal, f64::NAN).is_err());
    }

    #[test]
    fn mc_constant_vector_is_uniform() {
        for kind in MarginalKind::ALL {
            let est =
                qrf_monte_carlo(&uv(&[2.0; 4]), &fam(kind, 1.0), 0, &mc_cfg(200_000, 11)).unwrap();
            for a in 0..4 {
                assert!(
                    (est.probabilities[a] - 0.25).abs() <= 3.0 * est.standard_errors[a] + 1e-12
                );
            }
            // equal utilities are the worst case for float ties
            match est.method {
                EstimateMethod::MonteCarlo { samples, ties } => {
                    assert!(
                        (ties as f64) < 1e-6 * samples as f64,
                        "{kind:?}: {ties} ties"
                    )
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn mc_dominant_gap() {
        for kind in MarginalKind::ALL {
            let est =
                qrf_monte_carlo(&uv(&[0.0, 1e6]), &fam(kind, 1.0), 1, &mc_cfg(50_000, 2)).unwrap();
            assert_eq!(est.probabilities.probabilities(), &[0.0, 1.0]);
            match est.method {
                EstimateMethod::MonteCarlo { ties, samples } => {
                    assert_eq!(ties, 0);
                    assert_eq!(samples, 50_000);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn mc_gumbel_matches_closed_form() {
        let est = qrf_monte_carlo(
            &uv(&[0.0, 1.0]),
            &fam(MarginalKind::Gumbel, 1.0),
            0,
            &mc_cfg(400_000, 5),
        )
        .unwrap();
        let e = std::f64::consts::E;
        let want = [1.0 / (1.0 + e), e / (1.0 + e)];
        for (a, w) in want.iter().enumerate() {
            assert!((est.probabilities[a] - w).abs() <= 3.0 * est.standard_errors[a]);
        }
    }

    #[test]
    fn mc_requires_samples() {
        assert!(qrf_monte_carlo(
            &uv(&[0.0, 1.0]),
            &fam(MarginalKind::Normal, 1.0),
            0,
            &mc_cfg(0, 0)
        )
        .is_err());
    }

    #[test]
    fn quadrature_constant_vector_is_uniform() {
        let est =
            qrf_quadrature_iid(&uv(&[1.5; 4]), &fam(MarginalKind::Normal, 1.0), 0, 2048).unwrap();
        for a in 0..4 {
            assert_abs_diff_eq!(est.probabilities[a], 0.25, epsilon = 1e-9);
        }
        assert!(est.standard_errors.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn quadrature_gumbel_matches_logit() {
        let est =
            qrf_quadrature_iid(&uv(&[0.0, 1.0]), &fam(MarginalKind::Gumbel, 1.0), 0, 2048).unwrap();
        let logit = logit_qrf(&uv(&[0.0, 1.0]), 1.0).unwrap();
        assert!(est.probabilities.distance(&logit) < 1e-8);
        assert_abs_diff_eq!(est.probabilities[1], 0.7310585786300049, epsilon = 1e-8);
    }

    #[test]
    fn quadrature_uniform_cannot_overcome_gap() {
        let est = qrf_quadrature_iid(&uv(&[0.0, 1.0]), &fam(MarginalKind::Uniform, 0.8), 0, 2048)
            .unwrap();
        assert_eq!(est.probabilities.probabilities(), &[0.0, 1.0]);
    }

    #[test]
    fn quadrature_uniform_two_actions_closed_form() {
        // P(x_0 + U_0 > x_1 + U_1) with gap d < s: (s - d)^2 / (2 s^2)
        let (s, d) = (2.0, 0.5);
        let est =
            qrf_quadrature_iid(&uv(&[0.0, d]), &fam(MarginalKind::Uniform, s), 0, 64).unwrap();
        assert_abs_diff_eq!(
            est.probabilities[0],
            (s - d) * (s - d) / (2.0 * s * s),
            epsilon = 1e-14
        );
    }

    #[test]
    fn quadrature_and_mc_agree_on_random_instances() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut failures = 0;
        let mut checked = 0;
        for trial in 0..50 {
            let kind = MarginalKind::ALL[trial % 3];
            let k = 2 + trial % 4;
            let scale = rng.random_range(0.3..3.0);
            let x: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f = fam(kind, scale);
            let q = qrf_quadrature_iid(&uv(&x), &f, 0, 2048).unwrap();
            let m = qrf_monte_carlo(&uv(&x), &f, 0, &mc_cfg(100_000, trial as u64)).unwrap();
            for a in 0..k {
                let p = q.probabilities[a];
                let se = (p * (1.0 - p) / 100_000.0).sqrt();
                checked += 1;
                if (m.probabilities[a] - p).abs() > 4.0 * se + 1e-12 {
                    failures += 1;
                }
            }
        }
        // 4 s.e. two-sided: ~6e-5 per entry
        assert_eq!(
            failures, 0,
            "{failures} of {checked} entries outside 4 s.e."
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn quadrature_translation_invariant(
            x in prop::collection::vec(-3.0f64..3.0, 2..6),
            c in -20.0f64..20.0,
            kind in prop::sample::select(MarginalKind::ALL.to_vec()),
        ) {
            let f = fam(kind, 1.0);
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let a = qrf_quadrature_iid(&uv(&x), &f, 0, 2048).unwrap();
            let b = qrf_quadrature_iid(&uv(&shifted), &f, 0, 2048).unwrap();
            prop_assert!(a.probabilities.distance(&b.probabilities) < 1e-10);
        }

        #[test]
        fn quadrature_scale_equivariant(
            x in prop::collection::vec(-3.0f64..3.0, 2..6),
            s in 0.2f64..5.0,
            kind in prop::sample::select(MarginalKind::ALL.to_vec()),
        ) {
            let scaled: Vec<f64> = x.iter().map(|v| v / s).collect();
            let a = qrf_quadrature_iid(&uv(&x), &fam(kind, s), 0, 2048).unwrap();
            let b = qrf_quadrature_iid(&uv(&scaled), &fam(kind, 1.0), 0, 2048).unwrap();
            prop_assert!(a.probabilities.distance(&b.probabilities) < 1e-10);
        }

        #[test]
        fn quadrature_own_payoff_monotone(
            x in prop::collection::vec(-2.0f64..2.0, 2..5),
            bump in 0.0f64..1.5,
            kind in prop::sample::select(MarginalKind::ALL.to_vec()),
        ) {
            let f = fam(kind, 1.0);
            let mut y = x.clone();
            y[0] += bump;
            let a = qrf_quadrature_iid(&uv(&x), &f, 0, 2048).unwrap();
            let b = qrf_quadrature_iid(&uv(&y), &f, 0, 2048).unwrap();
            prop_assert!(b.probabilities[0] >= a.probabilities[0] - 1e-12);
        }

        #[test]
        fn gumbel_quadrature_is_logit(
            x in prop::collection::vec(-4.0f64..4.0, 2..7),
            lambda in 0.1f64..5.0,
        ) {
            let q = qrf_quadrature_iid(&uv(&x), &fam(MarginalKind::Gumbel, 1.0 / lambda), 0, 2048).unwrap();
            let l = logit_qrf(&uv(&x), lambda).unwrap();
            prop_assert!(q.probabilities.distance(&l) < 1e-8);
        }
    }

    #[test]
    fn structural_gumbel_matches_logit_equilibrium() {
        let g = build_prism_game();
        let cfg = SolverConfig::default();
        for lambda in [0.05, 0.3, 1.0, 4.0] {
            let f = PerturbationFamily::iid(2, MarginalKind::Gumbel, 1.0 / lambda).unwrap();
            let (s, res) =
                solve_structural_qre(&g, &f, QrfMethod::Quadrature, &g.uniform_profile(), &cfg)
                    .unwrap();
            assert!(res <= cfg.tol);
            let params = LogitParams::homogeneous(2, lambda).unwrap();
            let (l, _) = solve_logit_fixed_point(&g, &params, &g.uniform_profile(), &cfg).unwrap();
            assert!(s.distance(&l) < 1e-6, "lambda {lambda}: {}", s.distance(&l));
        }
    }

    #[test]
    fn structural_paradox_respects_third_bound() {
        let g = build_paradox_game(3, &[2]).unwrap();
        let cfg = SolverConfig::default();
        for kind in MarginalKind::ALL {
            for scale in [0.3, 1.0, 3.0] {
                let f = PerturbationFamily::iid(2, kind, scale).unwrap();
                let (s, _) =
                    solve_structural_qre(&g, &f, QrfMethod::Quadrature, &g.uniform_profile(), &cfg)
                        .unwrap();
                assert!(s[0][1] <= 1.0 / 3.0 + 1e-6, "{kind:?} {scale}: {:?}", s);
                assert!(is_payoff_monotone(&g, &s, 1e-6).unwrap().verdict);
            }
        }
    }

    #[test]
    fn structural_huge_uniform_noise_is_near_uniform() {
        let g = build_prism_game();
        let f = PerturbationFamily::iid(2, MarginalKind::Uniform, 1e7).unwrap();
        let (s, _) = solve_structural_qre(
            &g,
            &f,
            QrfMethod::Quadrature,
            &g.uniform_profile(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(s.distance(&g.uniform_profile()) < 1e-4);
    }

    #[test]
    fn structural_monte_carlo_within_sampling_slack() {
        let g = build_prism_game();
        let f = PerturbationFamily::iid(2, MarginalKind::Gumbel, 30.0).unwrap();
        let cfg = mc_cfg(200_000, 8);
        let (mc, res) =
            solve_structural_qre(&g, &f, QrfMethod::MonteCarlo, &g.uniform_profile(), &cfg)
                .unwrap();
        let (quad, _) =
            solve_structural_qre(&g, &f, QrfMethod::Quadrature, &g.uniform_profile(), &cfg)
                .unwrap();
        assert!(res <= cfg.tol + 3.0 * (0.25f64 / 200_000.0).sqrt());
        assert!(mc.distance(&quad) < 0.01);
        // common random numbers make the solve deterministic
        let (again, _) =
            solve_structural_qre(&g, &f, QrfMethod::MonteCarlo, &g.uniform_profile(), &cfg)
                .unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn family_size_must_match_game() {
        let g = build_prism_game();
        let f = PerturbationFamily::iid(3, MarginalKind::Normal, 1.0).unwrap();
        assert!(solve_structural_qre(
            &g,
            &f,
            QrfMethod::Quadrature,
            &g.uniform_profile(),
            &SolverConfig::default()
        )
        .is_err());
    }

    #[test]
    fn monotone_check_gumbel_and_normal_pass() {
        let cfg = SolverConfig::default();
        for k in [2, 3, 5] {
            let r = check_qrf_monotone(&fam(MarginalKind::Gumbel, 1.0), 0, k, 30, &cfg).unwrap();
            assert!(r.verdict && r.witness.is_none(), "gumbel k={k}: {r:?}");
        }
        let r = check_qrf_monotone(&fam(MarginalKind::Normal, 1.0), 0, 3, 30, &cfg).unwrap();
        assert!(r.verdict);
        assert_eq!(r.vectors_checked, 30 + 5);
    }

    #[test]
    fn monotone_check_flags_bounded_support_dead_zones() {
        // uniform noise on [0, 0.5] gives zero probability to every action
        // more than 0.5 below the best, collapsing strict utility gaps
        let r = check_qrf_monotone(
            &fam(MarginalKind::Uniform, 0.5),
            0,
            3,
            50,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(!r.verdict);
        assert!(r.witness.is_some());
    }

    #[test]
    fn monotone_check_catches_reversed_test_double() {
        let f = fam(MarginalKind::Gumbel, 1.0);
        let r = check_qrf_monotone_with(3, 20, 1, |x| {
            let mut est = qrf_quadrature_iid(x, &f, 0, 512)?;
            let mut p = est.probabilities.probabilities().to_vec();
            p.swap(0, 2);
            est.probabilities = MixedStrategy::from_raw(p);
            Ok(est)
        })
        .unwrap();
        assert!(!r.verdict);
        assert!(r.witness.is_some());
        assert!(r.worst_violation > 0.0);
    }

    #[test]
    fn region_mass_examples() {
        let cfg = mc_cfg(300_000, 21);
        for kind in MarginalKind::ALL {
            for k in 0..3 {
                let (m, se) = estimate_region_mass(&fam(kind, 1.0), 0, 3, k, &cfg).unwrap();
                assert!(
                    (m - 1.0 / 3.0).abs() <= 3.0 * se,
                    "{kind:?} {k}: {m} ± {se}"
                );
            }
        }
        assert_eq!(
            estimate_region_mass(&fam(MarginalKind::Normal, 1.0), 0, 1, 0, &cfg).unwrap(),
            (1.0, 0.0)
        );
        let (m, se) = estimate_region_mass(&fam(MarginalKind::Normal, 7.0), 0, 5, 1, &cfg).unwrap();
        assert!((m - 0.2).abs() <= 3.0 * se);
        assert!(estimate_region_mass(&fam(MarginalKind::Normal, 1.0), 0, 3, 3, &cfg).is_err());
    }

    #[test]
    fn family_json_round_trip() {
        let f = PerturbationFamily::new(vec![
            Marginal::new(MarginalKind::Gumbel, 0.5).unwrap(),
            Marginal::new(MarginalKind::Uniform, 2.0).unwrap(),
        ])
        .unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(
            s,
            r#"[{"player":0,"marginal":"gumbel","scale":0.5},{"player":1,"marginal":"uniform","scale":2.0}]"#
        );
        assert_eq!(serde_json::from_str::<PerturbationFamily>(&s).unwrap(), f);
        assert!(serde_json::from_str::<PerturbationFamily>(
            r#"[{"player":1,"marginal":"normal","scale":1.0}]"#
        )
        .is_err());
        assert!(serde_json::from_str::<PerturbationFamily>(
            r#"[{"player":0,"marginal":"normal","scale":-1.0}]"#
        )
        .is_err());
    }
}
