//! Exact choice probabilities under "dice" perturbations.
//!
//! A dice perturbation is uniform over the `K!` ways of assigning the entries
//! of a strictly increasing base vector to the `K` actions. It is a finite
//! support distribution, so it is used here only as an enumeration oracle for
//! the bound `P(a_{K-1}) <= 1/K` under exchangeable noise, never as a
//! member of the absolutely continuous perturbation class.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::game::{MixedStrategy, UtilityVector};

/// Largest supported action count (`8! = 40320` faces).
pub const MAX_DICE_ACTIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicePerturbation {
    base: Vec<f64>,
}

impl DicePerturbation {
    pub fn new(base: Vec<f64>) -> Result<Self> {
        if base.is_empty() || base.len() > MAX_DICE_ACTIONS {
            return Err(Error::InvalidParameter(format!(
                "dice needs 1..={MAX_DICE_ACTIONS} entries, got {}",
                base.len()
            )));
        }
        if base.iter().any(|b| !b.is_finite()) || base.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "dice base must be finite and strictly increasing: {base:?}"
            )));
        }
        Ok(DicePerturbation { base })
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn face_count(&self) -> usize {
        (1..=self.base.len()).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceOutcome {
    Strict(usize),
    Tie(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    /// Perturbation received by each action on this face.
    pub perturbation: Vec<f64>,
    pub utilities: Vec<f64>,
    pub outcome: FaceOutcome,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceReport {
    pub faces: Vec<Face>,
}

impl FaceReport {
    /// Faces on which each action is the strict argmax.
    pub fn strict_counts(&self) -> Vec<usize> {
        let k = self.faces.first().map_or(0, |f| f.utilities.len());
        let mut counts = vec![0; k];
        for f in &self.faces {
            if let FaceOutcome::Strict(a) = f.outcome {
                counts[a] += 1;
            }
        }
        counts
    }

    /// Faces on which each action shares the maximum with another action.
    pub fn tied_counts(&self) -> Vec<usize> {
        let k = self.faces.first().map_or(0, |f| f.utilities.len());
        let mut counts = vec![0; k];
        for f in &self.faces {
            if let FaceOutcome::Tie(actions) = &f.outcome {
                for &a in actions {
                    counts[a] += 1;
                }
            }
        }
        counts
    }

    pub fn has_ties(&self) -> bool {
        self.faces
            .iter()
            .any(|f| matches!(f.outcome, FaceOutcome::Tie(_)))
    }
}

fn check_lengths(v: &[f64], dice: &DicePerturbation) -> Result<()> {
    if v.len() != dice.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} utilities for a {}-entry dice",
            v.len(),
            dice.len()
        )));
    }
    Ok(())
}

fn face_outcome(utilities: &[f64]) -> FaceOutcome {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..utilities.len())
        .filter(|&a| utilities[a] == max)
        .collect();
    if winners.len() == 1 {
        FaceOutcome::Strict(winners[0])
    } else {
        FaceOutcome::Tie(winners)
    }
}

/// Every face of the dice applied to `v`, in lexicographic order of the
/// assignment (action `a` receives `base[perm[a]]`).
pub fn enumerate_argmax_faces(v: &UtilityVector, dice: &DicePerturbation) -> Result<FaceReport> {
    check_lengths(v.values(), dice)?;
    let k = dice.len();
    let probability = 1.0 / dice.face_count() as f64;
    let faces = (0..k)
        .permutations(k)
        .map(|perm| {
            let perturbation: Vec<f64> = perm.iter().map(|&p| dice.base[p]).collect();
            let utilities: Vec<f64> = v
                .values()
                .iter()
                .zip(&perturbation)
                .map(|(a, b)| a + b)
                .collect();
            Face {
                outcome: face_outcome(&utilities),
                perturbation,
                utilities,
                probability,
            }
        })
        .collect();
    Ok(FaceReport { faces })
}

/// Strict-argmax face counts and the number of tied faces, without
/// materializing the report.
pub fn strict_argmax_counts(v: &[f64], dice: &DicePerturbation) -> Result<(Vec<usize>, usize)> {
    check_lengths(v, dice)?;
    let k = dice.len();
    let mut counts = vec![0; k];
    let mut ties = 0;
    let mut total = vec![0.0; k];
    for perm in (0..k).permutations(k) {
        for a in 0..k {
            total[a] = v[a] + dice.base[perm[a]];
        }
        match face_outcome(&total) {
            FaceOutcome::Strict(a) => counts[a] += 1,
            FaceOutcome::Tie(_) => ties += 1,
        }
    }
    Ok((counts, ties))
}

/// `(# faces where a is the strict argmax) / K!`. Errors on any tied face.
pub fn dice_choice_probabilities(
    v: &UtilityVector,
    dice: &DicePerturbation,
) -> Result<MixedStrategy> {
    let report = enumerate_argmax_faces(v, dice)?;
    if let Some(Face {
        outcome: FaceOutcome::Tie(actions),
        ..
    }) = report
        .faces
        .iter()
        .find(|f| matches!(f.outcome, FaceOutcome::Tie(_)))
    {
        return Err(Error::TieEncountered {
            actions: actions.clone(),
        });
    }
    let n = dice.face_count() as f64;
    Ok(MixedStrategy::from_raw(
        report
            .strict_counts()
            .into_iter()
            .map(|c| c as f64 / n)
            .collect(),
    ))
}

/// Report mode: `[strict / K!, (strict + tied) / K!]` for each action.
pub fn dice_choice_intervals(
    v: &UtilityVector,
    dice: &DicePerturbation,
) -> Result<Vec<(f64, f64)>> {
    let report = enumerate_argmax_faces(v, dice)?;
    let n = dice.face_count() as f64;
    Ok(report
        .strict_counts()
        .into_iter()
        .zip(report.tied_counts())
        .map(|(s, t)| (s as f64 / n, (s + t) as f64 / n))
        .collect())
}

/// For three actions: if `a_2` is the strict argmax when the dice assigns
/// `(y, x, 0)`, it is not the strict argmax under `(0, y, x)`.
pub fn dice_implication_holds(v: &[f64], dice: &DicePerturbation) -> Result<bool> {
    if v.len() != 3 || dice.len() != 3 {
        return Err(Error::InvalidParameter(
            "implication check is for three actions".into(),
        ));
    }
    let (x, y) = (dice.base[1] - dice.base[0], dice.base[2] - dice.base[0]);
    let wins = |pert: [f64; 3]| {
        let u = [v[0] + pert[0], v[1] + pert[1], v[2] + pert[2]];
        face_outcome(&u) == FaceOutcome::Strict(1)
    };
    Ok(!(wins([y, x, 0.0]) && wins([0.0, y, x])))
}

/// Product grid of utility vectors and dice bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceGrid {
    pub utilities: Vec<Vec<f64>>,
    pub bases: Vec<Vec<f64>>,
}

impl DiceGrid {
    /// Vectors `(0, d1, ..., d1, d1 + d2)` of length `k` for every pair
    /// with `d2 > d1`.
    pub fn premise_utilities(k: usize, d1_values: &[f64], d2_values: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for &d1 in d1_values {
            for &d2 in d2_values {
                if d2 > d1 {
                    out.push(gap_vector(k, d1, d2));
                }
            }
        }
        out
    }

    /// All strictly increasing `(0, b_1, ..., b_{k-1})` with entries drawn
    /// from `{step, 2 step, ..., steps * step}`.
    pub fn increasing_bases(k: usize, step: f64, steps: usize) -> Vec<Vec<f64>> {
        (1..=steps)
            .combinations(k - 1)
            .map(|c| {
                let mut b = vec![0.0];
                b.extend(c.into_iter().map(|i| i as f64 * step));
                b
            })
            .collect()
    }
}

/// `(0, d1, ..., d1, d1 + d2)` of length `k`.
pub fn gap_vector(k: usize, d1: f64, d2: f64) -> Vec<f64> {
    let mut v = vec![d1; k];
    v[0] = 0.0;
    v[k - 1] = d1 + d2;
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceRow {
    pub utilities: Vec<f64>,
    pub base: Vec<f64>,
    /// Strict-argmax probability of each action.
    pub probabilities: Vec<f64>,
    pub tied_faces: usize,
    /// Strict-argmax faces of `a_{K-1}`.
    pub target_faces: usize,
    /// For `K = 3`, whether the two-face implication held; `None` otherwise.
    pub implication: Option<bool>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceBoundReport {
    pub k: usize,
    pub all_pass: bool,
    pub instances: usize,
    pub counterexamples: Vec<DiceRow>,
    pub rows: Vec<DiceRow>,
}

fn validate_shapes(k: usize, grid: &DiceGrid) -> Result<Vec<DicePerturbation>> {
    if !(3..=MAX_DICE_ACTIONS).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 3..={MAX_DICE_ACTIONS}, got {k}"
        )));
    }
    if grid.utilities.is_empty() || grid.bases.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if let Some(v) = grid
        .utilities
        .iter()
        .find(|v| v.len() != k || v.iter().any(|x| !x.is_finite()))
    {
        return Err(Error::InvalidParameter(format!(
            "malformed utility vector {v:?}"
        )));
    }
    grid.bases
        .iter()
        .map(|b| {
            if b.len() != k {
                return Err(Error::InvalidParameter(format!(
                    "base {b:?} does not have {k} entries"
                )));
            }
            DicePerturbation::new(b.clone())
        })
        .collect()
}

/// Checks `P(a_{K-1}) <= 1/K` (strict-argmax counting) on every grid point
/// without enforcing the gap premise on the utilities.
pub fn scan_dice_grid(k: usize, grid: &DiceGrid, exec: Execution) -> Result<DiceBoundReport> {
    let dice = validate_shapes(k, grid)?;
    let faces = dice[0].face_count();
    let limit = faces / k;
    let per_base = map_indexed(exec, dice.len(), |b| {
        grid.utilities
            .iter()
            .map(|v| {
                let (counts, ties) = strict_argmax_counts(v, &dice[b]).expect("shapes validated");
                let implication =
                    (k == 3).then(|| dice_implication_holds(v, &dice[b]).expect("k = 3"));
                let target = counts[k - 2];
                DiceRow {
                    utilities: v.clone(),
                    base: dice[b].base.clone(),
                    probabilities: counts.iter().map(|&c| c as f64 / faces as f64).collect(),
                    tied_faces: ties,
                    target_faces: target,
                    implication,
                    pass: target <= limit && implication.unwrap_or(true),
                }
            })
            .collect::<Vec<_>>()
    });
    let rows: Vec<DiceRow> = per_base.into_iter().flatten().collect();
    let counterexamples: Vec<DiceRow> = rows.iter().filter(|r| !r.pass).cloned().collect();
    Ok(DiceBoundReport {
        k,
        all_pass: counterexamples.is_empty(),
        instances: rows.len(),
        counterexamples,
        rows,
    })
}

/// Exhaustive check over a grid whose utility vectors all satisfy
/// `v_1 < v_2 = ... = v_{K-1} < v_K` and `v_K - v_{K-1} > v_2 - v_1`.
pub fn verify_dice_bound(k: usize, grid: &DiceGrid, exec: Execution) -> Result<DiceBoundReport> {
    validate_shapes(k, grid)?;
    for v in &grid.utilities {
        let middle_tied = v[1..k - 1].iter().all(|&m| m == v[1]);
        let ordered = v[0] < v[1] && v[k - 2] < v[k - 1];
        let gaps = v[k - 1] - v[k - 2] > v[1] - v[0];
        if !(middle_tied && ordered && gaps) {
            return Err(Error::Precondition(format!(
                "utility vector {v:?} does not satisfy the gap premise"
            )));
        }
    }
    scan_dice_grid(k, grid, exec)
}
