use std::path::Path;

use qre_core::dice::{
    dice_choice_intervals, dice_choice_probabilities, enumerate_argmax_faces, scan_dice_grid,
    verify_dice_bound, DiceGrid, DicePerturbation,
};
use qre_core::game::{
    expected_utility, is_nash, is_payoff_monotone, Game, StrategyProfile, UtilityVector,
};
use qre_core::logit::{
    solve_logit_multistart, start_profile, trace_logit_path, LogitParams, TerminalReason,
};
use qre_core::paradox::{
    exclusion_ball_search, lemma2_limit, monotone_region_sample, premise_grid, prop1_bound_check,
};
use qre_core::report::{dice_table, region_table, trace_table};
use qre_core::structural::{
    check_qrf_monotone, qrf_monte_carlo, qrf_quadrature_iid, solve_structural_qre, MarginalKind,
    PerturbationFamily, QrfMethod,
};
use qre_core::{build_paradox_game, build_prism_game, Error, Execution, Result, SolverConfig};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::args::{Command, GameArgs, MarginalArgs, RunArgs};

pub enum Payload {
    Json(Value),
    Table {
        header: Vec<String>,
        rows: Vec<Vec<String>>,
        json: Value,
    },
}

pub struct Outcome {
    pub payload: Payload,
    pub passed: bool,
    pub summary: String,
}

fn solver_config(run: &RunArgs) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let cfg = SolverConfig {
        tol: run.tol.unwrap_or(d.tol),
        max_iters: run.max_iters.unwrap_or(d.max_iters),
        damping: run.damping.unwrap_or(d.damping),
        seed: run.seed,
        mc_samples: run.samples.unwrap_or(d.mc_samples),
        quadrature_nodes: run.nodes.unwrap_or(d.quadrature_nodes),
        execution: if run.serial {
            Execution::Serial
        } else {
            Execution::Parallel
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a JSON file that is either the bare value or a `{"meta", "result"}`
/// envelope written by this tool.
fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if value.get("meta").is_some() {
        if let Some(result) = value.get_mut("result") {
            value = result.take();
        }
    }
    Ok(serde_json::from_value(value)?)
}

fn load_game(args: &GameArgs) -> Result<Game> {
    match args.game.as_str() {
        "prism" => Ok(build_prism_game()),
        "paradox" => build_paradox_game(args.k, &args.opponents),
        path => read_json(Path::new(path)),
    }
}

fn marginal_kind(name: &str) -> Result<MarginalKind> {
    name.parse()
}

fn single_family(m: &MarginalArgs, players: usize) -> Result<PerturbationFamily> {
    PerturbationFamily::iid(players, marginal_kind(&m.marginal)?, m.scale)
}

fn parse_profile(text: &str) -> Result<StrategyProfile> {
    let strategies = text
        .split(';')
        .map(|s| {
            s.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidStrategy(format!("bad entry '{x}': {e}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    StrategyProfile::from_vecs(strategies)
}

fn per_player(values: &[f64], players: usize, what: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; players]),
        n if n == players => Ok(values.to_vec()),
        n => Err(Error::InvalidParameter(format!(
            "{n} {what} values for {players} players"
        ))),
    }
}

/// `{step, 2 step, ..., max}` computed as integer multiples of `step`.
fn steps_to(step: f64, max: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && max >= step) {
        return Err(Error::InvalidParameter(format!(
            "bad grid step {step} / max {max}"
        )));
    }
    let n = (max / step + 1e-9).floor() as usize;
    Ok((1..=n).map(|i| i as f64 * step).collect())
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn execute(command: &Command, run: &RunArgs) -> Result<Outcome> {
    let cfg = solver_config(run)?;
    match command {
        Command::BuildGame {
            family,
            k,
            opponents,
        } => {
            let game = match family.as_str() {
                "prism" => build_prism_game(),
                "paradox" => build_paradox_game(*k, opponents)?,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown game family '{other}'"
                    )))
                }
            };
            Ok(Outcome {
                summary: format!("{family} game with actions {:?}", game.action_counts()),
                payload: Payload::Json(to_value(&game)?),
                passed: true,
            })
        }

        Command::NashCheck {
            game,
            profile,
            tie_tol,
        } => {
            let game = load_game(game)?;
            let profile = parse_profile(profile)?;
            let nash = is_nash(&game, &profile, *tie_tol)?;
            let monotone = is_payoff_monotone(&game, &profile, *tie_tol)?;
            let utilities = (0..game.player_count())
                .map(|i| expected_utility(&game, &profile, i))
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome {
                summary: format!("nash = {nash}, payoff monotone = {}", monotone.verdict),
                payload: Payload::Json(json!({
                    "profile": profile,
                    "nash": nash,
                    "payoff_monotone": monotone,
                    "utilities": utilities,
                })),
                passed: nash,
            })
        }

        Command::SolveLogit {
            game,
            lambda,
            starts,
        } => {
            let game = load_game(game)?;
            let params = LogitParams::new(per_player(lambda, game.player_count(), "lambda")?)?;
            let results = solve_logit_multistart(&game, &params, *starts, &cfg);
            let mut converged = 0;
            let entries: Vec<Value> = results
                .into_iter()
                .enumerate()
                .map(|(s, r)| match r {
                    Ok((profile, residual)) => {
                        converged += 1;
                        json!({"start": s, "profile": profile, "residual": residual})
                    }
                    Err(e) => json!({"start": s, "error": e.to_string()}),
                })
                .collect();
            if converged == 0 {
                return Err(Error::Precondition("no start converged".into()));
            }
            Ok(Outcome {
                summary: format!("{converged} of {} starts converged", entries.len()),
                payload: Payload::Json(json!({"lambda": params, "solutions": entries})),
                passed: true,
            })
        }

        Command::TraceLogit {
            game,
            lambda_max,
            direction,
            check_bound,
        } => {
            let game = load_game(game)?;
            let dir = match direction {
                Some(d) => per_player(d, game.player_count(), "direction")?,
                None => vec![1.0; game.player_count()],
            };
            let trace = trace_logit_path(&game, &LogitParams::new(dir)?, *lambda_max, &cfg)?;
            let k = game.action_counts()[0];
            let max_second = trace
                .points
                .iter()
                .filter(|_| k >= 2)
                .map(|p| p.profile[0][k.saturating_sub(2)])
                .fold(0.0, f64::max);
            let mut passed = trace.terminal_reason != TerminalReason::StepFailure;
            let mut summary = format!(
                "{} points, terminal reason {:?}, max sigma_1(a_{}) = {max_second:.9}",
                trace.points.len(),
                trace.terminal_reason,
                k.saturating_sub(1)
            );
            if *check_bound {
                if k < 3 {
                    return Err(Error::Precondition(
                        "--check-bound needs at least 3 actions".into(),
                    ));
                }
                let ok = max_second <= 1.0 / k as f64 + 1e-6;
                summary.push_str(&format!(
                    ", bound 1/{k} {}",
                    if ok { "holds" } else { "VIOLATED" }
                ));
                passed &= ok;
            }
            let (header, rows) = trace_table(&trace);
            Ok(Outcome {
                payload: Payload::Table {
                    header,
                    rows,
                    json: to_value(&trace)?,
                },
                passed,
                summary,
            })
        }

        Command::QrfMc { marginal, x } => {
            let fam = single_family(marginal, 1)?;
            let est = qrf_monte_carlo(&UtilityVector::new(x.clone())?, &fam, 0, &cfg)?;
            Ok(Outcome {
                summary: format!("probabilities {:?}", est.probabilities.probabilities()),
                payload: Payload::Json(json!({"x": x, "family": fam, "estimate": est})),
                passed: true,
            })
        }

        Command::QrfQuad { marginal, x } => {
            let fam = single_family(marginal, 1)?;
            let est = qrf_quadrature_iid(
                &UtilityVector::new(x.clone())?,
                &fam,
                0,
                cfg.quadrature_nodes,
            )?;
            Ok(Outcome {
                summary: format!("probabilities {:?}", est.probabilities.probabilities()),
                payload: Payload::Json(json!({"x": x, "family": fam, "estimate": est})),
                passed: true,
            })
        }

        Command::SolveStructural {
            game,
            marginal,
            family,
            method,
            starts,
        } => {
            let game = load_game(game)?;
            let fam: PerturbationFamily = match family {
                Some(path) => read_json(path)?,
                None => single_family(marginal, game.player_count())?,
            };
            let method: QrfMethod = method.parse()?;
            let solutions = (0..=*starts)
                .map(|s| {
                    let start = start_profile(&game, cfg.seed, s as u64);
                    let (profile, residual) =
                        solve_structural_qre(&game, &fam, method, &start, &cfg)?;
                    Ok(json!({"start": s, "profile": profile, "residual": residual}))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome {
                summary: format!("{} equilibria solved", solutions.len()),
                payload: Payload::Json(
                    json!({"family": fam, "method": method, "solutions": solutions}),
                ),
                passed: true,
            })
        }

        Command::CheckMonotone {
            marginal,
            k,
            trials,
        } => {
            let fam = single_family(marginal, 1)?;
            let check = check_qrf_monotone(&fam, 0, *k, *trials, &cfg)?;
            Ok(Outcome {
                summary: format!(
                    "ordinal equivalence {} on {} vectors (worst violation {:.3e})",
                    if check.verdict { "holds" } else { "FAILS" },
                    check.vectors_checked,
                    check.worst_violation
                ),
                passed: check.verdict,
                payload: Payload::Json(json!({"family": fam, "k": k, "check": check})),
            })
        }

        Command::DiceOracle { x, base, intervals } => {
            let v = UtilityVector::new(x.clone())?;
            let dice = DicePerturbation::new(base.clone())?;
            let faces = enumerate_argmax_faces(&v, &dice)?;
            let result = if *intervals {
                json!({"intervals": dice_choice_intervals(&v, &dice)?})
            } else {
                json!({"probabilities": dice_choice_probabilities(&v, &dice)?})
            };
            Ok(Outcome {
                summary: format!("{} faces, ties = {}", faces.faces.len(), faces.has_ties()),
                payload: Payload::Json(
                    json!({"x": x, "base": base, "result": result, "faces": faces.faces}),
                ),
                passed: true,
            })
        }

        Command::VerifyDiceBound {
            k,
            d_step,
            d1_max,
            d2_max,
            base_step,
            base_max,
            reverse_gaps,
        } => {
            let d1 = steps_to(*d_step, *d1_max)?;
            let d2 = steps_to(*d_step, *d2_max)?;
            let base_steps = (base_max / base_step + 1e-9).floor() as usize;
            if *k < 3 || base_steps < k - 1 {
                return Err(Error::InvalidParameter(
                    "grid too small for the action count".into(),
                ));
            }
            let bases = DiceGrid::increasing_bases(*k, *base_step, base_steps);
            let report = if *reverse_gaps {
                let mut utilities = Vec::new();
                for &a in &d1 {
                    for &b in &d2 {
                        if b < a {
                            utilities.push(qre_core::dice::gap_vector(*k, a, b));
                        }
                    }
                }
                scan_dice_grid(*k, &DiceGrid { utilities, bases }, cfg.execution)?
            } else {
                let utilities = DiceGrid::premise_utilities(*k, &d1, &d2);
                verify_dice_bound(*k, &DiceGrid { utilities, bases }, cfg.execution)?
            };
            let (header, rows) = dice_table(&report);
            Ok(Outcome {
                summary: format!(
                    "{} instances, {} counterexamples",
                    report.instances,
                    report.counterexamples.len()
                ),
                passed: report.all_pass,
                payload: Payload::Table {
                    header,
                    rows,
                    json: to_value(&report)?,
                },
            })
        }

        Command::Prop1Check {
            k,
            marginals,
            scale,
            grid,
            bound_tol,
        } => {
            let families = marginals
                .iter()
                .map(|m| PerturbationFamily::iid(1, marginal_kind(m)?, *scale))
                .collect::<Result<Vec<_>>>()?;
            if *k < 3 {
                return Err(Error::InvalidParameter("k must be at least 3".into()));
            }
            let report = prop1_bound_check(&families, &premise_grid(*k, *grid), *bound_tol, &cfg)?;
            Ok(Outcome {
                summary: format!(
                    "{} cases, all pass = {}, min margin = {:.3e}",
                    report.rows.len(),
                    report.all_pass,
                    report.min_margin
                ),
                passed: report.all_pass,
                payload: Payload::Json(json!({"families": families, "report": report})),
            })
        }

        Command::ExclusionCertificate {
            game,
            alpha,
            sigma_star,
            epsilon,
            marginals,
            scales,
            starts,
        } => {
            let game = load_game(game)?;
            let star = match (alpha, sigma_star) {
                (_, Some(text)) => parse_profile(text)?,
                (Some(a), None) => lemma2_limit(&game, *a)?,
                (None, None) => {
                    let k = game.action_counts()[0] as f64;
                    lemma2_limit(&game, 0.5 * (1.0 / k + 1.0 / (k - 1.0)))?
                }
            };
            let scales = per_player(scales, marginals.len(), "scale")?;
            let families = marginals
                .iter()
                .zip(scales)
                .map(|(m, s)| PerturbationFamily::iid(game.player_count(), marginal_kind(m)?, s))
                .collect::<Result<Vec<_>>>()?;
            let cert = exclusion_ball_search(&game, &star, *epsilon, &families, *starts, &cfg)?;
            let min = cert
                .numeric_evidence
                .iter()
                .map(|e| e.min_distance)
                .fold(f64::INFINITY, f64::min);
            Ok(Outcome {
                summary: format!(
                    "certificate issued: epsilon = {epsilon}, min equilibrium distance = {min:.6}"
                ),
                payload: Payload::Json(to_value(&cert)?),
                passed: true,
            })
        }

        Command::RegionSample { game, count } => {
            let game = load_game(game)?;
            let samples = monotone_region_sample(&game, *count, run.seed)?;
            let excluded = samples
                .iter()
                .filter(|s| s.classification.excluded_by_prop1)
                .count();
            let (header, rows) = region_table(&samples);
            Ok(Outcome {
                summary: format!(
                    "{} samples, {excluded} monotone but excluded",
                    samples.len()
                ),
                payload: Payload::Table {
                    header,
                    rows,
                    json: to_value(&samples)?,
                },
                passed: true,
            })
        }
    }
}
