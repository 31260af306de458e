//! Multistart planning driver, the round-and-polish repair phase and plan
//! extraction.

use std::time::Instant;

use rayon::prelude::*;

use crate::dynamics::ControlInput;
use crate::error::{Error, Result};
use crate::geometry::{point_in_polytope, CUBE_FACES, FOV_FACES};
use crate::program::{DecisionVector, MissionSpec, TranscribedProgram};
use crate::uncertainty::{chance_margin, GaussianBelief};

use super::init::{initial_guess, initial_guess_perturbed};
use super::{better, solve, violation, SolveReport, SolveStatus, SolverConfig};

/// A solved plan in the form downstream tools need. Step-indexed vectors use
/// the decision step `t`, whose control produces belief `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub controls: Vec<ControlInput>,
    /// Beliefs `0..=T`.
    pub beliefs: Vec<GaussianBelief>,
    /// Active FOV state per step.
    pub fov_schedule: Vec<usize>,
    /// Visit step per waypoint.
    pub visit_steps: Vec<usize>,
    /// Per waypoint: its facet's coverage points lie in the scheduled FOV at
    /// the visit.
    pub covered: Vec<bool>,
    pub max_violation: f64,
}

/// Worst cube-face slack of waypoint `n` at belief `b` (negative = inside
/// the shrunk cube).
pub(super) fn cube_excess(spec: &MissionSpec, n: usize, b: &GaussianBelief) -> Result<f64> {
    let (p, cov) = (b.position_mean(), b.position_covariance());
    let mut worst = f64::NEG_INFINITY;
    for h in &spec.waypoints[n].cube.half_spaces {
        worst = worst.max(h.excess(&p) + chance_margin(&h.normal, &cov, spec.delta_w)?);
    }
    Ok(worst)
}

/// Worst FOV-face slack over the coverage points of the given waypoints.
pub(super) fn fov_excess(spec: &MissionSpec, m: usize, wps: &[usize], b: &GaussianBelief) -> f64 {
    let poly = spec.fov_states[m].polytope_at(&b.position_mean());
    wps.iter()
        .flat_map(|&n| spec.coverage_points(spec.waypoints[n].facet_index))
        .map(|q| poly.max_excess(&q))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fixes the visit assignment and FOV choice to one-hot values derived from
/// `x`, pins the dependent binary blocks, and re-solves for the controls and
/// obstacle selectors.
pub fn round_and_polish(
    prog: &TranscribedProgram,
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let spec = &*prog.spec;
    let layout = &prog.layout;
    let beliefs = prog.beliefs(x)?;
    let dec = prog.decision(x.to_vec());
    let (t_len, n_w, m_f) = (spec.horizon, spec.waypoints.len(), spec.fov_states.len());

    // visit step: the most-weighted step among those inside the shrunk cube,
    // else the step that comes closest
    let mut visit = Vec::with_capacity(n_w);
    for n in 0..n_w {
        let mut inside: Option<(usize, f64)> = None;
        let mut nearest = (0, f64::INFINITY);
        for t in 0..t_len {
            let e = cube_excess(spec, n, &beliefs[t + 1])?;
            let w = x[layout.w3(t, n)];
            if e <= 0.0 && inside.is_none_or(|(_, bw)| w > bw) {
                inside = Some((t, w));
            }
            if e < nearest.1 {
                nearest = (t, e);
            }
        }
        visit.push(inside.map_or(nearest.0, |(t, _)| t));
    }
    let mut fov: Vec<usize> = (0..t_len).map(|t| dec.fov_choice(t)).collect();
    for t in 0..t_len {
        let here: Vec<usize> = (0..n_w).filter(|&n| visit[n] == t).collect();
        if !here.is_empty() {
            let mut best = (0, f64::INFINITY);
            for m in 0..m_f {
                let e = fov_excess(spec, m, &here, &beliefs[t + 1]);
                if e < best.1 {
                    best = (m, e);
                }
            }
            fov[t] = best.0;
        }
    }

    let (mut lo, mut hi) = (prog.lower.clone(), prog.upper.clone());
    let mut x0 = x.to_vec();
    let mut pins: Vec<(usize, f64)> = Vec::new();
    let mut pin = |i: usize, v: f64| pins.push((i, v));
    for t in 0..t_len {
        for m in 0..m_f {
            pin(layout.s(t, m), if fov[t] == m { 1.0 } else { 0.0 });
        }
        for n in 0..n_w {
            let at = visit[n] == t;
            pin(layout.w3(t, n), if at { 1.0 } else { 0.0 });
            for l in 0..CUBE_FACES {
                pin(layout.w1(t, n, l), if at { 1.0 } else { 0.0 });
            }
            pin(layout.w2(t, n), if at { 0.0 } else { -(CUBE_FACES as f64) });
            for m in 0..m_f {
                let on = at && fov[t] == m;
                for v in 0..layout.cover_points {
                    for f in 0..FOV_FACES {
                        pin(layout.g1(t, n, m, v, f), if on { 1.0 } else { 0.0 });
                    }
                    pin(layout.g2(t, n, m, v), if on { 0.0 } else { -(FOV_FACES as f64) });
                }
            }
        }
        // obstacle selector rounded to its largest entry
        for (xi, &faces) in layout.obstacle_faces.iter().enumerate() {
            let j = crate::program::argmax((0..faces).map(|j| x[layout.o(t, xi, j)]));
            for k in 0..faces {
                x0[layout.o(t, xi, k)] = if k == j { 1.0 } else { 0.0 };
            }
        }
    }
    for (i, v) in pins {
        lo[i] = v;
        hi[i] = v;
        x0[i] = v;
    }
    let fixed = prog.with_bounds(lo, hi);
    solve(&fixed, &x0, cfg)
}

const POLISH_ROUNDS: usize = 3;

/// Full-program solve, then repeated rounding from the latest point until a
/// rounded solve is feasible.
fn one_start(prog: &TranscribedProgram, dec: DecisionVector, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    let (xa, ra) = solve(prog, &dec.values, cfg)?;
    let mut trace = ra.violation_trace.clone();
    let (mut iterations, mut inner) = (ra.iterations, ra.inner_iterations);
    let mut best = (xa.clone(), ra);
    let mut from = xa;
    for _ in 0..POLISH_ROUNDS {
        let (xp, rp) = round_and_polish(prog, &from, cfg)?;
        iterations += rp.iterations;
        inner += rp.inner_iterations;
        for v in &rp.violation_trace {
            if trace.last().is_none_or(|l| v <= l) {
                trace.push(*v);
            }
        }
        let done = rp.max_violation <= cfg.constraint_tol;
        if done || better((rp.objective, rp.max_violation), (best.1.objective, best.1.max_violation), cfg.constraint_tol) {
            best = (xp.clone(), rp);
        }
        if done {
            break;
        }
        from = xp;
    }
    let (x, rep) = best;
    Ok((
        x,
        SolveReport {
            iterations,
            inner_iterations: inner,
            violation_trace: trace,
            ..rep
        },
    ))
}

/// Multistart solve with round-and-polish. Start `i` uses seed
/// `cfg.rng_seed + i`; start 0 is the unperturbed greedy tour. The reported
/// violation is measured on `prog` itself.
pub fn plan(prog: &TranscribedProgram, cfg: &SolverConfig) -> Result<(DecisionVector, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = &*prog.spec;
    let runs: Vec<Result<(Vec<f64>, SolveReport)>> = (0..cfg.multistart_count)
        .into_par_iter()
        .map(|i| {
            let dec = if i == 0 {
                initial_guess(spec)?
            } else {
                initial_guess_perturbed(spec, cfg.rng_seed.wrapping_add(i as u64))?
            };
            one_start(prog, dec, cfg)
        })
        .collect();
    let mut best: Option<(Vec<f64>, SolveReport)> = None;
    let mut iterations = 0;
    let mut inner = 0;
    for r in runs {
        let (x, rep) = r?;
        iterations += rep.iterations;
        inner += rep.inner_iterations;
        let take = match &best {
            None => true,
            Some((_, b)) => better((rep.objective, rep.max_violation), (b.objective, b.max_violation), cfg.constraint_tol),
        };
        if take {
            best = Some((x, rep));
        }
    }
    let (x, mut rep) = best.expect("multistart_count >= 1");
    let values = prog.evaluate(&x)?;
    rep.max_violation = violation(&values);
    rep.objective = values.objective;
    rep.worst_block = prog.max_violation(&values).1.map(|(b, i)| format!("{}[{i}]", b.name()));
    if rep.max_violation > cfg.constraint_tol && rep.status.is_success() {
        rep.status = SolveStatus::IterationLimit;
    }
    rep.iterations = iterations;
    rep.inner_iterations = inner;
    rep.wall_time = start.elapsed().as_secs_f64();
    Ok((prog.decision(x), rep))
}

/// Reads the schedule off a solved decision vector and re-checks coverage
/// geometrically. Fails if any residual exceeds `tol`.
pub fn extract_plan(prog: &TranscribedProgram, dec: &DecisionVector, tol: f64) -> Result<PlanResult> {
    let spec = &*prog.spec;
    if dec.layout != prog.layout {
        return Err(Error::LengthMismatch {
            what: "decision vector",
            expected: prog.num_vars(),
            got: dec.values.len(),
        });
    }
    let values = prog.evaluate(&dec.values)?;
    let (viol, worst) = prog.max_violation(&values);
    if viol > tol {
        let worst = worst.map_or("?".to_string(), |(b, i)| format!("{}[{i}]", b.name()));
        return Err(Error::Infeasible { violation: viol, worst });
    }
    let controls = dec.controls();
    let beliefs = prog.beliefs(&dec.values)?;
    let fov_schedule: Vec<usize> = (0..spec.horizon).map(|t| dec.fov_choice(t)).collect();
    let visit_steps: Vec<usize> = (0..spec.waypoints.len()).map(|n| dec.visit_step(n)).collect();
    let covered = visit_steps
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            let poly = spec.fov_states[fov_schedule[t]].polytope_at(&beliefs[t + 1].position_mean());
            spec.coverage_points(spec.waypoints[n].facet_index)
                .iter()
                .all(|q| point_in_polytope(q, &poly, tol))
        })
        .collect();
    Ok(PlanResult {
        controls,
        beliefs,
        fov_schedule,
        visit_steps,
        covered,
        max_violation: viol,
    })
}
