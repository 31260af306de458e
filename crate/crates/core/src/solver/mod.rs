//! Augmented-Lagrangian NLP solver with a projected L-BFGS inner loop, the
//! heuristic initialization and the multistart planning driver.

mod init;
pub mod lbfgs;
mod plan;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::program::{ProgramValues, TranscribedProgram};

pub use init::{initial_guess, initial_guess_perturbed, seed_from_tour, tour, TourPlan};
pub use plan::{extract_plan, plan, round_and_polish, PlanResult};

use lbfgs::{minimize_box, InnerOptions};

/// Boundary between the planner and any NLP method. Evaluation must be
/// reentrant: multistarts call it concurrently.
pub trait NlpProblem: Sync {
    fn num_vars(&self) -> usize;
    fn num_eq(&self) -> usize;
    fn num_ineq(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];

    /// Objective plus residuals `h(x) = 0`, `g(x) <= 0`.
    fn evaluate(&self, x: &[f64]) -> Result<ProgramValues>;

    /// Inequality rows that may be relaxed to `g <= eps`.
    fn relaxable_rows(&self) -> Vec<bool> {
        vec![false; self.num_ineq()]
    }

    /// Name of the most violated row, if the problem labels its rows.
    fn worst_row(&self, _values: &ProgramValues) -> Option<String> {
        None
    }

    /// Gradient of `w_obj f + w_eq . h + w_ineq . g`; central differences
    /// unless overridden.
    fn weighted_gradient(&self, x: &[f64], w_obj: f64, w_eq: &[f64], w_ineq: &[f64]) -> Result<Vec<f64>> {
        let combine = |v: &ProgramValues| {
            w_obj * v.objective
                + v.eq.iter().zip(w_eq).map(|(a, b)| a * b).sum::<f64>()
                + v.ineq.iter().zip(w_ineq).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut xp = x.to_vec();
        let mut g = vec![0.0; x.len()];
        for j in 0..x.len() {
            let h = 1e-6 * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            let fp = combine(&self.evaluate(&xp)?);
            xp[j] = x[j] - h;
            let fm = combine(&self.evaluate(&xp)?);
            xp[j] = x[j];
            g[j] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }
}

impl NlpProblem for TranscribedProgram {
    fn num_vars(&self) -> usize {
        TranscribedProgram::num_vars(self)
    }
    fn num_eq(&self) -> usize {
        TranscribedProgram::num_eq(self)
    }
    fn num_ineq(&self) -> usize {
        TranscribedProgram::num_ineq(self)
    }
    fn lower(&self) -> &[f64] {
        &self.lower
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }
    fn evaluate(&self, x: &[f64]) -> Result<ProgramValues> {
        TranscribedProgram::evaluate(self, x)
    }
    fn relaxable_rows(&self) -> Vec<bool> {
        TranscribedProgram::relaxable_rows(self)
    }
    fn worst_row(&self, values: &ProgramValues) -> Option<String> {
        self.max_violation(values).1.map(|(b, i)| format!("{}[{i}]", b.name()))
    }
    fn weighted_gradient(&self, x: &[f64], w_obj: f64, w_eq: &[f64], w_ineq: &[f64]) -> Result<Vec<f64>> {
        TranscribedProgram::weighted_gradient(self, x, w_obj, w_eq, w_ineq)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// Largest admissible residual violation.
    pub constraint_tol: f64,
    /// Projected-gradient tolerance of the inner problems.
    pub optimality_tol: f64,
    /// Relaxation `eps_k` of the complementarity rows, one per outer iteration
    /// (the last entry repeats).
    pub complementarity_relax_schedule: Vec<f64>,
    pub rng_seed: u64,
    pub multistart_count: usize,
    pub lbfgs_memory: usize,
    /// Multiplies the objective inside the merit function. Mission
    /// objectives run to thousands (squared speeds summed over the horizon),
    /// and unscaled they win over the early, small penalties: the first
    /// iterations then slow the vehicle down instead of reaching waypoints.
    pub objective_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 30,
            max_inner_iters: 300,
            penalty_init: 10.0,
            penalty_growth: 5.0,
            constraint_tol: 1e-4,
            optimality_tol: 1e-5,
            complementarity_relax_schedule: vec![1e-1, 1e-2, 1e-3, 0.0],
            rng_seed: 0,
            multistart_count: 4,
            lbfgs_memory: 10,
            objective_scale: 0.01,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.constraint_tol > 0.0
            && self.optimality_tol > 0.0
            && self.penalty_init > 0.0
            && self.penalty_growth > 1.0
            && self.objective_scale > 0.0
            && self.multistart_count >= 1
            && !self.complementarity_relax_schedule.is_empty()
            && self.complementarity_relax_schedule.iter().all(|e| *e >= 0.0);
        if !ok {
            return Err(Error::InvalidMission(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(SolveStatus::Optimal),
            "feasible" => Some(SolveStatus::Feasible),
            "infeasible" => Some(SolveStatus::Infeasible),
            "iteration_limit" => Some(SolveStatus::IterationLimit),
            _ => None,
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub max_violation: f64,
    /// Outer iterations.
    pub iterations: usize,
    pub inner_iterations: usize,
    pub wall_time: f64,
    /// Violation after each accepted outer iteration.
    pub violation_trace: Vec<f64>,
    /// Name of the worst residual block, if any row is violated.
    pub worst_block: Option<String>,
}

impl SolveReport {
    /// Everything except wall time, for reproducibility checks.
    pub fn same_outcome(&self, o: &SolveReport) -> bool {
        self.status == o.status
            && self.objective.to_bits() == o.objective.to_bits()
            && self.max_violation.to_bits() == o.max_violation.to_bits()
            && self.iterations == o.iterations
            && self.inner_iterations == o.inner_iterations
            && self.violation_trace == o.violation_trace
            && self.worst_block == o.worst_block
    }
}

pub(crate) fn violation(v: &ProgramValues) -> f64 {
    let e = v.eq.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    v.ineq.iter().fold(e, |a, x| a.max(*x))
}

fn relaxed_violation(v: &ProgramValues, relax: &[bool], eps: f64) -> f64 {
    let e = v.eq.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    v.ineq
        .iter()
        .zip(relax)
        .fold(e, |a, (x, r)| a.max(if *r { x - eps } else { *x }))
}

/// `true` if `a` is a better outcome than `b`: feasibility first, then
/// objective, then violation.
pub(crate) fn better(a: (f64, f64), b: (f64, f64), tol: f64) -> bool {
    let (fa, va) = a;
    let (fb, vb) = b;
    match (va <= tol, vb <= tol) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => fa < fb,
        (false, false) => va < vb,
    }
}

const PENALTY_MAX: f64 = 1e10;

/// Augmented-Lagrangian solve from `init` (projected onto the bounds).
pub fn solve<P: NlpProblem + ?Sized>(prog: &P, init: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let (lo, hi) = (prog.lower(), prog.upper());
    if init.len() != prog.num_vars() {
        return Err(Error::LengthMismatch {
            what: "initial point",
            expected: prog.num_vars(),
            got: init.len(),
        });
    }
    let mut x: Vec<f64> = init.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect();
    let v0 = prog.evaluate(&x)?;
    if !(v0.objective.is_finite() && v0.eq.iter().chain(&v0.ineq).all(|v| v.is_finite())) {
        return Err(Error::NonFinite("objective or residual at the initial point"));
    }
    let relax = prog.relaxable_rows();
    let mut lam_eq = vec![0.0; prog.num_eq()];
    let mut lam_in = vec![0.0; prog.num_ineq()];
    let mut mu = cfg.penalty_init;
    let so = cfg.objective_scale;

    let mut best = (x.clone(), v0.objective, violation(&v0));
    let mut trace = Vec::new();
    let mut prev_relaxed = relaxed_violation(&v0, &relax, cfg.complementarity_relax_schedule[0]);
    let mut inner_total = 0;
    let mut outer = 0;
    let mut converged = false;

    while outer < cfg.max_outer_iters {
        let eps = cfg.complementarity_relax_schedule[outer.min(cfg.complementarity_relax_schedule.len() - 1)];
        let last_eps = outer + 1 >= cfg.complementarity_relax_schedule.len();
        outer += 1;

        let shifted = |v: &ProgramValues| -> Vec<f64> {
            v.ineq.iter().zip(&relax).map(|(g, r)| if *r { g - eps } else { *g }).collect()
        };
        let merit = |v: &ProgramValues| -> f64 {
            let mut m = so * v.objective;
            for (h, l) in v.eq.iter().zip(&lam_eq) {
                m += l * h + 0.5 * mu * h * h;
            }
            for (g, l) in shifted(v).iter().zip(&lam_in) {
                let s = (l / mu + g).max(0.0);
                m += 0.5 * mu * (s * s - (l / mu) * (l / mu));
            }
            m
        };
        let value = |x: &[f64]| -> Result<f64> { Ok(merit(&prog.evaluate(x)?)) };
        let value_grad = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let v = prog.evaluate(x)?;
            let w_eq: Vec<f64> = v.eq.iter().zip(&lam_eq).map(|(h, l)| l + mu * h).collect();
            let w_in: Vec<f64> = shifted(&v).iter().zip(&lam_in).map(|(g, l)| (l + mu * g).max(0.0)).collect();
            Ok((merit(&v), prog.weighted_gradient(x, so, &w_eq, &w_in)?))
        };
        let inner = minimize_box(
            value,
            value_grad,
            &x,
            lo,
            hi,
            &InnerOptions {
                max_iters: cfg.max_inner_iters,
                tol: cfg.optimality_tol,
                memory: cfg.lbfgs_memory,
            },
        )?;
        inner_total += inner.iters;
        x = inner.x;

        let v = prog.evaluate(&x)?;
        let viol = violation(&v);
        let relaxed = relaxed_violation(&v, &relax, eps);
        if trace.last().is_none_or(|last| viol <= *last) {
            trace.push(viol);
        }
        if better((v.objective, viol), (best.1, best.2), cfg.constraint_tol) {
            best = (x.clone(), v.objective, viol);
        }
        if last_eps && viol <= cfg.constraint_tol && inner.converged {
            converged = true;
            break;
        }
        if mu >= PENALTY_MAX && relaxed > cfg.constraint_tol {
            break;
        }

        for (l, h) in lam_eq.iter_mut().zip(&v.eq) {
            *l += mu * h;
        }
        for (l, g) in lam_in.iter_mut().zip(shifted(&v)) {
            *l = (*l + mu * g).max(0.0);
        }
        if relaxed > 0.25 * prev_relaxed || relaxed > cfg.constraint_tol && !inner.converged {
            mu = (mu * cfg.penalty_growth).min(PENALTY_MAX);
        }
        prev_relaxed = relaxed;
    }

    let (bx, bf, bv) = best;
    let status = if bv <= cfg.constraint_tol {
        if converged && bx == x {
            SolveStatus::Optimal
        } else {
            SolveStatus::Feasible
        }
    } else if mu >= PENALTY_MAX {
        SolveStatus::Infeasible
    } else {
        SolveStatus::IterationLimit
    };
    let worst_block = worst_block(prog, &bx)?;
    Ok((
        bx,
        SolveReport {
            status,
            objective: bf,
            max_violation: bv,
            iterations: outer,
            inner_iterations: inner_total,
            wall_time: start.elapsed().as_secs_f64(),
            violation_trace: trace,
            worst_block,
        },
    ))
}

fn worst_block<P: NlpProblem + ?Sized>(prog: &P, x: &[f64]) -> Result<Option<String>> {
    Ok(prog.worst_row(&prog.evaluate(x)?))
}
