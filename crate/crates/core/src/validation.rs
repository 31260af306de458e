//! Monte-Carlo check of a plan against the true stochastic dynamics.
//!
//! Rollouts draw `x0 ~ N(x_hat, P_hat)` and per-step noise `nu ~ N(nu_bar, Q)`
//! and fly the plan's controls open loop through [`dynamics::rollout`]. Rates
//! come with 99% normal-approximation half-widths.
//!
//! Geometry is compared at [`GEOMETRY_TOL`], the solver's default constraint
//! tolerance, so a plan that is feasible to that tolerance shows zero
//! violations under zero noise.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::{self, AgentState};
use crate::error::{Error, Result};
use crate::program::MissionSpec;
use crate::solver::PlanResult;
use crate::uncertainty::cholesky;
use crate::Vec3;

pub const CONFIDENCE: f64 = 0.99;
pub const GEOMETRY_TOL: f64 = 1e-4;

/// Two-sided normal quantile for [`CONFIDENCE`] (about 2.5758).
pub fn z_score() -> f64 {
    Normal::standard().inverse_cdf(0.5 + 0.5 * CONFIDENCE)
}

/// `z * sqrt(p (1 - p) / n)`.
pub fn half_width(p: f64, n: usize) -> f64 {
    z_score() * (p * (1.0 - p) / n as f64).sqrt()
}

/// An estimated probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub frequency: f64,
    /// Wald half-width around `frequency`.
    pub half_width: f64,
}

impl Rate {
    pub fn from_counts(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            frequency: p,
            half_width: half_width(p, n),
        }
    }

    /// Whether `p` lies in `frequency +- half_width`.
    pub fn covers(&self, p: f64) -> bool {
        (p - self.frequency).abs() <= self.half_width
    }
}

/// Pass rule for a bound `limit` on a rate estimated from `n` samples: the
/// frequency may exceed the bound by the half-width of a rate equal to the
/// bound. With one sample this is more than 1 for any interior bound.
pub fn within_bound(rate: &Rate, limit: f64, n: usize) -> bool {
    rate.frequency <= limit + half_width(limit, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub seed: u64,
    pub sample_count: usize,
    /// `sample_count` trajectories of `T + 1` states.
    pub trajectories: Vec<Vec<AgentState>>,
}

/// `count` open-loop rollouts of the plan's controls. Rollout `i` draws from
/// its own ChaCha stream `i` under `seed`, so batches do not depend on
/// thread scheduling.
pub fn sample_rollouts(spec: &MissionSpec, plan: &PlanResult, count: usize, seed: u64) -> Result<RolloutBatch> {
    if count == 0 {
        return Err(Error::InvalidMission("sample count must be at least 1".into()));
    }
    if plan.controls.len() != spec.horizon {
        return Err(Error::LengthMismatch {
            what: "plan controls",
            expected: spec.horizon,
            got: plan.controls.len(),
        });
    }
    let (mean, cov) = spec.initial_belief.to_arrays();
    let l0 = cholesky(&cov)?;
    let nu_bar = spec.disturbance.mean;
    let nu_sd: Vector3<f64> = spec.disturbance.covariance.diagonal().map(|v| v.max(0.0).sqrt());
    let dt = spec.dt;

    let trajectories = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let z: [f64; 5] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let x0: [f64; 5] = std::array::from_fn(|r| mean[r] + (0..=r).map(|c| l0[r][c] * z[c]).sum::<f64>());
            let noises: Vec<Vector3<f64>> = (0..plan.controls.len())
                .map(|_| {
                    let e = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
                    nu_bar + nu_sd.component_mul(&e)
                })
                .collect();
            dynamics::rollout(&AgentState::from_array(x0), &plan.controls, &noises, dt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RolloutBatch {
        seed,
        sample_count: count,
        trajectories,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointCheck {
    pub waypoint: usize,
    /// Decision step of the visit; samples are read at state `visit_step + 1`.
    pub visit_step: usize,
    /// Per cube face: fraction of samples past the face plane.
    pub faces: Vec<Rate>,
    /// Fraction of samples outside the cube.
    pub miss: Rate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentGap {
    /// State index `0..=T`.
    pub step: usize,
    /// `|mean_mc - mean_ut|` of the position.
    pub mean: f64,
    /// Frobenius norm of `cov_mc - cov_ut` of the position.
    pub covariance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub seed: u64,
    pub sample_count: usize,
    pub delta_w: f64,
    pub delta_o: f64,
    pub waypoints: Vec<WaypointCheck>,
    /// `[obstacle][t - 1]` collision rate at state `t = 1..=T`.
    pub collisions: Vec<Vec<Rate>>,
    /// Per waypoint: fraction of samples whose facet lies in the scheduled
    /// FOV at the visit.
    pub coverage: Vec<Rate>,
    /// Fraction of samples covering every facet.
    pub full_coverage: f64,
    pub moments: Vec<MomentGap>,
}

impl ValidationReport {
    pub fn waypoints_ok(&self) -> bool {
        self.waypoints
            .iter()
            .flat_map(|w| &w.faces)
            .all(|r| within_bound(r, self.delta_w, self.sample_count))
    }

    pub fn collisions_ok(&self) -> bool {
        self.collisions
            .iter()
            .flatten()
            .all(|r| within_bound(r, self.delta_o, self.sample_count))
    }

    pub fn passed(&self) -> bool {
        self.waypoints_ok() && self.collisions_ok()
    }

    /// Highest face rate and highest collision rate.
    pub fn worst(&self) -> (f64, f64) {
        let w = self.waypoints.iter().flat_map(|w| &w.faces).map(|r| r.frequency).fold(0.0, f64::max);
        let o = self.collisions.iter().flatten().map(|r| r.frequency).fold(0.0, f64::max);
        (w, o)
    }

    /// Line-oriented text form; `spec_hash` identifies the mission.
    pub fn to_text(&self, spec_hash: &str) -> String {
        let mut s = String::new();
        let n = self.sample_count;
        let _ = writeln!(s, "# validation report");
        let _ = writeln!(s, "spec_hash = {spec_hash}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "samples = {n}");
        let _ = writeln!(s, "confidence = {CONFIDENCE}");
        let _ = writeln!(s, "delta_w = {}", self.delta_w);
        let _ = writeln!(s, "delta_o = {}", self.delta_o);
        let _ = writeln!(s, "waypoints_ok = {}", self.waypoints_ok());
        let _ = writeln!(s, "collisions_ok = {}", self.collisions_ok());
        let _ = writeln!(s, "passed = {}", self.passed());
        let _ = writeln!(s, "full_coverage = {}", self.full_coverage);
        let _ = writeln!(s, "\n# waypoint,visit_step,face,frequency,half_width,bound");
        for w in &self.waypoints {
            for (l, r) in w.faces.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "face = {},{},{},{},{},{}",
                    w.waypoint,
                    w.visit_step,
                    l,
                    r.frequency,
                    r.half_width,
                    self.delta_w + half_width(self.delta_w, n)
                );
            }
            let _ = writeln!(s, "miss = {},{},{},{}", w.waypoint, w.visit_step, w.miss.frequency, w.miss.half_width);
        }
        let _ = writeln!(s, "\n# obstacle,step,frequency,half_width,bound");
        for (o, rates) in self.collisions.iter().enumerate() {
            for (t, r) in rates.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "collision = {},{},{},{},{}",
                    o,
                    t + 1,
                    r.frequency,
                    r.half_width,
                    self.delta_o + half_width(self.delta_o, n)
                );
            }
        }
        let _ = writeln!(s, "\n# waypoint,frequency,half_width");
        for (k, r) in self.coverage.iter().enumerate() {
            let _ = writeln!(s, "coverage = {},{},{}", k, r.frequency, r.half_width);
        }
        let _ = writeln!(s, "\n# step,mean_gap,covariance_gap");
        for m in &self.moments {
            let _ = writeln!(s, "moment = {},{},{}", m.step, m.mean, m.covariance);
        }
        s
    }
}

fn check_batch(spec: &MissionSpec, plan: &PlanResult, batch: &RolloutBatch) -> Result<()> {
    if batch.trajectories.is_empty() {
        return Err(Error::Missing("empty rollout batch".into()));
    }
    if let Some(bad) = batch.trajectories.iter().find(|t| t.len() != spec.horizon + 1) {
        return Err(Error::LengthMismatch {
            what: "rollout trajectory",
            expected: spec.horizon + 1,
            got: bad.len(),
        });
    }
    if plan.visit_steps.len() != spec.waypoints.len() || plan.visit_steps.iter().any(|&t| t >= spec.horizon) {
        return Err(Error::Missing("plan visit steps".into()));
    }
    if plan.fov_schedule.len() != spec.horizon {
        return Err(Error::Missing("plan FOV schedule".into()));
    }
    Ok(())
}

/// Per-face waypoint violation rates at the visit steps, joint miss rates,
/// and per-obstacle per-step collision rates. Moments and coverage are left
/// empty; see [`validate`].
pub fn check_chance_constraints(spec: &MissionSpec, plan: &PlanResult, batch: &RolloutBatch) -> Result<ValidationReport> {
    check_batch(spec, plan, batch)?;
    let n = batch.trajectories.len();
    let waypoints = spec
        .waypoints
        .iter()
        .enumerate()
        .map(|(k, wp)| {
            let t = plan.visit_steps[k] + 1;
            let faces = &wp.cube.half_spaces;
            let mut hits = vec![0usize; faces.len()];
            let mut miss = 0;
            for traj in &batch.trajectories {
                let p = traj[t].position();
                let mut out = false;
                for (l, h) in faces.iter().enumerate() {
                    if h.excess(&p) > GEOMETRY_TOL {
                        hits[l] += 1;
                        out = true;
                    }
                }
                miss += usize::from(out);
            }
            WaypointCheck {
                waypoint: k,
                visit_step: plan.visit_steps[k],
                faces: hits.iter().map(|&h| Rate::from_counts(h, n)).collect(),
                miss: Rate::from_counts(miss, n),
            }
        })
        .collect();
    let collisions = spec
        .obstacles
        .iter()
        .map(|obs| {
            (1..=spec.horizon)
                .map(|t| {
                    let hits = batch
                        .trajectories
                        .iter()
                        .filter(|traj| obs.max_excess(&traj[t].position()) < -GEOMETRY_TOL)
                        .count();
                    Rate::from_counts(hits, n)
                })
                .collect()
        })
        .collect();
    Ok(ValidationReport {
        seed: batch.seed,
        sample_count: n,
        delta_w: spec.delta_w,
        delta_o: spec.delta_o,
        waypoints,
        collisions,
        coverage: Vec::new(),
        full_coverage: 0.0,
        moments: Vec::new(),
    })
}

/// Per-waypoint coverage rates and the fraction of samples covering all
/// facets. A facet counts as covered when its coverage points lie in the
/// scheduled FOV placed at the sample's position.
pub fn check_coverage(spec: &MissionSpec, plan: &PlanResult, batch: &RolloutBatch) -> Result<(Vec<Rate>, f64)> {
    check_batch(spec, plan, batch)?;
    let n = batch.trajectories.len();
    let points: Vec<Vec<Vec3>> = spec.waypoints.iter().map(|w| spec.coverage_points(w.facet_index)).collect();
    let per_sample: Vec<Vec<bool>> = batch
        .trajectories
        .iter()
        .map(|traj| {
            plan.visit_steps
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let fov = spec.fov_states[plan.fov_schedule[t]].polytope_at(&traj[t + 1].position());
                    points[k].iter().all(|q| fov.max_excess(q) <= GEOMETRY_TOL)
                })
                .collect()
        })
        .collect();
    let rates = (0..spec.waypoints.len())
        .map(|k| Rate::from_counts(per_sample.iter().filter(|s| s[k]).count(), n))
        .collect();
    let full = per_sample.iter().filter(|s| s.iter().all(|&c| c)).count() as f64 / n as f64;
    Ok((rates, full))
}

/// Empirical position moments against the plan's UT beliefs, per state.
pub fn moment_gaps(plan: &PlanResult, batch: &RolloutBatch) -> Vec<MomentGap> {
    let n = batch.trajectories.len() as f64;
    (0..plan.beliefs.len())
        .map(|t| {
            let mean: Vec3 = batch.trajectories.iter().map(|tr| tr[t].position()).sum::<Vec3>() / n;
            let cov = batch
                .trajectories
                .iter()
                .map(|tr| {
                    let d = tr[t].position() - mean;
                    d * d.transpose()
                })
                .sum::<crate::Mat3>()
                / (n - 1.0).max(1.0);
            let b = &plan.beliefs[t];
            MomentGap {
                step: t,
                mean: (mean - b.position_mean()).norm(),
                covariance: (cov - b.position_covariance()).norm(),
            }
        })
        .collect()
}

/// Samples a batch and runs every check.
pub fn validate(spec: &MissionSpec, plan: &PlanResult, count: usize, seed: u64) -> Result<ValidationReport> {
    let batch = sample_rollouts(spec, plan, count, seed)?;
    let mut report = check_chance_constraints(spec, plan, &batch)?;
    let (coverage, full) = check_coverage(spec, plan, &batch)?;
    report.coverage = coverage;
    report.full_coverage = full;
    report.moments = moment_gaps(plan, &batch);
    Ok(report)
}
