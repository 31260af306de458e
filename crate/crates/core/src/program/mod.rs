//! Transcription of the coverage problem into a flat nonlinear program.
//!
//! Beliefs are eliminated (single shooting): they are recomputed from the
//! controls on every evaluation, and their control sensitivities come from
//! forward-mode dual numbers pushed through the unscented transform.
//!
//! Decision step `t` in `0..T` always refers to belief index `t + 1`.

mod layout;
mod residuals;
mod sens;

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::dynamics::{ControlBounds, ControlInput, DisturbanceModel};
use crate::error::{Error, Result};
use crate::geometry::{CameraConfig, ConvexPolytope, Facet, FovState, Waypoint, CUBE_FACES, FOV_FACES};
use crate::uncertainty::{margin_factor, propagate, GaussianBelief, UtConfig};
use crate::Vec3;

pub use layout::{DecisionVector, Layout, VarBlock};
pub(crate) use layout::argmax;
pub use residuals::{Block, NamedResidual, RowKind};
pub use sens::{sensitivities, Sensitivities, SENS_QUANTITIES};

use residuals::{emit_all, Family, GradSink, StateInfo, ValueSink};

#[derive(Debug, Clone, PartialEq)]
pub struct MissionSpec {
    pub horizon: usize,
    pub dt: f64,
    pub facets: Vec<Facet>,
    pub waypoints: Vec<Waypoint>,
    pub fov_states: Vec<FovState>,
    pub obstacles: Vec<ConvexPolytope>,
    pub goal: Vec3,
    pub delta_w: f64,
    pub delta_o: f64,
    pub env_min: Vec3,
    pub env_max: Vec3,
    pub control_bounds: ControlBounds,
    pub initial_belief: GaussianBelief,
    pub disturbance: DisturbanceModel,
    pub ut: UtConfig,
    pub camera: CameraConfig,
    /// Require all three facet vertices in view instead of the centroid.
    pub cover_vertices: bool,
}

impl MissionSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMission(m));
        if self.horizon == 0 {
            return bad("horizon T must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.facets.len() != self.waypoints.len() {
            return bad(format!(
                "{} facets but {} waypoints",
                self.facets.len(),
                self.waypoints.len()
            ));
        }
        if self.horizon < self.waypoints.len() {
            return bad(format!(
                "horizon {} shorter than waypoint count {}",
                self.horizon,
                self.waypoints.len()
            ));
        }
        if self.fov_states.is_empty() {
            return bad("at least one FOV state is required".into());
        }
        for d in [self.delta_w, self.delta_o] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidProbability(d));
            }
        }
        if (0..3).any(|i| !(self.env_min[i] < self.env_max[i])) {
            return bad("environment box is empty".into());
        }
        if !(self.control_bounds.v_max > 0.0 && self.control_bounds.omega_max > 0.0) {
            return bad("control bounds must be positive".into());
        }
        for w in &self.waypoints {
            if w.cube.len() != CUBE_FACES {
                return bad("waypoints must be cubes".into());
            }
        }
        self.camera.validate()?;
        self.ut.validate()?;
        self.disturbance.validate()?;
        self.initial_belief.validate()?;
        Ok(())
    }

    /// Points that must be in view for facet `n`.
    pub fn coverage_points(&self, n: usize) -> Vec<Vec3> {
        if self.cover_vertices {
            self.facets[n].vertices.to_vec()
        } else {
            vec![self.facets[n].centroid]
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(
            self.horizon,
            self.waypoints.len(),
            self.fov_states.len(),
            if self.cover_vertices { 3 } else { 1 },
            self.obstacles.iter().map(|o| o.len()).collect(),
        )
    }
}

/// Beliefs `0..=T` under the given controls.
pub fn belief_trajectory(spec: &MissionSpec, controls: &[ControlInput]) -> Result<Vec<GaussianBelief>> {
    if controls.len() != spec.horizon {
        return Err(Error::LengthMismatch {
            what: "controls",
            expected: spec.horizon,
            got: controls.len(),
        });
    }
    let mut out = Vec::with_capacity(controls.len() + 1);
    out.push(spec.initial_belief);
    for u in controls {
        let next = propagate(out.last().unwrap(), &spec.disturbance, u, spec.dt, &spec.ut)?;
        out.push(next);
    }
    Ok(out)
}

/// `sum ||u_t||^2 + ||terminal mean position - goal||^2`.
pub fn objective(spec: &MissionSpec, beliefs: &[GaussianBelief], controls: &[ControlInput]) -> f64 {
    let effort: f64 = controls.iter().map(|u| u.norm_squared()).sum();
    let terminal = beliefs.last().map(|b| b.position_mean()).unwrap_or(spec.goal);
    effort + (terminal - spec.goal).norm_squared()
}

fn family_residuals(
    spec: &MissionSpec,
    beliefs: &[GaussianBelief],
    dec: &DecisionVector,
    family: Family,
) -> Result<Vec<NamedResidual>> {
    if beliefs.len() != spec.horizon + 1 {
        return Err(Error::LengthMismatch {
            what: "beliefs",
            expected: spec.horizon + 1,
            got: beliefs.len(),
        });
    }
    let ctx = Context::new(spec, &dec.layout)?;
    let states = StateInfo::from_beliefs(beliefs);
    let mut sink = ValueSink::named();
    residuals::emit_family(&ctx, &dec.values, &states, family, &mut sink);
    Ok(sink.into_named())
}

pub fn guidance_residuals(
    spec: &MissionSpec,
    beliefs: &[GaussianBelief],
    dec: &DecisionVector,
) -> Result<Vec<NamedResidual>> {
    family_residuals(spec, beliefs, dec, Family::Guidance)
}

pub fn camera_residuals(
    spec: &MissionSpec,
    beliefs: &[GaussianBelief],
    dec: &DecisionVector,
) -> Result<Vec<NamedResidual>> {
    family_residuals(spec, beliefs, dec, Family::Camera)
}

pub fn obstacle_residuals(
    spec: &MissionSpec,
    beliefs: &[GaussianBelief],
    dec: &DecisionVector,
) -> Result<Vec<NamedResidual>> {
    family_residuals(spec, beliefs, dec, Family::Obstacle)
}

/// Precomputed, control-independent data shared by every evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Context<'a> {
    pub spec: &'a MissionSpec,
    pub layout: &'a Layout,
    pub k_w: f64,
    pub k_o: f64,
    /// Coverage points per waypoint.
    pub targets: Vec<Vec<Vec3>>,
}

impl<'a> Context<'a> {
    fn new(spec: &'a MissionSpec, layout: &'a Layout) -> Result<Self> {
        Ok(Self {
            spec,
            layout,
            k_w: margin_factor(spec.delta_w)?,
            k_o: margin_factor(spec.delta_o)?,
            targets: (0..spec.waypoints.len()).map(|n| spec.coverage_points(n)).collect(),
        })
    }
}

/// Contiguous run of residual rows of one kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRange {
    pub block: Block,
    pub start: usize,
    pub len: usize,
}

/// The assembled program: variables, bounds, residual blocks and objective.
#[derive(Debug, Clone)]
pub struct TranscribedProgram {
    pub spec: Arc<MissionSpec>,
    pub layout: Layout,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eq_blocks: Vec<BlockRange>,
    pub ineq_blocks: Vec<BlockRange>,
    n_eq: usize,
    n_ineq: usize,
}

/// Objective and residual values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramValues {
    pub objective: f64,
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
}

pub fn transcribe(spec: MissionSpec) -> Result<TranscribedProgram> {
    spec.validate()?;
    if spec.waypoints.is_empty() {
        return Err(Error::InvalidMission("at least one facet to cover is required".into()));
    }
    let layout = spec.layout();
    let (lower, upper) = layout.bounds(&spec.control_bounds);

    // row shape: one dry pass at the initial belief
    let ctx = Context::new(&spec, &layout)?;
    let states = StateInfo::from_beliefs(&vec![spec.initial_belief; spec.horizon + 1]);
    let mut sink = ValueSink::named();
    emit_all(&ctx, &lower, &states, &mut sink);
    let named = sink.into_named();
    let (mut eq_blocks, mut ineq_blocks) = (Vec::new(), Vec::new());
    let (mut n_eq, mut n_ineq) = (0, 0);
    for r in named {
        let (list, count) = match r.block.kind() {
            RowKind::Eq => (&mut eq_blocks, &mut n_eq),
            RowKind::Ineq => (&mut ineq_blocks, &mut n_ineq),
        };
        list.push(BlockRange {
            block: r.block,
            start: *count,
            len: r.values.len(),
        });
        *count += r.values.len();
    }
    Ok(TranscribedProgram {
        spec: Arc::new(spec),
        layout,
        lower,
        upper,
        eq_blocks,
        ineq_blocks,
        n_eq,
        n_ineq,
    })
}

impl TranscribedProgram {
    pub fn num_vars(&self) -> usize {
        self.layout.len()
    }

    pub fn num_eq(&self) -> usize {
        self.n_eq
    }

    pub fn num_ineq(&self) -> usize {
        self.n_ineq
    }

    pub fn decision(&self, values: Vec<f64>) -> DecisionVector {
        DecisionVector {
            layout: self.layout.clone(),
            values,
        }
    }

    pub fn controls(&self, x: &[f64]) -> Vec<ControlInput> {
        self.layout.controls(x)
    }

    pub fn beliefs(&self, x: &[f64]) -> Result<Vec<GaussianBelief>> {
        belief_trajectory(&self.spec, &self.controls(x))
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_vars() {
            return Err(Error::LengthMismatch {
                what: "decision vector",
                expected: self.num_vars(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<ProgramValues> {
        self.check_len(x)?;
        let beliefs = self.beliefs(x)?;
        self.evaluate_with(x, &beliefs)
    }

    pub fn evaluate_with(&self, x: &[f64], beliefs: &[GaussianBelief]) -> Result<ProgramValues> {
        let ctx = Context::new(&self.spec, &self.layout)?;
        let states = StateInfo::from_beliefs(beliefs);
        let mut sink = ValueSink::flat(self.n_eq, self.n_ineq);
        emit_all(&ctx, x, &states, &mut sink);
        let (eq, ineq) = sink.into_flat();
        Ok(ProgramValues {
            objective: objective(&self.spec, beliefs, &self.controls(x)),
            eq,
            ineq,
        })
    }

    /// Gradient of `w_obj f + w_eq . h + w_ineq . g`.
    pub fn weighted_gradient(&self, x: &[f64], w_obj: f64, w_eq: &[f64], w_ineq: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let controls = self.controls(x);
        let beliefs = belief_trajectory(&self.spec, &controls)?;
        let sens = sensitivities(&self.spec, &beliefs, &controls)?;
        self.weighted_gradient_with(x, &beliefs, &sens, w_obj, w_eq, w_ineq)
    }

    pub fn weighted_gradient_with(
        &self,
        x: &[f64],
        beliefs: &[GaussianBelief],
        sens: &Sensitivities,
        w_obj: f64,
        w_eq: &[f64],
        w_ineq: &[f64],
    ) -> Result<Vec<f64>> {
        let ctx = Context::new(&self.spec, &self.layout)?;
        let states = StateInfo::from_beliefs(beliefs);
        let mut sink = GradSink::new(x.len(), self.spec.horizon + 1, w_eq, w_ineq);
        emit_all(&ctx, x, &states, &mut sink);
        let (mut grad, mut adj) = sink.finish();

        // objective
        if w_obj != 0.0 {
            for t in 0..self.spec.horizon {
                for k in 0..3 {
                    let i = self.layout.u(t, k);
                    grad[i] += w_obj * 2.0 * x[i];
                }
            }
            let e = states[self.spec.horizon].p - self.spec.goal;
            for k in 0..3 {
                adj[self.spec.horizon][k] += w_obj * 2.0 * e[k];
            }
        }
        sens.pull_back(&adj, &mut grad[..3 * self.spec.horizon]);
        Ok(grad)
    }

    /// Largest violation over all rows (`|h|` and `max(0, g)`), with the row.
    pub fn max_violation(&self, v: &ProgramValues) -> (f64, Option<(Block, usize)>) {
        let mut worst = (0.0, None);
        for b in &self.eq_blocks {
            for i in 0..b.len {
                let e = v.eq[b.start + i].abs();
                if e > worst.0 {
                    worst = (e, Some((b.block, i)));
                }
            }
        }
        for b in &self.ineq_blocks {
            for i in 0..b.len {
                let e = v.ineq[b.start + i].max(0.0);
                if e > worst.0 {
                    worst = (e, Some((b.block, i)));
                }
            }
        }
        worst
    }

    pub fn relaxable_rows(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_ineq];
        for b in &self.ineq_blocks {
            if b.block.relaxable() {
                out[b.start..b.start + b.len].fill(true);
            }
        }
        out
    }

    /// Copy of this program with different variable bounds.
    pub fn with_bounds(&self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            lower,
            upper,
            ..self.clone()
        }
    }

    pub fn eq_block(&self, block: Block) -> Option<&BlockRange> {
        self.eq_blocks.iter().find(|b| b.block == block)
    }

    pub fn ineq_block(&self, block: Block) -> Option<&BlockRange> {
        self.ineq_blocks.iter().find(|b| b.block == block)
    }
}

/// Pitch range applied to the mean (the unscented chart is not saturated).
pub const PITCH_LIMIT: f64 = FRAC_PI_2;

pub(crate) const L_W: usize = CUBE_FACES;
pub(crate) const L_FOV: usize = FOV_FACES;

#[cfg(test)]
pub(crate) mod testkit;
#[cfg(test)]
mod tests;
