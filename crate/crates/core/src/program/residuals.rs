//! Residual rows in canonical form (`h = 0`, `g <= 0`). One emitter produces
//! values and, on request, partial derivatives, so the two can never drift.

use nalgebra::Matrix3;

use super::layout::VarBlock;
use super::sens::{COV_INDEX, SENS_QUANTITIES};
use super::{Context, L_FOV, L_W, PITCH_LIMIT};
use crate::uncertainty::GaussianBelief;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Ineq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    /// `w1 (a.p - b + zeta_w) <= 0` per waypoint face.
    GuidanceFace,
    /// `w2 = sum_l w1 - L`.
    GuidanceCount,
    /// `w3 w2 >= 0`.
    GuidanceComplementarity,
    /// `sum_t w3 = 1`.
    GuidanceVisit,
    /// `g1 (a.(K - p) - b) <= 0` per FOV face.
    CameraFace,
    /// `g2 = sum_l g1 - L_fov`.
    CameraCount,
    /// `g2 w3 s >= 0`.
    CameraComplementarity,
    /// `sum_m s = 1`.
    FovSum,
    /// `sum_m s^2 = 1`, the smooth form of the one-hot condition.
    FovOneHot,
    /// `o (a.p - b) >= zeta_o o` per obstacle face.
    ObstacleFace,
    /// `sum_j o = 1` per obstacle.
    ObstacleSelect,
    /// Mean position inside the environment box.
    EnvBounds,
    /// Mean pitch inside `[-pi/2, pi/2]`.
    PitchBounds,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::GuidanceFace => "guidance.face",
            Block::GuidanceCount => "guidance.count",
            Block::GuidanceComplementarity => "guidance.complementarity",
            Block::GuidanceVisit => "guidance.visit",
            Block::CameraFace => "camera.face",
            Block::CameraCount => "camera.count",
            Block::CameraComplementarity => "camera.complementarity",
            Block::FovSum => "fov.sum",
            Block::FovOneHot => "fov.onehot",
            Block::ObstacleFace => "obstacle.face",
            Block::ObstacleSelect => "obstacle.select",
            Block::EnvBounds => "env.bounds",
            Block::PitchBounds => "state.pitch",
        }
    }

    pub fn kind(self) -> RowKind {
        match self {
            Block::GuidanceCount
            | Block::GuidanceVisit
            | Block::CameraCount
            | Block::FovSum
            | Block::FovOneHot
            | Block::ObstacleSelect => RowKind::Eq,
            _ => RowKind::Ineq,
        }
    }

    /// Complementarity rows the solver may relax to `>= -eps`.
    pub fn relaxable(self) -> bool {
        matches!(self, Block::GuidanceComplementarity | Block::CameraComplementarity)
    }

    /// Variable blocks touched by rows of this block (controls stand for the
    /// belief-dependent terms).
    pub fn touches(self) -> &'static [VarBlock] {
        use VarBlock::*;
        match self {
            Block::GuidanceFace => &[U, W1],
            Block::GuidanceCount => &[W1, W2],
            Block::GuidanceComplementarity => &[W2, W3],
            Block::GuidanceVisit => &[W3],
            Block::CameraFace => &[U, G1],
            Block::CameraCount => &[G1, G2],
            Block::CameraComplementarity => &[G2, W3, S],
            Block::FovSum | Block::FovOneHot => &[S],
            Block::ObstacleFace => &[U, O],
            Block::ObstacleSelect => &[O],
            Block::EnvBounds | Block::PitchBounds => &[U],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedResidual {
    pub block: Block,
    pub values: Vec<f64>,
}

impl NamedResidual {
    pub fn name(&self) -> &'static str {
        self.block.name()
    }

    pub fn kind(&self) -> RowKind {
        self.block.kind()
    }

    pub fn max_violation(&self) -> f64 {
        match self.kind() {
            RowKind::Eq => self.values.iter().fold(0.0, |a, v| a.max(v.abs())),
            RowKind::Ineq => self.values.iter().fold(0.0, |a, v| a.max(*v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Family {
    Guidance,
    Camera,
    Obstacle,
    Bounds,
}

/// Belief quantities the residuals read.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StateInfo {
    pub p: Vec3,
    pub theta: f64,
    pub cov: Matrix3<f64>,
}

impl StateInfo {
    pub fn from_beliefs(b: &[GaussianBelief]) -> Vec<StateInfo> {
        b.iter()
            .map(|b| StateInfo {
                p: b.position_mean(),
                theta: b.mean[3],
                cov: b.position_covariance(),
            })
            .collect()
    }
}

type StateGrad = [f64; SENS_QUANTITIES];

pub(crate) trait Sink {
    /// Records a row value; returns whether its partials are wanted.
    fn row(&mut self, block: Block, value: f64) -> bool;
    fn var(&mut self, idx: usize, d: f64);
    fn state(&mut self, k: usize, d: &StateGrad);
}

pub(crate) struct ValueSink {
    named: Option<Vec<NamedResidual>>,
    eq: Vec<f64>,
    ineq: Vec<f64>,
}

impl ValueSink {
    pub fn named() -> Self {
        Self {
            named: Some(Vec::new()),
            eq: Vec::new(),
            ineq: Vec::new(),
        }
    }

    pub fn flat(n_eq: usize, n_ineq: usize) -> Self {
        Self {
            named: None,
            eq: Vec::with_capacity(n_eq),
            ineq: Vec::with_capacity(n_ineq),
        }
    }

    pub fn into_named(self) -> Vec<NamedResidual> {
        self.named.unwrap_or_default()
    }

    pub fn into_flat(self) -> (Vec<f64>, Vec<f64>) {
        (self.eq, self.ineq)
    }
}

impl Sink for ValueSink {
    fn row(&mut self, block: Block, value: f64) -> bool {
        match &mut self.named {
            Some(list) => match list.last_mut() {
                Some(last) if last.block == block => last.values.push(value),
                _ => list.push(NamedResidual {
                    block,
                    values: vec![value],
                }),
            },
            None => match block.kind() {
                RowKind::Eq => self.eq.push(value),
                RowKind::Ineq => self.ineq.push(value),
            },
        }
        false
    }

    fn var(&mut self, _: usize, _: f64) {}

    fn state(&mut self, _: usize, _: &StateGrad) {}
}

pub(crate) struct GradSink<'w> {
    w_eq: &'w [f64],
    w_ineq: &'w [f64],
    next_eq: usize,
    next_ineq: usize,
    w: f64,
    grad: Vec<f64>,
    adj: Vec<StateGrad>,
}

impl<'w> GradSink<'w> {
    pub fn new(n_vars: usize, n_beliefs: usize, w_eq: &'w [f64], w_ineq: &'w [f64]) -> Self {
        Self {
            w_eq,
            w_ineq,
            next_eq: 0,
            next_ineq: 0,
            w: 0.0,
            grad: vec![0.0; n_vars],
            adj: vec![[0.0; SENS_QUANTITIES]; n_beliefs],
        }
    }

    pub fn finish(self) -> (Vec<f64>, Vec<StateGrad>) {
        assert_eq!(self.next_eq, self.w_eq.len(), "equality weight count");
        assert_eq!(self.next_ineq, self.w_ineq.len(), "inequality weight count");
        (self.grad, self.adj)
    }
}

impl Sink for GradSink<'_> {
    #[inline]
    fn row(&mut self, block: Block, _value: f64) -> bool {
        self.w = match block.kind() {
            RowKind::Eq => {
                self.next_eq += 1;
                self.w_eq[self.next_eq - 1]
            }
            RowKind::Ineq => {
                self.next_ineq += 1;
                self.w_ineq[self.next_ineq - 1]
            }
        };
        self.w != 0.0
    }

    #[inline]
    fn var(&mut self, idx: usize, d: f64) {
        self.grad[idx] += self.w * d;
    }

    #[inline]
    fn state(&mut self, k: usize, d: &StateGrad) {
        for (a, b) in self.adj[k].iter_mut().zip(d) {
            *a += self.w * b;
        }
    }
}

/// `zeta = k sqrt(2 a^T C a)` and its derivative in the six covariance entries.
#[inline]
fn margin(k: f64, a: &Vec3, cov: &Matrix3<f64>) -> (f64, [f64; 6]) {
    let q = a.dot(&(cov * a)).max(0.0);
    let root = (2.0 * q).sqrt();
    let mut d = [0.0; 6];
    if root > 0.0 {
        let f = k / root;
        for (i, &(r, c)) in COV_INDEX.iter().enumerate() {
            d[i] = f * a[r] * a[c] * if r == c { 1.0 } else { 2.0 };
        }
    }
    (k * root, d)
}

#[inline]
fn state_grad(dp: Vec3, dtheta: f64, scale_cov: f64, dcov: &[f64; 6]) -> StateGrad {
    let mut g = [0.0; SENS_QUANTITIES];
    g[0] = dp.x;
    g[1] = dp.y;
    g[2] = dp.z;
    g[3] = dtheta;
    for i in 0..6 {
        g[4 + i] = scale_cov * dcov[i];
    }
    g
}

pub(crate) fn emit_all(ctx: &Context, x: &[f64], st: &[StateInfo], sink: &mut impl Sink) {
    for f in [Family::Guidance, Family::Camera, Family::Obstacle, Family::Bounds] {
        emit_family(ctx, x, st, f, sink);
    }
}

pub(crate) fn emit_family(ctx: &Context, x: &[f64], st: &[StateInfo], family: Family, sink: &mut impl Sink) {
    match family {
        Family::Guidance => guidance(ctx, x, st, sink),
        Family::Camera => camera(ctx, x, st, sink),
        Family::Obstacle => obstacles(ctx, x, st, sink),
        Family::Bounds => bounds(ctx, st, sink),
    }
}

fn guidance(ctx: &Context, x: &[f64], st: &[StateInfo], sink: &mut impl Sink) {
    let (lay, spec) = (ctx.layout, ctx.spec);
    let (t_max, n_max) = (lay.horizon, lay.waypoints);
    for t in 0..t_max {
        let s = &st[t + 1];
        for (n, wp) in spec.waypoints.iter().enumerate() {
            for (l, h) in wp.cube.half_spaces.iter().enumerate() {
                let i = lay.w1(t, n, l);
                let (zeta, dz) = margin(ctx.k_w, &h.normal, &s.cov);
                let e = h.normal.dot(&s.p) - h.offset + zeta;
                if sink.row(Block::GuidanceFace, x[i] * e) {
                    sink.var(i, e);
                    sink.state(t + 1, &state_grad(h.normal * x[i], 0.0, x[i], &dz));
                }
            }
        }
    }
    for t in 0..t_max {
        for n in 0..n_max {
            let i2 = lay.w2(t, n);
            let sum: f64 = (0..L_W).map(|l| x[lay.w1(t, n, l)]).sum();
            if sink.row(Block::GuidanceCount, x[i2] - sum + L_W as f64) {
                sink.var(i2, 1.0);
                for l in 0..L_W {
                    sink.var(lay.w1(t, n, l), -1.0);
                }
            }
        }
    }
    for t in 0..t_max {
        for n in 0..n_max {
            let (i2, i3) = (lay.w2(t, n), lay.w3(t, n));
            if sink.row(Block::GuidanceComplementarity, -x[i3] * x[i2]) {
                sink.var(i3, -x[i2]);
                sink.var(i2, -x[i3]);
            }
        }
    }
    for n in 0..n_max {
        let sum: f64 = (0..t_max).map(|t| x[lay.w3(t, n)]).sum();
        if sink.row(Block::GuidanceVisit, sum - 1.0) {
            for t in 0..t_max {
                sink.var(lay.w3(t, n), 1.0);
            }
        }
    }
}

fn camera(ctx: &Context, x: &[f64], st: &[StateInfo], sink: &mut impl Sink) {
    let (lay, spec) = (ctx.layout, ctx.spec);
    let (t_max, n_max, m_max, k_max) = (lay.horizon, lay.waypoints, lay.fov_states, lay.cover_points);
    let zero6 = [0.0; 6];
    for t in 0..t_max {
        let p = st[t + 1].p;
        for n in 0..n_max {
            for (m, fov) in spec.fov_states.iter().enumerate() {
                for (v, target) in ctx.targets[n].iter().enumerate() {
                    let rel = target - p;
                    for (f, h) in fov.half_spaces_body.iter().enumerate() {
                        let i = lay.g1(t, n, m, v, f);
                        let e = h.normal.dot(&rel) - h.offset;
                        if sink.row(Block::CameraFace, x[i] * e) {
                            sink.var(i, e);
                            sink.state(t + 1, &state_grad(-h.normal * x[i], 0.0, 0.0, &zero6));
                        }
                    }
                }
            }
        }
    }
    for t in 0..t_max {
        for n in 0..n_max {
            for m in 0..m_max {
                for v in 0..k_max {
                    let i2 = lay.g2(t, n, m, v);
                    let sum: f64 = (0..L_FOV).map(|f| x[lay.g1(t, n, m, v, f)]).sum();
                    if sink.row(Block::CameraCount, x[i2] - sum + L_FOV as f64) {
                        sink.var(i2, 1.0);
                        for f in 0..L_FOV {
                            sink.var(lay.g1(t, n, m, v, f), -1.0);
                        }
                    }
                }
            }
        }
    }
    for t in 0..t_max {
        for n in 0..n_max {
            let i3 = lay.w3(t, n);
            for m in 0..m_max {
                let is = lay.s(t, m);
                for v in 0..k_max {
                    let i2 = lay.g2(t, n, m, v);
                    if sink.row(Block::CameraComplementarity, -x[i2] * x[i3] * x[is]) {
                        sink.var(i2, -x[i3] * x[is]);
                        sink.var(i3, -x[i2] * x[is]);
                        sink.var(is, -x[i2] * x[i3]);
                    }
                }
            }
        }
    }
    for t in 0..t_max {
        let sum: f64 = (0..m_max).map(|m| x[lay.s(t, m)]).sum();
        if sink.row(Block::FovSum, sum - 1.0) {
            for m in 0..m_max {
                sink.var(lay.s(t, m), 1.0);
            }
        }
    }
    for t in 0..t_max {
        let sum: f64 = (0..m_max).map(|m| x[lay.s(t, m)].powi(2)).sum();
        if sink.row(Block::FovOneHot, sum - 1.0) {
            for m in 0..m_max {
                let i = lay.s(t, m);
                sink.var(i, 2.0 * x[i]);
            }
        }
    }
}

fn obstacles(ctx: &Context, x: &[f64], st: &[StateInfo], sink: &mut impl Sink) {
    let (lay, spec) = (ctx.layout, ctx.spec);
    for t in 0..lay.horizon {
        let s = &st[t + 1];
        for (xi, obs) in spec.obstacles.iter().enumerate() {
            for (j, h) in obs.half_spaces.iter().enumerate() {
                let i = lay.o(t, xi, j);
                let (zeta, dz) = margin(ctx.k_o, &h.normal, &s.cov);
                let e = zeta - (h.normal.dot(&s.p) - h.offset);
                if sink.row(Block::ObstacleFace, x[i] * e) {
                    sink.var(i, e);
                    sink.state(t + 1, &state_grad(-h.normal * x[i], 0.0, x[i], &dz));
                }
            }
        }
    }
    for t in 0..lay.horizon {
        for (xi, obs) in spec.obstacles.iter().enumerate() {
            let sum: f64 = (0..obs.len()).map(|j| x[lay.o(t, xi, j)]).sum();
            if sink.row(Block::ObstacleSelect, sum - 1.0) {
                for j in 0..obs.len() {
                    sink.var(lay.o(t, xi, j), 1.0);
                }
            }
        }
    }
}

fn bounds(ctx: &Context, st: &[StateInfo], sink: &mut impl Sink) {
    let spec = ctx.spec;
    let zero6 = [0.0; 6];
    for t in 0..ctx.layout.horizon {
        let p = st[t + 1].p;
        for a in 0..3 {
            let mut e = Vec3::zeros();
            e[a] = 1.0;
            if sink.row(Block::EnvBounds, p[a] - spec.env_max[a]) {
                sink.state(t + 1, &state_grad(e, 0.0, 0.0, &zero6));
            }
            if sink.row(Block::EnvBounds, spec.env_min[a] - p[a]) {
                sink.state(t + 1, &state_grad(-e, 0.0, 0.0, &zero6));
            }
        }
    }
    for t in 0..ctx.layout.horizon {
        let th = st[t + 1].theta;
        if sink.row(Block::PitchBounds, th - PITCH_LIMIT) {
            sink.state(t + 1, &state_grad(Vec3::zeros(), 1.0, 0.0, &zero6));
        }
        if sink.row(Block::PitchBounds, -PITCH_LIMIT - th) {
            sink.state(t + 1, &state_grad(Vec3::zeros(), -1.0, 0.0, &zero6));
        }
    }
}
