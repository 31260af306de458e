use crate::dynamics::{ControlBounds, ControlInput};
use crate::geometry::{CUBE_FACES, FOV_FACES};

/// Variable blocks in storage order. Each block is time-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarBlock {
    U,
    W1,
    W2,
    W3,
    G1,
    G2,
    S,
    O,
}

impl VarBlock {
    pub const ALL: [VarBlock; 8] = [
        VarBlock::U,
        VarBlock::W1,
        VarBlock::W2,
        VarBlock::W3,
        VarBlock::G1,
        VarBlock::G2,
        VarBlock::S,
        VarBlock::O,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VarBlock::U => "u",
            VarBlock::W1 => "w1",
            VarBlock::W2 => "w2",
            VarBlock::W3 => "w3",
            VarBlock::G1 => "g1",
            VarBlock::G2 => "g2",
            VarBlock::S => "s_fov",
            VarBlock::O => "o",
        }
    }
}

/// Index map of the flat decision vector `[u | w1 | w2 | w3 | g1 | g2 | s | o]`.
///
/// Within a block the time step is the slowest index, e.g. `w1[t][n][l]`
/// and `g1[t][n][m][v][face]` (`v` ranges over the coverage points).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub horizon: usize,
    pub waypoints: usize,
    pub fov_states: usize,
    pub cover_points: usize,
    pub obstacle_faces: Vec<usize>,
    obstacle_offsets: Vec<usize>,
    obstacle_total: usize,
    starts: [usize; 9],
}

impl Layout {
    pub fn new(
        horizon: usize,
        waypoints: usize,
        fov_states: usize,
        cover_points: usize,
        obstacle_faces: Vec<usize>,
    ) -> Self {
        let mut obstacle_offsets = Vec::with_capacity(obstacle_faces.len());
        let mut total = 0;
        for &f in &obstacle_faces {
            obstacle_offsets.push(total);
            total += f;
        }
        let (t, n, m, k) = (horizon, waypoints, fov_states, cover_points);
        let sizes = [
            3 * t,
            CUBE_FACES * n * t,
            n * t,
            n * t,
            FOV_FACES * k * m * n * t,
            k * m * n * t,
            m * t,
            total * t,
        ];
        let mut starts = [0; 9];
        for i in 0..8 {
            starts[i + 1] = starts[i] + sizes[i];
        }
        Self {
            horizon,
            waypoints,
            fov_states,
            cover_points,
            obstacle_faces,
            obstacle_offsets,
            obstacle_total: total,
            starts,
        }
    }

    pub fn len(&self) -> usize {
        self.starts[8]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, b: VarBlock) -> std::ops::Range<usize> {
        let i = VarBlock::ALL.iter().position(|x| *x == b).unwrap();
        self.starts[i]..self.starts[i + 1]
    }

    pub fn block_of(&self, idx: usize) -> VarBlock {
        let i = (0..8).rev().find(|&i| self.starts[i] <= idx && self.starts[i] < self.starts[i + 1]);
        VarBlock::ALL[i.unwrap_or(0)]
    }

    #[inline]
    pub fn u(&self, t: usize, k: usize) -> usize {
        3 * t + k
    }

    #[inline]
    pub fn w1(&self, t: usize, n: usize, l: usize) -> usize {
        self.starts[1] + (t * self.waypoints + n) * CUBE_FACES + l
    }

    #[inline]
    pub fn w2(&self, t: usize, n: usize) -> usize {
        self.starts[2] + t * self.waypoints + n
    }

    #[inline]
    pub fn w3(&self, t: usize, n: usize) -> usize {
        self.starts[3] + t * self.waypoints + n
    }

    #[inline]
    fn gi(&self, t: usize, n: usize, m: usize, v: usize) -> usize {
        ((t * self.waypoints + n) * self.fov_states + m) * self.cover_points + v
    }

    #[inline]
    pub fn g1(&self, t: usize, n: usize, m: usize, v: usize, face: usize) -> usize {
        self.starts[4] + self.gi(t, n, m, v) * FOV_FACES + face
    }

    #[inline]
    pub fn g2(&self, t: usize, n: usize, m: usize, v: usize) -> usize {
        self.starts[5] + self.gi(t, n, m, v)
    }

    #[inline]
    pub fn s(&self, t: usize, m: usize) -> usize {
        self.starts[6] + t * self.fov_states + m
    }

    #[inline]
    pub fn o(&self, t: usize, obstacle: usize, face: usize) -> usize {
        self.starts[7] + t * self.obstacle_total + self.obstacle_offsets[obstacle] + face
    }

    /// Box bounds for every variable.
    pub fn bounds(&self, cb: &ControlBounds) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.0; self.len()];
        let mut hi = vec![1.0; self.len()];
        for t in 0..self.horizon {
            for (k, b) in cb.upper().into_iter().enumerate() {
                lo[self.u(t, k)] = -b;
                hi[self.u(t, k)] = b;
            }
        }
        for i in self.range(VarBlock::W2) {
            lo[i] = -(CUBE_FACES as f64);
            hi[i] = 0.0;
        }
        for i in self.range(VarBlock::G2) {
            lo[i] = -(FOV_FACES as f64);
            hi[i] = 0.0;
        }
        (lo, hi)
    }

    pub fn controls(&self, x: &[f64]) -> Vec<ControlInput> {
        (0..self.horizon)
            .map(|t| ControlInput::from_slice(&x[3 * t..3 * t + 3]))
            .collect()
    }
}

/// Flat decision values tagged with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl DecisionVector {
    pub fn zeros(layout: Layout) -> Self {
        let values = vec![0.0; layout.len()];
        Self { layout, values }
    }

    pub fn controls(&self) -> Vec<ControlInput> {
        self.layout.controls(&self.values)
    }

    pub fn set_control(&mut self, t: usize, u: &ControlInput) {
        self.values[3 * t..3 * t + 3].copy_from_slice(&u.to_array());
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.values[i] = v;
    }

    /// `argmax_m s[m, t]`, ties toward the smaller index.
    pub fn fov_choice(&self, t: usize) -> usize {
        argmax((0..self.layout.fov_states).map(|m| self.values[self.layout.s(t, m)]))
    }

    /// `argmax_t w3[n, t]`, ties toward the smaller step.
    pub fn visit_step(&self, n: usize) -> usize {
        argmax((0..self.layout.horizon).map(|t| self.values[self.layout.w3(t, n)]))
    }
}

/// Index of the first maximum.
pub(crate) fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in it.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
