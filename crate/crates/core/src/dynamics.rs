//! Stochastic discrete-time UAV motion model.
//!
//! ```text
//! x' = x + dt (v + w_v) cos(phi) sin(theta)
//! y' = y + dt (v + w_v) sin(phi) cos(theta)
//! z' = z + dt (v + w_v) sin(theta)
//! theta' = theta + dt (u_theta + w_theta)
//! phi'   = phi   + dt (u_phi   + w_phi)
//! ```
//!
//! The position update is kept exactly as written above (including the mixed
//! `cos(phi) sin(theta)` / `sin(phi) cos(theta)` terms); it is not a unit-speed
//! spherical parameterization.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Vector3, Vector5};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::Vec3;

pub const STATE_DIM: usize = 5;
pub const CONTROL_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Rotation about y (rad), saturated to [-pi/2, pi/2].
    pub theta: f64,
    /// Rotation about z (rad), wrapped to (-pi, pi].
    pub phi: f64,
}

impl AgentState {
    pub fn new(x: f64, y: f64, z: f64, theta: f64, phi: f64) -> Self {
        Self { x, y, z, theta, phi }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_array(self) -> [f64; STATE_DIM] {
        [self.x, self.y, self.z, self.theta, self.phi]
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_vector(self) -> Vector5<f64> {
        Vector5::from(self.to_array())
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Linear velocity (m/s).
    pub v: f64,
    /// Angular rate about y (rad/s).
    pub w_theta: f64,
    /// Angular rate about z (rad/s).
    pub w_phi: f64,
}

impl ControlInput {
    pub fn new(v: f64, w_theta: f64, w_phi: f64) -> Self {
        Self { v, w_theta, w_phi }
    }

    pub fn to_array(self) -> [f64; CONTROL_DIM] {
        [self.v, self.w_theta, self.w_phi]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    pub fn norm_squared(&self) -> f64 {
        self.v * self.v + self.w_theta * self.w_theta + self.w_phi * self.w_phi
    }
}

/// Symmetric box on the controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    pub v_max: f64,
    pub omega_max: f64,
}

impl ControlBounds {
    pub fn contains(&self, u: &ControlInput) -> bool {
        u.v.abs() <= self.v_max && u.w_theta.abs() <= self.omega_max && u.w_phi.abs() <= self.omega_max
    }

    pub fn upper(&self) -> [f64; CONTROL_DIM] {
        [self.v_max, self.omega_max, self.omega_max]
    }

    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput::new(
            u.v.clamp(-self.v_max, self.v_max),
            u.w_theta.clamp(-self.omega_max, self.omega_max),
            u.w_phi.clamp(-self.omega_max, self.omega_max),
        )
    }
}

/// Gaussian disturbance on the control channels `(v, theta rate, phi rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceModel {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

impl DisturbanceModel {
    pub fn diagonal(var_v: f64, var_theta: f64, var_phi: f64) -> Self {
        Self {
            mean: Vector3::zeros(),
            covariance: Matrix3::from_diagonal(&Vector3::new(var_v, var_theta, var_phi)),
        }
    }

    pub fn zero() -> Self {
        Self::diagonal(0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let q = &self.covariance;
        let off_diag = (0..3).any(|i| (0..3).any(|j| i != j && q[(i, j)] != 0.0));
        if off_diag || (0..3).any(|i| !(q[(i, i)] >= 0.0)) {
            return Err(Error::InvalidMission(
                "disturbance covariance must be diagonal and non-negative".into(),
            ));
        }
        Ok(())
    }
}

pub type InitialBelief = crate::uncertainty::GaussianBelief;

/// One step of the motion model on raw arrays, without angle wrapping.
#[inline]
pub fn raw_step<S: Real>(s: &[S; 5], u: &[S; 3], noise: &[S; 3], dt: f64) -> [S; 5] {
    let v = (u[0] + noise[0]) * dt;
    let (st, ct) = s[3].sin_cos();
    let (sp, cp) = s[4].sin_cos();
    [
        s[0] + v * cp * st,
        s[1] + v * sp * ct,
        s[2] + v * st,
        s[3] + (u[1] + noise[1]) * dt,
        s[4] + (u[2] + noise[2]) * dt,
    ]
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// One step of the motion model with `phi` wrapped and `theta` saturated.
pub fn step(state: &AgentState, u: &ControlInput, noise: &Vector3<f64>, dt: f64) -> AgentState {
    let n = [noise[0], noise[1], noise[2]];
    let next = raw_step(&state.to_array(), &u.to_array(), &n, dt);
    AgentState::new(
        next[0],
        next[1],
        next[2],
        next[3].clamp(-FRAC_PI_2, FRAC_PI_2),
        wrap_angle(next[4]),
    )
}

/// Applies `step` along a control sequence; returns `T + 1` states.
pub fn rollout(
    x0: &AgentState,
    controls: &[ControlInput],
    noises: &[Vector3<f64>],
    dt: f64,
) -> Result<Vec<AgentState>> {
    if controls.len() != noises.len() {
        return Err(Error::LengthMismatch {
            what: "rollout noises",
            expected: controls.len(),
            got: noises.len(),
        });
    }
    let mut out = Vec::with_capacity(controls.len() + 1);
    out.push(*x0);
    for (u, w) in controls.iter().zip(noises) {
        let next = step(out.last().unwrap(), u, w, dt);
        out.push(next);
    }
    Ok(out)
}
