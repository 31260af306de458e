//! Probabilistically robust open-loop 3D coverage planning for a UAV agent.
//!
//! The planner steers the Gaussian belief of the agent, propagated with the
//! unscented transform, through a set of waypoints that guarantee camera
//! coverage of selected surface facets while keeping collision probabilities
//! below a designer-chosen level. Logical choices (which waypoint is visited
//! when, which camera state is active) are encoded with continuous decision
//! variables so the whole problem is a single nonlinear program.
//!
//! ## Modules
//!
//! - [`geometry`]: rotations, camera FOV polytopes, facet meshes, waypoints
//! - [`dynamics`]: the stochastic discrete-time motion model
//! - [`uncertainty`]: sigma points, belief propagation, chance margins
//! - [`program`]: transcription of the coverage problem into an NLP
//! - [`solver`]: augmented-Lagrangian solver, initialization, plan extraction
//! - [`validation`]: Monte-Carlo verification of a plan's probabilistic claims
//! - [`io`]: mission/plan/report file formats and CSV exports
//! - [`fixtures`]: ready-made missions

pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod program;
pub mod scalar;
pub mod solver;
pub mod special;
pub mod uncertainty;
pub mod validation;

pub use dynamics::{AgentState, ControlInput};
pub use error::{Error, Result};
pub use io::{MissionConfig, PlanFile};
pub use program::{MissionSpec, TranscribedProgram};
pub use solver::{PlanResult, SolveReport, SolveStatus, SolverConfig};
pub use uncertainty::GaussianBelief;
pub use validation::ValidationReport;

use nalgebra::{Matrix3, Vector3};

/// Point or direction in the world frame (meters).
pub type Vec3 = Vector3<f64>;

/// 3x3 matrix.
pub type Mat3 = Matrix3<f64>;
