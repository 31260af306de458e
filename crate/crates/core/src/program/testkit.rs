//! Small missions shared by unit tests.

use std::f64::consts::PI;

use nalgebra::{Matrix5, Vector5};

use crate::dynamics::{ControlBounds, DisturbanceModel};
use crate::geometry::{enumerate_fov_states, make_waypoint, CameraConfig, ConvexPolytope, Facet};
use crate::program::MissionSpec;
use crate::uncertainty::{GaussianBelief, UtConfig};
use crate::Vec3;

pub fn camera(psi_y: Vec<f64>) -> CameraConfig {
    CameraConfig {
        h_fov: 15.0,
        phi_h: PI / 3.0,
        phi_v: PI / 3.0,
        psi_y_set: psi_y,
        psi_z_set: vec![0.0],
    }
}

pub fn ground_facet(center: Vec3) -> Facet {
    Facet::new([
        center + Vec3::new(-1.0, -1.0, 0.0),
        center + Vec3::new(2.0, -1.0, 0.0),
        center + Vec3::new(-1.0, 2.0, 0.0),
    ])
    .unwrap()
}

/// `n` ground facets along y, `m` FOV states (the first one looks straight
/// down), optional box obstacle.
pub fn tiny(n: usize, m: usize, t: usize, obstacle: bool, cover_vertices: bool) -> MissionSpec {
    let psi: Vec<f64> = [-PI / 2.0, PI / 2.0, -PI / 4.0, PI / 4.0, 0.0][..m].to_vec();
    let camera = camera(psi);
    let mut fov_states = enumerate_fov_states(&camera);
    // put the downward-looking state first
    fov_states.sort_by(|a, b| a.axis().z.total_cmp(&b.axis().z));
    for (i, s) in fov_states.iter_mut().enumerate() {
        s.index = i;
    }
    let facets: Vec<Facet> = (0..n)
        .map(|k| ground_facet(Vec3::new(50.0, 40.0 + 6.0 * k as f64, 0.0)))
        .collect();
    let waypoints = facets
        .iter()
        .enumerate()
        .map(|(i, f)| make_waypoint(f, i, 0.8, 15.0, 5.0).unwrap())
        .collect();
    let obstacles = if obstacle {
        vec![ConvexPolytope::axis_box(Vec3::new(60.0, 30.0, 0.0), Vec3::new(70.0, 40.0, 10.0)).unwrap()]
    } else {
        vec![]
    };
    MissionSpec {
        horizon: t,
        dt: 0.1,
        facets,
        waypoints,
        fov_states,
        obstacles,
        goal: Vec3::new(45.5, 6.0, 5.0),
        delta_w: 0.4,
        delta_o: 0.3,
        env_min: Vec3::zeros(),
        env_max: Vec3::repeat(100.0),
        control_bounds: ControlBounds {
            v_max: 12.0,
            omega_max: PI / 3.0,
        },
        initial_belief: GaussianBelief::new(Vector5::new(50.0, 30.0, 12.0, 0.3, 0.5), Matrix5::identity() * 1e-4),
        disturbance: DisturbanceModel::diagonal(1e-3, 1e-3, 1e-3),
        ut: UtConfig::default(),
        camera,
        cover_vertices,
    }
}
