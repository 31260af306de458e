//! Built-in missions.
//!
//! * `paper-full`: the hill-coverage scenario, 14 facets over 80 steps.
//! * `paper-small`: the same scenario cut down to 3 facets and 25 steps.
//! * `single-waypoint`: one waypoint on the hill, for chance-level studies.
//! * `corridor`: two stacked boxes leaving a thin slot on the way to the goal.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::mesh::{parse_points, parse_soup, points_csv, soup_csv};
use crate::geometry::{delaunay_2p5d, gaussian_hill_points, make_waypoint, Facet, MeshFormat};
use crate::io::{write_text, MeshSource, MissionConfig, ObstacleDef, SolverSettings};
use crate::program::MissionSpec;
use crate::Vec3;

pub const FIXTURE_NAMES: [&str; 4] = ["paper-full", "paper-small", "single-waypoint", "corridor"];

/// Hill `40 exp(-((x-45)^2 + (y-45)^2) / 160)`, sampled on a 14 x 14 grid.
pub const HILL_PEAK: f64 = 40.0;
pub const HILL_CENTER: (f64, f64) = (45.0, 45.0);
pub const HILL_SPREAD: f64 = 160.0;

/// Corridor geometry: both boxes span this footprint; the slot is
/// `CORRIDOR_SLOT_Z +- CORRIDOR_HALF_GAP`, the way around is over or under.
pub const CORRIDOR_MIN: [f64; 2] = [44.0, 22.0];
pub const CORRIDOR_MAX: [f64; 2] = [56.0, 30.0];
pub const CORRIDOR_SLOT_Z: f64 = 12.0;
pub const CORRIDOR_HALF_GAP: f64 = 0.3;
/// Each box reaches this far from the slot centre.
pub const CORRIDOR_HEIGHT: f64 = 6.0;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub config: MissionConfig,
    /// Mesh file contents in `config.mesh.format`.
    pub mesh_text: String,
    pub subset: Vec<usize>,
    /// Comment lines written at the top of the mission file.
    pub notes: Vec<String>,
}

impl Fixture {
    pub fn facets(&self) -> Result<Vec<Facet>> {
        let p = Path::new("<fixture mesh>");
        match self.config.mesh.format {
            MeshFormat::Soup => parse_soup(p, &self.mesh_text),
            MeshFormat::Points => delaunay_2p5d(&parse_points(p, &self.mesh_text)?),
        }
    }

    pub fn spec(&self) -> Result<MissionSpec> {
        self.config.to_spec_with(&self.facets()?, &self.subset)
    }

    /// Writes the mission file plus `<stem>.mesh.csv` and `<stem>.facets.txt`
    /// next to it.
    pub fn write(&self, mission_path: &Path) -> Result<()> {
        let stem = mission_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::InvalidMission(format!("bad output path {}", mission_path.display())))?;
        let dir = mission_path.parent().unwrap_or(Path::new(""));
        let mesh_name = format!("{stem}.mesh.csv");
        let subset_name = format!("{stem}.facets.txt");
        let mut cfg = self.config.clone();
        cfg.mesh.path = mesh_name.clone().into();
        cfg.mesh.facet_subset = subset_name.clone().into();
        write_text(&dir.join(&mesh_name), &self.mesh_text)?;
        let subset: String = self.subset.iter().map(|i| format!("{i}\n")).collect();
        write_text(&dir.join(&subset_name), &subset)?;
        let mut text = format!("# fixture {}\n", self.name);
        for n in &self.notes {
            text.push_str(&format!("# {n}\n"));
        }
        text.push_str(&cfg.to_text());
        write_text(mission_path, &text)
    }
}

pub fn fixture(name: &str) -> Result<Fixture> {
    match name {
        "paper-full" => paper_full(),
        "paper-small" => paper_small(),
        "single-waypoint" => single_waypoint(),
        "corridor" => corridor(),
        _ => Err(Error::InvalidMission(format!(
            "unknown fixture {name:?} (expected one of {})",
            FIXTURE_NAMES.join(", ")
        ))),
    }
}

fn hill_points() -> Vec<Vec3> {
    gaussian_hill_points(HILL_PEAK, HILL_CENTER, HILL_SPREAD, 25.0, 65.0, 14)
}

/// The object itself as an obstacle: the largest axis-aligned box under the
/// hill surface, `[45 +- sqrt(80)]^2 x [0, 40/e]`.
fn hill_obstacle() -> ObstacleDef {
    let r = (HILL_SPREAD / 2.0).sqrt();
    ObstacleDef::Box {
        min: [HILL_CENTER.0 - r, HILL_CENTER.1 - r, 0.0],
        max: [HILL_CENTER.0 + r, HILL_CENTER.1 + r, HILL_PEAK / std::f64::consts::E],
    }
}

fn base_config() -> MissionConfig {
    MissionConfig {
        dt: 0.1,
        v_max: 12.0,
        omega_max: FRAC_PI_3,
        q_diag: [1e-3; 3],
        x0_mean: [10.0, 10.0, 10.0, 0.0, 0.0],
        x0_cov_diag: [1e-4; 5],
        h_fov: 15.0,
        phi_h_deg: 60.0,
        phi_v_deg: 60.0,
        psi_y_deg: vec![-90.0, -45.0, 0.0, 45.0, 90.0],
        psi_z_deg: vec![-135.0, -90.0, -45.0, 0.0, 45.0, 90.0, 135.0, 180.0],
        ut_alpha: 1.0,
        ut_rho: 2.5,
        ut_beta: 2.0,
        horizon: 80,
        delta_w: 0.4,
        delta_o: 0.3,
        c: 0.8,
        waypoint_edge: 5.0,
        goal: [45.5, 6.0, 5.0],
        env_min: [0.0; 3],
        env_max: [100.0; 3],
        cover_vertices: false,
        mesh: MeshSource {
            path: "mesh.csv".into(),
            format: MeshFormat::Points,
            facet_subset: "facets.txt".into(),
        },
        obstacles: vec![hill_obstacle()],
        solver: SolverSettings::default(),
    }
}

const HILL_NOTE: &str = "object obstacle: largest axis-aligned box under the hill surface";

fn paper_full() -> Result<Fixture> {
    let pts = hill_points();
    let facets = delaunay_2p5d(&pts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut subset = sample(&mut rng, facets.len(), 14).into_vec();
    subset.sort_unstable();
    Ok(Fixture {
        name: "paper-full",
        config: base_config(),
        mesh_text: points_csv(&pts),
        subset,
        notes: vec![HILL_NOTE.into()],
    })
}

/// Facets whose waypoint centres come closest to `targets`.
fn facets_near(cfg: &MissionConfig, facets: &[Facet], targets: &[Vec3]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for t in targets {
        let mut best = (0, f64::INFINITY);
        for (i, f) in facets.iter().enumerate() {
            let w = make_waypoint(f, i, cfg.c, cfg.h_fov, cfg.waypoint_edge)?;
            let d = (w.centroid - t).norm();
            if d < best.1 && !out.contains(&i) {
                best = (i, d);
            }
        }
        out.push(best.0);
    }
    Ok(out)
}

fn paper_small() -> Result<Fixture> {
    let pts = hill_points();
    let facets = delaunay_2p5d(&pts)?;
    let mut config = base_config();
    config.horizon = 25;
    // the vehicle starts at rest and needs 15 steps for a quarter turn, so
    // the start sits next to a short chain of facets
    config.x0_mean = [61.1, 70.0, 10.5, 0.0, 0.0];
    let targets = [
        Vec3::new(62.55, 66.69, 12.27),
        Vec3::new(63.86, 63.86, 13.54),
        Vec3::new(65.28, 60.44, 15.54),
    ];
    let subset = facets_near(&config, &facets, &targets)?;
    Ok(Fixture {
        name: "paper-small",
        config,
        mesh_text: points_csv(&pts),
        subset,
        notes: vec![
            HILL_NOTE.into(),
            "start moved to the hill's north-east flank: three neighbouring waypoints within 25 steps".into(),
        ],
    })
}

/// Flat facet with its waypoint straight down the `-y` line from the start,
/// which is also the initial heading.
/// The goal sits short of the cube, so the plan stops on the shrunk face and
/// the visit distance to the centre is `edge/2 - zeta`.
fn single_waypoint() -> Result<Fixture> {
    let ground = ground_facet()?;
    let mut config = base_config();
    let wp = make_waypoint(&ground, 0, config.c, config.h_fov, config.waypoint_edge)?.centroid;
    config.horizon = 14;
    config.q_diag = [1e-2; 3];
    config.x0_mean = [wp.x, wp.y + 15.0, wp.z, 0.0, -FRAC_PI_2];
    config.goal = [wp.x, wp.y + 4.0, wp.z];
    config.mesh.format = MeshFormat::Soup;
    config.obstacles = Vec::new();
    Ok(Fixture {
        name: "single-waypoint",
        config,
        mesh_text: soup_csv(&[ground]),
        subset: vec![0],
        notes: vec![
            "one ground facet; the goal lies between the start and the waypoint cube".into(),
            "disturbance variance raised to 1e-2 so the chance margins are visible".into(),
        ],
    })
}

fn ground_facet() -> Result<Facet> {
    Ok(Facet::new([
        Vec3::new(49.0, 43.0, 0.0),
        Vec3::new(52.0, 43.0, 0.0),
        Vec3::new(49.0, 46.0, 0.0),
    ])?
    .upward())
}

fn corridor() -> Result<Fixture> {
    let ground = ground_facet()?;
    let mut config = base_config();
    config.horizon = 60;
    config.x0_mean = [50.0, 10.0, CORRIDOR_SLOT_Z, 0.0, FRAC_PI_2];
    config.q_diag = [1e-2; 3];
    config.goal = [50.0, 52.0, CORRIDOR_SLOT_Z];
    config.mesh.format = MeshFormat::Soup;
    let [x0, y0] = CORRIDOR_MIN;
    let [x1, y1] = CORRIDOR_MAX;
    config.obstacles = vec![
        ObstacleDef::Box {
            min: [x0, y0, CORRIDOR_SLOT_Z - CORRIDOR_HEIGHT],
            max: [x1, y1, CORRIDOR_SLOT_Z - CORRIDOR_HALF_GAP],
        },
        ObstacleDef::Box {
            min: [x0, y0, CORRIDOR_SLOT_Z + CORRIDOR_HALF_GAP],
            max: [x1, y1, CORRIDOR_SLOT_Z + CORRIDOR_HEIGHT],
        },
    ];
    Ok(Fixture {
        name: "corridor",
        config,
        mesh_text: soup_csv(&[ground]),
        subset: vec![0],
        notes: vec!["two boxes stacked with a thin horizontal slot between them".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_full_values() {
        let f = fixture("paper-full").unwrap();
        let spec = f.spec().unwrap();
        assert_eq!(spec.horizon, 80);
        assert_eq!(spec.fov_states.len(), 40);
        assert_eq!(spec.waypoints.len(), 14);
        assert_eq!(f.facets().unwrap().len(), 338);
        assert_eq!(spec.initial_belief.mean.as_slice(), &[10.0, 10.0, 10.0, 0.0, 0.0]);
        assert_eq!(spec.delta_w, 0.4);
        assert_eq!(spec.delta_o, 0.3);
        assert_eq!(spec.goal, Vec3::new(45.5, 6.0, 5.0));
        assert_eq!(spec.control_bounds.omega_max, FRAC_PI_3);
    }

    #[test]
    fn every_fixture_builds() {
        for name in FIXTURE_NAMES {
            let spec = fixture(name).unwrap().spec().unwrap();
            spec.validate().unwrap();
        }
        assert!(fixture("nope").is_err());
    }

    #[test]
    fn paper_small_is_a_cut_down_copy() {
        let full = fixture("paper-full").unwrap().config;
        let small = fixture("paper-small").unwrap();
        assert_eq!(small.subset.len(), 3);
        assert_eq!(small.config.horizon, 25);
        let mut c = small.config.clone();
        c.horizon = full.horizon;
        c.x0_mean = full.x0_mean;
        assert_eq!(c, full);
    }
}
