//! Mission files: line-oriented `section.key = value` text. Angles named
//! `*_deg` are degrees on disk and are converted to radians only when the
//! mission is turned into a [`MissionSpec`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix5, Vector5};
use sha2::{Digest, Sha256};

use super::{join, key_values, parse_f64, parse_fixed, parse_list, read_text, write_text};
use crate::dynamics::{ControlBounds, DisturbanceModel};
use crate::error::{Error, Result};
use crate::geometry::{
    enumerate_fov_states, load_facet_subset, load_mesh, make_waypoint, CameraConfig, ConvexPolytope, Facet,
    HalfSpace, MeshFormat,
};
use crate::program::MissionSpec;
use crate::solver::SolverConfig;
use crate::uncertainty::{GaussianBelief, UtConfig};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub enum ObstacleDef {
    Box { min: [f64; 3], max: [f64; 3] },
    /// `(normal, offset)` pairs of `normal . p <= offset`.
    HalfSpaces(Vec<([f64; 3], f64)>),
}

impl ObstacleDef {
    pub fn polytope(&self) -> Result<ConvexPolytope> {
        match self {
            ObstacleDef::Box { min, max } => ConvexPolytope::axis_box(Vec3::from(*min), Vec3::from(*max)),
            ObstacleDef::HalfSpaces(hs) => ConvexPolytope::new(
                hs.iter()
                    .map(|(n, b)| HalfSpace::new(Vec3::from(*n), *b))
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

/// Mesh file, its encoding, and the file listing the facets to cover. Paths
/// are relative to the mission file.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSource {
    pub path: PathBuf,
    pub format: MeshFormat,
    pub facet_subset: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub seed: u64,
    pub multistarts: usize,
    pub constraint_tol: f64,
    pub optimality_tol: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            seed: d.rng_seed,
            multistarts: d.multistart_count,
            constraint_tol: d.constraint_tol,
            optimality_tol: d.optimality_tol,
            max_outer_iters: d.max_outer_iters,
            max_inner_iters: d.max_inner_iters,
        }
    }
}

impl SolverSettings {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            rng_seed: self.seed,
            multistart_count: self.multistarts,
            constraint_tol: self.constraint_tol,
            optimality_tol: self.optimality_tol,
            max_outer_iters: self.max_outer_iters,
            max_inner_iters: self.max_inner_iters,
            ..SolverConfig::default()
        }
    }
}

/// Everything a mission file holds, in file units.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub dt: f64,
    pub v_max: f64,
    /// rad/s
    pub omega_max: f64,
    pub q_diag: [f64; 3],
    /// `(x, y, z, theta, phi)`, angles in radians.
    pub x0_mean: [f64; 5],
    pub x0_cov_diag: [f64; 5],
    pub h_fov: f64,
    pub phi_h_deg: f64,
    pub phi_v_deg: f64,
    pub psi_y_deg: Vec<f64>,
    pub psi_z_deg: Vec<f64>,
    pub ut_alpha: f64,
    pub ut_rho: f64,
    pub ut_beta: f64,
    pub horizon: usize,
    pub delta_w: f64,
    pub delta_o: f64,
    pub c: f64,
    pub waypoint_edge: f64,
    pub goal: [f64; 3],
    pub env_min: [f64; 3],
    pub env_max: [f64; 3],
    pub cover_vertices: bool,
    pub mesh: MeshSource,
    pub obstacles: Vec<ObstacleDef>,
    pub solver: SolverSettings,
}

const KEYS: [&str; 32] = [
    "dynamics.dt",
    "dynamics.v_max",
    "dynamics.omega_max",
    "dynamics.q_diag",
    "dynamics.x0_mean",
    "dynamics.x0_cov_diag",
    "camera.h_fov",
    "camera.phi_h_deg",
    "camera.phi_v_deg",
    "camera.psi_y_deg",
    "camera.psi_z_deg",
    "ut.alpha",
    "ut.rho",
    "ut.beta",
    "mission.T",
    "mission.delta_w",
    "mission.delta_o",
    "mission.c",
    "mission.waypoint_edge",
    "mission.goal",
    "mission.env_min",
    "mission.env_max",
    "mission.cover_vertices",
    "mesh.source",
    "mesh.format",
    "mesh.facet_subset",
    "solver.seed",
    "solver.multistarts",
    "solver.constraint_tol",
    "solver.optimality_tol",
    "solver.max_outer_iters",
    "solver.max_inner_iters",
];

const OPTIONAL: [&str; 10] = [
    "ut.alpha",
    "ut.rho",
    "ut.beta",
    "mission.cover_vertices",
    "solver.seed",
    "solver.multistarts",
    "solver.constraint_tol",
    "solver.optimality_tol",
    "solver.max_outer_iters",
    "solver.max_inner_iters",
];

impl MissionConfig {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("dynamics.dt", self.dt.to_string());
        kv("dynamics.v_max", self.v_max.to_string());
        kv("dynamics.omega_max", self.omega_max.to_string());
        kv("dynamics.q_diag", join(&self.q_diag));
        kv("dynamics.x0_mean", join(&self.x0_mean));
        kv("dynamics.x0_cov_diag", join(&self.x0_cov_diag));
        kv("camera.h_fov", self.h_fov.to_string());
        kv("camera.phi_h_deg", self.phi_h_deg.to_string());
        kv("camera.phi_v_deg", self.phi_v_deg.to_string());
        kv("camera.psi_y_deg", join(&self.psi_y_deg));
        kv("camera.psi_z_deg", join(&self.psi_z_deg));
        kv("ut.alpha", self.ut_alpha.to_string());
        kv("ut.rho", self.ut_rho.to_string());
        kv("ut.beta", self.ut_beta.to_string());
        kv("mission.T", self.horizon.to_string());
        kv("mission.delta_w", self.delta_w.to_string());
        kv("mission.delta_o", self.delta_o.to_string());
        kv("mission.c", self.c.to_string());
        kv("mission.waypoint_edge", self.waypoint_edge.to_string());
        kv("mission.goal", join(&self.goal));
        kv("mission.env_min", join(&self.env_min));
        kv("mission.env_max", join(&self.env_max));
        kv("mission.cover_vertices", self.cover_vertices.to_string());
        kv("mesh.source", self.mesh.path.display().to_string());
        kv("mesh.format", self.mesh.format.as_str().to_string());
        kv("mesh.facet_subset", self.mesh.facet_subset.display().to_string());
        for o in &self.obstacles {
            match o {
                ObstacleDef::Box { min, max } => {
                    kv("obstacles.box", join(&[min[0], min[1], min[2], max[0], max[1], max[2]]))
                }
                ObstacleDef::HalfSpaces(hs) => kv(
                    "obstacles.halfspaces",
                    hs.iter()
                        .map(|(n, b)| join(&[n[0], n[1], n[2], *b]))
                        .collect::<Vec<_>>()
                        .join("; "),
                ),
            }
        }
        let sv = &self.solver;
        kv("solver.seed", sv.seed.to_string());
        kv("solver.multistarts", sv.multistarts.to_string());
        kv("solver.constraint_tol", sv.constraint_tol.to_string());
        kv("solver.optimality_tol", sv.optimality_tol.to_string());
        kv("solver.max_outer_iters", sv.max_outer_iters.to_string());
        kv("solver.max_inner_iters", sv.max_inner_iters.to_string());
        s
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut single: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut obstacles = Vec::new();
        for (line, k, v) in key_values(path, text)? {
            match k.as_str() {
                "obstacles.box" => {
                    let b: [f64; 6] = parse_fixed(path, line, &v)?;
                    obstacles.push(ObstacleDef::Box {
                        min: [b[0], b[1], b[2]],
                        max: [b[3], b[4], b[5]],
                    });
                }
                "obstacles.halfspaces" => {
                    let hs = v
                        .split(';')
                        .map(|h| {
                            let a: [f64; 4] = parse_fixed(path, line, h)?;
                            Ok(([a[0], a[1], a[2]], a[3]))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    obstacles.push(ObstacleDef::HalfSpaces(hs));
                }
                key if KEYS.contains(&key) => {
                    if single.insert(k.clone(), (line, v)).is_some() {
                        return Err(Error::parse(path, line, format!("duplicate key {k}")));
                    }
                }
                _ => return Err(Error::parse(path, line, format!("unknown key {k}"))),
            }
        }
        for k in KEYS {
            if !single.contains_key(k) && !OPTIONAL.contains(&k) {
                return Err(Error::parse(path, 0, format!("missing key {k}")));
            }
        }
        let get = |k: &str| single.get(k).map(|(l, v)| (*l, v.as_str()));
        let num = |k: &str| -> Result<f64> {
            let (l, v) = get(k).unwrap();
            parse_f64(path, l, v)
        };
        let num_or = |k: &str, d: f64| -> Result<f64> { if get(k).is_some() { num(k) } else { Ok(d) } };
        let list = |k: &str| -> Result<Vec<f64>> {
            let (l, v) = get(k).unwrap();
            parse_list(path, l, v)
        };
        fn fixed<const N: usize>(path: &Path, e: Option<(usize, &str)>) -> Result<[f64; N]> {
            let (l, v) = e.unwrap();
            parse_fixed(path, l, v)
        }
        let int = |k: &str, d: u64| -> Result<u64> {
            match get(k) {
                None => Ok(d),
                Some((l, v)) => v.parse().map_err(|_| Error::parse(path, l, format!("bad integer {v:?}"))),
            }
        };
        let (fl, fv) = get("mesh.format").unwrap();
        let format = MeshFormat::parse(fv).ok_or_else(|| Error::parse(path, fl, format!("unknown mesh format {fv:?}")))?;
        let cover_vertices = match get("mission.cover_vertices") {
            None => false,
            Some((_, "true")) => true,
            Some((_, "false")) => false,
            Some((l, v)) => return Err(Error::parse(path, l, format!("bad boolean {v:?}"))),
        };
        let ut = UtConfig::default();
        let sd = SolverSettings::default();
        Ok(Self {
            dt: num("dynamics.dt")?,
            v_max: num("dynamics.v_max")?,
            omega_max: num("dynamics.omega_max")?,
            q_diag: fixed(path, get("dynamics.q_diag"))?,
            x0_mean: fixed(path, get("dynamics.x0_mean"))?,
            x0_cov_diag: fixed(path, get("dynamics.x0_cov_diag"))?,
            h_fov: num("camera.h_fov")?,
            phi_h_deg: num("camera.phi_h_deg")?,
            phi_v_deg: num("camera.phi_v_deg")?,
            psi_y_deg: list("camera.psi_y_deg")?,
            psi_z_deg: list("camera.psi_z_deg")?,
            ut_alpha: num_or("ut.alpha", ut.alpha)?,
            ut_rho: num_or("ut.rho", ut.rho)?,
            ut_beta: num_or("ut.beta", ut.beta)?,
            horizon: int("mission.T", 0)? as usize,
            delta_w: num("mission.delta_w")?,
            delta_o: num("mission.delta_o")?,
            c: num("mission.c")?,
            waypoint_edge: num("mission.waypoint_edge")?,
            goal: fixed(path, get("mission.goal"))?,
            env_min: fixed(path, get("mission.env_min"))?,
            env_max: fixed(path, get("mission.env_max"))?,
            cover_vertices,
            mesh: MeshSource {
                path: PathBuf::from(get("mesh.source").unwrap().1),
                format,
                facet_subset: PathBuf::from(get("mesh.facet_subset").unwrap().1),
            },
            obstacles,
            solver: SolverSettings {
                seed: int("solver.seed", sd.seed)?,
                multistarts: int("solver.multistarts", sd.multistarts as u64)? as usize,
                constraint_tol: num_or("solver.constraint_tol", sd.constraint_tol)?,
                optimality_tol: num_or("solver.optimality_tol", sd.optimality_tol)?,
                max_outer_iters: int("solver.max_outer_iters", sd.max_outer_iters as u64)? as usize,
                max_inner_iters: int("solver.max_inner_iters", sd.max_inner_iters as u64)? as usize,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn camera(&self) -> CameraConfig {
        CameraConfig {
            h_fov: self.h_fov,
            phi_h: self.phi_h_deg.to_radians(),
            phi_v: self.phi_v_deg.to_radians(),
            psi_y_set: self.psi_y_deg.iter().map(|d| d.to_radians()).collect(),
            psi_z_set: self.psi_z_deg.iter().map(|d| d.to_radians()).collect(),
        }
    }

    /// Mesh facets and the covered subset, read relative to `base`.
    pub fn load_mesh(&self, base: &Path) -> Result<(Vec<Facet>, Vec<usize>)> {
        let facets = load_mesh(&base.join(&self.mesh.path), self.mesh.format)?;
        let subset = load_facet_subset(&base.join(&self.mesh.facet_subset), facets.len())?;
        Ok((facets, subset))
    }

    /// Loads the mesh files relative to `base` and builds the spec.
    pub fn to_spec(&self, base: &Path) -> Result<MissionSpec> {
        let (facets, subset) = self.load_mesh(base)?;
        self.to_spec_with(&facets, &subset)
    }

    /// Builds the spec from an in-memory mesh.
    pub fn to_spec_with(&self, mesh: &[Facet], subset: &[usize]) -> Result<MissionSpec> {
        let camera = self.camera();
        camera.validate()?;
        let mut facets = Vec::with_capacity(subset.len());
        let mut waypoints = Vec::with_capacity(subset.len());
        for (n, &i) in subset.iter().enumerate() {
            let f = mesh
                .get(i)
                .ok_or_else(|| Error::InvalidMission(format!("facet {i} not in mesh of {}", mesh.len())))?;
            waypoints.push(make_waypoint(f, n, self.c, self.h_fov, self.waypoint_edge)?);
            facets.push(f.clone());
        }
        let spec = MissionSpec {
            horizon: self.horizon,
            dt: self.dt,
            facets,
            waypoints,
            fov_states: enumerate_fov_states(&camera),
            obstacles: self.obstacles.iter().map(|o| o.polytope()).collect::<Result<_>>()?,
            goal: Vec3::from(self.goal),
            delta_w: self.delta_w,
            delta_o: self.delta_o,
            env_min: Vec3::from(self.env_min),
            env_max: Vec3::from(self.env_max),
            control_bounds: ControlBounds {
                v_max: self.v_max,
                omega_max: self.omega_max,
            },
            initial_belief: GaussianBelief::new(
                Vector5::from(self.x0_mean),
                Matrix5::from_diagonal(&Vector5::from(self.x0_cov_diag)),
            ),
            disturbance: DisturbanceModel::diagonal(self.q_diag[0], self.q_diag[1], self.q_diag[2]),
            ut: UtConfig {
                alpha: self.ut_alpha,
                rho: self.ut_rho,
                beta: self.ut_beta,
                ..UtConfig::default()
            },
            camera,
            cover_vertices: self.cover_vertices,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// SHA-256 over every number of the spec (bit patterns, fixed order).
pub fn spec_hash(spec: &MissionSpec) -> String {
    let mut h = Sha256::new();
    let mut f = |x: f64| h.update(x.to_bits().to_le_bytes());
    f(spec.horizon as f64);
    f(spec.dt);
    for fc in &spec.facets {
        fc.vertices.iter().flat_map(|v| v.iter()).for_each(|x| f(*x));
    }
    for w in &spec.waypoints {
        f(w.facet_index as f64);
        w.centroid.iter().for_each(|x| f(*x));
        f(w.edge_length);
    }
    for s in &spec.fov_states {
        f(s.psi_y);
        f(s.psi_z);
        s.vertices_body.iter().for_each(|x| f(*x));
    }
    for o in &spec.obstacles {
        f(o.len() as f64);
        for hs in &o.half_spaces {
            hs.normal.iter().for_each(|x| f(*x));
            f(hs.offset);
        }
    }
    spec.goal.iter().for_each(|x| f(*x));
    f(spec.delta_w);
    f(spec.delta_o);
    spec.env_min.iter().chain(spec.env_max.iter()).for_each(|x| f(*x));
    f(spec.control_bounds.v_max);
    f(spec.control_bounds.omega_max);
    spec.initial_belief.mean.iter().for_each(|x| f(*x));
    spec.initial_belief.covariance.iter().for_each(|x| f(*x));
    spec.disturbance.mean.iter().for_each(|x| f(*x));
    spec.disturbance.covariance.iter().for_each(|x| f(*x));
    f(spec.ut.alpha);
    f(spec.ut.rho);
    f(spec.ut.beta);
    f(spec.camera.h_fov);
    f(spec.camera.phi_h);
    f(spec.camera.phi_v);
    f(if spec.cover_vertices { 1.0 } else { 0.0 });
    hex::encode(h.finalize())
}
