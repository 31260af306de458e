//! Plan files: a `key = value` header, one `step` record per decision step
//! and one `waypoint` record per waypoint. Numbers are written in shortest
//! round-trip form, so a re-read plan reproduces the controls bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{join, key_values, parse_f64, parse_list, read_text, write_text, MissionConfig};
use crate::dynamics::ControlInput;
use crate::error::{Error, Result};
use crate::program::{belief_trajectory, MissionSpec};
use crate::solver::{PlanResult, SolveStatus, SolverConfig};

/// Command-line changes applied on top of a mission file. Recorded in the
/// plan so later commands rebuild the same spec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub delta_w: Option<f64>,
    pub delta_o: Option<f64>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub multistarts: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut MissionConfig) {
        if let Some(d) = self.delta_w {
            cfg.delta_w = d;
        }
        if let Some(d) = self.delta_o {
            cfg.delta_o = d;
        }
        if let Some(t) = self.horizon {
            cfg.horizon = t;
        }
        if let Some(s) = self.seed {
            cfg.solver.seed = s;
        }
        if let Some(m) = self.multistarts {
            cfg.solver.multistarts = m;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanHeader {
    pub spec_hash: String,
    /// Mission file the plan was made from, as given on the command line.
    pub mission: PathBuf,
    pub seed: u64,
    pub status: SolveStatus,
    pub objective: f64,
    pub max_violation: f64,
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub control: ControlInput,
    /// Mean state after the step.
    pub mean: [f64; 5],
    /// Position covariance after the step: `xx, xy, xz, yy, yz, zz`.
    pub covariance: [f64; 6],
    pub fov: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointRecord {
    pub n: usize,
    pub visit_step: usize,
    /// Facet index in the mission mesh.
    pub facet_index: usize,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanFile {
    pub header: PlanHeader,
    pub steps: Vec<StepRecord>,
    pub waypoints: Vec<WaypointRecord>,
}

impl PlanFile {
    /// `facet_ids[n]` is the mesh index of waypoint `n`'s facet.
    pub fn from_plan(header: PlanHeader, plan: &PlanResult, facet_ids: &[usize]) -> Self {
        let steps = plan
            .controls
            .iter()
            .enumerate()
            .map(|(t, u)| {
                let b = &plan.beliefs[t + 1];
                let c = b.position_covariance();
                StepRecord {
                    t,
                    control: *u,
                    mean: std::array::from_fn(|i| b.mean[i]),
                    covariance: [c[(0, 0)], c[(0, 1)], c[(0, 2)], c[(1, 1)], c[(1, 2)], c[(2, 2)]],
                    fov: plan.fov_schedule[t],
                }
            })
            .collect();
        let waypoints = plan
            .visit_steps
            .iter()
            .enumerate()
            .map(|(n, &t)| WaypointRecord {
                n,
                visit_step: t,
                facet_index: facet_ids.get(n).copied().unwrap_or(n),
                covered: plan.covered[n],
            })
            .collect();
        Self {
            header,
            steps,
            waypoints,
        }
    }

    /// Rebuilds the plan for `spec`: controls, schedule and visits from the
    /// file, beliefs re-propagated. Fails on a hash or length mismatch.
    pub fn to_plan_result(&self, spec: &MissionSpec) -> Result<PlanResult> {
        let hash = super::spec_hash(spec);
        if hash != self.header.spec_hash {
            return Err(Error::HashMismatch {
                plan: self.header.spec_hash.clone(),
                mission: hash,
            });
        }
        if self.steps.len() != spec.horizon || self.waypoints.len() != spec.waypoints.len() {
            return Err(Error::LengthMismatch {
                what: "plan records",
                expected: spec.horizon,
                got: self.steps.len(),
            });
        }
        let controls: Vec<ControlInput> = self.steps.iter().map(|s| s.control).collect();
        let beliefs = belief_trajectory(spec, &controls)?;
        Ok(PlanResult {
            controls,
            beliefs,
            fov_schedule: self.steps.iter().map(|s| s.fov).collect(),
            visit_steps: self.waypoints.iter().map(|w| w.visit_step).collect(),
            covered: self.waypoints.iter().map(|w| w.covered).collect(),
            max_violation: self.header.max_violation,
        })
    }

    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut s = String::new();
        let _ = writeln!(s, "# plan");
        let _ = writeln!(s, "spec_hash = {}", h.spec_hash);
        let _ = writeln!(s, "mission = {}", h.mission.display());
        let _ = writeln!(s, "seed = {}", h.seed);
        let _ = writeln!(s, "status = {}", h.status.as_str());
        let _ = writeln!(s, "objective = {}", h.objective);
        let _ = writeln!(s, "max_violation = {}", h.max_violation);
        let o = &h.overrides;
        if let Some(v) = o.delta_w {
            let _ = writeln!(s, "override.delta_w = {v}");
        }
        if let Some(v) = o.delta_o {
            let _ = writeln!(s, "override.delta_o = {v}");
        }
        if let Some(v) = o.horizon {
            let _ = writeln!(s, "override.T = {v}");
        }
        if let Some(v) = o.seed {
            let _ = writeln!(s, "override.seed = {v}");
        }
        if let Some(v) = o.multistarts {
            let _ = writeln!(s, "override.multistarts = {v}");
        }
        let _ = writeln!(s, "\n# t, v, w_theta, w_phi, x, y, z, theta, phi, pxx, pxy, pxz, pyy, pyz, pzz, fov");
        for r in &self.steps {
            let mut nums: Vec<f64> = r.control.to_array().to_vec();
            nums.extend_from_slice(&r.mean);
            nums.extend_from_slice(&r.covariance);
            let _ = writeln!(s, "step = {}, {}, {}", r.t, join(&nums), r.fov);
        }
        let _ = writeln!(s, "\n# n, visit_step, facet_index, covered");
        for w in &self.waypoints {
            let _ = writeln!(s, "waypoint = {}, {}, {}, {}", w.n, w.visit_step, w.facet_index, w.covered);
        }
        s
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut hash = None;
        let mut mission = None;
        let mut seed = None;
        let mut status = None;
        let mut objective = None;
        let mut max_violation = None;
        let mut overrides = Overrides::default();
        let mut steps = Vec::new();
        let mut waypoints = Vec::new();
        let int = |line: usize, s: &str| -> Result<u64> {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::parse(path, line, format!("bad integer {s:?}")))
        };
        for (line, k, v) in key_values(path, text)? {
            match k.as_str() {
                "spec_hash" => hash = Some(v),
                "mission" => mission = Some(PathBuf::from(v)),
                "seed" => seed = Some(int(line, &v)?),
                "status" => {
                    status = Some(
                        SolveStatus::parse(&v).ok_or_else(|| Error::parse(path, line, format!("bad status {v:?}")))?,
                    )
                }
                "objective" => objective = Some(parse_f64(path, line, &v)?),
                "max_violation" => max_violation = Some(parse_f64(path, line, &v)?),
                "override.delta_w" => overrides.delta_w = Some(parse_f64(path, line, &v)?),
                "override.delta_o" => overrides.delta_o = Some(parse_f64(path, line, &v)?),
                "override.T" => overrides.horizon = Some(int(line, &v)? as usize),
                "override.seed" => overrides.seed = Some(int(line, &v)?),
                "override.multistarts" => overrides.multistarts = Some(int(line, &v)? as usize),
                "step" => {
                    let f = v.split(',').map(str::trim).collect::<Vec<_>>();
                    if f.len() != 16 {
                        return Err(Error::parse(path, line, format!("step record needs 16 fields, got {}", f.len())));
                    }
                    let t = int(line, f[0])? as usize;
                    if t != steps.len() {
                        return Err(Error::parse(path, line, format!("step {t} out of order")));
                    }
                    let x = parse_list(path, line, &f[1..15].join(","))?;
                    steps.push(StepRecord {
                        t,
                        control: ControlInput::new(x[0], x[1], x[2]),
                        mean: std::array::from_fn(|i| x[3 + i]),
                        covariance: std::array::from_fn(|i| x[8 + i]),
                        fov: int(line, f[15])? as usize,
                    });
                }
                "waypoint" => {
                    let f = v.split(',').map(str::trim).collect::<Vec<_>>();
                    if f.len() != 4 {
                        return Err(Error::parse(path, line, format!("waypoint record needs 4 fields, got {}", f.len())));
                    }
                    let covered = f[3]
                        .parse::<bool>()
                        .map_err(|_| Error::parse(path, line, format!("bad flag {:?}", f[3])))?;
                    waypoints.push(WaypointRecord {
                        n: int(line, f[0])? as usize,
                        visit_step: int(line, f[1])? as usize,
                        facet_index: int(line, f[2])? as usize,
                        covered,
                    });
                }
                _ => return Err(Error::parse(path, line, format!("unknown key {k:?}"))),
            }
        }
        let need = |what: &str| Error::parse(path, 0, format!("missing {what}"));
        let header = PlanHeader {
            spec_hash: hash.ok_or_else(|| need("spec_hash"))?,
            mission: mission.ok_or_else(|| need("mission"))?,
            seed: seed.ok_or_else(|| need("seed"))?,
            status: status.ok_or_else(|| need("status"))?,
            objective: objective.ok_or_else(|| need("objective"))?,
            max_violation: max_violation.ok_or_else(|| need("max_violation"))?,
            overrides,
        };
        if let Some(w) = waypoints.iter().find(|w| w.visit_step >= steps.len()) {
            return Err(Error::parse(path, 0, format!("waypoint {} visit step past the horizon", w.n)));
        }
        Ok(Self {
            header,
            steps,
            waypoints,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }
}

/// Mission config with the overrides applied, and the solver settings
/// that go with it.
pub fn configured(cfg: &MissionConfig, overrides: &Overrides) -> (MissionConfig, SolverConfig) {
    let mut c = cfg.clone();
    overrides.apply(&mut c);
    let solver = c.solver.config();
    (c, solver)
}
