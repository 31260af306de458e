//! Commands behind the `ucover` binary. Each returns an outcome the binary
//! turns into an exit code: 0 success, 1 infeasible plan or failed check,
//! 2 bad input (I/O, parse errors, mismatched files).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ucover_core::dynamics::DisturbanceModel;
use ucover_core::fixtures::fixture;
use ucover_core::io::{
    configured, export_ellipsoids, export_fov, export_mesh, export_trajectory, spec_hash, Overrides, PlanHeader,
};
use ucover_core::program::transcribe;
use ucover_core::solver::{extract_plan, plan};
use ucover_core::validation::validate;
use ucover_core::{Error, MissionConfig, MissionSpec, PlanFile, PlanResult, SolveReport, ValidationReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

/// Exit code for an error: input problems are 2, anything else 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::HashMismatch { .. }
            | Error::InvalidMission(_)
            | Error::Missing(_),
        ) => EXIT_INPUT,
        Some(_) => EXIT_FAILED,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_INPUT,
        None => EXIT_FAILED,
    }
}

/// Mission loaded with overrides applied, plus what plan files need.
pub struct Mission {
    pub path: PathBuf,
    pub config: MissionConfig,
    pub spec: MissionSpec,
    pub facets: Vec<ucover_core::geometry::Facet>,
    pub subset: Vec<usize>,
    pub hash: String,
}

pub fn load_mission(path: &Path, overrides: &Overrides) -> Result<Mission> {
    let raw = MissionConfig::load(path)?;
    let (config, _) = configured(&raw, overrides);
    let base = path.parent().unwrap_or(Path::new(""));
    let (facets, subset) = config.load_mesh(base)?;
    let spec = config.to_spec_with(&facets, &subset)?;
    let hash = spec_hash(&spec);
    Ok(Mission {
        path: path.to_path_buf(),
        config,
        spec,
        facets,
        subset,
        hash,
    })
}

pub fn cmd_fixture(name: &str, out: &Path) -> Result<()> {
    fixture(name)?.write(out)?;
    Ok(())
}

pub struct PlanOutcome {
    pub report: SolveReport,
    /// Present when the solve succeeded and the plan file was written.
    pub plan: Option<PlanResult>,
}

impl PlanOutcome {
    pub fn ok(&self) -> bool {
        self.plan.is_some()
    }

    pub fn summary(&self) -> String {
        let r = &self.report;
        let mut s = String::new();
        let _ = writeln!(s, "status: {}", r.status.as_str());
        let _ = writeln!(s, "objective: {}", r.objective);
        let _ = writeln!(s, "max violation: {:.3e}", r.max_violation);
        if let Some(b) = &r.worst_block {
            let _ = writeln!(s, "worst residual: {b}");
        }
        let _ = writeln!(s, "iterations: {} outer, {} inner", r.iterations, r.inner_iterations);
        let _ = writeln!(s, "wall time: {:.1} s", r.wall_time);
        if let Some(p) = &self.plan {
            let _ = writeln!(s, "visit steps: {:?}", p.visit_steps);
            let _ = writeln!(s, "covered: {}/{}", p.covered.iter().filter(|c| **c).count(), p.covered.len());
        }
        s
    }
}

/// Transcribes, solves and extracts a plan. The plan file is written only
/// for a successful solve.
pub fn cmd_plan(mission: &Path, out: &Path, overrides: &Overrides) -> Result<PlanOutcome> {
    let m = load_mission(mission, overrides)?;
    let cfg = m.config.solver.config();
    let prog = transcribe(m.spec.clone())?;
    let (dec, report) = plan(&prog, &cfg)?;
    if !report.status.is_success() || report.max_violation > cfg.constraint_tol {
        return Ok(PlanOutcome {
            report,
            plan: None,
        });
    }
    let result = extract_plan(&prog, &dec, cfg.constraint_tol)?;
    let mission_path = std::fs::canonicalize(mission).with_context(|| format!("resolving {}", mission.display()))?;
    let header = PlanHeader {
        spec_hash: m.hash.clone(),
        mission: mission_path,
        seed: cfg.rng_seed,
        status: report.status,
        objective: report.objective,
        max_violation: report.max_violation,
        overrides: overrides.clone(),
    };
    PlanFile::from_plan(header, &result, &m.subset).save(out)?;
    Ok(PlanOutcome {
        report,
        plan: Some(result),
    })
}

/// Mission and plan reloaded from a plan file, hash-checked.
pub fn load_plan(mission: &Path, plan_path: &Path) -> Result<(Mission, PlanFile, PlanResult)> {
    let file = PlanFile::load(plan_path)?;
    let m = load_mission(mission, &file.header.overrides)?;
    let result = file.to_plan_result(&m.spec)?;
    Ok((m, file, result))
}

pub struct ValidateOptions {
    pub samples: usize,
    pub seed: u64,
    /// Sample with the initial and process noise switched off.
    pub zero_noise: bool,
}

pub struct ValidateOutcome {
    pub report: ValidationReport,
    pub summary: String,
}

impl ValidateOutcome {
    pub fn ok(&self) -> bool {
        self.report.passed()
    }
}

pub fn cmd_validate(mission: &Path, plan_path: &Path, opts: &ValidateOptions, out: &Path) -> Result<ValidateOutcome> {
    if opts.samples == 0 {
        bail!(Error::InvalidMission("sample count must be at least 1".into()));
    }
    let (m, _, result) = load_plan(mission, plan_path)?;
    let mut spec = m.spec.clone();
    if opts.zero_noise {
        spec.disturbance = DisturbanceModel {
            mean: spec.disturbance.mean,
            covariance: Default::default(),
        };
        spec.initial_belief.covariance = Default::default();
    }
    let report = validate(&spec, &result, opts.samples, opts.seed)?;
    let mut text = report.to_text(&m.hash);
    if opts.zero_noise {
        text.push_str("\n# sampled with noise switched off\nzero_noise = true\n");
    }
    ucover_core::io::write_text(out, &text)?;

    let mut s = String::new();
    let (w, o) = report.worst();
    let _ = writeln!(s, "samples: {} (seed {})", report.sample_count, report.seed);
    let _ = writeln!(s, "worst face rate: {w} (delta_w {})", report.delta_w);
    let _ = writeln!(s, "worst collision rate: {o} (delta_o {})", report.delta_o);
    let _ = writeln!(s, "full coverage: {}", report.full_coverage);
    let _ = writeln!(s, "{}", if report.passed() { "passed" } else { "FAILED" });
    if opts.samples < 100 {
        let _ = writeln!(
            s,
            "note: with {} samples the 99% half-widths are wide enough that the check says little",
            opts.samples
        );
    }
    Ok(ValidateOutcome { report, summary: s })
}

pub const EXPORT_KINDS: [&str; 4] = ["trajectory", "ellipsoids", "fov", "mesh"];

/// Writes `<dir>/<kind>.csv` for one kind, or all of them for `all`. The
/// mission is the one named in the plan header.
pub fn cmd_export(plan_path: &Path, what: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let kinds: Vec<&str> = match what {
        "all" => EXPORT_KINDS.to_vec(),
        k if EXPORT_KINDS.contains(&k) => vec![k],
        k => bail!(Error::InvalidMission(format!(
            "unknown export kind {k:?} (expected all, {})",
            EXPORT_KINDS.join(", ")
        ))),
    };
    let header = PlanFile::load(plan_path)?.header;
    let (m, _, result) = load_plan(&header.mission, plan_path)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for k in kinds {
        let text = match k {
            "trajectory" => export_trajectory(&result, &m.hash),
            "ellipsoids" => export_ellipsoids(&result, &m.hash),
            "fov" => export_fov(&m.spec, &result, &m.hash),
            _ => export_mesh(&m.facets, &m.subset, &result, &m.hash),
        };
        let path = dir.join(format!("{k}.csv"));
        ucover_core::io::write_text(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
