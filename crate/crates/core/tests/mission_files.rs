use std::path::Path;

use ucover_core::fixtures::{fixture, FIXTURE_NAMES};
use ucover_core::geometry::FOV_FACES;
use ucover_core::io::{spec_hash, MissionConfig};

#[test]
fn fixtures_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in FIXTURE_NAMES {
        let f = fixture(name).unwrap();
        let path = dir.path().join(format!("{name}.mission"));
        f.write(&path).unwrap();
        let cfg = MissionConfig::load(&path).unwrap();
        let spec = cfg.to_spec(dir.path()).unwrap();
        let want = f.spec().unwrap();
        assert_eq!(spec, want, "{name}");
        assert_eq!(spec_hash(&spec), spec_hash(&want));
        // text is stable under a second round trip
        let again = MissionConfig::parse(&path, &cfg.to_text()).unwrap();
        assert_eq!(again.to_text(), cfg.to_text());
    }
}

#[test]
fn degrees_are_converted_once() {
    let mut cfg = fixture("single-waypoint").unwrap().config;
    // 1 degree has no exact binary radian form
    cfg.psi_y_deg = vec![-90.0, -89.0];
    cfg.psi_z_deg = vec![1.0];
    let text = cfg.to_text();
    assert!(text.contains("camera.psi_y_deg = -90, -89"));
    let back = MissionConfig::parse(Path::new("m"), &text).unwrap();
    let c = back.camera();
    assert_eq!(c.psi_y_set, vec![(-90.0f64).to_radians(), (-89.0f64).to_radians()]);
    assert_eq!(c.psi_z_set, vec![1.0f64.to_radians()]);
    assert_eq!(c.phi_h, back.phi_h_deg.to_radians());
}

#[test]
fn fov_faces_follow_the_camera_angles() {
    let spec = fixture("paper-full").unwrap().spec().unwrap();
    assert_eq!(spec.fov_states.len(), 40);
    for s in &spec.fov_states {
        assert_eq!(s.half_spaces_body.len(), FOV_FACES);
    }
}

#[test]
fn missing_mesh_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mission");
    fixture("paper-small").unwrap().write(&path).unwrap();
    std::fs::remove_file(dir.path().join("m.mesh.csv")).unwrap();
    let cfg = MissionConfig::load(&path).unwrap();
    assert!(matches!(cfg.to_spec(dir.path()), Err(ucover_core::Error::Io { .. })));
}

#[test]
fn unknown_and_duplicate_keys_are_rejected() {
    let text = fixture("corridor").unwrap().config.to_text();
    let p = Path::new("m");
    assert!(MissionConfig::parse(p, &format!("{text}mission.colour = red\n")).is_err());
    assert!(MissionConfig::parse(p, &format!("{text}mission.T = 3\n")).is_err());
    assert!(MissionConfig::parse(p, &text.replace("mission.T = 60\n", "")).is_err());
}

#[test]
fn half_width_override_of_delta_zeroes_the_margins() {
    let mut cfg = fixture("single-waypoint").unwrap().config;
    cfg.delta_w = 0.5;
    cfg.delta_o = 0.5;
    let f = fixture("single-waypoint").unwrap();
    let spec = cfg.to_spec_with(&f.facets().unwrap(), &f.subset).unwrap();
    let cov = spec.initial_belief.position_covariance();
    for h in &spec.waypoints[0].cube.half_spaces {
        assert_eq!(ucover_core::uncertainty::chance_margin(&h.normal, &cov, spec.delta_w).unwrap(), 0.0);
    }
}
