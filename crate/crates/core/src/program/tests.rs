use super::testkit::tiny;
use super::*;
use crate::geometry::{make_waypoint, point_in_polytope};
use approx::assert_relative_eq;
use nalgebra::{Matrix5, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn block<'a>(list: &'a [NamedResidual], b: Block) -> &'a NamedResidual {
    list.iter().find(|r| r.block == b).unwrap()
}

#[test]
fn counts_for_unit_instance() {
    let prog = transcribe(tiny(1, 1, 1, true, false)).unwrap();
    assert_eq!(prog.num_vars(), 3 + 6 + 1 + 1 + 5 + 1 + 1 + 6);
    assert_eq!(prog.num_vars(), 24);
    // w2 coupling, w3 sum, g2 coupling, s sum, s square-sum, o sum
    assert_eq!(prog.num_eq(), 6);
    let names: Vec<&str> = prog.eq_blocks.iter().map(|b| b.block.name()).collect();
    assert_eq!(
        names,
        ["guidance.count", "guidance.visit", "camera.count", "fov.sum", "fov.onehot", "obstacle.select"]
    );
    // 6 waypoint faces, 1 complementarity, 5 camera faces, 1 complementarity,
    // 6 obstacle faces, 6 environment, 2 pitch
    assert_eq!(prog.num_ineq(), 27);
    let relax = prog.relaxable_rows();
    assert_eq!(relax.iter().filter(|r| **r).count(), 2);

    let vertices = transcribe(tiny(1, 1, 1, true, true)).unwrap();
    assert_eq!(vertices.num_vars(), 24 + 2 * 5 + 2);
}

#[test]
fn degenerate_missions_are_rejected() {
    assert!(transcribe(tiny(1, 1, 0, false, false)).is_err());
    assert!(transcribe(tiny(0, 1, 1, false, false)).is_err());
    assert!(transcribe(tiny(3, 1, 2, false, false)).is_err());
    let mut s = tiny(1, 1, 1, false, false);
    s.delta_w = 1.0;
    assert!(matches!(transcribe(s), Err(Error::InvalidProbability(_))));
}

#[test]
fn layout_is_time_major_and_disjoint() {
    let lay = tiny(2, 3, 4, true, true).layout();
    let mut seen = vec![false; lay.len()];
    let mut mark = |i: usize| {
        assert!(!seen[i], "index {i} reused");
        seen[i] = true;
    };
    for t in 0..4 {
        for k in 0..3 {
            mark(lay.u(t, k));
        }
        for n in 0..2 {
            (0..6).for_each(|l| mark(lay.w1(t, n, l)));
            mark(lay.w2(t, n));
            mark(lay.w3(t, n));
            for m in 0..3 {
                for v in 0..3 {
                    (0..5).for_each(|f| mark(lay.g1(t, n, m, v, f)));
                    mark(lay.g2(t, n, m, v));
                }
            }
        }
        (0..3).for_each(|m| mark(lay.s(t, m)));
        (0..6).for_each(|j| mark(lay.o(t, 0, j)));
    }
    assert!(seen.iter().all(|s| *s));
    assert!(lay.w1(1, 0, 0) > lay.w1(0, 1, 5));
    assert_eq!(lay.block_of(lay.s(2, 1)), VarBlock::S);
}

#[test]
fn belief_trajectory_examples() {
    let mut spec = tiny(1, 1, 3, false, false);
    assert!(belief_trajectory(&spec, &[]).is_err());
    spec.initial_belief.mean = Vector5::new(10.0, 10.0, 10.0, 0.0, 0.0);
    let b = belief_trajectory(&spec, &[ControlInput::default(); 3]).unwrap();
    assert_eq!(b.len(), 4);
    assert_eq!(b[0], spec.initial_belief);
    for x in &b {
        assert_relative_eq!(x.position_mean(), Vec3::new(10.0, 10.0, 10.0), epsilon = 1e-6);
    }
    spec.horizon = 0;
    assert_eq!(belief_trajectory(&spec, &[]).unwrap(), vec![spec.initial_belief]);
}

/// Mission whose initial mean sits on waypoint 0, so `T = 1` with zero
/// controls keeps it there.
fn parked(delta_w: f64) -> (MissionSpec, Vec<GaussianBelief>) {
    let mut spec = tiny(1, 2, 1, true, false);
    spec.delta_w = delta_w;
    let c = spec.waypoints[0].centroid;
    spec.initial_belief = GaussianBelief::new(Vector5::new(c.x, c.y, c.z, 0.0, 0.0), Matrix5::identity() * 1e-8);
    spec.disturbance = DisturbanceModel::diagonal(1e-8, 1e-8, 1e-8);
    let b = belief_trajectory(&spec, &[ControlInput::default()]).unwrap();
    (spec, b)
}

#[test]
fn guidance_examples() {
    let (spec, beliefs) = parked(0.4);
    let lay = spec.layout();
    let mut dec = DecisionVector::zeros(lay.clone());
    (0..6).for_each(|l| dec.set(lay.w1(0, 0, l), 1.0));
    let r = guidance_residuals(&spec, &beliefs, &dec).unwrap();
    let face = block(&r, Block::GuidanceFace);
    for v in &face.values {
        assert!(*v < 0.0);
        assert!((v + 2.5).abs() < 1e-3, "{v}");
    }
    // w2 = 0 when all w1 = 1; complementarity holds for any w3
    assert_eq!(block(&r, Block::GuidanceCount).values, [0.0]);
    dec.set(lay.w3(0, 0), 0.7);
    let r = guidance_residuals(&spec, &beliefs, &dec).unwrap();
    assert!(block(&r, Block::GuidanceComplementarity).values[0] <= 0.0);

    let far = DecisionVector::zeros(lay);
    let r = guidance_residuals(&spec, &beliefs, &far).unwrap();
    assert!(block(&r, Block::GuidanceFace).values.iter().all(|v| *v == 0.0));
}

#[test]
fn camera_examples() {
    let (mut spec, beliefs) = parked(0.4);
    let lay = spec.layout();
    let mut dec = DecisionVector::zeros(lay.clone());
    (0..5).for_each(|f| dec.set(lay.g1(0, 0, 0, 0, f), 1.0));
    let r = camera_residuals(&spec, &beliefs, &dec).unwrap();
    let face = &block(&r, Block::CameraFace).values[..5];
    assert!(face.iter().all(|v| *v < 0.0), "{face:?}");

    // waypoint at the full observation range: the centroid sits on the base plane
    spec.waypoints[0] = make_waypoint(&spec.facets[0], 0, 1.0, 15.0, 5.0).unwrap();
    let c = spec.waypoints[0].centroid;
    let b = vec![GaussianBelief::new(Vector5::new(c.x, c.y, c.z, 0.0, 0.0), Matrix5::zeros()); 2];
    let r = camera_residuals(&spec, &b, &dec).unwrap();
    let face = &block(&r, Block::CameraFace).values[..5];
    assert!(face[4].abs() < 1e-9);
    assert!(face[..4].iter().all(|v| *v < 0.0));

    // one-hot selector satisfies both forms, uniform only the sum
    dec.set(lay.s(0, 1), 1.0);
    let r = camera_residuals(&spec, &b, &dec).unwrap();
    assert_eq!(block(&r, Block::FovSum).values, [0.0]);
    assert_eq!(block(&r, Block::FovOneHot).values, [0.0]);
    dec.set(lay.s(0, 0), 0.5);
    dec.set(lay.s(0, 1), 0.5);
    let r = camera_residuals(&spec, &b, &dec).unwrap();
    assert_eq!(block(&r, Block::FovSum).values, [0.0]);
    assert_relative_eq!(block(&r, Block::FovOneHot).values[0], -0.5);
}

#[test]
fn obstacle_examples() {
    let (mut spec, beliefs) = parked(0.4);
    let lay = spec.layout();
    let mut dec = DecisionVector::zeros(lay.clone());
    // obstacle box spans x in [60, 70]; the mean (x = 50.33) is on the -x side
    dec.set(lay.o(0, 0, 1), 1.0);
    let r = obstacle_residuals(&spec, &beliefs, &dec).unwrap();
    assert!(block(&r, Block::ObstacleFace).values.iter().all(|v| *v <= 0.0));
    assert_eq!(block(&r, Block::ObstacleSelect).values, [0.0]);

    let none = DecisionVector::zeros(lay.clone());
    let r = obstacle_residuals(&spec, &beliefs, &none).unwrap();
    assert_eq!(block(&r, Block::ObstacleSelect).values, [-1.0]);

    // zero margin at delta = 0.5: the residual is the plain signed distance
    spec.delta_o = 0.5;
    let r = obstacle_residuals(&spec, &beliefs, &dec).unwrap();
    let d = 60.0 - beliefs[1].mean[0];
    assert_relative_eq!(block(&r, Block::ObstacleFace).values[1], -d, epsilon = 1e-12);
}

#[test]
fn objective_examples() {
    let mut spec = tiny(1, 1, 2, false, false);
    spec.goal = Vec3::new(1.0, 2.0, 3.0);
    let at_goal = vec![GaussianBelief::new(Vector5::new(1.0, 2.0, 3.0, 0.0, 0.0), Matrix5::zeros()); 3];
    assert_eq!(objective(&spec, &at_goal, &[ControlInput::default(); 2]), 0.0);
    let mut off = at_goal.clone();
    off[2].mean = Vector5::new(4.0, 6.0, 3.0, 0.0, 0.0);
    let u = [ControlInput::new(1.0, 0.0, 0.0); 2];
    assert_eq!(objective(&spec, &off, &u), 27.0);
}

#[test]
fn one_hot_grid_equivalence() {
    let steps = 100;
    let h = 1.0 / steps as f64;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let s = [i as f64 * h, j as f64 * h, 1.0 - (i + j) as f64 * h];
            let sum: f64 = s.iter().sum();
            let sq: f64 = s.iter().map(|v| v * v).sum();
            if (sum - 1.0).abs() <= 1e-9 && (sq - 1.0).abs() <= 1e-9 {
                let near_basis = (0..3).any(|k| (0..3).all(|c| (s[c] - if c == k { 1.0 } else { 0.0 }).abs() <= 1e-2));
                assert!(near_basis, "{s:?}");
            }
        }
    }
}

/// Feasible point built by hand on the parked mission.
fn parked_feasible(spec: &MissionSpec) -> Vec<f64> {
    let lay = spec.layout();
    let mut x = vec![0.0; lay.len()];
    (0..6).for_each(|l| x[lay.w1(0, 0, l)] = 1.0);
    x[lay.w3(0, 0)] = 1.0;
    (0..5).for_each(|f| x[lay.g1(0, 0, 0, 0, f)] = 1.0);
    x[lay.g2(0, 0, 1, 0)] = -5.0;
    x[lay.s(0, 0)] = 1.0;
    x[lay.o(0, 0, 1)] = 1.0;
    x
}

#[test]
fn feasible_point_certifies_the_logical_specification() {
    let (spec, _) = parked(0.05);
    let prog = transcribe(spec.clone()).unwrap();
    let x = parked_feasible(&spec);
    let v = prog.evaluate(&x).unwrap();
    let (viol, worst) = prog.max_violation(&v);
    assert!(viol <= 1e-6, "{viol} at {worst:?}");

    let dec = prog.decision(x);
    let beliefs = prog.beliefs(&dec.values).unwrap();
    let k_w = margin_factor(spec.delta_w).unwrap();
    for n in 0..spec.waypoints.len() {
        let visited = (0..spec.horizon).any(|t| {
            let b = &beliefs[t + 1];
            spec.waypoints[n].cube.half_spaces.iter().all(|h| {
                let zeta = k_w * (2.0 * h.normal.dot(&(b.position_covariance() * h.normal))).sqrt();
                h.excess(&b.position_mean()) <= -zeta + 1e-6
            })
        });
        assert!(visited);
        let covered = (0..spec.horizon).any(|t| {
            let p = beliefs[t + 1].position_mean();
            spec.fov_states
                .iter()
                .any(|f| point_in_polytope(&spec.facets[n].centroid, &f.polytope_at(&p), 1e-6))
        });
        assert!(covered);
    }

    // complementarity structure: positive w3 forces w2 = 0 and all w1 = 1
    let lay = &prog.layout;
    assert!(dec.get(lay.w3(0, 0)) > 0.0);
    assert_eq!(dec.get(lay.w2(0, 0)), 0.0);
    assert!((0..6).all(|l| dec.get(lay.w1(0, 0, l)) == 1.0));
}

#[test]
fn block_table_matches_named_residuals() {
    let spec = tiny(2, 2, 3, true, false);
    let prog = transcribe(spec.clone()).unwrap();
    let x: Vec<f64> = prog.lower.iter().zip(&prog.upper).map(|(l, u)| 0.5 * (l + u)).collect();
    let flat = prog.evaluate(&x).unwrap();
    let dec = prog.decision(x.clone());
    let beliefs = prog.beliefs(&x).unwrap();
    let mut named = guidance_residuals(&spec, &beliefs, &dec).unwrap();
    named.extend(camera_residuals(&spec, &beliefs, &dec).unwrap());
    named.extend(obstacle_residuals(&spec, &beliefs, &dec).unwrap());
    for r in named {
        let (range, vals) = match r.kind() {
            RowKind::Eq => (prog.eq_block(r.block).unwrap(), &flat.eq),
            RowKind::Ineq => (prog.ineq_block(r.block).unwrap(), &flat.ineq),
        };
        assert_eq!(&vals[range.start..range.start + range.len], &r.values[..]);
    }
}

fn random_interior(prog: &TranscribedProgram, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = prog
        .lower
        .iter()
        .zip(&prog.upper)
        .map(|(l, u)| l + (u - l) * rng.random_range(0.05..0.95))
        .collect();
    // keep pitch moderate so every row is smooth around the point
    for t in 0..prog.spec.horizon {
        x[prog.layout.u(t, 1)] *= 0.3;
    }
    x
}

fn fd_jacobian(prog: &TranscribedProgram, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (p, m) = (prog.evaluate(&xp).unwrap(), prog.evaluate(&xm).unwrap());
        let col: Vec<f64> = std::iter::once((p.objective - m.objective) / (2.0 * h))
            .chain(p.eq.iter().zip(&m.eq).map(|(a, b)| (a - b) / (2.0 * h)))
            .chain(p.ineq.iter().zip(&m.ineq).map(|(a, b)| (a - b) / (2.0 * h)))
            .collect();
        cols.push(col);
    }
    cols
}

pub(crate) fn check_gradients(prog: &TranscribedProgram, x: &[f64]) -> f64 {
    let controls = prog.controls(x);
    let beliefs = belief_trajectory(&prog.spec, &controls).unwrap();
    let sens = sensitivities(&prog.spec, &beliefs, &controls).unwrap();
    let jac = fd_jacobian(prog, x, 1e-6);
    let (ne, ni) = (prog.num_eq(), prog.num_ineq());
    let mut worst: f64 = 0.0;
    for row in 0..1 + ne + ni {
        let mut we = vec![0.0; ne];
        let mut wi = vec![0.0; ni];
        let wo = if row == 0 { 1.0 } else { 0.0 };
        if row >= 1 && row <= ne {
            we[row - 1] = 1.0;
        } else if row > ne {
            wi[row - 1 - ne] = 1.0;
        }
        let g = prog.weighted_gradient_with(x, &beliefs, &sens, wo, &we, &wi).unwrap();
        for (j, col) in jac.iter().enumerate() {
            let err = (g[j] - col[row]).abs() / col[row].abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for cover_vertices in [false, true] {
        let prog = transcribe(tiny(2, 2, 4, true, cover_vertices)).unwrap();
        for _ in 0..3 {
            let x = random_interior(&prog, &mut rng);
            let worst = check_gradients(&prog, &x);
            assert!(worst < 1e-4, "relative error {worst}");
        }
    }
}

#[test]
fn weighted_gradient_is_linear_in_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let prog = transcribe(tiny(1, 2, 3, true, false)).unwrap();
    let x = random_interior(&prog, &mut rng);
    let we: Vec<f64> = (0..prog.num_eq()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let wi: Vec<f64> = (0..prog.num_ineq()).map(|_| rng.random_range(0.0..1.0)).collect();
    let g = prog.weighted_gradient(&x, 0.5, &we, &wi).unwrap();
    let g2 = prog
        .weighted_gradient(&x, 1.0, &we.iter().map(|w| 2.0 * w).collect::<Vec<_>>(), &wi.iter().map(|w| 2.0 * w).collect::<Vec<_>>())
        .unwrap();
    for (a, b) in g.iter().zip(&g2) {
        assert!((2.0 * a - b).abs() < 1e-9 * (1.0 + b.abs()));
    }
}
