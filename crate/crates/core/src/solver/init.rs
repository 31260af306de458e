//! Heuristic starting points: a nearest-neighbour waypoint tour flown by a
//! pursuit controller on the noise-free mean.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{raw_step, ControlInput};
use crate::geometry::{CUBE_FACES, FOV_FACES};
use crate::program::{belief_trajectory, DecisionVector, MissionSpec};

use super::plan::{cube_excess, fov_excess};
use crate::uncertainty::chance_margin;
use crate::Vec3;

/// Tour order and the belief step at which each waypoint is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct TourPlan {
    pub order: Vec<usize>,
    /// Indexed by waypoint; values in `1..=T`.
    pub arrival: Vec<usize>,
    pub controls: Vec<ControlInput>,
}

/// Direction of travel per unit speed at pitch `theta`, yaw `phi`.
fn heading(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(phi.cos() * theta.sin(), phi.sin() * theta.cos(), theta.sin())
}

fn nearest_neighbour_order(start: Vec3, centres: &[Vec3]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..centres.len()).collect();
    let mut order = Vec::with_capacity(centres.len());
    let mut at = start;
    while !left.is_empty() {
        let (k, _) = left
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, (centres[i] - at).norm()))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let i = left.remove(k);
        at = centres[i];
        order.push(i);
    }
    order
}

/// Attitude that reaches `dir` soonest: turning time at the rate limit plus
/// travel time along the heading, among attitudes whose heading is within 5%
/// of the best achievable alignment. Also returns that best alignment.
fn best_attitude(dir: &Vec3, theta: f64, phi: f64, omega_max: f64, v_max: f64) -> (f64, f64, f64) {
    let dist = dir.norm();
    let d = dir / dist;
    let lim = 89.0f64.to_radians();
    let mut cands = Vec::with_capacity(179 * 180);
    for i in -89..=89 {
        let th = (i as f64).to_radians().clamp(-lim, lim);
        for j in -89..=90 {
            let ph = phi + (2 * j) as f64 * PI / 180.0;
            let h = heading(th, ph);
            let n = h.norm();
            if n > 1e-9 {
                cands.push((th, ph, h.dot(&d) / n, n));
            }
        }
    }
    let best_cos = cands.iter().fold(f64::NEG_INFINITY, |a, c| a.max(c.2));
    let mut best = (theta, phi, f64::INFINITY);
    for &(th, ph, cos, n) in &cands {
        if cos < 0.95 * best_cos || cos <= 0.0 {
            continue;
        }
        let time = (th - theta).abs().max((ph - phi).abs()) / omega_max + dist / (v_max * n * cos);
        if time < best.2 {
            best = (th, ph, time);
        }
    }
    (best.0, best.1, best_cos)
}

/// One pursuit target: a waypoint centre, a detour point or the goal.
#[derive(Debug, Clone, Copy)]
struct Leg {
    target: Vec3,
    waypoint: Option<usize>,
    reach: f64,
    /// Detour points also count as reached once passed along this direction.
    along: Option<Vec3>,
}

fn legs(spec: &MissionSpec, order: &[usize]) -> Vec<Leg> {
    let mut out: Vec<Leg> = order
        .iter()
        .map(|&i| Leg {
            target: spec.waypoints[i].centroid,
            waypoint: Some(i),
            reach: 0.1 * spec.waypoints[i].edge_length,
            along: None,
        })
        .collect();
    out.push(Leg {
        target: spec.goal,
        waypoint: None,
        reach: 0.0,
        along: None,
    });
    out
}

/// Whether the segment `a -> b` passes within `clearance` of an obstacle.
fn blocked_at(spec: &MissionSpec, a: &Vec3, b: &Vec3, clearance: f64) -> Vec<f64> {
    let steps = ((b - a).norm() / 0.25).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| i as f64 / steps as f64)
        .filter(|&s| {
            let p = a + (b - a) * s;
            spec.obstacles.iter().any(|o| {
                o.half_spaces
                    .iter()
                    .all(|h| h.excess(&p) / h.normal.norm() <= clearance)
            })
        })
        .collect()
}

/// Inserts one side point into every leg that cuts through an obstacle
/// inflated by `clearance`, trying up, down, then the other directions
/// around the leg at growing offsets.
fn detour(spec: &MissionSpec, legs: &[Leg], clearance: f64) -> Vec<Leg> {
    let mut out = Vec::with_capacity(legs.len());
    let mut from = spec.initial_belief.position_mean();
    for leg in legs {
        let hits = blocked_at(spec, &from, &leg.target, clearance);
        if let (Some(first), Some(last)) = (hits.first(), hits.last()) {
            let dir = (leg.target - from).normalize();
            let mid = from + (leg.target - from) * (0.5 * (first + last));
            let up = Vec3::z() - dir * dir.z;
            let e1 = if up.norm() > 1e-6 { up.normalize() } else { Vec3::x() };
            let e2 = dir.cross(&e1);
            let sides: Vec<Vec3> = [0, 4, 2, 6, 1, 7, 3, 5]
                .iter()
                .map(|&k| {
                    let a = k as f64 * PI / 4.0;
                    e1 * a.cos() + e2 * a.sin()
                })
                .collect();
            let inside = |p: &Vec3| (0..3).all(|i| p[i] >= spec.env_min[i] && p[i] <= spec.env_max[i]);
            'search: for k in 1..=80 {
                let d = 0.5 * k as f64;
                for side in &sides {
                    let via = mid + side * d;
                    if inside(&via)
                        && blocked_at(spec, &from, &via, clearance).is_empty()
                        && blocked_at(spec, &via, &leg.target, clearance).is_empty()
                    {
                        out.push(Leg {
                            target: via,
                            waypoint: None,
                            reach: 0.25 * d,
                            along: Some(dir),
                        });
                        break 'search;
                    }
                }
            }
        }
        out.push(*leg);
        from = leg.target;
    }
    out
}

/// Largest obstacle chance margin over the steps of a flown control
/// sequence whose mean is within that margin of an obstacle.
fn obstacle_clearance(spec: &MissionSpec, controls: &[ControlInput]) -> crate::Result<f64> {
    let beliefs = belief_trajectory(spec, controls)?;
    let mut worst: f64 = 0.0;
    for b in &beliefs {
        let (p, cov) = (b.position_mean(), b.position_covariance());
        for o in &spec.obstacles {
            let mut near = true;
            let mut margin: f64 = 0.0;
            for h in &o.half_spaces {
                let n = h.normal.norm();
                let z = chance_margin(&(h.normal / n), &cov, spec.delta_o)?;
                near &= h.excess(&p) / n <= z;
                margin = margin.max(z);
            }
            if near {
                worst = worst.max(margin);
            }
        }
    }
    Ok(worst)
}

/// Flies the tour, then again around any obstacle the straight legs cut
/// through once inflated by the chance margin.
fn fly(spec: &MissionSpec, order: &[usize], speed: f64) -> crate::Result<TourPlan> {
    let straight = legs(spec, order);
    let plain = pursue(spec, order, &straight, speed);
    if spec.obstacles.is_empty() {
        return Ok(plain);
    }
    let clearance = obstacle_clearance(spec, &plain.controls)?;
    let routed = detour(spec, &straight, clearance);
    if routed.len() == straight.len() {
        return Ok(plain);
    }
    Ok(pursue(spec, order, &routed, speed))
}

/// Flies the mean through `route` with rate- and speed-limited pursuit.
fn pursue(spec: &MissionSpec, order: &[usize], route: &[Leg], speed: f64) -> TourPlan {
    let t_len = spec.horizon;
    let dt = spec.dt;
    let cb = &spec.control_bounds;

    let m = spec.initial_belief.mean;
    let mut s = [m[0], m[1], m[2], m[3], m[4]];
    let mut k = 0;
    let mut arrival = vec![usize::MAX; spec.waypoints.len()];
    let mut closest = vec![(f64::INFINITY, t_len); spec.waypoints.len()];
    let mut controls = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let p = Vec3::new(s[0], s[1], s[2]);
        let to = route[k].target - p;
        let dist = to.norm();
        let u = if dist < 1e-9 {
            ControlInput::new(0.0, 0.0, 0.0)
        } else {
            let (th, ph, best_cos) = best_attitude(&to, s[3], s[4], cb.omega_max, cb.v_max);
            let w_t = ((th - s[3]) / dt).clamp(-cb.omega_max, cb.omega_max);
            let w_p = ((ph - s[4]) / dt).clamp(-cb.omega_max, cb.omega_max);
            let h = heading(s[3], s[4]);
            let hn = h.norm();
            let v = if hn < 1e-6 {
                0.0
            } else {
                // hold position until the heading is nearly as good as it gets
                let cos = h.dot(&to) / (hn * dist);
                let gate = ((cos - 0.8 * best_cos) / (0.2 * best_cos)).clamp(0.0, 1.0);
                (speed * cb.v_max).min(dist / (dt * hn)) * gate
            };
            ControlInput::new(v, w_t, w_p)
        };
        s = raw_step(&s, &u.to_array(), &[0.0; 3], dt);
        controls.push(u);
        let p = Vec3::new(s[0], s[1], s[2]);
        for (n, wp) in spec.waypoints.iter().enumerate() {
            let d = (wp.centroid - p).norm();
            if d < closest[n].0 {
                closest[n] = (d, t + 1);
            }
        }
        let leg = &route[k];
        let passed = leg.along.is_some_and(|a| (p - leg.target).dot(&a) >= 0.0);
        if k + 1 < route.len() && ((leg.target - p).norm() <= leg.reach || passed) {
            if let Some(n) = leg.waypoint {
                arrival[n] = t + 1;
            }
            k += 1;
        }
    }
    for (n, a) in arrival.iter_mut().enumerate() {
        if *a == usize::MAX {
            *a = closest[n].1;
        }
    }
    TourPlan {
        order: order.to_vec(),
        arrival,
        controls,
    }
}

/// Greedy tour from the initial mean over the waypoint centres.
pub fn tour(spec: &MissionSpec) -> crate::Result<TourPlan> {
    let centres: Vec<Vec3> = spec.waypoints.iter().map(|w| w.centroid).collect();
    let order = nearest_neighbour_order(spec.initial_belief.position_mean(), &centres);
    fly(spec, &order, 1.0)
}

/// Decision vector seeded from the greedy tour.
pub fn initial_guess(spec: &MissionSpec) -> crate::Result<DecisionVector> {
    seed_from_tour(spec, &tour(spec)?)
}

/// Start number `index` of a multistart: 0 is the greedy tour, later ones
/// swap tour legs and vary the cruise speed.
pub fn initial_guess_perturbed(spec: &MissionSpec, seed: u64) -> crate::Result<DecisionVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec3> = spec.waypoints.iter().map(|w| w.centroid).collect();
    let mut order = nearest_neighbour_order(spec.initial_belief.position_mean(), &centres);
    for i in 1..order.len() {
        if rng.random_bool(0.3) {
            order.swap(i - 1, i);
        }
    }
    let speed = rng.random_range(0.6..1.0);
    seed_from_tour(spec, &fly(spec, &order, speed)?)
}

/// Fills every block from a flown tour. A waypoint the tour reaches inside
/// its shrunk cube gets a hard assignment (one visit step, one FOV, all
/// indicators set); one it misses gets soft weights around the arrival step.
pub fn seed_from_tour(spec: &MissionSpec, tour: &TourPlan) -> crate::Result<DecisionVector> {
    let layout = spec.layout();
    let mut dec = DecisionVector::zeros(layout.clone());
    let cb = &spec.control_bounds;
    for (t, u) in tour.controls.iter().enumerate() {
        dec.set_control(t, &cb.clamp(*u));
    }
    let beliefs = belief_trajectory(spec, &dec.controls())?;
    let t_len = spec.horizon;
    let n_w = spec.waypoints.len();
    let m_f = spec.fov_states.len();
    let six = CUBE_FACES as f64;
    let five = FOV_FACES as f64;

    // decision step of a hard visit per waypoint
    let mut hard = vec![None; n_w];
    for n in 0..n_w {
        let t = tour.arrival[n].clamp(1, t_len) - 1;
        if cube_excess(spec, n, &beliefs[t + 1])? <= 0.0 {
            hard[n] = Some(t);
        }
    }
    let mut fov = vec![None; t_len];
    for t in 0..t_len {
        let here: Vec<usize> = (0..n_w).filter(|&n| hard[n] == Some(t)).collect();
        if !here.is_empty() {
            let best = (0..m_f)
                .map(|m| (m, fov_excess(spec, m, &here, &beliefs[t + 1])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(m, _)| m);
            fov[t] = best;
        }
    }

    for t in 0..t_len {
        let b = &beliefs[t + 1];
        let (p, cov) = (b.position_mean(), b.position_covariance());
        for n in 0..n_w {
            if hard[n].is_some() {
                let mut inside = 0.0;
                for (l, h) in spec.waypoints[n].cube.half_spaces.iter().enumerate() {
                    let ok = h.excess(&p) + chance_margin(&h.normal, &cov, spec.delta_w)? <= 0.0;
                    let w = if ok { 1.0 } else { 0.0 };
                    dec.set(layout.w1(t, n, l), w);
                    inside += w;
                }
                dec.set(layout.w2(t, n), inside - six);
                dec.set(layout.w3(t, n), if hard[n] == Some(t) { 1.0 } else { 0.0 });
            } else {
                for l in 0..CUBE_FACES {
                    dec.set(layout.w1(t, n, l), 0.5);
                }
                dec.set(layout.w2(t, n), 0.5 * six - six);
            }
            let points = spec.coverage_points(spec.waypoints[n].facet_index);
            for m in 0..m_f {
                let poly = spec.fov_states[m].polytope_at(&p);
                for (v, q) in points.iter().enumerate() {
                    let mut inside = 0.0;
                    for (f, h) in poly.half_spaces.iter().enumerate() {
                        let g = if hard[n].is_some() && h.excess(q) <= 0.0 { 1.0 } else if hard[n].is_some() { 0.0 } else { 0.5 };
                        dec.set(layout.g1(t, n, m, v, f), g);
                        inside += g;
                    }
                    dec.set(layout.g2(t, n, m, v), inside - five);
                }
            }
        }
        for m in 0..m_f {
            let v = match fov[t] {
                Some(k) => f64::from(u8::from(k == m)),
                None => 1.0 / m_f as f64,
            };
            dec.set(layout.s(t, m), v);
        }
    }
    // soft assignment of visits around the arrival step (decision step t
    // sets belief t + 1)
    for n in (0..n_w).filter(|&n| hard[n].is_none()) {
        let a = tour.arrival[n] as f64;
        let w: Vec<f64> = (0..t_len)
            .map(|t| (-0.5 * ((t + 1) as f64 - a).powi(2)).exp())
            .collect();
        let total: f64 = w.iter().sum();
        for (t, wt) in w.into_iter().enumerate() {
            dec.set(layout.w3(t, n), wt / total);
        }
    }
    for t in 0..t_len {
        let b = &beliefs[t + 1];
        let (p, cov) = (b.position_mean(), b.position_covariance());
        for (xi, obs) in spec.obstacles.iter().enumerate() {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, h) in obs.half_spaces.iter().enumerate() {
                let slack = h.excess(&p) - chance_margin(&h.normal, &cov, spec.delta_o)?;
                if slack > best.1 {
                    best = (j, slack);
                }
            }
            dec.set(layout.o(t, xi, best.0), 1.0);
        }
    }
    Ok(dec)
}
