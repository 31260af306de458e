//! CSV exports for plotting. Every file opens with a `# spec_hash=` comment
//! and a header row.

use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::geometry::Facet;
use crate::solver::PlanResult;
use crate::special::chi_square_quantile;
use crate::{Mat3, MissionSpec, Vec3};

/// Probability mass inside the exported error ellipsoids.
pub const ELLIPSOID_PROB: f64 = 0.999;

fn preamble(spec_hash: &str, columns: &str) -> String {
    format!("# spec_hash={spec_hash}\n{columns}\n")
}

/// Mean position at every step `0..=T`.
pub fn export_trajectory(plan: &PlanResult, spec_hash: &str) -> String {
    let mut s = preamble(spec_hash, "t,x,y,z");
    for (t, b) in plan.beliefs.iter().enumerate() {
        let p = b.position_mean();
        let _ = writeln!(s, "{t},{},{},{}", p.x, p.y, p.z);
    }
    s
}

/// Semi-axis lengths (largest first) of the `ELLIPSOID_PROB` ellipsoid of a
/// position covariance, and a right-handed rotation whose columns are the
/// matching axis directions.
pub fn ellipsoid_axes(cov: &Mat3) -> (Vec3, Mat3) {
    let scale = chi_square_quantile(ELLIPSOID_PROB, 3.0).sqrt();
    let eig = SymmetricEigen::new(*cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut r = Matrix3::zeros();
    let mut len = Vec3::zeros();
    for (k, &i) in order.iter().enumerate() {
        len[k] = scale * eig.eigenvalues[i].max(0.0).sqrt();
        r.set_column(k, &eig.eigenvectors.column(i));
    }
    if r.determinant() < 0.0 {
        let c = -r.column(2);
        r.set_column(2, &c);
    }
    (len, r)
}

/// Per step: centre, three semi-axes and the row-major rotation.
pub fn export_ellipsoids(plan: &PlanResult, spec_hash: &str) -> String {
    let mut s = preamble(spec_hash, "t,cx,cy,cz,a1,a2,a3,r11,r12,r13,r21,r22,r23,r31,r32,r33");
    for (t, b) in plan.beliefs.iter().enumerate() {
        let c = b.position_mean();
        let (len, r) = ellipsoid_axes(&b.position_covariance());
        let mut row = vec![c.x, c.y, c.z, len[0], len[1], len[2]];
        for i in 0..3 {
            for j in 0..3 {
                row.push(r[(i, j)]);
            }
        }
        let row: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{t},{}", row.join(","));
    }
    s
}

/// The scheduled FOV at each decision step, placed at the mean position the
/// step's control reaches: four base corners, then the apex.
pub fn export_fov(spec: &MissionSpec, plan: &PlanResult, spec_hash: &str) -> String {
    let mut s = preamble(spec_hash, "t,fov,vertex,x,y,z");
    for (t, &m) in plan.fov_schedule.iter().enumerate() {
        let v = spec.fov_states[m].vertices_at(&plan.beliefs[t + 1].position_mean());
        for (k, c) in v.column_iter().enumerate() {
            let _ = writeln!(s, "{t},{m},{k},{},{},{}", c[0], c[1], c[2]);
        }
    }
    s
}

/// The whole mesh as a triangle soup. `covered` is 1 for subset facets the
/// plan covers, 0 otherwise.
pub fn export_mesh(facets: &[Facet], subset: &[usize], plan: &PlanResult, spec_hash: &str) -> String {
    let mut flag = vec![0u8; facets.len()];
    for (n, &i) in subset.iter().enumerate() {
        if plan.covered.get(n).copied().unwrap_or(false) && i < facets.len() {
            flag[i] = 1;
        }
    }
    let mut s = preamble(spec_hash, "x1,y1,z1,x2,y2,z2,x3,y3,z3,covered");
    for (f, c) in facets.iter().zip(flag) {
        let v = &f.vertices;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{c}",
            v[0].x, v[0].y, v[0].z, v[1].x, v[1].y, v[1].z, v[2].x, v[2].y, v[2].z
        );
    }
    s
}
