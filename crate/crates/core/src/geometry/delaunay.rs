//! Bowyer-Watson Delaunay triangulation of a height field (2D on the xy
//! projection, lifted back to z).

use crate::error::{Error, Result};
use crate::geometry::{Facet, COLLINEAR_TOL};
use crate::Vec3;

/// Points closer than this (m) are merged.
pub const DUPLICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [usize; 3],
    center: (f64, f64),
    radius2: f64,
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> ((f64, f64), f64) {
    let d = 2.0 * orient(a, b, c);
    let (bx, by) = (b.0 - a.0, b.1 - a.1);
    let (cx, cy) = (c.0 - a.0, c.1 - a.1);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    ((a.0 + ux, a.1 + uy), ux * ux + uy * uy)
}

/// True iff `p` lies strictly inside the circumcircle of `abc`, beyond a
/// relative tolerance of `tol`.
pub fn circumcircle_contains(
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    p: (f64, f64),
    tol: f64,
) -> bool {
    let (center, r2) = circumcircle(a, b, c);
    let d2 = (p.0 - center.0).powi(2) + (p.1 - center.1).powi(2);
    d2 < r2 * (1.0 - tol)
}

impl Tri {
    fn new(v: [usize; 3], pts: &[(f64, f64)]) -> Self {
        let (center, radius2) = circumcircle(pts[v[0]], pts[v[1]], pts[v[2]]);
        Self { v, center, radius2 }
    }

    fn strictly_contains(&self, p: (f64, f64)) -> bool {
        let d2 = (p.0 - self.center.0).powi(2) + (p.1 - self.center.1).powi(2);
        d2 < self.radius2 * (1.0 - 1e-12)
    }
}

/// Delaunay triangulation of 2D points; triangles are counter-clockwise
/// index triples into `points`.
pub fn triangulate_xy(points: &[(f64, f64)]) -> Result<Vec<[usize; 3]>> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in points {
        if !(p.0.is_finite() && p.1.is_finite()) {
            return Err(Error::NonFinite("point cloud"));
        }
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    }
    let span = (hi.0 - lo.0).max(hi.1 - lo.1);
    let p0 = points[0];
    let far = points
        .iter()
        .copied()
        .max_by(|a, b| {
            let da = (a.0 - p0.0).hypot(a.1 - p0.1);
            let db = (b.0 - p0.0).hypot(b.1 - p0.1);
            da.total_cmp(&db)
        })
        .unwrap();
    let base = (far.0 - p0.0).hypot(far.1 - p0.1);
    let all_collinear = base == 0.0
        || points
            .iter()
            .all(|&p| (orient(p0, far, p) / base).abs() < COLLINEAR_TOL.max(span * 1e-12));
    if all_collinear {
        return Err(Error::Degenerate("collinear xy projections".into()));
    }

    let n = points.len();
    let mid = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
    let big = 1e3 * span.max(1.0);
    let mut pts = points.to_vec();
    pts.push((mid.0 - big, mid.1 - big));
    pts.push((mid.0 + big, mid.1 - big));
    pts.push((mid.0, mid.1 + big));

    let mut tris = vec![Tri::new([n, n + 1, n + 2], &pts)];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        let p = pts[i];
        edges.clear();
        let mut keep = Vec::with_capacity(tris.len() + 4);
        for t in tris.drain(..) {
            if t.strictly_contains(p) {
                for k in 0..3 {
                    edges.push((t.v[k], t.v[(k + 1) % 3]));
                }
            } else {
                keep.push(t);
            }
        }
        tris = keep;
        // cavity boundary: edges not shared by two bad triangles
        for &(a, b) in &edges {
            if !edges.iter().any(|&(c, d)| c == b && d == a) {
                tris.push(Tri::new([a, b, i], &pts));
            }
        }
    }
    Ok(tris
        .into_iter()
        .filter(|t| t.v.iter().all(|&v| v < n))
        .map(|t| t.v)
        .collect())
}

/// Triangulates the xy projection of a point cloud and lifts the triangles
/// back to 3D. Facet normals point upward. Near-duplicate points are merged.
pub fn delaunay_2p5d(points: &[Vec3]) -> Result<Vec<Facet>> {
    let mut unique: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if !unique.iter().any(|q| (q - p).norm() <= DUPLICATE_TOL) {
            unique.push(*p);
        }
    }
    let xy: Vec<(f64, f64)> = unique.iter().map(|p| (p.x, p.y)).collect();
    triangulate_xy(&xy)?
        .into_iter()
        .map(|[a, b, c]| Facet::new([unique[a], unique[b], unique[c]]).map(Facet::upward))
        .collect()
}
