//! 3D geometric primitives: rotations, camera field-of-view states, facets,
//! waypoint cubes and convex polytopes in half-space form.

mod delaunay;
pub mod mesh;

pub use delaunay::{circumcircle_contains, delaunay_2p5d, triangulate_xy};
pub use mesh::{gaussian_hill_points, load_facet_subset, load_mesh, MeshFormat};

use nalgebra::{Matrix3, Matrix3x5};

use crate::error::{Error, Result};
use crate::Vec3;

/// Collinearity tolerance on the cross-product norm of two facet edges.
pub const COLLINEAR_TOL: f64 = 1e-12;

/// Number of faces of the camera pyramid.
pub const FOV_FACES: usize = 5;

/// Number of faces of a waypoint cube.
pub const CUBE_FACES: usize = 6;

/// Rotation by `angle` about the y axis.
pub fn rotation_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation by `angle` about the z axis.
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// A closed half-space `normal . p <= offset` with a unit outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec3,
    pub offset: f64,
}

impl HalfSpace {
    /// Builds a half-space from any nonzero normal, rescaling it to unit length.
    pub fn new(normal: Vec3, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if !(norm > 0.0) || !norm.is_finite() || !offset.is_finite() {
            return Err(Error::Degenerate(format!(
                "half-space normal {normal:?} / offset {offset}"
            )));
        }
        Ok(Self {
            normal: normal / norm,
            offset: offset / norm,
        })
    }

    /// Signed distance of `p` past the boundary plane (positive = outside).
    pub fn excess(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn translated(&self, shift: &Vec3) -> Self {
        Self {
            normal: self.normal,
            offset: self.offset + self.normal.dot(shift),
        }
    }
}

/// Intersection of finitely many half-spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolytope {
    pub half_spaces: Vec<HalfSpace>,
}

impl ConvexPolytope {
    /// Builds a polytope and checks that it is bounded and has nonempty interior.
    pub fn new(half_spaces: Vec<HalfSpace>) -> Result<Self> {
        let poly = Self { half_spaces };
        poly.check_bounded_nonempty()?;
        Ok(poly)
    }

    /// Axis-aligned box. Faces are ordered +x, -x, +y, -y, +z, -z.
    pub fn axis_box(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|k| !(max[k] > min[k])) {
            return Err(Error::Degenerate(format!("empty box {min:?}..{max:?}")));
        }
        let mut faces = Vec::with_capacity(6);
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = 1.0;
            faces.push(HalfSpace {
                normal: e,
                offset: max[k],
            });
            faces.push(HalfSpace {
                normal: -e,
                offset: -min[k],
            });
        }
        Ok(Self { half_spaces: faces })
    }

    pub fn cube(center: Vec3, edge: f64) -> Result<Self> {
        let h = Vec3::repeat(edge / 2.0);
        Self::axis_box(center - h, center + h)
    }

    pub fn len(&self) -> usize {
        self.half_spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.half_spaces.is_empty()
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        point_in_polytope(p, self, tol)
    }

    pub fn translated(&self, shift: &Vec3) -> Self {
        Self {
            half_spaces: self.half_spaces.iter().map(|h| h.translated(shift)).collect(),
        }
    }

    /// Largest face excess of `p` (<= 0 means inside).
    pub fn max_excess(&self, p: &Vec3) -> f64 {
        self.half_spaces
            .iter()
            .map(|h| h.excess(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Vertices by brute-force intersection of every plane triple.
    pub fn vertices(&self) -> Vec<Vec3> {
        let hs = &self.half_spaces;
        let mut out: Vec<Vec3> = Vec::new();
        for i in 0..hs.len() {
            for j in i + 1..hs.len() {
                for k in j + 1..hs.len() {
                    let a = Matrix3::from_rows(&[
                        hs[i].normal.transpose(),
                        hs[j].normal.transpose(),
                        hs[k].normal.transpose(),
                    ]);
                    let b = Vec3::new(hs[i].offset, hs[j].offset, hs[k].offset);
                    let Some(inv) = a.try_inverse() else { continue };
                    if a.determinant().abs() < 1e-12 {
                        continue;
                    }
                    let p = inv * b;
                    if self.contains(&p, 1e-9) && !out.iter().any(|q| (q - p).norm() < 1e-9) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// Bounded iff the recession cone `{d : A d <= 0}` is trivial; nonempty
    /// interior iff the enumerated vertices span a solid.
    pub fn check_bounded_nonempty(&self) -> Result<()> {
        let hs = &self.half_spaces;
        let normals = nalgebra::DMatrix::from_fn(hs.len(), 3, |r, c| hs[r].normal[c]);
        if hs.len() < 4 || normals.rank(1e-9) < 3 {
            return Err(Error::Degenerate("polytope is unbounded".into()));
        }
        for i in 0..hs.len() {
            for j in i + 1..hs.len() {
                let d = hs[i].normal.cross(&hs[j].normal);
                if d.norm() < 1e-12 {
                    continue;
                }
                for dir in [d, -d] {
                    if hs.iter().all(|h| h.normal.dot(&dir) <= 1e-12) {
                        return Err(Error::Degenerate("polytope is unbounded".into()));
                    }
                }
            }
        }
        let verts = self.vertices();
        let solid = verts.len() >= 4
            && verts.iter().skip(1).any(|a| {
                verts.iter().skip(1).any(|b| {
                    verts.iter().skip(1).any(|c| {
                        (a - verts[0]).cross(&(b - verts[0])).dot(&(c - verts[0])).abs() > 1e-9
                    })
                })
            });
        if !solid {
            return Err(Error::Degenerate("polytope has empty interior".into()));
        }
        Ok(())
    }
}

/// True iff `a_j . p <= b_j + tol` for every face.
pub fn point_in_polytope(p: &Vec3, poly: &ConvexPolytope, tol: f64) -> bool {
    poly.half_spaces.iter().all(|h| h.excess(p) <= tol)
}

/// Camera optics and the admissible gimbal angles.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraConfig {
    /// Observation range (m): distance from the apex to the pyramid base.
    pub h_fov: f64,
    /// Horizontal FOV angle (rad).
    pub phi_h: f64,
    /// Vertical FOV angle (rad).
    pub phi_v: f64,
    /// Admissible rotations about y (rad), within [-pi/2, pi/2].
    pub psi_y_set: Vec<f64>,
    /// Admissible rotations about z (rad), within (-pi, pi].
    pub psi_z_set: Vec<f64>,
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        use std::f64::consts::{FRAC_PI_2, PI};
        let bad = |m: &str| Err(Error::InvalidMission(format!("camera: {m}")));
        if !(self.h_fov > 0.0) {
            return bad("h_fov must be positive");
        }
        if !(self.phi_h > 0.0 && self.phi_h < PI && self.phi_v > 0.0 && self.phi_v < PI) {
            return bad("FOV angles must lie in (0, pi)");
        }
        if self.psi_y_set.is_empty() || self.psi_z_set.is_empty() {
            return bad("rotation sets must be nonempty");
        }
        if self.psi_y_set.iter().any(|a| a.abs() > FRAC_PI_2 + 1e-12) {
            return bad("psi_y outside [-pi/2, pi/2]");
        }
        if self.psi_z_set.iter().any(|a| !(*a > -PI - 1e-12 && *a <= PI + 1e-12)) {
            return bad("psi_z outside (-pi, pi]");
        }
        Ok(())
    }

    /// Footprint length `2 h tan(phi_h / 2)`.
    pub fn footprint_length(&self) -> f64 {
        2.0 * self.h_fov * (self.phi_h / 2.0).tan()
    }

    /// Footprint width `2 h tan(phi_v / 2)`.
    pub fn footprint_width(&self) -> f64 {
        2.0 * self.h_fov * (self.phi_v / 2.0).tan()
    }

    pub fn state_count(&self) -> usize {
        self.psi_y_set.len() * self.psi_z_set.len()
    }
}

/// Pyramid vertices of the forward-looking camera with its apex at the origin.
/// Columns 0..4 are the base corners at `x = h_fov`, column 4 is the apex.
pub fn base_fov_vertices(cfg: &CameraConfig) -> Matrix3x5<f64> {
    let h = cfg.h_fov;
    let l = cfg.footprint_length() / 2.0;
    let w = cfg.footprint_width() / 2.0;
    Matrix3x5::new(
        h, h, h, h, 0.0, //
        l, l, -l, -l, 0.0, //
        w, -w, -w, w, 0.0,
    )
}

/// One discrete camera orientation, expressed in the body frame (apex at origin).
#[derive(Debug, Clone, PartialEq)]
pub struct FovState {
    /// Zero-based state index (row-major over `(psi_y, psi_z)`).
    pub index: usize,
    pub psi_y: f64,
    pub psi_z: f64,
    pub vertices_body: Matrix3x5<f64>,
    pub half_spaces_body: [HalfSpace; FOV_FACES],
}

impl FovState {
    pub fn from_vertices(index: usize, psi_y: f64, psi_z: f64, v: Matrix3x5<f64>) -> Self {
        let apex: Vec3 = v.column(4).into();
        let corner = |i: usize| -> Vec3 { v.column(i % 4).into() };
        let mut faces = [HalfSpace {
            normal: Vec3::zeros(),
            offset: 0.0,
        }; FOV_FACES];
        for (i, face) in faces.iter_mut().take(4).enumerate() {
            let n = (corner(i) - apex).cross(&(corner(i + 1) - apex)).normalize();
            let b = n.dot(&apex);
            let opposite = corner(i + 2);
            let (n, b) = if n.dot(&opposite) > b { (-n, -b) } else { (n, b) };
            *face = HalfSpace {
                normal: n,
                offset: b,
            };
        }
        let base_center = (0..4).map(corner).sum::<Vec3>() / 4.0;
        let axis = (base_center - apex).normalize();
        faces[4] = HalfSpace {
            normal: axis,
            offset: axis.dot(&base_center),
        };
        Self {
            index,
            psi_y,
            psi_z,
            vertices_body: v,
            half_spaces_body: faces,
        }
    }

    /// Unit view axis (apex toward base center).
    pub fn axis(&self) -> Vec3 {
        self.half_spaces_body[4].normal
    }

    /// The pyramid with its apex moved to `position`.
    pub fn polytope_at(&self, position: &Vec3) -> ConvexPolytope {
        ConvexPolytope {
            half_spaces: self
                .half_spaces_body
                .iter()
                .map(|h| h.translated(position))
                .collect(),
        }
    }

    pub fn vertices_at(&self, position: &Vec3) -> Matrix3x5<f64> {
        let mut v = self.vertices_body;
        for mut c in v.column_iter_mut() {
            c += position;
        }
        v
    }
}

/// All `|psi_y| * |psi_z|` orientations, `psi_y` outer and `psi_z` inner.
pub fn enumerate_fov_states(cfg: &CameraConfig) -> Vec<FovState> {
    let v0 = base_fov_vertices(cfg);
    let mut out = Vec::with_capacity(cfg.state_count());
    for &py in &cfg.psi_y_set {
        for &pz in &cfg.psi_z_set {
            let r = rotation_z(pz) * rotation_y(py);
            out.push(FovState::from_vertices(out.len(), py, pz, r * v0));
        }
    }
    out
}

/// Triangular surface element.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: [Vec3; 3],
    pub centroid: Vec3,
    pub unit_normal: Vec3,
}

impl Facet {
    /// Normal follows the right-hand rule over the vertex order.
    pub fn new(vertices: [Vec3; 3]) -> Result<Self> {
        let cross = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0]));
        if cross.norm() < COLLINEAR_TOL || vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Degenerate(format!("collinear facet {vertices:?}")));
        }
        Ok(Self {
            vertices,
            centroid: (vertices[0] + vertices[1] + vertices[2]) / 3.0,
            unit_normal: cross.normalize(),
        })
    }

    /// Same facet with the normal flipped to have a non-negative z component.
    pub fn upward(mut self) -> Self {
        if self.unit_normal.z < 0.0 {
            self.vertices.swap(1, 2);
            self.unit_normal = -self.unit_normal;
        }
        self
    }
}

/// Axis-aligned cube offset from a facet along its normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub facet_index: usize,
    pub centroid: Vec3,
    pub cube: ConvexPolytope,
    pub edge_length: f64,
}

/// Waypoint centered at `c * h_fov * normal + facet centroid`.
pub fn make_waypoint(
    facet: &Facet,
    facet_index: usize,
    c: f64,
    h_fov: f64,
    edge_length: f64,
) -> Result<Waypoint> {
    if !(edge_length > 0.0) || !c.is_finite() || !h_fov.is_finite() {
        return Err(Error::InvalidMission(format!(
            "waypoint parameters c={c}, h_fov={h_fov}, edge={edge_length}"
        )));
    }
    let centroid = facet.centroid + facet.unit_normal * (c * h_fov);
    Ok(Waypoint {
        facet_index,
        centroid,
        cube: ConvexPolytope::cube(centroid, edge_length)?,
        edge_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    pub(crate) fn paper_camera() -> CameraConfig {
        CameraConfig {
            h_fov: 15.0,
            phi_h: 60f64.to_radians(),
            phi_v: 60f64.to_radians(),
            psi_y_set: vec![-FRAC_PI_2, -FRAC_PI_4, 0.0, FRAC_PI_4, FRAC_PI_2],
            psi_z_set: (-3..=4).map(|k| k as f64 * FRAC_PI_4).collect(),
        }
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_y(0.0), Matrix3::identity());
        let p = rotation_z(PI) * Vec3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(p, Vec3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
        let apex: Vec3 = base_fov_vertices(&paper_camera()).column(4).into();
        assert_eq!(rotation_z(FRAC_PI_2) * rotation_y(FRAC_PI_2) * apex, Vec3::zeros());
    }

    #[test]
    fn base_vertices_examples() {
        let cfg = paper_camera();
        assert_relative_eq!(cfg.footprint_length(), 17.3205, epsilon = 1e-4);
        assert_relative_eq!(cfg.footprint_width(), 17.3205, epsilon = 1e-4);
        let v = base_fov_vertices(&cfg);
        assert_relative_eq!(v[(0, 0)], 15.0);
        assert_relative_eq!(v[(1, 0)], 8.6603, epsilon = 1e-4);
        assert_relative_eq!(v[(2, 0)], 8.6603, epsilon = 1e-4);
        assert_eq!(v.column(4).into_owned(), Vec3::zeros());

        let unit = CameraConfig {
            h_fov: 1.0,
            phi_h: FRAC_PI_2,
            phi_v: FRAC_PI_2,
            ..cfg
        };
        assert_relative_eq!(unit.footprint_length(), 2.0, epsilon = 1e-12);
        let v = base_fov_vertices(&unit);
        assert_relative_eq!(v.column(2).into_owned(), Vec3::new(1.0, -1.0, -1.0), epsilon = 1e-12);
    }

    #[test]
    fn fov_enumeration() {
        let cfg = paper_camera();
        let states = enumerate_fov_states(&cfg);
        assert_eq!(states.len(), 40);
        // psi_y outer, psi_z inner
        assert_eq!(states[9].psi_y, cfg.psi_y_set[1]);
        assert_eq!(states[9].psi_z, cfg.psi_z_set[1]);

        let single = CameraConfig {
            psi_y_set: vec![0.0],
            psi_z_set: vec![0.0, PI],
            ..cfg.clone()
        };
        let s = enumerate_fov_states(&single);
        assert_eq!(s[0].vertices_body, base_fov_vertices(&cfg));
        let base_center: Vec3 = (0..4).map(|i| Vec3::from(s[1].vertices_body.column(i))).sum::<Vec3>() / 4.0;
        assert_relative_eq!(base_center, Vec3::new(-15.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn fov_states_contain_themselves_and_their_axis() {
        let cfg = paper_camera();
        for s in enumerate_fov_states(&cfg) {
            let poly = s.polytope_at(&Vec3::zeros());
            for v in s.vertices_body.column_iter() {
                assert!(poly.contains(&v.into(), 1e-9));
            }
            for h in &s.half_spaces_body {
                assert_relative_eq!(h.normal.norm(), 1.0, epsilon = 1e-12);
            }
            let dir = rotation_z(s.psi_z) * rotation_y(s.psi_y) * Vec3::new(cfg.h_fov * 0.5, 0.0, 0.0);
            assert!(poly.contains(&dir, 0.0));
            assert!(!poly.contains(&(dir * 2.5), 0.0));
            assert!(poly.check_bounded_nonempty().is_ok());
            assert_relative_eq!(s.axis(), dir.normalize(), epsilon = 1e-12);
        }
    }

    #[test]
    fn containment_examples() {
        let cube = ConvexPolytope::cube(Vec3::zeros(), 1.0).unwrap();
        let tol = 1e-6;
        assert!(point_in_polytope(&Vec3::zeros(), &cube, tol));
        assert!(!point_in_polytope(&Vec3::new(0.5 + 2.0 * tol, 0.0, 0.0), &cube, tol));

        let s = &enumerate_fov_states(&CameraConfig {
            psi_y_set: vec![0.0],
            psi_z_set: vec![0.0],
            ..paper_camera()
        })[0];
        let poly = s.polytope_at(&Vec3::zeros());
        assert!(point_in_polytope(&Vec3::new(14.0, 0.0, 0.0), &poly, 0.0));
        assert!(!point_in_polytope(&Vec3::new(16.0, 0.0, 0.0), &poly, 0.0));
    }

    #[test]
    fn waypoint_examples() {
        let facet = Facet::new([
            Vec3::new(-1.0, -1.0, 0.0),
            Vec3::new(2.0, -1.0, 0.0),
            Vec3::new(-1.0, 2.0, 0.0),
        ])
        .unwrap();
        assert_eq!(facet.centroid, Vec3::zeros());
        assert_eq!(facet.unit_normal, Vec3::new(0.0, 0.0, 1.0));

        let wp = make_waypoint(&facet, 0, 0.8, 15.0, 5.0).unwrap();
        assert_relative_eq!(wp.centroid, Vec3::new(0.0, 0.0, 12.0), epsilon = 1e-12);
        assert_eq!(wp.cube.len(), CUBE_FACES);
        for (k, pair) in wp.cube.half_spaces.chunks(2).enumerate() {
            assert_relative_eq!(pair[0].offset, wp.centroid[k] + 2.5, epsilon = 1e-12);
            assert_relative_eq!(-pair[1].offset, wp.centroid[k] - 2.5, epsilon = 1e-12);
        }
        assert!(wp.cube.contains(&wp.centroid, 0.0));
        assert!(!wp.cube.contains(&(wp.centroid + Vec3::new(5.0, 0.0, 0.0)), 0.0));

        let at_facet = make_waypoint(&facet, 0, 0.0, 15.0, 5.0).unwrap();
        assert_eq!(at_facet.centroid, facet.centroid);
        assert!(make_waypoint(&facet, 0, 0.5, 15.0, 0.0).is_err());
    }

    #[test]
    fn facet_rejects_collinear() {
        let r = Facet::new([Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0)]);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn unbounded_polytopes_are_rejected() {
        let half: Vec<_> = ConvexPolytope::cube(Vec3::zeros(), 1.0).unwrap().half_spaces[..5].to_vec();
        assert!(ConvexPolytope::new(half).is_err());
        let cube = ConvexPolytope::cube(Vec3::zeros(), 1.0).unwrap();
        assert_eq!(cube.vertices().len(), 8);
        assert!(ConvexPolytope::new(cube.half_spaces).is_ok());
    }

    /// Barycentric containment in a tetrahedron, independent of the half-space path.
    fn tetra_contains(t: &[Vec3; 4], p: &Vec3) -> bool {
        let m = Matrix3::from_columns(&[t[1] - t[0], t[2] - t[0], t[3] - t[0]]);
        let Some(inv) = m.try_inverse() else { return false };
        let l = inv * (p - t[0]);
        let l0 = 1.0 - l.sum();
        l.iter().all(|&v| v >= 0.0) && l0 >= 0.0
    }

    fn tetra_polytope(t: &[Vec3; 4]) -> ConvexPolytope {
        let faces = [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 3, 1), (1, 2, 3, 0)];
        let hs = faces
            .iter()
            .map(|&(a, b, c, opp)| {
                let mut n = (t[b] - t[a]).cross(&(t[c] - t[a]));
                if n.dot(&(t[opp] - t[a])) > 0.0 {
                    n = -n;
                }
                HalfSpace::new(n, n.dot(&t[a])).unwrap()
            })
            .collect();
        ConvexPolytope { half_spaces: hs }
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rotations_are_proper(a in -10.0..10.0f64) {
            for r in [rotation_y(a), rotation_z(a)] {
                prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
                prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn containment_matches_barycentric(a in vec3(), b in vec3(), c in vec3(), d in vec3(), p in vec3()) {
            let t = [a, b, c, d];
            let vol = (b - a).cross(&(c - a)).dot(&(d - a)).abs();
            prop_assume!(vol > 1e-2);
            let poly = tetra_polytope(&t);
            // skip points within rounding distance of a face
            let margin = poly.half_spaces.iter().map(|h| h.excess(&p).abs()).fold(f64::INFINITY, f64::min);
            prop_assume!(margin > 1e-9);
            prop_assert_eq!(point_in_polytope(&p, &poly, 0.0), tetra_contains(&t, &p));
        }
    }
}
