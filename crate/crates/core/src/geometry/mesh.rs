use std::collections::HashMap;

use nalgebra::{Point3, Unit, Vector3};

use super::bvh::{Aabb, Bvh};
use super::GeometryError;

/// Triangles with area below this are dropped on construction (m²).
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Hits closer than this along a ray are ignored.
pub const RAY_T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub direction: Unit<Vector3<f64>>,
}

impl Ray {
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Self {
        Self {
            origin,
            direction: Unit::new_normalize(direction),
        }
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction.into_inner() * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Point3<f64>,
    /// Unit normal, flipped to face against the ray.
    pub normal: Vector3<f64>,
    pub triangle_id: usize,
    /// True when the ray enters the solid through this triangle.
    pub front_face: bool,
}

/// Result of the closure/winding check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Watertightness {
    Watertight,
    /// Some undirected edge has only one adjacent triangle.
    OpenBoundary,
    /// Some undirected edge has more than two adjacent triangles.
    NonManifold,
    /// Closed, but neighbouring triangles disagree on orientation.
    InconsistentWinding,
}

/// Indexed triangle mesh in meters with a BVH over its triangles.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vector3<f64>>,
    bvh: Bvh,
    dropped_degenerate: usize,
}

impl TriMesh {
    /// Validates indices and coordinates, drops degenerate triangles and builds the BVH.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if vertices
            .iter()
            .any(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(GeometryError::NonFinite);
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&k| k as usize >= n) {
                return Err(GeometryError::BadIndex { triangle: i });
            }
            let [a, b, c] = tri.map(|k| vertices[k as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area < DEGENERATE_AREA {
                dropped += 1;
                continue;
            }
            kept.push(*tri);
            normals.push(cross / cross.norm());
        }
        if kept.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let bounds: Vec<Aabb> = kept
            .iter()
            .map(|t| Aabb::from_points(t.iter().map(|&k| &vertices[k as usize])))
            .collect();
        let bvh = Bvh::build(&bounds);
        Ok(Self {
            vertices,
            triangles: kept,
            normals,
            bvh,
            dropped_degenerate: dropped,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    /// Number of degenerate triangles dropped at construction.
    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, s: f64) -> Result<Self, GeometryError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(GeometryError::BadDims(format!("scale {s}")));
        }
        Self::new(
            self.vertices.iter().map(|v| Point3::from(v.coords * s)).collect(),
            self.triangles.clone(),
        )
    }

    pub fn triangle_points(&self, id: usize) -> [Point3<f64>; 3] {
        self.triangles[id].map(|k| self.vertices[k as usize])
    }

    pub fn classify(&self) -> Watertightness {
        classify_edges(&self.triangles)
    }

    pub fn is_watertight(&self) -> bool {
        self.classify() == Watertightness::Watertight
    }

    /// Nearest hit with `t > RAY_T_MIN`, through the BVH.
    pub fn raycast(&self, ray: &Ray) -> Option<Hit> {
        let best = self
            .bvh
            .traverse(ray, |id, best_t| self.intersect_triangle(id, ray).filter(|&t| t <= best_t))?;
        Some(self.make_hit(ray, best.0, best.1))
    }

    /// Nearest hit by testing every triangle. Reference path for the BVH.
    pub fn raycast_brute_force(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<(usize, f64)> = None;
        for id in 0..self.triangles.len() {
            if let Some(t) = self.intersect_triangle(id, ray) {
                if best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((id, t));
                }
            }
        }
        best.map(|(id, t)| self.make_hit(ray, id, t))
    }

    fn make_hit(&self, ray: &Ray, id: usize, t: f64) -> Hit {
        let n = self.normals[id];
        let front_face = n.dot(&ray.direction) < 0.0;
        Hit {
            t,
            point: ray.at(t),
            normal: if front_face { n } else { -n },
            triangle_id: id,
            front_face,
        }
    }

    /// Möller–Trumbore, returning `t` when it exceeds `RAY_T_MIN`.
    pub(crate) fn intersect_triangle(&self, id: usize, ray: &Ray) -> Option<f64> {
        let [a, b, c] = self.triangle_points(id);
        let e1 = b - a;
        let e2 = c - a;
        let d = ray.direction.into_inner();
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-18 {
            return None;
        }
        let inv = 1.0 / det;
        let s = ray.origin - a;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = d.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = e2.dot(&q) * inv;
        (t > RAY_T_MIN).then_some(t)
    }
}

/// Half-edge pairing over the index structure.
pub fn classify_edges(triangles: &[[u32; 3]]) -> Watertightness {
    let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
    let mut undirected: HashMap<(u32, u32), u32> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *directed.entry((a, b)).or_default() += 1;
            *undirected.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    if undirected.values().any(|&c| c > 2) {
        return Watertightness::NonManifold;
    }
    if undirected.values().any(|&c| c < 2) {
        return Watertightness::OpenBoundary;
    }
    let consistent = directed
        .iter()
        .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1));
    if consistent {
        Watertightness::Watertight
    } else {
        Watertightness::InconsistentWinding
    }
}

/// Number of distinct undirected edges.
pub fn edge_count(triangles: &[[u32; 3]]) -> usize {
    let mut set = std::collections::HashSet::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::{icosphere, make_primitive, Primitive};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cube() -> TriMesh {
        make_primitive(&Primitive::Box { x: 1.0, y: 1.0, z: 1.0 }, 0).unwrap()
    }

    #[test]
    fn cube_counts_and_watertight() {
        let m = unit_cube();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.triangles().len(), 12);
        assert!(m.is_watertight());
        for n in m.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn open_cube_has_boundary() {
        let m = unit_cube();
        let tris = m.triangles()[2..].to_vec();
        let open = TriMesh::new(m.vertices().to_vec(), tris).unwrap();
        assert_eq!(open.classify(), Watertightness::OpenBoundary);
        assert!(!open.is_watertight());
    }

    #[test]
    fn flipped_triangle_is_a_winding_error() {
        let m = unit_cube();
        let mut tris = m.triangles().to_vec();
        tris[0].swap(1, 2);
        let bad = TriMesh::new(m.vertices().to_vec(), tris).unwrap();
        assert_eq!(bad.classify(), Watertightness::InconsistentWinding);
    }

    #[test]
    fn icosphere_edge_count_matches_euler() {
        for sub in 0..4 {
            let m = icosphere(0.03, sub).unwrap();
            assert!(m.is_watertight());
            let f = m.triangles().len();
            let e = edge_count(m.triangles());
            assert_eq!(2 * e, 3 * f);
            assert_eq!(m.vertices().len() as i64 - e as i64 + f as i64, 2);
        }
    }

    #[test]
    fn watertight_invariant_under_permutation_and_scale() {
        let m = make_primitive(&Primitive::Cylinder { radius: 0.02, height: 0.05 }, 16).unwrap();
        let n = m.vertices().len();
        // reverse the vertex order and remap the indices
        let verts: Vec<_> = m.vertices().iter().rev().copied().collect();
        let tris: Vec<_> = m
            .triangles()
            .iter()
            .map(|t| t.map(|k| (n - 1) as u32 - k))
            .collect();
        let permuted = TriMesh::new(verts, tris).unwrap();
        assert!(permuted.is_watertight());
        assert!(m.scaled(3.7).unwrap().is_watertight());
    }

    #[test]
    fn axis_aligned_face_hit() {
        let m = unit_cube();
        let ray = Ray::new(Point3::new(0.0, 0.0, 1.0), Vector3::new(0.0, 0.0, -1.0));
        let hit = m.raycast(&ray).unwrap();
        assert!((hit.t - 0.5).abs() < 1e-12);
        assert!((hit.point.z - 0.5).abs() < 1e-12);
        assert!(hit.front_face);
        assert!(hit.normal.dot(&ray.direction) < 0.0);

        let miss = Ray::new(Point3::new(2.0, 0.0, 1.0), Vector3::new(0.0, 0.0, -1.0));
        assert!(m.raycast(&miss).is_none());
    }

    #[test]
    fn inside_ray_hits_back_face() {
        let m = unit_cube();
        let ray = Ray::new(Point3::origin(), Vector3::new(1.0, 0.0, 0.0));
        let hit = m.raycast(&ray).unwrap();
        assert!(!hit.front_face);
        assert!((hit.t - 0.5).abs() < 1e-12);
        assert!(hit.normal.x < 0.0);
    }

    #[test]
    fn bvh_matches_brute_force() {
        let m = make_primitive(&Primitive::Sphere { radius: 0.03 }, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let o = Point3::new(
                rng.random_range(-0.06..0.06),
                rng.random_range(-0.06..0.06),
                rng.random_range(-0.06..0.06),
            );
            let d = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if d.norm() < 1e-3 {
                continue;
            }
            let ray = Ray::new(o, d);
            let a = m.raycast(&ray);
            let b = m.raycast_brute_force(&ray);
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert_eq!(a.triangle_id, b.triangle_id);
                    assert_eq!(a.t, b.t);
                }
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_index() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, f64::NAN, 0.0),
        ];
        assert!(matches!(TriMesh::new(v, vec![[0, 1, 2]]), Err(GeometryError::NonFinite)));
        let v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        assert!(matches!(
            TriMesh::new(v, vec![[0, 1, 2]]),
            Err(GeometryError::BadIndex { .. })
        ));
    }
}
