use super::bvh::Bvh;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec2};
use crate::mesh::TexturedMesh;
use crate::scalar::Real;

/// Triangles with smaller uv area are treated as degenerate.
pub const UV_AREA_EPS: f64 = 1e-12;
/// Barycentric weights down to `-CONTAINMENT_SLACK` count as inside.
pub const CONTAINMENT_SLACK: f64 = 1e-8;

/// Solves `w1*a + w2*b + w3*c = query`, `w1 + w2 + w3 = 1`.
pub fn invert_barycentric<T: Real>(tri: &[Vec2<T>; 3], query: Vec2<T>) -> Result<[T; 3]> {
    let [a, b, c] = *tri;
    let e1 = a - c;
    let e2 = b - c;
    let det = e1.cross(e2);
    let area = det.abs() * T::lit(0.5);
    if !(area > T::lit(UV_AREA_EPS)) {
        return Err(Error::DegenerateUvTriangle { area: area.as_f64() });
    }
    let r = query - c;
    let w1 = r.cross(e2) / det;
    let w2 = e1.cross(r) / det;
    Ok([w1, w2, T::one() - w1 - w2])
}

#[inline]
pub fn is_inside<T: Real>(w: &[T; 3]) -> bool {
    let s = -T::lit(CONTAINMENT_SLACK);
    w.iter().all(|&x| x >= s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UvCandidate<T> {
    pub face: usize,
    pub weights: [T; 3],
}

/// Bounding-box hierarchy over uv triangles for point location.
#[derive(Clone, Debug)]
pub struct UvIndex<T> {
    tree: Bvh<T, 2>,
    triangles: Vec<[Vec2<T>; 3]>,
    /// Mesh face id of each indexed triangle.
    faces: Vec<usize>,
}

impl<T: Real> UvIndex<T> {
    /// Indexes every face of `mesh` by its corner uvs.
    pub fn build(mesh: &TexturedMesh<T>) -> Self {
        let tris = (0..mesh.num_faces()).map(|f| (f, mesh.face_uvs(f))).collect();
        Self::from_triangles(tris)
    }

    /// Indexes explicit `(face id, uv triangle)` pairs, e.g. displaced
    /// coordinates or a patch of faces.
    pub fn from_triangles(tris: Vec<(usize, [Vec2<T>; 3])>) -> Self {
        let boxes: Vec<Aabb<T, 2>> =
            tris.iter().map(|(_, t)| Aabb::from_points(&[t[0].to_array(), t[1].to_array(), t[2].to_array()])).collect();
        let tree = Bvh::build(&boxes);
        let (faces, triangles) = tris.into_iter().unzip();
        Self { tree, triangles, faces }
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn leaf_boxes_valid(&self) -> bool {
        let boxes: Vec<Aabb<T, 2>> = self
            .triangles
            .iter()
            .map(|t| Aabb::from_points(&[t[0].to_array(), t[1].to_array(), t[2].to_array()]))
            .collect();
        self.tree.check_invariants(&boxes)
    }

    /// All indexed triangles containing `query`, ordered by face id.
    pub fn locate(&self, query: Vec2<T>) -> Vec<UvCandidate<T>> {
        let q = query.to_array();
        let slack = T::lit(CONTAINMENT_SLACK);
        let mut out = Vec::new();
        self.tree.visit(
            |b| b.contains_point(&q, slack),
            |slot| {
                if let Ok(w) = invert_barycentric(&self.triangles[slot], query) {
                    if is_inside(&w) {
                        out.push(UvCandidate { face: self.faces[slot], weights: w });
                    }
                }
            },
        );
        out.sort_by_key(|c| c.face);
        out
    }
}
