//! Triangle meshes with per-corner texture coordinates.

mod energy;
mod obj;
mod smooth;
mod subdivide;
mod topology;

pub use energy::{deformation_energy, EnergyReport};
pub use obj::{load_obj, parse_obj, save_obj, write_obj};
pub use smooth::{taubin_smooth, umbrella_smooth, TaubinParams};
pub use subdivide::subdivide;
pub use topology::Topology;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec2, Vec3};
use crate::scalar::Real;

/// Which pixel image a face belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Front,
    Back,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Front => "front",
            Side::Back => "back",
        }
    }

    pub fn channel_offset(self) -> usize {
        match self {
            Side::Front => 0,
            Side::Back => 2,
        }
    }
}

/// A triangle: three vertex indices and three texture-coordinate indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    pub v: [usize; 3],
    pub t: [usize; 3],
}

impl Face {
    /// Face whose uv indices equal its vertex indices.
    pub fn shared(v: [usize; 3]) -> Self {
        Self { v, t: v }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TexturedMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub uvs: Vec<Vec2<T>>,
    pub faces: Vec<Face>,
    /// One tag per face when present.
    pub side_tags: Option<Vec<Side>>,
}

/// Pose descriptor fed to the decoder network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub id: u64,
    pub params: Vec<T>,
}

impl<T: Real> TexturedMesh<T> {
    /// Builds a mesh and checks its invariants.
    pub fn new(
        vertices: Vec<Vec3<T>>,
        uvs: Vec<Vec2<T>>,
        faces: Vec<Face>,
        side_tags: Option<Vec<Side>>,
    ) -> Result<Self> {
        let m = Self { vertices, uvs, faces, side_tags };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(tags) = &self.side_tags {
            if tags.len() != self.faces.len() {
                return Err(Error::Invalid(format!("{} side tags for {} faces", tags.len(), self.faces.len())));
            }
        }
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                if f.v[k] >= self.vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        face: fi,
                        what: "vertex",
                        index: f.v[k],
                        len: self.vertices.len(),
                    });
                }
                if f.t[k] >= self.uvs.len() {
                    return Err(Error::IndexOutOfRange { face: fi, what: "uv", index: f.t[k], len: self.uvs.len() });
                }
            }
            if self.face_area(fi) <= T::zero() {
                return Err(Error::DegenerateFace { face: fi, what: "zero 3D area" });
            }
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    #[inline]
    pub fn face_positions(&self, f: usize) -> [Vec3<T>; 3] {
        let v = self.faces[f].v;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    #[inline]
    pub fn face_uvs(&self, f: usize) -> [Vec2<T>; 3] {
        let t = self.faces[f].t;
        [self.uvs[t[0]], self.uvs[t[1]], self.uvs[t[2]]]
    }

    pub fn face_area(&self, f: usize) -> T {
        let [a, b, c] = self.face_positions(f);
        (b - a).cross(c - a).norm() * T::lit(0.5)
    }

    pub fn side(&self, f: usize) -> Option<Side> {
        self.side_tags.as_ref().map(|t| t[f])
    }

    /// Point on face `f` with barycentric weights `w`.
    #[inline]
    pub fn interpolate_position(&self, f: usize, w: [T; 3]) -> Vec3<T> {
        let [a, b, c] = self.face_positions(f);
        a * w[0] + b * w[1] + c * w[2]
    }

    #[inline]
    pub fn interpolate_uv(&self, f: usize, w: [T; 3]) -> Vec2<T> {
        let [a, b, c] = self.face_uvs(f);
        a * w[0] + b * w[1] + c * w[2]
    }

    /// Per-vertex texture coordinate: the uv of the first corner referencing
    /// each vertex (zero for unreferenced vertices).
    pub fn vertex_uvs(&self) -> Vec<Vec2<T>> {
        let mut out = vec![Vec2::zero(); self.vertices.len()];
        let mut seen = vec![false; self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                if !seen[f.v[k]] {
                    seen[f.v[k]] = true;
                    out[f.v[k]] = self.uvs[f.t[k]];
                }
            }
        }
        out
    }

    /// Per-vertex side: side of the first incident face.
    pub fn vertex_sides(&self) -> Option<Vec<Side>> {
        let tags = self.side_tags.as_ref()?;
        let mut out = vec![Side::Front; self.vertices.len()];
        let mut seen = vec![false; self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            for &v in &face.v {
                if !seen[v] {
                    seen[v] = true;
                    out[v] = tags[f];
                }
            }
        }
        Some(out)
    }

    pub fn bbox(&self) -> Aabb<T, 3> {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.grow_point(&v.to_array());
        }
        b
    }

    pub fn bbox_diagonal(&self) -> T {
        self.bbox().diagonal()
    }

    pub fn bbox_center(&self) -> Vec3<T> {
        Vec3::from_array(self.bbox().centroid())
    }

    /// Same connectivity and uvs with new vertex positions.
    pub fn with_positions(&self, vertices: Vec<Vec3<T>>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len());
        Self { vertices, ..self.clone() }
    }

    /// Same geometry with every corner's uv offset by the displacement of
    /// its vertex. New uv entries are created per distinct (uv, vertex) pair
    /// in first-use order.
    pub fn with_displaced_uvs(&self, d: &[Vec2<T>]) -> Self {
        assert_eq!(d.len(), self.vertices.len());
        let mut map = std::collections::HashMap::new();
        let mut uvs = Vec::new();
        let faces = self
            .faces
            .iter()
            .map(|f| {
                let mut t = [0usize; 3];
                for k in 0..3 {
                    let key = (f.t[k], f.v[k]);
                    t[k] = *map.entry(key).or_insert_with(|| {
                        uvs.push(self.uvs[f.t[k]] + d[f.v[k]]);
                        uvs.len() - 1
                    });
                }
                Face { v: f.v, t }
            })
            .collect();
        Self { vertices: self.vertices.clone(), uvs, faces, side_tags: self.side_tags.clone() }
    }

    pub fn same_connectivity(&self, other: &Self) -> bool {
        self.vertices.len() == other.vertices.len()
            && self.faces.len() == other.faces.len()
            && self.faces.iter().zip(&other.faces).all(|(a, b)| a.v == b.v)
    }

    pub fn check_same_connectivity(&self, other: &Self) -> Result<()> {
        if self.same_connectivity(other) {
            Ok(())
        } else {
            Err(Error::ConnectivityMismatch(format!(
                "{} vertices / {} faces vs {} vertices / {} faces",
                self.vertices.len(),
                self.faces.len(),
                other.vertices.len(),
                other.faces.len()
            )))
        }
    }

    pub fn cast<U: Real>(&self) -> TexturedMesh<U> {
        TexturedMesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            uvs: self.uvs.iter().map(|v| v.cast()).collect(),
            faces: self.faces.clone(),
            side_tags: self.side_tags.clone(),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn rejects_out_of_range_and_degenerate() {
        let mut m = triangle();
        m.faces[0].t[2] = 7;
        assert!(matches!(m.validate(), Err(Error::IndexOutOfRange { what: "uv", .. })));
        let mut m = triangle();
        m.vertices[2] = Vec3::new(2.0, 0.0, 0.0);
        assert!(matches!(m.validate(), Err(Error::DegenerateFace { .. })));
    }

    #[test]
    fn displaced_uvs_offset_each_corner() {
        let m = grid(3, 0.0);
        let d: Vec<_> = (0..m.num_vertices()).map(|i| Vec2::new(0.01 * i as f64, 0.0)).collect();
        let moved = m.with_displaced_uvs(&d);
        for (f, face) in moved.faces.iter().enumerate() {
            for k in 0..3 {
                let want = m.uvs[m.faces[f].t[k]] + d[face.v[k]];
                assert_eq!(moved.uvs[face.t[k]], want);
            }
        }
    }
}
