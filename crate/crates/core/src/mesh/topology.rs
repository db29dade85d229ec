use std::collections::BTreeMap;

use super::TexturedMesh;
use crate::scalar::Real;

/// Vertex/edge adjacency derived from a mesh's faces.
#[derive(Clone, Debug)]
pub struct Topology {
    /// Unique undirected edges `(a, b)` with `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Number of faces incident to each edge, parallel to `edges`.
    pub edge_face_count: Vec<usize>,
    /// Sorted one-ring neighbours per vertex.
    pub neighbors: Vec<Vec<usize>>,
    /// Incident faces per vertex, in face order.
    pub vertex_faces: Vec<Vec<usize>>,
    /// Vertex lies on an edge with a single incident face.
    pub boundary: Vec<bool>,
}

impl Topology {
    pub fn build<T: Real>(mesh: &TexturedMesh<T>) -> Self {
        let n = mesh.num_vertices();
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut vertex_faces = vec![Vec::new(); n];
        for (fi, f) in mesh.faces.iter().enumerate() {
            for k in 0..3 {
                let a = f.v[k];
                let b = f.v[(k + 1) % 3];
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                vertex_faces[a].push(fi);
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        let mut boundary = vec![false; n];
        let mut edges = Vec::with_capacity(counts.len());
        let mut edge_face_count = Vec::with_capacity(counts.len());
        for (&(a, b), &c) in &counts {
            edges.push((a, b));
            edge_face_count.push(c);
            neighbors[a].push(b);
            neighbors[b].push(a);
            if c == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Self { edges, edge_face_count, neighbors, vertex_faces, boundary }
    }
}
