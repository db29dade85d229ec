use std::collections::HashMap;

use super::{Face, TexturedMesh};
use crate::scalar::Real;

/// Midpoint subdivision: every triangle is split into four, new vertices sit
/// at edge midpoints (positions and uvs averaged), and each shared edge
/// contributes a single midpoint. Original vertices keep their indices.
pub fn subdivide<T: Real>(mesh: &TexturedMesh<T>, levels: usize) -> TexturedMesh<T> {
    let mut m = mesh.clone();
    for _ in 0..levels {
        m = subdivide_once(&m);
    }
    m
}

fn subdivide_once<T: Real>(mesh: &TexturedMesh<T>) -> TexturedMesh<T> {
    let half = T::lit(0.5);
    let mut vertices = mesh.vertices.clone();
    let mut uvs = mesh.uvs.clone();
    let mut vmid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut tmid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    let mut tags = mesh.side_tags.as_ref().map(|t| Vec::with_capacity(t.len() * 4));

    for (fi, f) in mesh.faces.iter().enumerate() {
        let mut mv = [0usize; 3];
        let mut mt = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (f.v[k], f.v[(k + 1) % 3]);
            mv[k] = *vmid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push((vertices[a] + vertices[b]) * half);
                vertices.len() - 1
            });
            let (a, b) = (f.t[k], f.t[(k + 1) % 3]);
            mt[k] = *tmid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                uvs.push((uvs[a] + uvs[b]) * half);
                uvs.len() - 1
            });
        }
        // corner k sits between midpoints k-1 (edge into k) and k (edge out of k)
        for k in 0..3 {
            let prev = (k + 2) % 3;
            faces.push(Face { v: [f.v[k], mv[k], mv[prev]], t: [f.t[k], mt[k], mt[prev]] });
        }
        faces.push(Face { v: mv, t: mt });
        if let (Some(out), Some(src)) = (tags.as_mut(), mesh.side_tags.as_ref()) {
            out.extend(std::iter::repeat(src[fi]).take(4));
        }
    }
    TexturedMesh { vertices, uvs, faces, side_tags: tags }
}
