//! Camera-dependent visibility of faces and vertices.
//!
//! Each face is probed at seven barycentric samples (corners, edge midpoints,
//! centroid). A sample is visible when it lies inside the camera frustum and
//! no surface is hit along the aperture ray before the sample (within the hit
//! tolerance). Corner and edge samples are shared between
//! faces, so each is traced once.

use rayon::prelude::*;

use crate::camera::Camera;
use crate::geom::Vec3;
use crate::scalar::Real;
use crate::scene::TracedMesh;
use crate::spatial::Ray;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibilityReport {
    pub vertex_visible: Vec<bool>,
    pub face_visible: Vec<bool>,
    /// Visible samples per face, `0..=7`.
    pub sample_hits: Vec<u8>,
}

/// Visibility of a point known to lie on the surface.
fn sample_visible<T: Real>(scene: &TracedMesh<T>, cam: &Camera<T>, point: Vec3<T>) -> bool {
    if !cam.in_frustum(point) {
        return false;
    }
    let Some(ray) = Ray::through(cam.position, point) else {
        return false;
    };
    let t_point = (point - cam.position).norm();
    // the sample lies on the surface, so a miss (possible exactly on an
    // open boundary edge) means nothing in front of it
    match scene.first_hit(&ray) {
        Some(h) => h.t > t_point - scene.eps,
        None => true,
    }
}

/// True iff the aperture ray toward `point` first hits the surface at `point`.
/// `face` is the face the point was taken from; a hit on a neighbouring face
/// at the same location (shared edge or corner) counts as the same point.
pub fn point_visible<T: Real>(scene: &TracedMesh<T>, cam: &Camera<T>, point: Vec3<T>, face: usize) -> bool {
    debug_assert!(face < scene.mesh.num_faces());
    sample_visible(scene, cam, point)
}

pub fn classify<T: Real>(scene: &TracedMesh<T>, cam: &Camera<T>) -> VisibilityReport {
    let mesh = &scene.mesh;
    let nv = mesh.num_vertices();
    let nf = mesh.num_faces();

    let mut used = vec![false; nv];
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(nf * 3 / 2 + 1);
    for f in &mesh.faces {
        for k in 0..3 {
            used[f.v[k]] = true;
            let (a, b) = (f.v[k], f.v[(k + 1) % 3]);
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let vertex_vis: Vec<bool> =
        (0..nv).into_par_iter().map(|v| used[v] && sample_visible(scene, cam, mesh.vertices[v])).collect();
    let half = T::lit(0.5);
    let edge_vis: Vec<bool> = edges
        .par_iter()
        .map(|&(a, b)| sample_visible(scene, cam, (mesh.vertices[a] + mesh.vertices[b]) * half))
        .collect();
    let third = T::lit(1.0 / 3.0);
    let centroid_vis: Vec<bool> = (0..nf)
        .into_par_iter()
        .map(|f| {
            let [a, b, c] = mesh.face_positions(f);
            sample_visible(scene, cam, (a + b + c) * third)
        })
        .collect();

    let mut sample_hits = vec![0u8; nf];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let mut n = centroid_vis[fi] as u8;
        for k in 0..3 {
            n += vertex_vis[f.v[k]] as u8;
            let (a, b) = (f.v[k], f.v[(k + 1) % 3]);
            let e = edges.binary_search(&(a.min(b), a.max(b))).expect("edge listed");
            n += edge_vis[e] as u8;
        }
        sample_hits[fi] = n;
    }
    let face_visible: Vec<bool> = sample_hits.iter().map(|&n| n > 0).collect();
    let mut vertex_visible = vec![false; nv];
    for (fi, f) in mesh.faces.iter().enumerate() {
        if face_visible[fi] {
            for &v in &f.v {
                vertex_visible[v] = true;
            }
        }
    }
    VisibilityReport { vertex_visible, face_visible, sample_hits }
}
