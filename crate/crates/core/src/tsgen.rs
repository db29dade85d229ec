//! Ground-truth texture-sliding fields by ray projection.
//!
//! For every inferred vertex with a visible incident face, a ray from the
//! camera aperture through the vertex is intersected with the ground-truth
//! mesh. The ground-truth uv at the first hit, minus the vertex's own uv, is
//! the vertex displacement. Vertices whose ray misses, or whose hit point is
//! not visible, stay unassigned.

use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::field::{Source, TsField};
use crate::geom::{Vec2, Vec3};
use crate::mesh::{Face, Side, TexturedMesh};
use crate::scalar::Real;
use crate::scene::TracedMesh;
use crate::visibility::{classify, point_visible};

pub const DEFAULT_TAU_UV: f64 = 0.05;
pub const DEFAULT_TAU_D: f64 = 0.05;

/// A displacement larger than this in uv units signals mismatched layouts.
const MISMATCH_NORM: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct Generated<T> {
    pub field: TsField<T>,
    /// Ground-truth intersection point per assigned vertex.
    pub hits: Vec<Option<Vec3<T>>>,
}

pub fn generate<T: Real>(gt: &TracedMesh<T>, inferred: &TracedMesh<T>, cam: &Camera<T>) -> Result<TsField<T>> {
    Ok(generate_in(gt, gt, inferred, cam)?.field)
}

/// Like [`generate`], but tests hit visibility against `gt_vis`, which may hold
/// more geometry than the intersected `gt` (e.g. the whole garment around a
/// patch).
pub fn generate_in<T: Real>(
    gt: &TracedMesh<T>,
    gt_vis: &TracedMesh<T>,
    inferred: &TracedMesh<T>,
    cam: &Camera<T>,
) -> Result<Generated<T>> {
    let vis = classify(inferred, cam);
    let base_uv = inferred.mesh.vertex_uvs();
    let per_vertex: Vec<Option<(Vec2<T>, Vec3<T>)>> = (0..inferred.mesh.num_vertices())
        .into_par_iter()
        .map(|v| {
            if !vis.vertex_visible[v] {
                return None;
            }
            let ray = cam.vertex_ray(inferred.mesh.vertices[v]).ok()?;
            let hit = gt.first_hit(&ray)?;
            let p = ray.at(hit.t);
            if !point_visible(gt_vis, cam, p, hit.face) {
                return None;
            }
            // a ray landing on a coincident ground-truth corner takes its uv exactly
            let f = &gt.mesh.faces[hit.face];
            let uv = match (0..3).find(|&k| gt.mesh.vertices[f.v[k]] == inferred.mesh.vertices[v]) {
                Some(k) => gt.mesh.uvs[f.t[k]],
                None => gt.mesh.interpolate_uv(hit.face, hit.weights),
            };
            Some((uv - base_uv[v], p))
        })
        .collect();

    let mut field = TsField::unassigned(per_vertex.len());
    let mut hits = vec![None; per_vertex.len()];
    let mut bad = 0;
    for (v, r) in per_vertex.into_iter().enumerate() {
        if let Some((d, p)) = r {
            if d.norm() > T::lit(MISMATCH_NORM) {
                bad += 1;
            }
            field.d[v] = d;
            field.source[v] = Source::Ray;
            hits[v] = Some(p);
        }
    }
    let assigned = field.count(Source::Ray);
    if 2 * bad > assigned {
        return Err(Error::UvConventionMismatch { bad, assigned });
    }
    Ok(Generated { field, hits })
}

/// Unassigns one endpoint of every assigned edge whose displaced uvs are more
/// than `tau_uv` apart, until no such edge remains. The endpoint with the
/// larger displacement goes; on a tie, the lower index.
pub fn remove_far_edges<T: Real>(field: &TsField<T>, mesh: &TexturedMesh<T>, tau_uv: T) -> TsField<T> {
    let mut out = field.clone();
    let tn = field.displaced_uvs(mesh);
    let edges = unique_edges(mesh);
    loop {
        let mut changed = false;
        for &(a, b) in &edges {
            if out.is_assigned(a) && out.is_assigned(b) && (tn[a] - tn[b]).norm() > tau_uv {
                let (na, nb) = (out.d[a].norm(), out.d[b].norm());
                let loser = if na > nb || (na == nb && a < b) { a } else { b };
                out.unassign(loser);
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Unassigns vertices whose displacement norm exceeds `tau_d`.
pub fn apply_threshold<T: Real>(field: &TsField<T>, tau_d: T) -> TsField<T> {
    let mut out = field.clone();
    for v in 0..out.len() {
        if out.is_assigned(v) && out.d[v].norm() > tau_d {
            out.unassign(v);
        }
    }
    out
}

pub(crate) fn unique_edges<T>(mesh: &TexturedMesh<T>) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = mesh
        .faces
        .iter()
        .flat_map(|f| (0..3).map(move |k| (f.v[k].min(f.v[(k + 1) % 3]), f.v[k].max(f.v[(k + 1) % 3]))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Index maps between a mesh and a face-subset patch of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchMap {
    pub old_to_new: Vec<Option<usize>>,
    pub new_to_old: Vec<usize>,
    /// Original index of each patch face.
    pub faces: Vec<usize>,
}

impl PatchMap {
    pub fn restrict_field<T: Real>(&self, field: &TsField<T>) -> TsField<T> {
        TsField {
            d: self.new_to_old.iter().map(|&v| field.d[v]).collect(),
            source: self.new_to_old.iter().map(|&v| field.source[v]).collect(),
        }
    }

    /// Patch field on the full vertex set; vertices outside the patch are
    /// unassigned.
    pub fn lift_field<T: Real>(&self, field: &TsField<T>) -> TsField<T> {
        let mut out = TsField::unassigned(self.old_to_new.len());
        for (new, &old) in self.new_to_old.iter().enumerate() {
            out.d[old] = field.d[new];
            out.source[old] = field.source[new];
        }
        out
    }

    pub fn restrict<U: Copy>(&self, values: &[U]) -> Vec<U> {
        self.new_to_old.iter().map(|&v| values[v]).collect()
    }
}

/// Submesh of the given faces with only the vertices and uvs they reference,
/// kept in their original relative order.
pub fn restrict_to_patch<T: Real>(mesh: &TexturedMesh<T>, faces: &[usize]) -> Result<(TexturedMesh<T>, PatchMap)> {
    if faces.is_empty() {
        return Err(Error::EmptyPatch);
    }
    let mut vmap = vec![None; mesh.num_vertices()];
    let mut tmap = vec![None; mesh.uvs.len()];
    for &f in faces {
        let face = mesh.faces.get(f).ok_or(Error::IndexOutOfRange {
            face: f,
            what: "patch face",
            index: f,
            len: mesh.num_faces(),
        })?;
        for k in 0..3 {
            vmap[face.v[k]] = Some(0);
            tmap[face.t[k]] = Some(0);
        }
    }
    let renumber = |map: &mut Vec<Option<usize>>| {
        let mut back = Vec::new();
        for (old, slot) in map.iter_mut().enumerate() {
            if slot.is_some() {
                *slot = Some(back.len());
                back.push(old);
            }
        }
        back
    };
    let new_to_old = renumber(&mut vmap);
    let uv_back = renumber(&mut tmap);
    let sub_faces: Vec<Face> = faces
        .iter()
        .map(|&f| {
            let face = &mesh.faces[f];
            Face { v: face.v.map(|v| vmap[v].unwrap()), t: face.t.map(|t| tmap[t].unwrap()) }
        })
        .collect();
    let sub = TexturedMesh {
        vertices: new_to_old.iter().map(|&v| mesh.vertices[v]).collect(),
        uvs: uv_back.iter().map(|&t| mesh.uvs[t]).collect(),
        faces: sub_faces,
        side_tags: mesh.side_tags.as_ref().map(|tags| faces.iter().map(|&f| tags[f]).collect()),
    };
    Ok((sub, PatchMap { old_to_new: vmap, new_to_old, faces: faces.to_vec() }))
}

/// Faces tagged with `side`, in order.
pub fn side_faces<T>(mesh: &TexturedMesh<T>, side: Side) -> Vec<usize> {
    match &mesh.side_tags {
        Some(tags) => (0..tags.len()).filter(|&f| tags[f] == side).collect(),
        None => Vec::new(),
    }
}
