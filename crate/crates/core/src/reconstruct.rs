//! Ground-truth geometry from per-camera texture-slid meshes.
//!
//! Each camera's slid texture coordinates `T_N = T_G + d` tell where on the
//! inferred mesh a ground-truth material point appears. The ray from the
//! aperture through that inferred-surface point passes through the true
//! position, so rays from two or more cameras triangulate it. Ambiguous uv
//! locations (folds) are resolved by the combination of candidates whose
//! rays disagree least.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::extrapolate::{extrapolate_values, smooth_values, DEFAULT_SMOOTH_ITERS};
use crate::field::TsField;
use crate::geom::{Vec2, Vec3};
use crate::mesh::{taubin_smooth, TaubinParams, TexturedMesh, Topology};
use crate::scalar::Real;
use crate::spatial::{triangulate_point, Ray, UvIndex};

/// Exhaustive search up to this many candidate combinations.
pub const COMBINATION_CAP: usize = 64;

/// A place on the inferred mesh whose slid uv matches the query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate<T> {
    pub face: usize,
    pub weights: [T; 3],
    pub point: Vec3<T>,
}

/// One camera's inferred mesh, its displacement field and the uv index over
/// the displaced coordinates of fully assigned faces.
#[derive(Clone, Debug)]
pub struct View<T> {
    pub inferred: TexturedMesh<T>,
    pub field: TsField<T>,
    pub camera: Camera<T>,
    pub index: UvIndex<T>,
}

impl<T: Real> View<T> {
    pub fn new(inferred: TexturedMesh<T>, field: TsField<T>, camera: Camera<T>) -> Result<Self> {
        let index = slid_uv_index(&inferred, &field)?;
        Ok(Self { inferred, field, camera, index })
    }

    pub fn locate(&self, query: Vec2<T>) -> Vec<Candidate<T>> {
        locate_candidates(&self.inferred, &self.field, &self.index, query)
    }
}

/// Indexes faces by their displaced uvs. Faces with an unassigned corner are
/// left out, as are faces whose displaced uv triangle has collapsed.
pub fn slid_uv_index<T: Real>(mesh: &TexturedMesh<T>, field: &TsField<T>) -> Result<UvIndex<T>> {
    field.check_len(mesh)?;
    let tris = (0..mesh.num_faces())
        .filter(|&f| mesh.faces[f].v.iter().all(|&v| field.is_assigned(v)))
        .map(|f| {
            let face = &mesh.faces[f];
            (f, [0, 1, 2].map(|k| mesh.uvs[face.t[k]] + field.d[face.v[k]]))
        })
        .collect();
    Ok(UvIndex::from_triangles(tris))
}

/// Every fully assigned inferred face whose slid uv triangle contains
/// `query`, with the 3D point at the same barycentric weights.
pub fn locate_candidates<T: Real>(
    inferred: &TexturedMesh<T>,
    field: &TsField<T>,
    index: &UvIndex<T>,
    query: Vec2<T>,
) -> Vec<Candidate<T>> {
    index
        .locate(query)
        .into_iter()
        .filter(|c| inferred.faces[c.face].v.iter().all(|&v| field.is_assigned(v)))
        .map(|c| Candidate {
            face: c.face,
            weights: c.weights,
            point: inferred.interpolate_position(c.face, c.weights),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexEstimate<T> {
    pub point: Vec3<T>,
    pub residual: T,
    /// `(camera, candidate index)` per ray used.
    pub choice: Vec<(usize, usize)>,
}

fn candidate_ray<T: Real>(cam: &Camera<T>, c: &Candidate<T>) -> Option<Ray<T>> {
    Ray::through(cam.position, c.point)
}

fn solve<T: Real>(cands: &[Vec<Candidate<T>>], cams: &[Camera<T>], choice: &[(usize, usize)]) -> Option<(Vec3<T>, T)> {
    let rays: Option<Vec<Ray<T>>> = choice.iter().map(|&(p, i)| candidate_ray(&cams[p], &cands[p][i])).collect();
    triangulate_point(&rays?).ok().map(|t| (t.point, t.residual))
}

/// Triangulates one vertex from per-camera candidate lists.
///
/// Tries every one-candidate-per-camera combination when there are at most
/// [`COMBINATION_CAP`]; otherwise seeds with the best camera pair and adds
/// the remaining cameras greedily. Returns `None` when fewer than two
/// cameras have candidates and an error when no combination is solvable.
pub fn reconstruct_vertex<T: Real>(
    cands: &[Vec<Candidate<T>>],
    cams: &[Camera<T>],
) -> Result<Option<VertexEstimate<T>>> {
    if cands.len() != cams.len() {
        return Err(Error::Shape(format!("{} candidate lists for {} cameras", cands.len(), cams.len())));
    }
    let live: Vec<usize> = (0..cands.len()).filter(|&p| !cands[p].is_empty()).collect();
    if live.len() < 2 {
        return Ok(None);
    }
    let total = live.iter().try_fold(1usize, |acc, &p| acc.checked_mul(cands[p].len()));
    let mut best: Option<VertexEstimate<T>> = None;
    let consider = |choice: Vec<(usize, usize)>, best: &mut Option<VertexEstimate<T>>| {
        if let Some((point, residual)) = solve(cands, cams, &choice) {
            if best.as_ref().map_or(true, |b| residual < b.residual) {
                *best = Some(VertexEstimate { point, residual, choice });
            }
        }
    };
    if total.map_or(false, |t| t <= COMBINATION_CAP) {
        let mut idx = vec![0usize; live.len()];
        'combos: loop {
            consider(live.iter().zip(&idx).map(|(&p, &i)| (p, i)).collect(), &mut best);
            // odometer increment, last camera fastest
            let mut k = live.len();
            loop {
                if k == 0 {
                    break 'combos;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < cands[live[k]].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    } else {
        for (a, &p) in live.iter().enumerate() {
            for &q in &live[a + 1..] {
                for i in 0..cands[p].len() {
                    for j in 0..cands[q].len() {
                        consider(vec![(p, i), (q, j)], &mut best);
                    }
                }
            }
        }
        if let Some(seed) = best.clone() {
            let mut choice = seed.choice;
            for &p in &live {
                if choice.iter().any(|&(c, _)| c == p) {
                    continue;
                }
                let mut pick: Option<(T, usize)> = None;
                for i in 0..cands[p].len() {
                    let mut trial = choice.clone();
                    trial.push((p, i));
                    if let Some((_, r)) = solve(cands, cams, &trial) {
                        if pick.map_or(true, |(br, _)| r < br) {
                            pick = Some((r, i));
                        }
                    }
                }
                if let Some((_, i)) = pick {
                    choice.push((p, i));
                }
            }
            choice.sort_unstable();
            best = None;
            consider(choice, &mut best);
        }
    }
    match best {
        Some(b) => Ok(Some(b)),
        None => Err(Error::SingularSystem { condition: f64::INFINITY }),
    }
}

/// Moves `inferred` toward the reconstruction. The offset
/// `reconstructed - inferred` known on the reconstructed vertices is
/// extrapolated and smoothed over the rest of the mesh; reconstructed
/// vertices keep their triangulated positions exactly. Vertices on
/// components without any reconstruction stay where they are.
pub fn blend_occluded<T: Real>(
    inferred: &TexturedMesh<T>,
    reconstructed: &[Option<Vec3<T>>],
) -> Result<TexturedMesh<T>> {
    let n = inferred.num_vertices();
    if reconstructed.len() != n {
        return Err(Error::Shape(format!("{} reconstructed positions for {n} vertices", reconstructed.len())));
    }
    if reconstructed.iter().all(Option::is_none) {
        log::warn!("no vertex was reconstructed; keeping the inferred mesh");
        return Ok(inferred.clone());
    }
    let topo = Topology::build(inferred);
    let mut delta: Vec<[T; 3]> =
        (0..n).map(|v| reconstructed[v].map_or([T::zero(); 3], |p| (p - inferred.vertices[v]).to_array())).collect();
    let fixed: Vec<bool> = reconstructed.iter().map(Option::is_some).collect();
    let mut valued = fixed.clone();
    let filled = extrapolate_values(inferred, &topo, &mut delta, &mut valued)?;
    smooth_values(&topo, &mut delta, &filled, &valued, DEFAULT_SMOOTH_ITERS);
    let positions = (0..n)
        .map(|v| match reconstructed[v] {
            Some(p) => p,
            None => inferred.vertices[v] + Vec3::from_array(delta[v]),
        })
        .collect();
    Ok(inferred.with_positions(positions))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Postprocess {
    None,
    Taubin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexSource {
    Triangulated,
    Blended,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexReport<T> {
    pub n_cameras: usize,
    pub residual: Option<T>,
    pub source: VertexSource,
}

#[derive(Clone, Debug)]
pub struct Reconstruction<T> {
    pub mesh: TexturedMesh<T>,
    pub vertices: Vec<VertexReport<T>>,
}

/// Full reconstruction of the vertices of `base` (the inferred mesh at
/// ground-truth connectivity). `gt_uvs[v]` is the material coordinate to
/// look up for vertex `v`; `None` skips the vertex (it is blended). Views
/// may use refined meshes.
pub fn reconstruct_mesh<T: Real>(
    base: &TexturedMesh<T>,
    gt_uvs: &[Option<Vec2<T>>],
    views: &[View<T>],
    post: Postprocess,
) -> Result<Reconstruction<T>> {
    if gt_uvs.len() != base.num_vertices() {
        return Err(Error::Shape(format!("{} query uvs for {} vertices", gt_uvs.len(), base.num_vertices())));
    }
    let cams: Vec<Camera<T>> = views.iter().map(|v| v.camera).collect();
    let per_vertex: Vec<(usize, Option<VertexEstimate<T>>)> = gt_uvs
        .par_iter()
        .map(|q| {
            let Some(q) = q else { return Ok((0, None)) };
            let cands: Vec<Vec<Candidate<T>>> = views.iter().map(|v| v.locate(*q)).collect();
            let seen = cands.iter().filter(|c| !c.is_empty()).count();
            // a vertex whose rays are all degenerate is left to blending
            let est = reconstruct_vertex(&cands, &cams).unwrap_or(None);
            Ok((seen, est))
        })
        .collect::<Result<_>>()?;
    let positions: Vec<Option<Vec3<T>>> = per_vertex.iter().map(|(_, e)| e.as_ref().map(|e| e.point)).collect();
    let mut mesh = blend_occluded(base, &positions)?;
    if post == Postprocess::Taubin {
        mesh = taubin_smooth(&mesh, TaubinParams::default());
    }
    let vertices = per_vertex
        .into_iter()
        .map(|(n_cameras, e)| VertexReport {
            n_cameras,
            residual: e.as_ref().map(|e| e.residual),
            source: if e.is_some() { VertexSource::Triangulated } else { VertexSource::Blended },
        })
        .collect();
    Ok(Reconstruction { mesh, vertices })
}

pub fn report_csv<T: Real>(vertices: &[VertexReport<T>]) -> String {
    let mut s = String::from("id,n_cameras,residual,source\n");
    for (i, r) in vertices.iter().enumerate() {
        let res = r.residual.map(|x| x.as_f64().to_string()).unwrap_or_default();
        let src = match r.source {
            VertexSource::Triangulated => "triangulated",
            VertexSource::Blended => "blended",
        };
        let _ = writeln!(s, "{i},{},{res},{src}", r.n_cameras);
    }
    s
}
