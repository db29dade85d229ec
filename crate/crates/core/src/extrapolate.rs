//! Filling unassigned displacement values.
//!
//! Geodesic distance to the assigned set comes from fast marching on the
//! triangle mesh. Unassigned vertices are then visited in increasing distance
//! and take the inverse-edge-length weighted mean of their upwind (strictly
//! closer, already valued) neighbours. A few Jacobi sweeps over the filled
//! vertices follow, with assigned values held fixed.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::field::{Source, TsField};
use crate::geom::{Vec2, Vec3};
use crate::mesh::{TexturedMesh, Topology};
use crate::scalar::Real;

pub const DEFAULT_SMOOTH_ITERS: usize = 10;

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Eikonal update of vertex `c` from the triangle `(c, a, b)` with known
/// distances at `a` and `b`. Falls back to edge relaxation when the angle at
/// `c` is obtuse or the planar wavefront does not arrive from inside the
/// triangle.
fn triangle_update<T: Real>(xc: Vec3<T>, xa: Vec3<T>, da: T, xb: Vec3<T>, db: T) -> T {
    let e1 = xa - xc;
    let e2 = xb - xc;
    let dijkstra = (da + e1.norm()).min(db + e2.norm());
    if !da.is_finite() || !db.is_finite() {
        return dijkstra;
    }
    let g12 = e1.dot(e2);
    if g12 < T::zero() {
        return dijkstra;
    }
    let g11 = e1.dot(e1);
    let g22 = e2.dot(e2);
    let det = g11 * g22 - g12 * g12;
    if !(det > T::epsilon() * g11 * g22) {
        return dijkstra;
    }
    // Q = (E^T E)^-1 with E = [e1 e2]
    let (q11, q12, q22) = (g22 / det, -g12 / det, g11 / det);
    let a = q11 + q22 + q12 + q12;
    let b = q11 * da + q12 * db + q12 * da + q22 * db;
    let c = q11 * da * da + T::lit(2.0) * q12 * da * db + q22 * db * db - T::one();
    let disc = b * b - a * c;
    if disc < T::zero() {
        return dijkstra;
    }
    let t = (b + disc.sqrt()) / a;
    if t < da.max(db) {
        return dijkstra;
    }
    // gradient coefficients in the edge basis must point away from c
    let (ra, rb) = (da - t, db - t);
    let alpha1 = q11 * ra + q12 * rb;
    let alpha2 = q12 * ra + q22 * rb;
    if alpha1 > T::zero() || alpha2 > T::zero() {
        return dijkstra;
    }
    t.min(dijkstra)
}

/// Fast-marching geodesic distance from `seeds`; `+inf` on components
/// without a seed.
pub fn geodesic_distance<T: Real>(mesh: &TexturedMesh<T>, seeds: &[usize]) -> Result<Vec<T>> {
    let topo = Topology::build(mesh);
    geodesic_distance_with(mesh, &topo, seeds)
}

pub fn geodesic_distance_with<T: Real>(mesh: &TexturedMesh<T>, topo: &Topology, seeds: &[usize]) -> Result<Vec<T>> {
    if seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let n = mesh.num_vertices();
    let x = &mesh.vertices;
    let mut dist = vec![T::infinity(); n];
    let mut alive = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &s in seeds {
        if s >= n {
            return Err(Error::Invalid(format!("seed {s} out of range ({n} vertices)")));
        }
        dist[s] = T::zero();
        heap.push(Reverse(Key(0.0, s)));
    }
    while let Some(Reverse(Key(_, v))) = heap.pop() {
        if alive[v] {
            continue;
        }
        alive[v] = true;
        for &f in &topo.vertex_faces[v] {
            let fv = mesh.faces[f].v;
            for k in 0..3 {
                let c = fv[k];
                if alive[c] {
                    continue;
                }
                let (a, b) = (fv[(k + 1) % 3], fv[(k + 2) % 3]);
                let cand = if alive[a] && alive[b] {
                    triangle_update(x[c], x[a], dist[a], x[b], dist[b])
                } else {
                    dist[v] + (x[c] - x[v]).norm()
                };
                if cand < dist[c] {
                    dist[c] = cand;
                    heap.push(Reverse(Key(cand.as_f64(), c)));
                }
            }
        }
    }
    Ok(dist)
}

/// Fills unvalued vertices by upwind averaging in order of increasing
/// distance from the valued set. Returns the mask of newly filled vertices;
/// vertices on components without any valued vertex stay unvalued.
pub fn extrapolate_values<T: Real, const D: usize>(
    mesh: &TexturedMesh<T>,
    topo: &Topology,
    values: &mut [[T; D]],
    valued: &mut [bool],
) -> Result<Vec<bool>> {
    let n = mesh.num_vertices();
    assert_eq!(values.len(), n);
    assert_eq!(valued.len(), n);
    let seeds: Vec<usize> = (0..n).filter(|&v| valued[v]).collect();
    if seeds.is_empty() {
        return Err(Error::NoAssigned);
    }
    let dist = geodesic_distance_with(mesh, topo, &seeds)?;
    let mut order: Vec<usize> = (0..n).filter(|&v| !valued[v] && dist[v].is_finite()).collect();
    order.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(a.cmp(&b)));

    let mut filled = vec![false; n];
    for v in order {
        let mut acc = [T::zero(); D];
        let mut wsum = T::zero();
        for pass in 0..2 {
            for &nb in &topo.neighbors[v] {
                if !valued[nb] || (pass == 0 && !(dist[nb] < dist[v])) {
                    continue;
                }
                let w = (mesh.vertices[v] - mesh.vertices[nb]).norm().recip();
                for k in 0..D {
                    acc[k] += w * values[nb][k];
                }
                wsum += w;
            }
            if wsum > T::zero() {
                break;
            }
        }
        if wsum > T::zero() {
            for k in 0..D {
                values[v][k] = acc[k] / wsum;
            }
            valued[v] = true;
            filled[v] = true;
        }
    }
    Ok(filled)
}

/// Jacobi averaging of `movable` vertices over their valued one-ring
/// neighbours; every other vertex is held fixed.
pub fn smooth_values<T: Real, const D: usize>(
    topo: &Topology,
    values: &mut [[T; D]],
    movable: &[bool],
    valued: &[bool],
    iterations: usize,
) {
    let mut next = values.to_vec();
    for _ in 0..iterations {
        for v in 0..values.len() {
            if !movable[v] {
                continue;
            }
            let mut acc = [T::zero(); D];
            let mut cnt = 0usize;
            for &nb in &topo.neighbors[v] {
                if valued[nb] {
                    for k in 0..D {
                        acc[k] += values[nb][k];
                    }
                    cnt += 1;
                }
            }
            if cnt > 0 {
                let inv = T::lit(cnt as f64).recip();
                next[v] = acc.map(|a| a * inv);
            }
        }
        values.copy_from_slice(&next);
    }
}

fn to_arrays<T: Real>(d: &[Vec2<T>]) -> Vec<[T; 2]> {
    d.iter().map(|v| v.to_array()).collect()
}

/// Fills every unassigned vertex reachable from the assigned set; filled
/// vertices are tagged `Extrapolated`.
pub fn extrapolate_field<T: Real>(mesh: &TexturedMesh<T>, field: &TsField<T>) -> Result<TsField<T>> {
    field.check_len(mesh)?;
    let topo = Topology::build(mesh);
    let mut values = to_arrays(&field.d);
    let mut valued = field.assigned_mask();
    let filled = extrapolate_values(mesh, &topo, &mut values, &mut valued)?;
    let mut out = field.clone();
    for v in 0..out.len() {
        if filled[v] {
            out.d[v] = Vec2::new(values[v][0], values[v][1]);
            out.source[v] = Source::Extrapolated;
        }
    }
    Ok(out)
}

/// Smooths the `Extrapolated` part of a field; ray values are fixed.
pub fn smooth_field<T: Real>(mesh: &TexturedMesh<T>, field: &TsField<T>, iterations: usize) -> TsField<T> {
    if iterations == 0 {
        return field.clone();
    }
    let topo = Topology::build(mesh);
    let mut values = to_arrays(&field.d);
    let movable: Vec<bool> = field.source.iter().map(|&s| s == Source::Extrapolated).collect();
    smooth_values(&topo, &mut values, &movable, &field.assigned_mask(), iterations);
    let mut out = field.clone();
    for v in 0..out.len() {
        if movable[v] {
            out.d[v] = Vec2::new(values[v][0], values[v][1]);
        }
    }
    out
}
