use super::{TexturedMesh, Topology};
use crate::geom::Vec3;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaubinParams<T> {
    pub iterations: usize,
    pub lambda: T,
    pub mu: T,
}

impl<T: Real> Default for TaubinParams<T> {
    fn default() -> Self {
        Self { iterations: 10, lambda: T::lit(0.5), mu: T::lit(-0.53) }
    }
}

/// One uniform-weight umbrella step `x += factor * (mean(neighbours) - x)`.
/// Boundary vertices are pinned.
fn umbrella_step<T: Real>(positions: &[Vec3<T>], topo: &Topology, factor: T) -> Vec<Vec3<T>> {
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let nb = &topo.neighbors[i];
            if topo.boundary[i] || nb.is_empty() {
                return p;
            }
            let mut acc = Vec3::zero();
            for &j in nb {
                acc += positions[j];
            }
            let mean = acc * T::lit(nb.len() as f64).recip();
            p + (mean - p) * factor
        })
        .collect()
}

/// `iterations` plain umbrella steps with weight `lambda`.
pub fn umbrella_smooth<T: Real>(mesh: &TexturedMesh<T>, iterations: usize, lambda: T) -> TexturedMesh<T> {
    if iterations == 0 {
        return mesh.clone();
    }
    let topo = Topology::build(mesh);
    let mut pos = mesh.vertices.clone();
    for _ in 0..iterations {
        pos = umbrella_step(&pos, &topo, lambda);
    }
    mesh.with_positions(pos)
}

/// Taubin lambda/mu smoothing of vertex positions; uvs and connectivity are
/// untouched and boundary vertices stay fixed.
pub fn taubin_smooth<T: Real>(mesh: &TexturedMesh<T>, params: TaubinParams<T>) -> TexturedMesh<T> {
    if params.iterations == 0 {
        return mesh.clone();
    }
    let topo = Topology::build(mesh);
    let mut pos = mesh.vertices.clone();
    for _ in 0..params.iterations {
        pos = umbrella_step(&pos, &topo, params.lambda);
        pos = umbrella_step(&pos, &topo, params.mu);
    }
    mesh.with_positions(pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::grid;

    #[test]
    fn zero_iterations_is_identity() {
        let mut m = grid(4, 0.0);
        m.vertices[5].z = 0.3;
        let p = TaubinParams { iterations: 0, ..Default::default() };
        assert_eq!(taubin_smooth(&m, p), m);
    }

    #[test]
    fn flat_grid_is_a_fixed_point() {
        let m = grid(7, 0.25);
        let s = taubin_smooth(&m, TaubinParams::default());
        for (a, b) in m.vertices.iter().zip(&s.vertices) {
            assert!((*a - *b).norm() < 1e-12);
        }
        assert_eq!(s.uvs, m.uvs);
        assert_eq!(s.faces, m.faces);
    }

    #[test]
    fn noisy_interior_vertex_is_pulled_back() {
        let mut m = grid(7, 0.0);
        let center = 3 * 7 + 3;
        m.vertices[center].z = 0.1;
        let s = taubin_smooth(&m, TaubinParams { iterations: 1, ..Default::default() });
        // one lambda step: 0.1 * (1 - 0.5) = 0.05, neighbours rise by 0.5*0.1/6;
        // the mu step then re-inflates slightly but stays below the input
        assert!(s.vertices[center].z.abs() < 0.1);
        assert!(s.vertices[center].z > 0.0);
        let many = taubin_smooth(&m, TaubinParams { iterations: 20, ..Default::default() });
        assert!(many.vertices[center].z < s.vertices[center].z);
    }
}
