//! A mesh bundled with its ray-casting hierarchy.

use crate::mesh::TexturedMesh;
use crate::scalar::Real;
use crate::spatial::{Bvh3, Hit, Ray};

/// Relative hit tolerance: `eps_hit = HIT_EPS_REL * bbox diagonal`.
pub const HIT_EPS_REL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct TracedMesh<T> {
    pub mesh: TexturedMesh<T>,
    pub bvh: Bvh3<T>,
    /// Hit tolerance; also the `t_min` used to skip self-intersections.
    pub eps: T,
}

impl<T: Real> TracedMesh<T> {
    pub fn new(mesh: TexturedMesh<T>) -> Self {
        let bvh = Bvh3::build(&mesh);
        let eps = T::lit(HIT_EPS_REL) * mesh.bbox_diagonal().max(T::min_positive_value());
        Self { mesh, bvh, eps }
    }

    #[inline]
    pub fn first_hit(&self, ray: &Ray<T>) -> Option<Hit<T>> {
        self.bvh.first_hit(&self.mesh, ray, self.eps)
    }
}
