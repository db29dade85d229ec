//! Ray casting, uv-space point location, barycentric inversion and
//! least-squares ray triangulation.

mod bvh;
mod ray;
mod triangulate;
mod uv;

pub use bvh::{Bvh, Bvh3, LEAF_SIZE};
pub use ray::{edge_slack, intersect_triangle, Hit, Ray};
pub use triangulate::{triangulate_point, Triangulation, MAX_CONDITION};
pub use uv::{invert_barycentric, is_inside, UvCandidate, UvIndex, CONTAINMENT_SLACK, UV_AREA_EPS};
