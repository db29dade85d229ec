use super::ray::{intersect_triangle, Hit, Ray};
use crate::geom::{Aabb, Vec3};
use crate::mesh::TexturedMesh;
use crate::scalar::Real;

pub const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node<T, const D: usize> {
    bbox: Aabb<T, D>,
    /// Leaf: first primitive slot. Inner: index of the right child (the left
    /// child immediately follows its parent).
    first_or_right: u32,
    /// Number of primitives; zero for inner nodes.
    count: u32,
}

/// Bounding volume hierarchy over primitives given by their boxes.
///
/// Build: median split on the centroid coordinate along the longest axis of
/// the node's centroid bounds, ties ordered by primitive index, leaves of at
/// most [`LEAF_SIZE`] primitives. Deterministic for a given input.
#[derive(Clone, Debug)]
pub struct Bvh<T, const D: usize> {
    nodes: Vec<Node<T, D>>,
    prims: Vec<u32>,
}

impl<T: Real, const D: usize> Bvh<T, D> {
    pub fn build(boxes: &[Aabb<T, D>]) -> Self {
        let mut prims: Vec<u32> = (0..boxes.len() as u32).collect();
        let centroids: Vec<[T; D]> = boxes.iter().map(|b| b.centroid()).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        if !boxes.is_empty() {
            build_rec(boxes, &centroids, &mut prims, 0, &mut nodes);
        }
        Self { nodes, prims }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Visits every primitive whose leaf box passes `node_test`.
    pub fn visit(&self, mut node_test: impl FnMut(&Aabb<T, D>) -> bool, mut on_prim: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if !node_test(&n.bbox) {
                continue;
            }
            if n.count > 0 {
                let s = n.first_or_right as usize;
                for &p in &self.prims[s..s + n.count as usize] {
                    on_prim(p as usize);
                }
            } else {
                stack.push(n.first_or_right as usize);
                stack.push(i + 1);
            }
        }
    }

    /// Checks structural invariants: every primitive in exactly one leaf,
    /// parent boxes contain children, leaf boxes contain their primitives.
    pub fn check_invariants(&self, boxes: &[Aabb<T, D>]) -> bool {
        let mut seen = vec![0u32; boxes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.count > 0 {
                let s = n.first_or_right as usize;
                if n.count as usize > LEAF_SIZE {
                    return false;
                }
                for &p in &self.prims[s..s + n.count as usize] {
                    seen[p as usize] += 1;
                    if !n.bbox.contains_box(&boxes[p as usize]) {
                        return false;
                    }
                }
            } else {
                let l = &self.nodes[i + 1];
                let r = &self.nodes[n.first_or_right as usize];
                if !n.bbox.contains_box(&l.bbox) || !n.bbox.contains_box(&r.bbox) {
                    return false;
                }
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}

fn build_rec<T: Real, const D: usize>(
    boxes: &[Aabb<T, D>],
    centroids: &[[T; D]],
    prims: &mut [u32],
    offset: usize,
    nodes: &mut Vec<Node<T, D>>,
) -> usize {
    let mut bbox = Aabb::empty();
    let mut cbox = Aabb::empty();
    for &p in prims.iter() {
        bbox.grow(&boxes[p as usize]);
        cbox.grow_point(&centroids[p as usize]);
    }
    let idx = nodes.len();
    if prims.len() <= LEAF_SIZE {
        nodes.push(Node { bbox, first_or_right: offset as u32, count: prims.len() as u32 });
        return idx;
    }
    nodes.push(Node { bbox, first_or_right: 0, count: 0 });
    let axis = cbox.longest_axis();
    prims.sort_unstable_by(|&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mid = prims.len() / 2;
    let (left, right) = prims.split_at_mut(mid);
    build_rec(boxes, centroids, left, offset, nodes);
    let r = build_rec(boxes, centroids, right, offset + mid, nodes);
    nodes[idx].first_or_right = r as u32;
    idx
}

/// Hierarchy over the 3D faces of a mesh for first-hit ray casting.
#[derive(Clone, Debug)]
pub struct Bvh3<T> {
    tree: Bvh<T, 3>,
}

impl<T: Real> Bvh3<T> {
    pub fn build(mesh: &TexturedMesh<T>) -> Self {
        let boxes = Self::face_boxes(mesh);
        Self { tree: Bvh::build(&boxes) }
    }

    pub fn face_boxes(mesh: &TexturedMesh<T>) -> Vec<Aabb<T, 3>> {
        (0..mesh.num_faces())
            .map(|f| {
                let [a, b, c] = mesh.face_positions(f);
                Aabb::from_points(&[a.to_array(), b.to_array(), c.to_array()])
            })
            .collect()
    }

    pub fn tree(&self) -> &Bvh<T, 3> {
        &self.tree
    }

    /// Nearest hit with `t > t_min`; `None` on a miss.
    pub fn first_hit(&self, mesh: &TexturedMesh<T>, ray: &Ray<T>, t_min: T) -> Option<Hit<T>> {
        let nodes = &self.tree.nodes;
        if nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(ray.dir.x.recip(), ray.dir.y.recip(), ray.dir.z.recip());
        let mut best: Option<Hit<T>> = None;
        let mut t_max = T::infinity();
        let mut stack: [u32; 64] = [0; 64];
        let mut sp = 0usize;
        if nodes[0].bbox.ray_entry(&ray.origin, &inv, t_min, t_max).is_none() {
            return None;
        }
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let i = stack[sp] as usize;
            let n = &nodes[i];
            if n.count > 0 {
                let s = n.first_or_right as usize;
                for &p in &self.tree.prims[s..s + n.count as usize] {
                    let f = p as usize;
                    if let Some((t, w)) = intersect_triangle(ray, &mesh.face_positions(f)) {
                        let better = t < t_max || (t == t_max && best.map_or(true, |b| f < b.face));
                        if t > t_min && better {
                            t_max = t;
                            best = Some(Hit { face: f, t, weights: w });
                        }
                    }
                }
                continue;
            }
            let l = i + 1;
            let r = n.first_or_right as usize;
            let tl = nodes[l].bbox.ray_entry(&ray.origin, &inv, t_min, t_max);
            let tr = nodes[r].bbox.ray_entry(&ray.origin, &inv, t_min, t_max);
            match (tl, tr) {
                (Some(a), Some(b)) => {
                    // push the farther child first so the nearer one is popped next
                    let (near, far) = if a <= b { (l, r) } else { (r, l) };
                    stack[sp] = far as u32;
                    stack[sp + 1] = near as u32;
                    sp += 2;
                }
                (Some(_), None) => {
                    stack[sp] = l as u32;
                    sp += 1;
                }
                (None, Some(_)) => {
                    stack[sp] = r as u32;
                    sp += 1;
                }
                (None, None) => {}
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::mesh::Face;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mesh(rng: &mut ChaCha8Rng, faces: usize) -> TexturedMesh<f64> {
        let mut vertices = Vec::new();
        let mut fs = Vec::new();
        for f in 0..faces {
            let c = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for _ in 0..3 {
                vertices
                    .push(c + Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)));
            }
            fs.push(Face { v: [3 * f, 3 * f + 1, 3 * f + 2], t: [0, 0, 0] });
        }
        TexturedMesh { vertices, uvs: vec![Vec2::zero()], faces: fs, side_tags: None }
    }

    fn brute(mesh: &TexturedMesh<f64>, ray: &Ray<f64>, t_min: f64) -> Option<Hit<f64>> {
        let mut best: Option<Hit<f64>> = None;
        for f in 0..mesh.num_faces() {
            if let Some((t, w)) = intersect_triangle(ray, &mesh.face_positions(f)) {
                if t > t_min && best.map_or(true, |b| t < b.t) {
                    best = Some(Hit { face: f, t, weights: w });
                }
            }
        }
        best
    }

    #[test]
    fn invariants_and_brute_force_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mesh = random_mesh(&mut rng, 200);
        let bvh = Bvh3::build(&mesh);
        assert!(bvh.tree.check_invariants(&Bvh3::face_boxes(&mesh)));
        for _ in 0..500 {
            let o = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let target = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let ray = Ray::through(o, target).unwrap();
            let a = bvh.first_hit(&mesh, &ray, 0.0);
            let b = brute(&mesh, &ray, 0.0);
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!((a.t - b.t).abs() < 1e-9);
                    assert_eq!(a.face, b.face);
                }
                other => panic!("disagreement {other:?}"),
            }
        }
    }

    #[test]
    fn first_hit_ordering() {
        let mut vertices = Vec::new();
        for z in [0.5, 0.0] {
            vertices.extend([Vec3::new(-1.0, -1.0, z), Vec3::new(1.0, -1.0, z), Vec3::new(0.0, 1.0, z)]);
        }
        let mesh = TexturedMesh::new(
            vertices,
            vec![Vec2::zero()],
            vec![Face { v: [0, 1, 2], t: [0; 3] }, Face { v: [3, 4, 5], t: [0; 3] }],
            None,
        )
        .unwrap();
        let bvh = Bvh3::build(&mesh);
        let ray = Ray::new(Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 1.0));
        let hit = bvh.first_hit(&mesh, &ray, 0.0).unwrap();
        assert_eq!(hit.face, 1);
        assert_eq!(hit.t, 1.0);
        // skipping past the first surface finds the second
        let hit = bvh.first_hit(&mesh, &ray, 1.0 + 1e-9).unwrap();
        assert_eq!(hit.face, 0);
    }

    #[test]
    fn axis_aligned_rays_on_box_planes() {
        let m = crate::mesh::fixtures::grid(9, 0.0);
        let bvh = Bvh3::build(&m);
        for i in 0..9 {
            let x = i as f64 / 8.0;
            let ray = Ray::new(Vec3::new(x, 0.5, 2.0), Vec3::new(0.0, 0.0, -1.0));
            let hit = bvh.first_hit(&m, &ray, 0.0).expect("ray along a box plane");
            assert!((hit.t - 2.0).abs() < 1e-12);
        }
    }
}
