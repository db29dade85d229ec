use crate::geom::Vec3;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    /// Unit direction.
    pub dir: Vec3<T>,
}

impl<T: Real> Ray<T> {
    pub fn new(origin: Vec3<T>, dir: Vec3<T>) -> Self {
        Self { origin, dir }
    }

    /// Ray from `origin` toward `target`; `None` if they coincide.
    pub fn through(origin: Vec3<T>, target: Vec3<T>) -> Option<Self> {
        (target - origin).normalized().map(|dir| Self { origin, dir })
    }

    #[inline]
    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.dir * t
    }
}

/// Ray/face intersection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit<T> {
    pub face: usize,
    pub t: T,
    /// Barycentric weights of the face's three corners.
    pub weights: [T; 3],
}

/// Barycentric tolerance for hits that graze a triangle's edge.
pub fn edge_slack<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(64.0))
}

/// Watertight ray/triangle test. Returns `(t, weights)` for any `t` (the
/// caller applies range checks). Edges shared by two triangles are evaluated
/// with identical arithmetic from both sides, so a ray cannot slip through a
/// shared edge. Hits up to [`edge_slack`] outside the triangle are accepted
/// so that rays through open boundary vertices are not lost to round-off.
#[inline]
pub fn intersect_triangle<T: Real>(ray: &Ray<T>, tri: &[Vec3<T>; 3]) -> Option<(T, [T; 3])> {
    let d = ray.dir;
    let (ax, ay, az) = (d.x.abs(), d.y.abs(), d.z.abs());
    let kz = if ax >= ay && ax >= az {
        0
    } else if ay >= az {
        1
    } else {
        2
    };
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if d[kz] < T::zero() {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sz = d[kz].recip();
    let sx = d[kx] * sz;
    let sy = d[ky] * sz;

    let a = tri[0] - ray.origin;
    let b = tri[1] - ray.origin;
    let c = tri[2] - ray.origin;
    let axp = a[kx] - sx * a[kz];
    let ayp = a[ky] - sy * a[kz];
    let bxp = b[kx] - sx * b[kz];
    let byp = b[ky] - sy * b[kz];
    let cxp = c[kx] - sx * c[kz];
    let cyp = c[ky] - sy * c[kz];

    let u = cxp * byp - cyp * bxp;
    let v = axp * cyp - ayp * cxp;
    let w = bxp * ayp - byp * axp;
    let zero = T::zero();
    let det = u + v + w;
    if det == zero {
        return None;
    }
    let inv = det.recip();
    let weights = [u * inv, v * inv, w * inv];
    if (u < zero || v < zero || w < zero) && (u > zero || v > zero || w > zero) {
        // round-off at an open boundary edge or vertex
        let slack = -edge_slack::<T>();
        if weights.iter().any(|&x| x < slack) {
            return None;
        }
    }
    let t_scaled = u * (sz * a[kz]) + v * (sz * b[kz]) + w * (sz * c[kz]);
    Some((t_scaled * inv, weights))
}
