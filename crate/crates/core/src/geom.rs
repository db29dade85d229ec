//! Small fixed-size vector types and axis-aligned boxes.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Real>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }

    pub fn to_array(self) -> [T; 2] {
        [self.x, self.y]
    }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector, or `None` for a (numerically) zero vector.
    #[inline]
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::min_positive_value() && n.is_finite() {
            Some(self * n.recip())
        } else {
            None
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn component_min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn component_max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()), U::lit(self.z.as_f64()))
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T> Index<usize> for Vec2<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            _ => panic!("Vec2 index {i} out of range"),
        }
    }
}

macro_rules! vec_ops {
    ($v:ident { $($f:ident),+ }) => {
        impl<T: Real> Add for $v<T> {
            type Output = Self;
            #[inline]
            fn add(self, o: Self) -> Self { $v { $($f: self.$f + o.$f),+ } }
        }
        impl<T: Real> Sub for $v<T> {
            type Output = Self;
            #[inline]
            fn sub(self, o: Self) -> Self { $v { $($f: self.$f - o.$f),+ } }
        }
        impl<T: Real> Mul<T> for $v<T> {
            type Output = Self;
            #[inline]
            fn mul(self, s: T) -> Self { $v { $($f: self.$f * s),+ } }
        }
        impl<T: Real> Neg for $v<T> {
            type Output = Self;
            #[inline]
            fn neg(self) -> Self { $v { $($f: -self.$f),+ } }
        }
        impl<T: Real> AddAssign for $v<T> {
            #[inline]
            fn add_assign(&mut self, o: Self) { $(self.$f += o.$f;)+ }
        }
        impl<T: Real> SubAssign for $v<T> {
            #[inline]
            fn sub_assign(&mut self, o: Self) { $(self.$f -= o.$f;)+ }
        }
    };
}

vec_ops!(Vec2 { x, y });
vec_ops!(Vec3 { x, y, z });

/// Axis-aligned box in `D` dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T, const D: usize> {
    pub min: [T; D],
    pub max: [T; D],
}

impl<T: Real, const D: usize> Aabb<T, D> {
    pub fn empty() -> Self {
        Self { min: [T::infinity(); D], max: [T::neg_infinity(); D] }
    }

    pub fn from_points(points: &[[T; D]]) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow_point(p);
        }
        b
    }

    pub fn grow_point(&mut self, p: &[T; D]) {
        for k in 0..D {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn grow(&mut self, o: &Self) {
        for k in 0..D {
            self.min[k] = self.min[k].min(o.min[k]);
            self.max[k] = self.max[k].max(o.max[k]);
        }
    }

    pub fn contains_box(&self, o: &Self) -> bool {
        (0..D).all(|k| self.min[k] <= o.min[k] && o.max[k] <= self.max[k])
    }

    /// Point containment with an absolute slack on every side.
    pub fn contains_point(&self, p: &[T; D], slack: T) -> bool {
        (0..D).all(|k| p[k] >= self.min[k] - slack && p[k] <= self.max[k] + slack)
    }

    pub fn centroid(&self) -> [T; D] {
        let half = T::lit(0.5);
        let mut c = [T::zero(); D];
        for k in 0..D {
            c[k] = (self.min[k] + self.max[k]) * half;
        }
        c
    }

    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        for k in 1..D {
            if self.max[k] - self.min[k] > self.max[best] - self.min[best] {
                best = k;
            }
        }
        best
    }

    pub fn diagonal(&self) -> T {
        let mut s = T::zero();
        for k in 0..D {
            let e = self.max[k] - self.min[k];
            s += e * e;
        }
        s.sqrt()
    }
}

impl<T: Real> Aabb<T, 3> {
    /// Slab test; returns the entry distance if the ray overlaps the box on
    /// `[t_min, t_max]`.
    #[inline]
    pub fn ray_entry(&self, origin: &Vec3<T>, inv_dir: &Vec3<T>, t_min: T, t_max: T) -> Option<T> {
        let mut lo = t_min;
        let mut hi = t_max;
        for k in 0..3 {
            if inv_dir[k].is_infinite() {
                // ray parallel to this slab
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let t0 = (self.min[k] - origin[k]) * inv_dir[k];
            let t1 = (self.max[k] - origin[k]) * inv_dir[k];
            let (a, b) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            if a > lo {
                lo = a;
            }
            if b < hi {
                hi = b;
            }
        }
        if lo <= hi {
            Some(lo)
        } else {
            None
        }
    }
}
