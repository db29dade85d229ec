//! Texture-sliding fields for views between cameras.
//!
//! Weights live in the layout's parameter space: a line of evenly spaced
//! cameras, a row-major grid, or an arc-length parameterized path. Blending
//! is an affine combination of per-camera displacements, which equals the
//! same combination of displaced texture coordinates since the original
//! coordinates are shared.

use crate::camera::{ArrayLayout, Camera};
use crate::error::{Error, Result};
use crate::field::{Source, TsField};
use crate::geom::{Vec2, Vec3};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct InterpWeights<T> {
    /// One weight per camera, nonnegative, summing to one.
    pub weights: Vec<T>,
    /// Layout parameter the weights were computed for.
    pub param: Vec<T>,
}

impl<T: Real> InterpWeights<T> {
    pub fn one_hot(n: usize, camera: usize) -> Self {
        let mut weights = vec![T::zero(); n];
        weights[camera] = T::one();
        Self { weights, param: Vec::new() }
    }

    /// `(camera, weight)` pairs with positive weight, in camera order.
    pub fn active(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.weights.iter().copied().enumerate().filter(|&(_, w)| w > T::zero())
    }
}

fn check_unit<T: Real>(name: &str, x: T) -> Result<()> {
    if x >= T::zero() && x <= T::one() {
        Ok(())
    } else {
        Err(Error::OutOfDomain { param: name.into(), why: format!("{x} is not in [0, 1]") })
    }
}

/// Hat weights over `n` knots at positions `knots` (increasing, first 0, last 1).
fn hat<T: Real>(knots: &[T], s: T) -> Vec<T> {
    let n = knots.len();
    let mut w = vec![T::zero(); n];
    if n == 1 {
        w[0] = T::one();
        return w;
    }
    let mut i = 0;
    while i + 2 < n && s >= knots[i + 1] {
        i += 1;
    }
    let span = knots[i + 1] - knots[i];
    let t = if span > T::zero() { ((s - knots[i]) / span).max(T::zero()).min(T::one()) } else { T::zero() };
    if t == T::zero() {
        w[i] = T::one();
    } else if t == T::one() {
        w[i + 1] = T::one();
    } else {
        w[i] = T::one() - t;
        w[i + 1] = t;
    }
    w
}

fn even_knots<T: Real>(n: usize) -> Vec<T> {
    (0..n).map(|i| if n == 1 { T::zero() } else { T::lit(i as f64) / T::lit((n - 1) as f64) }).collect()
}

/// Interpolation weights for `param` on an array of cameras at `positions`.
///
/// `param` has one entry for line and path layouts and two (column, row)
/// for grids.
pub fn weights_for<T: Real>(layout: &ArrayLayout, positions: &[Vec3<T>], param: &[T]) -> Result<InterpWeights<T>> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::Invalid("no cameras to interpolate".into()));
    }
    let want = if matches!(layout, ArrayLayout::Grid { .. }) { 2 } else { 1 };
    if param.len() != want {
        return Err(Error::OutOfDomain {
            param: format!("{param:?}"),
            why: format!("layout takes {want} parameter(s)"),
        });
    }
    for (k, &p) in param.iter().enumerate() {
        check_unit(&format!("param[{k}]"), p)?;
    }
    let weights = match *layout {
        ArrayLayout::Line => hat(&even_knots(n), param[0]),
        ArrayLayout::Path => {
            let mut knots = vec![T::zero(); n];
            for i in 1..n {
                knots[i] = knots[i - 1] + (positions[i] - positions[i - 1]).norm();
            }
            let total = knots[n - 1];
            if n > 1 && !(total > T::zero()) {
                return Err(Error::Invalid("camera path has zero length".into()));
            }
            for k in knots.iter_mut().skip(1) {
                *k /= total;
            }
            knots[n - 1] = T::one();
            hat(&knots, param[0])
        }
        ArrayLayout::Grid { rows, cols } => {
            if rows * cols != n {
                return Err(Error::Invalid(format!("grid {rows}x{cols} does not match {n} cameras")));
            }
            let wc = hat(&even_knots::<T>(cols), param[0]);
            let wr = hat(&even_knots::<T>(rows), param[1]);
            let mut w = vec![T::zero(); n];
            for r in 0..rows {
                for c in 0..cols {
                    w[r * cols + c] = wr[r] * wc[c];
                }
            }
            w
        }
    };
    Ok(InterpWeights { weights, param: param.to_vec() })
}

/// `sum_p w_p d_p` per vertex. Zero-weight cameras do not contribute, so
/// one-hot weights reproduce a field bit for bit. A vertex keeps the ray tag
/// only if every contributing camera assigned it by ray.
pub fn blend<T: Real>(fields: &[TsField<T>], w: &InterpWeights<T>) -> Result<TsField<T>> {
    if fields.len() != w.weights.len() {
        return Err(Error::Shape(format!("{} fields for {} weights", fields.len(), w.weights.len())));
    }
    let n = fields.first().map(TsField::len).unwrap_or(0);
    if let Some(bad) = fields.iter().position(|f| f.len() != n) {
        return Err(Error::ConnectivityMismatch(format!(
            "field {bad} has {} vertices, field 0 has {n}",
            fields[bad].len()
        )));
    }
    let active: Vec<(usize, T)> = w.active().collect();
    if active.is_empty() {
        return Err(Error::Invalid("all interpolation weights are zero".into()));
    }
    for &(p, _) in &active {
        if let Some(v) = (0..n).find(|&v| !fields[p].is_assigned(v)) {
            return Err(Error::Invalid(format!("field {p} is unassigned at vertex {v}; extrapolate first")));
        }
    }
    let mut out = TsField::unassigned(n);
    for v in 0..n {
        let (p0, w0) = active[0];
        let mut d = fields[p0].d[v] * w0;
        let mut all_ray = fields[p0].source[v] == Source::Ray;
        for &(p, wp) in &active[1..] {
            d += fields[p].d[v] * wp;
            all_ray &= fields[p].source[v] == Source::Ray;
        }
        out.d[v] = d;
        out.source[v] = if all_ray { Source::Ray } else { Source::Extrapolated };
    }
    Ok(out)
}

fn combine3<T: Real>(items: &[(Vec3<T>, T)]) -> Vec3<T> {
    let mut acc = items[0].0 * items[0].1;
    for &(v, w) in &items[1..] {
        acc += v * w;
    }
    acc
}

/// Camera with weighted position, target, up vector and field of view.
/// One-hot weights return the selected camera unchanged.
pub fn interpolate_camera<T: Real>(cameras: &[Camera<T>], w: &InterpWeights<T>) -> Result<Camera<T>> {
    if cameras.len() != w.weights.len() {
        return Err(Error::Shape(format!("{} cameras for {} weights", cameras.len(), w.weights.len())));
    }
    let active: Vec<(usize, T)> = w.active().collect();
    match active.as_slice() {
        [] => Err(Error::Invalid("all interpolation weights are zero".into())),
        [(p, _)] => Ok(cameras[*p]),
        _ => {
            let pick = |f: &dyn Fn(&Camera<T>) -> Vec3<T>| {
                combine3(&active.iter().map(|&(p, wp)| (f(&cameras[p]), wp)).collect::<Vec<_>>())
            };
            let fov = active.iter().map(|&(p, wp)| cameras[p].fov_y_deg * wp).sum();
            let first = cameras[active[0].0];
            Camera::new(pick(&|c| c.position), pick(&|c| c.look_at), pick(&|c| c.up), fov, first.width, first.height)
        }
    }
}

/// Displaced texture coordinates `T_G + d` of a blended field.
pub fn blended_uvs<T: Real>(base: &[Vec2<T>], field: &TsField<T>) -> Vec<Vec2<T>> {
    base.iter().zip(&field.d).map(|(&b, &d)| b + d).collect()
}
