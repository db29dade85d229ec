use super::ray::Ray;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Systems with a larger eigenvalue ratio are rejected as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangulation<T> {
    pub point: Vec3<T>,
    /// Root of the minimized sum of squared point-to-ray distances.
    pub residual: T,
}

/// Point minimizing the summed squared distance to all rays.
///
/// Solves `sum(I - d d^T) x = sum(I - d d^T) o` (rays need unit directions).
pub fn triangulate_point<T: Real>(rays: &[Ray<T>]) -> Result<Triangulation<T>> {
    if rays.len() < 2 {
        return Err(Error::TooFewRays { need: 2, got: rays.len() });
    }
    let mut a = [[T::zero(); 3]; 3];
    let mut b = [T::zero(); 3];
    for r in rays {
        let d = r.dir.to_array();
        let o = r.origin.to_array();
        for i in 0..3 {
            for j in 0..3 {
                let p = if i == j { T::one() } else { T::zero() } - d[i] * d[j];
                a[i][j] += p;
                b[i] += p * o[j];
            }
        }
    }
    let eig = symmetric_eigenvalues(a);
    let (lo, hi) = (eig[0].abs(), eig[2].abs());
    let condition = if lo > T::zero() { (hi / lo).as_f64() } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let x = solve3(a, b).ok_or(Error::SingularSystem { condition })?;
    let point = Vec3::from_array(x);
    let mut sum = T::zero();
    for r in rays {
        let v = point - r.origin;
        let perp = v - r.dir * v.dot(r.dir);
        sum += perp.norm_squared();
    }
    Ok(Triangulation { point, residual: sum.sqrt() })
}

/// Gaussian elimination with partial pivoting.
fn solve3<T: Real>(mut a: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col] == T::zero() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations,
/// ascending.
fn symmetric_eigenvalues<T: Real>(mut a: [[T; 3]; 3]) -> [T; 3] {
    for _ in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= T::epsilon() * T::epsilon() * diag {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = (t * t + T::one()).sqrt().recip();
            let s = t * c;
            // A <- J^T A J
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    let mut e = [a[0][0], a[1][1], a[2][2]];
    e.sort_by(|x, y| x.partial_cmp(y).unwrap());
    e
}
