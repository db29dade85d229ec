use super::TexturedMesh;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-face membrane energies split into stretching and squashing parts.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport<T> {
    pub per_face_compression: Vec<T>,
    pub per_face_extension: Vec<T>,
}

impl<T: Real> EnergyReport<T> {
    pub fn total_compression(&self) -> T {
        self.per_face_compression.iter().copied().sum()
    }

    pub fn total_extension(&self) -> T {
        self.per_face_extension.iter().copied().sum()
    }
}

/// Singular-value membrane energy of `mesh` relative to `rest`.
///
/// For each face the deformation gradient `F` (3x2) maps the rest triangle's
/// in-plane edge matrix onto the deformed 3D edges. With singular values
/// `s1, s2` and rest area `A`:
/// extension `= A * sum(max(s - 1, 0)^2)`, compression `= A * sum(min(s - 1, 0)^2)`.
pub fn deformation_energy<T: Real>(mesh: &TexturedMesh<T>, rest: &TexturedMesh<T>) -> Result<EnergyReport<T>> {
    mesh.check_same_connectivity(rest)?;
    let n = mesh.num_faces();
    let mut report =
        EnergyReport { per_face_compression: Vec::with_capacity(n), per_face_extension: Vec::with_capacity(n) };
    let one = T::one();
    let half = T::lit(0.5);
    for f in 0..n {
        let [r0, r1, r2] = rest.face_positions(f);
        let e1 = r1 - r0;
        let e2 = r2 - r0;
        let normal = e1.cross(e2);
        let twice_area = normal.norm();
        let len1 = e1.norm();
        if !(twice_area > T::zero()) || !(len1 > T::zero()) {
            return Err(Error::DegenerateFace { face: f, what: "zero rest area" });
        }
        // rest triangle in its own orthonormal frame: e1 -> (a, 0), e2 -> (b, c)
        let b1 = e1 * len1.recip();
        let b2 = normal.cross(b1) * twice_area.recip();
        let (a, b, c) = (len1, e2.dot(b1), e2.dot(b2));
        // Dr = [[a, b], [0, c]], inverse = [[1/a, -b/(a c)], [0, 1/c]]
        let [x0, x1, x2] = mesh.face_positions(f);
        let d1 = x1 - x0;
        let d2 = x2 - x0;
        let f1 = d1 * a.recip();
        let f2 = d2 * c.recip() - d1 * (b / (a * c));
        // C = F^T F
        let c11 = f1.dot(f1);
        let c12 = f1.dot(f2);
        let c22 = f2.dot(f2);
        let tr = c11 + c22;
        let det = c11 * c22 - c12 * c12;
        let disc = (tr * tr * T::lit(0.25) - det).max(T::zero()).sqrt();
        let l1 = (tr * half + disc).max(T::zero());
        let l2 = (tr * half - disc).max(T::zero());
        let area = twice_area * half;
        let (mut ext, mut comp) = (T::zero(), T::zero());
        for s in [l1.sqrt(), l2.sqrt()] {
            let g = s - one;
            if g > T::zero() {
                ext += g * g;
            } else {
                comp += g * g;
            }
        }
        report.per_face_extension.push(area * ext);
        report.per_face_compression.push(area * comp);
    }
    Ok(report)
}
