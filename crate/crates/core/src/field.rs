//! Per-vertex texture-coordinate displacement fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::mesh::TexturedMesh;
use crate::scalar::Real;

/// Where a vertex's displacement came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "ray")]
    Ray,
    #[serde(rename = "ext")]
    Extrapolated,
    #[serde(rename = "un")]
    Unassigned,
}

/// Displacements `d = T_N - T_G`, one per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct TsField<T> {
    pub d: Vec<Vec2<T>>,
    pub source: Vec<Source>,
}

#[derive(Serialize, Deserialize)]
struct FieldRecord {
    version: u32,
    n_vertices: usize,
    assigned: Vec<u8>,
    source: Vec<Source>,
    d: Vec<[f64; 2]>,
}

impl<T: Real> TsField<T> {
    pub fn unassigned(n: usize) -> Self {
        Self { d: vec![Vec2::zero(); n], source: vec![Source::Unassigned; n] }
    }

    /// Every vertex valued with `d`, tagged `source`.
    pub fn uniform(n: usize, d: Vec2<T>, source: Source) -> Self {
        Self { d: vec![d; n], source: vec![source; n] }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// A vertex is assigned when it carries a value (ray or extrapolated).
    #[inline]
    pub fn is_assigned(&self, v: usize) -> bool {
        self.source[v] != Source::Unassigned
    }

    pub fn assigned_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|v| self.is_assigned(v)).collect()
    }

    pub fn count(&self, s: Source) -> usize {
        self.source.iter().filter(|&&x| x == s).count()
    }

    pub fn unassign(&mut self, v: usize) {
        self.d[v] = Vec2::zero();
        self.source[v] = Source::Unassigned;
    }

    /// Displaced texture coordinates `T_N = T_G + d` per vertex.
    pub fn displaced_uvs(&self, mesh: &TexturedMesh<T>) -> Vec<Vec2<T>> {
        mesh.vertex_uvs().into_iter().zip(&self.d).map(|(t, &d)| t + d).collect()
    }

    pub fn check_len(&self, mesh: &TexturedMesh<T>) -> Result<()> {
        if self.len() == mesh.num_vertices() {
            Ok(())
        } else {
            Err(Error::ConnectivityMismatch(format!(
                "field has {} vertices, mesh has {}",
                self.len(),
                mesh.num_vertices()
            )))
        }
    }

    pub fn cast<U: Real>(&self) -> TsField<U> {
        TsField { d: self.d.iter().map(|v| v.cast()).collect(), source: self.source.clone() }
    }

    pub fn to_json(&self) -> String {
        let rec = FieldRecord {
            version: 1,
            n_vertices: self.len(),
            assigned: (0..self.len()).map(|v| self.is_assigned(v) as u8).collect(),
            source: self.source.clone(),
            d: self.d.iter().map(|v| [v.x.as_f64(), v.y.as_f64()]).collect(),
        };
        serde_json::to_string(&rec).expect("field serializes")
    }

    pub fn from_json(text: &str, name: &str) -> Result<Self> {
        let rec: FieldRecord = serde_json::from_str(text).map_err(|e| Error::format(name, e.to_string()))?;
        if rec.version != 1 {
            return Err(Error::format(name, format!("unsupported version {}", rec.version)));
        }
        let n = rec.n_vertices;
        if rec.assigned.len() != n || rec.source.len() != n || rec.d.len() != n {
            return Err(Error::format(name, format!("array lengths disagree with n_vertices {n}")));
        }
        let mut d = Vec::with_capacity(n);
        for (i, (&a, (&s, p))) in rec.assigned.iter().zip(rec.source.iter().zip(&rec.d)).enumerate() {
            if a > 1 || (a == 1) != (s != Source::Unassigned) {
                return Err(Error::format(name, format!("vertex {i}: assigned flag {a} contradicts source")));
            }
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::format(name, format!("vertex {i}: non-finite displacement")));
            }
            if s == Source::Unassigned && (p[0] != 0.0 || p[1] != 0.0) {
                return Err(Error::format(name, format!("vertex {i}: unassigned with nonzero displacement")));
            }
            d.push(Vec2::new(T::lit(p[0]), T::lit(p[1])));
        }
        Ok(Self { d, source: rec.source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
