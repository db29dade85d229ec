//! Evaluation: per-pixel texture-coordinate error, SqrtMSE, dataset
//! statistics, edge extrema over a set of fields, and error breakdown by the
//! provenance of the displacements.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::field::{Source, TsField};
use crate::geom::{Vec2, Vec3};
use crate::mesh::TexturedMesh;
use crate::scalar::Real;
use crate::scene::TracedMesh;
use crate::spatial::Hit;
use crate::tsgen::unique_edges;

/// Errors at or above this value map to pure red in error images.
pub const ERROR_CLAMP: f64 = 0.04;
pub const DEFAULT_RESOLUTION: u32 = 256;

/// First hit of every pixel-center ray, row-major.
#[derive(Clone, Debug)]
pub struct PixelHits<T> {
    pub width: u32,
    pub height: u32,
    pub hits: Vec<Option<Hit<T>>>,
}

pub fn cast_pixels<T: Real>(scene: &TracedMesh<T>, cam: &Camera<T>) -> PixelHits<T> {
    let rays = cam.pixel_center_rays();
    let hits = rays.par_iter().map(|r| scene.first_hit(r)).collect();
    PixelHits { width: cam.width, height: cam.height, hits }
}

/// Texture coordinate at a hit, optionally displaced by a per-vertex field.
#[inline]
pub fn uv_at<T: Real>(mesh: &TexturedMesh<T>, field: Option<&TsField<T>>, hit: &Hit<T>) -> Vec2<T> {
    let f = &mesh.faces[hit.face];
    let mut uv = Vec2::zero();
    for k in 0..3 {
        let mut c = mesh.uvs[f.t[k]];
        if let Some(field) = field {
            c += field.d[f.v[k]];
        }
        uv += c * hit.weights[k];
    }
    uv
}

/// Scalar image with a validity mask. `face` records the hit face of the
/// second (test) mesh for provenance breakdowns.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorImage<T> {
    pub width: u32,
    pub height: u32,
    pub error: Vec<T>,
    pub valid: Vec<bool>,
    pub face: Vec<Option<usize>>,
}

impl<T: Real> ErrorImage<T> {
    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// One side of a comparison: a mesh, an optional displacement field on it,
/// and its pixel hits from the camera.
#[derive(Clone, Copy)]
pub struct Textured<'a, T> {
    pub mesh: &'a TexturedMesh<T>,
    pub field: Option<&'a TsField<T>>,
    pub hits: &'a PixelHits<T>,
}

/// `|uv_a(hit_a) - uv_b(hit_b)|` wherever both pixel rays hit.
pub fn uv_error_image<T: Real>(a: Textured<'_, T>, b: Textured<'_, T>) -> Result<ErrorImage<T>> {
    if a.hits.hits.len() != b.hits.hits.len() || a.hits.width != b.hits.width {
        return Err(Error::Shape("pixel hit grids differ".into()));
    }
    for side in [&a, &b] {
        if let Some(f) = side.field {
            f.check_len(side.mesh)?;
        }
    }
    let n = a.hits.hits.len();
    let mut img = ErrorImage {
        width: a.hits.width,
        height: a.hits.height,
        error: vec![T::zero(); n],
        valid: vec![false; n],
        face: vec![None; n],
    };
    for i in 0..n {
        if let (Some(ha), Some(hb)) = (&a.hits.hits[i], &b.hits.hits[i]) {
            img.error[i] = (uv_at(a.mesh, a.field, ha) - uv_at(b.mesh, b.field, hb)).norm();
            img.valid[i] = true;
            img.face[i] = Some(hb.face);
        }
    }
    Ok(img)
}

/// Per-pixel texture-coordinate error between `gt` and `test` seen from `cam`.
pub fn pixel_error_image<T: Real>(gt: &TracedMesh<T>, test: &TracedMesh<T>, cam: &Camera<T>) -> ErrorImage<T> {
    let ha = cast_pixels(gt, cam);
    let hb = cast_pixels(test, cam);
    uv_error_image(
        Textured { mesh: &gt.mesh, field: None, hits: &ha },
        Textured { mesh: &test.mesh, field: None, hits: &hb },
    )
    .expect("same camera")
}

/// Root mean square of the valid pixels.
pub fn sqrt_mse<T: Real>(img: &ErrorImage<T>) -> Result<T> {
    rms(img.error.iter().zip(&img.valid).filter(|(_, &v)| v).map(|(&e, _)| e))
}

fn rms<T: Real>(values: impl Iterator<Item = T>) -> Result<T> {
    let (mut sum, mut n) = (T::zero(), 0usize);
    for e in values {
        sum += e * e;
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok((sum / T::lit(n as f64)).sqrt())
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats<T> {
    pub mean: T,
    pub std: T,
    pub n: usize,
}

pub fn dataset_stats<T: Real>(values: &[T]) -> Result<Stats<T>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewValues { need: 2, got: n });
    }
    let mean = values.iter().copied().sum::<T>() / T::lit(n as f64);
    let ss: T = values.iter().map(|&x| (x - mean) * (x - mean)).sum();
    Ok(Stats { mean, std: (ss / T::lit((n - 1) as f64)).sqrt(), n })
}

/// Where an extreme value occurred.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum<T> {
    pub value: T,
    pub pose: u64,
    pub camera: usize,
    /// Edge endpoints, or `(v, v)` for a vertex quantity.
    pub at: (usize, usize),
}

/// Largest values over a set of fields; `None` when nothing qualified.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ExtremaReport<T> {
    /// `|T_N(a) - T_N(b)|` over edges with both ends assigned.
    pub texcoord_edge: Option<Extremum<T>>,
    /// `|d(a) - d(b)|` over edges with both ends assigned.
    pub displacement_edge: Option<Extremum<T>>,
    /// `|d(v)|` over assigned vertices.
    pub displacement_vertex: Option<Extremum<T>>,
    /// Distance between the ground-truth hit points of an edge's ends.
    pub hit_edge: Option<Extremum<T>>,
}

/// One `(pose, camera)` field for [`edge_extrema`].
#[derive(Clone, Copy)]
pub struct FieldRecord<'a, T> {
    pub pose: u64,
    pub camera: usize,
    pub field: &'a TsField<T>,
    pub hits: Option<&'a [Option<Vec3<T>>]>,
}

fn offer<T: Real>(slot: &mut Option<Extremum<T>>, value: T, pose: u64, camera: usize, at: (usize, usize)) {
    if slot.map_or(true, |e| value > e.value) {
        *slot = Some(Extremum { value, pose, camera, at });
    }
}

/// Global maxima over every edge and vertex of every record. Ties keep the
/// first occurrence in record order, then edge order `(a, b)` ascending.
pub fn edge_extrema<T: Real>(mesh: &TexturedMesh<T>, records: &[FieldRecord<'_, T>]) -> Result<ExtremaReport<T>> {
    let edges = unique_edges(mesh);
    let base = mesh.vertex_uvs();
    let mut rep = ExtremaReport::default();
    for r in records {
        r.field.check_len(mesh)?;
        let f = r.field;
        for v in 0..f.len() {
            if f.is_assigned(v) {
                offer(&mut rep.displacement_vertex, f.d[v].norm(), r.pose, r.camera, (v, v));
            }
        }
        for &(a, b) in &edges {
            if f.is_assigned(a) && f.is_assigned(b) {
                let tn = (base[a] + f.d[a]) - (base[b] + f.d[b]);
                offer(&mut rep.texcoord_edge, tn.norm(), r.pose, r.camera, (a, b));
                offer(&mut rep.displacement_edge, (f.d[a] - f.d[b]).norm(), r.pose, r.camera, (a, b));
            }
            if let Some(h) = r.hits {
                if let (Some(pa), Some(pb)) = (h[a], h[b]) {
                    offer(&mut rep.hit_edge, (pa - pb).norm(), r.pose, r.camera, (a, b));
                }
            }
        }
    }
    Ok(rep)
}

/// Largest `|T_N(a) - T_N(b)|` and `|d(a) - d(b)|` over edges whose ends are
/// both assigned.
pub fn field_edge_maxima<T: Real>(mesh: &TexturedMesh<T>, field: &TsField<T>) -> Result<(T, T)> {
    let rep = edge_extrema(mesh, &[FieldRecord { pose: 0, camera: 0, field, hits: None }])?;
    Ok((rep.texcoord_edge.map_or(T::zero(), |e| e.value), rep.displacement_edge.map_or(T::zero(), |e| e.value)))
}

/// Provenance class of a pixel, from the corners of the face it shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PixelClass {
    Ray,
    Extrapolated,
    Combination,
}

pub fn classify_face<T: Real>(mesh: &TexturedMesh<T>, sources: &[Source], face: usize) -> PixelClass {
    let rays = mesh.faces[face].v.iter().filter(|&&v| sources[v] == Source::Ray).count();
    match rays {
        3 => PixelClass::Ray,
        0 => PixelClass::Extrapolated,
        _ => PixelClass::Combination,
    }
}

/// SqrtMSE per provenance class; a class without pixels is `None`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Breakdown<T> {
    pub ray: Option<T>,
    pub extrapolated: Option<T>,
    pub combination: Option<T>,
}

/// Splits the valid pixels of `img` by the sources of the corners of the
/// test-mesh face each pixel shows.
pub fn error_breakdown<T: Real>(
    img: &ErrorImage<T>,
    mesh: &TexturedMesh<T>,
    sources: &[Source],
) -> Result<Breakdown<T>> {
    if sources.len() != mesh.num_vertices() {
        return Err(Error::Shape(format!("{} source tags for {} vertices", sources.len(), mesh.num_vertices())));
    }
    let class_rms = |class: PixelClass| {
        rms((0..img.error.len()).filter_map(|i| match img.face[i] {
            Some(f) if img.valid[i] && classify_face(mesh, sources, f) == class => Some(img.error[i]),
            _ => None,
        }))
        .ok()
    };
    Ok(Breakdown {
        ray: class_rms(PixelClass::Ray),
        extrapolated: class_rms(PixelClass::Extrapolated),
        combination: class_rms(PixelClass::Combination),
    })
}

/// Binary PPM (P6) with errors mapped linearly from blue (0) to red
/// (`clamp` and above); invalid pixels are black.
pub fn error_ppm<T: Real>(img: &ErrorImage<T>, clamp: f64) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for (e, &v) in img.error.iter().zip(&img.valid) {
        if !v {
            out.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        let t = (e.as_f64() / clamp).clamp(0.0, 1.0);
        let r = (255.0 * t).round() as u8;
        out.extend_from_slice(&[r, 0, 255 - r]);
    }
    out
}

/// RGB pixels of a binary PPM.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ppm {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Ppm {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    /// Parses a P6 file with maxval 255 and no comments.
    pub fn from_bytes(bytes: &[u8], name: &str) -> Result<Self> {
        let mut fields = Vec::new();
        let mut i = 0;
        while fields.len() < 4 {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            let s = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if s == i {
                return Err(Error::format(name, "truncated PPM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[s..i]).into_owned());
        }
        i += 1;
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(Error::format(name, "expected a P6 PPM with maxval 255"));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|_| Error::format(name, format!("bad PPM dimension `{s}`")));
        let (width, height) = (dim(&fields[1])?, dim(&fields[2])?);
        let rgb = bytes.get(i..).unwrap_or(&[]).to_vec();
        if rgb.len() != 3 * width * height {
            return Err(Error::format(name, format!("PPM has {} data bytes, want {}", rgb.len(), 3 * width * height)));
        }
        Ok(Self { width, height, rgb })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

/// One row of a per-image statistics file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageRow {
    pub pose: u64,
    pub camera: usize,
    pub sqrt_mse: f64,
}

pub fn rows_csv(rows: &[ImageRow]) -> String {
    let mut s = String::from("pose_id,camera_id,sqrt_mse\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.pose, r.camera, r.sqrt_mse);
    }
    s
}

pub fn parse_rows_csv(text: &str, name: &str) -> Result<Vec<ImageRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("pose_id,camera_id,sqrt_mse") {
        return Err(Error::format(name, "missing `pose_id,camera_id,sqrt_mse` header"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let bad = || Error::Parse { path: name.into(), line: i + 2, msg: format!("bad row `{l}`") };
            let mut it = l.split(',');
            let row = ImageRow {
                pose: it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?,
                camera: it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?,
                sqrt_mse: it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?,
            };
            if it.next().is_some() {
                return Err(bad());
            }
            Ok(row)
        })
        .collect()
}

/// `method,mean,std,n` table of dataset statistics.
pub fn stats_csv(rows: &[(String, Stats<f64>)]) -> String {
    let mut s = String::from("method,mean,std,n\n");
    for (m, st) in rows {
        let _ = writeln!(s, "{m},{},{},{}", st.mean, st.std, st.n);
    }
    s
}
