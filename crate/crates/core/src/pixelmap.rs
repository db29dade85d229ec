//! Dense front/back uv-space images of displacement fields.
//!
//! Pixel `(i, j)` covers uv `[i/W, (i+1)/W) x [j/H, (j+1)/H)`; its center is
//! at `((i + 0.5)/W, (j + 0.5)/H)`. Channels 0-1 hold the front `(du, dv)`,
//! channels 2-3 the back.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Source, TsField};
use crate::geom::Vec2;
use crate::mesh::{Side, TexturedMesh};
use crate::scalar::Real;
use crate::spatial::{invert_barycentric, is_inside};

pub const CHANNELS: usize = 4;
pub const DEFAULT_WIDTH: usize = 64;
const MAGIC: &[u8; 4] = b"TSPX";

#[derive(Clone, Debug, PartialEq)]
pub struct PixelImage<T> {
    pub width: usize,
    pub height: usize,
    /// Row-major, channel-interleaved, `width * height * 4` values.
    pub data: Vec<T>,
    /// Row-major `[front, back]` validity per pixel.
    pub valid: Vec<[bool; 2]>,
}

fn side_index(s: Side) -> usize {
    match s {
        Side::Front => 0,
        Side::Back => 1,
    }
}

impl<T: Real> PixelImage<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![T::zero(); width * height * CHANNELS],
            valid: vec![[false; 2]; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, side: Side) -> Vec2<T> {
        let o = (y * self.width + x) * CHANNELS + side.channel_offset();
        Vec2::new(self.data[o], self.data[o + 1])
    }

    #[inline]
    fn set(&mut self, x: usize, y: usize, side: Side, d: Vec2<T>) {
        let o = (y * self.width + x) * CHANNELS + side.channel_offset();
        self.data[o] = d.x;
        self.data[o + 1] = d.y;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize, side: Side) -> bool {
        self.valid[y * self.width + x][side_index(side)]
    }

    /// Per-value loss mask: 1 on the channels of valid sides, else 0.
    pub fn channel_mask(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.data.len()];
        for (p, v) in self.valid.iter().enumerate() {
            for (s, &ok) in v.iter().enumerate() {
                if ok {
                    m[p * CHANNELS + 2 * s] = T::one();
                    m[p * CHANNELS + 2 * s + 1] = T::one();
                }
            }
        }
        m
    }

    pub fn num_valid(&self) -> usize {
        self.valid.iter().map(|v| v[0] as usize + v[1] as usize).sum()
    }

    pub fn cast<U: Real>(&self) -> PixelImage<U> {
        PixelImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
            valid: self.valid.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4 + self.valid.len() * 2);
        out.extend_from_slice(MAGIC);
        for n in [self.width, self.height, CHANNELS] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        for v in &self.valid {
            out.push(v[0] as u8);
            out.push(v[1] as u8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], name: &str) -> Result<Self> {
        let bad = |msg: &str| Error::format(name, msg);
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("missing TSPX header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (width, height, channels) = (word(0), word(1), word(2));
        if channels != CHANNELS {
            return Err(bad(&format!("expected {CHANNELS} channels, found {channels}")));
        }
        let n = width * height;
        let expect = 16 + n * CHANNELS * 4 + n * 2;
        if bytes.len() != expect {
            return Err(bad(&format!("expected {expect} bytes, found {}", bytes.len())));
        }
        let mut data = Vec::with_capacity(n * CHANNELS);
        for c in bytes[16..16 + n * CHANNELS * 4].chunks_exact(4) {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(bad("non-finite pixel value"));
            }
            data.push(T::lit(v as f64));
        }
        let mut valid = Vec::with_capacity(n);
        for c in bytes[16 + n * CHANNELS * 4..].chunks_exact(2) {
            if c[0] > 1 || c[1] > 1 {
                return Err(bad("mask bytes must be 0 or 1"));
            }
            valid.push([c[0] == 1, c[1] == 1]);
        }
        Ok(Self { width, height, data, valid })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

/// Continuous pixel coordinate of a uv value (pixel centers at integers).
#[inline]
fn to_pixel<T: Real>(uv: Vec2<T>, w: usize, h: usize) -> (T, T) {
    let half = T::lit(0.5);
    (uv.x * T::lit(w as f64) - half, uv.y * T::lit(h as f64) - half)
}

fn vertex_sides<T: Real>(mesh: &TexturedMesh<T>) -> Result<Vec<Side>> {
    mesh.vertex_sides().ok_or(Error::MissingSideTag(0))
}

/// Pixels whose centers fall inside some uv triangle of each side.
pub fn coverage<T: Real>(mesh: &TexturedMesh<T>, width: usize, height: usize) -> Result<Vec<[bool; 2]>> {
    let tags = mesh.side_tags.as_ref().ok_or(Error::MissingSideTag(0))?;
    let mut cov = vec![[false; 2]; width * height];
    for f in 0..mesh.num_faces() {
        let tri = mesh.face_uvs(f);
        let s = side_index(tags[f]);
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &tri {
            let (px, py) = to_pixel(*p, width, height);
            x0 = x0.min(px.as_f64());
            y0 = y0.min(py.as_f64());
            x1 = x1.max(px.as_f64());
            y1 = y1.max(py.as_f64());
        }
        let xa = x0.ceil().max(0.0) as usize;
        let ya = y0.ceil().max(0.0) as usize;
        let xb = (x1.floor().min(width as f64 - 1.0)).max(-1.0);
        let yb = (y1.floor().min(height as f64 - 1.0)).max(-1.0);
        if xb < 0.0 || yb < 0.0 {
            continue;
        }
        for y in ya..=yb as usize {
            for x in xa..=xb as usize {
                let q = Vec2::new(T::lit((x as f64 + 0.5) / width as f64), T::lit((y as f64 + 0.5) / height as f64));
                if let Ok(w) = invert_barycentric(&tri, q) {
                    if is_inside(&w) {
                        cov[y * width + x][s] = true;
                    }
                }
            }
        }
    }
    Ok(cov)
}

/// Splats each vertex displacement bilinearly into its side's channels,
/// averages overlapping splats, then fills uncovered pixels inside the
/// garment's uv footprint from the nearest valid pixel.
pub fn rasterize<T: Real>(mesh: &TexturedMesh<T>, field: &TsField<T>, width: usize) -> Result<PixelImage<T>> {
    field.check_len(mesh)?;
    if let Some(tags) = &mesh.side_tags {
        if tags.len() != mesh.num_faces() {
            return Err(Error::MissingSideTag(tags.len()));
        }
    }
    let sides = vertex_sides(mesh)?;
    let height = width;
    let uvs = mesh.vertex_uvs();
    let mut used = vec![false; mesh.num_vertices()];
    for f in &mesh.faces {
        for &v in &f.v {
            used[v] = true;
        }
    }
    let mut img = PixelImage::zeros(width, height);
    let mut wsum = vec![T::zero(); width * height * 2];
    for v in 0..mesh.num_vertices() {
        if !used[v] {
            continue;
        }
        let (px, py) = to_pixel(uvs[v], width, height);
        let (fx, fy) = (px.floor(), py.floor());
        let (tx, ty) = (px - fx, py - fy);
        let s = sides[v];
        for (dx, dy, w) in [
            (0, 0, (T::one() - tx) * (T::one() - ty)),
            (1, 0, tx * (T::one() - ty)),
            (0, 1, (T::one() - tx) * ty),
            (1, 1, tx * ty),
        ] {
            let (x, y) = (fx.as_f64() as i64 + dx, fy.as_f64() as i64 + dy);
            if w <= T::zero() || x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
                continue;
            }
            let (x, y) = (x as usize, y as usize);
            let k = (y * width + x) * 2 + side_index(s);
            // running weighted mean: exact for constant inputs
            wsum[k] += w;
            let m = img.get(x, y, s);
            img.set(x, y, s, m + (field.d[v] - m) * (w / wsum[k]));
            img.valid[y * width + x][side_index(s)] = true;
        }
    }
    let cov = coverage(mesh, width, height)?;
    for side in [Side::Front, Side::Back] {
        fill_holes(&mut img, &cov, side);
    }
    Ok(img)
}

/// Multi-source breadth-first fill of covered-but-invalid pixels.
fn fill_holes<T: Real>(img: &mut PixelImage<T>, cov: &[[bool; 2]], side: Side) {
    let s = side_index(side);
    let (w, h) = (img.width, img.height);
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&p| img.valid[p][s]).collect();
    while let Some(p) = queue.pop_front() {
        let (x, y) = (p % w, p / w);
        let val = img.get(x, y, side);
        let mut nbrs = [None; 4];
        if x > 0 {
            nbrs[0] = Some(p - 1);
        }
        if x + 1 < w {
            nbrs[1] = Some(p + 1);
        }
        if y > 0 {
            nbrs[2] = Some(p - w);
        }
        if y + 1 < h {
            nbrs[3] = Some(p + w);
        }
        for q in nbrs.into_iter().flatten() {
            if cov[q][s] && !img.valid[q][s] {
                img.set(q % w, q / w, side, val);
                img.valid[q][s] = true;
                queue.push_back(q);
            }
        }
    }
}

#[inline]
fn lerp<T: Real>(a: Vec2<T>, b: Vec2<T>, t: T) -> Vec2<T> {
    a + (b - a) * t
}

/// Bilinear sample of each vertex's side channels. Invalid taps take the
/// value of a valid tap (same row first, then same column, then diagonal);
/// vertices with no valid tap get zero and are counted in the returned
/// warning total. Every vertex is tagged `Extrapolated`.
pub fn sample<T: Real>(image: &PixelImage<T>, mesh: &TexturedMesh<T>) -> Result<(TsField<T>, usize)> {
    let sides = vertex_sides(mesh)?;
    let uvs = mesh.vertex_uvs();
    let (w, h) = (image.width, image.height);
    let mut field = TsField::uniform(mesh.num_vertices(), Vec2::zero(), Source::Extrapolated);
    let mut warnings = 0;
    for v in 0..mesh.num_vertices() {
        let (px, py) = to_pixel(uvs[v], w, h);
        let px = px.max(T::zero()).min(T::lit((w - 1) as f64));
        let py = py.max(T::zero()).min(T::lit((h - 1) as f64));
        let (x0, y0) = (px.floor().as_f64() as usize, py.floor().as_f64() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (tx, ty) = (px - T::lit(x0 as f64), py - T::lit(y0 as f64));
        let s = sides[v];
        let taps = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)];
        let ok: Vec<bool> = taps.iter().map(|&(x, y)| image.is_valid(x, y, s)).collect();
        if !ok.iter().any(|&b| b) {
            warnings += 1;
            continue;
        }
        // substitution order per tap: row partner, column partner, diagonal
        let partner = [[1, 2, 3], [0, 3, 2], [3, 0, 1], [2, 1, 0]];
        let vals: Vec<Vec2<T>> = (0..4)
            .map(|i| {
                let j = std::iter::once(i).chain(partner[i]).find(|&j| ok[j]).unwrap();
                image.get(taps[j].0, taps[j].1, s)
            })
            .collect();
        field.d[v] = lerp(lerp(vals[0], vals[1], tx), lerp(vals[2], vals[3], tx), ty);
    }
    Ok((field, warnings))
}
