//! Pinhole cameras.
//!
//! Frame convention: right-handed, `forward = normalize(look_at - position)`,
//! `right = normalize(forward x up)`, `up' = right x forward`. Image origin is
//! the top-left corner with x to the right and y downward; pixel `(i, j)`
//! covers `[i, i+1) x [j, j+1)` so its center is at `(i + 0.5, j + 0.5)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};
use crate::scalar::Real;
use crate::spatial::Ray;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera<T> {
    pub position: Vec3<T>,
    pub look_at: Vec3<T>,
    pub up: Vec3<T>,
    pub fov_y_deg: T,
    pub width: u32,
    pub height: u32,
}

/// Result of projecting a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection<T> {
    /// Image coordinates; `None` when the point is behind the camera.
    pub pixel: Option<Vec2<T>>,
    /// Signed distance along the viewing axis.
    pub depth: T,
    pub behind: bool,
}

/// Unit direction from the scene center toward a camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewDescriptor<T> {
    pub direction: Vec3<T>,
}

#[derive(Clone, Copy, Debug)]
struct Frame<T> {
    forward: Vec3<T>,
    right: Vec3<T>,
    up: Vec3<T>,
    focal: T,
}

impl<T: Real> Camera<T> {
    pub fn new(
        position: Vec3<T>,
        look_at: Vec3<T>,
        up: Vec3<T>,
        fov_y_deg: T,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let cam = Self { position, look_at, up, fov_y_deg, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_y_deg > T::zero() && self.fov_y_deg < T::lit(180.0)) {
            return Err(Error::InvalidCamera(format!("fov_y {} outside (0, 180)", self.fov_y_deg)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image size must be at least 1x1".into()));
        }
        let fwd = (self.look_at - self.position)
            .normalized()
            .ok_or_else(|| Error::InvalidCamera("look_at coincides with position".into()))?;
        let up = self.up.normalized().ok_or_else(|| Error::InvalidCamera("zero up vector".into()))?;
        if fwd.cross(up).norm() < T::lit(1e-9) {
            return Err(Error::InvalidCamera("up is parallel to the viewing direction".into()));
        }
        Ok(())
    }

    fn frame(&self) -> Frame<T> {
        let forward = (self.look_at - self.position).normalized().expect("validated camera");
        let right = forward.cross(self.up).normalized().expect("validated camera");
        let up = right.cross(forward);
        let half_fov = (self.fov_y_deg * T::lit(0.5)).to_radians();
        let focal = T::lit(self.height as f64 * 0.5) / half_fov.tan();
        Frame { forward, right, up, focal }
    }

    fn center(&self) -> Vec2<T> {
        Vec2::new(T::lit(self.width as f64 * 0.5), T::lit(self.height as f64 * 0.5))
    }

    /// Perspective projection of `point`.
    pub fn project(&self, point: Vec3<T>) -> Result<Projection<T>> {
        let d = point - self.position;
        if d.norm() <= T::epsilon() * (T::one() + self.position.norm()) {
            return Err(Error::AtAperture);
        }
        let fr = self.frame();
        let depth = d.dot(fr.forward);
        if depth <= T::zero() {
            return Ok(Projection { pixel: None, depth, behind: true });
        }
        let c = self.center();
        let px = c.x + fr.focal * d.dot(fr.right) / depth;
        let py = c.y - fr.focal * d.dot(fr.up) / depth;
        Ok(Projection { pixel: Some(Vec2::new(px, py)), depth, behind: false })
    }

    /// True if `point` is in front of the camera and projects inside the image.
    pub fn in_frustum(&self, point: Vec3<T>) -> bool {
        match self.project(point) {
            Ok(Projection { pixel: Some(p), .. }) => {
                p.x >= T::zero()
                    && p.y >= T::zero()
                    && p.x <= T::lit(self.width as f64)
                    && p.y <= T::lit(self.height as f64)
            }
            _ => false,
        }
    }

    /// Ray from the aperture through `vertex`.
    pub fn vertex_ray(&self, vertex: Vec3<T>) -> Result<Ray<T>> {
        let dir = (vertex - self.position).normalized().ok_or(Error::AtAperture)?;
        if (vertex - self.position).norm() <= T::epsilon() * (T::one() + self.position.norm()) {
            return Err(Error::AtAperture);
        }
        Ok(Ray::new(self.position, dir))
    }

    /// Ray from the aperture through image position `pixel`.
    pub fn pixel_ray(&self, pixel: Vec2<T>) -> Ray<T> {
        let fr = self.frame();
        let c = self.center();
        let dir = fr.forward + fr.right * ((pixel.x - c.x) / fr.focal) - fr.up * ((pixel.y - c.y) / fr.focal);
        Ray::new(self.position, dir.normalized().expect("finite pixel"))
    }

    /// Rays through every pixel center, row-major.
    pub fn pixel_center_rays(&self) -> Vec<Ray<T>> {
        let fr = self.frame();
        let c = self.center();
        let half = T::lit(0.5);
        let mut out = Vec::with_capacity((self.width * self.height) as usize);
        for j in 0..self.height {
            for i in 0..self.width {
                let px = T::lit(i as f64) + half;
                let py = T::lit(j as f64) + half;
                let dir = fr.forward + fr.right * ((px - c.x) / fr.focal) - fr.up * ((py - c.y) / fr.focal);
                out.push(Ray::new(self.position, dir.normalized().expect("finite pixel")));
            }
        }
        out
    }

    pub fn view_descriptor(&self, scene_center: Vec3<T>) -> Result<ViewDescriptor<T>> {
        let direction = (self.position - scene_center)
            .normalized()
            .ok_or_else(|| Error::Invalid("camera position coincides with scene center".into()))?;
        Ok(ViewDescriptor { direction })
    }

    pub fn to_record(&self) -> CameraRecord {
        CameraRecord {
            position: self.position.cast::<f64>().to_array(),
            look_at: self.look_at.cast::<f64>().to_array(),
            up: self.up.cast::<f64>().to_array(),
            fov_y_deg: self.fov_y_deg.as_f64(),
            width: self.width,
            height: self.height,
        }
    }

    pub fn from_record(r: &CameraRecord) -> Result<Self> {
        let v = |a: [f64; 3]| Vec3::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]));
        Self::new(v(r.position), v(r.look_at), v(r.up), T::lit(r.fov_y_deg), r.width, r.height)
    }

    /// Same camera with a different image resolution.
    pub fn with_resolution(&self, width: u32, height: u32) -> Self {
        Self { width, height, ..*self }
    }
}

/// JSON form of a camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    pub fov_y_deg: f64,
    pub width: u32,
    pub height: u32,
}

/// How the cameras of an array are arranged for view interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "lowercase")]
pub enum ArrayLayout {
    /// Cameras evenly spaced along a line, parameter in `[0, 1]`.
    Line,
    /// `rows x cols` cameras in row-major order, parameter in `[0, 1]^2`.
    Grid { rows: usize, cols: usize },
    /// Consecutive cameras along a polyline, arc-length parameter in `[0, 1]`.
    Path,
}

/// Ordered camera list plus its layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraArray {
    #[serde(flatten)]
    pub layout: ArrayLayout,
    pub cameras: Vec<CameraRecord>,
}

impl CameraArray {
    pub fn cameras<T: Real>(&self) -> Result<Vec<Camera<T>>> {
        self.cameras.iter().map(Camera::from_record).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let arr: Self = serde_json::from_str(&text).map_err(|e| Error::format(path.display(), e.to_string()))?;
        arr.validate()?;
        Ok(arr)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::Invalid("camera array is empty".into()));
        }
        if let ArrayLayout::Grid { rows, cols } = self.layout {
            if rows < 2 || cols < 2 || rows * cols != self.cameras.len() {
                return Err(Error::Invalid(format!(
                    "grid {rows}x{cols} does not match {} cameras",
                    self.cameras.len()
                )));
            }
        }
        for c in &self.cameras {
            Camera::<f64>::from_record(c)?;
        }
        Ok(())
    }
}
