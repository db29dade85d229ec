//! Synthetic wrinkled-cloth oracle.
//!
//! The rest state is a flat unit sheet in the `y = 0` plane with a second,
//! back-facing layer just below it. A pose is a sum of `K` plane-wave
//! wrinkles; the ground truth displaces the sheet along `y` and slightly in
//! plane, and the "inferred" mesh is an over-smoothed copy of it. Both keep
//! the rest texture coordinates, so they differ only in positions.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{ArrayLayout, CameraArray, CameraRecord};
use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};
use crate::mesh::{load_obj, save_obj, Face, Pose, Side, TexturedMesh, Topology};
use crate::scalar::Real;

/// Offset of the back layer below the front one.
pub const BACK_THICKNESS: f64 = 0.01;
/// Umbrella weight used for over-smoothing.
pub const SMOOTH_LAMBDA: f64 = 0.5;

const AMPLITUDE: (f64, f64) = (0.005, 0.02);
const FREQUENCY: (f64, f64) = (1.0, 5.0);

/// Generator settings; defaults describe the standard suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub resolution: usize,
    pub wrinkles: usize,
    pub smoothing: usize,
    pub poses: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { resolution: 65, wrinkles: 4, smoothing: 30, poses: 200, seed: 0 }
    }
}

/// One plane-wave wrinkle `a sin(2 pi f (u cos phi + v sin phi) + psi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrinkle {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub direction: f64,
}

impl Wrinkle {
    /// Height and its `(u, v)` gradient.
    fn eval(&self, u: f64, v: f64) -> (f64, f64, f64) {
        let (s, c) = self.direction.sin_cos();
        let k = 2.0 * PI * self.frequency;
        let arg = k * (u * c + v * s) + self.phase;
        let h = self.amplitude * arg.sin();
        let g = self.amplitude * k * arg.cos();
        (h, g * c, g * s)
    }
}

/// Wrinkles encoded in a pose, four parameters each; a trailing partial
/// group (the zero pad of an empty pose) is ignored.
pub fn wrinkles_of<T: Real>(pose: &Pose<T>) -> Vec<Wrinkle> {
    pose.params
        .chunks_exact(4)
        .map(|c| Wrinkle {
            amplitude: c[0].as_f64(),
            frequency: c[1].as_f64(),
            phase: c[2].as_f64(),
            direction: c[3].as_f64(),
        })
        .collect()
}

/// Height field of a wrinkle set and its gradient at `(u, v)`.
pub fn height(wrinkles: &[Wrinkle], u: f64, v: f64) -> (f64, f64, f64) {
    wrinkles.iter().fold((0.0, 0.0, 0.0), |(h, gu, gv), w| {
        let (a, b, c) = w.eval(u, v);
        (h + a, gu + b, gv + c)
    })
}

/// Flat `n x n` two-layer unit sheet. Front vertices come first, then the
/// back layer at `y = -BACK_THICKNESS` with reversed winding; both layers use
/// uv `(x, z)`.
pub fn gen_rest<T: Real>(n: usize) -> Result<TexturedMesh<T>> {
    if n < 2 {
        return Err(Error::Invalid(format!("sheet resolution must be at least 2, got {n}")));
    }
    let nv = n * n;
    let mut vertices = Vec::with_capacity(2 * nv);
    let mut uvs = Vec::with_capacity(2 * nv);
    for layer in 0..2 {
        let y = if layer == 0 { 0.0 } else { -BACK_THICKNESS };
        for j in 0..n {
            for i in 0..n {
                let u = i as f64 / (n - 1) as f64;
                let v = j as f64 / (n - 1) as f64;
                vertices.push(Vec3::new(T::lit(u), T::lit(y), T::lit(v)));
                uvs.push(Vec2::new(T::lit(u), T::lit(v)));
            }
        }
    }
    let mut faces = Vec::with_capacity(4 * (n - 1) * (n - 1));
    let mut tags = Vec::with_capacity(faces.capacity());
    for (layer, side) in [(0, Side::Front), (1, Side::Back)] {
        let o = layer * nv;
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let a = o + j * n + i;
                // front normals point to +y
                let tris = [[a, a + n + 1, a + 1], [a, a + n, a + n + 1]];
                for mut t in tris {
                    if side == Side::Back {
                        t.swap(1, 2);
                    }
                    faces.push(Face::shared(t));
                    tags.push(side);
                }
            }
        }
    }
    TexturedMesh::new(vertices, uvs, faces, Some(tags))
}

/// Random wrinkle parameters: `(amplitude, frequency, phase, direction)` per
/// wrinkle, or a single zero when `k = 0`.
pub fn gen_pose(seed: u64, k: usize) -> Pose<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(4 * k.max(1));
    for _ in 0..k {
        params.push(rng.gen_range(AMPLITUDE.0..AMPLITUDE.1));
        params.push(rng.gen_range(FREQUENCY.0..FREQUENCY.1));
        params.push(rng.gen_range(0.0..2.0 * PI));
        params.push(rng.gen_range(0.0..PI));
    }
    if k == 0 {
        params.push(0.0);
    }
    Pose { id: seed, params }
}

/// Wrinkled ground truth. Every vertex rises by the height field at its
/// material coordinates and shifts in plane by `-h grad(h) / 2`, which pulls
/// material toward crests and troughs roughly as much as the bending
/// lengthens it. Texture coordinates are unchanged.
pub fn gen_ground_truth<T: Real>(rest: &TexturedMesh<T>, pose: &Pose<T>) -> TexturedMesh<T> {
    let ws = wrinkles_of(pose);
    let vertices = rest
        .vertices
        .iter()
        .map(|p| {
            let (u, v) = (p.x.as_f64(), p.z.as_f64());
            let (h, gu, gv) = height(&ws, u, v);
            Vec3::new(T::lit(u - 0.5 * h * gu), p.y + T::lit(h), T::lit(v - 0.5 * h * gv))
        })
        .collect();
    rest.with_positions(vertices)
}

/// Over-smoothed stand-in for a network prediction: `m` umbrella steps with
/// weight 1/2. Boundary vertices only move along `y`, so the outline of the
/// sheet stays put while its heights are smoothed everywhere.
pub fn gen_inferred<T: Real>(gt: &TexturedMesh<T>, m: usize) -> TexturedMesh<T> {
    if m == 0 {
        return gt.clone();
    }
    let topo = Topology::build(gt);
    let lambda = T::lit(SMOOTH_LAMBDA);
    let mut pos = gt.vertices.clone();
    for _ in 0..m {
        pos = (0..pos.len())
            .map(|i| {
                let nb = &topo.neighbors[i];
                let p = pos[i];
                if nb.is_empty() {
                    return p;
                }
                let mut acc = Vec3::zero();
                for &j in nb {
                    acc += pos[j];
                }
                let step = (acc * T::lit(nb.len() as f64).recip() - p) * lambda;
                if topo.boundary[i] {
                    Vec3::new(p.x, p.y + step.y, p.z)
                } else {
                    p + step
                }
            })
            .collect();
    }
    gt.with_positions(pos)
}

/// Two front cameras above the sheet, left and right of center, tilted
/// enough that each misses a strip of the far side.
pub fn default_cameras() -> CameraArray {
    let cam = |x: f64| CameraRecord {
        position: [x, 1.4, 0.3],
        look_at: [0.5, 0.0, 0.5],
        up: [0.0, 0.0, 1.0],
        fov_y_deg: 38.0,
        width: 256,
        height: 256,
    };
    CameraArray { layout: ArrayLayout::Line, cameras: vec![cam(0.1), cam(0.9)] }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

/// Seeded shuffle into 80-10-10 parts; validation and test get at least one
/// id each once there are three or more.
pub fn split_ids(ids: &[u64], seed: u64) -> Split {
    use rand::seq::SliceRandom;
    let mut shuffled = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let tenth = if n >= 3 { ((n as f64 * 0.1).round() as usize).max(1) } else { 0 };
    let mut split = Split {
        val: shuffled[..tenth].to_vec(),
        test: shuffled[tenth..2 * tenth].to_vec(),
        train: shuffled[2 * tenth..].to_vec(),
    };
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    split
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub id: u64,
    pub params: Vec<f64>,
    pub gt: String,
    pub inferred: String,
}

/// Dataset description; paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rest: String,
    pub poses: Vec<PoseEntry>,
    pub cameras: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<SynthConfig>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::format(path.display(), e.to_string()))?;
        m.validate(path)?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let mut ids: Vec<u64> = self.poses.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::format(path.display(), "duplicate pose id"));
        }
        for id in self.split.train.iter().chain(&self.split.val).chain(&self.split.test) {
            if ids.binary_search(id).is_err() {
                return Err(Error::format(path.display(), format!("split names unknown pose {id}")));
            }
        }
        if let Some(p) = self.poses.iter().find(|p| p.params.iter().any(|x| !x.is_finite())) {
            return Err(Error::format(path.display(), format!("pose {} has non-finite parameters", p.id)));
        }
        Ok(())
    }

    pub fn pose(&self, id: u64) -> Option<&PoseEntry> {
        self.poses.iter().find(|p| p.id == id)
    }
}

/// A generated dataset held in memory.
#[derive(Clone, Debug)]
pub struct Suite<T> {
    pub config: SynthConfig,
    pub rest: TexturedMesh<T>,
    pub poses: Vec<Pose<T>>,
    pub gt: Vec<TexturedMesh<T>>,
    pub inferred: Vec<TexturedMesh<T>>,
    pub cameras: CameraArray,
    pub split: Split,
}

/// Seed of pose `k` in a suite seeded with `seed`.
pub fn pose_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k.wrapping_mul(0xbf58_476d_1ce4_e5b9)).rotate_left(17)
}

impl<T: Real> Suite<T> {
    pub fn generate(config: &SynthConfig) -> Result<Self> {
        let rest = gen_rest::<T>(config.resolution)?;
        let built: Vec<(Pose<T>, TexturedMesh<T>, TexturedMesh<T>)> = (0..config.poses as u64)
            .into_par_iter()
            .map(|k| {
                let p = gen_pose(pose_seed(config.seed, k), config.wrinkles);
                let pose = Pose { id: k, params: p.params.iter().map(|&x| T::lit(x)).collect() };
                let gt = gen_ground_truth(&rest, &pose);
                let inferred = gen_inferred(&gt, config.smoothing);
                (pose, gt, inferred)
            })
            .collect();
        let ids: Vec<u64> = (0..config.poses as u64).collect();
        let mut suite = Suite {
            config: config.clone(),
            rest,
            poses: Vec::with_capacity(built.len()),
            gt: Vec::with_capacity(built.len()),
            inferred: Vec::with_capacity(built.len()),
            cameras: default_cameras(),
            split: split_ids(&ids, config.seed),
        };
        for (p, g, i) in built {
            suite.poses.push(p);
            suite.gt.push(g);
            suite.inferred.push(i);
        }
        Ok(suite)
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.poses.iter().position(|p| p.id == id)
    }

    /// Writes meshes, cameras and `manifest.json` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Manifest> {
        let dir = dir.as_ref();
        let poses_dir = dir.join("poses");
        std::fs::create_dir_all(&poses_dir).map_err(|e| Error::io(&poses_dir, e))?;
        save_obj(&self.rest, dir.join("rest.obj"))?;
        self.cameras.save(dir.join("cameras.json"))?;
        let entries: Vec<PoseEntry> = self
            .poses
            .par_iter()
            .zip(self.gt.par_iter().zip(&self.inferred))
            .map(|(pose, (gt, inf))| {
                let gt_rel = format!("poses/p{:04}_gt.obj", pose.id);
                let inf_rel = format!("poses/p{:04}_inferred.obj", pose.id);
                save_obj(gt, dir.join(&gt_rel))?;
                save_obj(inf, dir.join(&inf_rel))?;
                Ok(PoseEntry {
                    id: pose.id,
                    params: pose.params.iter().map(|x| x.as_f64()).collect(),
                    gt: gt_rel,
                    inferred: inf_rel,
                })
            })
            .collect::<Result<_>>()?;
        let manifest = Manifest {
            rest: "rest.obj".into(),
            poses: entries,
            cameras: "cameras.json".into(),
            split: self.split.clone(),
            settings: Some(self.config.clone()),
        };
        manifest.save(dir.join("manifest.json"))?;
        Ok(manifest)
    }

    /// Reads a suite back from a manifest file.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let manifest = Manifest::load(manifest_path)?;
        let dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let rest = load_obj::<T>(dir.join(&manifest.rest))?;
        let cameras = CameraArray::load(dir.join(&manifest.cameras))?;
        let loaded: Vec<(TexturedMesh<T>, TexturedMesh<T>)> = manifest
            .poses
            .par_iter()
            .map(|p| {
                let gt = load_obj::<T>(dir.join(&p.gt))?;
                let inf = load_obj::<T>(dir.join(&p.inferred))?;
                gt.check_same_connectivity(&rest)?;
                inf.check_same_connectivity(&rest)?;
                Ok((gt, inf))
            })
            .collect::<Result<_>>()?;
        let (gt, inferred) = loaded.into_iter().unzip();
        Ok(Suite {
            config: manifest.settings.clone().unwrap_or_default(),
            rest,
            poses: manifest
                .poses
                .iter()
                .map(|p| Pose { id: p.id, params: p.params.iter().map(|&x| T::lit(x)).collect() })
                .collect(),
            gt,
            inferred,
            cameras,
            split: manifest.split,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::deformation_energy;

    fn one_wrinkle(a: f64, f: f64) -> Pose<f64> {
        Pose { id: 0, params: vec![a, f, 0.0, 0.0] }
    }

    #[test]
    fn rest_sheet_layout() {
        let m = gen_rest::<f64>(2).unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (8, 4));
        let tags = m.side_tags.as_ref().unwrap();
        assert_eq!(tags.iter().filter(|&&s| s == Side::Front).count(), 2);
        assert!(m.uvs.iter().all(|uv| (0.0..=1.0).contains(&uv.x) && (0.0..=1.0).contains(&uv.y)));
        for f in 0..m.num_faces() {
            let [a, b, c] = m.face_positions(f);
            let ny = (b - a).cross(c - a).y;
            assert!(if tags[f] == Side::Front { ny > 0.0 } else { ny < 0.0 });
        }
        let e = deformation_energy(&m, &m).unwrap();
        assert!(e.total_extension() + e.total_compression() < 1e-24);
        assert!(gen_rest::<f64>(1).is_err());
    }

    #[test]
    fn poses_are_seeded() {
        assert_eq!(gen_pose(5, 4), gen_pose(5, 4));
        assert_ne!(gen_pose(5, 4).params, gen_pose(6, 4).params);
        assert_eq!(gen_pose(5, 4).params.len(), 16);
        assert_eq!(gen_pose(5, 0).params, vec![0.0]);
        let rest = gen_rest::<f64>(5).unwrap();
        assert_eq!(gen_ground_truth(&rest, &gen_pose(1, 0)), rest);
    }

    #[test]
    fn ground_truth_amplitude_and_energy() {
        let rest = gen_rest::<f64>(65).unwrap();
        let front = rest.num_vertices() / 2;
        let gt = gen_ground_truth(&rest, &one_wrinkle(0.02, 4.0));
        let ymax = gt.vertices[..front].iter().map(|p| p.y.abs()).fold(0.0, f64::max);
        assert!((ymax - 0.02).abs() < 1e-6, "{ymax}");
        assert_eq!(gt.uvs, rest.uvs);
        let zero = gen_ground_truth(&rest, &one_wrinkle(0.0, 4.0));
        assert_eq!(zero, rest);

        let ext: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&a| {
                deformation_energy(&gen_ground_truth(&rest, &one_wrinkle(a, 4.0)), &rest).unwrap().total_extension()
            })
            .collect();
        assert!(ext[0] < ext[1] && ext[1] < ext[2], "{ext:?}");
    }

    #[test]
    fn inferred_is_smoother() {
        let rest = gen_rest::<f64>(33).unwrap();
        let gt = gen_ground_truth(&rest, &gen_pose(3, 4));
        assert_eq!(gen_inferred(&gt, 0), gt);
        let inf = gen_inferred(&gt, 50);
        let front = rest.num_vertices() / 2;
        let ymax = |m: &TexturedMesh<f64>| m.vertices[..front].iter().map(|p| p.y.abs()).fold(0.0, f64::max);
        assert!(ymax(&inf) < ymax(&gt));
        assert_eq!(inf.uvs, gt.uvs);
        assert!(inf.same_connectivity(&gt));
        let flat = gen_inferred(&rest, 25);
        for (a, b) in flat.vertices.iter().zip(&rest.vertices) {
            assert!((*a - *b).norm() < 1e-12);
        }
    }

    #[test]
    fn split_is_80_10_10() {
        let ids: Vec<u64> = (0..200).collect();
        let s = split_ids(&ids, 4);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (160, 20, 20));
        let mut all: Vec<u64> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, ids);
        assert_eq!(s, split_ids(&ids, 4));
        let s = split_ids(&(0..8).collect::<Vec<_>>(), 1);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 1, 1));
    }

    #[test]
    fn suite_round_trip_on_disk() {
        let cfg = SynthConfig { resolution: 5, poses: 3, ..Default::default() };
        let suite = Suite::<f64>::generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = suite.write(dir.path()).unwrap();
        let back = Suite::<f64>::load(dir.path().join("manifest.json")).unwrap();
        assert_eq!(back.gt, suite.gt);
        assert_eq!(back.inferred, suite.inferred);
        assert_eq!(back.poses, suite.poses);
        assert_eq!(back.cameras, suite.cameras);
        assert_eq!(Manifest::load(dir.path().join("manifest.json")).unwrap(), m);
    }
}
