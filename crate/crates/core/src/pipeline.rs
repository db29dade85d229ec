//! End-to-end glue on the two-layer synthetic sheet: texture-sliding fields
//! for the front patch, per-pose evaluation, network datasets, view
//! interpolation sweeps and reconstruction.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{ArrayLayout, Camera};
use crate::error::{Error, Result};
use crate::extrapolate::{extrapolate_field, smooth_field};
use crate::field::TsField;
use crate::geom::{Vec2, Vec3};
use crate::mesh::{subdivide, Pose, Side, TexturedMesh};
use crate::metrics::{
    cast_pixels, error_breakdown, sqrt_mse, uv_error_image, Breakdown, ErrorImage, PixelHits, Textured,
};
use crate::pixelmap::{coverage, rasterize, sample, PixelImage};
use crate::reconstruct::{reconstruct_mesh, Postprocess, Reconstruction, View};
use crate::scalar::Real;
use crate::scene::TracedMesh;
use crate::tsgen::{apply_threshold, generate_in, remove_far_edges, restrict_to_patch, side_faces, PatchMap};
use crate::tsnn::{DecoderModel, Example, Mode};
use crate::viewinterp::{blend, interpolate_camera, weights_for, InterpWeights};
use crate::visibility::classify;

/// Field generation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsParams {
    pub tau_uv: f64,
    /// Optional displacement threshold.
    pub tau_d: Option<f64>,
    pub smooth_iters: usize,
    /// Subdivision levels applied to the inferred mesh before generation.
    pub subdivide: usize,
}

impl Default for TsParams {
    fn default() -> Self {
        Self { tau_uv: crate::tsgen::DEFAULT_TAU_UV, tau_d: None, smooth_iters: 10, subdivide: 0 }
    }
}

/// One camera's field on a full (two-sided) inferred mesh. The back side is
/// always unassigned.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraField<T> {
    /// Ray-assigned displacements after pruning.
    pub raw: TsField<T>,
    /// `raw` extrapolated over the front patch and smoothed.
    pub field: TsField<T>,
    /// Ground-truth intersection point of each ray-assigned vertex.
    pub hits: Vec<Option<Vec3<T>>>,
}

/// Ground truth of one pose ready for ray queries.
#[derive(Clone, Debug)]
pub struct GtScenes<T> {
    pub full: TracedMesh<T>,
    pub front: TracedMesh<T>,
}

impl<T: Real> GtScenes<T> {
    pub fn new(gt: &TexturedMesh<T>) -> Result<Self> {
        let (front, _) = restrict_to_patch(gt, &front_faces(gt)?)?;
        Ok(Self { full: TracedMesh::new(gt.clone()), front: TracedMesh::new(front) })
    }
}

fn front_faces<T>(mesh: &TexturedMesh<T>) -> Result<Vec<usize>> {
    if mesh.side_tags.is_none() {
        return Err(Error::MissingSideTag(0));
    }
    Ok(side_faces(mesh, Side::Front))
}

/// Front patch of a mesh with its index map.
pub fn front_patch<T: Real>(mesh: &TexturedMesh<T>) -> Result<(TexturedMesh<T>, PatchMap)> {
    restrict_to_patch(mesh, &front_faces(mesh)?)
}

/// Ray-assigned front field of `inferred` for one camera, pruned by the edge
/// and displacement thresholds, with the ground-truth hit of each assigned
/// vertex. Hits are tested for visibility against the whole ground truth.
pub fn raw_field<T: Real>(
    gt: &GtScenes<T>,
    inferred: &TexturedMesh<T>,
    cam: &Camera<T>,
    params: &TsParams,
) -> Result<(TsField<T>, Vec<Option<Vec3<T>>>)> {
    let (front, map) = front_patch(inferred)?;
    let scene = TracedMesh::new(front);
    let generated = generate_in(&gt.front, &gt.full, &scene, cam)?;
    let mut raw = remove_far_edges(&generated.field, &scene.mesh, T::lit(params.tau_uv));
    if let Some(tau_d) = params.tau_d {
        raw = apply_threshold(&raw, T::lit(tau_d));
    }
    let mut hits = vec![None; inferred.num_vertices()];
    for (new, &old) in map.new_to_old.iter().enumerate() {
        if raw.is_assigned(new) {
            hits[old] = generated.hits[new];
        }
    }
    Ok((map.lift_field(&raw), hits))
}

/// Extrapolates a field over the front patch and smooths the extrapolated
/// part. A field without assigned front vertices is returned unchanged.
pub fn extend_field<T: Real>(inferred: &TexturedMesh<T>, raw: &TsField<T>, smooth_iters: usize) -> Result<TsField<T>> {
    raw.check_len(inferred)?;
    let (front, map) = front_patch(inferred)?;
    let f = map.restrict_field(raw);
    match extrapolate_field(&front, &f) {
        Ok(e) => Ok(map.lift_field(&smooth_field(&front, &e, smooth_iters))),
        Err(Error::NoAssigned) => Ok(raw.clone()),
        Err(e) => Err(e),
    }
}

/// [`raw_field`] followed by [`extend_field`].
pub fn camera_field<T: Real>(
    gt: &GtScenes<T>,
    inferred: &TexturedMesh<T>,
    cam: &Camera<T>,
    params: &TsParams,
) -> Result<CameraField<T>> {
    let (raw, hits) = raw_field(gt, inferred, cam, params)?;
    let field = extend_field(inferred, &raw, params.smooth_iters)?;
    Ok(CameraField { raw, field, hits })
}

/// Fields of every camera for one pose.
pub fn pose_fields<T: Real>(
    gt: &TexturedMesh<T>,
    inferred: &TexturedMesh<T>,
    cams: &[Camera<T>],
    params: &TsParams,
) -> Result<Vec<CameraField<T>>> {
    let scenes = GtScenes::new(gt)?;
    let inferred = subdivide(inferred, params.subdivide);
    cams.iter().map(|c| camera_field(&scenes, &inferred, c, params)).collect()
}

/// Fields for every pose, `[pose][camera]`.
pub fn suite_fields<T: Real>(
    gt: &[TexturedMesh<T>],
    inferred: &[TexturedMesh<T>],
    cams: &[Camera<T>],
    params: &TsParams,
) -> Result<Vec<Vec<CameraField<T>>>> {
    if gt.len() != inferred.len() {
        return Err(Error::Shape(format!("{} ground-truth and {} inferred meshes", gt.len(), inferred.len())));
    }
    gt.par_iter().zip(inferred).map(|(g, i)| pose_fields(g, i, cams, params)).collect()
}

/// SqrtMSE of the baseline, texture sliding and texture sliding on the
/// subdivided inferred mesh, for one camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraScores {
    pub baseline: f64,
    pub ts: f64,
    pub ts_sub: Option<f64>,
}

fn score<T: Real>(img: &ErrorImage<T>) -> Result<f64> {
    Ok(sqrt_mse(img)?.as_f64())
}

/// Evaluates one pose from every camera. `sub_levels` of zero skips the
/// subdivided variant.
pub fn evaluate_pose<T: Real>(
    gt: &TexturedMesh<T>,
    inferred: &TexturedMesh<T>,
    cams: &[Camera<T>],
    params: &TsParams,
    sub_levels: usize,
) -> Result<Vec<CameraScores>> {
    let scenes = GtScenes::new(gt)?;
    let inf_scene = TracedMesh::new(inferred.clone());
    let sub_scene = (sub_levels > 0).then(|| TracedMesh::new(subdivide(inferred, sub_levels)));
    let base_params = TsParams { subdivide: 0, ..params.clone() };
    cams.iter()
        .map(|cam| {
            let gt_hits = cast_pixels(&scenes.full, cam);
            let inf_hits = cast_pixels(&inf_scene, cam);
            let gt_side = Textured { mesh: gt, field: None, hits: &gt_hits };
            let baseline = uv_error_image(gt_side, Textured { mesh: inferred, field: None, hits: &inf_hits })?;
            let f = camera_field(&scenes, inferred, cam, &base_params)?;
            let ts = uv_error_image(gt_side, Textured { mesh: inferred, field: Some(&f.field), hits: &inf_hits })?;
            let ts_sub = match &sub_scene {
                Some(s) => {
                    let fs = camera_field(&scenes, &s.mesh, cam, &base_params)?;
                    let hits = cast_pixels(s, cam);
                    let img = uv_error_image(gt_side, Textured { mesh: &s.mesh, field: Some(&fs.field), hits: &hits })?;
                    Some(score(&img)?)
                }
                None => None,
            };
            Ok(CameraScores { baseline: score(&baseline)?, ts: score(&ts)?, ts_sub })
        })
        .collect()
}

/// Error image of `inferred` displaced by `field` against the ground truth.
pub fn field_error_image<T: Real>(
    gt: &TracedMesh<T>,
    inferred: &TracedMesh<T>,
    field: Option<&TsField<T>>,
    cam: &Camera<T>,
) -> Result<ErrorImage<T>> {
    let a: PixelHits<T> = cast_pixels(gt, cam);
    let b = cast_pixels(inferred, cam);
    uv_error_image(
        Textured { mesh: &gt.mesh, field: None, hits: &a },
        Textured { mesh: &inferred.mesh, field, hits: &b },
    )
}

/// Network input for a pose: its wrinkle parameters.
pub fn pose_input<T: Real, U: Real>(pose: &Pose<T>) -> Vec<U> {
    pose.params.iter().map(|&x| U::lit(x.as_f64())).collect()
}

/// Training pair for one pose and camera: the field rasterized to `width`.
pub fn tsnn_example<T: Real, U: Real>(
    pose: &Pose<T>,
    inferred: &TexturedMesh<T>,
    field: &TsField<T>,
    width: usize,
) -> Result<Example<U>> {
    let img = rasterize(inferred, field, width)?.cast::<U>();
    Ok(Example::new(pose.id, pose_input(pose), &img))
}

/// Network prediction sampled back onto `inferred`; also returns the number
/// of vertices that fell outside the valid image region.
pub fn predict_field<T: Real, U: Real>(
    model: &DecoderModel<U>,
    pose: &Pose<T>,
    inferred: &TexturedMesh<T>,
) -> Result<(TsField<T>, usize)> {
    let img = model.forward(&pose_input::<T, U>(pose), Mode::Eval)?;
    let img = PixelImage { valid: coverage(inferred, img.width, img.height)?, ..img.cast::<T>() };
    sample(&img, inferred)
}

/// Error of a predicted field with the provenance breakdown of the dataset
/// field it was trained to reproduce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionScore<T> {
    pub sqrt_mse: T,
    pub breakdown: Breakdown<T>,
}

pub fn score_prediction<T: Real>(
    gt: &TracedMesh<T>,
    inferred: &TracedMesh<T>,
    predicted: &TsField<T>,
    reference: &TsField<T>,
    cam: &Camera<T>,
) -> Result<PredictionScore<T>> {
    let img = field_error_image(gt, inferred, Some(predicted), cam)?;
    Ok(PredictionScore {
        sqrt_mse: sqrt_mse(&img)?,
        breakdown: error_breakdown(&img, &inferred.mesh, &reference.source)?,
    })
}

/// Blends front fields with layout weights; back vertices stay unassigned.
pub fn blend_front<T: Real>(mesh: &TexturedMesh<T>, fields: &[TsField<T>], w: &InterpWeights<T>) -> Result<TsField<T>> {
    let (_, map) = front_patch(mesh)?;
    let front: Vec<TsField<T>> = fields.iter().map(|f| map.restrict_field(f)).collect();
    Ok(map.lift_field(&blend(&front, w)?))
}

/// One sample of a view-interpolation sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: Vec<f64>,
    pub sqrt_mse: f64,
}

/// SqrtMSE of blended fields seen from the interpolated camera at each
/// parameter value.
pub fn blend_sweep<T: Real>(
    gt: &TexturedMesh<T>,
    inferred: &TexturedMesh<T>,
    layout: &ArrayLayout,
    cams: &[Camera<T>],
    fields: &[TsField<T>],
    params: &[Vec<f64>],
) -> Result<Vec<SweepPoint>> {
    let gt_scene = TracedMesh::new(gt.clone());
    let inf_scene = TracedMesh::new(inferred.clone());
    let positions: Vec<Vec3<T>> = cams.iter().map(|c| c.position).collect();
    params
        .iter()
        .map(|p| {
            let pt: Vec<T> = p.iter().map(|&x| T::lit(x)).collect();
            let w = weights_for(layout, &positions, &pt)?;
            let field = blend_front(inferred, fields, &w)?;
            let cam = interpolate_camera(cams, &w)?;
            let img = field_error_image(&gt_scene, &inf_scene, Some(&field), &cam)?;
            Ok(SweepPoint { param: p.clone(), sqrt_mse: score(&img)? })
        })
        .collect()
}

/// Material coordinates to reconstruct: the front vertices of `base`.
pub fn front_queries<T: Real>(base: &TexturedMesh<T>) -> Result<Vec<Option<Vec2<T>>>> {
    let (_, map) = front_patch(base)?;
    let uvs = base.vertex_uvs();
    Ok((0..base.num_vertices()).map(|v| map.old_to_new[v].map(|_| uvs[v])).collect())
}

/// Reconstructs the front of a pose from per-camera fields on `views_mesh`
/// (the inferred mesh, possibly subdivided).
pub fn reconstruct_pose<T: Real>(
    base: &TexturedMesh<T>,
    views_mesh: &TexturedMesh<T>,
    cams: &[Camera<T>],
    fields: &[TsField<T>],
    post: Postprocess,
) -> Result<Reconstruction<T>> {
    if cams.len() != fields.len() {
        return Err(Error::Shape(format!("{} cameras and {} fields", cams.len(), fields.len())));
    }
    let views = cams
        .iter()
        .zip(fields)
        .map(|(c, f)| View::new(views_mesh.clone(), f.clone(), *c))
        .collect::<Result<Vec<_>>>()?;
    reconstruct_mesh(base, &front_queries(base)?, &views, post)
}

/// Vertices of `mesh` visible from every camera.
pub fn visible_in_all<T: Real>(mesh: &TexturedMesh<T>, cams: &[Camera<T>]) -> Vec<bool> {
    let scene = TracedMesh::new(mesh.clone());
    let mut all = vec![true; mesh.num_vertices()];
    for c in cams {
        let r = classify(&scene, c);
        for (a, v) in all.iter_mut().zip(r.vertex_visible) {
            *a &= v;
        }
    }
    all
}

/// One stored field of a [`FieldSet`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub pose: u64,
    pub camera: usize,
    /// Path relative to the index file.
    pub file: String,
}

/// Index of per-pose, per-camera field files. `subdivide` is the number of
/// subdivision levels of the inferred mesh the fields live on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSet {
    pub subdivide: usize,
    pub params: TsParams,
    pub entries: Vec<FieldEntry>,
}

impl FieldSet {
    pub fn file_name(pose: u64, camera: usize) -> String {
        format!("p{pose:04}_c{camera}.json")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format { path: path.display().to_string(), msg: e.to_string() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn get(&self, pose: u64, camera: usize) -> Option<&FieldEntry> {
        self.entries.iter().find(|e| e.pose == pose && e.camera == camera)
    }

    pub fn cameras(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.entries.iter().map(|e| e.camera).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn poses(&self) -> Vec<u64> {
        let mut p: Vec<u64> = self.entries.iter().map(|e| e.pose).collect();
        p.sort_unstable();
        p.dedup();
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Source;
    use crate::synth::{default_cameras, gen_ground_truth, gen_inferred, gen_pose, gen_rest};

    fn small_pose(seed: u64) -> (Pose<f64>, TexturedMesh<f64>, TexturedMesh<f64>) {
        pose_at(17, seed)
    }

    fn pose_at(n: usize, seed: u64) -> (Pose<f64>, TexturedMesh<f64>, TexturedMesh<f64>) {
        let rest = gen_rest::<f64>(n).unwrap();
        let pose = gen_pose(seed, 4);
        let gt = gen_ground_truth(&rest, &pose);
        let inf = gen_inferred(&gt, 30);
        (pose, gt, inf)
    }

    fn cams(res: u32) -> Vec<Camera<f64>> {
        default_cameras().cameras::<f64>().unwrap().iter().map(|c| c.with_resolution(res, res)).collect()
    }

    #[test]
    fn identical_meshes_give_zero_fields() {
        let (_, gt, _) = small_pose(3);
        for f in pose_fields(&gt, &gt, &cams(64), &TsParams::default()).unwrap() {
            assert!(f.field.d.iter().all(|d| *d == Vec2::zero()));
            assert!(f.raw.count(Source::Ray) > 0);
        }
    }

    #[test]
    fn back_side_stays_unassigned() {
        let (_, gt, inf) = small_pose(4);
        let sides = inf.vertex_sides().unwrap();
        for f in pose_fields(&gt, &inf, &cams(64), &TsParams::default()).unwrap() {
            for v in 0..inf.num_vertices() {
                assert_eq!(sides[v] == Side::Back, !f.field.is_assigned(v));
                assert_eq!(f.raw.is_assigned(v), f.hits[v].is_some());
            }
        }
    }

    #[test]
    fn sliding_beats_baseline() {
        let (_, gt, inf) = small_pose(5);
        for s in evaluate_pose(&gt, &inf, &cams(96), &TsParams::default(), 1).unwrap() {
            assert!(s.ts < s.baseline, "{s:?}");
            assert!(s.ts_sub.unwrap() < s.baseline, "{s:?}");
        }
    }

    #[test]
    fn sweep_endpoints_match_single_cameras() {
        let (_, gt, inf) = small_pose(6);
        let cs = cams(48);
        let fields: Vec<TsField<f64>> =
            pose_fields(&gt, &inf, &cs, &TsParams::default()).unwrap().into_iter().map(|f| f.field).collect();
        let sweep = blend_sweep(&gt, &inf, &default_cameras().layout, &cs, &fields, &[vec![0.0], vec![0.5], vec![1.0]])
            .unwrap();
        let g = TracedMesh::new(gt.clone());
        let i = TracedMesh::new(inf.clone());
        for (k, p) in [(0, 0), (1, 2)] {
            let img = field_error_image(&g, &i, Some(&fields[k]), &cs[k]).unwrap();
            assert_eq!(sweep[p].sqrt_mse, sqrt_mse(&img).unwrap());
        }
    }

    #[test]
    fn example_round_trips_through_sampling() {
        let (pose, gt, inf) = small_pose(7);
        let f = pose_fields(&gt, &inf, &cams(48), &TsParams::default()).unwrap().remove(0);
        let ex: Example<f64> = tsnn_example(&pose, &inf, &f.field, 32).unwrap();
        assert_eq!(ex.input.len(), 16);
        assert_eq!(ex.target.len(), 32 * 32 * 4);
        assert!(ex.mask.iter().any(|&m| m > 0.0));
    }

    #[test]
    fn perfect_fields_reconstruct_front() {
        let (_, gt, inf) = pose_at(33, 8);
        let cs = cams(64);
        let fine = subdivide(&inf, 1);
        let fields: Vec<TsField<f64>> = pose_fields(&gt, &inf, &cs, &TsParams { subdivide: 1, ..Default::default() })
            .unwrap()
            .into_iter()
            .map(|f| f.raw)
            .collect();
        let rec = reconstruct_pose(&inf, &fine, &cs, &fields, Postprocess::None).unwrap();
        let both = visible_in_all(&gt, &cs);
        let diag = gt.bbox_diagonal();
        let (mut good, mut n) = (0, 0);
        for v in 0..gt.num_vertices() {
            if both[v] && front_queries(&gt).unwrap()[v].is_some() {
                n += 1;
                if (rec.mesh.vertices[v] - gt.vertices[v]).norm() < 0.01 * diag {
                    good += 1;
                }
            }
        }
        assert!(n > 0 && good * 10 >= n * 9, "{good}/{n}");
    }
}
