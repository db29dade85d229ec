//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use texslide::camera::Camera;
use texslide::extrapolate::{extrapolate_field, geodesic_distance, smooth_field};
use texslide::field::{Source, TsField};
use texslide::geom::{Vec2, Vec3};
use texslide::mesh::{parse_obj, subdivide, write_obj, TexturedMesh};
use texslide::metrics::{edge_extrema, field_edge_maxima, sqrt_mse, FieldRecord};
use texslide::pipeline::{
    blend_sweep, camera_field, evaluate_pose, field_error_image, front_patch, front_queries, pose_fields,
    predict_field, reconstruct_pose, score_prediction, tsnn_example, visible_in_all, GtScenes, TsParams,
};
use texslide::pixelmap::{rasterize, PixelImage};
use texslide::reconstruct::Postprocess;
use texslide::scene::TracedMesh;
use texslide::spatial::{intersect_triangle, invert_barycentric, is_inside, triangulate_point, Bvh3, Ray, UvIndex};
use texslide::synth::{default_cameras, gen_rest, Suite, SynthConfig};
use texslide::tsnn::{checkpoint, gradcheck, train, ArchSpec, DecoderModel, Example, TrainConfig, Trainer};
use texslide::viewinterp::{blend, InterpWeights};
use texslide::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cameras() -> Vec<Camera<f64>> {
    default_cameras().cameras::<f64>().unwrap()
}

fn default_suite(poses: usize) -> Suite<f64> {
    Suite::<f64>::generate(&SynthConfig { poses, ..SynthConfig::default() }).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Baseline, sliding and subdivided sliding over the default suite.
fn sliding_beats_baseline() -> Outcome {
    let t0 = Instant::now();
    let suite = default_suite(200);
    let cams = cameras();
    let params = TsParams::default();
    let (mut base, mut ts, mut sub) = (Vec::new(), Vec::new(), Vec::new());
    let mut wins = 0;
    for i in 0..suite.poses.len() {
        let s = evaluate_pose(&suite.gt[i], &suite.inferred[i], &cams, &params, 1).unwrap();
        let b = mean(&s.iter().map(|c| c.baseline).collect::<Vec<_>>());
        let t = mean(&s.iter().map(|c| c.ts).collect::<Vec<_>>());
        let u = mean(&s.iter().map(|c| c.ts_sub.unwrap()).collect::<Vec<_>>());
        wins += (t < b) as usize;
        base.push(b);
        ts.push(t);
        sub.push(u);
    }
    let elapsed = t0.elapsed();
    let (b, t, u) = (mean(&base), mean(&ts), mean(&sub));
    let win_rate = wins as f64 / base.len() as f64;
    outcome(
        b > t && t > u && t <= 0.5 * b && win_rate >= 0.95 && elapsed <= Duration::from_secs(300),
        format!(
            "baseline {:.3} > ts {:.3} > ts+sub {:.3} (x1e-3), ts wins {:.1}%, {:.0}s",
            b * 1e3,
            t * 1e3,
            u * 1e3,
            win_rate * 100.0,
            elapsed.as_secs_f64()
        ),
    )
}

/// Least-squares ray intersection on exact and parallel rays.
fn triangulation_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for k in [2usize, 3, 8] {
        for _ in 0..100 {
            let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let rays: Vec<Ray<f64>> = (0..k)
                .map(|_| {
                    let o = Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(3.0..6.0));
                    Ray::through(o, p).unwrap()
                })
                .collect();
            let q = triangulate_point(&rays).unwrap().point;
            worst = worst.max((q - p).norm() / p.norm().max(1.0));
        }
    }
    let d = Vec3::new(0.0, 0.0, 1.0);
    let parallel = [Ray::new(Vec3::new(0.0, 0.0, 0.0), d), Ray::new(Vec3::new(1.0, 0.0, 0.0), d)];
    let singular = matches!(triangulate_point(&parallel), Err(Error::SingularSystem { .. }));
    outcome(worst < 1e-9 && singular, format!("max relative error {worst:.2e}, parallel rays singular: {singular}"))
}

/// One-hot blends reproduce single-camera fields and errors exactly.
fn blend_endpoints() -> Outcome {
    let suite = default_suite(3);
    let cams: Vec<Camera<f64>> = cameras().iter().map(|c| c.with_resolution(128, 128)).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for i in 0..suite.poses.len() {
        let (gt, inf) = (&suite.gt[i], &suite.inferred[i]);
        let fields: Vec<TsField<f64>> =
            pose_fields(gt, inf, &cams, &TsParams::default()).unwrap().into_iter().map(|f| f.field).collect();
        let (front, map) = front_patch(inf).unwrap();
        let restricted: Vec<TsField<f64>> = fields.iter().map(|f| map.restrict_field(f)).collect();
        for k in 0..cams.len() {
            let b = blend(&restricted, &InterpWeights::one_hot(cams.len(), k)).unwrap();
            ok &=
                b.d.iter()
                    .zip(&restricted[k].d)
                    .all(|(x, y)| x.x.to_bits() == y.x.to_bits() && x.y.to_bits() == y.y.to_bits());
            ok &= b.d.len() == front.num_vertices();
        }
        let sweep = blend_sweep(gt, inf, &default_cameras().layout, &cams, &fields, &[vec![0.0], vec![1.0]]).unwrap();
        let g = TracedMesh::new(gt.clone());
        let m = TracedMesh::new(inf.clone());
        for (p, k) in [(0, 0), (1, cams.len() - 1)] {
            let single = sqrt_mse(&field_error_image(&g, &m, Some(&fields[k]), &cams[k]).unwrap()).unwrap();
            ok &= sweep[p].sqrt_mse.to_bits() == single.to_bits();
            detail.push(format!("{:.4e}", single));
        }
    }
    outcome(ok, format!("one-hot blends bitwise equal; endpoint errors {}", detail.join(" ")))
}

/// Dijkstra over straight segments to every vertex within `rings` grid
/// steps; exact distances on a flat sheet up to the angular resolution.
fn refined_dijkstra(pos: &[Vec2<f64>], n: usize, seeds: &[usize], rings: i64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; pos.len()];
    let mut heap = BinaryHeap::new();
    for &s in seeds {
        dist[s] = 0.0;
        heap.push(Reverse((0u64, s)));
    }
    while let Some(Reverse((dk, v))) = heap.pop() {
        let d = f64::from_bits(dk);
        if d > dist[v] {
            continue;
        }
        let (i, j) = ((v / n) as i64, (v % n) as i64);
        for di in -rings..=rings {
            for dj in -rings..=rings {
                let (a, b) = (i + di, j + dj);
                if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                    continue;
                }
                let w = (a as usize) * n + b as usize;
                let nd = d + (pos[w] - pos[v]).norm();
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Reverse((nd.to_bits(), w)));
                }
            }
        }
    }
    dist
}

/// Geodesic distances on the flat sheet.
fn fmm_accuracy() -> Outcome {
    let n = 65;
    let (sheet, _) = front_patch(&gen_rest::<f64>(n).unwrap()).unwrap();
    // the sheet spans [0,1] in x and z
    let pos: Vec<Vec2<f64>> = sheet.vertices.iter().map(|p| Vec2::new(p.x, p.z)).collect();
    let corner = |x: f64, z: f64| (0..pos.len()).find(|&v| pos[v] == Vec2::new(x, z)).unwrap();
    let sqrt2 = 2f64.sqrt();
    let mut corner_err: f64 = 0.0;
    for (a, b) in [((0.0, 0.0), (1.0, 1.0)), ((1.0, 0.0), (0.0, 1.0))] {
        let d = geodesic_distance(&sheet, &[corner(a.0, a.1)]).unwrap();
        corner_err = corner_err.max((d[corner(b.0, b.1)] - sqrt2).abs() / sqrt2);
    }
    let by_grid: Vec<usize> = {
        let mut idx: Vec<usize> = (0..pos.len()).collect();
        idx.sort_by(|&a, &b| (pos[a].y, pos[a].x).partial_cmp(&(pos[b].y, pos[b].x)).unwrap());
        idx
    };
    let grid_pos: Vec<Vec2<f64>> = by_grid.iter().map(|&v| pos[v]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k = rng.gen_range(1..=5);
        let seeds_grid: Vec<usize> = (0..k).map(|_| rng.gen_range(0..pos.len())).collect();
        let seeds: Vec<usize> = seeds_grid.iter().map(|&g| by_grid[g]).collect();
        let fmm = geodesic_distance(&sheet, &seeds).unwrap();
        let oracle = refined_dijkstra(&grid_pos, n, &seeds_grid, 4);
        let (mut num, mut den) = (0.0, 0.0);
        for (g, &v) in by_grid.iter().enumerate() {
            num += (fmm[v] - oracle[g]).abs();
            den += oracle[g];
        }
        worst = worst.max(num / den);
    }
    outcome(
        corner_err < 0.05 && worst < 0.05,
        format!(
            "corner-to-corner error {:.2}%, worst relative L1 vs refined Dijkstra {:.2}%",
            corner_err * 100.0,
            worst * 100.0
        ),
    )
}

/// Central differences against backpropagation.
fn gradient_check() -> Outcome {
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, f) in [
        ("tconv", gradcheck::check_tconv as fn(u64) -> f64),
        ("batchnorm", gradcheck::check_batch_norm),
        ("relu", gradcheck::check_relu),
        ("loss", gradcheck::check_loss),
        ("model", gradcheck::check_model),
    ] {
        let e = (0..3).map(f).fold(0.0, f64::max);
        worst = worst.max(e);
        parts.push(format!("{name} {e:.1e}"));
    }
    let params = DecoderModel::<f64>::new(gradcheck::tiny_arch(), 0).unwrap().num_params();
    outcome(worst < 1e-4 && params <= 500, format!("{}; tiny model {params} params", parts.join(", ")))
}

/// Network examples for camera 0 of the given poses.
fn camera0_examples(suite: &Suite<f64>, idx: &[usize], width: usize) -> Vec<(Example<f32>, TsField<f64>)> {
    let cam = cameras()[0];
    idx.iter()
        .map(|&i| {
            let scenes = GtScenes::new(&suite.gt[i]).unwrap();
            let f = camera_field(&scenes, &suite.inferred[i], &cam, &TsParams::default()).unwrap().field;
            (tsnn_example(&suite.poses[i], &suite.inferred[i], &f, width).unwrap(), f)
        })
        .collect()
}

/// Full-batch overfit of the desk decoder on eight poses.
fn overfit() -> Outcome {
    let suite = default_suite(8);
    let data: Vec<Example<f32>> =
        camera0_examples(&suite, &(0..8).collect::<Vec<_>>(), 64).into_iter().map(|e| e.0).collect();
    let refs: Vec<&Example<f32>> = data.iter().collect();
    let t0 = Instant::now();
    let mut trainer = Trainer::new(DecoderModel::<f32>::new(ArchSpec::desk(16, 64).unwrap(), 0).unwrap(), 1e-3);
    let first = trainer.step(&refs).unwrap();
    let mut last = first;
    let mut steps = 1;
    while steps < 2000 && last >= 0.01 * first {
        last = trainer.step(&refs).unwrap();
        steps += 1;
    }
    let elapsed = t0.elapsed();
    let ratio = last / first;
    outcome(
        ratio < 0.01 && elapsed <= Duration::from_secs(120),
        format!(
            "loss {:.3e} -> {:.3e} ({:.2}%) in {steps} steps, {:.0}s",
            first,
            last,
            ratio * 100.0,
            elapsed.as_secs_f64()
        ),
    )
}

/// Triangulation from perfect fields, and its trend over subdivision.
fn reconstruction_fidelity() -> Outcome {
    let suite = default_suite(8);
    let cams = cameras();
    let mut within = [0usize; 3];
    let mut total = 0usize;
    let mut sums = [0.0f64; 3];
    for i in 0..suite.poses.len() {
        let (gt, inf) = (&suite.gt[i], &suite.inferred[i]);
        let both = visible_in_all(gt, &cams);
        let queries = front_queries(gt).unwrap();
        let targets: Vec<usize> = (0..gt.num_vertices()).filter(|&v| both[v] && queries[v].is_some()).collect();
        total += targets.len();
        let diag = gt.bbox_diagonal();
        for level in 0..3 {
            let params = TsParams { subdivide: level, ..TsParams::default() };
            let fields: Vec<TsField<f64>> =
                pose_fields(gt, inf, &cams, &params).unwrap().into_iter().map(|f| f.raw).collect();
            let rec = reconstruct_pose(inf, &subdivide(inf, level), &cams, &fields, Postprocess::None).unwrap();
            for &v in &targets {
                let e = (rec.mesh.vertices[v] - gt.vertices[v]).norm();
                sums[level] += e;
                within[level] += (e <= 0.01 * diag) as usize;
            }
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / total as f64).collect();
    let frac = within[1] as f64 / total as f64;
    outcome(
        frac >= 0.9 && means[1] <= means[0] && means[2] <= means[1],
        format!(
            "{:.1}% within 1% of the diagonal at one level; mean error {:.3e} / {:.3e} / {:.3e} at levels 0/1/2",
            frac * 100.0,
            means[0],
            means[1],
            means[2]
        ),
    )
}

/// A smooth random field assigned on a random disc of the sheet.
fn random_partial_field(sheet: &TexturedMesh<f64>, rng: &mut ChaCha8Rng) -> TsField<f64> {
    let c = Vec2::new(rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
    let r = rng.gen_range(0.15..0.45);
    let coef: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.02..0.02)).collect();
    let freq: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..3.0)).collect();
    let mut f = TsField::unassigned(sheet.num_vertices());
    let uvs = sheet.vertex_uvs();
    for v in 0..f.len() {
        let u = uvs[v];
        if (u - c).norm() <= r {
            f.d[v] = Vec2::new(
                coef[0] * (freq[0] * u.x).sin() + coef[1] * (freq[1] * u.y).cos() + coef[2] * u.x * u.y + coef[3],
                coef[4] * (freq[2] * u.y).sin() + coef[5] * (freq[3] * u.x).cos() + coef[6] * u.x + coef[7],
            );
            f.source[v] = Source::Ray;
        }
    }
    f
}

/// Checks one raw field against its extrapolated and smoothed version:
/// (assigned values preserved, maximum principle, no new edge extrema).
fn invariants(mesh: &TexturedMesh<f64>, raw: &TsField<f64>, full: &TsField<f64>) -> (bool, bool, bool) {
    let (mut preserved, mut bounded) = (true, true);
    let front = |v: usize| full.is_assigned(v) || raw.is_assigned(v);
    for k in 0..2 {
        let vals: Vec<f64> = (0..raw.len()).filter(|&v| raw.is_assigned(v)).map(|v| raw.d[v][k]).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in (0..raw.len()).filter(|&v| front(v)) {
            if raw.is_assigned(v) {
                preserved &= full.d[v][k].to_bits() == raw.d[v][k].to_bits() && full.source[v] == Source::Ray;
            } else {
                bounded &= full.d[v][k] >= lo && full.d[v][k] <= hi;
            }
        }
    }
    let (tn0, dd0) = field_edge_maxima(mesh, raw).unwrap();
    let (tn1, dd1) = field_edge_maxima(mesh, full).unwrap();
    (preserved, bounded, tn1 <= tn0 && dd1 <= dd0)
}

/// Extrapolation and smoothing of texture-sliding fields from random poses,
/// plus smooth synthetic fields on random discs of a flat sheet.
fn extrapolation_invariants() -> Outcome {
    let suite = Suite::<f64>::generate(&SynthConfig { poses: 25, seed: 11, ..SynthConfig::default() }).unwrap();
    let cams = cameras();
    let (mut preserved, mut bounded, mut no_new) = (true, true, true);
    let mut n = 0;
    for i in 0..suite.poses.len() {
        for f in pose_fields(&suite.gt[i], &suite.inferred[i], &cams, &TsParams::default()).unwrap() {
            let (p, b, e) = invariants(&suite.inferred[i], &f.raw, &f.field);
            preserved &= p;
            bounded &= b;
            no_new &= e;
            n += 1;
        }
    }
    let (sheet, _) = front_patch(&gen_rest::<f64>(33).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut disc_ok, mut overshoot) = (true, 1.0f64);
    for _ in 0..50 {
        let f = random_partial_field(&sheet, &mut rng);
        let e = smooth_field(&sheet, &extrapolate_field(&sheet, &f).unwrap(), 10);
        let (p, b, _) = invariants(&sheet, &f, &e);
        disc_ok &= p && b && (0..e.len()).all(|v| e.is_assigned(v));
        let (_, dd0) = field_edge_maxima(&sheet, &f).unwrap();
        let (_, dd1) = field_edge_maxima(&sheet, &e).unwrap();
        overshoot = overshoot.max(dd1 / dd0);
    }
    outcome(
        preserved && bounded && no_new && disc_ok,
        format!(
            "{n} sliding fields: assigned preserved {preserved}, maximum principle {bounded}, no new edge extrema {no_new}; \
             50 disc fields: preserved and bounded {disc_ok}, largest edge jump ratio {overshoot:.3}"
        ),
    )
}

/// Prediction error by provenance class for a trained desk model.
fn breakdown_direction() -> Outcome {
    let t0 = Instant::now();
    let suite = default_suite(200);
    let index = |ids: &[u64]| ids.iter().map(|&id| suite.index_of(id).unwrap()).collect::<Vec<_>>();
    let (tr, va, te) = (index(&suite.split.train), index(&suite.split.val), index(&suite.split.test));
    let train_set: Vec<Example<f32>> = camera0_examples(&suite, &tr, 64).into_iter().map(|e| e.0).collect();
    let val_set: Vec<Example<f32>> = camera0_examples(&suite, &va, 64).into_iter().map(|e| e.0).collect();
    let cfg = TrainConfig { epochs: 40, batch_size: 8, lr: 1e-3, seed: 0 };
    let model = DecoderModel::<f32>::new(ArchSpec::desk(16, 64).unwrap(), 0).unwrap();
    let best = train(model, &train_set, &val_set, &cfg).unwrap().best;
    let cam = cameras()[0];
    let (mut ray, mut ext, mut all) = (Vec::new(), Vec::new(), Vec::new());
    for (&i, (_, reference)) in te.iter().zip(camera0_examples(&suite, &te, 64)) {
        let (pred, _) = predict_field(&best, &suite.poses[i], &suite.inferred[i]).unwrap();
        let gt = TracedMesh::new(suite.gt[i].clone());
        let inf = TracedMesh::new(suite.inferred[i].clone());
        let s = score_prediction(&gt, &inf, &pred, &reference, &cam).unwrap();
        all.push(s.sqrt_mse);
        if let Some(r) = s.breakdown.ray {
            ray.push(r);
        }
        if let Some(e) = s.breakdown.extrapolated {
            ext.push(e);
        }
    }
    let (r, e) = (mean(&ray), mean(&ext));
    outcome(
        !ray.is_empty() && !ext.is_empty() && e >= r,
        format!(
            "extrapolated {:.3} ({} images) vs ray {:.3} ({} images) x1e-3; overall {:.3}; {:.0}s",
            e * 1e3,
            ext.len(),
            r * 1e3,
            ray.len(),
            mean(&all) * 1e3,
            t0.elapsed().as_secs_f64()
        ),
    )
}

/// Acceleration structures against exhaustive scans.
fn oracle_equivalence() -> Outcome {
    let suite = default_suite(1);
    let mesh = suite.gt[0].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let bvh = Bvh3::build(&mesh);
    let mut hit_ok = 0;
    for _ in 0..1000 {
        let o = Vec3::new(rng.gen_range(-0.5..1.5), rng.gen_range(0.3..2.0), rng.gen_range(-0.5..1.5));
        let target = Vec3::new(rng.gen_range(-0.2..1.2), rng.gen_range(-0.1..0.1), rng.gen_range(-0.2..1.2));
        let ray = Ray::through(o, target).unwrap();
        let mut brute: Option<(f64, usize)> = None;
        for f in 0..mesh.num_faces() {
            if let Some((t, _)) = intersect_triangle(&ray, &mesh.face_positions(f)) {
                if t > 0.0 && brute.map_or(true, |(bt, _)| t < bt) {
                    brute = Some((t, f));
                }
            }
        }
        let fast = bvh.first_hit(&mesh, &ray, 0.0).map(|h| (h.t, h.face));
        hit_ok += match (fast, brute) {
            (None, None) => 1,
            // faces sharing the hit point may differ; the distance may not
            (Some((ft, _)), Some((bt, _))) => (ft == bt) as usize,
            _ => 0,
        };
    }
    let uv_index = UvIndex::build(&mesh);
    let mut uv_ok = 0;
    for _ in 0..1000 {
        let q = Vec2::new(rng.gen_range(-0.1..1.1), rng.gen_range(-0.1..1.1));
        let fast: Vec<usize> = uv_index.locate(q).iter().map(|c| c.face).collect();
        let brute: Vec<usize> = (0..mesh.num_faces())
            .filter(|&f| invert_barycentric(&mesh.face_uvs(f), q).map_or(false, |w| is_inside(&w)))
            .collect();
        uv_ok += (fast == brute) as usize;
    }
    let fields: Vec<TsField<f64>> = (0..5)
        .map(|_| {
            let mut f = TsField::unassigned(mesh.num_vertices());
            for v in 0..f.len() {
                if rng.gen_bool(0.7) {
                    f.d[v] = Vec2::new(rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03));
                    f.source[v] = Source::Ray;
                }
            }
            f
        })
        .collect();
    let records: Vec<FieldRecord<f64>> = fields
        .iter()
        .enumerate()
        .map(|(k, f)| FieldRecord { pose: k as u64, camera: 0, field: f, hits: None })
        .collect();
    let rep = edge_extrema(&mesh, &records).unwrap();
    let base = mesh.vertex_uvs();
    let (mut tn, mut dd, mut dv) = (0.0f64, 0.0f64, 0.0f64);
    for f in &fields {
        for face in &mesh.faces {
            for k in 0..3 {
                let (a, b) = (face.v[k], face.v[(k + 1) % 3]);
                if f.is_assigned(a) && f.is_assigned(b) {
                    tn = tn.max(((base[a] + f.d[a]) - (base[b] + f.d[b])).norm());
                    dd = dd.max((f.d[a] - f.d[b]).norm());
                }
            }
        }
        for v in 0..f.len() {
            if f.is_assigned(v) {
                dv = dv.max(f.d[v].norm());
            }
        }
    }
    let extrema_ok = rep.texcoord_edge.unwrap().value == tn
        && rep.displacement_edge.unwrap().value == dd
        && rep.displacement_vertex.unwrap().value == dv;
    outcome(
        hit_ok == 1000 && uv_ok == 1000 && extrema_ok,
        format!("first hit {hit_ok}/1000, uv locate {uv_ok}/1000, edge extrema match: {extrema_ok}"),
    )
}

/// Write, read and write again for every file format.
fn format_round_trips() -> Outcome {
    let suite = default_suite(2);
    let mesh = &suite.inferred[1];
    let obj1 = write_obj(mesh);
    let obj2 = write_obj(&parse_obj::<f64>(&obj1, "mesh").unwrap());
    let scenes = GtScenes::new(&suite.gt[1]).unwrap();
    let field = camera_field(&scenes, mesh, &cameras()[0], &TsParams::default()).unwrap().field;
    let js1 = field.to_json();
    let js2 = TsField::<f64>::from_json(&js1, "field").unwrap().to_json();
    let img: PixelImage<f64> = rasterize(mesh, &field, 64).unwrap();
    let px1 = img.to_bytes();
    let px2 = PixelImage::<f64>::from_bytes(&px1, "image").unwrap().to_bytes();
    let model = DecoderModel::<f32>::new(ArchSpec::desk(16, 64).unwrap(), 3).unwrap();
    let ck1 = checkpoint::to_bytes(&model);
    let ck2 = checkpoint::to_bytes(&checkpoint::from_bytes::<f32>(&ck1, "ckpt").unwrap());
    let results = [("obj", obj1 == obj2), ("field", js1 == js2), ("tspx", px1 == px2), ("checkpoint", ck1 == ck2)];
    outcome(
        results.iter().all(|r| r.1),
        results
            .iter()
            .map(|(n, ok)| format!("{n} {}", if *ok { "identical" } else { "differs" }))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn run_cli(args: &[&str], cwd: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_texslide"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            collect_files(root, &p, out);
        } else {
            out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
        }
    }
}

/// The command-line pipeline twice with one seed.
fn end_to_end_determinism() -> Outcome {
    let steps: &[&[&str]] = &[
        &["synth", "--poses", "10", "--resolution", "17", "--seed", "7", "--out", "suite"],
        &["tsgen", "--manifest", "suite/manifest.json", "--out", "raw"],
        &["extrapolate", "--manifest", "suite/manifest.json", "--fields", "raw/fields.json", "--out", "ext"],
        &[
            "train",
            "--manifest",
            "suite/manifest.json",
            "--fields",
            "ext/fields.json",
            "--width",
            "16",
            "--epochs",
            "3",
            "--seed",
            "7",
            "--out",
            "model.ckpt",
            "--curve",
            "curve.csv",
        ],
        &["infer", "--manifest", "suite/manifest.json", "--model", "model.ckpt", "--split", "all", "--out", "pred"],
        &[
            "eval",
            "--manifest",
            "suite/manifest.json",
            "--fields",
            "ext/fields.json",
            "--out",
            "table.csv",
            "--per-image",
            "images.csv",
        ],
        &[
            "eval",
            "--manifest",
            "suite/manifest.json",
            "--fields",
            "pred/fields.json",
            "--reference",
            "ext/fields.json",
            "--label",
            "tsnn",
            "--out",
            "tsnn.csv",
        ],
        &[
            "blendview",
            "--manifest",
            "suite/manifest.json",
            "--fields",
            "ext/fields.json",
            "--pose",
            "0",
            "--steps",
            "5",
            "--out",
            "sweep.csv",
        ],
        &[
            "reconstruct",
            "--manifest",
            "suite/manifest.json",
            "--fields",
            "raw/fields.json",
            "--pose",
            "1",
            "--out",
            "rec.obj",
            "--report",
            "rec.csv",
        ],
        &[
            "render",
            "--manifest",
            "suite/manifest.json",
            "--pose",
            "2",
            "--fields",
            "ext/fields.json",
            "--out",
            "err.ppm",
        ],
    ];
    let runs: Vec<Option<BTreeMap<PathBuf, Vec<u8>>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            for s in steps {
                if !run_cli(s, dir.path()) {
                    return None;
                }
            }
            let mut files = BTreeMap::new();
            collect_files(dir.path(), dir.path(), &mut files);
            Some(files)
        })
        .collect();
    match (&runs[0], &runs[1]) {
        (Some(a), Some(b)) => {
            let differing: Vec<String> =
                a.iter().filter(|(k, v)| b.get(*k) != Some(*v)).map(|(k, _)| k.display().to_string()).collect();
            let same_set = a.keys().eq(b.keys());
            outcome(
                same_set && differing.is_empty(),
                format!("{} artifacts, {} differing {:?}", a.len(), differing.len(), differing),
            )
        }
        _ => outcome(false, "a pipeline step failed"),
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("texture sliding beats the baseline", sliding_beats_baseline),
        ("triangulation exactness", triangulation_exactness),
        ("blend endpoints", blend_endpoints),
        ("geodesic distance accuracy", fmm_accuracy),
        ("gradient correctness", gradient_check),
        ("overfit capacity", overfit),
        ("reconstruction fidelity", reconstruction_fidelity),
        ("extrapolation invariants", extrapolation_invariants),
        ("error breakdown direction", breakdown_direction),
        ("oracle equivalence", oracle_equivalence),
        ("format round trips", format_round_trips),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let r = check();
        // straight to the stderr handle so the lines show without --nocapture
        let line = format!("{} criterion {:>2} {name}: {}\n", if r.pass { "PASS" } else { "FAIL" }, k + 1, r.detail);
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if !r.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
