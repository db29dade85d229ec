//! `texslide` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use texslide::camera::{ArrayLayout, Camera, CameraArray};
use texslide::field::{Source, TsField};
use texslide::geom::Vec2;
use texslide::mesh::{save_obj, subdivide, TexturedMesh};
use texslide::metrics::{
    dataset_stats, error_ppm, field_edge_maxima, rows_csv, sqrt_mse, stats_csv, ImageRow, Stats, ERROR_CLAMP,
};
use texslide::pipeline::{
    extend_field, field_error_image, predict_field, raw_field, reconstruct_pose, score_prediction, tsnn_example,
    FieldEntry, FieldSet, GtScenes, TsParams,
};
use texslide::reconstruct::{report_csv, Postprocess};
use texslide::scene::TracedMesh;
use texslide::synth::{Suite, SynthConfig};
use texslide::tsnn::{checkpoint, train, ArchSpec, DecoderModel, Example, TrainConfig};
use texslide::viewinterp::{blend, interpolate_camera, weights_for};

#[derive(Parser, Debug)]
#[command(name = "texslide", version, about = "Texture sliding for cloth meshes")]
struct Cli {
    /// JSON config; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic sheet suite.
    Synth(SynthArgs),
    /// Ray-project ground-truth uvs onto the inferred meshes.
    Tsgen(TsgenArgs),
    /// Fill and smooth unassigned displacements.
    Extrapolate(ExtrapolateArgs),
    /// Train the decoder on one camera's fields.
    Train(TrainArgs),
    /// Predict fields with a trained decoder.
    Infer(InferArgs),
    /// Sweep blended fields along the camera array.
    Blendview(BlendviewArgs),
    /// Triangulate a mesh from per-camera fields.
    Reconstruct(ReconstructArgs),
    /// Tabulate per-pixel texture-coordinate errors.
    Eval(EvalArgs),
    /// Write an error image as binary PPM.
    Render(RenderArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    poses: Option<usize>,
    /// Grid vertices per side.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    wrinkles: Option<usize>,
    /// Umbrella iterations producing the inferred mesh (0 copies the ground truth).
    #[arg(long)]
    smoothing: Option<usize>,
    /// Camera array JSON replacing the default pair.
    #[arg(long)]
    cameras: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[arg(long)]
    tau_uv: Option<f64>,
    #[arg(long)]
    tau_d: Option<f64>,
    /// Subdivision levels of the inferred mesh.
    #[arg(long)]
    subdivide: Option<usize>,
}

#[derive(Args, Debug)]
struct TsgenArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Camera indices (default: all).
    #[arg(long, value_delimiter = ',')]
    camera: Vec<usize>,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Args, Debug)]
struct ExtrapolateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Field index written by `tsgen`.
    #[arg(long)]
    fields: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    smooth_iters: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    fields: PathBuf,
    #[arg(long, default_value_t = 0)]
    camera: usize,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Image width of the network output.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SplitName {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    camera: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    split: Option<SplitName>,
    /// Subdivision levels of the mesh the prediction is sampled on.
    #[arg(long)]
    subdivide: Option<usize>,
}

#[derive(Args, Debug)]
struct BlendviewArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    fields: PathBuf,
    #[arg(long)]
    pose: u64,
    /// Samples per parameter axis, endpoints included.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    fields: PathBuf,
    #[arg(long)]
    pose: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-vertex report CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Taubin-smooth the result.
    #[arg(long)]
    taubin: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Field indices to score; repeat for several methods.
    #[arg(long)]
    fields: Vec<PathBuf>,
    /// Method names, one per `--fields`.
    #[arg(long)]
    label: Vec<String>,
    /// Field index whose sources split the first method's errors by class.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, value_enum)]
    split: Option<SplitName>,
    #[arg(long)]
    out: PathBuf,
    /// Per-image SqrtMSE CSV of the first method.
    #[arg(long)]
    per_image: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    pose: u64,
    #[arg(long, default_value_t = 0)]
    camera: usize,
    /// Field index; without it the plain inferred mesh is rendered.
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Error mapped to full red.
    #[arg(long, default_value_t = ERROR_CLAMP)]
    clamp: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Settings a config file may provide.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    poses: Option<usize>,
    resolution: Option<usize>,
    wrinkles: Option<usize>,
    smoothing: Option<usize>,
    cameras: Option<PathBuf>,
    tau_uv: Option<f64>,
    tau_d: Option<f64>,
    smooth_iters: Option<usize>,
    subdivide: Option<usize>,
    width: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    steps: Option<usize>,
    split: Option<SplitName>,
}

/// A problem with the invocation rather than the data.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

/// The error chain on one line, skipping causes already quoted by their
/// parent.
fn one_line(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("{}", p.display()))?;
            serde_json::from_str::<Config>(&text).with_context(|| format!("{}: invalid config", p.display()))?
        }
        None => Config::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    match cli.command {
        Command::Synth(a) => synth(a, &cfg, seed),
        Command::Tsgen(a) => tsgen(a, &cfg),
        Command::Extrapolate(a) => extrapolate(a, &cfg),
        Command::Train(a) => train_cmd(a, &cfg, seed),
        Command::Infer(a) => infer(a, &cfg),
        Command::Blendview(a) => blendview(a, &cfg),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Eval(a) => eval(a, &cfg),
        Command::Render(a) => render(a),
    }
}

fn stage(msg: impl fmt::Display) {
    eprintln!("texslide: {msg}");
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, bytes).with_context(|| format!("{}", path.display()))
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn load_suite(manifest: &Path) -> Result<Suite<f64>> {
    Ok(Suite::<f64>::load(manifest)?)
}

fn suite_cameras(suite: &Suite<f64>) -> Result<Vec<Camera<f64>>> {
    Ok(suite.cameras.cameras::<f64>()?)
}

fn pose_index(suite: &Suite<f64>, id: u64) -> Result<usize> {
    suite.index_of(id).ok_or_else(|| usage(format!("pose {id} is not in the manifest")))
}

fn check_camera(cams: &[Camera<f64>], k: usize) -> Result<()> {
    if k >= cams.len() {
        return Err(usage(format!("camera {k} out of range (array has {})", cams.len())));
    }
    Ok(())
}

fn split_ids(suite: &Suite<f64>, split: SplitName) -> Vec<u64> {
    match split {
        SplitName::Train => suite.split.train.clone(),
        SplitName::Val => suite.split.val.clone(),
        SplitName::Test => suite.split.test.clone(),
        SplitName::All => suite.poses.iter().map(|p| p.id).collect(),
    }
}

/// A field index with its directory and the meshes its fields live on.
struct LoadedSet {
    dir: PathBuf,
    set: FieldSet,
}

impl LoadedSet {
    fn load(path: &Path) -> Result<Self> {
        Ok(Self { dir: parent_dir(path), set: FieldSet::load(path)? })
    }

    fn field(&self, pose: u64, camera: usize, mesh: &TexturedMesh<f64>) -> Result<TsField<f64>> {
        let e = self
            .set
            .get(pose, camera)
            .ok_or_else(|| anyhow::anyhow!("{}: no field for pose {pose} camera {camera}", self.dir.display()))?;
        let path = self.dir.join(&e.file);
        let f = TsField::<f64>::load(&path)?;
        f.check_len(mesh).with_context(|| format!("{}", path.display()))?;
        Ok(f)
    }
}

fn synth(a: SynthArgs, cfg: &Config, seed: u64) -> Result<()> {
    let d = SynthConfig::default();
    let config = SynthConfig {
        resolution: a.resolution.or(cfg.resolution).unwrap_or(d.resolution),
        wrinkles: a.wrinkles.or(cfg.wrinkles).unwrap_or(d.wrinkles),
        smoothing: a.smoothing.or(cfg.smoothing).unwrap_or(d.smoothing),
        poses: a.poses.or(cfg.poses).unwrap_or(d.poses),
        seed,
    };
    if config.resolution < 2 {
        return Err(usage("--resolution must be at least 2"));
    }
    stage(format_args!("synth: {} poses at {}x{}", config.poses, config.resolution, config.resolution));
    let mut suite = Suite::<f64>::generate(&config)?;
    if let Some(p) = a.cameras.as_ref().or(cfg.cameras.as_ref()) {
        suite.cameras = CameraArray::load(p)?;
    }
    suite.write(&a.out)?;
    Ok(())
}

fn params_from(t: &ThresholdArgs, cfg: &Config) -> TsParams {
    let d = TsParams::default();
    TsParams {
        tau_uv: t.tau_uv.or(cfg.tau_uv).unwrap_or(d.tau_uv),
        tau_d: t.tau_d.or(cfg.tau_d),
        smooth_iters: cfg.smooth_iters.unwrap_or(d.smooth_iters),
        subdivide: t.subdivide.or(cfg.subdivide).unwrap_or(d.subdivide),
    }
}

fn tsgen(a: TsgenArgs, cfg: &Config) -> Result<()> {
    let suite = load_suite(&a.manifest)?;
    let cams = suite_cameras(&suite)?;
    let which: Vec<usize> = if a.camera.is_empty() { (0..cams.len()).collect() } else { a.camera.clone() };
    for &k in &which {
        check_camera(&cams, k)?;
    }
    let params = params_from(&a.thresholds, cfg);
    stage(format_args!("tsgen: {} poses, cameras {which:?}, subdivision {}", suite.poses.len(), params.subdivide));
    if let Some(first) = suite.inferred.first() {
        let mesh = subdivide(first, params.subdivide);
        let (uv_edge, _) = field_edge_maxima(&mesh, &TsField::uniform(mesh.num_vertices(), Vec2::zero(), Source::Ray))?;
        if uv_edge >= params.tau_uv {
            log::warn!(
                "tau_uv {} does not exceed the longest uv edge {uv_edge:.4}; most edges will be pruned",
                params.tau_uv
            );
        }
    }
    create_dir(&a.out)?;
    let mut entries = Vec::new();
    for (i, pose) in suite.poses.iter().enumerate() {
        let scenes = GtScenes::new(&suite.gt[i])?;
        let inferred = subdivide(&suite.inferred[i], params.subdivide);
        for &k in &which {
            let (raw, _) = raw_field(&scenes, &inferred, &cams[k], &params)
                .with_context(|| format!("pose {} camera {k}", pose.id))?;
            let file = FieldSet::file_name(pose.id, k);
            raw.save(a.out.join(&file))?;
            entries.push(FieldEntry { pose: pose.id, camera: k, file });
        }
    }
    FieldSet { subdivide: params.subdivide, params, entries }.save(a.out.join("fields.json"))?;
    Ok(())
}

fn extrapolate(a: ExtrapolateArgs, cfg: &Config) -> Result<()> {
    let suite = load_suite(&a.manifest)?;
    let src = LoadedSet::load(&a.fields)?;
    let iters = a.smooth_iters.or(cfg.smooth_iters).unwrap_or(src.set.params.smooth_iters);
    stage(format_args!("extrapolate: {} fields, {iters} smoothing iterations", src.set.entries.len()));
    create_dir(&a.out)?;
    let mut set = src.set.clone();
    set.params.smooth_iters = iters;
    for e in &src.set.entries {
        let inferred = subdivide(&suite.inferred[pose_index(&suite, e.pose)?], src.set.subdivide);
        let raw = src.field(e.pose, e.camera, &inferred)?;
        let full =
            extend_field(&inferred, &raw, iters).with_context(|| format!("pose {} camera {}", e.pose, e.camera))?;
        full.save(a.out.join(&e.file))?;
    }
    set.save(a.out.join("fields.json"))?;
    Ok(())
}

fn examples(
    suite: &Suite<f64>,
    src: &LoadedSet,
    ids: &[u64],
    camera: usize,
    width: usize,
) -> Result<Vec<Example<f32>>> {
    ids.iter()
        .map(|&id| {
            let i = pose_index(suite, id)?;
            let inferred = subdivide(&suite.inferred[i], src.set.subdivide);
            let field = src.field(id, camera, &inferred)?;
            Ok(tsnn_example(&suite.poses[i], &inferred, &field, width)?)
        })
        .collect()
}

fn train_cmd(a: TrainArgs, cfg: &Config, seed: u64) -> Result<()> {
    let suite = load_suite(&a.manifest)?;
    check_camera(&suite_cameras(&suite)?, a.camera)?;
    let src = LoadedSet::load(&a.fields)?;
    let width = a.width.or(cfg.width).unwrap_or(64);
    let d = TrainConfig::default();
    let tc = TrainConfig {
        epochs: a.epochs.or(cfg.epochs).unwrap_or(d.epochs),
        batch_size: a.batch_size.or(cfg.batch_size).unwrap_or(d.batch_size),
        lr: a.lr.or(cfg.lr).unwrap_or(d.lr),
        seed,
    };
    if tc.batch_size == 0 {
        return Err(usage("--batch-size must be positive"));
    }
    let input_dim =
        suite.poses.first().map(|p| p.params.len()).ok_or_else(|| anyhow::anyhow!("manifest has no poses"))?;
    let arch = ArchSpec::desk(input_dim, width).map_err(|e| usage(e.to_string()))?;
    let train_set = examples(&suite, &src, &suite.split.train, a.camera, width)?;
    let val_set = examples(&suite, &src, &suite.split.val, a.camera, width)?;
    stage(format_args!(
        "train: camera {}, {} train / {} val examples, {} epochs",
        a.camera,
        train_set.len(),
        val_set.len(),
        tc.epochs
    ));
    let model = DecoderModel::<f32>::new(arch, seed)?;
    let outcome = train(model, &train_set, &val_set, &tc)?;
    checkpoint::save(&outcome.best, &a.out)?;
    if let Some(p) = &a.curve {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &outcome.curve {
            s.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
        }
        write(p, s)?;
    }
    Ok(())
}

fn infer(a: InferArgs, cfg: &Config) -> Result<()> {
    let suite = load_suite(&a.manifest)?;
    check_camera(&suite_cameras(&suite)?, a.camera)?;
    let model = checkpoint::load::<f32>(&a.model)?;
    let split = a.split.or(cfg.split).unwrap_or(SplitName::Test);
    let levels = a.subdivide.or(cfg.subdivide).unwrap_or(0);
    let ids = split_ids(&suite, split);
    stage(format_args!("infer: camera {}, {} poses", a.camera, ids.len()));
    create_dir(&a.out)?;
    let mut entries = Vec::new();
    for id in ids {
        let i = pose_index(&suite, id)?;
        let inferred = subdivide(&suite.inferred[i], levels);
        let (field, missed) = predict_field(&model, &suite.poses[i], &inferred)?;
        if missed > 0 {
            log::warn!("pose {id}: {missed} vertices outside the predicted image");
        }
        let file = FieldSet::file_name(id, a.camera);
        field.save(a.out.join(&file))?;
        entries.push(FieldEntry { pose: id, camera: a.camera, file });
    }
    let params = TsParams { subdivide: levels, ..TsParams::default() };
    FieldSet { subdivide: levels, params, entries }.save(a.out.join("fields.json"))?;
    Ok(())
}

fn blendview(a: BlendviewArgs, cfg: &Config) -> Result<()> {
    let suite = load_suite(&a.manifest)?;
    let cams = suite_cameras(&suite)?;
    let src = LoadedSet::load(&a.fields)?;
    let i = pose_index(&suite, a.pose)?;
    let steps = a.steps.or(cfg.steps).unwrap_or(11);
    if steps < 2 {
        return Err(usage("--steps must be at least 2"));
    }
    let inferred = subdivide(&suite.inferred[i], src.set.subdivide);
    let fields = (0..cams.len()).map(|k| src.field(a.pose, k, &inferred)).collect::<Result<Vec<_>>>()?;
    let axis: Vec<f64> = (0..steps).map(|s| s as f64 / (steps - 1) as f64).collect();
    let (params, header): (Vec<Vec<f64>>, &str) = match suite.cameras.layout {
        ArrayLayout::Grid { .. } => {
            (axis.iter().flat_map(|&y| axis.iter().map(move |&x| vec![x, y])).collect(), "param_x,param_y,sqrt_mse\n")
        }
        _ => (axis.iter().map(|&x| vec![x]).collect(), "param,sqrt_mse\n"),
    };
    stage(format_args!("blendview: pose {}, {} samples", a.pose, params.len()));
    let gt = TracedMesh::new(suite.gt[i].clone());
    let inf = TracedMesh::new(inferred);
    let positions: Vec<_> = cams.iter().map(|c| c.position).collect();
    let (_, map) = texslide::pipeline::front_patch(&inf.mesh)?;
    let front: Vec<TsField<f64>> = fields.iter().map(|f| map.restrict_field(f)).collect();
    let mut csv = String::from(header);
    for p in &params {
        let w = weights_for(&suite.cameras.layout, &positions, p)?;
        let field = map.lift_field(&blend(&front, &w)?);
        let cam = interpolate_camera(&cams, &w)?;
        let img = field_error_image(&gt, &inf, Some(&field), &cam)?;
        let e = sqrt_mse(&img)?;
        let cols: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        csv.push_str(&format!("{},{e}\n", cols.join(",")));
    }
    write(&a.out, csv)
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let suite = load_suite(&a.manifest)?;
    let cams = suite_cameras(&suite)?;
    let src = LoadedSet::load(&a.fields)?;
    let i = pose_index(&suite, a.pose)?;
    let base = &suite.inferred[i];
    let fine = subdivide(base, src.set.subdivide);
    let which = src.set.cameras();
    for &k in &which {
        check_camera(&cams, k)?;
    }
    let fields = which.iter().map(|&k| src.field(a.pose, k, &fine)).collect::<Result<Vec<_>>>()?;
    let views: Vec<Camera<f64>> = which.iter().map(|&k| cams[k]).collect();
    let post = if a.taubin { Postprocess::Taubin } else { Postprocess::None };
    stage(format_args!("reconstruct: pose {} from cameras {which:?}", a.pose));
    let rec = reconstruct_pose(base, &fine, &views, &fields, post)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_obj(&rec.mesh, &a.out)?;
    if let Some(p) = &a.report {
        write(p, report_csv(&rec.vertices))?;
    }
    Ok(())
}

fn stats_or_skip(name: &str, values: &[f64], rows: &mut Vec<(String, Stats<f64>)>) {
    match dataset_stats(values) {
        Ok(s) => rows.push((name.to_string(), s)),
        Err(_) => log::warn!("{name}: fewer than two values, row omitted"),
    }
}

fn eval(a: EvalArgs, cfg: &Config) -> Result<()> {
    if !a.label.is_empty() && a.label.len() != a.fields.len() {
        return Err(usage(format!("{} labels for {} field sets", a.label.len(), a.fields.len())));
    }
    if a.reference.is_some() && a.fields.is_empty() {
        return Err(usage("--reference needs a --fields set to break down"));
    }
    let suite = load_suite(&a.manifest)?;
    let cams = suite_cameras(&suite)?;
    let sets = a.fields.iter().map(|p| LoadedSet::load(p)).collect::<Result<Vec<_>>>()?;
    let reference = a.reference.as_deref().map(LoadedSet::load).transpose()?;
    let labels: Vec<String> = if a.label.is_empty() {
        sets.iter()
            .map(|s| if s.set.subdivide == 0 { "ts".to_string() } else { format!("ts+sub{}", s.set.subdivide) })
            .collect()
    } else {
        a.label.clone()
    };
    let which = match sets.first() {
        Some(s) => s.set.cameras(),
        None => (0..cams.len()).collect(),
    };
    for &k in &which {
        check_camera(&cams, k)?;
    }
    let split = a.split.or(cfg.split).unwrap_or(SplitName::All);
    let ids = split_ids(&suite, split);
    stage(format_args!("eval: {} poses, cameras {which:?}, {} methods", ids.len(), sets.len() + 1));

    let mut base = Vec::new();
    let mut per_set = vec![Vec::new(); sets.len()];
    let mut classes = [Vec::new(), Vec::new(), Vec::new()];
    let mut image_rows = Vec::new();
    for &id in &ids {
        let i = pose_index(&suite, id)?;
        let gt = TracedMesh::new(suite.gt[i].clone());
        let inf = TracedMesh::new(suite.inferred[i].clone());
        let fines: Vec<TracedMesh<f64>> =
            sets.iter().map(|s| TracedMesh::new(subdivide(&suite.inferred[i], s.set.subdivide))).collect();
        for &k in &which {
            base.push(sqrt_mse(&field_error_image(&gt, &inf, None, &cams[k])?)?);
            for (j, s) in sets.iter().enumerate() {
                let f = s.field(id, k, &fines[j].mesh)?;
                let e = match (&reference, j) {
                    (Some(r), 0) => {
                        let rf = r.field(id, k, &fines[0].mesh)?;
                        let sc = score_prediction(&gt, &fines[0], &f, &rf, &cams[k])?;
                        for (c, v) in [sc.breakdown.ray, sc.breakdown.extrapolated, sc.breakdown.combination]
                            .into_iter()
                            .enumerate()
                        {
                            if let Some(v) = v {
                                classes[c].push(v);
                            }
                        }
                        sc.sqrt_mse
                    }
                    _ => sqrt_mse(&field_error_image(&gt, &fines[j], Some(&f), &cams[k])?)?,
                };
                if j == 0 {
                    image_rows.push(ImageRow { pose: id, camera: k, sqrt_mse: e });
                }
                per_set[j].push(e);
            }
        }
    }
    let mut rows = Vec::new();
    stats_or_skip("baseline", &base, &mut rows);
    for (l, v) in labels.iter().zip(&per_set) {
        stats_or_skip(l, v, &mut rows);
    }
    if reference.is_some() {
        for (c, name) in ["ray", "extrapolated", "combination"].iter().enumerate() {
            stats_or_skip(&format!("{}:{name}", labels[0]), &classes[c], &mut rows);
        }
    }
    write(&a.out, stats_csv(&rows))?;
    if let Some(p) = &a.per_image {
        write(p, rows_csv(&image_rows))?;
    }
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    if !(a.clamp > 0.0) {
        return Err(usage("--clamp must be positive"));
    }
    let suite = load_suite(&a.manifest)?;
    let cams = suite_cameras(&suite)?;
    check_camera(&cams, a.camera)?;
    let i = pose_index(&suite, a.pose)?;
    let gt = TracedMesh::new(suite.gt[i].clone());
    let (inf, field) = match &a.fields {
        Some(p) => {
            let s = LoadedSet::load(p)?;
            let mesh = subdivide(&suite.inferred[i], s.set.subdivide);
            let f = s.field(a.pose, a.camera, &mesh)?;
            (TracedMesh::new(mesh), Some(f))
        }
        None => (TracedMesh::new(suite.inferred[i].clone()), None),
    };
    stage(format_args!("render: pose {} camera {}", a.pose, a.camera));
    let img = field_error_image(&gt, &inf, field.as_ref(), &cams[a.camera])?;
    write(&a.out, error_ppm(&img, a.clamp))
}
