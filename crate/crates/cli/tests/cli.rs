use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use texslide::field::TsField;
use texslide::geom::Vec2;
use texslide::pipeline::FieldSet;

fn texslide(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_texslide")).args(args).current_dir(cwd).output().expect("spawn texslide")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = texslide(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

const COMMANDS: [&str; 9] =
    ["synth", "tsgen", "extrapolate", "train", "infer", "blendview", "reconstruct", "eval", "render"];

#[test]
fn help_exits_zero_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(texslide(&["--help"], dir.path()).status.code(), Some(0));
    for c in COMMANDS {
        let out = texslide(&[c, "--help"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{c}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["synth", "--out", "x", "--bogus"],
        &["tsgen", "--out", "x"],
        &["synth", "--out", "x", "--poses", "many"],
        &[],
    ] {
        assert_eq!(texslide(args, dir.path()).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn data_errors_exit_two_and_name_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = texslide(&["tsgen", "--manifest", "missing.json", "--out", "f"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing.json"));
    assert_eq!(err.lines().count(), 1);

    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let out = texslide(&["eval", "--manifest", "bad.json", "--out", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for d in ["a", "b"] {
        ok(&["synth", "--poses", "8", "--seed", "1", "--resolution", "9", "--out", d], dir.path());
    }
    let a = fs::read(dir.path().join("a/manifest.json")).unwrap();
    let b = fs::read(dir.path().join("b/manifest.json")).unwrap();
    assert_eq!(a, b);
    for k in 0..8 {
        let f = format!("poses/p{k:04}_gt.obj");
        assert_eq!(fs::read(dir.path().join("a").join(&f)).unwrap(), fs::read(dir.path().join("b").join(&f)).unwrap());
    }
    ok(&["synth", "--poses", "8", "--seed", "2", "--resolution", "9", "--out", "c"], dir.path());
    assert_ne!(a, fs::read(dir.path().join("c/manifest.json")).unwrap());
}

#[test]
fn degenerate_manifest_gives_zero_fields() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--poses", "3", "--resolution", "17", "--smoothing", "0", "--out", "s"], dir.path());
    ok(&["tsgen", "--manifest", "s/manifest.json", "--out", "f"], dir.path());
    let set = FieldSet::load(dir.path().join("f/fields.json")).unwrap();
    assert_eq!(set.entries.len(), 6);
    for e in &set.entries {
        let f = TsField::<f64>::load(dir.path().join("f").join(&e.file)).unwrap();
        assert!(f.d.iter().all(|d| *d == Vec2::zero()), "{}", e.file);
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"poses": 3, "resolution": 9, "seed": 4}"#).unwrap();
    ok(&["synth", "--config", "cfg.json", "--out", "a"], dir.path());
    ok(&["synth", "--config", "cfg.json", "--poses", "4", "--out", "b"], dir.path());
    let a = texslide::synth::Manifest::load(dir.path().join("a/manifest.json")).unwrap();
    let b = texslide::synth::Manifest::load(dir.path().join("b/manifest.json")).unwrap();
    assert_eq!(a.poses.len(), 3);
    assert_eq!(b.poses.len(), 4);
    assert_eq!(a.settings.unwrap().seed, 4);

    fs::write(dir.path().join("typo.json"), r#"{"posses": 3}"#).unwrap();
    let out = texslide(&["synth", "--config", "typo.json", "--out", "c"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo.json"));
}

#[test]
fn pipeline_commands_write_readable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--poses", "6", "--resolution", "17", "--seed", "3", "--out", "s"], d);
    ok(&["tsgen", "--manifest", "s/manifest.json", "--out", "raw"], d);
    ok(&["extrapolate", "--manifest", "s/manifest.json", "--fields", "raw/fields.json", "--out", "ext"], d);
    ok(
        &[
            "eval",
            "--manifest",
            "s/manifest.json",
            "--fields",
            "ext/fields.json",
            "--out",
            "t.csv",
            "--per-image",
            "i.csv",
        ],
        d,
    );
    let table = fs::read_to_string(d.join("t.csv")).unwrap();
    assert!(table.starts_with("method,mean,std,n\nbaseline,"));
    assert!(table.contains("\nts,"));
    let rows = texslide::metrics::parse_rows_csv(&fs::read_to_string(d.join("i.csv")).unwrap(), "i.csv").unwrap();
    assert_eq!(rows.len(), 12);

    ok(
        &[
            "blendview",
            "--manifest",
            "s/manifest.json",
            "--fields",
            "ext/fields.json",
            "--pose",
            "0",
            "--steps",
            "3",
            "--out",
            "bv.csv",
        ],
        d,
    );
    let bv = fs::read_to_string(d.join("bv.csv")).unwrap();
    assert_eq!(bv.lines().count(), 4);
    assert!(bv.starts_with("param,sqrt_mse\n0,"));

    ok(
        &[
            "render",
            "--manifest",
            "s/manifest.json",
            "--pose",
            "1",
            "--camera",
            "1",
            "--fields",
            "ext/fields.json",
            "--out",
            "e.ppm",
        ],
        d,
    );
    let ppm = texslide::metrics::Ppm::load(d.join("e.ppm")).unwrap();
    assert_eq!((ppm.width, ppm.height), (256, 256));

    ok(
        &[
            "reconstruct",
            "--manifest",
            "s/manifest.json",
            "--fields",
            "raw/fields.json",
            "--pose",
            "2",
            "--out",
            "r.obj",
            "--report",
            "r.csv",
        ],
        d,
    );
    let mesh = texslide::mesh::load_obj::<f64>(d.join("r.obj")).unwrap();
    assert_eq!(mesh.num_vertices(), 2 * 17 * 17);
    assert!(fs::read_to_string(d.join("r.csv")).unwrap().starts_with("id,n_cameras,residual,source\n"));

    let out =
        texslide(&["render", "--manifest", "s/manifest.json", "--pose", "0", "--camera", "7", "--out", "x.ppm"], d);
    assert_eq!(out.status.code(), Some(1));
}
