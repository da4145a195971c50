use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use planewarp_cli::RunConfig;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planewarp"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Fixture tree generated once for all tests in this file.
fn fixtures() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        ok(dir.path(), &["fixtures", "--out", "fx", "--seed", "7", "--size", "24"]);
        dir
    })
    .path()
}

fn fx(rel: &str) -> String {
    fixtures().join("fx").join(rel).to_string_lossy().into_owned()
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn fixtures_are_bit_identical_across_runs() {
    let other = tempfile::tempdir().unwrap();
    ok(other.path(), &["fixtures", "--out", "fx", "--seed", "7", "--size", "24"]);
    let a = tree(&fixtures().join("fx"));
    let b = tree(&other.path().join("fx"));
    assert_eq!(a.len(), b.len());
    assert!(a == b, "fixture trees differ");
    let mesh = planewarp::mesh::load_obj(fx("decimation/mesh.obj")).unwrap();
    assert_eq!(mesh.faces.len(), 13_776);
    let c = planewarp::mesh::load_obj(fx("arm/canonical.obj")).unwrap();
    let d = planewarp::mesh::load_obj(fx("arm/deformed.obj")).unwrap();
    assert_eq!(c.faces, d.faces);
    assert!(c.faces.len() <= 1376);
}

#[test]
fn identity_pose_deform_returns_input() {
    let dir = tempfile::tempdir().unwrap();
    let pts: Vec<[f64; 3]> = (0..200)
        .map(|i| {
            let t = i as f64 * 0.37;
            [t.sin() * 0.9, (t * 1.3).cos() * 0.8, (t * 0.7).sin() * 1.1]
        })
        .collect();
    std::fs::write(dir.path().join("pts.json"), serde_json::to_string(&pts).unwrap()).unwrap();
    for method in ["sf", "mvc"] {
        ok(dir.path(), &["deform", "--points", "pts.json", "--pose", &fx("sphere/identity.json"), "--method", method, "--out", "o.json"]);
        let got: Vec<[f64; 3]> = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o.json")).unwrap()).unwrap();
        for (p, q) in pts.iter().zip(&got) {
            let err = (0..3).map(|k| (p[k] - q[k]).abs()).fold(0.0, f64::max);
            // mean value coordinates only reproduce the identity up to
            // their linear precision
            assert!(err < if method == "sf" { 1e-9 } else { 1e-6 }, "{method}: {p:?} -> {q:?}");
        }
    }
}

#[test]
fn config_echo_round_trips_and_flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pts.json"), "[[0.1, 0.0, 0.2]]").unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"seed": 3, "method": "mvc", "grid_res": 5, "points": "pts.json", "out": "from_file.json"}"#,
    )
    .unwrap();
    let out = ok(dir.path(), &["deform", "--config", "cfg.json", "--pose", &fx("sphere/pose.json"), "--method", "mvc-grid", "--out", "o.json"]);
    let echoed: RunConfig = serde_json::from_slice(&out.stdout).unwrap();
    let written: RunConfig = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o.json.config.json")).unwrap()).unwrap();
    assert_eq!(echoed, written);
    assert_eq!(written.seed, 3);
    assert_eq!(written.out, PathBuf::from("o.json"));
    let planewarp_cli::Command::Deform(args) = written.command else { panic!("wrong command") };
    assert_eq!(args.method.as_deref(), Some("mvc-grid"));
    assert_eq!(args.grid_res, Some(5));
    assert_eq!(args.points, Some(PathBuf::from("pts.json")));
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

#[test]
fn failures_exit_nonzero_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["deform", "--points", "missing.json", "--pose", "p.json", "--out", "o.json"]);
    assert_eq!(out.status.code(), Some(1));
    let e = error_line(&out);
    assert_eq!(e["status"], "error");
    assert_eq!(e["command"], "deform");
    assert!(e["message"].as_str().unwrap().contains("missing.json"));

    let out = run_in(dir.path(), &["render", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["status"], "error");

    let out = run_in(dir.path(), &["expand", "--out", "x.obj"]);
    assert!(error_line(&out)["message"].as_str().unwrap().contains("--mesh"));

    std::fs::write(dir.path().join("bad.json"), r#"{"nonsense": 1}"#).unwrap();
    let out = run_in(dir.path(), &["expand", "--config", "bad.json", "--mesh", "m.obj", "--out", "x.obj"]);
    assert!(error_line(&out)["message"].as_str().unwrap().contains("nonsense"));

    let out = run_in(dir.path(), &["deform", "--points", "x", "--pose", &fx("sphere/pose.json"), "--method", "warp", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn render_and_metrics_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let render = |name: &str| {
        ok(dir.path(), &[
            "render", "--field", &fx("toy/field.tplf"), "--pose", &fx("toy/pose_1.json"), "--camera", &fx("toy/camera_2.json"),
            "--coarse", "16", "--fine", "16", "--jitter", "--seed", "11", "--out", name,
        ]);
        std::fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(render("a.png"), render("b.png"));
    assert_eq!(render("a.fimg"), render("b.fimg"));
    let metrics = |name: &str| {
        ok(dir.path(), &["metrics", "--pred", "a.png", "--gt", &fx("toy/view_1_2.png"), "--mask", &fx("toy/view_1_2_mask.png"), "--out", name]);
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let m = metrics("m1.json");
    assert_eq!(m, metrics("m2.json"));
    let report: planewarp::metrics::MetricReport = serde_json::from_slice(&m).unwrap();
    assert!(report.ssim > 0.5 && report.ssim <= 1.0);
    assert!(report.psnr.unwrap() > 15.0);
}

#[test]
fn fit_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let fit = |out: &str, extra: &[&str]| {
        let manifest = fx("toy/manifest.json");
        let mut args = vec![
            "fit", "--manifest", &manifest, "--steps", "4", "--batch-rays", "128", "--coarse", "16",
            "--resolution", "8", "--channels", "4", "--hidden", "8", "--seed", "2", "--out", out,
        ];
        args.extend_from_slice(extra);
        ok(dir.path(), &args);
        (
            std::fs::read(dir.path().join(out).join("checkpoint.tplf")).unwrap(),
            std::fs::read_to_string(dir.path().join(out).join("loss.csv")).unwrap(),
        )
    };
    let a = fit("a", &[]);
    assert_eq!(a, fit("b", &[]));
    assert_eq!(a.1.lines().count(), 5);
    let resume = dir.path().join("a/checkpoint.tplf").to_string_lossy().into_owned();
    let c = fit("c", &["--resume", &resume]);
    assert!(c.1.lines().nth(1).unwrap().starts_with("5,"));
    let (_, adam) = planewarp::fit::read_checkpoint(&dir.path().join("c/checkpoint.tplf")).unwrap();
    assert_eq!(adam.step, 8);
}

#[test]
fn bench_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["bench", "--pose", &fx("arm/pose_24.json"), "--points", "3000", "--repeats", "3", "--grid-res", "6", "--out", "b.csv"]);
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,points,wall_ms_median,repeats");
    assert_eq!(lines.len(), 5);
    for (line, m) in lines[1..].iter().zip(["sf", "skin", "mvc", "mvc-grid"]) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], m);
        assert_eq!(cols[1], "3000");
        assert!(cols[2].parse::<f64>().unwrap() > 0.0);
        assert_eq!(cols[3], "3");
    }
    let json: Vec<planewarp::metrics::BenchResult> = serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert!(json.iter().all(|r| r.timings_ms.len() == 3));
}

#[test]
fn expand_and_decimate() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["expand", "--mesh", &fx("sphere/canonical.obj"), "--growth", "0.1", "--out", "e.obj"]);
    let e = planewarp::mesh::load_obj(dir.path().join("e.obj")).unwrap();
    let c = planewarp::mesh::load_obj(fx("sphere/canonical.obj")).unwrap();
    for (a, b) in e.vertices.iter().zip(&c.vertices) {
        assert!(((a - b).norm() - 0.1).abs() < 1e-9);
        assert!(a.norm() > b.norm());
    }
    ok(dir.path(), &["decimate", "--pose", &fx("sphere/pose.json"), "--target-faces", "300", "--out", "dec"]);
    let pose = dir.path().join("dec/pose.json").to_string_lossy().into_owned();
    let p = planewarp::deform::PoseFile::read(Path::new(&pose)).unwrap();
    let pair = p.load_pair(&dir.path().join("dec")).unwrap();
    assert!(pair.canonical.faces.len() <= 300);
    let map: planewarp::mesh::CorrespondenceMap = serde_json::from_str(&std::fs::read_to_string(dir.path().join("dec/map.json")).unwrap()).unwrap();
    assert!(map.is_partition_of(1280 / 2 + 2));
}
