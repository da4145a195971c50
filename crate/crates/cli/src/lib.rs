//! Command-line pipelines over the `planewarp` library.

pub mod config;
mod fixtures;
mod io;

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;
use planewarp::deform::{deform_batch, DeformerHandle, Method, PoseFile};
use planewarp::field::{read_field, FieldShape, Normalization};
use planewarp::fit::{fit_from, read_checkpoint, write_checkpoint, AdamState, FitConfig, TrainSample};
use planewarp::mesh::{decimate_pair, load_obj, save_obj, PosedPair};
use planewarp::metrics::{bench_deformers, bench_points, write_bench_csv, MetricReport};
use planewarp::render::{render_image, Camera, Frame, SamplingConfig};
use serde::{Deserialize, Serialize};

pub use config::{resolve, Cli, Command, RunConfig};
pub use fixtures::write_fixtures;

/// Parses `args`, runs the subcommand and returns the exit code. Failures
/// print one JSON line `{"status":"error",...}` to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            error_line("usage", &e.kind().to_string());
            return 2;
        }
    };
    let name = config::command_name(&cli.command);
    match resolve(&cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            error_line(name, &format!("{e:#}"));
            1
        }
    }
}

fn error_line(command: &str, message: &str) {
    let line = serde_json::json!({ "status": "error", "command": command, "message": message });
    eprintln!("{line}");
}

/// Runs a resolved configuration and writes its echo next to the outputs.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    if let Some(n) = cfg.threads {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let echo = cfg.to_json();
    println!("{echo}");
    let out = &cfg.out;
    let echo_path = match &cfg.command {
        Command::Decimate(a) => {
            let pair = load_pair_args(a.pose.as_deref(), a.canonical.as_deref(), a.deformed.as_deref())?;
            let target = a.target_faces.expect("defaulted");
            let (coarse, map) = decimate_pair(&pair, target)?;
            std::fs::create_dir_all(out)?;
            save_obj(&coarse.canonical, out.join("canonical.obj"))?;
            save_obj(&coarse.deformed, out.join("deformed.obj"))?;
            io::write_json(&out.join("map.json"), &map)?;
            let bones = match &a.pose {
                Some(p) => PoseFile::read(p)?.bones,
                None => None,
            };
            PoseFile { canonical_obj: "canonical.obj".into(), deformed_obj: "deformed.obj".into(), bones }.write(&out.join("pose.json"))?;
            out.join("config.json")
        }
        Command::Expand(a) => {
            let mesh = load_obj(config::required(&a.mesh, "mesh")?)?;
            save_obj(&mesh.expand(a.growth.expect("defaulted")), out)?;
            sibling(out, "config.json")
        }
        Command::Deform(a) => {
            let points = io::read_points(config::required(&a.points, "points")?)?;
            let (pair, skeleton) = load_pose(config::required(&a.pose, "pose")?)?;
            let method = parse_method(a.method.as_deref().expect("defaulted"))?;
            let handle = DeformerHandle::build(method, &pair, skeleton.as_ref(), a.grid_res.expect("defaulted"))?;
            io::write_points(out, &deform_batch(&points, &handle)?)?;
            sibling(out, "config.json")
        }
        Command::Render(a) => {
            let field = read_field(config::required(&a.field, "field")?)?;
            let (pair, skeleton) = load_pose(config::required(&a.pose, "pose")?)?;
            let camera = Camera::read(config::required(&a.camera, "camera")?)?;
            let sampling = SamplingConfig {
                n_coarse: a.coarse.expect("defaulted"),
                n_fine: a.fine.expect("defaulted"),
                jitter: a.jitter.expect("defaulted"),
                growth: a.growth.expect("defaulted"),
                background: background(a.background.as_deref())?,
            };
            let method = parse_method(a.method.as_deref().expect("defaulted"))?;
            let frame = build_frame(&pair, skeleton.as_ref(), method, a.grid_res.expect("defaulted"), sampling.growth, None)?;
            let img = render_image(&field, &frame, &camera, &sampling, cfg.seed)?;
            if io::is_fimg_path(out) {
                img.features.write(out)?;
            } else {
                io::write_png(out, img.width, img.height, &img.rgb)?;
            }
            sibling(out, "config.json")
        }
        Command::Fit(a) => {
            run_fit(a, cfg.seed, out)?;
            out.join("config.json")
        }
        Command::Bench(a) => {
            let (pair, skeleton) = load_pose(config::required(&a.pose, "pose")?)?;
            let methods = a.methods.as_ref().expect("defaulted").iter().map(|m| parse_method(m)).collect::<Result<Vec<_>>>()?;
            let pts = bench_points(&pair, a.growth.expect("defaulted"), a.points.expect("defaulted"), cfg.seed);
            let results = bench_deformers(&pair, skeleton.as_ref(), &methods, &pts, a.repeats.expect("defaulted"), a.grid_res.expect("defaulted"))?;
            let mut csv = Vec::new();
            write_bench_csv(&results, &mut csv)?;
            std::fs::write(out, &csv).with_context(|| format!("writing {}", out.display()))?;
            io::write_json(&out.with_extension("json"), &results)?;
            sibling(out, "config.json")
        }
        Command::Metrics(a) => {
            let pred = io::read_rgb(config::required(&a.pred, "pred")?)?;
            let gt = io::read_rgb(config::required(&a.gt, "gt")?)?;
            let mask = match &a.mask {
                Some(p) => {
                    let (w, h, m) = io::read_mask(p)?;
                    if (w, h) != (gt.width, gt.height) {
                        bail!("mask {} is {w}x{h}, images are {}x{}", p.display(), gt.width, gt.height);
                    }
                    Some(m)
                }
                None => None,
            };
            let report = MetricReport::compute(&pred, &gt, mask.as_deref())?;
            std::fs::write(out, report.to_json() + "\n").with_context(|| format!("writing {}", out.display()))?;
            sibling(out, "config.json")
        }
        Command::Fixtures(a) => {
            write_fixtures(out, cfg.seed, a.size.expect("defaulted"))?;
            out.join("config.json")
        }
    };
    std::fs::write(&echo_path, echo + "\n").with_context(|| format!("writing {}", echo_path.display()))?;
    Ok(())
}

/// `<out>.<suffix>` next to a file output.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn parse_method(s: &str) -> Result<Method> {
    s.parse().map_err(|e| anyhow::anyhow!("--method: {e}"))
}

fn background(v: Option<&[f64]>) -> Result<[f64; 3]> {
    match v {
        None => Ok([0.0; 3]),
        Some(&[r, g, b]) => Ok([r, g, b]),
        Some(other) => bail!("--background needs 3 values, got {}", other.len()),
    }
}

fn load_pose(path: &Path) -> Result<(PosedPair, Option<planewarp::deform::Skeleton>)> {
    let pose = PoseFile::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let pair = pose.load_pair(base).with_context(|| format!("pose {}", path.display()))?;
    Ok((pair, pose.skeleton()?))
}

fn load_pair_args(pose: Option<&Path>, canonical: Option<&Path>, deformed: Option<&Path>) -> Result<PosedPair> {
    match (pose, canonical, deformed) {
        (Some(p), None, None) => Ok(load_pose(p)?.0),
        (None, Some(c), Some(d)) => Ok(PosedPair::new(load_obj(c)?, load_obj(d)?)?),
        _ => bail!("give either --pose or both --canonical and --deformed"),
    }
}

fn build_frame(
    pair: &PosedPair,
    skeleton: Option<&planewarp::deform::Skeleton>,
    method: Method,
    grid_res: usize,
    growth: f64,
    normalization: Option<Normalization>,
) -> Result<Frame> {
    let handle = DeformerHandle::build(method, pair, skeleton, grid_res)?;
    let norm = normalization.unwrap_or_else(|| Normalization::fit(&pair.canonical.expand(growth).bbox()));
    Ok(Frame::new(handle, &pair.deformed.expand(growth), norm))
}

/// One supervised view of a fitting manifest; paths are relative to the
/// manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub camera: PathBuf,
    pub image: PathBuf,
    pub pose: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub views: Vec<ManifestView>,
}

fn run_fit(a: &config::FitArgs, seed: u64, out: &Path) -> Result<()> {
    let manifest_path = config::required(&a.manifest, "manifest")?;
    let manifest: Manifest = io::read_json(manifest_path)?;
    if manifest.views.is_empty() {
        bail!("manifest {} has no views", manifest_path.display());
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let growth = a.growth.expect("defaulted");
    let method = parse_method(a.method.as_deref().expect("defaulted"))?;
    let grid_res = a.grid_res.expect("defaulted");
    let mut frames: HashMap<PathBuf, Frame> = HashMap::new();
    let mut norm = None;
    let mut samples = Vec::with_capacity(manifest.views.len());
    for v in &manifest.views {
        let pose_path = base.join(&v.pose);
        if !frames.contains_key(&pose_path) {
            let (pair, skeleton) = load_pose(&pose_path)?;
            // every pose shares the canonical space of the first one
            let n = *norm.get_or_insert_with(|| Normalization::fit(&pair.canonical.expand(growth).bbox()));
            frames.insert(pose_path.clone(), build_frame(&pair, skeleton.as_ref(), method, grid_res, growth, Some(n))?);
        }
        let camera = Camera::read(&base.join(&v.camera))?;
        let img = io::read_rgb(&base.join(&v.image))?;
        if (img.width, img.height) != (camera.width, camera.height) {
            bail!("image {} does not match camera {}", v.image.display(), v.camera.display());
        }
        let mask = match &v.mask {
            Some(m) => Some(io::read_mask(&base.join(m))?.2),
            None => None,
        };
        samples.push(TrainSample::new(camera, frames[&pose_path].clone(), img.data, mask)?);
    }
    let cfg = FitConfig {
        step_size: a.step_size.expect("defaulted"),
        batch_rays: a.batch_rays.expect("defaulted"),
        steps: a.steps.expect("defaulted"),
        seed,
        samples_per_ray: a.coarse.expect("defaulted"),
        jitter: a.jitter.expect("defaulted"),
        background: background(a.background.as_deref())?,
        shape: FieldShape {
            resolution: a.resolution.expect("defaulted"),
            channels: a.channels.expect("defaulted"),
            hidden: a.hidden.expect("defaulted"),
            out_features: a.out_features.expect("defaulted"),
        },
        plane_init: a.plane_init.expect("defaulted"),
        ..FitConfig::default()
    };
    let (field, adam) = match &a.resume {
        Some(p) => read_checkpoint(p)?,
        None => {
            let f = planewarp::field::RadianceField::init(cfg.shape, cfg.plane_init, cfg.seed);
            let n = f.parameter_count();
            (f, AdamState::new(n))
        }
    };
    let first_step = adam.step;
    let result = fit_from(field, adam, &samples, &cfg)?;
    std::fs::create_dir_all(out)?;
    write_checkpoint(&out.join("checkpoint.tplf"), &result.field, &result.adam)?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in result.losses.iter().enumerate() {
        csv.push_str(&format!("{},{l:e}\n", first_step + i as u64 + 1));
    }
    std::fs::write(out.join("loss.csv"), csv)?;
    Ok(())
}
