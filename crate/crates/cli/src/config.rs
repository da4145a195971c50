//! Command-line flags, optional JSON config files and the resolved run
//! configuration echoed next to outputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Parser)]
#[command(name = "planewarp", version, about = "Deformable tri-plane radiance fields")]
pub struct Cli {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Decimate a mesh pair, writing the coarse pair and correspondence map.
    Decimate(DecimateArgs),
    /// Push every vertex along its normal.
    Expand(ExpandArgs),
    /// Map target-space points to the canonical pose.
    Deform(DeformArgs),
    /// Render a field in a pose.
    Render(RenderArgs),
    /// Fit a field to posed images.
    Fit(FitArgs),
    /// Time the deformers.
    Bench(BenchArgs),
    /// Masked PSNR and SSIM of an image pair.
    Metrics(MetricsArgs),
    /// Write the synthetic test scenes.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecimateArgs {
    /// Pose file naming the pair (alternative to --canonical/--deformed).
    #[arg(long)]
    pub pose: Option<PathBuf>,
    #[arg(long)]
    pub canonical: Option<PathBuf>,
    #[arg(long)]
    pub deformed: Option<PathBuf>,
    #[arg(long)]
    pub target_faces: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandArgs {
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub growth: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformArgs {
    /// JSON array of `[x, y, z]` points.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// sf, skin, mvc or mvc-grid.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub grid_res: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderArgs {
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long)]
    pub pose: Option<PathBuf>,
    #[arg(long)]
    pub camera: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub grid_res: Option<usize>,
    #[arg(long)]
    pub coarse: Option<usize>,
    #[arg(long)]
    pub fine: Option<usize>,
    #[arg(long)]
    pub growth: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub jitter: Option<bool>,
    /// Background color as `r,g,b`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub background: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// JSON with a `views` list of `{camera, image, pose, mask?}`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Checkpoint to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_rays: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Stratified samples per ray.
    #[arg(long)]
    pub coarse: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub jitter: Option<bool>,
    #[arg(long)]
    pub growth: Option<f64>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub grid_res: Option<usize>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub out_features: Option<usize>,
    #[arg(long)]
    pub plane_init: Option<f32>,
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub background: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchArgs {
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub grid_res: Option<usize>,
    #[arg(long)]
    pub growth: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsArgs {
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Foreground mask image; non-zero pixels are evaluated.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixturesArgs {
    /// Side length of the toy scene images.
    #[arg(long)]
    pub size: Option<usize>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    #[serde(flatten)]
    pub command: Command,
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn fill<T>(slot: &mut Option<T>, v: T) {
    if slot.is_none() {
        *slot = Some(v);
    }
}

pub fn required<'a, T>(slot: &'a Option<T>, flag: &str) -> Result<&'a T> {
    slot.as_ref().with_context(|| format!("missing --{flag}"))
}

/// Overlays non-null flag values on the file values.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, mut file: Map<String, Value>) -> Result<T> {
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                file.insert(k, v);
            }
        }
    }
    Ok(serde_json::from_value(Value::Object(file))?)
}

fn merge_command(cmd: &Command, file: Map<String, Value>) -> Result<Command> {
    Ok(match cmd {
        Command::Decimate(a) => Command::Decimate(merge(a, file)?),
        Command::Expand(a) => Command::Expand(merge(a, file)?),
        Command::Deform(a) => Command::Deform(merge(a, file)?),
        Command::Render(a) => Command::Render(merge(a, file)?),
        Command::Fit(a) => Command::Fit(merge(a, file)?),
        Command::Bench(a) => Command::Bench(merge(a, file)?),
        Command::Metrics(a) => Command::Metrics(merge(a, file)?),
        Command::Fixtures(a) => Command::Fixtures(merge(a, file)?),
    })
}

pub fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Decimate(_) => "decimate",
        Command::Expand(_) => "expand",
        Command::Deform(_) => "deform",
        Command::Render(_) => "render",
        Command::Fit(_) => "fit",
        Command::Bench(_) => "bench",
        Command::Metrics(_) => "metrics",
        Command::Fixtures(_) => "fixtures",
    }
}

fn fill_defaults(cmd: &mut Command) {
    match cmd {
        Command::Decimate(a) => fill(&mut a.target_faces, 1376),
        Command::Expand(a) => fill(&mut a.growth, planewarp::render::DEFAULT_GROWTH),
        Command::Deform(a) => {
            fill(&mut a.method, "sf".into());
            fill(&mut a.grid_res, planewarp::deform::DEFAULT_GRID_RES);
        }
        Command::Render(a) => {
            let d = planewarp::render::SamplingConfig::default();
            fill(&mut a.method, "sf".into());
            fill(&mut a.grid_res, planewarp::deform::DEFAULT_GRID_RES);
            fill(&mut a.coarse, d.n_coarse);
            fill(&mut a.fine, d.n_fine);
            fill(&mut a.growth, d.growth);
            fill(&mut a.jitter, d.jitter);
            fill(&mut a.background, d.background.to_vec());
        }
        Command::Fit(a) => {
            let d = planewarp::fit::FitConfig::default();
            fill(&mut a.steps, d.steps);
            fill(&mut a.batch_rays, d.batch_rays);
            fill(&mut a.step_size, d.step_size);
            fill(&mut a.coarse, d.samples_per_ray);
            fill(&mut a.jitter, d.jitter);
            fill(&mut a.growth, planewarp::render::DEFAULT_GROWTH);
            fill(&mut a.method, "sf".into());
            fill(&mut a.grid_res, planewarp::deform::DEFAULT_GRID_RES);
            fill(&mut a.resolution, d.shape.resolution);
            fill(&mut a.channels, d.shape.channels);
            fill(&mut a.hidden, d.shape.hidden);
            fill(&mut a.out_features, d.shape.out_features);
            fill(&mut a.plane_init, d.plane_init);
            fill(&mut a.background, d.background.to_vec());
        }
        Command::Bench(a) => {
            fill(&mut a.methods, planewarp::deform::Method::ALL.iter().map(|m| m.name().to_string()).collect());
            fill(&mut a.points, 1 << 20);
            fill(&mut a.repeats, 5);
            fill(&mut a.grid_res, planewarp::deform::DEFAULT_GRID_RES);
            fill(&mut a.growth, planewarp::render::DEFAULT_GROWTH);
        }
        Command::Metrics(_) => {}
        Command::Fixtures(a) => fill(&mut a.size, 64),
    }
}

fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("config {}", path.display()))? {
        Value::Object(m) => Ok(m),
        _ => bail!("config {}: expected a JSON object", path.display()),
    }
}

/// Merges flags over the config file and fills defaults.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut file = match &cli.config {
        Some(p) => read_config_file(p)?,
        None => Map::new(),
    };
    let take = |file: &mut Map<String, Value>, k: &str| file.remove(k).filter(|v| !v.is_null());
    let seed = match (cli.seed, take(&mut file, "seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => serde_json::from_value(v).context("config key seed")?,
        (None, None) => 0,
    };
    let threads = match (cli.threads, take(&mut file, "threads")) {
        (Some(t), _) => Some(t),
        (None, Some(v)) => Some(serde_json::from_value(v).context("config key threads")?),
        (None, None) => None,
    };
    let out = match (&cli.out, take(&mut file, "out")) {
        (Some(o), _) => o.clone(),
        (None, Some(v)) => serde_json::from_value(v).context("config key out")?,
        (None, None) => bail!("missing --out"),
    };
    let mut command = merge_command(&cli.command, file).with_context(|| format!("config for {}", command_name(&cli.command)))?;
    fill_defaults(&mut command);
    Ok(RunConfig { seed, threads, out, command })
}
