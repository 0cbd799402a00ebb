//! Command-line driver for the panostereo library: dataset generation,
//! rectification, stereo matching, normal estimation, point-cloud export,
//! and evaluation.
//!
//! Every run writes `run.json` beside its outputs with the tool version, the
//! fully resolved configuration, and SHA-256 hashes of all input files, so
//! results can be traced back to exact bytes. All randomness flows from the
//! explicit `--seed` flag; nothing reads the clock or other ambient entropy.
//!
//! Exit codes: 0 success, 1 runtime or input error, 2 command-line usage
//! error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use panostereo::disparity::{
    pointcloud_from_disparity, DepthMap, DisparityMap, DisparityUnit,
};
use panostereo::eval::{disparity_metrics, normal_metrics, EvalReport};
use panostereo::field::{Mask, VectorField};
use panostereo::io::{pfm, ply, png, rig_json};
use panostereo::io::ply::PlyEncoding;
use panostereo::io::rig_json::RigSpec;
use panostereo::matcher::{match_pair_with_reference, MatcherParams};
use panostereo::math::Rotation3;
use panostereo::normals::{normals_from_depth, NormalFrame, NormalMap};
use panostereo::rig::ReferenceView;
use panostereo::scenegen::{generate_dataset, DatasetConfig, Recipe};
use panostereo::sphere::{rotate_erp, Interp};

/// Environment variable supplying the default worker-thread count.
const THREADS_ENV: &str = "PANOSTEREO_THREADS";

#[derive(Parser)]
#[command(name = "panostereo", version, about = "Top-bottom equirectangular stereo tooling")]
struct Cli {
    /// Worker threads (default: the PANOSTEREO_THREADS environment variable,
    /// then all cores). Outputs are identical for any thread count.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stereo dataset with full ground truth.
    Gen(GenArgs),
    /// Resample a stereo pair into the rig frame so the baseline is vertical.
    Rectify(RectifyArgs),
    /// Match a rectified pair into disparity, uncertainty, and validity maps.
    Match(MatchArgs),
    /// Estimate surface normals from a depth map.
    Normals(NormalsArgs),
    /// Lift a disparity map to a colored point cloud.
    Cloud(CloudArgs),
    /// Score a prediction against ground truth.
    Eval(EvalArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Rectify(args) => cmd_rectify(args),
        Command::Match(args) => cmd_match(args),
        Command::Normals(args) => cmd_normals(args),
        Command::Cloud(args) => cmd_cloud(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads(flag: Option<u32>) -> Result<()> {
    let count = match flag {
        Some(n) => Some(n as usize),
        None => match std::env::var(THREADS_ENV) {
            Ok(raw) => Some(
                raw.parse::<usize>()
                    .ok()
                    .filter(|n| *n >= 1)
                    .with_context(|| format!("{THREADS_ENV}={raw:?} is not a positive integer"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = count {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("failed to configure the thread pool")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Run metadata

/// Machine-readable record written as `run.json` beside every output.
#[derive(Serialize)]
struct RunMetadata {
    version: &'static str,
    command: &'static str,
    /// Fully resolved configuration after flag/config-file/default merging.
    config: serde_json::Value,
    /// SHA-256 hex digest of every input file, keyed by flag name.
    inputs: BTreeMap<String, String>,
    /// Files produced by this run, relative to the output directory.
    outputs: Vec<String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot read input {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn hash_inputs(named: &[(&str, &Path)]) -> Result<BTreeMap<String, String>> {
    named
        .iter()
        .map(|(name, path)| Ok((name.to_string(), sha256_file(path)?)))
        .collect()
}

fn write_run_metadata(out_dir: &Path, meta: &RunMetadata) -> Result<()> {
    let path = out_dir.join("run.json");
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
}

// ---------------------------------------------------------------------------
// gen

#[derive(Args)]
struct GenArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON file with defaults for the remaining flags; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of samples to generate.
    #[arg(long)]
    n: Option<usize>,
    /// Master seed; sample i uses seed XOR i.
    #[arg(long)]
    seed: Option<u64>,
    /// Scene randomization recipe.
    #[arg(long, value_enum)]
    recipe: Option<RecipeArg>,
    /// Panorama width in pixels.
    #[arg(long)]
    width: Option<usize>,
    /// Panorama height in pixels.
    #[arg(long)]
    height: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecipeArg {
    Chaotic,
    #[value(alias = "realistic-lite")]
    Realistic,
}

impl From<RecipeArg> for Recipe {
    fn from(arg: RecipeArg) -> Recipe {
        match arg {
            RecipeArg::Chaotic => Recipe::Chaotic,
            RecipeArg::Realistic => Recipe::RealisticLite,
        }
    }
}

/// Config-file counterpart of the `gen` flags.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenFile {
    n: Option<usize>,
    seed: Option<u64>,
    recipe: Option<Recipe>,
    width: Option<usize>,
    height: Option<usize>,
}

fn load_config_file<T: Default + serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let file: GenFile = load_config_file(args.config.as_deref())?;
    let config = DatasetConfig {
        count: args.n.or(file.n).unwrap_or(1),
        recipe: args.recipe.map(Recipe::from).or(file.recipe).unwrap_or(Recipe::Chaotic),
        seed: args.seed.or(file.seed).unwrap_or(0),
        width: args.width.or(file.width).unwrap_or(512),
        height: args.height.or(file.height).unwrap_or(256),
    };
    let manifest = generate_dataset(&config, &args.out)?;
    let mut outputs = vec!["manifest.json".to_string()];
    for sample in &manifest.samples {
        let f = &sample.files;
        for name in [
            &f.top, &f.bottom, &f.depth, &f.disparity, &f.normal_camera, &f.normal_heading,
            &f.occlusion, &f.rig,
        ] {
            outputs.push(name.clone());
        }
    }
    let inputs = BTreeMap::new();
    write_run_metadata(
        &args.out,
        &RunMetadata {
            version: env!("CARGO_PKG_VERSION"),
            command: "gen",
            config: serde_json::to_value(&config)?,
            inputs,
            outputs,
        },
    )
}

// ---------------------------------------------------------------------------
// rectify

#[derive(Args)]
struct RectifyArgs {
    /// Top view panorama (PNG).
    #[arg(long)]
    top: PathBuf,
    /// Bottom view panorama (PNG).
    #[arg(long)]
    bottom: PathBuf,
    /// Rig JSON describing the world-to-rig rotation.
    #[arg(long)]
    rig: PathBuf,
    /// Output directory for the rectified pair and updated rig.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_rectify(args: RectifyArgs) -> Result<()> {
    let top = png::read_rgb(&args.top)
        .with_context(|| format!("cannot load {}", args.top.display()))?;
    let bottom = png::read_rgb(&args.bottom)
        .with_context(|| format!("cannot load {}", args.bottom.display()))?;
    let spec = rig_json::read(&args.rig)
        .with_context(|| format!("cannot load {}", args.rig.display()))?;
    let config = spec.to_config()?;
    let lattice = config.lattice();
    if top.lattice() != lattice || bottom.lattice() != lattice {
        bail!(
            "image sizes do not match the rig: top {}x{}, bottom {}x{}, rig {}x{}",
            top.lattice().width(),
            top.lattice().height(),
            bottom.lattice().width(),
            bottom.lattice().height(),
            lattice.width(),
            lattice.height()
        );
    }
    // Input panoramas are expressed in the world-aligned frame; sampling each
    // output pixel along the rig-frame direction rotated back into the world
    // yields views whose baseline is exactly vertical. An identity rotation
    // must pass pixels through untouched rather than resample them.
    let rotation = config.world_to_rig();
    let (out_top, out_bottom) = if rotation == Rotation3::identity() {
        (top, bottom)
    } else {
        (
            rotate_erp(&top, &rotation, Interp::Bilinear),
            rotate_erp(&bottom, &rotation, Interp::Bilinear),
        )
    };
    ensure_out_dir(&args.out)?;
    png::write_rgb(&args.out.join("top.png"), &out_top)?;
    png::write_rgb(&args.out.join("bottom.png"), &out_bottom)?;
    let rectified = RigSpec {
        rotation_wxyz: [1.0, 0.0, 0.0, 0.0],
        ..spec.clone()
    };
    rig_json::write(&args.out.join("rig.json"), &rectified)?;
    write_run_metadata(
        &args.out,
        &RunMetadata {
            version: env!("CARGO_PKG_VERSION"),
            command: "rectify",
            config: json!({
                "rotation_wxyz": spec.rotation_wxyz,
                "baseline_m": spec.baseline_m,
                "width": spec.width,
                "height": spec.height,
            }),
            inputs: hash_inputs(&[
                ("top", args.top.as_path()),
                ("bottom", args.bottom.as_path()),
                ("rig", args.rig.as_path()),
            ])?,
            outputs: vec!["top.png".into(), "bottom.png".into(), "rig.json".into()],
        },
    )
}

// ---------------------------------------------------------------------------
// match

#[derive(Args)]
struct MatchArgs {
    /// Top view panorama (PNG).
    #[arg(long)]
    top: PathBuf,
    /// Bottom view panorama (PNG).
    #[arg(long)]
    bottom: PathBuf,
    /// Matcher parameters JSON; omitted fields use built-in defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Which view the output disparity is defined on.
    #[arg(long, value_enum, default_value = "bottom")]
    reference: ReferenceArg,
    /// Output directory for disp.pfm, sigma.pfm, and valid.png.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    Bottom,
    Top,
}

impl From<ReferenceArg> for ReferenceView {
    fn from(arg: ReferenceArg) -> ReferenceView {
        match arg {
            ReferenceArg::Bottom => ReferenceView::Bottom,
            ReferenceArg::Top => ReferenceView::Top,
        }
    }
}

fn cmd_match(args: MatchArgs) -> Result<()> {
    let top = png::read_rgb(&args.top)
        .with_context(|| format!("cannot load {}", args.top.display()))?;
    let bottom = png::read_rgb(&args.bottom)
        .with_context(|| format!("cannot load {}", args.bottom.display()))?;
    let params: MatcherParams = match &args.params {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read params {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid params {}", p.display()))?
        }
        None => MatcherParams::default(),
    };
    let reference = ReferenceView::from(args.reference);
    let result = match_pair_with_reference(&bottom, &top, &params, reference)?;
    ensure_out_dir(&args.out)?;
    pfm::write_scalar(&args.out.join("disp.pfm"), result.disparity.values())?;
    pfm::write_scalar(&args.out.join("sigma.pfm"), &result.sigma)?;
    png::write_mask(&args.out.join("valid.png"), &result.validity)?;
    write_run_metadata(
        &args.out,
        &RunMetadata {
            version: env!("CARGO_PKG_VERSION"),
            command: "match",
            config: json!({
                "params": params,
                "reference": reference,
                "disparity_unit": "pixels",
            }),
            inputs: hash_inputs(&[
                ("top", args.top.as_path()),
                ("bottom", args.bottom.as_path()),
            ])?,
            outputs: vec!["disp.pfm".into(), "sigma.pfm".into(), "valid.png".into()],
        },
    )
}

// ---------------------------------------------------------------------------
// normals

#[derive(Args)]
struct NormalsArgs {
    /// Depth map (PFM, meters; non-finite or non-positive pixels are invalid).
    #[arg(long)]
    depth: PathBuf,
    /// Rig JSON; its lattice must match the depth map.
    #[arg(long)]
    rig: PathBuf,
    /// Output frame: raw camera frame or heading-aligned.
    #[arg(long, value_enum, default_value = "camera")]
    frame: FrameArg,
    /// Output directory for normal.pfm and normal.png.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Camera,
    Ha,
}

fn cmd_normals(args: NormalsArgs) -> Result<()> {
    let values = pfm::read_scalar(&args.depth)
        .with_context(|| format!("cannot load {}", args.depth.display()))?;
    let spec = rig_json::read(&args.rig)
        .with_context(|| format!("cannot load {}", args.rig.display()))?;
    let config = spec.to_config()?;
    if values.lattice() != config.lattice() {
        bail!(
            "depth map is {}x{} but the rig lattice is {}x{}",
            values.lattice().width(),
            values.lattice().height(),
            config.lattice().width(),
            config.lattice().height()
        );
    }
    let mask = Mask::from_fn(values.lattice(), |u, v| {
        let r = values.get(u, v);
        r.is_finite() && r > 0.0
    });
    let depth = DepthMap::new(values, mask)?;
    let normals = normals_from_depth(&depth)?;
    let normals = match args.frame {
        FrameArg::Camera => normals,
        FrameArg::Ha => normals.to_heading_aligned()?,
    };
    ensure_out_dir(&args.out)?;
    pfm::write_vector(&args.out.join("normal.pfm"), normals.vectors())?;
    png::write_normal_visualization(&args.out.join("normal.png"), &normals)?;
    write_run_metadata(
        &args.out,
        &RunMetadata {
            version: env!("CARGO_PKG_VERSION"),
            command: "normals",
            config: json!({
                "frame": match args.frame { FrameArg::Camera => "camera", FrameArg::Ha => "ha" },
                "width": config.lattice().width(),
                "height": config.lattice().height(),
            }),
            inputs: hash_inputs(&[
                ("depth", args.depth.as_path()),
                ("rig", args.rig.as_path()),
            ])?,
            outputs: vec!["normal.pfm".into(), "normal.png".into()],
        },
    )
}

// ---------------------------------------------------------------------------
// cloud

#[derive(Args)]
struct CloudArgs {
    /// Disparity map (PFM; non-finite pixels are invalid).
    #[arg(long)]
    disp: PathBuf,
    /// Unit of the disparity values.
    #[arg(long, value_enum, default_value = "pixels")]
    unit: UnitArg,
    /// Rig JSON; its lattice must match the disparity map.
    #[arg(long)]
    rig: PathBuf,
    /// Optional color panorama (PNG) on the same lattice; white without it.
    #[arg(long)]
    rgb: Option<PathBuf>,
    /// Drop points farther than this from the reference camera, meters.
    #[arg(long, default_value_t = 10.0)]
    max_range: f64,
    /// PLY encoding.
    #[arg(long, value_enum, default_value = "binary")]
    encoding: EncodingArg,
    /// Output directory for cloud.ply.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Pixels,
    Radians,
}

impl From<UnitArg> for DisparityUnit {
    fn from(arg: UnitArg) -> DisparityUnit {
        match arg {
            UnitArg::Pixels => DisparityUnit::Pixels,
            UnitArg::Radians => DisparityUnit::Radians,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Binary,
    Ascii,
}

fn load_disparity(path: &Path, unit: DisparityUnit) -> Result<DisparityMap> {
    let values =
        pfm::read_scalar(path).with_context(|| format!("cannot load {}", path.display()))?;
    let mask = Mask::from_fn(values.lattice(), |u, v| values.get(u, v).is_finite());
    Ok(DisparityMap::new(values, unit, mask)?)
}

fn cmd_cloud(args: CloudArgs) -> Result<()> {
    if !(args.max_range > 0.0) {
        bail!("--max-range must be positive, got {}", args.max_range);
    }
    let disp = load_disparity(&args.disp, args.unit.into())?;
    let spec = rig_json::read(&args.rig)
        .with_context(|| format!("cannot load {}", args.rig.display()))?;
    let config = spec.to_config()?;
    if disp.lattice() != config.lattice() {
        bail!(
            "disparity map is {}x{} but the rig lattice is {}x{}",
            disp.lattice().width(),
            disp.lattice().height(),
            config.lattice().width(),
            config.lattice().height()
        );
    }
    let colors = match &args.rgb {
        Some(p) => {
            let rgb =
                png::read_rgb(p).with_context(|| format!("cannot load {}", p.display()))?;
            Some(rgb)
        }
        None => None,
    };
    let mut points = pointcloud_from_disparity(&disp, &config, colors.as_ref())?;
    points.retain(|p| p.position.norm() <= args.max_range);
    let encoding = match args.encoding {
        EncodingArg::Binary => PlyEncoding::BinaryLe,
        EncodingArg::Ascii => PlyEncoding::Ascii,
    };
    ensure_out_dir(&args.out)?;
    ply::write_ply(&args.out.join("cloud.ply"), &points, encoding)?;
    let mut inputs = vec![
        ("disp", args.disp.as_path()),
        ("rig", args.rig.as_path()),
    ];
    if let Some(p) = &args.rgb {
        inputs.push(("rgb", p.as_path()));
    }
    write_run_metadata(
        &args.out,
        &RunMetadata {
            version: env!("CARGO_PKG_VERSION"),
            command: "cloud",
            config: json!({
                "unit": match args.unit { UnitArg::Pixels => "pixels", UnitArg::Radians => "radians" },
                "max_range_m": args.max_range,
                "encoding": match args.encoding { EncodingArg::Binary => "binary_le", EncodingArg::Ascii => "ascii" },
                "points": points.len(),
            }),
            inputs: hash_inputs(&inputs)?,
            outputs: vec!["cloud.ply".into()],
        },
    )
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args)]
struct EvalArgs {
    /// Predicted map (PFM): 1-channel disparity or 3-channel normals.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth map (PFM) with the same shape and kind.
    #[arg(long)]
    gt: PathBuf,
    /// Optional exclusion mask (PNG); white pixels are dropped, e.g. a
    /// ground-truth occlusion map.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// What the maps contain.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Unit of disparity values (ignored for normals).
    #[arg(long, value_enum, default_value = "pixels")]
    unit: UnitArg,
    /// Output directory for report.json and report.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Disparity,
    Normal,
}

/// Loads a 3-channel PFM as a camera-frame normal map: pixels with finite,
/// non-degenerate vectors are renormalized (undoing float32 quantization);
/// the rest are invalid.
fn load_normals(path: &Path) -> Result<NormalMap> {
    let raw =
        pfm::read_vector(path).with_context(|| format!("cannot load {}", path.display()))?;
    let lattice = raw.lattice();
    let mask = Mask::from_fn(lattice, |u, v| {
        let n = raw.get(u, v);
        n.x.is_finite() && n.y.is_finite() && n.z.is_finite() && n.norm() > 0.5
    });
    let vectors = VectorField::from_fn(lattice, |u, v| {
        let n = raw.get(u, v);
        if mask.get(u, v) {
            n / n.norm()
        } else {
            n
        }
    });
    Ok(NormalMap::new(vectors, NormalFrame::Camera, mask)?)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let exclude = match &args.mask {
        Some(p) => Some(
            png::read_mask(p).with_context(|| format!("cannot load {}", p.display()))?,
        ),
        None => None,
    };
    let report: EvalReport = match args.kind {
        KindArg::Disparity => {
            let pred = load_disparity(&args.pred, args.unit.into())?;
            let gt = load_disparity(&args.gt, args.unit.into())?;
            disparity_metrics(&pred, &gt, exclude.as_ref())?
        }
        KindArg::Normal => {
            let pred = load_normals(&args.pred)?;
            let gt = load_normals(&args.gt)?;
            normal_metrics(&pred, &gt, exclude.as_ref())?
        }
    };
    ensure_out_dir(&args.out)?;
    let mut json_text = serde_json::to_string_pretty(&report)?;
    json_text.push('\n');
    fs::write(args.out.join("report.json"), json_text)?;
    let table = report.to_table();
    fs::write(args.out.join("report.txt"), &table)?;
    print!("{table}");
    let mut inputs = vec![("pred", args.pred.as_path()), ("gt", args.gt.as_path())];
    if let Some(p) = &args.mask {
        inputs.push(("mask", p.as_path()));
    }
    write_run_metadata(
        &args.out,
        &RunMetadata {
            version: env!("CARGO_PKG_VERSION"),
            command: "eval",
            config: json!({
                "kind": match args.kind { KindArg::Disparity => "disparity", KindArg::Normal => "normal" },
                "unit": match args.unit { UnitArg::Pixels => "pixels", UnitArg::Radians => "radians" },
                "mask": args.mask.is_some(),
            }),
            inputs: hash_inputs(&inputs)?,
            outputs: vec!["report.json".into(), "report.txt".into()],
        },
    )
}
