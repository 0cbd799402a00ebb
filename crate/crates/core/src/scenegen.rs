//! Seeded procedural stereo datasets: collision-free rig placement inside
//! analytic scenes, top-bottom rendering, and ground-truth emission.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disparity::{gt_disparity, DisparityMap, DisparityUnit};
use crate::error::{Error, Result};
use crate::field::Mask;
use crate::io::{pfm, png, rig_json};
use crate::math::{vec3, Rotation3, Vec3};
use crate::normals::NormalMap;
use crate::rig::{ReferenceView, RigConfig};
use crate::rng::{SplitMix64, RNG_ALGORITHM};
use crate::scene::{
    render_erp, CameraPose, Light, Primitive, RenderedView, SceneDescription, Shape, Texture,
};
use crate::sphere::ErpLattice;

/// Widest baseline the rig sampler may draw, meters.
pub const BASELINE_MAX_M: f64 = 0.5;
/// Narrowest baseline the rig sampler may draw, meters.
pub const BASELINE_MIN_M: f64 = 0.05;
/// Largest roll/pitch magnitude a rig may take, degrees.
pub const TILT_LIMIT_DEG: f64 = 45.0;

/// Knobs for rejection-sampling a rig placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigSamplerParams {
    /// Inclusive baseline range in meters, within [0.05, 0.5].
    pub baseline_range: (f64, f64),
    /// Roll and pitch are drawn from [-limit, +limit] degrees; at most 45.
    pub tilt_limit_deg: f64,
    /// Radius of the capsule collision proxy around the camera segment.
    pub capsule_radius: f64,
    /// Rejection-sampling budget before giving up with a placement error.
    pub max_attempts: u32,
    /// Axis-aligned box the bottom camera center is drawn from.
    pub position_min: Vec3,
    pub position_max: Vec3,
}

impl Default for RigSamplerParams {
    fn default() -> RigSamplerParams {
        RigSamplerParams {
            baseline_range: (BASELINE_MIN_M, BASELINE_MAX_M),
            tilt_limit_deg: TILT_LIMIT_DEG,
            capsule_radius: 0.1,
            max_attempts: 1000,
            position_min: vec3(-2.2, -2.2, 0.9),
            position_max: vec3(2.2, 2.2, 1.7),
        }
    }
}

impl RigSamplerParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.baseline_range;
        if !(BASELINE_MIN_M..=BASELINE_MAX_M).contains(&lo) || !(lo..=BASELINE_MAX_M).contains(&hi)
        {
            return Err(Error::Config(format!(
                "baseline range [{lo}, {hi}] must lie within [{BASELINE_MIN_M}, {BASELINE_MAX_M}]"
            )));
        }
        if !(0.0..=TILT_LIMIT_DEG).contains(&self.tilt_limit_deg) {
            return Err(Error::Config(format!(
                "tilt limit {} deg must lie within [0, {TILT_LIMIT_DEG}]",
                self.tilt_limit_deg
            )));
        }
        if !self.capsule_radius.is_finite() || self.capsule_radius <= 0.0 {
            return Err(Error::Config(format!(
                "capsule radius must be positive, got {}",
                self.capsule_radius
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("placement budget must be at least 1".into()));
        }
        let (pmin, pmax) = (self.position_min, self.position_max);
        if !(pmin.x <= pmax.x && pmin.y <= pmax.y && pmin.z <= pmax.z) {
            return Err(Error::Config(
                "position box min must not exceed max".into(),
            ));
        }
        Ok(())
    }
}

/// A collision-checked rig placement: full stereo geometry plus the pose
/// parameters it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct RigSample {
    pub config: RigConfig,
    /// Bottom camera center, world coordinates.
    pub position: Vec3,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub capsule_radius: f64,
}

impl RigSample {
    /// Builds the rig from pose parameters, validating the allowed ranges.
    /// The rig-to-world rotation is `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn new(
        baseline_m: f64,
        roll_deg: f64,
        pitch_deg: f64,
        yaw_deg: f64,
        position: Vec3,
        capsule_radius: f64,
        lattice: ErpLattice,
        reference: ReferenceView,
    ) -> Result<RigSample> {
        if !(BASELINE_MIN_M..=BASELINE_MAX_M).contains(&baseline_m) {
            return Err(Error::Domain(format!(
                "baseline {baseline_m} m outside [{BASELINE_MIN_M}, {BASELINE_MAX_M}]"
            )));
        }
        for (name, angle) in [("roll", roll_deg), ("pitch", pitch_deg)] {
            if !(-TILT_LIMIT_DEG..=TILT_LIMIT_DEG).contains(&angle) {
                return Err(Error::Domain(format!(
                    "{name} {angle} deg outside [-{TILT_LIMIT_DEG}, {TILT_LIMIT_DEG}]"
                )));
            }
        }
        if !(0.0..360.0).contains(&yaw_deg) {
            return Err(Error::Domain(format!(
                "yaw {yaw_deg} deg outside [0, 360)"
            )));
        }
        if !position.is_finite() {
            return Err(Error::Domain("rig position must be finite".into()));
        }
        let rig_to_world = Rotation3::about_z(yaw_deg.to_radians())
            .compose(&Rotation3::about_y(pitch_deg.to_radians()))
            .compose(&Rotation3::about_x(roll_deg.to_radians()));
        let config = RigConfig::new(baseline_m, rig_to_world.transpose(), lattice, reference)?;
        Ok(RigSample {
            config,
            position,
            roll_deg,
            pitch_deg,
            yaw_deg,
            capsule_radius,
        })
    }

    /// Top camera center, world coordinates.
    pub fn top_position(&self) -> Vec3 {
        self.position + self.config.top_offset_world()
    }
}

fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

fn point_box_distance(q: Vec3, min: Vec3, max: Vec3) -> f64 {
    let excess = |lo: f64, x: f64, hi: f64| (lo - x).max(0.0).max(x - hi);
    vec3(
        excess(min.x, q.x, max.x),
        excess(min.y, q.y, max.y),
        excess(min.z, q.z, max.z),
    )
    .norm()
}

/// Distance from the segment [a, b] to the solid primitive (0 on contact or
/// overlap).
fn segment_clearance(shape: &Shape, a: Vec3, b: Vec3) -> f64 {
    match shape {
        Shape::Sphere { center, radius } => {
            (point_segment_distance(*center, a, b) - radius).max(0.0)
        }
        Shape::Plane { point, normal } => {
            let n = normal.normalized();
            let sa = (a - *point).dot(n);
            let sb = (b - *point).dot(n);
            if sa.signum() != sb.signum() || sa == 0.0 || sb == 0.0 {
                0.0
            } else {
                sa.abs().min(sb.abs())
            }
        }
        Shape::Box3 { min, max } => {
            // The distance to a convex solid is convex along the segment, so
            // a ternary search brackets the minimum.
            let f = |t: f64| point_box_distance(a + (b - a) * t, *min, *max);
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..80 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1) <= f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            f(0.5 * (lo + hi))
        }
    }
}

/// True when the capsule of the given radius around [a, b] touches no
/// primitive.
fn capsule_clears(scene: &SceneDescription, a: Vec3, b: Vec3, radius: f64) -> bool {
    scene
        .primitives
        .iter()
        .all(|p| segment_clearance(&p.shape, a, b) >= radius)
}

/// Rejection-samples a rig pose until the capsule between the camera centers
/// clears every primitive. Deterministic given the RNG state.
pub fn sample_rig(
    scene: &SceneDescription,
    lattice: ErpLattice,
    params: &RigSamplerParams,
    rng: &mut SplitMix64,
) -> Result<RigSample> {
    params.validate()?;
    scene.validate()?;
    for _ in 0..params.max_attempts {
        let baseline = rng.uniform(params.baseline_range.0, params.baseline_range.1);
        let roll = rng.uniform(-params.tilt_limit_deg, params.tilt_limit_deg);
        let pitch = rng.uniform(-params.tilt_limit_deg, params.tilt_limit_deg);
        let yaw = rng.uniform(0.0, 360.0);
        let position = vec3(
            rng.uniform(params.position_min.x, params.position_max.x),
            rng.uniform(params.position_min.y, params.position_max.y),
            rng.uniform(params.position_min.z, params.position_max.z),
        );
        let sample = RigSample::new(
            baseline,
            roll,
            pitch,
            yaw,
            position,
            params.capsule_radius,
            lattice,
            ReferenceView::Bottom,
        )?;
        if capsule_clears(scene, sample.position, sample.top_position(), params.capsule_radius) {
            return Ok(sample);
        }
    }
    Err(Error::Placement {
        attempts: params.max_attempts,
    })
}

/// One rendered stereo pair with ground truth, all defined on the reference
/// view (disparity in radians in memory).
#[derive(Debug, Clone)]
pub struct StereoSample {
    pub bottom: RenderedView,
    pub top: RenderedView,
    pub disparity: DisparityMap,
    /// True where the matching pixel is hidden in the other view.
    pub occlusion: Mask,
    /// Reference-view normals in the heading-aligned frame.
    pub normal_ha: NormalMap,
    pub rig: RigSample,
}

impl StereoSample {
    /// The view disparity and normals are defined on.
    pub fn reference_view(&self) -> &RenderedView {
        match self.rig.config.reference() {
            ReferenceView::Bottom => &self.bottom,
            ReferenceView::Top => &self.top,
        }
    }
}

/// Renders both views of the rig and derives ground-truth disparity,
/// occlusion, and heading-aligned normals for the reference view.
pub fn make_stereo_sample(scene: &SceneDescription, rig: &RigSample) -> Result<StereoSample> {
    let cfg = &rig.config;
    let world_to_camera = cfg.world_to_rig();
    let bottom = render_erp(
        scene,
        CameraPose {
            position: rig.position,
            world_to_camera,
        },
        cfg.lattice(),
    )?;
    let top = render_erp(
        scene,
        CameraPose {
            position: rig.top_position(),
            world_to_camera,
        },
        cfg.lattice(),
    )?;
    let (disparity, occlusion) = gt_disparity(scene, cfg, rig.position)?;
    let normal_ha = match cfg.reference() {
        ReferenceView::Bottom => &bottom,
        ReferenceView::Top => &top,
    }
    .normal
    .to_heading_aligned()?;
    Ok(StereoSample {
        bottom,
        top,
        disparity,
        occlusion,
        normal_ha,
        rig: rig.clone(),
    })
}

/// Scene family for dataset generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    /// Objects float anywhere in the room.
    Chaotic,
    /// Objects rest on the floor (sphere center at its radius, box base at
    /// the ground).
    RealisticLite,
}

impl Recipe {
    pub fn name(&self) -> &'static str {
        match self {
            Recipe::Chaotic => "chaotic",
            Recipe::RealisticLite => "realistic-lite",
        }
    }
}

impl std::str::FromStr for Recipe {
    type Err = Error;
    fn from_str(s: &str) -> Result<Recipe> {
        match s {
            "chaotic" => Ok(Recipe::Chaotic),
            "realistic-lite" => Ok(Recipe::RealisticLite),
            other => Err(Error::Config(format!(
                "unknown recipe {other:?}; expected \"chaotic\" or \"realistic-lite\""
            ))),
        }
    }
}

/// Room interior: the recipes keep rig positions and object centers inside
/// these walls.
const ROOM_HALF_XY: f64 = 3.2;
const ROOM_HEIGHT: f64 = 3.0;

fn random_color(rng: &mut SplitMix64, lo: f64, hi: f64) -> Vec3 {
    vec3(
        rng.uniform(lo, hi),
        rng.uniform(lo, hi),
        rng.uniform(lo, hi),
    )
}

fn random_texture(rng: &mut SplitMix64) -> Texture {
    match rng.below(3) {
        0 => Texture::Checker {
            scale: rng.uniform(0.12, 0.35),
            colors: [random_color(rng, 0.55, 1.0), random_color(rng, 0.05, 0.45)],
        },
        1 => Texture::ValueNoise {
            scale: rng.uniform(0.1, 0.4),
            seed: rng.next_u64(),
        },
        _ => Texture::Solid {
            color: random_color(rng, 0.25, 0.95),
        },
    }
}

/// Builds one procedural room scene: six textured bounding planes plus 5-8
/// randomly sized and placed spheres and boxes.
pub fn build_scene(recipe: Recipe, rng: &mut SplitMix64) -> SceneDescription {
    let mut primitives = Vec::new();
    // Floor and ceiling.
    primitives.push(Primitive {
        shape: Shape::Plane {
            point: Vec3::ZERO,
            normal: Vec3::Z,
        },
        texture: Texture::Checker {
            scale: rng.uniform(0.4, 0.8),
            colors: [random_color(rng, 0.6, 0.95), random_color(rng, 0.15, 0.4)],
        },
    });
    primitives.push(Primitive {
        shape: Shape::Plane {
            point: vec3(0.0, 0.0, ROOM_HEIGHT),
            normal: -Vec3::Z,
        },
        texture: Texture::ValueNoise {
            scale: rng.uniform(0.5, 0.9),
            seed: rng.next_u64(),
        },
    });
    // Four walls, alternating texture families.
    let walls = [
        (vec3(ROOM_HALF_XY, 0.0, 0.0), -Vec3::X),
        (vec3(-ROOM_HALF_XY, 0.0, 0.0), Vec3::X),
        (vec3(0.0, ROOM_HALF_XY, 0.0), -Vec3::Y),
        (vec3(0.0, -ROOM_HALF_XY, 0.0), Vec3::Y),
    ];
    for (i, (point, normal)) in walls.into_iter().enumerate() {
        let texture = if i % 2 == 0 {
            Texture::Checker {
                scale: rng.uniform(0.25, 0.6),
                colors: [random_color(rng, 0.55, 0.95), random_color(rng, 0.1, 0.45)],
            }
        } else {
            Texture::ValueNoise {
                scale: rng.uniform(0.25, 0.7),
                seed: rng.next_u64(),
            }
        };
        primitives.push(Primitive {
            shape: Shape::Plane { point, normal },
            texture,
        });
    }
    // Objects.
    let count = 5 + rng.below(4) as usize;
    for _ in 0..count {
        let x = rng.uniform(-2.6, 2.6);
        let y = rng.uniform(-2.6, 2.6);
        let shape = if rng.below(2) == 0 {
            let radius = rng.uniform(0.15, 0.45);
            let z = match recipe {
                Recipe::Chaotic => rng.uniform(0.3, 2.4),
                Recipe::RealisticLite => radius,
            };
            Shape::Sphere {
                center: vec3(x, y, z),
                radius,
            }
        } else {
            let half = vec3(
                rng.uniform(0.15, 0.4),
                rng.uniform(0.15, 0.4),
                rng.uniform(0.15, 0.4),
            );
            let z = match recipe {
                Recipe::Chaotic => rng.uniform(0.3, 2.4),
                Recipe::RealisticLite => half.z,
            };
            let center = vec3(x, y, z);
            Shape::Box3 {
                min: center - half,
                max: center + half,
            }
        };
        let texture = random_texture(rng);
        primitives.push(Primitive { shape, texture });
    }
    // Downward-slanted directional light.
    let azimuth = rng.uniform(0.0, std::f64::consts::TAU);
    let off_vertical = rng.uniform(0.0, 50.0_f64.to_radians());
    let light = Light {
        direction: vec3(
            off_vertical.sin() * azimuth.cos(),
            off_vertical.sin() * azimuth.sin(),
            -off_vertical.cos(),
        ),
        ambient: rng.uniform(0.25, 0.45),
    };
    SceneDescription {
        primitives,
        light,
        background: vec3(0.02, 0.02, 0.03),
        seed: rng.next_u64(),
    }
}

/// Rig sampler settings the recipes use: a wide capsule keeps every surface
/// far enough from the cameras that disparities stay well inside a 64-pixel
/// search range at 256-row resolution.
pub fn recipe_rig_params() -> RigSamplerParams {
    RigSamplerParams {
        capsule_radius: 0.8,
        ..RigSamplerParams::default()
    }
}

/// Fresh scenes drawn per sample when a placement attempt exhausts its
/// budget.
const SCENE_ATTEMPTS: u32 = 16;

/// Deterministic (scene, rig) pair for one dataset sample: scenes are drawn
/// from the stream until one admits a collision-free rig.
pub fn sample_scene_and_rig(
    recipe: Recipe,
    lattice: ErpLattice,
    rng: &mut SplitMix64,
) -> Result<(SceneDescription, RigSample)> {
    let params = recipe_rig_params();
    let mut last = Error::Placement { attempts: 0 };
    for _ in 0..SCENE_ATTEMPTS {
        let scene = build_scene(recipe, rng);
        match sample_rig(&scene, lattice, &params, rng) {
            Ok(rig) => return Ok((scene, rig)),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Dataset generation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub count: usize,
    pub recipe: Recipe,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
}

impl DatasetConfig {
    pub fn lattice(&self) -> Result<ErpLattice> {
        ErpLattice::new(self.width, self.height)
    }
}

/// Relative file names of one emitted sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFiles {
    pub top: String,
    pub bottom: String,
    pub depth: String,
    pub disparity: String,
    pub normal_camera: String,
    pub normal_heading: String,
    pub occlusion: String,
    pub rig: String,
}

/// Manifest entry for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub seed: u64,
    pub baseline_m: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub position: [f64; 3],
    pub files: SampleFiles,
}

/// Dataset manifest: reproduction parameters plus per-sample records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rng_algorithm: String,
    pub seed: u64,
    pub recipe: Recipe,
    pub width: usize,
    pub height: usize,
    pub count: usize,
    /// Unit of the emitted disparity maps.
    pub disparity_unit: DisparityUnit,
    pub samples: Vec<SampleRecord>,
}

fn write_sample(out_dir: &Path, index: usize, seed: u64, sample: &StereoSample) -> Result<SampleRecord> {
    let dir = out_dir.join(index.to_string());
    fs::create_dir_all(&dir)?;
    let files = SampleFiles {
        top: format!("{index}/top.png"),
        bottom: format!("{index}/bottom.png"),
        depth: format!("{index}/depth.pfm"),
        disparity: format!("{index}/disp.pfm"),
        normal_camera: format!("{index}/normal_cam.pfm"),
        normal_heading: format!("{index}/normal_ha.pfm"),
        occlusion: format!("{index}/occ.png"),
        rig: format!("{index}/rig.json"),
    };
    png::write_rgb(&dir.join("top.png"), &sample.top.rgb)?;
    png::write_rgb(&dir.join("bottom.png"), &sample.bottom.rgb)?;
    let reference = sample.reference_view();
    pfm::write_scalar(&dir.join("depth.pfm"), reference.depth.values())?;
    let disp_px = sample.disparity.convert_to(DisparityUnit::Pixels);
    pfm::write_scalar(&dir.join("disp.pfm"), disp_px.values())?;
    pfm::write_vector(&dir.join("normal_cam.pfm"), reference.normal.vectors())?;
    pfm::write_vector(&dir.join("normal_ha.pfm"), sample.normal_ha.vectors())?;
    png::write_mask(&dir.join("occ.png"), &sample.occlusion)?;
    rig_json::write(
        &dir.join("rig.json"),
        &rig_json::RigSpec::from_config(&sample.rig.config),
    )?;
    let rig = &sample.rig;
    Ok(SampleRecord {
        index,
        seed,
        baseline_m: rig.config.baseline_m(),
        roll_deg: rig.roll_deg,
        pitch_deg: rig.pitch_deg,
        yaw_deg: rig.yaw_deg,
        position: rig.position.to_array(),
        files,
    })
}

/// Generates `config.count` stereo samples under `out_dir` and writes
/// `manifest.json` beside them. Byte-identical outputs for identical
/// configurations: each sample derives its own seed as `seed XOR index`, so
/// scheduling order cannot leak into the files.
pub fn generate_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<Manifest> {
    let lattice = config.lattice()?;
    fs::create_dir_all(out_dir)?;
    let wrap = |index: usize| {
        move |source: Error| Error::Sample {
            index,
            source: Box::new(source),
        }
    };
    let samples: Vec<SampleRecord> = (0..config.count)
        .into_par_iter()
        .map(|index| {
            let seed = config.seed ^ index as u64;
            let mut rng = SplitMix64::new(seed);
            let (scene, rig) =
                sample_scene_and_rig(config.recipe, lattice, &mut rng).map_err(wrap(index))?;
            let sample = make_stereo_sample(&scene, &rig).map_err(wrap(index))?;
            write_sample(out_dir, index, seed, &sample).map_err(wrap(index))
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        rng_algorithm: RNG_ALGORITHM.to_string(),
        seed: config.seed,
        recipe: config.recipe,
        width: config.width,
        height: config.height,
        count: config.count,
        disparity_unit: DisparityUnit::Pixels,
        samples,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("manifest serialization failed: {e}")))?;
    fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

/// Paths of one sample's files resolved against the dataset root.
pub fn sample_paths(root: &Path, files: &SampleFiles) -> Vec<PathBuf> {
    [
        &files.top,
        &files.bottom,
        &files.depth,
        &files.disparity,
        &files.normal_camera,
        &files.normal_heading,
        &files.occlusion,
        &files.rig,
    ]
    .into_iter()
    .map(|f| root.join(f))
    .collect()
}
