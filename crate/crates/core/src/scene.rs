//! Analytic scenes (spheres, planes, axis-aligned boxes) with procedural
//! textures, plus an exact raytracer used for rendering and occlusion tests.

use rayon::prelude::*;

use crate::disparity::DepthMap;
use crate::error::{Error, Result};
use crate::field::{Mask, ScalarField, VectorField};
use crate::math::{vec3, Rotation3, Vec3};
use crate::normals::{NormalFrame, NormalMap};
use crate::rng::SplitMix64;
use crate::sphere::{pixel_to_dir, ErpLattice};

/// Analytic surface.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Plane { point: Vec3, normal: Vec3 },
    Box3 { min: Vec3, max: Vec3 },
}

/// Procedural surface color, evaluated at the world-space hit point.
#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    Solid { color: Vec3 },
    Checker { scale: f64, colors: [Vec3; 2] },
    ValueNoise { scale: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub texture: Texture,
}

/// Directional light; `direction` is the travel direction of the light.
#[derive(Debug, Clone, PartialEq)]
pub struct Light {
    pub direction: Vec3,
    pub ambient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescription {
    pub primitives: Vec<Primitive>,
    pub light: Light,
    pub background: Vec3,
    pub seed: u64,
}

impl SceneDescription {
    pub fn validate(&self) -> Result<()> {
        for (i, prim) in self.primitives.iter().enumerate() {
            match &prim.shape {
                Shape::Sphere { radius, .. } => {
                    if !(*radius > 0.0) {
                        return Err(Error::Domain(format!(
                            "primitive {i}: sphere radius must be positive, got {radius}"
                        )));
                    }
                }
                Shape::Plane { normal, .. } => {
                    if normal.norm() == 0.0 || !normal.is_finite() {
                        return Err(Error::Domain(format!(
                            "primitive {i}: plane normal must be nonzero"
                        )));
                    }
                }
                Shape::Box3 { min, max } => {
                    if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                        return Err(Error::Domain(format!(
                            "primitive {i}: box min must be strictly below max"
                        )));
                    }
                }
            }
        }
        if (self.light.direction.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::Domain("light direction must be unit".into()));
        }
        if !(0.0..=1.0).contains(&self.light.ambient) {
            return Err(Error::Domain(format!(
                "ambient fraction must lie in [0, 1], got {}",
                self.light.ambient
            )));
        }
        Ok(())
    }
}

/// Camera placement: position plus world-to-camera rotation (same convention
/// as the rig rotation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub world_to_camera: Rotation3,
}

impl CameraPose {
    pub fn camera_to_world(&self) -> Rotation3 {
        self.world_to_camera.transpose()
    }
}

/// Ray-surface intersection record.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    /// Distance along the unit ray (radial distance from the origin).
    pub t: f64,
    pub point: Vec3,
    /// Unit surface normal in world coordinates, oriented toward the ray
    /// origin (normal . ray_dir < 0).
    pub normal: Vec3,
    pub primitive: usize,
}

const T_MIN: f64 = 1e-9;

fn intersect_sphere(origin: Vec3, dir: Vec3, center: Vec3, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let disc = b * b - (oc.dot(oc) - radius * radius);
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = -b - s;
    if t0 > T_MIN {
        return Some(t0);
    }
    let t1 = -b + s;
    (t1 > T_MIN).then_some(t1)
}

fn intersect_plane(origin: Vec3, dir: Vec3, point: Vec3, normal: Vec3) -> Option<f64> {
    let denom = dir.dot(normal);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (point - origin).dot(normal) / denom;
    (t > T_MIN).then_some(t)
}

fn intersect_box(origin: Vec3, dir: Vec3, min: Vec3, max: Vec3) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let (o, d, lo, hi) = match axis {
            0 => (origin.x, dir.x, min.x, max.x),
            1 => (origin.y, dir.y, min.y, max.y),
            _ => (origin.z, dir.z, min.z, max.z),
        };
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let (mut t0, mut t1) = ((lo - o) / d, (hi - o) / d);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near > T_MIN {
        Some(t_near)
    } else {
        (t_far > T_MIN).then_some(t_far)
    }
}

fn shape_normal(shape: &Shape, point: Vec3) -> Vec3 {
    match shape {
        Shape::Sphere { center, radius } => (point - *center) / *radius,
        Shape::Plane { normal, .. } => normal.normalized(),
        Shape::Box3 { min, max } => {
            let center = (*min + *max) * 0.5;
            let half = (*max - *min) * 0.5;
            let rel = point - center;
            let d = vec3(rel.x / half.x, rel.y / half.y, rel.z / half.z);
            let (ax, ay, az) = (d.x.abs(), d.y.abs(), d.z.abs());
            if ax >= ay && ax >= az {
                vec3(d.x.signum(), 0.0, 0.0)
            } else if ay >= az {
                vec3(0.0, d.y.signum(), 0.0)
            } else {
                vec3(0.0, 0.0, d.z.signum())
            }
        }
    }
}

/// Nearest intersection of the unit-direction ray with any scene primitive.
pub fn raycast(scene: &SceneDescription, origin: Vec3, dir: Vec3) -> Option<Hit> {
    let mut best: Option<(f64, usize)> = None;
    for (i, prim) in scene.primitives.iter().enumerate() {
        let t = match &prim.shape {
            Shape::Sphere { center, radius } => intersect_sphere(origin, dir, *center, *radius),
            Shape::Plane { point, normal } => intersect_plane(origin, dir, *point, *normal),
            Shape::Box3 { min, max } => intersect_box(origin, dir, *min, *max),
        };
        if let Some(t) = t {
            if best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best.map(|(t, i)| {
        let point = origin + dir * t;
        let mut normal = shape_normal(&scene.primitives[i].shape, point);
        if normal.dot(dir) > 0.0 {
            normal = -normal;
        }
        Hit {
            t,
            point,
            normal,
            primitive: i,
        }
    })
}

fn noise_lattice_value(ix: i64, iy: i64, iz: i64, seed: u64) -> f64 {
    let key = (ix as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (iz as u64).wrapping_mul(0x1656_67B1_9E37_79F9)
        ^ seed;
    SplitMix64::new(key).next_f64()
}

fn fade(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Trilinear value noise in [0, 1], deterministic in (point, seed).
fn value_noise(p: Vec3, seed: u64) -> f64 {
    let base = vec3(p.x.floor(), p.y.floor(), p.z.floor());
    let f = p - base;
    let (ix, iy, iz) = (base.x as i64, base.y as i64, base.z as i64);
    let (fx, fy, fz) = (fade(f.x), fade(f.y), fade(f.z));
    let mut value = 0.0;
    for corner in 0..8 {
        let (cx, cy, cz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
        let w = (if cx == 1 { fx } else { 1.0 - fx })
            * (if cy == 1 { fy } else { 1.0 - fy })
            * (if cz == 1 { fz } else { 1.0 - fz });
        value += w * noise_lattice_value(ix + cx as i64, iy + cy as i64, iz + cz as i64, seed);
    }
    value
}

fn texture_color(texture: &Texture, point: Vec3) -> Vec3 {
    match texture {
        Texture::Solid { color } => *color,
        Texture::Checker { scale, colors } => {
            let cell = |x: f64| (x / scale).floor() as i64;
            let parity = (cell(point.x) + cell(point.y) + cell(point.z)).rem_euclid(2);
            colors[parity as usize]
        }
        Texture::ValueNoise { scale, seed } => {
            let n = value_noise(point / *scale, *seed);
            // Lift into [0.15, 1.0] so noise never goes fully black.
            let g = 0.15 + 0.85 * n;
            vec3(g, g, g)
        }
    }
}

/// One rendered view: shaded color, radial depth, camera-frame normals.
/// Misses carry the background color with invalid depth/normal.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub rgb: VectorField,
    pub depth: DepthMap,
    pub normal: NormalMap,
}

/// Renders the scene into an ERP image from the given pose.
///
/// Depth is the radial distance to the nearest analytic intersection; normals
/// are exact surface normals rotated into the camera frame and oriented
/// toward the camera; shading is Lambert times texture plus ambient.
pub fn render_erp(
    scene: &SceneDescription,
    pose: CameraPose,
    lattice: ErpLattice,
) -> Result<RenderedView> {
    scene.validate()?;
    let cam_to_world = pose.camera_to_world();
    let world_to_cam = pose.world_to_camera;
    let w = lattice.width();
    let pixels: Vec<(Vec3, f64, Vec3, bool)> = (0..lattice.len())
        .into_par_iter()
        .map(|idx| {
            let (u, v) = (idx % w, idx / w);
            let dir_cam = pixel_to_dir(lattice, u as f64, v as f64)
                .expect("integer pixel rows are always in range");
            let dir_world = cam_to_world.apply(dir_cam.vec());
            match raycast(scene, pose.position, dir_world) {
                Some(hit) => {
                    let tex = texture_color(&scene.primitives[hit.primitive].texture, hit.point);
                    let lambert = hit.normal.dot(-scene.light.direction).max(0.0);
                    let shade = scene.light.ambient + (1.0 - scene.light.ambient) * lambert;
                    let rgb = (tex * shade).clamp_box(Vec3::ZERO, vec3(1.0, 1.0, 1.0));
                    (rgb, hit.t, world_to_cam.apply(hit.normal), true)
                }
                None => (scene.background, f64::NAN, vec3(f64::NAN, f64::NAN, f64::NAN), false),
            }
        })
        .collect();

    let mut rgb = Vec::with_capacity(pixels.len());
    let mut depth = Vec::with_capacity(pixels.len());
    let mut normal = Vec::with_capacity(pixels.len());
    let mut valid = Vec::with_capacity(pixels.len());
    for (c, t, n, ok) in pixels {
        rgb.push(c);
        depth.push(t);
        normal.push(n);
        valid.push(ok);
    }
    let mask = Mask::from_vec(lattice, valid)?;
    Ok(RenderedView {
        rgb: VectorField::from_vec(lattice, rgb)?,
        depth: DepthMap::new(ScalarField::from_vec(lattice, depth)?, mask.clone())?,
        normal: NormalMap::new(
            VectorField::from_vec(lattice, normal)?,
            NormalFrame::Camera,
            mask,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plain_light() -> Light {
        Light {
            direction: vec3(0.0, 0.0, -1.0),
            ambient: 0.3,
        }
    }

    fn lat() -> ErpLattice {
        ErpLattice::new(16, 8).unwrap()
    }

    fn identity_pose() -> CameraPose {
        CameraPose {
            position: Vec3::ZERO,
            world_to_camera: Rotation3::identity(),
        }
    }

    #[test]
    fn camera_inside_sphere_sees_constant_depth() {
        let scene = SceneDescription {
            primitives: vec![Primitive {
                shape: Shape::Sphere {
                    center: Vec3::ZERO,
                    radius: 3.0,
                },
                texture: Texture::Solid {
                    color: vec3(1.0, 1.0, 1.0),
                },
            }],
            light: plain_light(),
            background: Vec3::ZERO,
            seed: 0,
        };
        let view = render_erp(&scene, identity_pose(), lat()).unwrap();
        for v in 0..8 {
            for u in 0..16 {
                assert!(view.depth.mask().get(u, v));
                assert_relative_eq!(view.depth.values().get(u, v), 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ground_plane_straight_down() {
        let scene = SceneDescription {
            primitives: vec![Primitive {
                shape: Shape::Plane {
                    point: vec3(0.0, 0.0, -1.0),
                    normal: vec3(0.0, 0.0, 1.0),
                },
                texture: Texture::Solid {
                    color: vec3(0.5, 0.5, 0.5),
                },
            }],
            light: plain_light(),
            background: Vec3::ZERO,
            seed: 0,
        };
        let lattice = ErpLattice::new(64, 32).unwrap();
        let view = render_erp(&scene, identity_pose(), lattice).unwrap();
        // The bottom row looks almost straight down: depth ~ 1, normal ~ +z
        // (camera frame equals world frame here).
        let theta = lattice.theta_of_v(31.0);
        let expect = 1.0 / (-theta.cos());
        assert_relative_eq!(view.depth.values().get(0, 31), expect, epsilon = 1e-12);
        let n = view.normal.vectors().get(0, 31);
        assert_relative_eq!(n.z, 1.0, epsilon = 1e-12);
        // Upper hemisphere misses the plane entirely.
        assert!(!view.depth.mask().get(0, 0));
        assert!(view.rgb.get(0, 0) == Vec3::ZERO);
    }

    #[test]
    fn empty_scene_renders_background() {
        let scene = SceneDescription {
            primitives: vec![],
            light: plain_light(),
            background: vec3(0.2, 0.4, 0.6),
            seed: 0,
        };
        let view = render_erp(&scene, identity_pose(), lat()).unwrap();
        assert_eq!(view.depth.mask().count_valid(), 0);
        assert_eq!(view.rgb.get(5, 3), vec3(0.2, 0.4, 0.6));
    }

    #[test]
    fn box_hit_from_outside() {
        let hit_t = intersect_box(
            vec3(0.0, 0.0, 0.0),
            vec3(1.0, 0.0, 0.0),
            vec3(2.0, -1.0, -1.0),
            vec3(4.0, 1.0, 1.0),
        )
        .unwrap();
        assert_relative_eq!(hit_t, 2.0);
        let n = shape_normal(
            &Shape::Box3 {
                min: vec3(2.0, -1.0, -1.0),
                max: vec3(4.0, 1.0, 1.0),
            },
            vec3(2.0, 0.3, -0.2),
        );
        assert_eq!(n, vec3(-1.0, 0.0, 0.0));
    }

    #[test]
    fn box_hit_from_inside_uses_far_face() {
        let t = intersect_box(
            vec3(3.0, 0.0, 0.0),
            vec3(1.0, 0.0, 0.0),
            vec3(2.0, -1.0, -1.0),
            vec3(4.0, 1.0, 1.0),
        )
        .unwrap();
        assert_relative_eq!(t, 1.0);
    }

    #[test]
    fn normals_face_the_camera() {
        let scene = SceneDescription {
            primitives: vec![Primitive {
                shape: Shape::Sphere {
                    center: vec3(2.0, 0.0, 0.0),
                    radius: 0.5,
                },
                texture: Texture::Solid {
                    color: vec3(1.0, 0.0, 0.0),
                },
            }],
            light: plain_light(),
            background: Vec3::ZERO,
            seed: 0,
        };
        let hit = raycast(&scene, Vec3::ZERO, vec3(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(hit.t, 1.5);
        assert!(hit.normal.dot(vec3(1.0, 0.0, 0.0)) < 0.0);
    }

    #[test]
    fn checker_texture_alternates() {
        let tex = Texture::Checker {
            scale: 1.0,
            colors: [vec3(0.0, 0.0, 0.0), vec3(1.0, 1.0, 1.0)],
        };
        let a = texture_color(&tex, vec3(0.5, 0.5, 0.5));
        let b = texture_color(&tex, vec3(1.5, 0.5, 0.5));
        assert_ne!(a, b);
        // Negative coordinates continue the pattern without a seam doubling.
        let c = texture_color(&tex, vec3(-0.5, 0.5, 0.5));
        assert_ne!(a, c);
    }

    #[test]
    fn value_noise_is_deterministic_and_bounded() {
        for i in 0..50 {
            let p = vec3(i as f64 * 0.37, -1.2 + i as f64 * 0.11, 0.4);
            let a = value_noise(p, 99);
            let b = value_noise(p, 99);
            assert_eq!(a, b);
            assert!((0.0..=1.0).contains(&a));
            assert_ne!(value_noise(p, 99), value_noise(p, 100));
        }
    }

    #[test]
    fn validate_rejects_bad_primitives() {
        let mut scene = SceneDescription {
            primitives: vec![Primitive {
                shape: Shape::Sphere {
                    center: Vec3::ZERO,
                    radius: -1.0,
                },
                texture: Texture::Solid {
                    color: Vec3::ZERO,
                },
            }],
            light: plain_light(),
            background: Vec3::ZERO,
            seed: 0,
        };
        assert!(scene.validate().is_err());
        scene.primitives[0].shape = Shape::Box3 {
            min: vec3(1.0, 0.0, 0.0),
            max: vec3(0.0, 1.0, 1.0),
        };
        assert!(scene.validate().is_err());
        scene.primitives.clear();
        scene.light.ambient = 1.5;
        assert!(scene.validate().is_err());
    }
}
