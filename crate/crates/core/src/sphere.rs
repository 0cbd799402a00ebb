//! Equirectangular (ERP) pixel/direction conventions, spherical rotation of
//! panoramas, and circular resampling.
//!
//! Conventions (fixed across the whole crate):
//! - pixel (u, v) has its center at longitude `alpha = 2*pi*(u+0.5)/width - pi`
//!   and polar angle `theta = pi*(v+0.5)/height`,
//! - directions are `(sin(theta)cos(alpha), sin(theta)sin(alpha), cos(theta))`
//!   with z up and theta measured from +z,
//! - longitude wraps circularly; polar angle clamps at the poles.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::math::{vec3, Rotation3, Vec3};

/// Pixel grid of an equirectangular image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErpLattice {
    width: usize,
    height: usize,
}

impl ErpLattice {
    /// General lattice; both dimensions must be at least 2.
    pub fn new(width: usize, height: usize) -> Result<ErpLattice> {
        if width < 2 || height < 2 {
            return Err(Error::Domain(format!(
                "lattice must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(ErpLattice { width, height })
    }

    /// Full panorama covering the whole sphere: width = 2 * height.
    pub fn full_panorama(height: usize) -> Result<ErpLattice> {
        ErpLattice::new(height.checked_mul(2).unwrap_or(0), height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Longitude of a (possibly fractional) column coordinate.
    pub fn alpha_of_u(&self, u: f64) -> f64 {
        TAU * (u + 0.5) / self.width as f64 - PI
    }

    /// Polar angle of a (possibly fractional) row coordinate.
    pub fn theta_of_v(&self, v: f64) -> f64 {
        PI * (v + 0.5) / self.height as f64
    }

    /// Wraps a signed column index into [0, width).
    pub fn wrap_u(&self, u: isize) -> usize {
        u.rem_euclid(self.width as isize) as usize
    }

    /// Clamps a signed row index into [0, height).
    pub fn clamp_v(&self, v: isize) -> usize {
        v.clamp(0, self.height as isize - 1) as usize
    }
}

/// Unit direction on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDir(Vec3);

const UNIT_NORM_TOL: f64 = 1e-12;

impl UnitDir {
    /// Wraps a vector that is already unit (norm within 1e-12).
    pub fn new(v: Vec3) -> Result<UnitDir> {
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Domain(format!("direction is not unit: |v| = {n}")));
        }
        Ok(UnitDir(v))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalize(v: Vec3) -> Result<UnitDir> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Domain(format!(
                "cannot normalize zero or non-finite vector ({}, {}, {})",
                v.x, v.y, v.z
            )));
        }
        Ok(UnitDir(v / n))
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn x(self) -> f64 {
        self.0.x
    }

    pub fn y(self) -> f64 {
        self.0.y
    }

    pub fn z(self) -> f64 {
        self.0.z
    }

    /// Applies a rotation (orthogonal, so the result stays unit).
    pub fn rotated(self, r: &Rotation3) -> UnitDir {
        UnitDir(r.apply(self.0))
    }
}

/// Direction of the pixel-center ray at (possibly fractional) coordinates.
///
/// `u` may be any real (longitude wraps); `v` must lie in [0, height).
pub fn pixel_to_dir(lattice: ErpLattice, u: f64, v: f64) -> Result<UnitDir> {
    if !(0.0..lattice.height as f64).contains(&v) {
        return Err(Error::Domain(format!(
            "row coordinate {v} outside [0, {})",
            lattice.height
        )));
    }
    let u = u.rem_euclid(lattice.width as f64);
    let alpha = lattice.alpha_of_u(u);
    let theta = lattice.theta_of_v(v);
    let (s_t, c_t) = theta.sin_cos();
    let (s_a, c_a) = alpha.sin_cos();
    Ok(UnitDir(vec3(s_t * c_a, s_t * s_a, c_t)))
}

/// Continuous pixel coordinates of a direction; inverse of [`pixel_to_dir`].
///
/// Poles map to the v endpoints (-0.5 and height-0.5) with longitude 0 by
/// convention. Returned u lies in [-0.5, width-0.5).
pub fn dir_to_pixel(lattice: ErpLattice, d: UnitDir) -> (f64, f64) {
    let v = d.vec();
    let mut alpha = if v.x == 0.0 && v.y == 0.0 {
        0.0
    } else {
        v.y.atan2(v.x)
    };
    if alpha >= PI {
        alpha = -PI;
    }
    let theta = v.z.clamp(-1.0, 1.0).acos();
    let u = lattice.width as f64 * (alpha + PI) / TAU - 0.5;
    let v = lattice.height as f64 * theta / PI - 0.5;
    (u, v)
}

/// Bilinear sample with circular wrap in u and clamp in v.
///
/// Integer coordinates return the stored value exactly.
pub fn sample_bilinear_circular<F: Field>(field: &F, u: f64, v: f64) -> F::Value {
    let lat = field.lattice();
    let (w, h) = (lat.width() as f64, lat.height() as f64);
    let u = u.rem_euclid(w);
    let v = v.clamp(0.0, h - 1.0);
    let u0 = u.floor();
    let v0 = v.floor();
    let fu = u - u0;
    let fv = v - v0;
    let u0 = u0 as usize % lat.width();
    let u1 = (u0 + 1) % lat.width();
    let v0 = v0 as usize;
    let v1 = (v0 + 1).min(lat.height() - 1);
    let row = |vv: usize| {
        if fu == 0.0 {
            field.get(u0, vv)
        } else {
            F::lerp(field.get(u0, vv), field.get(u1, vv), fu)
        }
    };
    if fv == 0.0 {
        row(v0)
    } else {
        F::lerp(row(v0), row(v1), fv)
    }
}

/// Nearest-neighbor sample with circular wrap in u and clamp in v.
pub fn sample_nearest_circular<F: Field>(field: &F, u: f64, v: f64) -> F::Value {
    let lat = field.lattice();
    let ui = lat.wrap_u(u.round() as isize);
    let vi = lat.clamp_v(v.round() as isize);
    field.get(ui, vi)
}

/// Interpolation mode for [`rotate_erp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Nearest,
    Bilinear,
}

/// Rotates a panorama: output pixel p takes the value of the input at
/// `dir_to_pixel(R^T * pixel_to_dir(p))`.
///
/// With nearest interpolation, a yaw by exactly `2*pi*k/width` reproduces the
/// input circularly shifted by k columns, bit-exactly.
pub fn rotate_erp<F: Field>(image: &F, r: &Rotation3, interp: Interp) -> F {
    let lat = image.lattice();
    let rt = r.transpose();
    F::from_fn(lat, |u, v| {
        let dir = pixel_to_dir(lat, u as f64, v as f64)
            .expect("integer pixel rows are always in range")
            .rotated(&rt);
        let (su, sv) = dir_to_pixel(lat, dir);
        match interp {
            Interp::Nearest => sample_nearest_circular(image, su, sv),
            Interp::Bilinear => sample_bilinear_circular(image, su, sv),
        }
    })
}
